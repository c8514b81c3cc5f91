//! Dense REML for variance-component models `y = Xb + sum Z_k u_k + e`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// A random term given by its (indicator) design matrix.
#[derive(Debug, Clone)]
pub struct RandomBlock {
    pub name: String,
    pub z: DMatrix<f64>,
}

/// A full-column-rank fixed design with random blocks. The residual
/// variance is always present and comes last in every parameter vector.
#[derive(Debug, Clone)]
pub struct LmmProblem {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub random: Vec<RandomBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemlOptions {
    pub max_iter: usize,
    /// Relative change of the criterion below which iteration stops.
    pub tol: f64,
}

impl Default for RemlOptions {
    fn default() -> Self {
        RemlOptions {
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

/// Which information matrix the variance-component covariance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoKind {
    Observed,
    Expected,
}

#[derive(Debug, Clone)]
pub struct RemlFit {
    /// Random-term variances in problem order, then the residual variance.
    pub theta: Vec<f64>,
    /// Inverse information of `theta`.
    pub cov_theta: DMatrix<f64>,
    pub info_kind: InfoKind,
    pub beta: DVector<f64>,
    /// `(X' V^-1 X)^-1`.
    pub cov_beta: DMatrix<f64>,
    /// Derivatives of `cov_beta` with respect to each entry of `theta`.
    pub cov_beta_grad: Vec<DMatrix<f64>>,
    pub loglik: f64,
    pub iterations: usize,
    /// Criterion after every accepted step.
    pub history: Vec<f64>,
    pub residual_df: usize,
}

impl RemlFit {
    /// Variance of `l' beta`.
    pub fn contrast_variance(&self, l: &DVector<f64>) -> f64 {
        (l.transpose() * &self.cov_beta * l)[(0, 0)]
    }

    /// Satterthwaite degrees of freedom for `l' beta`.
    pub fn satterthwaite_df(&self, l: &DVector<f64>) -> f64 {
        let var = self.contrast_variance(l);
        let g = DVector::from_iterator(
            self.theta.len(),
            self.cov_beta_grad.iter().map(|d| (l.transpose() * d * l)[(0, 0)]),
        );
        let denom = (g.transpose() * &self.cov_theta * &g)[(0, 0)];
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        2.0 * var * var / denom
    }
}

/// Quantities at one value of `theta`.
struct Eval {
    loglik: f64,
    p: DMatrix<f64>,
    py: DVector<f64>,
    vinv_x: DMatrix<f64>,
    c_inv: DMatrix<f64>,
}

struct Engine<'a> {
    prob: &'a LmmProblem,
    zzt: Vec<DMatrix<f64>>,
}

impl<'a> Engine<'a> {
    fn new(prob: &'a LmmProblem) -> Self {
        let zzt = prob.random.iter().map(|b| &b.z * b.z.transpose()).collect();
        Engine { prob, zzt }
    }

    fn m(&self) -> usize {
        self.prob.random.len() + 1
    }

    fn eval(&self, theta: &[f64]) -> Option<Eval> {
        let n = self.prob.y.len();
        let mut v = DMatrix::<f64>::identity(n, n) * theta[self.m() - 1];
        for (k, zz) in self.zzt.iter().enumerate() {
            if theta[k] != 0.0 {
                v += zz * theta[k];
            }
        }
        let chol = Cholesky::new(v)?;
        let logdet_v = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let vinv = chol.inverse();
        let vinv_x = &vinv * &self.prob.x;
        let c = self.prob.x.transpose() * &vinv_x;
        let c_chol = Cholesky::new(c)?;
        let logdet_c = 2.0 * c_chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let c_inv = c_chol.inverse();
        let p = vinv - &vinv_x * &c_inv * vinv_x.transpose();
        let py = &p * &self.prob.y;
        let ypy = self.prob.y.dot(&py);
        let loglik = -0.5 * (logdet_v + logdet_c + ypy);
        loglik.is_finite().then_some(Eval {
            loglik,
            p,
            py,
            vinv_x,
            c_inv,
        })
    }

    /// `V_k` times a vector.
    fn v_k(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        if k == self.m() - 1 {
            x.clone()
        } else {
            let z = &self.prob.random[k].z;
            z * (z.transpose() * x)
        }
    }

    fn score(&self, e: &Eval) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            (0..self.m()).map(|k| {
                let (tr, quad) = if k == self.m() - 1 {
                    (e.p.trace(), e.py.norm_squared())
                } else {
                    let z = &self.prob.random[k].z;
                    let tr = (z.transpose() * &e.p * z).trace();
                    (tr, (z.transpose() * &e.py).norm_squared())
                };
                0.5 * (quad - tr)
            }),
        )
    }

    /// Average information `y'P V_k P V_l P y / 2`.
    fn average_info(&self, e: &Eval) -> DMatrix<f64> {
        let m = self.m();
        let mut u = DMatrix::<f64>::zeros(e.py.len(), m);
        for k in 0..m {
            u.set_column(k, &self.v_k(k, &e.py));
        }
        (u.transpose() * &e.p * &u) * 0.5
    }

    /// Expected information `tr(P V_k P V_l) / 2`.
    fn expected_info(&self, e: &Eval) -> DMatrix<f64> {
        let m = self.m();
        let pz: Vec<DMatrix<f64>> = self.prob.random.iter().map(|b| &e.p * &b.z).collect();
        let mut f = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let v = match (k == m - 1, l == m - 1) {
                    (true, true) => e.p.norm_squared(),
                    (false, true) => pz[k].norm_squared(),
                    _ => (self.prob.random[k].z.transpose() * &pz[l]).norm_squared(),
                };
                f[(k, l)] = 0.5 * v;
                f[(l, k)] = 0.5 * v;
            }
        }
        f
    }
}

/// Solves `a x = b` restricted to the `free` indices; other entries are 0.
fn solve_free(a: &DMatrix<f64>, b: &DVector<f64>, free: &[usize]) -> Option<DVector<f64>> {
    let n = free.len();
    let sub = DMatrix::from_fn(n, n, |i, j| a[(free[i], free[j])]);
    let rhs = DVector::from_fn(n, |i, _| b[free[i]]);
    let x = match Cholesky::new(sub.clone()) {
        Some(c) => c.solve(&rhs),
        None => sub.lu().solve(&rhs)?,
    };
    let mut out = DVector::zeros(b.len());
    for (i, &f) in free.iter().enumerate() {
        out[f] = x[i];
    }
    Some(out)
}

fn invert_pd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let c: Cholesky<f64, Dyn> = Cholesky::new(a.clone())?;
    let inv = c.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Maximizes the REML criterion over non-negative variances.
///
/// Steps are average-information Newton steps on the components not held
/// at zero, projected onto the boundary and halved until the criterion
/// does not decrease.
pub fn fit_reml(prob: &LmmProblem, opts: &RemlOptions) -> Result<RemlFit> {
    let n = prob.y.len();
    let p = prob.x.ncols();
    if n <= p {
        return Err(Error::DegenerateData(format!(
            "{n} observations for {p} fixed-effect columns"
        )));
    }
    let eng = Engine::new(prob);
    let m = eng.m();

    // residual variance of the OLS fit sets the scale
    let xtx = prob.x.transpose() * &prob.x;
    let xty = prob.x.transpose() * &prob.y;
    let b_ols = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateData("fixed-effect design is rank deficient".into()))?
        .solve(&xty);
    let resid = &prob.y - &prob.x * &b_ols;
    let s2 = resid.norm_squared() / (n - p) as f64;
    let scale = prob.y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    if s2 <= floor {
        return exact_fit(&eng, floor, b_ols);
    }

    let mut theta = vec![s2 / m as f64; m];
    let mut cur = eng
        .eval(&theta)
        .ok_or_else(|| Error::DegenerateData("initial covariance is not positive definite".into()))?;
    let mut history = vec![cur.loglik];
    let mut iterations = 0;
    loop {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                detail: format!("criterion {:.6}, variances {:?}", cur.loglik, theta),
            });
        }
        iterations += 1;
        let score = eng.score(&cur);
        let ai = eng.average_info(&cur);
        let free: Vec<usize> = (0..m)
            .filter(|&k| k == m - 1 || theta[k] > 0.0 || score[k] > 0.0)
            .collect();
        let Some(step) = solve_free(&ai, &score, &free) else {
            return Err(Error::NonConvergence {
                iterations,
                detail: "singular average information".into(),
            });
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..m)
                .map(|k| {
                    let v = theta[k] + t * step[k];
                    if k == m - 1 {
                        v.max(floor)
                    } else {
                        v.max(0.0)
                    }
                })
                .collect();
            if let Some(e) = eng.eval(&cand) {
                if e.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() {
                    accepted = Some((cand, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, e)) = accepted else {
            break;
        };
        let change = (e.loglik - cur.loglik).abs() / cur.loglik.abs().max(1.0);
        let size = theta.iter().cloned().fold(0.0, f64::max).max(floor);
        let moved = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / size;
        theta = next;
        cur = e;
        history.push(cur.loglik.max(*history.last().expect("non-empty")));
        if change < opts.tol && moved < opts.tol.sqrt() * 1e-2 {
            break;
        }
    }
    finish(&eng, theta, cur, iterations, history, n - p)
}

fn exact_fit(eng: &Engine, floor: f64, beta: DVector<f64>) -> Result<RemlFit> {
    let m = eng.m();
    let mut theta = vec![0.0; m];
    theta[m - 1] = floor;
    let e = eng
        .eval(&theta)
        .ok_or_else(|| Error::DegenerateData("singular covariance".into()))?;
    let n = eng.prob.y.len();
    let mut fit = finish(eng, theta, e, 0, Vec::new(), n - eng.prob.x.ncols())?;
    fit.theta[m - 1] = 0.0;
    fit.beta = beta;
    Ok(fit)
}

fn finish(
    eng: &Engine,
    theta: Vec<f64>,
    e: Eval,
    iterations: usize,
    history: Vec<f64>,
    residual_df: usize,
) -> Result<RemlFit> {
    let m = eng.m();
    let expected = eng.expected_info(&e);
    let observed = eng.average_info(&e) * 2.0 - &expected;
    let (cov_theta, info_kind) = match invert_pd(&observed) {
        Some(c) => (c, InfoKind::Observed),
        None => (
            invert_pd(&expected)
                .or_else(|| expected.clone().pseudo_inverse(1e-12).ok())
                .unwrap_or_else(|| DMatrix::zeros(m, m)),
            InfoKind::Expected,
        ),
    };
    let beta = &e.c_inv * (e.vinv_x.transpose() * &eng.prob.y);
    let cov_beta_grad = (0..m)
        .map(|k| {
            let w = if k == m - 1 {
                e.vinv_x.clone()
            } else {
                eng.prob.random[k].z.transpose() * &e.vinv_x
            };
            &e.c_inv * (w.transpose() * w) * &e.c_inv
        })
        .collect();
    Ok(RemlFit {
        theta,
        cov_theta,
        info_kind,
        beta,
        cov_beta: e.c_inv,
        cov_beta_grad,
        loglik: e.loglik,
        iterations,
        history,
        residual_df,
    })
}
