//! Chip-level linear mixed model: assembly from a [`ChipDataset`],
//! estimability of variance components, REML fitting, Wald F-tests with
//! Satterthwaite degrees of freedom, fitted means and LSDs.

mod reml;
mod simulate;

pub use reml::{fit_reml, InfoKind, LmmProblem, RandomBlock, RemlFit, RemlOptions};
pub use simulate::{simulate_response, SimulationParams, VarianceComponents};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::algebra::EffectWord;
use crate::dataset::{Chip, ChipDataset};
use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank tests.
const RANK_TOL: f64 = 1e-9;

/// Groupings of chips used by random and categorical fixed terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Week,
    Plate,
    Tube,
    /// A column of one plate.
    Column,
    /// A row of one plate.
    Row,
    /// Column position, pooled over plates.
    ColumnPosition,
    /// Row position, pooled over plates.
    RowPosition,
}

impl Factor {
    fn level(self, c: &Chip) -> (usize, usize) {
        match self {
            Factor::Week => (c.week, 0),
            Factor::Plate => (c.week, c.plate),
            Factor::Tube => (c.week, c.tube),
            Factor::Column => (c.plate, c.column),
            Factor::Row => (c.plate, c.row),
            Factor::ColumnPosition => (c.column, 0),
            Factor::RowPosition => (c.row, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixedTerm {
    Intercept,
    /// Product of the +-1 columns of the word's factors.
    Word(EffectWord),
    /// Effect-coded categorical term, one column per level but the last.
    Categorical {
        name: String,
        factor: Factor,
    },
}

impl FixedTerm {
    pub fn name(&self) -> String {
        match self {
            FixedTerm::Intercept => "(Intercept)".into(),
            FixedTerm::Word(w) => w.label(),
            FixedTerm::Categorical { name, .. } => name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTerm {
    pub name: String,
    pub factor: Factor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedModelSpec {
    pub fixed: Vec<FixedTerm>,
    pub random: Vec<RandomTerm>,
}

impl MixedModelSpec {
    /// Treatment effects a, c, d, g, h, ah, cd, gh, fixed column and row
    /// positions, and random week, plate, tube, column and row terms.
    pub fn microplate() -> Self {
        let mut fixed = vec![FixedTerm::Intercept];
        fixed.extend(
            ["a", "c", "d", "g", "h", "ah", "cd", "gh"]
                .iter()
                .map(|s| FixedTerm::Word(EffectWord::parse(s).expect("valid word"))),
        );
        fixed.push(FixedTerm::Categorical {
            name: "column".into(),
            factor: Factor::ColumnPosition,
        });
        fixed.push(FixedTerm::Categorical {
            name: "row".into(),
            factor: Factor::RowPosition,
        });
        let random = [
            ("week", Factor::Week),
            ("plate", Factor::Plate),
            ("tube", Factor::Tube),
            ("column", Factor::Column),
            ("row", Factor::Row),
        ]
        .iter()
        .map(|&(n, f)| RandomTerm {
            name: n.into(),
            factor: f,
        })
        .collect();
        MixedModelSpec { fixed, random }
    }

    /// Drops the fixed word terms named in `labels`.
    pub fn without(mut self, labels: &[&str]) -> Self {
        self.fixed
            .retain(|t| !matches!(t, FixedTerm::Word(w) if labels.contains(&w.label().as_str())));
        self
    }
}

fn levels_of(data: &[&Chip], f: Factor) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = data.iter().map(|c| f.level(c)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn indicator(data: &[&Chip], f: Factor) -> DMatrix<f64> {
    let levels = levels_of(data, f);
    let idx: BTreeMap<(usize, usize), usize> = levels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut z = DMatrix::zeros(data.len(), levels.len());
    for (i, c) in data.iter().enumerate() {
        z[(i, idx[&f.level(c)])] = 1.0;
    }
    z
}

fn word_value(data: &ChipDataset, c: &Chip, w: EffectWord) -> Result<f64> {
    let mut v = 1.0;
    for f in w.factors() {
        let letter = crate::algebra::letter(f);
        let i = data
            .factor_index(letter)
            .ok_or_else(|| Error::UnknownTerm(format!("factor {letter} is not in the data")))?;
        v *= f64::from(c.levels[i]);
    }
    Ok(v)
}

fn effect_code(level: usize, n_levels: usize) -> Vec<f64> {
    (0..n_levels - 1)
        .map(|j| {
            if level == j {
                1.0
            } else if level == n_levels - 1 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn matrix_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * max.max(1.0)).count()
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// The model matrices for the observed chips.
#[derive(Debug, Clone)]
struct Assembled {
    y: DVector<f64>,
    x: DMatrix<f64>,
    column_names: Vec<String>,
    /// Fixed term name and its column indices in `x`.
    terms: Vec<(String, Vec<usize>)>,
    dropped: Vec<String>,
    z: Vec<DMatrix<f64>>,
    /// Level counts of categorical fixed terms, for means.
    categorical_levels: BTreeMap<String, Vec<usize>>,
}

fn assemble(spec: &MixedModelSpec, data: &ChipDataset) -> Result<Assembled> {
    let obs: Vec<&Chip> = data.observed().collect();
    if obs.is_empty() {
        return Err(Error::DegenerateData("no observed responses".into()));
    }
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|c| c.response.expect("observed")));
    let mut cols: Vec<(String, String, DVector<f64>)> = Vec::new();
    let mut categorical_levels = BTreeMap::new();
    for t in &spec.fixed {
        match t {
            FixedTerm::Intercept => cols.push((t.name(), t.name(), DVector::from_element(obs.len(), 1.0))),
            FixedTerm::Word(w) => {
                let v = obs
                    .iter()
                    .map(|c| word_value(data, c, *w))
                    .collect::<Result<Vec<f64>>>()?;
                cols.push((t.name(), t.name(), DVector::from_vec(v)));
            }
            FixedTerm::Categorical { name, factor } => {
                let levels = levels_of(&obs, *factor);
                let n = levels.len();
                for j in 0..n.saturating_sub(1) {
                    let v = obs.iter().map(|c| {
                        let l = levels
                            .iter()
                            .position(|x| *x == factor.level(c))
                            .expect("observed level");
                        effect_code(l, n)[j]
                    });
                    cols.push((
                        name.clone(),
                        format!("{name}[{}]", levels[j].0),
                        DVector::from_iterator(obs.len(), v),
                    ));
                }
                categorical_levels.insert(name.clone(), levels.iter().map(|l| l.0).collect());
            }
        }
    }
    // keep columns that raise the rank, in declaration order
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut x = DMatrix::zeros(obs.len(), 0);
    for (i, (_, cname, v)) in cols.iter().enumerate() {
        let cand = hcat(&x, &DMatrix::from_column_slice(obs.len(), 1, v.as_slice()));
        if matrix_rank(&cand) > x.ncols() {
            x = cand;
            kept.push(i);
        } else {
            dropped.push(cname.clone());
        }
    }
    let mut terms: Vec<(String, Vec<usize>)> = Vec::new();
    for (j, &i) in kept.iter().enumerate() {
        let tname = &cols[i].0;
        match terms.iter_mut().find(|(n, _)| n == tname) {
            Some((_, v)) => v.push(j),
            None => terms.push((tname.clone(), vec![j])),
        }
    }
    let z = spec.random.iter().map(|r| indicator(&obs, r.factor)).collect();
    Ok(Assembled {
        y,
        x,
        column_names: kept.iter().map(|&i| cols[i].1.clone()).collect(),
        terms,
        dropped,
        z,
        categorical_levels,
    })
}

/// Estimability of one variance component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentFlag {
    pub name: String,
    pub estimable: bool,
    /// Contrasts of the grouping not absorbed by fixed effects.
    pub free_df: usize,
}

fn estimability(a: &Assembled, spec: &MixedModelSpec) -> Vec<ComponentFlag> {
    let rx = matrix_rank(&a.x);
    spec.random
        .iter()
        .zip(&a.z)
        .map(|(r, z)| {
            let free_df = matrix_rank(&hcat(&a.x, z)) - rx;
            ComponentFlag {
                name: r.name.clone(),
                estimable: free_df > 0,
                free_df,
            }
        })
        .collect()
}

/// Flags random terms whose grouping is fully absorbed by the fixed
/// effects. Such a variance cannot be separated from the fixed effects and
/// is left out of the fit.
pub fn detect_estimability(spec: &MixedModelSpec, data: &ChipDataset) -> Result<Vec<ComponentFlag>> {
    Ok(estimability(&assemble(spec, data)?, spec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub name: String,
    pub estimable: bool,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedEstimate {
    pub name: String,
    /// Coefficient of the +-1 (or effect-coded) column.
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FTest {
    pub term: String,
    pub num_df: usize,
    pub testable: bool,
    pub den_df: Option<f64>,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MixedModelFit {
    pub components: Vec<VarianceEstimate>,
    pub fixed: Vec<FixedEstimate>,
    pub tests: Vec<FTest>,
    pub dropped_columns: Vec<String>,
    pub n_obs: usize,
    pub n_missing: usize,
    pub reml: RemlFit,
    spec: MixedModelSpec,
    terms: Vec<(String, Vec<usize>)>,
    non_testable: Vec<String>,
    categorical_levels: BTreeMap<String, Vec<usize>>,
}

impl MixedModelFit {
    pub fn component(&self, name: &str) -> Option<&VarianceEstimate> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<&FixedEstimate> {
        self.fixed.iter().find(|c| c.name == name)
    }

    pub fn test(&self, term: &str) -> Option<&FTest> {
        self.tests.iter().find(|t| t.term == term)
    }

    pub fn is_testable(&self, term: &str) -> bool {
        !self.non_testable.iter().any(|t| t == term)
    }
}

/// Fits `spec` to the observed chips of `data` by REML.
///
/// Variance components of groupings absorbed by fixed effects are reported
/// as not estimable and the fixed terms they absorb as not testable.
pub fn reml_fit(spec: &MixedModelSpec, data: &ChipDataset, opts: &RemlOptions) -> Result<MixedModelFit> {
    let a = assemble(spec, data)?;
    let flags = estimability(&a, spec);
    let random: Vec<RandomBlock> = flags
        .iter()
        .zip(&a.z)
        .filter(|(f, _)| f.estimable)
        .map(|(f, z)| RandomBlock {
            name: f.name.clone(),
            z: z.clone(),
        })
        .collect();
    let prob = LmmProblem {
        y: a.y.clone(),
        x: a.x.clone(),
        random,
    };
    let fit = fit_reml(&prob, opts)?;

    let mut components = Vec::new();
    let mut k = 0;
    for f in &flags {
        if f.estimable {
            components.push(VarianceEstimate {
                name: f.name.clone(),
                estimable: true,
                estimate: Some(fit.theta[k]),
                se: Some(fit.cov_theta[(k, k)].max(0.0).sqrt()),
            });
            k += 1;
        } else {
            components.push(VarianceEstimate {
                name: f.name.clone(),
                estimable: false,
                estimate: None,
                se: None,
            });
        }
    }
    components.push(VarianceEstimate {
        name: "residual".into(),
        estimable: true,
        estimate: Some(fit.theta[k]),
        se: Some(fit.cov_theta[(k, k)].max(0.0).sqrt()),
    });

    let fixed = a
        .column_names
        .iter()
        .enumerate()
        .map(|(j, n)| FixedEstimate {
            name: n.clone(),
            estimate: fit.beta[j],
            se: fit.cov_beta[(j, j)].sqrt(),
        })
        .collect();

    // a term lying in the span of an absorbed grouping has no error stratum
    let absorbed: Vec<&DMatrix<f64>> = flags
        .iter()
        .zip(&a.z)
        .filter(|(f, _)| !f.estimable)
        .map(|(_, z)| z)
        .collect();
    let ranks: Vec<usize> = absorbed.iter().map(|z| matrix_rank(z)).collect();
    let non_testable: Vec<String> = a
        .terms
        .iter()
        .filter(|(_, cols)| {
            let xt = a.x.select_columns(cols.iter());
            absorbed
                .iter()
                .zip(&ranks)
                .any(|(z, &r)| matrix_rank(&hcat(z, &xt)) == r)
        })
        .map(|(n, _)| n.clone())
        .collect();

    let p = a.x.ncols();
    let tests = a
        .terms
        .iter()
        .filter(|(n, _)| n != "(Intercept)")
        .map(|(n, cols)| {
            if non_testable.contains(n) {
                return FTest {
                    term: n.clone(),
                    num_df: cols.len(),
                    testable: false,
                    den_df: None,
                    f: None,
                    p: None,
                };
            }
            let l: Vec<DVector<f64>> = cols
                .iter()
                .map(|&c| DVector::from_fn(p, |i, _| f64::from(u8::from(i == c))))
                .collect();
            let (f, den) = wald_f(&fit, &l);
            let pval = FisherSnedecor::new(l.len() as f64, den)
                .map(|d| 1.0 - d.cdf(f))
                .unwrap_or(f64::NAN)
                .clamp(0.0, 1.0);
            FTest {
                term: n.clone(),
                num_df: cols.len(),
                testable: true,
                den_df: Some(den),
                f: Some(f),
                p: Some(pval),
            }
        })
        .collect();

    Ok(MixedModelFit {
        components,
        fixed,
        tests,
        dropped_columns: a.dropped,
        n_obs: a.y.len(),
        n_missing: data.missing_count(),
        reml: fit,
        spec: spec.clone(),
        terms: a.terms,
        non_testable,
        categorical_levels: a.categorical_levels,
    })
}

/// Wald F and its denominator df for the rows of `l`. With several rows the
/// df combine single-contrast Satterthwaite df along the eigenvectors of
/// `L C L'` (Fai and Cornelius).
pub fn wald_f(fit: &RemlFit, l: &[DVector<f64>]) -> (f64, f64) {
    let q = l.len();
    let p = fit.beta.len();
    let lm = DMatrix::from_fn(q, p, |i, j| l[i][j]);
    let lb = &lm * &fit.beta;
    let lcl = &lm * &fit.cov_beta * lm.transpose();
    let eig = lcl.symmetric_eigen();
    let mut f = 0.0;
    let mut nus = Vec::with_capacity(q);
    for i in 0..q {
        let v = eig.eigenvectors.column(i);
        let d = eig.eigenvalues[i];
        let proj = v.dot(&lb);
        f += proj * proj / d;
        let contrast = lm.transpose() * v;
        nus.push(fit.satterthwaite_df(&contrast));
    }
    f /= q as f64;
    if q == 1 {
        return (f, nus[0]);
    }
    let e: f64 = nus.iter().filter(|&&nu| nu > 2.0).map(|nu| nu / (nu - 2.0)).sum();
    let den = if e > q as f64 {
        2.0 * e / (e - q as f64)
    } else {
        nus.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    (f, den)
}

/// Which cells fitted means are reported for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeansTerm {
    /// All sign combinations of these treatment factors.
    Factors(Vec<char>),
    /// Levels of a categorical fixed term such as `row` or `column`.
    Categorical(String),
}

impl MeansTerm {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("row") || s.eq_ignore_ascii_case("column") {
            return Ok(MeansTerm::Categorical(s.to_ascii_lowercase()));
        }
        let w = EffectWord::parse(s).map_err(|_| Error::UnknownTerm(s.to_string()))?;
        if w.is_identity() {
            return Err(Error::UnknownTerm(s.to_string()));
        }
        Ok(MeansTerm::Factors(w.factors().map(crate::algebra::letter).collect()))
    }

    pub fn name(&self) -> String {
        match self {
            MeansTerm::Factors(f) => f.iter().collect(),
            MeansTerm::Categorical(n) => n.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanLevel {
    pub level: String,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeansTable {
    pub term: String,
    pub levels: Vec<MeanLevel>,
    /// `None` when every difference involves a term without an error
    /// stratum.
    pub lsd: Option<f64>,
    pub lsd_df: Option<f64>,
    pub alpha: f64,
}

/// Model-based means for each cell of `term`, averaging over the other
/// terms, and the LSD at level `alpha` averaged over the pairs of cells
/// whose difference only involves testable terms.
pub fn fitted_means_and_lsd(fit: &MixedModelFit, term: &MeansTerm, alpha: f64) -> Result<MeansTable> {
    let p = fit.reml.beta.len();
    let mut cells: Vec<(String, DVector<f64>)> = Vec::new();
    match term {
        MeansTerm::Factors(letters) => {
            let known = fit.spec.fixed.iter().any(|t| {
                matches!(t, FixedTerm::Word(w) if w.factors().map(crate::algebra::letter).all(|c| letters.contains(&c))
                    && w.factors().count() == letters.len())
            });
            if !known {
                return Err(Error::UnknownTerm(term.name()));
            }
            for combo in 0..1usize << letters.len() {
                let sign = |c: char| -> f64 {
                    let i = letters.iter().position(|&x| x == c).expect("letter in term");
                    if combo >> (letters.len() - 1 - i) & 1 == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                };
                let mut l = DVector::zeros(p);
                for (name, cols) in &fit.terms {
                    let Some(t) = fit.spec.fixed.iter().find(|t| &t.name() == name) else {
                        continue;
                    };
                    match t {
                        FixedTerm::Intercept => l[cols[0]] = 1.0,
                        FixedTerm::Word(w) => {
                            let fs: Vec<char> = w.factors().map(crate::algebra::letter).collect();
                            if fs.iter().all(|c| letters.contains(c)) {
                                l[cols[0]] = fs.iter().map(|&c| sign(c)).product();
                            }
                        }
                        FixedTerm::Categorical { .. } => {}
                    }
                }
                let label = letters
                    .iter()
                    .map(|&c| format!("{c}={}", if sign(c) > 0.0 { "+1" } else { "-1" }))
                    .collect::<Vec<_>>()
                    .join(";");
                cells.push((label, l));
            }
        }
        MeansTerm::Categorical(name) => {
            let levels = fit
                .categorical_levels
                .get(name)
                .ok_or_else(|| Error::UnknownTerm(name.clone()))?;
            let cols = fit
                .terms
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, c)| c.clone())
                .unwrap_or_default();
            let icpt = fit.terms.iter().find(|(n, _)| n == "(Intercept)").map(|(_, c)| c[0]);
            for (li, lv) in levels.iter().enumerate() {
                let mut l = DVector::zeros(p);
                if let Some(i) = icpt {
                    l[i] = 1.0;
                }
                for (j, v) in effect_code(li, levels.len()).into_iter().enumerate() {
                    if let Some(&c) = cols.get(j) {
                        l[c] = v;
                    }
                }
                cells.push((lv.to_string(), l));
            }
        }
    }
    let levels: Vec<MeanLevel> = cells
        .iter()
        .map(|(label, l)| MeanLevel {
            level: label.clone(),
            mean: l.dot(&fit.reml.beta),
            se: fit.reml.contrast_variance(l).max(0.0).sqrt(),
        })
        .collect();

    let blocked: Vec<usize> = fit
        .terms
        .iter()
        .filter(|(n, _)| fit.non_testable.contains(n))
        .flat_map(|(_, c)| c.iter().copied())
        .collect();
    // pairs whose difference involves an untestable term have no LSD
    let mut lsds = Vec::new();
    let mut dfs = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let d = &cells[i].1 - &cells[j].1;
            if blocked.iter().any(|&c| d[c].abs() > 1e-12) {
                continue;
            }
            let nu = fit.reml.satterthwaite_df(&d);
            let t = StudentsT::new(0.0, 1.0, nu.min(1e7))
                .map(|s| s.inverse_cdf(1.0 - alpha / 2.0))
                .unwrap_or(f64::NAN);
            lsds.push(t * fit.reml.contrast_variance(&d).max(0.0).sqrt());
            dfs.push(nu);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (lsd, lsd_df) = if !lsds.is_empty() {
        (Some(mean(&lsds)), Some(mean(&dfs)))
    } else {
        (None, None)
    };
    Ok(MeansTable {
        term: term.name(),
        levels,
        lsd,
        lsd_df,
        alpha,
    })
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        wtr.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

impl MixedModelFit {
    /// `component,estimable,estimate,se`; non-estimable rows show `-`.
    pub fn variance_csv(&self) -> String {
        let mut rows = vec![vec![
            "component".into(),
            "estimable".into(),
            "estimate".into(),
            "se".into(),
        ]];
        for c in &self.components {
            rows.push(vec![
                c.name.clone(),
                c.estimable.to_string(),
                opt(c.estimate, 4),
                opt(c.se, 4),
            ]);
        }
        csv_string(rows)
    }

    /// `term,num_df,den_df,f,p,testable`.
    pub fn ftest_csv(&self) -> String {
        let mut rows = vec![["term", "num_df", "den_df", "f", "p", "testable"]
            .map(String::from)
            .to_vec()];
        for t in &self.tests {
            rows.push(vec![
                t.term.clone(),
                t.num_df.to_string(),
                opt(t.den_df, 2),
                opt(t.f, 4),
                opt(t.p, 6),
                t.testable.to_string(),
            ]);
        }
        csv_string(rows)
    }

    /// `term,estimate,se`.
    pub fn fixed_csv(&self) -> String {
        let mut rows = vec![["term", "estimate", "se"].map(String::from).to_vec()];
        for c in &self.fixed {
            rows.push(vec![
                c.name.clone(),
                format!("{:.4}", c.estimate),
                format!("{:.4}", c.se),
            ]);
        }
        csv_string(rows)
    }
}

impl MeansTable {
    /// `term,level,mean,se,lsd`; the LSD column reads `unavailable` when it
    /// cannot be determined.
    pub fn to_csv(&self) -> String {
        let lsd = self
            .lsd
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "unavailable".into());
        let mut rows = vec![["term", "level", "mean", "se", "lsd"].map(String::from).to_vec()];
        for l in &self.levels {
            rows.push(vec![
                self.term.clone(),
                l.level.clone(),
                format!("{:.4}", l.mean),
                format!("{:.4}", l.se),
                lsd.clone(),
            ]);
        }
        csv_string(rows)
    }
}
