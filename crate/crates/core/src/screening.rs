//! Per-stratum effect screening with the PSE(50) pseudo standard error.
//!
//! Effects use the difference-of-means convention: the mean response at the
//! high level of a contrast minus the mean at its low level. This is twice
//! the regression coefficient of the same contrast.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::ChipDataset;
use crate::design::{Key, RunTable};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::strata::StratumReport;

/// Smallest number of effects a PSE is computed from.
pub const MIN_EFFECTS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningConfig {
    pub alpha: f64,
    /// Monte Carlo replicates for the critical multiplier.
    pub replicates: usize,
    pub seed: u64,
    /// Strata with fewer classes get no PSE.
    pub min_df: usize,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            alpha: 0.10,
            replicates: 100_000,
            seed: 20_240_101,
            min_df: MIN_EFFECTS,
        }
    }
}

impl ScreeningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.replicates < 10_000 {
            return Err(Error::Invalid(format!(
                "at least 10000 Monte Carlo replicates are needed, got {}",
                self.replicates
            )));
        }
        if self.min_df < MIN_EFFECTS {
            return Err(Error::Invalid(format!("min_df must be at least {MIN_EFFECTS}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub key: Key,
    pub label: String,
    pub estimate: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimateSet {
    pub stratum: String,
    /// Sorted by decreasing absolute estimate.
    pub effects: Vec<EffectEstimate>,
    pub pse: Option<f64>,
    pub critical: Option<f64>,
}

impl EffectEstimateSet {
    pub fn active_labels(&self) -> Vec<&str> {
        self.effects
            .iter()
            .filter(|e| e.active)
            .map(|e| e.label.as_str())
            .collect()
    }

    pub fn get(&self, label: &str) -> Option<&EffectEstimate> {
        self.effects.iter().find(|e| e.label == label)
    }

    /// Sets the PSE, critical value and active flags from `multiplier`.
    pub fn classify(&mut self, multiplier: f64) -> Result<()> {
        let est: Vec<f64> = self.effects.iter().map(|e| e.estimate).collect();
        let pse = pse50(&est)?;
        let crit = multiplier * pse;
        for e in &mut self.effects {
            e.active = e.estimate.abs() > crit;
        }
        self.pse = Some(pse);
        self.critical = Some(crit);
        Ok(())
    }
}

/// Mean over the selected chip rows for every run, in run-table order.
pub fn row_average(data: &ChipDataset, table: &RunTable, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::Invalid("no rows selected for averaging".into()));
    }
    let mut cells: BTreeMap<(usize, usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    let mut missing = Vec::new();
    for c in data.chips.iter().filter(|c| rows.contains(&c.row)) {
        if c.response.is_none() {
            missing.push(format!(
                "week {} plate {} column {} row {}",
                c.week, c.plate, c.column, c.row
            ));
        }
        cells.entry((c.week, c.plate, c.column)).or_default().push(c.response);
    }
    if !missing.is_empty() {
        return Err(Error::MissingInSelectedRows(missing.join("; ")));
    }
    table
        .rows
        .iter()
        .map(|r| {
            let v = cells
                .get(&(r.week, r.plate, r.column))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            if v.len() != rows.len() {
                return Err(Error::MissingInSelectedRows(format!(
                    "week {} plate {} column {}: {} of {} selected rows present",
                    r.week,
                    r.plate,
                    r.column,
                    v.len(),
                    rows.len()
                )));
            }
            Ok(v.iter().flatten().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn contrast_estimate(values: &[f64], signs: &[i8]) -> f64 {
    let (mut hi, mut lo, mut nh, mut nl) = (0.0, 0.0, 0usize, 0usize);
    for (&v, &s) in values.iter().zip(signs) {
        if s > 0 {
            hi += v;
            nh += 1;
        } else {
            lo += v;
            nl += 1;
        }
    }
    hi / nh as f64 - lo / nl as f64
}

/// Estimates every alias class of `report` from run-level `values`.
pub fn estimate_effects(values: &[f64], table: &RunTable, report: &StratumReport) -> Result<Vec<EffectEstimateSet>> {
    if values.len() != table.n_runs() {
        return Err(Error::LengthMismatch {
            expected: table.n_runs(),
            got: values.len(),
        });
    }
    Ok(report
        .strata
        .iter()
        .map(|s| {
            let mut effects: Vec<EffectEstimate> = s
                .classes
                .iter()
                .map(|c| EffectEstimate {
                    key: c.key,
                    label: c.label.clone(),
                    estimate: contrast_estimate(values, &table.column_of(c.members[0])),
                    active: false,
                })
                .collect();
            effects.sort_by(|a, b| b.estimate.abs().total_cmp(&a.estimate.abs()));
            EffectEstimateSet {
                stratum: s.name.clone(),
                effects,
                pse: None,
                critical: None,
            }
        })
        .collect())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Lenth's pseudo standard error with median trimming at 2.5 s0.
pub fn pse50(estimates: &[f64]) -> Result<f64> {
    if estimates.len() < MIN_EFFECTS {
        return Err(Error::TooFewEffects {
            needed: MIN_EFFECTS,
            got: estimates.len(),
        });
    }
    let mut abs: Vec<f64> = estimates.iter().map(|e| e.abs()).collect();
    let s0 = 1.5 * median(&mut abs);
    if s0 == 0.0 {
        return Ok(0.0);
    }
    let mut kept: Vec<f64> = abs.into_iter().filter(|&e| e < 2.5 * s0).collect();
    Ok(1.5 * median(&mut kept))
}

/// `(1 - alpha)` quantile of |e|/PSE pooled over `m` standard normal
/// effects per replicate. Replicate `i` draws from its own ChaCha stream so
/// the result does not depend on the executor.
pub fn critical_multiplier(m: usize, cfg: &ScreeningConfig, exec: Exec) -> Result<f64> {
    if m < MIN_EFFECTS {
        return Err(Error::TooFewEffects {
            needed: MIN_EFFECTS,
            got: m,
        });
    }
    let per_rep: Vec<Vec<f64>> = exec.map_range(cfg.replicates, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let e: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let pse = pse50(&e).expect("m checked above");
        e.into_iter().map(|x| x.abs() / pse).collect()
    });
    let mut pooled: Vec<f64> = per_rep.into_iter().flatten().collect();
    pooled.sort_by(f64::total_cmp);
    let idx = ((1.0 - cfg.alpha) * pooled.len() as f64).ceil() as usize;
    Ok(pooled[idx.clamp(1, pooled.len()) - 1])
}

/// Estimates all classes and flags active effects in strata with at least
/// `cfg.min_df` classes.
pub fn screen(
    values: &[f64],
    table: &RunTable,
    report: &StratumReport,
    cfg: &ScreeningConfig,
    exec: Exec,
) -> Result<Vec<EffectEstimateSet>> {
    cfg.validate()?;
    let mut sets = estimate_effects(values, table, report)?;
    let mut multipliers: BTreeMap<usize, f64> = BTreeMap::new();
    for s in &mut sets {
        let m = s.effects.len();
        if m < cfg.min_df {
            continue;
        }
        let mult = match multipliers.get(&m) {
            Some(&v) => v,
            None => *multipliers.entry(m).or_insert(critical_multiplier(m, cfg, exec)?),
        };
        s.classify(mult)?;
    }
    Ok(sets)
}

/// Rows `stratum,effect,estimate,pse,critical,active`; thresholds are empty
/// for strata too small for a PSE.
pub fn screening_csv(sets: &[EffectEstimateSet]) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(["stratum", "effect", "estimate", "pse", "critical", "active"])
        .expect("in-memory write");
    let num = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for s in sets {
        for e in &s.effects {
            let active = if s.critical.is_some() {
                e.active.to_string()
            } else {
                String::new()
            };
            wtr.write_record([
                s.stratum.clone(),
                e.label.clone(),
                format!("{:.4}", e.estimate),
                num(s.pse),
                num(s.critical),
                active,
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Human-readable summary in the layout of a per-stratum effect table.
pub fn screening_text(sets: &[EffectEstimateSet]) -> String {
    let mut out = String::new();
    for s in sets {
        match (s.pse, s.critical) {
            (Some(p), Some(c)) => {
                let _ = writeln!(out, "{} (PSE {:.2}, critical {:.2})", s.stratum, p, c);
            }
            _ => {
                let _ = writeln!(out, "{} (too few effects for a PSE)", s.stratum);
            }
        }
        for e in &s.effects {
            let mark = if e.active { " *" } else { "" };
            let _ = writeln!(out, "  {:<16} {:>10.2}{}", e.label, e.estimate, mark);
        }
    }
    out
}
