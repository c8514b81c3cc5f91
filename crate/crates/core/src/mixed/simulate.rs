use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::{letter, EffectWord};
use crate::dataset::{ChipDataset, ROWS_PER_COLUMN};
use crate::design::RunTable;
use crate::error::{Error, Result};

use super::Factor;

/// Variances of the random terms of the chip-level model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    pub week: f64,
    pub plate: f64,
    pub tube: f64,
    pub column: f64,
    pub row: f64,
    pub residual: f64,
}

impl VarianceComponents {
    pub const ZERO: VarianceComponents = VarianceComponents {
        week: 0.0,
        plate: 0.0,
        tube: 0.0,
        column: 0.0,
        row: 0.0,
        residual: 0.0,
    };

    /// Tube, column, row and residual variances estimated for the fibrosity
    /// response. Week and plate variances cannot be estimated from that
    /// design, so 10 is used for both.
    pub fn microplate() -> Self {
        VarianceComponents {
            week: 10.0,
            plate: 10.0,
            tube: 2.5,
            column: 6.2,
            row: 1.9,
            residual: 179.8,
        }
    }

    fn as_array(&self) -> [(Factor, f64); 5] {
        [
            (Factor::Week, self.week),
            (Factor::Plate, self.plate),
            (Factor::Tube, self.tube),
            (Factor::Column, self.column),
            (Factor::Row, self.row),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    pub intercept: f64,
    /// Regression coefficients of +-1 word columns, half the
    /// difference-of-means effect.
    pub effects: Vec<(EffectWord, f64)>,
    /// Additive effect of each row position, if any.
    pub row_effects: Vec<f64>,
    pub variances: VarianceComponents,
    pub rows: usize,
    /// Number of chips whose response is removed.
    pub missing: usize,
    pub seed: u64,
}

impl SimulationParams {
    /// Mean 329 and the leading screening effects of the fibrosity
    /// response, as coefficients.
    pub fn microplate() -> Self {
        let effects = [
            ("h", -13.83),
            ("gh", 16.27),
            ("g", 5.39),
            ("cd", -5.45),
            ("a", -4.89),
            ("d", -4.55),
            ("ah", -3.02),
            ("c", 2.27),
            ("ade", 5.20),
            ("acf", -2.77),
        ]
        .iter()
        .map(|&(s, e)| (EffectWord::parse(s).expect("valid word"), e / 2.0))
        .collect();
        SimulationParams {
            intercept: 329.0,
            effects,
            row_effects: Vec::new(),
            variances: VarianceComponents::microplate(),
            rows: ROWS_PER_COLUMN,
            missing: 0,
            seed: 1,
        }
    }
}

/// Draws a chip dataset on `table`: one normal draw per unit of each random
/// term, in sorted unit order, then one residual per chip.
pub fn simulate_response(table: &RunTable, params: &SimulationParams) -> Result<ChipDataset> {
    let v = &params.variances;
    let all = [v.week, v.plate, v.tube, v.column, v.row, v.residual];
    if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Invalid(
            "variance components must be finite and non-negative".into(),
        ));
    }
    if !params.row_effects.is_empty() && params.row_effects.len() != params.rows {
        return Err(Error::LengthMismatch {
            expected: params.rows,
            got: params.row_effects.len(),
        });
    }
    let mut data = ChipDataset::from_run_table(table, params.rows);
    if params.missing > data.len() {
        return Err(Error::Invalid(format!(
            "cannot remove {} of {} chips",
            params.missing,
            data.len()
        )));
    }
    let cols: Vec<(Vec<usize>, f64)> = params
        .effects
        .iter()
        .map(|(w, b)| {
            let idx = w
                .factors()
                .map(|f| {
                    data.factor_index(letter(f))
                        .ok_or_else(|| Error::UnknownTerm(format!("factor {} is not in the design", letter(f))))
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok((idx, *b))
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut draws: Vec<BTreeMap<(usize, usize), f64>> = Vec::new();
    for (factor, var) in v.as_array() {
        let mut units: BTreeMap<(usize, usize), f64> = data.chips.iter().map(|c| (factor.level(c), 0.0)).collect();
        let sd = var.sqrt();
        for u in units.values_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *u = sd * z;
        }
        draws.push(units);
    }
    let sd_e = v.residual.sqrt();
    let factors = v.as_array();
    for c in data.chips.iter_mut() {
        let fixed: f64 = cols
            .iter()
            .map(|(idx, b)| b * idx.iter().map(|&i| f64::from(c.levels[i])).product::<f64>())
            .sum();
        let row = params.row_effects.get(c.row - 1).copied().unwrap_or(0.0);
        let random: f64 = factors.iter().zip(&draws).map(|((f, _), d)| d[&f.level(c)]).sum();
        let z: f64 = StandardNormal.sample(&mut rng);
        c.response = Some(params.intercept + fixed + row + random + sd_e * z);
    }
    for i in sample(&mut rng, data.len(), params.missing) {
        data.chips[i].response = None;
    }
    Ok(data)
}
