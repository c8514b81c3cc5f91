use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{letter, letter_index, EffectWord};
use crate::error::{Error, Result};

use super::blocking::{assign_blocks, BlockingScheme, PositionLookup};
use super::fraction::{sign, Key, RegularDesign};

/// How tubes are shared between the columns of a week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TubeSharing {
    /// Every tube feeds one column on each plate of its week.
    AcrossPlates,
    /// All columns fed by a tube lie on a single plate.
    WithinPlate,
    /// One tube per column.
    PerRun,
}

/// Which contrasts define weeks and plates, and which factors define tubes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitPlan {
    /// Low level is week 1.
    pub week: EffectWord,
    /// Low level is the first plate of the week.
    pub plate: EffectWord,
    /// Factor indices whose level combination identifies a tube in a week.
    pub tube_factors: Vec<usize>,
    pub tubes_per_week: usize,
    pub sharing: TubeSharing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRow {
    pub week: usize,
    /// Global plate number, `2 * (week - 1) + plate_in_week`.
    pub plate: usize,
    /// Physical column of the plate, 1-based.
    pub column: usize,
    /// Blocking level (column position group); equals `column` when each
    /// position occurs once per plate.
    pub position: usize,
    pub tube: usize,
    pub levels: Vec<i8>,
}

/// The run table of a constructed experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTable {
    pub factors: Vec<char>,
    pub rows: Vec<RunRow>,
}

impl RunTable {
    pub fn n_runs(&self) -> usize {
        self.rows.len()
    }

    /// True when some plate holds a position more than once.
    pub fn has_position_column(&self) -> bool {
        self.rows.iter().any(|r| r.column != r.position)
    }

    /// +1/-1 column of `w` computed from the factor levels.
    pub fn column_of(&self, w: EffectWord) -> Vec<i8> {
        self.rows
            .iter()
            .map(|r| w.factors().map(|i| r.levels[i]).product())
            .collect()
    }

    pub fn n_plates(&self) -> usize {
        self.rows.iter().map(|r| r.plate).max().unwrap_or(0)
    }

    pub fn columns_per_plate(&self) -> usize {
        self.rows.iter().map(|r| r.column).max().unwrap_or(0)
    }

    /// Header is `Week,Plate,Column[,Position],Tube,a,b,...`; levels are
    /// written as `+1`/`-1`; LF line endings.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let with_pos = self.has_position_column();
        let mut header: Vec<String> = vec!["Week".into(), "Plate".into(), "Column".into()];
        if with_pos {
            header.push("Position".into());
        }
        header.push("Tube".into());
        header.extend(self.factors.iter().map(|c| c.to_string()));
        wtr.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.week.to_string(), r.plate.to_string(), r.column.to_string()];
            if with_pos {
                rec.push(r.position.to_string());
            }
            rec.push(r.tube.to_string());
            rec.extend(
                r.levels
                    .iter()
                    .map(|&l| if l > 0 { "+1".to_string() } else { "-1".to_string() }),
            );
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let ctx = "run table";
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(ctx, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (week, plate, column, tube) = match (col("Week"), col("Plate"), col("Column"), col("Tube")) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return Err(Error::parse(ctx, "header needs Week, Plate, Column and Tube")),
        };
        let position = col("Position");
        let mut factor_cols = Vec::new();
        for (i, h) in header.iter().enumerate() {
            let mut chars = h.chars();
            if let (Some(c), None) = (chars.next(), chars.next()) {
                if letter_index(c).is_some() {
                    factor_cols.push((i, c));
                }
            }
        }
        for (n, (_, c)) in factor_cols.iter().enumerate() {
            if letter(n) != *c {
                return Err(Error::parse(ctx, "factor columns must be a, b, c, ... in order"));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(ctx, e))?;
            let num = |i: usize| -> Result<usize> {
                rec.get(i).unwrap_or("").parse().map_err(|_| {
                    Error::parse(
                        ctx,
                        format!("bad integer in line {:?}", rec.position().map(|p| p.line())),
                    )
                })
            };
            let levels = factor_cols
                .iter()
                .map(|&(i, _)| match rec.get(i).unwrap_or("") {
                    "+1" | "1" | "+" => Ok(1),
                    "-1" | "-" => Ok(-1),
                    other => Err(Error::parse(ctx, format!("bad level {other:?}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            let column_v = num(column)?;
            rows.push(RunRow {
                week: num(week)?,
                plate: num(plate)?,
                column: column_v,
                position: match position {
                    Some(p) => num(p)?,
                    None => column_v,
                },
                tube: num(tube)?,
                levels,
            });
        }
        Ok(RunTable {
            factors: factor_cols.iter().map(|&(_, c)| c).collect(),
            rows,
        })
    }
}

/// Assigns every run to a week, plate, column and tube.
///
/// Weeks and plates follow the signs of the plan's contrasts. Within a
/// week, the distinct level combinations of the tube factors are sorted
/// (low before high, first factor slowest) and numbered consecutively;
/// week 2 continues after week 1. Rows are ordered by week, plate, position
/// and tube, and columns are numbered in that order within each plate.
pub fn assign_units(
    design: &RegularDesign,
    scheme: &BlockingScheme,
    lookup: &PositionLookup,
    plan: &UnitPlan,
) -> Result<RunTable> {
    let n = design.n_runs();
    let blocks = assign_blocks(design, scheme, lookup);
    let week_key: Key = design.key(plan.week);
    let plate_key: Key = design.key(plan.plate);
    if week_key == 0 || plate_key == 0 || week_key == plate_key {
        return Err(Error::InvalidGenerator(
            "week and plate contrasts must be distinct and non-constant".into(),
        ));
    }
    if plan.tube_factors.iter().any(|&f| f >= design.n_factors()) {
        return Err(Error::InvalidGenerator("tube factor out of range".into()));
    }
    let week_of = |r: usize| if sign(week_key, r) < 0 { 1 } else { 2 };
    let plate_of = |r: usize| 2 * (week_of(r) - 1) + if sign(plate_key, r) < 0 { 1 } else { 2 };
    let combo = |r: usize| -> Vec<i8> {
        plan.tube_factors
            .iter()
            .map(|&f| sign(design.main_effect_keys()[f], r))
            .collect()
    };

    let mut per_week: BTreeMap<usize, BTreeSet<Vec<i8>>> = BTreeMap::new();
    for r in 0..n {
        per_week.entry(week_of(r)).or_default().insert(combo(r));
    }
    for (week, combos) in &per_week {
        if combos.len() != plan.tubes_per_week {
            return Err(Error::TubeCountViolation(format!(
                "week {week} needs {} distinct tube-factor combinations, found {}",
                plan.tubes_per_week,
                combos.len()
            )));
        }
    }
    let tube_of = |r: usize| -> usize {
        let w = week_of(r);
        let rank = per_week[&w]
            .iter()
            .position(|c| *c == combo(r))
            .expect("combo recorded");
        (w - 1) * plan.tubes_per_week + rank + 1
    };

    let mut rows: Vec<(usize, RunRow)> = (0..n)
        .map(|r| {
            (
                r,
                RunRow {
                    week: week_of(r),
                    plate: plate_of(r),
                    column: 0,
                    position: blocks[r],
                    tube: tube_of(r),
                    levels: (0..design.n_factors())
                        .map(|f| sign(design.main_effect_keys()[f], r))
                        .collect(),
                },
            )
        })
        .collect();
    rows.sort_by_key(|(r, row)| (row.week, row.plate, row.position, row.tube, *r));
    let mut last_plate = 0;
    let mut slot = 0;
    for (_, row) in rows.iter_mut() {
        if row.plate != last_plate {
            last_plate = row.plate;
            slot = 0;
        }
        slot += 1;
        row.column = slot;
    }
    let table = RunTable {
        factors: design.factor_labels(),
        rows: rows.into_iter().map(|(_, row)| row).collect(),
    };
    check_sharing(&table, plan.sharing)?;
    Ok(table)
}

fn check_sharing(table: &RunTable, sharing: TubeSharing) -> Result<()> {
    let mut plates_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in &table.rows {
        plates_of.entry(r.tube).or_default().push(r.plate);
    }
    let plates_per_week = {
        let mut s = BTreeSet::new();
        for r in table.rows.iter().filter(|r| r.week == 1) {
            s.insert(r.plate);
        }
        s.len()
    };
    for (tube, plates) in &plates_of {
        let distinct: BTreeSet<usize> = plates.iter().copied().collect();
        let ok = match sharing {
            TubeSharing::AcrossPlates => plates.len() == plates_per_week && distinct.len() == plates_per_week,
            TubeSharing::WithinPlate => distinct.len() == 1,
            TubeSharing::PerRun => plates.len() == 1,
        };
        if !ok {
            return Err(Error::TubeCountViolation(format!(
                "tube {tube} is used on plates {plates:?}, which breaks the {sharing:?} rule"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::w;

    fn microplate_parts() -> (RegularDesign, BlockingScheme) {
        let base = RegularDesign::build_fraction(6, 1, &[w("abcde")]).unwrap();
        let scheme = BlockingScheme::new(&base, &[w("ab"), w("ce"), w("acf")]).unwrap();
        let full = base.extend(&[w("ace"), w("abc")]).unwrap();
        (full, scheme)
    }

    fn plan(week: &str, plate: &str, tubes: usize, sharing: TubeSharing) -> UnitPlan {
        UnitPlan {
            week: w(week),
            plate: w(plate),
            tube_factors: vec![0, 1, 2, 3],
            tubes_per_week: tubes,
            sharing,
        }
    }

    #[test]
    fn first_and_last_rows() {
        let (d, s) = microplate_parts();
        let t = assign_units(
            &d,
            &s,
            &PositionLookup::microplate_eight(),
            &plan("h", "g", 8, TubeSharing::AcrossPlates),
        )
        .unwrap();
        let first = &t.rows[0];
        assert_eq!((first.week, first.plate, first.column, first.tube), (1, 1, 1, 3));
        assert_eq!(first.levels, [-1, 1, 1, -1, 1, 1, -1, -1]);
        let last = t.rows.last().unwrap();
        assert_eq!((last.week, last.plate, last.column, last.tube), (2, 4, 8, 16));
        assert!(last.levels.iter().all(|&l| l == 1));
    }

    #[test]
    fn weeks_by_g_need_sixteen_tubes() {
        let (d, s) = microplate_parts();
        let e = assign_units(
            &d,
            &s,
            &PositionLookup::microplate_eight(),
            &plan("g", "h", 8, TubeSharing::AcrossPlates),
        )
        .unwrap_err();
        assert_eq!(e.name(), "TubeCountViolation");
        assert!(assign_units(
            &d,
            &s,
            &PositionLookup::microplate_eight(),
            &plan("g", "h", 16, TubeSharing::PerRun)
        )
        .is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let (d, s) = microplate_parts();
        let t = assign_units(
            &d,
            &s,
            &PositionLookup::microplate_eight(),
            &plan("h", "g", 8, TubeSharing::AcrossPlates),
        )
        .unwrap();
        let text = t.to_csv();
        assert!(text.starts_with("Week,Plate,Column,Tube,a,b,c,d,e,f,g,h\n1,1,1,3,-1,+1,+1,-1,+1,+1,-1,-1\n"));
        assert!(!text.contains('\r'));
        assert_eq!(RunTable::from_csv(&text).unwrap(), t);
    }
}
