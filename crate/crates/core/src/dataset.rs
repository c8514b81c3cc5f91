//! Chip-level response data laid out on a run table.

use crate::design::RunTable;
use crate::error::{Error, Result};

/// Chips per column in a microplate.
pub const ROWS_PER_COLUMN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    pub week: usize,
    pub plate: usize,
    pub row: usize,
    pub column: usize,
    pub tube: usize,
    /// Factor levels of the run this chip belongs to.
    pub levels: Vec<i8>,
    /// `None` for an excluded chip.
    pub response: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipDataset {
    pub factors: Vec<char>,
    pub chips: Vec<Chip>,
}

impl ChipDataset {
    /// One chip per row of every run, responses missing.
    pub fn from_run_table(table: &RunTable, rows: usize) -> Self {
        let chips = table
            .rows
            .iter()
            .flat_map(|r| {
                (1..=rows).map(move |row| Chip {
                    week: r.week,
                    plate: r.plate,
                    row,
                    column: r.column,
                    tube: r.tube,
                    levels: r.levels.clone(),
                    response: None,
                })
            })
            .collect();
        ChipDataset {
            factors: table.factors.clone(),
            chips,
        }
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.chips.iter().filter(|c| c.response.is_none()).count()
    }

    /// Chips with a response.
    pub fn observed(&self) -> impl Iterator<Item = &Chip> {
        self.chips.iter().filter(|c| c.response.is_some())
    }

    pub fn factor_index(&self, f: char) -> Option<usize> {
        self.factors.iter().position(|&c| c == f)
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<String> = ["week", "plate", "row", "column", "tube"].map(String::from).to_vec();
        header.extend(self.factors.iter().map(|f| f.to_string()));
        header.push("response".into());
        wtr.write_record(&header).expect("in-memory write");
        for c in &self.chips {
            let mut rec: Vec<String> = [c.week, c.plate, c.row, c.column, c.tube]
                .map(|v| v.to_string())
                .to_vec();
            rec.extend(c.levels.iter().map(|&l| if l > 0 { "1" } else { "-1" }.to_string()));
            rec.push(c.response.map(|v| format!("{v:.6}")).unwrap_or_default());
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Reads `week,plate,row,column,tube,<factors>,response`; header names
    /// are matched case-insensitively and an empty response is missing.
    pub fn from_csv(text: &str) -> Result<Self> {
        let ctx = "chip data";
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(ctx, e))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(ctx, format!("missing column {name}")))
        };
        let idx = [col("week")?, col("plate")?, col("row")?, col("column")?, col("tube")?];
        let resp = col("response")?;
        let factor_cols: Vec<(char, usize)> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.len() == 1 && h.as_bytes()[0].is_ascii_lowercase())
            .map(|(i, h)| (h.chars().next().expect("one char"), i))
            .collect();
        let mut chips = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(ctx, e))?;
            let line = n + 2;
            let int = |i: usize| -> Result<usize> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::parse(ctx, format!("line {line}: bad integer {:?}", &rec[i])))
            };
            let levels = factor_cols
                .iter()
                .map(|&(f, i)| match rec[i].trim_start_matches('+') {
                    "1" => Ok(1),
                    "-1" => Ok(-1),
                    v => Err(Error::parse(ctx, format!("line {line}: bad level {v:?} for {f}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            let response = match rec[resp].trim() {
                "" | "NA" | "na" => None,
                v => Some(
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(ctx, format!("line {line}: bad response {v:?}")))?,
                ),
            };
            chips.push(Chip {
                week: int(idx[0])?,
                plate: int(idx[1])?,
                row: int(idx[2])?,
                column: int(idx[3])?,
                tube: int(idx[4])?,
                levels,
                response,
            });
        }
        Ok(ChipDataset {
            factors: factor_cols.iter().map(|&(f, _)| f).collect(),
            chips,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{RunRow, RunTable};

    fn tiny() -> RunTable {
        RunTable {
            factors: vec!['a', 'b'],
            rows: vec![
                RunRow {
                    week: 1,
                    plate: 1,
                    column: 1,
                    position: 1,
                    tube: 1,
                    levels: vec![-1, 1],
                },
                RunRow {
                    week: 1,
                    plate: 1,
                    column: 2,
                    position: 2,
                    tube: 2,
                    levels: vec![1, -1],
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip_keeps_missing() {
        let mut d = ChipDataset::from_run_table(&tiny(), 3);
        assert_eq!(d.len(), 6);
        for (i, c) in d.chips.iter_mut().enumerate() {
            c.response = (i != 4).then_some(i as f64 * 1.5);
        }
        let back = ChipDataset::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.missing_count(), 1);
    }

    #[test]
    fn bad_level_is_parse_error() {
        let text = "week,plate,row,column,tube,a,response\n1,1,1,1,1,2,3.0\n";
        assert_eq!(ChipDataset::from_csv(text).unwrap_err().name(), "Parse");
    }
}
