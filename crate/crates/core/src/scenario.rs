//! Built-in microplate scenarios and user-defined ones read from TOML.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algebra::{join_words, letter, letter_index, EffectWord, DISPLAY_MAX_LEN};
use crate::design::{
    assign_units, enumerate_four_level_extensions, BlockingScheme, ExtensionClass, FourLevelExtension, PositionLookup,
    RegularDesign, RunTable, TubeSharing, UnitPlan,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::strata::{
    build_unit_structure, stratum_report, unit_decls_from_table, Labeler, StratumReport, UnitDecl, UnitSpan,
    UnitStructure,
};

/// Names of the built-in scenarios.
pub const PRESETS: [&str; 5] = ["paper", "alt1", "alt2", "alt3", "alt4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LookupKind {
    /// The eight-position plate layout.
    #[default]
    Microplate,
    /// Positions in standard order, first generator slowest.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourLevelRole {
    /// The two words become two new treatment factors.
    #[default]
    Factors,
    /// The two words become pseudo-factors of a four-level blocking factor.
    Blocks,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FourLevelConfig {
    pub words: [String; 2],
    #[serde(default)]
    pub role: FourLevelRole,
    #[serde(default = "default_block_prefix")]
    pub prefix: String,
}

fn default_block_prefix() -> String {
    "b".into()
}

fn default_pseudo_prefix() -> String {
    "p".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub name: String,
    /// Generating words; empty means every contrast.
    #[serde(default)]
    pub words: Vec<String>,
    #[serde(default)]
    pub nested_in: Option<String>,
    #[serde(default)]
    pub crossed_with: Vec<String>,
}

/// Everything needed to construct one experiment.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Number of base factors of the fraction.
    pub base_factors: usize,
    /// Generators of the added factors, in factor order.
    #[serde(default)]
    pub generators: Vec<String>,
    /// Generators of the column-position blocking.
    pub blocking: Vec<String>,
    #[serde(default = "default_pseudo_prefix")]
    pub block_prefix: String,
    #[serde(default)]
    pub lookup: LookupKind,
    #[serde(default)]
    pub four_level: Option<FourLevelConfig>,
    pub week: String,
    pub plate: String,
    /// Letters of the factors whose level combination identifies a tube.
    pub tube_factors: String,
    pub tubes_per_week: usize,
    pub sharing: TubeSharing,
    /// Unit lattice; read off the run table when empty.
    #[serde(default)]
    pub units: Vec<UnitConfig>,
}

fn word(s: &str) -> Result<EffectWord> {
    let w = EffectWord::parse(s)?;
    if w.is_identity() {
        return Err(Error::IdentityWord);
    }
    Ok(w)
}

fn words(v: &[String]) -> Result<Vec<EffectWord>> {
    v.iter().map(|s| word(s)).collect()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = ScenarioConfig {
            name: name.into(),
            description: String::new(),
            base_factors: 5,
            generators: strings(&["abcde"]),
            blocking: strings(&["ab", "ce", "acf"]),
            block_prefix: "p".into(),
            lookup: LookupKind::Microplate,
            four_level: Some(FourLevelConfig {
                words: ["ace".into(), "abc".into()],
                role: FourLevelRole::Factors,
                prefix: "b".into(),
            }),
            week: "h".into(),
            plate: "g".into(),
            tube_factors: "abcd".into(),
            tubes_per_week: 8,
            sharing: TubeSharing::AcrossPlates,
            units: Vec::new(),
        };
        match name {
            "paper" => {
                c.description = "2^(6-1) in 8 column positions, g and h as a four-level plate factor, \
                                 8 tubes per week shared by both plates"
                    .into();
            }
            "alt1" => {
                c.description = "as the microplate layout, but each tube is used twice on a single plate".into();
                c.tube_factors = "abce".into();
                c.sharing = TubeSharing::WithinPlate;
            }
            "alt2" => {
                c.description = "as the microplate layout, but 32 tubes: weeks by g, plates by h".into();
                c.week = "g".into();
                c.plate = "h".into();
                c.tubes_per_week = 16;
                c.sharing = TubeSharing::PerRun;
            }
            "alt3" => {
                c.description = "2^(8-3) with all factors varied within plates; weeks and plates \
                                 from a four-level blocking factor"
                    .into();
                c.generators = strings(&["abcd", "abe", "ace"]);
                c.blocking = strings(&["abc", "ad", "ae"]);
                c.four_level = Some(FourLevelConfig {
                    words: ["ade".into(), "abd".into()],
                    role: FourLevelRole::Blocks,
                    prefix: "b".into(),
                });
                c.week = "abd".into();
                c.plate = "ade".into();
            }
            "alt4" => {
                c.description = "as the microplate layout, but four distinct column positions".into();
                c.blocking = strings(&["ab", "acd"]);
                c.lookup = LookupKind::Standard;
                c.four_level = Some(FourLevelConfig {
                    words: ["abe".into(), "abc".into()],
                    role: FourLevelRole::Factors,
                    prefix: "b".into(),
                });
            }
            other => {
                return Err(Error::Invalid(format!(
                    "unknown preset {other}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(c)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("scenario config", e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A constructed experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// The fraction before any four-level treatment factor is added.
    pub base: RegularDesign,
    pub design: RegularDesign,
    pub scheme: BlockingScheme,
    /// Four-level blocking factor defining weeks and plates, if any.
    pub plate_scheme: Option<BlockingScheme>,
    pub extension: Option<FourLevelExtension>,
    pub table: RunTable,
    pub units: UnitStructure,
    pub labeler: Labeler,
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        Self::build(ScenarioConfig::preset(name)?)
    }

    pub fn build(config: ScenarioConfig) -> Result<Self> {
        let k = config.base_factors + config.generators.len();
        let base = RegularDesign::build_fraction(k, config.generators.len(), &words(&config.generators)?)?;
        let scheme = BlockingScheme::with_prefix(&base, &words(&config.blocking)?, &config.block_prefix)?;
        let lookup = match config.lookup {
            LookupKind::Microplate if scheme.dim() == 3 => PositionLookup::microplate_eight(),
            LookupKind::Microplate => {
                return Err(Error::Invalid(format!(
                    "the microplate layout needs 3 blocking generators, got {}",
                    scheme.dim()
                )))
            }
            LookupKind::Standard => PositionLookup::standard(scheme.dim()),
        };
        let (design, extension, plate_scheme) = match &config.four_level {
            None => (base.clone(), None, None),
            Some(fl) => {
                let (a, b) = (word(&fl.words[0])?, word(&fl.words[1])?);
                let ext = FourLevelExtension::new(&base, Some(&scheme), a, b)?;
                match fl.role {
                    FourLevelRole::Factors => (base.extend(&[a, b])?, Some(ext), None),
                    FourLevelRole::Blocks => {
                        let ps = BlockingScheme::with_prefix(&base, &[a, b], &fl.prefix)?;
                        (base.clone(), Some(ext), Some(ps))
                    }
                }
            }
        };
        let tube_factors = config
            .tube_factors
            .chars()
            .map(|c| {
                letter_index(c)
                    .filter(|&i| i < design.n_factors())
                    .ok_or_else(|| Error::InvalidGenerator(format!("unknown tube factor {c}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let plan = UnitPlan {
            week: word(&config.week)?,
            plate: word(&config.plate)?,
            tube_factors,
            tubes_per_week: config.tubes_per_week,
            sharing: config.sharing,
        };
        let table = assign_units(&design, &scheme, &lookup, &plan)?;
        let decls = if config.units.is_empty() {
            unit_decls_from_table(&design, &table)
        } else {
            config
                .units
                .iter()
                .map(|u| {
                    Ok(UnitDecl {
                        name: u.name.clone(),
                        span: if u.words.is_empty() {
                            UnitSpan::All
                        } else {
                            UnitSpan::Words(words(&u.words)?)
                        },
                        nested_in: u.nested_in.clone(),
                        crossed_with: u.crossed_with.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        };
        let units = build_unit_structure(&design, &decls)?;
        let mut labeler = Labeler::new().with_scheme(&scheme);
        if let Some(ps) = &plate_scheme {
            labeler = labeler.with_scheme(ps);
        }
        Ok(Scenario {
            config,
            base,
            design,
            scheme,
            plate_scheme,
            extension,
            table,
            units,
            labeler,
        })
    }

    pub fn stratum_report(&self) -> StratumReport {
        stratum_report(&self.design, &self.units, &self.labeler)
    }

    /// Every regular way to add the four-level factor, best first.
    pub fn four_level_options(&self, exec: Exec) -> Vec<ExtensionClass> {
        enumerate_four_level_extensions(&self.base, &self.scheme, exec)
    }

    /// Names of the three contrasts of the four-level factor.
    pub fn four_level_names(&self) -> [String; 3] {
        match &self.config.four_level {
            Some(fl) if fl.role == FourLevelRole::Blocks => [1, 2, 3].map(|i| format!("{}{i}", fl.prefix)),
            _ => {
                let g = letter(self.base.n_factors());
                let h = letter(self.base.n_factors() + 1);
                [g.to_string(), h.to_string(), format!("{g}{h}")]
            }
        }
    }

    /// Defining relation, pseudo-factor aliasing, four-level factor
    /// options and the chosen one.
    pub fn alias_report(&self, exec: Exec) -> String {
        let mut out = String::new();
        let d = &self.design;
        let _ = writeln!(out, "Scenario {}: {}", self.config.name, self.config.description);
        let _ = writeln!(out, "Design: {} factors in {} runs", d.n_factors(), d.n_runs());
        let rel: Vec<String> = d.relation().words().iter().map(|w| w.label()).collect();
        let _ = writeln!(out, "Defining relation: I = {}", rel.join(" = "));
        let wlp = d.wordlength_pattern();
        let pattern: Vec<String> = (3..=d.n_factors()).map(|l| wlp.count(l).to_string()).collect();
        let _ = writeln!(out, "Word length pattern (A3..): ({})", pattern.join(", "));
        match d.resolution() {
            Some(r) => {
                let _ = writeln!(out, "Resolution: {r}");
            }
            None => {
                let _ = writeln!(out, "Resolution: full factorial");
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Column-position pseudo-factors");
        for p in self.scheme.pseudo_factors() {
            let _ = writeln!(out, "  {:<4} {}", p.name, short_aliases(&self.base, p.key));
        }
        let names = self.four_level_names();
        if let Some(ps) = &self.plate_scheme {
            let _ = writeln!(out);
            let _ = writeln!(out, "Week and plate pseudo-factors");
            for p in ps.pseudo_factors() {
                let _ = writeln!(out, "  {:<4} {}", p.name, short_aliases(&self.base, p.key));
            }
        }
        if self.extension.is_some() {
            let _ = writeln!(out);
            let _ = writeln!(out, "Four-level factor options (best first)");
            let options = self.four_level_options(exec);
            for (i, c) in options.iter().enumerate() {
                let lines = c.representative.alias_lines(&self.base);
                let _ = writeln!(
                    out,
                    "  option {} ({} equivalent choices, {} two-factor interactions)",
                    i + 1,
                    c.size,
                    c.two_factor_aliases
                );
                for (n, l) in names.iter().zip(&lines) {
                    let _ = writeln!(out, "    {n:<4} {l}");
                }
            }
            if let Some(ext) = &self.extension {
                let which = options
                    .iter()
                    .position(|c| c.contains(ext))
                    .map(|i| format!("option {}", i + 1))
                    .unwrap_or_else(|| "no listed option".into());
                let _ = writeln!(out);
                let _ = writeln!(out, "Chosen ({which})");
                for (n, l) in names.iter().zip(ext.alias_lines(&self.base)) {
                    let _ = writeln!(out, "    {n:<4} {l}");
                }
            }
        }
        out
    }
}

fn short_aliases(design: &RegularDesign, key: crate::design::Key) -> String {
    let members = design.class_of_key(key);
    let short: Vec<EffectWord> = members.iter().copied().filter(|m| m.len() <= DISPLAY_MAX_LEN).collect();
    if short.is_empty() {
        members[0].label()
    } else {
        join_words(&short)
    }
}
