//! Randomization unit lattices and allocation of alias classes to error
//! strata.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::algebra::EffectWord;
use crate::design::{BlockingScheme, Key, RegularDesign, RunRow, RunTable};
use crate::error::{Error, Result};
use crate::gf2;

/// Contrasts that are constant on the units of a unit factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitSpan {
    /// Spanned by these words.
    Words(Vec<EffectWord>),
    /// Every contrast: one unit per run.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitDecl {
    pub name: String,
    pub span: UnitSpan,
    pub nested_in: Option<String>,
    pub crossed_with: Vec<String>,
}

impl UnitDecl {
    pub fn new(name: &str, words: &[EffectWord]) -> Self {
        UnitDecl {
            name: name.to_string(),
            span: UnitSpan::Words(words.to_vec()),
            nested_in: None,
            crossed_with: Vec::new(),
        }
    }

    pub fn all(name: &str) -> Self {
        UnitDecl {
            name: name.to_string(),
            span: UnitSpan::All,
            nested_in: None,
            crossed_with: Vec::new(),
        }
    }

    pub fn nested_in(mut self, parent: &str) -> Self {
        self.nested_in = Some(parent.to_string());
        self
    }

    pub fn crossed_with(mut self, other: &str) -> Self {
        self.crossed_with.push(other.to_string());
        self
    }
}

/// One stratum of a validated unit structure.
#[derive(Debug, Clone)]
pub struct UnitFactor {
    pub name: String,
    /// Other declared unit factors with the same subgroup.
    pub merged: Vec<String>,
    basis: Vec<Key>,
    dim: usize,
}

impl UnitFactor {
    pub fn contains(&self, key: Key) -> bool {
        gf2::Basis::from_vectors(self.basis.iter().copied()).contains(key)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Strata ordered from coarsest to finest.
#[derive(Debug, Clone)]
pub struct UnitStructure {
    strata: Vec<UnitFactor>,
    n_runs: usize,
}

fn span_keys(basis: &[Key]) -> HashSet<Key> {
    gf2::span(basis).into_iter().collect()
}

/// Validates the declarations and merges unit factors with identical
/// subgroups, keeping the name declared last (the finer unit).
pub fn build_unit_structure(design: &RegularDesign, decls: &[UnitDecl]) -> Result<UnitStructure> {
    let full: Vec<Key> = (0..design.k_base()).map(|i| 1 << i).collect();
    let mut bases: Vec<Vec<Key>> = Vec::new();
    for d in decls {
        let vs: Vec<Key> = match &d.span {
            UnitSpan::All => full.clone(),
            UnitSpan::Words(ws) => ws.iter().map(|&w| design.key(w)).collect(),
        };
        let mut b = gf2::Basis::new();
        bases.push(vs.into_iter().filter(|&v| b.insert(v)).collect());
    }
    let find = |name: &str| -> Result<usize> {
        decls
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::InconsistentLattice(format!("unknown unit factor {name}")))
    };
    for (i, d) in decls.iter().enumerate() {
        if let Some(p) = &d.nested_in {
            let j = find(p)?;
            let child = gf2::Basis::from_vectors(bases[i].iter().copied());
            if !bases[j].iter().all(|&k| child.contains(k)) {
                return Err(Error::InconsistentLattice(format!(
                    "{} is nested in {} but does not contain its subgroup",
                    d.name, p
                )));
            }
        }
        for other in &d.crossed_with {
            let j = find(other)?;
            let parent = match (&d.nested_in, &decls[j].nested_in) {
                (Some(a), Some(b)) if a == b => Some(find(a)?),
                (None, None) => None,
                _ => {
                    return Err(Error::InconsistentLattice(format!(
                        "{} and {} are crossed but not nested in the same unit",
                        d.name, other
                    )))
                }
            };
            let a = span_keys(&bases[i]);
            let b = span_keys(&bases[j]);
            let common: HashSet<Key> = a.intersection(&b).copied().collect();
            let expected = match parent {
                Some(p) => span_keys(&bases[p]),
                None => HashSet::from([0]),
            };
            if common != expected {
                return Err(Error::InconsistentLattice(format!(
                    "{} crossed with {} must intersect exactly in their common parent",
                    d.name, other
                )));
            }
        }
    }
    let mut strata: Vec<UnitFactor> = Vec::new();
    for (i, d) in decls.iter().enumerate() {
        let keys = span_keys(&bases[i]);
        if let Some(s) = strata.iter_mut().find(|s| span_keys(&s.basis) == keys) {
            let old = std::mem::replace(&mut s.name, d.name.clone());
            s.merged.push(old);
            continue;
        }
        strata.push(UnitFactor {
            name: d.name.clone(),
            merged: Vec::new(),
            dim: bases[i].len(),
            basis: bases[i].clone(),
        });
    }
    if !strata.iter().any(|s| s.dim == design.k_base()) {
        strata.push(UnitFactor {
            name: "Unit".into(),
            merged: Vec::new(),
            dim: design.k_base(),
            basis: full,
        });
    }
    strata.sort_by_key(|s| s.dim);
    Ok(UnitStructure {
        strata,
        n_runs: design.n_runs(),
    })
}

impl UnitStructure {
    pub fn strata(&self) -> &[UnitFactor] {
        &self.strata
    }

    pub fn names(&self) -> Vec<&str> {
        self.strata.iter().map(|s| s.name.as_str()).collect()
    }

    /// Index of the smallest unit subgroup containing `key`.
    pub fn stratum_index(&self, key: Key) -> usize {
        self.strata
            .iter()
            .position(|s| s.contains(key))
            .expect("the finest stratum holds every contrast")
    }

    pub fn assign_stratum(&self, key: Key) -> &str {
        &self.strata[self.stratum_index(key)].name
    }

    pub fn n_runs(&self) -> usize {
        self.n_runs
    }
}

/// Run index of a run-table row, from the levels of the base factors.
pub fn run_index(design: &RegularDesign, row: &RunRow) -> usize {
    (0..design.k_base())
        .filter(|&i| row.levels[i] > 0)
        .fold(0, |acc, i| acc | 1 << i)
}

/// Basis of the contrasts that are constant on every group of `unit_of`.
pub fn constant_contrasts(design: &RegularDesign, table: &RunTable, unit_of: impl Fn(&RunRow) -> usize) -> Vec<Key> {
    let runs: Vec<(usize, usize)> = table.rows.iter().map(|r| (unit_of(r), run_index(design, r))).collect();
    let mut basis = gf2::Basis::new();
    let mut out = Vec::new();
    for key in 1..design.n_runs() as Key {
        let mut first: std::collections::HashMap<usize, i8> = std::collections::HashMap::new();
        let constant = runs
            .iter()
            .all(|&(u, r)| *first.entry(u).or_insert(crate::design::sign(key, r)) == crate::design::sign(key, r));
        if constant && basis.insert(key) {
            out.push(key);
        }
    }
    out
}

fn key_words(design: &RegularDesign, keys: &[Key]) -> Vec<EffectWord> {
    keys.iter()
        .map(|&k| design.representative(k).expect("non-zero key"))
        .collect()
}

/// Week, Plate, Tube and Unit declarations read off a run table. Tubes
/// confined to one plate are nested in it; otherwise they cross plates
/// within weeks.
pub fn unit_decls_from_table(design: &RegularDesign, table: &RunTable) -> Vec<UnitDecl> {
    let week = constant_contrasts(design, table, |r| r.week);
    let plate = constant_contrasts(design, table, |r| r.plate);
    let tube = constant_contrasts(design, table, |r| r.tube);
    let mut plate_of_tube: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let within = table
        .rows
        .iter()
        .all(|r| *plate_of_tube.entry(r.tube).or_insert(r.plate) == r.plate);
    let tube_decl = UnitDecl::new("Tube", &key_words(design, &tube));
    let tube_decl = if within {
        tube_decl.nested_in("Plate")
    } else {
        tube_decl.nested_in("Week").crossed_with("Plate")
    };
    vec![
        UnitDecl::new("Week", &key_words(design, &week)),
        UnitDecl::new("Plate", &key_words(design, &plate)).nested_in("Week"),
        tube_decl,
        UnitDecl::all("Unit"),
    ]
}

/// Names attached to blocking or plate contrasts in reports.
#[derive(Debug, Clone, Default)]
pub struct Labeler {
    pseudo: Vec<(String, Key)>,
}

impl Labeler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_scheme(mut self, scheme: &BlockingScheme) -> Self {
        self.pseudo
            .extend(scheme.pseudo_factors().iter().map(|p| (p.name.clone(), p.key)));
        self
    }

    pub fn pseudo_names(&self, key: Key) -> Vec<&str> {
        self.pseudo
            .iter()
            .filter(|(_, k)| *k == key)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Index of the first pseudo-factor named for `key`.
    fn pseudo_index(&self, key: Key) -> Option<usize> {
        self.pseudo.iter().position(|(_, k)| *k == key)
    }

    /// Pseudo-factor names, then members of at most two letters; a class
    /// with neither is shown by its smallest three-letter member, or its
    /// shortest member if it has none.
    pub fn label(&self, members: &[EffectWord], key: Key) -> String {
        let mut parts: Vec<String> = self.pseudo_names(key).iter().map(|s| s.to_string()).collect();
        parts.extend(members.iter().filter(|m| m.len() <= 2).map(|m| m.label()));
        if parts.is_empty() {
            let w = members.iter().find(|m| m.len() == 3).unwrap_or(&members[0]);
            parts.push(w.label());
        }
        parts.join(" + ")
    }
}

/// One alias class as shown in a stratum report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub key: Key,
    pub label: String,
    /// Full class, canonical order.
    pub members: Vec<EffectWord>,
}

#[derive(Debug, Clone)]
pub struct StratumEntry {
    pub name: String,
    pub classes: Vec<ClassEntry>,
}

impl StratumEntry {
    pub fn df(&self) -> usize {
        self.classes.len()
    }
}

#[derive(Debug, Clone)]
pub struct StratumReport {
    pub strata: Vec<StratumEntry>,
}

fn sort_rank(labeler: &Labeler, e: &ClassEntry) -> (u8, usize, String) {
    if let Some(m) = e.members.iter().find(|m| m.len() == 1) {
        return (0, m.max_factor().unwrap_or(0), String::new());
    }
    if let Some(i) = labeler.pseudo_index(e.key) {
        return (1, i, String::new());
    }
    if e.members.iter().any(|m| m.len() == 2) {
        return (2, 0, e.label.clone());
    }
    (3, 0, e.label.clone())
}

/// Every alias class of `design` in its stratum. Within a stratum, classes
/// holding a main effect come first, then named pseudo-factors, then
/// two-factor interactions, then the rest.
pub fn stratum_report(design: &RegularDesign, us: &UnitStructure, labeler: &Labeler) -> StratumReport {
    let mut strata: Vec<StratumEntry> = us
        .strata()
        .iter()
        .map(|s| StratumEntry {
            name: s.name.clone(),
            classes: Vec::new(),
        })
        .collect();
    for (key, members) in design.classes() {
        let label = labeler.label(&members, key);
        strata[us.stratum_index(key)]
            .classes
            .push(ClassEntry { key, label, members });
    }
    for s in &mut strata {
        s.classes.sort_by_cached_key(|e| sort_rank(labeler, e));
    }
    StratumReport { strata }
}

impl StratumReport {
    pub fn total_df(&self) -> usize {
        self.strata.iter().map(|s| s.df()).sum()
    }

    pub fn stratum(&self, name: &str) -> Option<&StratumEntry> {
        self.strata.iter().find(|s| s.name == name)
    }

    pub fn stratum_of(&self, key: Key) -> Option<&str> {
        self.strata
            .iter()
            .find(|s| s.classes.iter().any(|c| c.key == key))
            .map(|s| s.name.as_str())
    }

    /// Rows `stratum,class,df`.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        wtr.write_record(["stratum", "class", "df"]).expect("in-memory write");
        for s in &self.strata {
            for c in &s.classes {
                wtr.write_record([s.name.as_str(), c.label.as_str(), &s.df().to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Side-by-side columns, one per stratum, with a closing df row.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = self
            .strata
            .iter()
            .map(|s| {
                s.classes
                    .iter()
                    .map(|c| c.label.len())
                    .chain([s.name.len(), format!("{} df", s.df()).len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let depth = self.strata.iter().map(|s| s.classes.len()).max().unwrap_or(0);
        let mut out = String::new();
        let mut line = |cells: Vec<String>| {
            let row: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", row.join("  ").trim_end());
        };
        line(self.strata.iter().map(|s| s.name.clone()).collect());
        line(widths.iter().map(|&w| "-".repeat(w)).collect());
        for i in 0..depth {
            line(
                self.strata
                    .iter()
                    .map(|s| s.classes.get(i).map(|c| c.label.clone()).unwrap_or_default())
                    .collect(),
            );
        }
        line(widths.iter().map(|&w| "-".repeat(w)).collect());
        line(self.strata.iter().map(|s| format!("{} df", s.df())).collect());
        out
    }
}
