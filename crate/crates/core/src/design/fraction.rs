use crate::algebra::{alias_class, letter, AliasClass, DefiningRelation, EffectWord, WordLengthPattern};
use crate::error::{Error, Result};

/// Run-space contrast of an effect: the set of base factors whose product
/// gives the effect's column. Two words are aliased iff their keys match.
pub type Key = u32;

/// Level (+1/-1) of contrast `key` in run `run`. Base factor `i` is at its
/// high level when bit `i` of `run` is set.
pub fn sign(key: Key, run: usize) -> i8 {
    if (key & !(run as u32)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// A regular two-level fraction: `k_base` base factors in a full factorial,
/// plus added factors defined as products of earlier columns.
#[derive(Debug, Clone)]
pub struct RegularDesign {
    k_base: usize,
    /// Column key of each factor, in factor order (a, b, ...).
    columns: Vec<Key>,
    /// Generator word of each added factor, indexed by factor.
    generators: Vec<Option<EffectWord>>,
    relation: DefiningRelation,
}

impl RegularDesign {
    /// `2^(k-p)` fraction. Each generator defines the next added factor as
    /// a product of base factors, e.g. `abcde` for `f = abcde`.
    pub fn build_fraction(k: usize, p: usize, generators: &[EffectWord]) -> Result<Self> {
        if p > k || generators.len() != p {
            return Err(Error::InvalidGenerator(format!(
                "{p} generators required for a 2^({k}-{p}) design, got {}",
                generators.len()
            )));
        }
        if k > crate::algebra::MAX_FACTORS {
            return Err(Error::InvalidGenerator(format!(
                "at most {} factors",
                crate::algebra::MAX_FACTORS
            )));
        }
        let k_base = k - p;
        let base = RegularDesign {
            k_base,
            columns: (0..k_base).map(|i| 1 << i).collect(),
            generators: vec![None; k_base],
            relation: DefiningRelation::full_factorial(),
        };
        for g in generators {
            if g.max_factor().is_some_and(|m| m >= k_base) {
                return Err(Error::InvalidGenerator(format!("{g} references an added factor")));
            }
        }
        base.extend(generators)
    }

    /// Appends one factor per word, each aliased with the given word of the
    /// existing factors.
    pub fn extend(&self, words: &[EffectWord]) -> Result<Self> {
        let mut out = self.clone();
        for &g in words {
            let k = out.columns.len();
            if k >= crate::algebra::MAX_FACTORS {
                return Err(Error::InvalidGenerator("too many factors".into()));
            }
            if g.max_factor().is_some_and(|m| m >= k) {
                return Err(Error::InvalidGenerator(format!("{g} references an unknown factor")));
            }
            let key = out.key(g);
            if key == 0 {
                return Err(Error::InvalidGenerator(format!("{g} is aliased with the mean")));
            }
            if let Some(i) = out.columns.iter().position(|&c| c == key) {
                return Err(Error::InvalidGenerator(format!(
                    "{g} duplicates the column of factor {}",
                    letter(i)
                )));
            }
            out.columns.push(key);
            out.generators.push(Some(g));
        }
        let defining: Vec<EffectWord> = out
            .generators
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.map(|g| g * EffectWord::factor(i)))
            .collect();
        out.relation = DefiningRelation::new(&defining)?;
        Ok(out)
    }

    pub fn n_runs(&self) -> usize {
        1 << self.k_base
    }

    pub fn k_base(&self) -> usize {
        self.k_base
    }

    pub fn n_factors(&self) -> usize {
        self.columns.len()
    }

    pub fn factor_labels(&self) -> Vec<char> {
        (0..self.n_factors()).map(letter).collect()
    }

    pub fn generator(&self, factor: usize) -> Option<EffectWord> {
        self.generators.get(factor).copied().flatten()
    }

    pub fn relation(&self) -> &DefiningRelation {
        &self.relation
    }

    pub fn wordlength_pattern(&self) -> WordLengthPattern {
        self.relation.wordlength_pattern()
    }

    pub fn resolution(&self) -> Option<usize> {
        self.relation.resolution()
    }

    pub fn main_effect_keys(&self) -> &[Key] {
        &self.columns
    }

    pub fn key(&self, w: EffectWord) -> Key {
        w.factors().fold(0, |acc, i| acc ^ self.columns[i])
    }

    pub fn level(&self, w: EffectWord, run: usize) -> i8 {
        sign(self.key(w), run)
    }

    pub fn column(&self, w: EffectWord) -> Vec<i8> {
        let key = self.key(w);
        (0..self.n_runs()).map(|r| sign(key, r)).collect()
    }

    /// All words over the design's factors whose contrast is `key`.
    pub fn class_of_key(&self, key: Key) -> Vec<EffectWord> {
        let k = self.n_factors();
        let mut out: Vec<EffectWord> = (0..1u32 << k)
            .map(|m| EffectWord::from_mask(m as u16))
            .filter(|&w| self.key(w) == key)
            .collect();
        out.sort();
        out
    }

    /// Full alias class of `w`.
    pub fn alias_class(&self, w: EffectWord) -> Result<AliasClass> {
        alias_class(w, &self.relation)
    }

    /// Shortest word carrying `key`; `None` only for the zero key.
    pub fn representative(&self, key: Key) -> Option<EffectWord> {
        (key != 0).then(|| self.class_of_key(key)[0])
    }

    /// Every non-zero key with its class members, ordered by representative.
    pub fn classes(&self) -> Vec<(Key, Vec<EffectWord>)> {
        let k = self.n_factors();
        let mut by_key: Vec<Vec<EffectWord>> = vec![Vec::new(); self.n_runs()];
        for m in 1..1u32 << k {
            let w = EffectWord::from_mask(m as u16);
            by_key[self.key(w) as usize].push(w);
        }
        let mut out: Vec<(Key, Vec<EffectWord>)> = by_key
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(key, mut ws)| {
                ws.sort();
                (key as Key, ws)
            })
            .collect();
        out.sort_by(|a, b| a.1[0].cmp(&b.1[0]));
        out
    }
}
