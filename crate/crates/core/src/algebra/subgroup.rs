use crate::error::{Error, Result};
use crate::gf2;

use super::word::EffectWord;

/// A subgroup of effect words generated by independent generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSubgroup {
    generators: Vec<EffectWord>,
    /// Non-identity elements, canonical order.
    elements: Vec<EffectWord>,
}

impl WordSubgroup {
    pub fn trivial() -> Self {
        WordSubgroup {
            generators: Vec::new(),
            elements: Vec::new(),
        }
    }

    /// Closure of `generators` under multiplication.
    pub fn closure_of(generators: &[EffectWord]) -> Result<Self> {
        let masks: Vec<u32> = generators.iter().map(|g| g.mask() as u32).collect();
        if generators.iter().any(|g| g.is_identity()) || !gf2::independent(&masks) {
            let labels: Vec<String> = generators.iter().map(|g| g.label()).collect();
            return Err(Error::DependentGenerators(labels.join(", ")));
        }
        let mut elements: Vec<EffectWord> = gf2::span(&masks)[1..]
            .iter()
            .map(|&m| EffectWord::from_mask(m as u16))
            .collect();
        elements.sort();
        Ok(WordSubgroup {
            generators: generators.to_vec(),
            elements,
        })
    }

    pub fn generators(&self) -> &[EffectWord] {
        &self.generators
    }

    pub fn elements(&self) -> &[EffectWord] {
        &self.elements
    }

    /// Elements indexed by generator subset: entry `i` is the product of the
    /// generators selected by the bits of `i` (entry 0 is the identity).
    pub fn by_generator_subset(&self) -> Vec<EffectWord> {
        let masks: Vec<u32> = self.generators.iter().map(|g| g.mask() as u32).collect();
        gf2::span(&masks)
            .into_iter()
            .map(|m| EffectWord::from_mask(m as u16))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, w: EffectWord) -> bool {
        w.is_identity() || self.elements.contains(&w)
    }

    /// Subgroup generated by both, with `self`'s generators kept first.
    pub fn join(&self, other: &WordSubgroup) -> WordSubgroup {
        let mut basis = gf2::Basis::from_vectors(self.generators.iter().map(|g| g.mask() as u32));
        let mut gens = self.generators.clone();
        for g in &other.generators {
            if basis.insert(g.mask() as u32) {
                gens.push(*g);
            }
        }
        WordSubgroup::closure_of(&gens).expect("generators reduced to a basis")
    }
}

/// Defining contrast subgroup of a regular fraction; all signs positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefiningRelation {
    subgroup: WordSubgroup,
}

impl DefiningRelation {
    pub fn full_factorial() -> Self {
        DefiningRelation {
            subgroup: WordSubgroup::trivial(),
        }
    }

    pub fn new(words: &[EffectWord]) -> Result<Self> {
        Ok(DefiningRelation {
            subgroup: WordSubgroup::closure_of(words)?,
        })
    }

    pub fn subgroup(&self) -> &WordSubgroup {
        &self.subgroup
    }

    pub fn words(&self) -> &[EffectWord] {
        self.subgroup.elements()
    }

    pub fn wordlength_pattern(&self) -> WordLengthPattern {
        wordlength_pattern(self, None)
    }

    pub fn resolution(&self) -> Option<usize> {
        self.wordlength_pattern().resolution()
    }
}

/// Counts `A_i` of words of each length in a defining relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordLengthPattern {
    /// `counts[i]` is the number of words of length `i`.
    counts: Vec<usize>,
}

impl WordLengthPattern {
    pub fn count(&self, length: usize) -> usize {
        self.counts.get(length).copied().unwrap_or(0)
    }

    /// `(A_3, A_4, ..., A_max)`, the conventional aberration vector.
    pub fn from_three(&self) -> Vec<usize> {
        self.counts.iter().skip(3).copied().collect()
    }

    /// Smallest word length present; `None` means unbounded.
    pub fn resolution(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0)
    }
}

/// Wordlength pattern of `rel`, optionally augmented by a blocking subgroup.
pub fn wordlength_pattern(rel: &DefiningRelation, extra: Option<&WordSubgroup>) -> WordLengthPattern {
    let group = match extra {
        Some(b) => rel.subgroup.join(b),
        None => rel.subgroup.clone(),
    };
    let mut counts = vec![0usize; super::word::MAX_FACTORS + 1];
    for w in group.elements() {
        counts[w.len()] += 1;
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    WordLengthPattern { counts }
}

/// Free-function form of [`WordSubgroup::closure_of`].
pub fn subgroup_closure(generators: &[EffectWord]) -> Result<WordSubgroup> {
    WordSubgroup::closure_of(generators)
}
