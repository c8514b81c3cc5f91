use std::cmp::Ordering;
use std::collections::HashSet;

use crate::algebra::EffectWord;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gf2;

use super::fraction::{sign, Key, RegularDesign};

/// Bit masks over `b` generators in pseudo-factor order: singletons first,
/// then pairs, and so on, each size in lexicographic order. For `b = 3`
/// this gives p1, p2, p3, p1p2, p1p3, p2p3, p1p2p3.
pub fn pseudo_factor_subsets(b: usize) -> Vec<u32> {
    let mut subsets: Vec<u32> = (1..1u32 << b).collect();
    subsets.sort_by(|&x, &y| {
        x.count_ones().cmp(&y.count_ones()).then_with(|| {
            let xi = (0..b).filter(|i| x >> i & 1 == 1);
            let yi = (0..b).filter(|i| y >> i & 1 == 1);
            xi.cmp(yi)
        })
    });
    subsets
}

/// One named contrast of a multi-level blocking or plate factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoFactor {
    pub name: String,
    /// Product of the generator words selected by this pseudo-factor.
    pub word: EffectWord,
    pub key: Key,
}

/// An orthogonal blocking of a regular design into `2^b` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingScheme {
    generators: Vec<EffectWord>,
    pseudo: Vec<PseudoFactor>,
}

/// (blocking contrasts whose class holds a two-factor interaction,
/// those whose class holds a three-factor interaction).
pub type BlockingScore = (usize, usize);

impl BlockingScheme {
    pub fn new(design: &RegularDesign, generators: &[EffectWord]) -> Result<Self> {
        Self::with_prefix(design, generators, "p")
    }

    /// Like [`BlockingScheme::new`] with pseudo-factors named `prefix1`, ...
    pub fn with_prefix(design: &RegularDesign, generators: &[EffectWord], prefix: &str) -> Result<Self> {
        let keys: Vec<Key> = generators.iter().map(|&g| design.key(g)).collect();
        if !gf2::independent(&keys) || keys.contains(&0) {
            let labels: Vec<String> = generators.iter().map(|g| g.label()).collect();
            return Err(Error::DependentGenerators(labels.join(", ")));
        }
        let pseudo: Vec<PseudoFactor> = pseudo_factor_subsets(generators.len())
            .into_iter()
            .enumerate()
            .map(|(i, subset)| {
                let (word, key) = (0..generators.len())
                    .filter(|j| subset >> j & 1 == 1)
                    .fold((EffectWord::IDENTITY, 0), |(w, k), j| (w * generators[j], k ^ keys[j]));
                PseudoFactor {
                    name: format!("{prefix}{}", i + 1),
                    word,
                    key,
                }
            })
            .collect();
        if let Some(p) = pseudo.iter().find(|p| design.main_effect_keys().contains(&p.key)) {
            return Err(Error::InvalidGenerator(format!(
                "blocking contrast {} = {} is aliased with a main effect",
                p.name, p.word
            )));
        }
        Ok(BlockingScheme {
            generators: generators.to_vec(),
            pseudo,
        })
    }

    pub fn generators(&self) -> &[EffectWord] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn n_blocks(&self) -> usize {
        1 << self.dim()
    }

    pub fn pseudo_factors(&self) -> &[PseudoFactor] {
        &self.pseudo
    }

    pub fn keys(&self) -> Vec<Key> {
        self.pseudo.iter().map(|p| p.key).collect()
    }

    pub fn contains_key(&self, key: Key) -> bool {
        key == 0 || self.pseudo.iter().any(|p| p.key == key)
    }

    pub fn score(&self, design: &RegularDesign) -> BlockingScore {
        score_keys(design, &self.keys())
    }

    /// Signs of the independent generators in `run`.
    pub fn generator_signs(&self, design: &RegularDesign, run: usize) -> Vec<i8> {
        self.generators.iter().map(|&g| sign(design.key(g), run)).collect()
    }
}

fn score_keys(design: &RegularDesign, keys: &[Key]) -> BlockingScore {
    let mut two = 0;
    let mut three = 0;
    for &k in keys {
        let members = design.class_of_key(k);
        if members.iter().any(|m| m.len() == 2) {
            two += 1;
        }
        if members.iter().any(|m| m.len() == 3) {
            three += 1;
        }
    }
    (two, three)
}

/// Canonical labels of the blocking contrasts, used to break score ties.
fn tie_break_labels(design: &RegularDesign, keys: &[Key]) -> Vec<EffectWord> {
    let mut reps: Vec<EffectWord> = keys.iter().filter_map(|&k| design.representative(k)).collect();
    reps.sort();
    reps
}

/// A candidate found by [`search_blocking`].
#[derive(Debug, Clone)]
pub struct RankedScheme {
    pub scheme: BlockingScheme,
    pub score: BlockingScore,
    /// Shortest word of each blocking contrast, canonical order.
    pub contrasts: Vec<EffectWord>,
}

/// Exhaustive search over every orthogonal blocking into `n_blocks` blocks.
///
/// Candidates are ranked by how many blocking contrasts are aliased with a
/// two-factor interaction, then with a three-factor interaction, then by
/// the canonical labels of the contrasts. Generators of each scheme are
/// picked greedily from those labels.
pub fn search_blocking(design: &RegularDesign, n_blocks: usize, exec: Exec) -> Result<Vec<RankedScheme>> {
    if !n_blocks.is_power_of_two() || n_blocks < 2 || n_blocks > design.n_runs() {
        return Err(Error::InfeasibleBlocking { blocks: n_blocks });
    }
    let b = n_blocks.trailing_zeros() as usize;
    let mains: HashSet<Key> = design.main_effect_keys().iter().copied().collect();
    let candidates: Vec<Key> = (1..design.n_runs() as Key).filter(|k| !mains.contains(k)).collect();

    let mut seen: HashSet<Vec<Key>> = HashSet::new();
    let mut subspaces: Vec<Vec<Key>> = Vec::new();
    let mut stack: Vec<(Vec<Key>, usize)> = vec![(Vec::new(), 0)];
    while let Some((gens, start)) = stack.pop() {
        if gens.len() == b {
            let mut elems: Vec<Key> = gf2::span(&gens)[1..].to_vec();
            if elems.iter().any(|k| mains.contains(k)) {
                continue;
            }
            elems.sort_unstable();
            if seen.insert(elems.clone()) {
                subspaces.push(elems);
            }
            continue;
        }
        for (i, &c) in candidates.iter().enumerate().skip(start) {
            let mut next = gens.clone();
            next.push(c);
            if gf2::independent(&next) {
                stack.push((next, i + 1));
            }
        }
    }
    subspaces.sort();

    let scored: Vec<(BlockingScore, Vec<EffectWord>, Vec<Key>)> = exec.map_slice(&subspaces, |elems| {
        (
            score_keys(design, elems),
            tie_break_labels(design, elems),
            elems.clone(),
        )
    });
    let mut scored = scored;
    scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| cmp_words(&a.1, &b.1)));
    if scored.is_empty() {
        return Err(Error::InfeasibleBlocking { blocks: n_blocks });
    }
    scored
        .into_iter()
        .map(|(score, contrasts, _)| {
            let mut basis = gf2::Basis::new();
            let gens: Vec<EffectWord> = contrasts
                .iter()
                .copied()
                .filter(|&w| basis.insert(design.key(w)))
                .collect();
            Ok(RankedScheme {
                scheme: BlockingScheme::new(design, &gens)?,
                score,
                contrasts,
            })
        })
        .collect()
}

fn cmp_words(a: &[EffectWord], b: &[EffectWord]) -> Ordering {
    a.iter().cmp(b.iter())
}

/// Maps generator sign patterns to block (column position) numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionLookup {
    /// `rows[p]` holds the generator signs of position `p + 1`.
    rows: Vec<Vec<i8>>,
}

impl PositionLookup {
    pub fn new(rows: Vec<Vec<i8>>) -> Result<Self> {
        let b = rows.first().map_or(0, |r| r.len());
        let distinct: HashSet<&Vec<i8>> = rows.iter().collect();
        if rows.len() != 1 << b
            || distinct.len() != rows.len()
            || rows
                .iter()
                .any(|r| r.len() != b || r.iter().any(|&s| s != 1 && s != -1))
        {
            return Err(Error::Invalid(
                "position lookup must list every sign pattern once".into(),
            ));
        }
        Ok(PositionLookup { rows })
    }

    /// Grouping used for eight column positions in the microplate design.
    pub fn microplate_eight() -> Self {
        let rows = [
            [-1, 1, -1],
            [-1, -1, 1],
            [-1, -1, -1],
            [-1, 1, 1],
            [1, -1, -1],
            [1, -1, 1],
            [1, 1, -1],
            [1, 1, 1],
        ];
        PositionLookup {
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    /// Standard order: first generator slowest, low level before high.
    pub fn standard(b: usize) -> Self {
        let rows = (0..1usize << b)
            .map(|i| (0..b).map(|j| if i >> (b - 1 - j) & 1 == 1 { 1 } else { -1 }).collect())
            .collect();
        PositionLookup { rows }
    }

    pub fn n_positions(&self) -> usize {
        self.rows.len()
    }

    pub fn position(&self, signs: &[i8]) -> usize {
        self.rows
            .iter()
            .position(|r| r.as_slice() == signs)
            .expect("lookup covers every sign pattern")
            + 1
    }

    pub fn signs(&self, position: usize) -> &[i8] {
        &self.rows[position - 1]
    }
}

/// Block (position) number of every run, in run order.
pub fn assign_blocks(design: &RegularDesign, scheme: &BlockingScheme, lookup: &PositionLookup) -> Vec<usize> {
    assert_eq!(
        lookup.n_positions(),
        scheme.n_blocks(),
        "lookup size must match block count"
    );
    (0..design.n_runs())
        .map(|r| lookup.position(&scheme.generator_signs(design, r)))
        .collect()
}
