use std::collections::{HashMap, HashSet};

use crate::algebra::{join_words, EffectWord, DISPLAY_MAX_LEN};
use crate::error::{Error, Result};
use crate::exec::Exec;

use super::blocking::BlockingScheme;
use super::fraction::{Key, RegularDesign};

/// Two independent contrasts whose four sign combinations define a
/// four-level factor, e.g. the plate factor split into `g` and `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourLevelExtension {
    pub first: EffectWord,
    pub second: EffectWord,
    keys: [Key; 3],
}

impl FourLevelExtension {
    /// Checks that `first`, `second` and their product are neither main
    /// effects nor blocking contrasts.
    pub fn new(
        design: &RegularDesign,
        scheme: Option<&BlockingScheme>,
        first: EffectWord,
        second: EffectWord,
    ) -> Result<Self> {
        let keys = [design.key(first), design.key(second), design.key(first * second)];
        for (w, k) in [first, second, first * second].into_iter().zip(keys) {
            if k == 0 {
                return Err(Error::DependentGenerators(format!("{first}, {second}")));
            }
            if design.main_effect_keys().contains(&k) {
                return Err(Error::InvalidGenerator(format!("{w} is aliased with a main effect")));
            }
            if scheme.is_some_and(|s| s.contains_key(k)) {
                return Err(Error::InvalidGenerator(format!("{w} is a blocking contrast")));
            }
        }
        Ok(FourLevelExtension { first, second, keys })
    }

    pub fn product(&self) -> EffectWord {
        self.first * self.second
    }

    /// Keys of `first`, `second` and their product.
    pub fn keys(&self) -> [Key; 3] {
        self.keys
    }

    /// Alias lines of the three contrasts, members up to three letters.
    pub fn alias_lines(&self, design: &RegularDesign) -> [String; 3] {
        self.keys.map(|k| short_label(design, k))
    }

    /// Level 1..=4 of the four-level factor in `run`.
    pub fn level(&self, run: usize) -> usize {
        let a = super::fraction::sign(self.keys[0], run);
        let b = super::fraction::sign(self.keys[1], run);
        1 + usize::from(a > 0) * 2 + usize::from(b > 0)
    }
}

fn short_label(design: &RegularDesign, key: Key) -> String {
    let members = design.class_of_key(key);
    let short: Vec<EffectWord> = members.iter().copied().filter(|m| m.len() <= DISPLAY_MAX_LEN).collect();
    if short.is_empty() {
        members[0].label()
    } else {
        join_words(&short)
    }
}

/// A set of equivalent ways to add the four-level factor.
#[derive(Debug, Clone)]
pub struct ExtensionClass {
    pub representative: FourLevelExtension,
    /// Number of admissible contrast triples in the class.
    pub size: usize,
    /// Two-factor interactions aliased with the three contrasts.
    pub two_factor_aliases: usize,
    members: Vec<[Key; 3]>,
}

impl ExtensionClass {
    pub fn contains(&self, ext: &FourLevelExtension) -> bool {
        let mut k = ext.keys();
        k.sort_unstable();
        self.members.contains(&k)
    }
}

/// Linear maps of the run space induced by factor permutations that keep
/// the defining relation, as images of the base-factor unit vectors.
pub fn relation_automorphisms(design: &RegularDesign, exec: Exec) -> Vec<Vec<Key>> {
    let k = design.n_factors();
    let kb = design.k_base();
    let cols = design.main_effect_keys();
    let perms = permutations(k);
    let found: Vec<Option<Vec<Key>>> = exec.map_slice(&perms, |p| {
        let images: Vec<Key> = (0..kb).map(|i| cols[p[i]]).collect();
        let ok = (kb..k).all(|j| apply(&images, cols[j]) == cols[p[j]]);
        ok.then_some(images)
    });
    found.into_iter().flatten().collect()
}

pub fn apply(images: &[Key], key: Key) -> Key {
    images
        .iter()
        .enumerate()
        .filter(|(i, _)| key >> i & 1 == 1)
        .fold(0, |acc, (_, &m)| acc ^ m)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next permutation in lexicographic order
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("pivot has a successor");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

fn triple(x: Key, y: Key) -> [Key; 3] {
    let mut t = [x, y, x ^ y];
    t.sort_unstable();
    t
}

fn map_triple(images: &[Key], t: &[Key; 3]) -> [Key; 3] {
    triple(apply(images, t[0]), apply(images, t[1]))
}

/// Canonical labels of a triple: shortest word of each contrast, sorted.
fn triple_labels(design: &RegularDesign, t: &[Key; 3]) -> Vec<EffectWord> {
    let mut l: Vec<EffectWord> = t
        .iter()
        .map(|&k| design.representative(k).expect("non-zero key"))
        .collect();
    l.sort();
    l
}

/// Every way to add an orthogonal four-level factor with regular aliasing,
/// grouped into equivalence classes.
///
/// Two choices are equivalent when a relabelling of the factors that keeps
/// the defining relation and the blocking subgroup maps one onto the other.
/// With a four-level blocking factor the two four-level factors may also
/// trade places. Classes are ranked by the number of two-factor
/// interactions aliased with the three new contrasts, then by the labels of
/// their representative, which is the member with the smallest labels.
pub fn enumerate_four_level_extensions(
    design: &RegularDesign,
    scheme: &BlockingScheme,
    exec: Exec,
) -> Vec<ExtensionClass> {
    let mains: HashSet<Key> = design.main_effect_keys().iter().copied().collect();
    let ok = |k: Key| k != 0 && !mains.contains(&k) && !scheme.contains_key(k);
    let n = design.n_runs() as Key;
    let mut admissible: Vec<[Key; 3]> = Vec::new();
    let mut seen = HashSet::new();
    for x in 1..n {
        for y in x + 1..n {
            if ok(x) && ok(y) && ok(x ^ y) {
                let t = triple(x, y);
                if seen.insert(t) {
                    admissible.push(t);
                }
            }
        }
    }
    admissible.sort_unstable();
    let index: HashMap<[Key; 3], usize> = admissible.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    let mut block: Vec<Key> = scheme.keys();
    block.sort_unstable();
    let autos = relation_automorphisms(design, exec);
    let fixes_block = |m: &Vec<Key>| {
        let mut img: Vec<Key> = block.iter().map(|&k| apply(m, k)).collect();
        img.sort_unstable();
        img == block
    };
    let stabilizer: Vec<&Vec<Key>> = autos.iter().filter(|m| fixes_block(m)).collect();

    let mut parent: Vec<usize> = (0..admissible.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for (i, t) in admissible.iter().enumerate() {
        for m in &stabilizer {
            let j = index[&map_triple(m, t)];
            union(&mut parent, i, j);
        }
    }
    if scheme.dim() == 2 {
        let b_triple = [block[0], block[1], block[2]];
        for (i, t) in admissible.iter().enumerate() {
            for m in &autos {
                if map_triple(m, t) == b_triple {
                    if let Some(&j) = index.get(&map_triple(m, &b_triple)) {
                        union(&mut parent, i, j);
                    }
                }
            }
        }
    }

    let mut groups: HashMap<usize, Vec<[Key; 3]>> = HashMap::new();
    for (i, t) in admissible.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(*t);
    }
    let mut classes: Vec<(usize, Vec<EffectWord>, ExtensionClass)> = groups
        .into_values()
        .map(|members| {
            let (rep, labels) = members
                .iter()
                .map(|t| (*t, triple_labels(design, t)))
                .min_by(|a, b| a.1.iter().cmp(b.1.iter()))
                .expect("non-empty class");
            let two: usize = rep
                .iter()
                .map(|&k| design.class_of_key(k).iter().filter(|w| w.len() == 2).count())
                .sum();
            let representative =
                FourLevelExtension::new(design, Some(scheme), labels[0], labels[1]).expect("admissible triple");
            let class = ExtensionClass {
                representative,
                size: members.len(),
                two_factor_aliases: two,
                members,
            };
            (two, labels, class)
        })
        .collect();
    classes.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.iter().cmp(b.1.iter())));
    classes.into_iter().map(|(_, _, c)| c).collect()
}
