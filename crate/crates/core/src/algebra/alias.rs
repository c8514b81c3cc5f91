use std::fmt;

use crate::error::{Error, Result};

use super::subgroup::DefiningRelation;
use super::word::EffectWord;

/// Longest member shown in alias reports; full classes stay available.
pub const DISPLAY_MAX_LEN: usize = 3;

/// Effects that share one run-table contrast.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AliasClass {
    /// Canonical order, so `members[0]` is the representative.
    members: Vec<EffectWord>,
}

impl AliasClass {
    pub fn from_members(mut members: Vec<EffectWord>) -> Self {
        assert!(!members.is_empty(), "alias class cannot be empty");
        members.sort();
        members.dedup();
        AliasClass { members }
    }

    pub fn representative(&self) -> EffectWord {
        self.members[0]
    }

    pub fn members(&self) -> &[EffectWord] {
        &self.members
    }

    pub fn contains(&self, w: EffectWord) -> bool {
        self.members.binary_search(&w).is_ok()
    }

    /// Members of length at most `max_len`, canonical order.
    pub fn truncated(&self, max_len: usize) -> Vec<EffectWord> {
        self.members.iter().copied().filter(|m| m.len() <= max_len).collect()
    }

    /// Report label: short members joined by `" + "`, or the representative
    /// alone when every member is long.
    pub fn display_label(&self) -> String {
        let short = self.truncated(DISPLAY_MAX_LEN);
        if short.is_empty() {
            return self.representative().label();
        }
        join_words(&short)
    }

    /// Number of members of exactly `len` letters.
    pub fn count_len(&self, len: usize) -> usize {
        self.members.iter().filter(|m| m.len() == len).count()
    }
}

impl fmt::Display for AliasClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_label())
    }
}

pub fn join_words(words: &[EffectWord]) -> String {
    words.iter().map(|w| w.label()).collect::<Vec<_>>().join(" + ")
}

/// Class of `w` under `rel`: `w` times every defining word.
pub fn alias_class(w: EffectWord, rel: &DefiningRelation) -> Result<AliasClass> {
    if w.is_identity() {
        return Err(Error::IdentityWord);
    }
    let mut members = vec![w];
    members.extend(rel.words().iter().map(|&d| w * d));
    Ok(AliasClass::from_members(members))
}

/// Partition of the words over the first `k` factors that are not in the
/// defining relation.
pub fn alias_partition(k: usize, rel: &DefiningRelation) -> Vec<AliasClass> {
    let mut seen = vec![false; 1 << k];
    seen[0] = true;
    for d in rel.words() {
        seen[d.mask() as usize] = true;
    }
    let mut classes = Vec::new();
    let mut words: Vec<EffectWord> = (1..1u32 << k).map(|m| EffectWord::from_mask(m as u16)).collect();
    words.sort();
    for w in words {
        if seen[w.mask() as usize] {
            continue;
        }
        let class = alias_class(w, rel).expect("non-identity word");
        for m in class.members() {
            seen[m.mask() as usize] = true;
        }
        classes.push(class);
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::super::word::w;
    use super::*;

    fn half() -> DefiningRelation {
        DefiningRelation::new(&[w("abcdef")]).unwrap()
    }

    #[test]
    fn added_factor_alias() {
        let c = alias_class(w("f"), &half()).unwrap();
        assert_eq!(c.members(), [w("f"), w("abcde")]);
        assert_eq!(c.display_label(), "f");
    }

    #[test]
    fn two_factor_alias_is_five_letters() {
        let c = alias_class(w("ah"), &half()).unwrap();
        assert_eq!(c.members(), [w("ah"), w("bcdefh")]);
    }

    #[test]
    fn pseudo_factor_line() {
        let c = alias_class(w("bde"), &half()).unwrap();
        assert_eq!(c.display_label(), "acf + bde");
        assert_eq!(c.representative(), w("acf"));
    }

    #[test]
    fn no_aliasing_in_full_factorial() {
        let c = alias_class(w("a"), &DefiningRelation::full_factorial()).unwrap();
        assert_eq!(c.members(), [w("a")]);
    }

    #[test]
    fn identity_has_no_class() {
        assert_eq!(
            alias_class(EffectWord::IDENTITY, &half()).unwrap_err().name(),
            "IdentityWord"
        );
    }

    #[test]
    fn partition_counts() {
        let p = alias_partition(6, &half());
        assert_eq!(p.len(), 31);
        assert!(p.iter().all(|c| c.members().len() == 2));
    }
}
