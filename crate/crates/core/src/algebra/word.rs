use std::cmp::Ordering;
use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};

/// Largest number of factors an [`EffectWord`] can reference.
pub const MAX_FACTORS: usize = 16;

const LETTERS: &[u8; MAX_FACTORS] = b"abcdefghijklmnop";

/// Letter used for factor `index` (`0 -> 'a'`).
pub fn letter(index: usize) -> char {
    LETTERS[index] as char
}

/// Index of factor letter `c`, if it is one of the supported letters.
pub fn letter_index(c: char) -> Option<usize> {
    LETTERS.iter().position(|&l| l as char == c)
}

/// A factorial effect: a subset of factors, multiplied in GF(2).
///
/// The identity word (empty subset) stands for the grand mean. Products are
/// symmetric differences, so every word is its own inverse.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EffectWord(u16);

impl EffectWord {
    pub const IDENTITY: EffectWord = EffectWord(0);

    pub const fn from_mask(mask: u16) -> Self {
        EffectWord(mask)
    }

    /// Main effect of factor `index`.
    pub fn factor(index: usize) -> Self {
        assert!(index < MAX_FACTORS, "factor index {index} out of range");
        EffectWord(1 << index)
    }

    /// Parses a label such as `"acf"`. `"I"` and the empty string give the
    /// identity; a repeated letter cancels.
    pub fn parse(label: &str) -> Result<Self> {
        let label = label.trim();
        if label == "I" {
            return Ok(Self::IDENTITY);
        }
        let mut mask = 0u16;
        for c in label.chars() {
            let idx = letter_index(c).ok_or_else(|| Error::InvalidWord(label.to_string()))?;
            mask ^= 1 << idx;
        }
        Ok(EffectWord(mask))
    }

    pub const fn mask(self) -> u16 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.is_identity()
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, factor: usize) -> bool {
        factor < MAX_FACTORS && self.0 >> factor & 1 == 1
    }

    /// Factor indices in increasing order.
    pub fn factors(self) -> impl Iterator<Item = usize> {
        (0..MAX_FACTORS).filter(move |&i| self.0 >> i & 1 == 1)
    }

    pub fn product(self, other: EffectWord) -> EffectWord {
        EffectWord(self.0 ^ other.0)
    }

    /// Highest factor index used, if any.
    pub fn max_factor(self) -> Option<usize> {
        (self.0 != 0).then(|| 15 - self.0.leading_zeros() as usize)
    }

    pub fn label(self) -> String {
        if self.is_identity() {
            return "I".to_string();
        }
        self.factors().map(letter).collect()
    }

    /// Shorter words first, then lexicographic on the sorted letters.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.factors().cmp(other.factors()))
    }
}

impl Mul for EffectWord {
    type Output = EffectWord;

    fn mul(self, rhs: EffectWord) -> EffectWord {
        self.product(rhs)
    }
}

impl Ord for EffectWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_cmp(other)
    }
}

impl PartialOrd for EffectWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EffectWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl fmt::Debug for EffectWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EffectWord({})", self.label())
    }
}

/// Shorthand used throughout the tests and presets. Panics on bad input.
pub fn w(label: &str) -> EffectWord {
    EffectWord::parse(label).expect("valid effect word")
}

/// Free-function form of [`EffectWord::product`].
pub fn word_product(u: EffectWord, v: EffectWord) -> EffectWord {
    u * v
}
