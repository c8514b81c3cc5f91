//! Small linear-algebra helpers over GF(2) with vectors stored as bitmasks.

/// Row-echelon basis keyed by leading bit.
#[derive(Debug, Clone, Default)]
pub struct Basis {
    rows: Vec<u32>,
}

impl Basis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vectors(vs: impl IntoIterator<Item = u32>) -> Self {
        let mut b = Self::new();
        for v in vs {
            b.insert(v);
        }
        b
    }

    /// Reduces `v` against the basis; zero iff `v` lies in the span.
    pub fn reduce(&self, mut v: u32) -> u32 {
        for &r in &self.rows {
            let lead = 31 - r.leading_zeros();
            if v >> lead & 1 == 1 {
                v ^= r;
            }
        }
        v
    }

    pub fn contains(&self, v: u32) -> bool {
        self.reduce(v) == 0
    }

    /// Adds `v`; returns false if it was already in the span.
    pub fn insert(&mut self, v: u32) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        self.rows.push(r);
        // keep rows sorted by leading bit, highest first, so reduce is one pass
        self.rows.sort_unstable_by_key(|r| r.leading_zeros());
        true
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

pub fn rank(vs: &[u32]) -> usize {
    Basis::from_vectors(vs.iter().copied()).rank()
}

pub fn independent(vs: &[u32]) -> bool {
    rank(vs) == vs.len()
}

/// All `2^n` combinations of the generators, indexed so that bit `i` of
/// the index selects generator `i`. Element 0 is the zero vector.
pub fn span(gens: &[u32]) -> Vec<u32> {
    let mut out = vec![0u32; 1 << gens.len()];
    for i in 1..out.len() {
        let low = i.trailing_zeros() as usize;
        out[i] = out[i & (i - 1)] ^ gens[low];
    }
    out
}
