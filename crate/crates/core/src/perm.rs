//! Permutations of `{1, ..., N}` and their lexicographic (Lehmer code) ranks,
//! which index the interchange-process state space.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ranked enumeration is capped here; `12!` still fits comfortably in `u64`
/// while vectors over `S_12` already exceed desk memory.
pub const MAX_RANKED_N: usize = 12;

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// One-line notation `(π_1, ..., π_N)` with 1-based values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    one_line: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(one_line: Vec<usize>) -> Result<Self> {
        Permutation::new(one_line)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.one_line
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.one_line)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PermutationRank {
    pub value: u64,
    pub size: usize,
}

impl Permutation {
    pub fn new(one_line: Vec<usize>) -> Result<Self> {
        let n = one_line.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("empty one-line array".into()));
        }
        let mut seen = vec![false; n];
        for &v in &one_line {
            if v == 0 || v > n || std::mem::replace(&mut seen[v - 1], true) {
                return Err(Error::InvalidPermutation(format!(
                    "{one_line:?} is not a bijection of 1..={n}"
                )));
            }
        }
        Ok(Self { one_line })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            one_line: (1..=n).collect(),
        }
    }

    /// The transposition `(i j)` in `S_n`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        Self::identity(n).apply_transposition(i, j)
    }

    pub fn len(&self) -> usize {
        self.one_line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.one_line.is_empty()
    }

    pub fn one_line(&self) -> &[usize] {
        &self.one_line
    }

    pub fn is_identity(&self) -> bool {
        self.one_line.iter().enumerate().all(|(k, &v)| v == k + 1)
    }

    /// `(a ∘ b)_k = a(b_k)`: apply `b` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(Permutation {
            one_line: other.one_line.iter().map(|&b| self.one_line[b - 1]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (k, &v) in self.one_line.iter().enumerate() {
            inv[v - 1] = k + 1;
        }
        Permutation { one_line: inv }
    }

    /// Left multiplication by `(i j)`: the values `i` and `j` trade places.
    pub fn apply_transposition(&self, i: usize, j: usize) -> Result<Permutation> {
        let n = self.len();
        for idx in [i, j] {
            if idx == 0 || idx > n {
                return Err(Error::IndexOutOfRange { index: idx, size: n });
            }
        }
        if i == j {
            return Err(Error::InvalidPermutation(format!(
                "transposition needs distinct values, got ({i} {j})"
            )));
        }
        let one_line = self
            .one_line
            .iter()
            .map(|&v| if v == i { j } else if v == j { i } else { v })
            .collect();
        Ok(Permutation { one_line })
    }

    /// `φ_{N,i}(π) = π_i`, with 1-based slot `i`.
    pub fn position_of(&self, slot: usize) -> Result<usize> {
        if slot == 0 || slot > self.len() {
            return Err(Error::IndexOutOfRange {
                index: slot,
                size: self.len(),
            });
        }
        Ok(self.one_line[slot - 1])
    }

    pub fn rank(&self) -> Result<PermutationRank> {
        rank(self)
    }
}

pub fn rank(p: &Permutation) -> Result<PermutationRank> {
    let n = p.len();
    if n > MAX_RANKED_N {
        return Err(Error::ResourceCap {
            what: "ranked permutation size",
            requested: n,
            limit: MAX_RANKED_N,
        });
    }
    let zero_based: Vec<u8> = p.one_line.iter().map(|&v| (v - 1) as u8).collect();
    Ok(PermutationRank {
        value: rank_slice(&zero_based),
        size: n,
    })
}

pub fn unrank(r: PermutationRank) -> Result<Permutation> {
    if r.size == 0 || r.size > MAX_RANKED_N {
        return Err(Error::ResourceCap {
            what: "ranked permutation size",
            requested: r.size,
            limit: MAX_RANKED_N,
        });
    }
    let bound = factorial(r.size);
    if r.value >= bound {
        return Err(Error::RankOutOfRange {
            rank: r.value,
            size: r.size,
            bound,
        });
    }
    let mut buf = [0u8; MAX_RANKED_N];
    unrank_into(r.value, &mut buf[..r.size]);
    Ok(Permutation {
        one_line: buf[..r.size].iter().map(|&v| v as usize + 1).collect(),
    })
}

/// Lexicographic rank of a 0-based one-line array.
pub(crate) fn rank_slice(p: &[u8]) -> u64 {
    let n = p.len();
    let mut value = 0u64;
    for k in 0..n {
        let smaller_after = p[k + 1..].iter().filter(|&&v| v < p[k]).count() as u64;
        value = value * (n - k) as u64 + smaller_after;
    }
    value
}

/// Inverse of [`rank_slice`]; `out.len()` is `N`.
pub(crate) fn unrank_into(mut value: u64, out: &mut [u8]) {
    let n = out.len();
    let mut digits = [0u8; MAX_RANKED_N];
    for k in (0..n).rev() {
        let base = (n - k) as u64;
        digits[k] = (value % base) as u8;
        value /= base;
    }
    let mut available: [u8; MAX_RANKED_N] = std::array::from_fn(|v| v as u8);
    let mut remaining = n;
    for k in 0..n {
        let d = digits[k] as usize;
        out[k] = available[d];
        available.copy_within(d + 1..remaining, d);
        remaining -= 1;
    }
}

/// The action of left multiplication by `(a b)` on rank space, for 0-based
/// values `a != b`: `table[r] = rank((a b) · unrank(r))`.
pub fn transposition_table(n: usize, a: usize, b: usize) -> Result<Vec<u32>> {
    if n == 0 || n > MAX_RANKED_N {
        return Err(Error::ResourceCap {
            what: "ranked permutation size",
            requested: n,
            limit: MAX_RANKED_N,
        });
    }
    if a == b || a >= n || b >= n {
        return Err(Error::InvalidPermutation(format!(
            "transposition ({} {}) invalid in S_{n}",
            a + 1,
            b + 1
        )));
    }
    let total = factorial(n);
    if total > u32::MAX as u64 {
        return Err(Error::ResourceCap {
            what: "rank table entries",
            requested: total as usize,
            limit: u32::MAX as usize,
        });
    }
    let (a, b) = (a as u8, b as u8);
    Ok((0..total)
        .into_par_iter()
        .map(|r| {
            let mut buf = [0u8; MAX_RANKED_N];
            let p = &mut buf[..n];
            unrank_into(r, p);
            for v in p.iter_mut() {
                if *v == a {
                    *v = b;
                } else if *v == b {
                    *v = a;
                }
            }
            rank_slice(p) as u32
        })
        .collect())
}

/// Every permutation of `S_n` in rank order.
pub fn all_permutations(n: usize) -> Result<Vec<Permutation>> {
    (0..factorial(n))
        .map(|value| unrank(PermutationRank { value, size: n }))
        .collect()
}
