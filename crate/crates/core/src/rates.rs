//! Symmetric nonnegative rates on unordered vertex pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates `q({i,j}) >= 0` on the pairs of `0..size`. Absent pairs have rate 0.
///
/// Indices are 0-based in the API. The JSON file form
/// `{"size": N, "pairs": [[i, j, rate], ...]}` uses 1-based `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateFile", into = "RateFile")]
pub struct RateFunction {
    size: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateFile {
    pub size: usize,
    pub pairs: Vec<(usize, usize, f64)>,
}

impl TryFrom<RateFile> for RateFunction {
    type Error = Error;

    fn try_from(file: RateFile) -> Result<Self> {
        let mut q = RateFunction::new(file.size)?;
        for (i, j, rate) in file.pairs {
            if i == 0 || j == 0 || i >= j || j > file.size {
                return Err(Error::geometry(format!(
                    "pair [{i}, {j}] must satisfy 1 <= i < j <= {}",
                    file.size
                )));
            }
            q.set(i - 1, j - 1, rate)?;
        }
        Ok(q)
    }
}

impl From<RateFunction> for RateFile {
    fn from(q: RateFunction) -> Self {
        RateFile {
            size: q.size,
            pairs: q.pairs().map(|(i, j, r)| (i + 1, j + 1, r)).collect(),
        }
    }
}

impl RateFunction {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::geometry(format!(
                "rate function needs at least 2 vertices, got {size}"
            )));
        }
        Ok(Self {
            size,
            weights: BTreeMap::new(),
        })
    }

    /// Unit rates on the given 0-based pairs.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut q = Self::new(size)?;
        for &(i, j) in edges {
            q.set(i, j, 1.0)?;
        }
        Ok(q)
    }

    pub fn path(size: usize) -> Result<Self> {
        let edges: Vec<_> = (1..size).map(|j| (j - 1, j)).collect();
        Self::from_edges(size, &edges)
    }

    pub fn complete(size: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..size {
            for j in i + 1..size {
                edges.push((i, j));
            }
        }
        Self::from_edges(size, &edges)
    }

    /// Vertex 0 joined to every other vertex.
    pub fn star(size: usize) -> Result<Self> {
        let edges: Vec<_> = (1..size).map(|j| (0, j)).collect();
        Self::from_edges(size, &edges)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn key(&self, i: usize, j: usize) -> Result<(usize, usize)> {
        if i == j {
            return Err(Error::geometry(format!("pair {{{i}, {i}}} is a loop")));
        }
        let (a, b) = (i.min(j), i.max(j));
        if b >= self.size {
            return Err(Error::IndexOutOfRange {
                index: b + 1,
                size: self.size,
            });
        }
        Ok((a, b))
    }

    /// Sets `q({i,j})`; a zero rate removes the pair.
    pub fn set(&mut self, i: usize, j: usize, rate: f64) -> Result<()> {
        let key = self.key(i, j)?;
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidRate {
                what: format!("pair {{{}, {}}}", key.0 + 1, key.1 + 1),
                rate,
            });
        }
        if rate == 0.0 {
            self.weights.remove(&key);
        } else {
            self.weights.insert(key, rate);
        }
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let key = self.key(i, j)?;
        Ok(self.weights.get(&key).copied().unwrap_or(0.0))
    }

    /// Pairs with positive rate as `(i, j, rate)`, `i < j`, sorted.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(i, j), &r)| (i, j, r))
    }

    pub fn total_rate(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn max_rate(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }

    /// `max_i sum_j q({i,j})`.
    pub fn max_vertex_rate(&self) -> f64 {
        let mut per_vertex = vec![0.0; self.size];
        for (i, j, r) in self.pairs() {
            per_vertex[i] += r;
            per_vertex[j] += r;
        }
        per_vertex.into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut q = Self::new(self.size)?;
        for (i, j, r) in self.pairs() {
            q.set(i, j, r * factor)?;
        }
        Ok(q)
    }

    /// `q <= other` on every pair.
    pub fn dominated_by(&self, other: &RateFunction) -> bool {
        self.size == other.size
            && self
                .pairs()
                .all(|(i, j, r)| other.get(i, j).is_ok_and(|o| r <= o))
    }

    /// Connectivity of the graph of positive-rate pairs.
    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.size).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.size;
        for (i, j, _) in self.pairs() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components == 1
    }
}
