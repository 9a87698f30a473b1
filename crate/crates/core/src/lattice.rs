//! Lattice geometry on `Z^d`: hypercubes `R^d_n`, the faces that extend
//! `R^d_n` to `R^d_{n+1}`, the lines through those faces, traceability,
//! and the canonical unit rate function of an induced subgraph.
//!
//! Lattice coordinates and face indices are 1-based (`1 <= x_i <= n`,
//! `1 <= k <= d`). Vertex indices into a [`VertexSet`] are 0-based.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::RateFunction;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        LatticePoint(coords.into())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn l1_distance(&self, other: &LatticePoint) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn shifted(&self, axis: usize, delta: i64) -> LatticePoint {
        let mut c = self.0.clone();
        c[axis] += delta;
        LatticePoint(c)
    }

    fn in_hypercube(&self, side: usize) -> bool {
        self.0.iter().all(|&c| c >= 1 && c <= side as i64)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `R^d_n`: all points with coordinates in `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypercubeSpec {
    pub dim: usize,
    pub side: usize,
}

impl HypercubeSpec {
    pub fn new(dim: usize, side: usize) -> Self {
        Self { dim, side }
    }

    pub fn cardinality(&self) -> usize {
        self.side.pow(self.dim as u32)
    }
}

/// An ordered finite subset of `Z^d`. The order is the vertex enumeration
/// `x_1, ..., x_N` and is part of the identity of the set: rate-function
/// indices refer to positions in it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "VertexSetFile", into = "VertexSetFile")]
pub struct VertexSet {
    dim: usize,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
}

/// On-disk form: `{"dim": d, "points": [[x1, ..., xd], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexSetFile {
    pub dim: usize,
    pub points: Vec<Vec<i64>>,
}

impl TryFrom<VertexSetFile> for VertexSet {
    type Error = Error;

    fn try_from(file: VertexSetFile) -> Result<Self> {
        VertexSet::new(
            file.dim,
            file.points.into_iter().map(LatticePoint::new).collect(),
        )
    }
}

impl From<VertexSet> for VertexSetFile {
    fn from(set: VertexSet) -> Self {
        VertexSetFile {
            dim: set.dim,
            points: set.points.into_iter().map(|p| p.0).collect(),
        }
    }
}

impl PartialEq for VertexSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

impl Eq for VertexSet {}

impl VertexSet {
    pub fn new(dim: usize, points: Vec<LatticePoint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::geometry("dimension must be at least 1"));
        }
        if points.is_empty() {
            return Err(Error::geometry("vertex set must be nonempty"));
        }
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::geometry(format!(
                    "point {p} has {} coordinates, expected {dim}",
                    p.dim()
                )));
            }
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::geometry(format!("duplicate point {p}")));
            }
        }
        Ok(Self { dim, points, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.index.contains_key(p)
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// The first `len` points, in enumeration order.
    pub fn prefix(&self, len: usize) -> Result<VertexSet> {
        if len == 0 || len > self.len() {
            return Err(Error::geometry(format!(
                "prefix length {len} outside 1..={}",
                self.len()
            )));
        }
        VertexSet::new(self.dim, self.points[..len].to_vec())
    }

    /// Same point set, ignoring enumeration order.
    pub fn same_points(&self, other: &VertexSet) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && self.points.iter().all(|p| other.contains(p))
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    /// Number of points lying in `R^d_side`.
    pub fn count_in_hypercube(&self, side: usize) -> usize {
        self.points.iter().filter(|p| p.in_hypercube(side)).count()
    }

    /// Index pairs `(i, j)`, `i < j`, of nearest neighbours.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            for axis in 0..self.dim {
                if let Some(j) = self.index_of(&p.shifted(axis, 1)) {
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            let p = &self.points[i];
            for axis in 0..self.dim {
                for delta in [-1, 1] {
                    if let Some(j) = self.index_of(&p.shifted(axis, delta)) {
                        if !seen[j] {
                            seen[j] = true;
                            reached += 1;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        reached == self.len()
    }
}

/// Points of the box `lo_i <= x_i <= hi_i`, lexicographic (first axis slowest).
fn box_points(bounds: &[(i64, i64)]) -> Vec<LatticePoint> {
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<i64> = bounds.iter().map(|b| b.0).collect();
    loop {
        out.push(LatticePoint(cur.clone()));
        let mut axis = bounds.len();
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if cur[axis] < bounds[axis].1 {
                cur[axis] += 1;
                break;
            }
            cur[axis] = bounds[axis].0;
        }
    }
}

pub fn make_hypercube(spec: HypercubeSpec) -> Result<VertexSet> {
    if spec.dim == 0 || spec.side == 0 {
        return Err(Error::geometry(format!(
            "hypercube needs d >= 1 and n >= 1, got d = {}, n = {}",
            spec.dim, spec.side
        )));
    }
    let bounds = vec![(1, spec.side as i64); spec.dim];
    VertexSet::new(spec.dim, box_points(&bounds))
}

fn check_face_args(dim: usize, side: usize, face: usize) -> Result<()> {
    if dim == 0 || side == 0 {
        return Err(Error::geometry("faces need d >= 1 and n >= 1"));
    }
    if face == 0 || face > dim {
        return Err(Error::geometry(format!(
            "face index {face} outside 1..={dim}"
        )));
    }
    Ok(())
}

/// `S^d_{n,k}`: `x_k = n+1`, earlier coordinates in `1..=n+1`, later ones in `1..=n`.
pub fn face_vertices(dim: usize, side: usize, face: usize) -> Result<VertexSet> {
    check_face_args(dim, side, face)?;
    let n = side as i64;
    let bounds: Vec<(i64, i64)> = (1..=dim)
        .map(|axis| match axis.cmp(&face) {
            std::cmp::Ordering::Less => (1, n + 1),
            std::cmp::Ordering::Equal => (n + 1, n + 1),
            std::cmp::Ordering::Greater => (1, n),
        })
        .collect();
    VertexSet::new(dim, box_points(&bounds))
}

/// Which face `S^d_{n,k}` contains `p`, or `None` when `p` is in `R^d_n`
/// or outside `R^d_{n+1}`.
pub fn face_of(p: &LatticePoint, side: usize) -> Option<usize> {
    if !p.in_hypercube(side + 1) {
        return None;
    }
    // The faces partition R_{n+1} \ R_n by the last coordinate equal to n+1.
    p.coords()
        .iter()
        .rposition(|&c| c == side as i64 + 1)
        .map(|axis| axis + 1)
}

/// `K^d_{n,k}(x)`: the `n+1` points obtained by running coordinate `k`
/// over `1..=n+1`; `x` itself is last.
pub fn line_vertices(dim: usize, side: usize, face: usize, x: &LatticePoint) -> Result<VertexSet> {
    check_face_args(dim, side, face)?;
    if x.dim() != dim || face_of(x, side) != Some(face) {
        return Err(Error::NotInFace {
            point: x.coords().to_vec(),
            dim,
            side,
            face,
        });
    }
    let points = (1..=side as i64 + 1)
        .map(|j| {
            let mut c = x.coords().to_vec();
            c[face - 1] = j;
            LatticePoint(c)
        })
        .collect();
    VertexSet::new(dim, points)
}

/// `V` is `R^d_n`-traceable when every point of `V` in a face `S^d_{n,k}`
/// brings its whole line `K^d_{n,k}(x)` with it.
pub fn is_traceable(set: &VertexSet, dim: usize, side: usize) -> Result<bool> {
    if set.dim() != dim {
        return Err(Error::SizeMismatch {
            expected: dim,
            found: set.dim(),
        });
    }
    if set.points().iter().any(|p| !p.in_hypercube(side + 1)) {
        return Err(Error::NotInHypercube { side: side + 1 });
    }
    for p in set.points() {
        if let Some(face) = face_of(p, side) {
            if !line_interior_present(set, p, face, side) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn line_interior_present(set: &VertexSet, p: &LatticePoint, face: usize, side: usize) -> bool {
    let mut c = p.coords().to_vec();
    (1..=side as i64).all(|j| {
        c[face - 1] = j;
        set.contains(&LatticePoint(c.clone()))
    })
}

/// The enumeration of `R^d_{n_max}` whose prefixes are the traceable
/// sequence `V_1 ⊂ V_2 ⊂ ...`.
///
/// Growing from `R^d_n` to `R^d_{n+1}`, faces are appended in order
/// `k = 1, ..., d`, each in lexicographic order. When face `k` is reached,
/// the interior of every line `K^d_{n,k}(x)` already lies in `R^d_n` or in
/// an earlier face, so each appended point completes its line and every
/// prefix stays `R^d_n`-traceable.
pub fn traceable_order(dim: usize, n_max: usize) -> Result<VertexSet> {
    if dim == 0 || n_max == 0 {
        return Err(Error::geometry("traceable order needs d >= 1 and n_max >= 1"));
    }
    let mut points = vec![LatticePoint(vec![1; dim])];
    for side in 1..n_max {
        for face in 1..=dim {
            points.extend(face_vertices(dim, side, face)?.points);
        }
    }
    VertexSet::new(dim, points)
}

/// `V_2, V_3, ..., V_{n_max^d}` with `|V_N| = N` and `V_{n^d} = R^d_n`.
pub fn traceable_sequence(dim: usize, n_max: usize) -> Result<Vec<VertexSet>> {
    if n_max < 2 {
        return Err(Error::geometry(format!("n_max must be >= 2, got {n_max}")));
    }
    let order = traceable_order(dim, n_max)?;
    (2..=order.len()).map(|len| order.prefix(len)).collect()
}

/// The largest `n` with `n^d <= size`.
pub fn enclosing_side(dim: usize, size: usize) -> usize {
    let mut n = (size as f64).powf(1.0 / dim as f64).round() as usize;
    while n > 0 && n.pow(dim as u32) > size {
        n -= 1;
    }
    while (n + 1).pow(dim as u32) <= size {
        n += 1;
    }
    n
}

/// Canonical rate function of the induced subgraph: unit rate on every
/// nearest-neighbour pair, zero elsewhere.
pub fn induced_rates(set: &VertexSet) -> Result<RateFunction> {
    if set.len() < 2 {
        return Err(Error::geometry("induced rates need at least two vertices"));
    }
    let mut q = RateFunction::new(set.len())?;
    for (i, j) in set.adjacent_pairs() {
        q.set(i, j, 1.0)?;
    }
    Ok(q)
}

/// `q_{k+1}({i,j}) >= q_k({i,j})` for all consecutive pairs and all
/// `i < j < k`. Position `m` must hold a rate function of size `m + 2`.
pub fn sequence_is_increasing(rates: &[RateFunction]) -> Result<bool> {
    for (m, q) in rates.iter().enumerate() {
        if q.size() != m + 2 {
            return Err(Error::SizeMismatch {
                expected: m + 2,
                found: q.size(),
            });
        }
    }
    Ok(rates.windows(2).all(|w| {
        w[0].pairs()
            .all(|(i, j, rate)| w[1].get(i, j).is_ok_and(|next| next >= rate))
    }))
}

/// All connected subsets of `Z^d` with at most `max_size` points, one per
/// translation class, normalized so that each axis starts at 1. Rotations
/// and reflections are kept as distinct sets.
pub fn lattice_animals(dim: usize, max_size: usize) -> Result<Vec<VertexSet>> {
    if dim == 0 {
        return Err(Error::geometry("dimension must be at least 1"));
    }
    let mut out = Vec::new();
    let mut level: BTreeSet<Vec<Vec<i64>>> = BTreeSet::new();
    if max_size >= 1 {
        level.insert(vec![vec![1; dim]]);
    }
    for size in 1..=max_size {
        for cells in &level {
            out.push(VertexSet::new(
                dim,
                cells.iter().cloned().map(LatticePoint).collect(),
            )?);
        }
        if size == max_size {
            break;
        }
        let mut next = BTreeSet::new();
        for cells in &level {
            let present: BTreeSet<&Vec<i64>> = cells.iter().collect();
            for cell in cells {
                for axis in 0..dim {
                    for delta in [-1, 1] {
                        let mut c = cell.clone();
                        c[axis] += delta;
                        if present.contains(&c) {
                            continue;
                        }
                        let mut grown = cells.clone();
                        grown.push(c);
                        next.insert(normalize_translation(grown, dim));
                    }
                }
            }
        }
        level = next;
    }
    Ok(out)
}

fn normalize_translation(mut cells: Vec<Vec<i64>>, dim: usize) -> Vec<Vec<i64>> {
    for axis in 0..dim {
        let lo = cells.iter().map(|c| c[axis]).min().unwrap_or(1);
        for c in &mut cells {
            c[axis] += 1 - lo;
        }
    }
    cells.sort();
    cells
}

/// How a random traceable set treats the bulk `R^d_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BulkMode {
    /// Contains all of `R^d_n`: a random prefix of a random valid fill.
    Full,
    /// A random subset of `R^d_n` plus randomly chosen complete lines.
    Partial,
}

/// A random `R^d_n`-traceable subset of `R^d_{n+1}`, in shuffled order.
pub fn random_traceable<R: Rng + ?Sized>(
    dim: usize,
    side: usize,
    mode: BulkMode,
    rng: &mut R,
) -> Result<VertexSet> {
    let cube = make_hypercube(HypercubeSpec::new(dim, side))?;
    let faces: Vec<(usize, LatticePoint)> = (1..=dim)
        .map(|k| face_vertices(dim, side, k).map(|f| (k, f)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flat_map(|(k, f)| f.points.into_iter().map(move |p| (k, p)))
        .collect();

    let mut chosen: BTreeSet<LatticePoint> = BTreeSet::new();
    match mode {
        BulkMode::Full => {
            chosen.extend(cube.points.iter().cloned());
            let target = rng.gen_range(0..=faces.len());
            let mut pending = faces.clone();
            for _ in 0..target {
                let ready: Vec<usize> = (0..pending.len())
                    .filter(|&i| {
                        let (k, p) = &pending[i];
                        line_points(p, *k, side).iter().all(|y| y == p || chosen.contains(y))
                    })
                    .collect();
                let Some(&pick) = ready.choose(rng) else {
                    break;
                };
                chosen.insert(pending.swap_remove(pick).1);
            }
        }
        BulkMode::Partial => {
            for p in cube.points() {
                if rng.gen_bool(0.5) {
                    chosen.insert(p.clone());
                }
            }
            let p_line = rng.gen_range(0.0..=1.0);
            for (k, p) in &faces {
                if rng.gen_bool(p_line) {
                    chosen.extend(line_points(p, *k, side));
                }
            }
            // Close under the line condition.
            loop {
                let missing: Vec<LatticePoint> = chosen
                    .iter()
                    .filter_map(|p| face_of(p, side).map(|k| (k, p)))
                    .flat_map(|(k, p)| line_points(p, k, side))
                    .filter(|y| !chosen.contains(y))
                    .collect();
                if missing.is_empty() {
                    break;
                }
                chosen.extend(missing);
            }
            if chosen.is_empty() {
                chosen.insert(LatticePoint(vec![1; dim]));
            }
        }
    }
    let mut points: Vec<LatticePoint> = chosen.into_iter().collect();
    points.shuffle(rng);
    VertexSet::new(dim, points)
}

fn line_points(p: &LatticePoint, face: usize, side: usize) -> Vec<LatticePoint> {
    (1..=side as i64 + 1)
        .map(|j| {
            let mut c = p.coords().to_vec();
            c[face - 1] = j;
            LatticePoint(c)
        })
        .collect()
}
