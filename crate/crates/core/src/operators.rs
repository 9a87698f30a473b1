//! Markov generators of the random walk and the interchange process, the
//! general permutation-rate generators they specialize, and the lift
//! `T_{N,i}` that intertwines the two.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{self, factorial, Permutation};
use crate::rates::RateFunction;
use crate::tolerances::{DENSE_CAP, DENSE_IP_MAX_N, MATRIX_FREE_IP_MAX_N};

/// Cache directory for interchange-process transposition tables.
pub const CACHE_ENV: &str = "ALDOUS_LAB_CACHE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    /// One particle on `X_N`.
    Rw,
    /// Labelled particles on every vertex; states are `S_N`.
    Ip,
    /// `Δ_N(r)` or `Δ̂_N(r)` for a general permutation rate `r`.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    Dense,
    MatrixFree,
    /// Dense up to [`DENSE_CAP`] states, matrix-free beyond.
    Auto,
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DMatrix<f64>),
    Walk {
        adjacency: Vec<Vec<(usize, f64)>>,
    },
    Interchange {
        rates: Vec<f64>,
        tables: Vec<Arc<Vec<u32>>>,
    },
}

/// A symmetric Markov generator `Ω`: `Ω 1 = 0`, nonnegative off-diagonal
/// entries, `⟨f, Ω f⟩ <= 0`.
#[derive(Clone, Debug)]
pub struct SymmetricGenerator {
    process: Process,
    vertices: usize,
    dim: usize,
    pairs: Vec<(usize, usize, f64)>,
    storage: Storage,
}

impl SymmetricGenerator {
    /// Wraps an explicit symmetric matrix; no axioms are checked here.
    pub fn from_dense(process: Process, vertices: usize, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::precondition("generator matrix must be square and nonempty"));
        }
        Ok(Self {
            process,
            vertices,
            dim: matrix.nrows(),
            pairs: Vec::new(),
            storage: Storage::Dense(matrix),
        })
    }

    pub fn process(&self) -> Process {
        self.process
    }

    /// Number of vertices `N` of the underlying graph.
    pub fn vertices(&self) -> usize {
        self.vertices
    }

    /// State-space dimension: `N` for the walk, `N!` for the interchange process.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// `(i, j, rate)` actions (0-based, `i < j`) for pair-built generators.
    pub fn pair_actions(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    /// `y = Ω x`. Every output entry is summed in a fixed order, so the
    /// result does not depend on the thread count.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "matvec input length");
        assert_eq!(y.len(), self.dim, "matvec output length");
        match &self.storage {
            Storage::Dense(m) => {
                // Symmetric, so row a equals the contiguous column a.
                let d = self.dim;
                let data = m.as_slice();
                y.par_iter_mut().enumerate().for_each(|(a, ya)| {
                    *ya = data[a * d..(a + 1) * d]
                        .iter()
                        .zip(x)
                        .map(|(m, v)| m * v)
                        .sum();
                });
            }
            Storage::Walk { adjacency } => {
                y.par_iter_mut().enumerate().for_each(|(i, yi)| {
                    *yi = adjacency[i].iter().map(|&(j, r)| r * (x[j] - x[i])).sum();
                });
            }
            Storage::Interchange { rates, tables } => {
                y.par_iter_mut().enumerate().for_each(|(a, ya)| {
                    *ya = rates
                        .iter()
                        .zip(tables)
                        .map(|(r, t)| r * (x[t[a] as usize] - x[a]))
                        .sum();
                });
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        y
    }

    /// Largest exit rate `max_a |Ω_aa|`.
    pub fn max_exit_rate(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.diagonal().iter().fold(0.0, |acc, v| acc.max(v.abs())),
            Storage::Walk { adjacency } => adjacency
                .iter()
                .map(|row| row.iter().map(|e| e.1).sum::<f64>())
                .fold(0.0, f64::max),
            // Every transposition moves every state.
            Storage::Interchange { rates, .. } => rates.iter().sum(),
        }
    }

    /// Gershgorin bound `2 max_a |Ω_aa| >= λ_max(-Ω)`.
    pub fn gershgorin_bound(&self) -> f64 {
        2.0 * self.max_exit_rate()
    }

    /// Entry `Ω_ab`, computed from a basis-vector matvec when matrix-free.
    pub fn column(&self, b: usize) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(m) => m.column(b).iter().copied().collect(),
            _ => {
                let mut e = vec![0.0; self.dim];
                e[b] = 1.0;
                self.matvec(&e)
            }
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if let Storage::Dense(m) = &self.storage {
            return Ok(m.clone());
        }
        if self.dim > crate::tolerances::FULL_SPECTRUM_CAP {
            return Err(Error::ResourceCap {
                what: "dense materialization",
                requested: self.dim,
                limit: crate::tolerances::FULL_SPECTRUM_CAP,
            });
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for b in 0..self.dim {
            m.set_column(b, &nalgebra::DVector::from_vec(self.column(b)));
        }
        Ok(m)
    }

    /// `⟨f, -Ω f⟩`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        let g = self.matvec(f);
        -f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(Error::InvalidRate {
                what: "generator scale".into(),
                rate: factor,
            });
        }
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * factor),
            Storage::Walk { adjacency } => Storage::Walk {
                adjacency: adjacency
                    .iter()
                    .map(|row| row.iter().map(|&(j, r)| (j, r * factor)).collect())
                    .collect(),
            },
            Storage::Interchange { rates, tables } => Storage::Interchange {
                rates: rates.iter().map(|r| r * factor).collect(),
                tables: tables.clone(),
            },
        };
        Ok(Self {
            process: self.process,
            vertices: self.vertices,
            dim: self.dim,
            pairs: self.pairs.iter().map(|&(i, j, r)| (i, j, r * factor)).collect(),
            storage,
        })
    }

    /// Row-major CSV of a dense generator at 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let m = self
            .dense()
            .ok_or_else(|| Error::precondition("CSV export needs a dense generator"))?;
        let mut out = String::new();
        for a in 0..self.dim {
            for b in 0..self.dim {
                if b > 0 {
                    out.push(',');
                }
                write!(out, "{:.16e}", m[(a, b)]).expect("string write");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// The `(pair, rate)` action list, 1-based, as exported for matrix-free generators.
    pub fn action_list(&self) -> ActionList {
        ActionList {
            process: self.process,
            size: self.vertices,
            dim: self.dim,
            pairs: self.pairs.iter().map(|&(i, j, r)| (i + 1, j + 1, r)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionList {
    pub process: Process,
    pub size: usize,
    pub dim: usize,
    pub pairs: Vec<(usize, usize, f64)>,
}

/// `Ω^RW_N(q) = Σ q({i,j}) Δ_{N,(i,j)}` as a dense `N × N` matrix.
pub fn rw_generator(q: &RateFunction) -> SymmetricGenerator {
    rw_generator_with(q, StorageMode::Dense)
}

pub fn rw_generator_with(q: &RateFunction, mode: StorageMode) -> SymmetricGenerator {
    let n = q.size();
    let pairs: Vec<_> = q.pairs().collect();
    let dense = match mode {
        StorageMode::Dense => true,
        StorageMode::MatrixFree => false,
        StorageMode::Auto => n <= crate::tolerances::DENSE_RW_CAP,
    };
    let storage = if dense {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, r) in &pairs {
            m[(i, j)] += r;
            m[(j, i)] += r;
            m[(i, i)] -= r;
            m[(j, j)] -= r;
        }
        Storage::Dense(m)
    } else {
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, r) in &pairs {
            adjacency[i].push((j, r));
            adjacency[j].push((i, r));
        }
        Storage::Walk { adjacency }
    };
    SymmetricGenerator {
        process: Process::Rw,
        vertices: n,
        dim: n,
        pairs,
        storage,
    }
}

/// `Ω^IP_N(q) = Σ q({i,j}) Δ̂_{N,(i,j)}` on `ℓ²(S_N)`, indexed by Lehmer rank:
/// `(Ω f)(π) = Σ q({i,j}) (f((i j)·π) - f(π))`.
pub fn ip_generator(q: &RateFunction, mode: StorageMode) -> Result<SymmetricGenerator> {
    let n = q.size();
    let cap = match mode {
        StorageMode::Dense => DENSE_IP_MAX_N,
        StorageMode::MatrixFree | StorageMode::Auto => MATRIX_FREE_IP_MAX_N,
    };
    if n > cap {
        return Err(Error::ResourceCap {
            what: "interchange-process vertices",
            requested: n,
            limit: cap,
        });
    }
    let dim = factorial(n) as usize;
    let dense = match mode {
        StorageMode::Dense => true,
        StorageMode::MatrixFree => false,
        StorageMode::Auto => dim <= DENSE_CAP,
    };
    let pairs: Vec<_> = q.pairs().collect();
    let tables = pairs
        .iter()
        .map(|&(i, j, _)| cached_transposition_table(n, i, j))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let storage = if dense {
        let mut m = DMatrix::zeros(dim, dim);
        for (r, t) in rates.iter().zip(&tables) {
            for a in 0..dim {
                m[(a, t[a] as usize)] += r;
                m[(a, a)] -= r;
            }
        }
        Storage::Dense(m)
    } else {
        Storage::Interchange { rates, tables }
    };
    Ok(SymmetricGenerator {
        process: Process::Ip,
        vertices: n,
        dim,
        pairs,
        storage,
    })
}

fn cached_transposition_table(n: usize, a: usize, b: usize) -> Result<Arc<Vec<u32>>> {
    let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
        return Ok(Arc::new(perm::transposition_table(n, a, b)?));
    };
    let path = dir.join(format!("tau_n{n}_{}_{}.u32le", a + 1, b + 1));
    let expected = factorial(n) as usize;
    if let Ok(bytes) = std::fs::read(&path) {
        if bytes.len() == 4 * expected {
            let table = bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            return Ok(Arc::new(table));
        }
    }
    let table = perm::transposition_table(n, a, b)?;
    std::fs::create_dir_all(&dir)?;
    let bytes: Vec<u8> = table.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&path, bytes)?;
    Ok(Arc::new(table))
}

fn check_permutation_rates(r: &[(Permutation, f64)], n: usize) -> Result<()> {
    for (p, rate) in r {
        if p.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::InvalidRate {
                what: format!("permutation {p}"),
                rate: *rate,
            });
        }
    }
    Ok(())
}

/// `Δ_N(r) = Σ_π r(π) (-I + ½U(π) + ½U(π⁻¹))` with `U(π) f(i) = f(π⁻¹_i)`.
pub fn delta_general(r: &[(Permutation, f64)], n: usize) -> Result<SymmetricGenerator> {
    if n == 0 {
        return Err(Error::precondition("N must be positive"));
    }
    check_permutation_rates(r, n)?;
    let mut m = DMatrix::zeros(n, n);
    for (p, rate) in r {
        // U(π) has a 1 at (π(b), b).
        for b in 0..n {
            let a = p.one_line()[b] - 1;
            m[(a, b)] += 0.5 * rate;
            m[(b, a)] += 0.5 * rate;
            m[(b, b)] -= rate;
        }
    }
    SymmetricGenerator::from_dense(Process::General, n, m)
}

/// `Δ̂_N(r) = Σ_π r(π) (-I + ½V(π) + ½V(π⁻¹))` with `V(π) f(π') = f(π⁻¹π')`.
pub fn delta_hat_general(r: &[(Permutation, f64)], n: usize) -> Result<SymmetricGenerator> {
    if n == 0 || n > DENSE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "dense interchange-process vertices",
            requested: n,
            limit: DENSE_IP_MAX_N,
        });
    }
    check_permutation_rates(r, n)?;
    let states = perm::all_permutations(n)?;
    let dim = states.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (p, rate) in r {
        let inv = p.inverse();
        for (a, state) in states.iter().enumerate() {
            // V(π) has a 1 at (a, rank(π⁻¹ · state_a)).
            let b = inv.compose(state)?.rank()?.value as usize;
            m[(a, b)] += 0.5 * rate;
            m[(b, a)] += 0.5 * rate;
            m[(a, a)] -= rate;
        }
    }
    SymmetricGenerator::from_dense(Process::General, n, m)
}

/// The rate function with `Δ_N(r) = Ω^RW_N(q)`:
/// `q({i,j}) = ½[(T_{N,i})* r (j) + (T_{N,j})* r (i)]`.
pub fn reduction_rates(r: &[(Permutation, f64)], n: usize) -> Result<RateFunction> {
    check_permutation_rates(r, n)?;
    let mut q = RateFunction::new(n)?;
    for i in 0..n {
        for j in i + 1..n {
            // (T_i)* r (j) sums r over the fiber π_i = j.
            let lifted = |slot: usize, value: usize| -> f64 {
                r.iter()
                    .filter(|(p, _)| p.one_line()[slot] == value + 1)
                    .map(|(_, rate)| rate)
                    .sum()
            };
            q.set(i, j, 0.5 * (lifted(i, j) + lifted(j, i)))?;
        }
    }
    Ok(q)
}

/// `T_{N,i} f (π) = f(π_i)`, from `ℓ²(X_N)` to `ℓ²(S_N)`. The slot is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LiftOperator {
    pub size: usize,
    pub slot: usize,
}

impl LiftOperator {
    pub fn new(size: usize, slot: usize) -> Result<Self> {
        if size == 0 || size > MATRIX_FREE_IP_MAX_N {
            return Err(Error::ResourceCap {
                what: "lift size",
                requested: size,
                limit: MATRIX_FREE_IP_MAX_N,
            });
        }
        if slot == 0 || slot > size {
            return Err(Error::IndexOutOfRange { index: slot, size });
        }
        Ok(Self { size, slot })
    }

    /// Output is indexed by Lehmer rank.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.size {
            return Err(Error::SizeMismatch {
                expected: self.size,
                found: f.len(),
            });
        }
        let n = self.size;
        let slot = self.slot - 1;
        Ok((0..factorial(n))
            .into_par_iter()
            .map(|value| {
                let mut buf = [0u8; perm::MAX_RANKED_N];
                perm::unrank_into(value, &mut buf[..n]);
                f[buf[slot] as usize]
            })
            .collect())
    }

    /// `(T_{N,i})* g (j) = Σ_{π : π_i = j} g(π)`.
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        let n = self.size;
        let dim = factorial(n) as usize;
        if g.len() != dim {
            return Err(Error::SizeMismatch {
                expected: dim,
                found: g.len(),
            });
        }
        let mut out = vec![0.0; n];
        let mut buf = [0u8; perm::MAX_RANKED_N];
        for (value, &gv) in g.iter().enumerate() {
            perm::unrank_into(value as u64, &mut buf[..n]);
            out[buf[self.slot - 1] as usize] += gv;
        }
        Ok(out)
    }
}

/// Largest `‖Ω^IP T_ip f - T_rw Ω^RW f‖ / ‖f‖` over `trials` random `f`.
/// With `lift_ip == lift_rw` this is the intertwining defect.
pub fn intertwining_defect<R: Rng + ?Sized>(
    q: &RateFunction,
    lift_ip: LiftOperator,
    lift_rw: LiftOperator,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let n = q.size();
    if lift_ip.size != n || lift_rw.size != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: lift_ip.size.max(lift_rw.size),
        });
    }
    if n > DENSE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "intertwining check vertices",
            requested: n,
            limit: DENSE_IP_MAX_N,
        });
    }
    let rw = rw_generator(q);
    let ip = ip_generator(q, StorageMode::MatrixFree)?;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let lhs = ip.matvec(&lift_ip.apply(&f)?);
        let rhs = lift_rw.apply(&rw.matvec(&f))?;
        let diff = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / norm);
    }
    Ok(worst)
}

/// `Ω^IP(q) T_{N,i} = T_{N,i} Ω^RW(q)` within `tol · ‖f‖` on random `f`.
pub fn verify_intertwining<R: Rng + ?Sized>(
    q: &RateFunction,
    slot: usize,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<bool> {
    let lift = LiftOperator::new(q.size(), slot)?;
    Ok(intertwining_defect(q, lift, lift, trials, rng)? <= tol)
}

/// Generator axioms: `Ω 1 = 0`, off-diagonal entries `>= 0`, symmetry.
/// The tolerance is scaled by `max(1, max_a |Ω_aa|)`. Matrix-free
/// generators are spot-checked on a sample of basis columns.
pub fn is_markov_generator(g: &SymmetricGenerator, tol: f64) -> bool {
    let scale = g.max_exit_rate().max(1.0);
    let tol = tol * scale;
    let d = g.dim();
    let row_sums = g.matvec(&vec![1.0; d]);
    if row_sums.iter().any(|s| s.abs() > tol) {
        return false;
    }
    let sample: Vec<usize> = if g.is_dense() || d <= 64 {
        (0..d).collect()
    } else {
        let step = d / 32;
        (0..32).map(|k| k * step).collect()
    };
    let columns: Vec<(usize, Vec<f64>)> = sample.iter().map(|&b| (b, g.column(b))).collect();
    for (b, col) in &columns {
        for (a, &v) in col.iter().enumerate() {
            if a != *b && v < -tol {
                return false;
            }
        }
    }
    for (b, col_b) in &columns {
        for (a, col_a) in &columns {
            if (col_b[*a] - col_a[*b]).abs() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eigenvalues(g: &SymmetricGenerator) -> Vec<f64> {
        let m = -g.to_dense().unwrap();
        let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn two_point_walk_matrix() {
        let mut q = RateFunction::new(2).unwrap();
        q.set(0, 1, 2.5).unwrap();
        let g = rw_generator(&q);
        let m = g.dense().unwrap();
        assert_eq!(m, &DMatrix::from_row_slice(2, 2, &[-2.5, 2.5, 2.5, -2.5]));
        let ip = ip_generator(&q, StorageMode::Dense).unwrap();
        assert_eq!(ip.dense().unwrap(), m);
    }

    #[test]
    fn path_and_complete_spectra() {
        assert_close(&eigenvalues(&rw_generator(&RateFunction::path(3).unwrap())), &[0.0, 1.0, 3.0], 1e-12);
        let k3 = RateFunction::complete(3).unwrap();
        let ip = ip_generator(&k3, StorageMode::Dense).unwrap();
        assert_close(&eigenvalues(&ip), &[0.0, 3.0, 3.0, 3.0, 3.0, 6.0], 1e-12);
    }

    #[test]
    fn zero_rates_give_zero_matrix() {
        let g = rw_generator(&RateFunction::new(4).unwrap());
        assert!(g.dense().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matrix_free_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=6 {
            let mut q = RateFunction::new(n).unwrap();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.6) {
                        q.set(i, j, rng.gen_range(0.0..2.0)).unwrap();
                    }
                }
            }
            let dense = ip_generator(&q, StorageMode::Dense).unwrap();
            let free = ip_generator(&q, StorageMode::MatrixFree).unwrap();
            let rw_free = rw_generator_with(&q, StorageMode::MatrixFree);
            let rw = rw_generator(&q);
            for _ in 0..100 {
                let x: Vec<f64> = (0..dense.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert_close(&dense.matvec(&x), &free.matvec(&x), 1e-12);
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert_close(&rw.matvec(&x), &rw_free.matvec(&x), 1e-12);
            }
        }
    }

    #[test]
    fn resource_caps() {
        let q = RateFunction::path(8).unwrap();
        assert!(matches!(ip_generator(&q, StorageMode::Dense), Err(Error::ResourceCap { .. })));
        let q = RateFunction::path(10).unwrap();
        assert!(matches!(ip_generator(&q, StorageMode::MatrixFree), Err(Error::ResourceCap { .. })));
    }

    #[test]
    fn single_transposition_rate() {
        let t = Permutation::transposition(4, 2, 3).unwrap();
        let g = delta_general(&[(t, 1.7)], 4).unwrap();
        let mut q = RateFunction::new(4).unwrap();
        q.set(1, 2, 1.7).unwrap();
        assert_eq!(g.dense().unwrap(), rw_generator(&q).dense().unwrap());
    }

    #[test]
    fn three_cycle_on_a_point_mass() {
        // The cycle 1 -> 2 -> 3 -> 1 in one-line notation is (2, 3, 1).
        let cycle = Permutation::new(vec![2, 3, 1]).unwrap();
        let g = delta_general(&[(cycle.clone(), 1.0)], 3).unwrap();
        assert_close(&g.matvec(&[1.0, 0.0, 0.0]), &[-1.0, 0.5, 0.5], 1e-15);

        // Independent assembly: -I + ½P + ½Pᵀ with P the permutation matrix.
        let mut p = DMatrix::<f64>::zeros(3, 3);
        p[(1, 0)] = 1.0;
        p[(2, 1)] = 1.0;
        p[(0, 2)] = 1.0;
        let want = -DMatrix::<f64>::identity(3, 3) + (&p + p.transpose()) * 0.5;
        assert_eq!(g.dense().unwrap(), &want);
    }

    #[test]
    fn negative_permutation_rate_is_rejected() {
        let id = Permutation::identity(3);
        assert!(delta_general(&[(id.clone(), -1.0)], 3).is_err());
        assert!(delta_hat_general(&[(id, -1.0)], 3).is_err());
    }

    #[test]
    fn hat_generator_of_transpositions_is_the_interchange_process() {
        let q = RateFunction::complete(4).unwrap().scaled(0.5).unwrap();
        let r: Vec<_> = q
            .pairs()
            .map(|(i, j, rate)| (Permutation::transposition(4, i + 1, j + 1).unwrap(), rate))
            .collect();
        let hat = delta_hat_general(&r, 4).unwrap();
        let ip = ip_generator(&q, StorageMode::Dense).unwrap();
        assert_eq!(hat.dense().unwrap(), ip.dense().unwrap());
    }

    #[test]
    fn lift_examples() {
        let t = LiftOperator::new(3, 1).unwrap();
        let lifted = t.apply(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(lifted, vec![10.0, 10.0, 20.0, 20.0, 30.0, 30.0]);
        let ones = LiftOperator::new(4, 3).unwrap().apply(&[1.0; 4]).unwrap();
        assert!(ones.len() == 24 && ones.iter().all(|&v| v == 1.0));
        assert!(t.apply(&[1.0, 2.0]).is_err());
        assert!(LiftOperator::new(3, 0).is_err());
    }

    #[test]
    fn lift_norm_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            for slot in 1..=n {
                let t = LiftOperator::new(n, slot).unwrap();
                let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let tf = t.apply(&f).unwrap();
                let lhs: f64 = tf.iter().map(|v| v * v).sum();
                let rhs = factorial(n - 1) as f64 * f.iter().map(|v| v * v).sum::<f64>();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
                let back = t.adjoint(&tf).unwrap();
                for (b, v) in back.iter().zip(&f) {
                    assert!((b - factorial(n - 1) as f64 * v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn intertwining_and_its_negative_control() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = RateFunction::new(3).unwrap();
        q.set(0, 1, 0.3).unwrap();
        q.set(1, 2, 1.9).unwrap();
        q.set(0, 2, 0.7).unwrap();
        for slot in 1..=3 {
            assert!(verify_intertwining(&q, slot, 20, 1e-12, &mut rng).unwrap());
        }
        assert!(verify_intertwining(&RateFunction::new(3).unwrap(), 2, 5, 1e-12, &mut rng).unwrap());
        let good = LiftOperator::new(3, 1).unwrap();
        let shifted = LiftOperator::new(3, 2).unwrap();
        let defect = intertwining_defect(&q, shifted, good, 20, &mut rng).unwrap();
        assert!(defect > 1e-3);
    }

    #[test]
    fn markov_axioms() {
        let q = RateFunction::complete(4).unwrap();
        assert!(is_markov_generator(&rw_generator(&q), 1e-12));
        for n in 2..=5 {
            let q = RateFunction::path(n).unwrap();
            assert!(is_markov_generator(&ip_generator(&q, StorageMode::Dense).unwrap(), 1e-12));
            assert!(is_markov_generator(&ip_generator(&q, StorageMode::MatrixFree).unwrap(), 1e-12));
        }
        let bad = DMatrix::from_row_slice(3, 3, &[0.1, -0.1, 0.0, -0.1, 0.2, -0.1, 0.0, -0.1, 0.1]);
        let g = SymmetricGenerator::from_dense(Process::General, 3, bad).unwrap();
        assert!(!is_markov_generator(&g, 1e-12));
    }

    #[test]
    fn csv_export_is_full_precision() {
        let g = rw_generator(&RateFunction::path(2).unwrap().scaled(1.0 / 3.0).unwrap());
        let csv = g.to_csv().unwrap();
        let first: f64 = csv.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, -1.0 / 3.0);
        let free = ip_generator(&RateFunction::path(3).unwrap(), StorageMode::MatrixFree).unwrap();
        assert!(free.to_csv().is_err());
        let list = free.action_list();
        assert_eq!(list.pairs, vec![(1, 2, 1.0), (2, 3, 1.0)]);
        assert_eq!(list.dim, 6);
    }
}
