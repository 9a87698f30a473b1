//! Discrete trace inequalities and the gap comparison bounds built on them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_traceable, random_traceable, BulkMode, VertexSet};
use crate::spectral::hypercube_gap_closed_form;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `(a, b)` in `lhs <= (a/n)‖f‖² + b·n·⟨f, -Ωf⟩`.
    pub constants_used: (f64, f64),
}

impl TraceReport {
    fn new(lhs: f64, rhs: f64, constants_used: (f64, f64)) -> Self {
        Self {
            lhs,
            rhs,
            slack: rhs - lhs,
            constants_used,
        }
    }

    /// `slack >= -tol · max(1, rhs)`.
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol * self.rhs.max(1.0)
    }
}

/// `|f(n+1)|² <= (2/n) Σ_{k<=n} |f(k)|² + 2n Σ_{k<=n} |f(k+1) - f(k)|²`
/// for `f` on `{1, ..., n+1}`.
pub fn trace_1d(f: &[f64], n: usize) -> Result<TraceReport> {
    if n == 0 {
        return Err(Error::precondition("one-dimensional trace needs n >= 1"));
    }
    if f.len() != n + 1 {
        return Err(Error::SizeMismatch {
            expected: n + 1,
            found: f.len(),
        });
    }
    let mass: f64 = f[..n].iter().map(|v| v * v).sum();
    let energy: f64 = f.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let nf = n as f64;
    let lhs = f[n] * f[n];
    Ok(TraceReport::new(lhs, 2.0 / nf * mass + 2.0 * nf * energy, (2.0, 2.0)))
}

/// `⟨f, -Ω^RW(V) f⟩ = Σ_{x~y} |f(x) - f(y)|²` over nearest-neighbour pairs.
pub fn dirichlet_form(set: &VertexSet, f: &[f64]) -> f64 {
    set.adjacent_pairs()
        .into_iter()
        .map(|(i, j)| (f[i] - f[j]).powi(2))
        .sum()
}

/// `Σ_{x ∈ V \ R^d_n} |f(x)|² <= (2d/n)‖f‖² + 2n⟨f, -Ω^RW(V) f⟩` for an
/// `R^d_n`-traceable `V`.
pub fn trace_nd(set: &VertexSet, d: usize, n: usize, f: &[f64]) -> Result<TraceReport> {
    if !is_traceable(set, d, n)? {
        return Err(Error::NotTraceable { side: n });
    }
    trace_nd_unchecked(set, d, n, f)
}

/// Both sides of the d-dimensional trace inequality without checking that
/// `V` is traceable.
pub fn trace_nd_unchecked(set: &VertexSet, d: usize, n: usize, f: &[f64]) -> Result<TraceReport> {
    if n == 0 || d == 0 || set.dim() != d {
        return Err(Error::precondition(format!(
            "trace needs n >= 1 and a vertex set of dimension {d}"
        )));
    }
    if f.len() != set.len() {
        return Err(Error::SizeMismatch {
            expected: set.len(),
            found: f.len(),
        });
    }
    let side = n as i64;
    let lhs: f64 = set
        .points()
        .iter()
        .zip(f)
        .filter(|(p, _)| p.coords().iter().any(|&c| c > side))
        .map(|(_, v)| v * v)
        .sum();
    let norm2: f64 = f.iter().map(|v| v * v).sum();
    let a = 2.0 * d as f64;
    let nf = n as f64;
    let rhs = a / nf * norm2 + 2.0 * nf * dirichlet_form(set, f);
    Ok(TraceReport::new(lhs, rhs, (a, 2.0)))
}

/// A bound value; `vacuous` marks a nonpositive prefactor or value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

/// `γ(V') >= (1 - 2d/n - |V' \ V|/|V|) γ(V) / (1 + 2n γ(V))` for
/// `R^d_n ⊆ V ⊆ V'` with `V'` traceable.
pub fn gap_lower_bound(d: usize, n: usize, size_v: usize, size_v_prime: usize, gap_v: f64) -> Bound {
    let nf = n as f64;
    let extra = size_v_prime.saturating_sub(size_v) as f64 / size_v as f64;
    let prefactor = 1.0 - 2.0 * d as f64 / nf - extra;
    let value = prefactor * gap_v / (1.0 + 2.0 * nf * gap_v);
    Bound {
        value,
        vacuous: value <= 0.0,
    }
}

/// `1 - [2d + 2π² + 2^d - 1] / n`.
fn upper_prefactor(d: usize, n: usize) -> f64 {
    let d_f = d as f64;
    1.0 - (2.0 * d_f + 2.0 * PI * PI + 2f64.powi(d as i32) - 1.0) / n as f64
}

/// `γ(V_N) <= (1 - [2d + 2π² + 2^d - 1]/n)^{-1} γ(R^d_{n+1})` for
/// `n^d <= N <= (n+1)^d`.
pub fn gap_upper_bound(d: usize, n: usize, _size_v: usize, gap_next: f64) -> Bound {
    let prefactor = upper_prefactor(d, n);
    Bound {
        value: gap_next / prefactor,
        vacuous: prefactor <= 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapBoundReport {
    pub lower: f64,
    pub upper: f64,
    pub lower_vacuous: bool,
    pub upper_vacuous: bool,
    pub d: usize,
    pub n: usize,
    pub size: usize,
    /// `γ(R^d_n)` and `γ(R^d_{n+1})` from the closed form.
    pub gap_inner: f64,
    pub gap_outer: f64,
}

impl GapBoundReport {
    /// A vacuous lower bound reads as 0 and a vacuous upper bound as +∞.
    pub fn encloses(&self, gap: f64, tol: f64) -> bool {
        let lo = if self.lower_vacuous { 0.0 } else { self.lower };
        let hi = if self.upper_vacuous { f64::INFINITY } else { self.upper };
        gap >= lo - tol * lo.abs().max(1.0) && gap <= hi + tol * hi.abs().max(1.0)
    }

    pub fn is_vacuous(&self) -> bool {
        self.lower_vacuous || self.upper_vacuous
    }
}

/// Two-sided bound on `γ^RW(V_N)` for `n^d <= N <= (n+1)^d`.
pub fn sandwich(d: usize, n: usize, size: usize) -> Result<GapBoundReport> {
    if d == 0 || n < 2 {
        return Err(Error::precondition(format!("sandwich needs d >= 1 and n >= 2, got d = {d}, n = {n}")));
    }
    let lo_size = n.pow(d as u32);
    let hi_size = (n + 1).pow(d as u32);
    if size < lo_size || size > hi_size {
        return Err(Error::precondition(format!(
            "N = {size} outside [{lo_size}, {hi_size}] for d = {d}, n = {n}"
        )));
    }
    let nf = n as f64;
    let gap_inner = hypercube_gap_closed_form(d, n)?;
    let gap_outer = hypercube_gap_closed_form(d, n + 1)?;
    let lower_prefactor = 1.0 - 2.0 * d as f64 / nf - (2f64.powi(d as i32) - 1.0) / nf;
    let lower = lower_prefactor / (1.0 + 2.0 * PI * PI / nf) * gap_inner;
    let upper = gap_upper_bound(d, n, size, gap_outer);
    Ok(GapBoundReport {
        lower,
        upper: upper.value,
        lower_vacuous: lower <= 0.0,
        upper_vacuous: upper.vacuous,
        d,
        n,
        size,
        gap_inner,
        gap_outer,
    })
}

/// Smallest `n >= 2` at which both sandwich bounds are non-vacuous.
pub fn first_nonvacuous_side(d: usize) -> usize {
    (2..)
        .find(|&n| {
            sandwich(d, n, n.pow(d as u32))
                .map(|r| !r.is_vacuous())
                .unwrap_or(false)
        })
        .expect("prefactors become positive for large n")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzRow {
    pub seed: u64,
    pub trial: u64,
    pub d: usize,
    pub n: usize,
    pub size: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Random traceable sets and random test functions, one row per trial.
/// Each trial draws from its own ChaCha stream, so rows do not depend on
/// scheduling.
pub fn trace_fuzz(d: usize, n: usize, trials: u64, seed: u64) -> Result<Vec<FuzzRow>> {
    if d == 0 || n == 0 {
        return Err(Error::precondition("trace fuzzing needs d >= 1 and n >= 1"));
    }
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mode = if rng.gen_bool(0.5) { BulkMode::Full } else { BulkMode::Partial };
            let set = loop {
                if let Ok(set) = random_traceable(d, n, mode, &mut rng) {
                    break set;
                }
            };
            let boundary_weight = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(1.0..50.0) };
            let f: Vec<f64> = set
                .points()
                .iter()
                .map(|p| {
                    let v = rng.gen_range(-1.0..1.0);
                    if p.coords().iter().any(|&c| c > n as i64) {
                        v * boundary_weight
                    } else {
                        v
                    }
                })
                .collect();
            let report = trace_nd(&set, d, n, &f)?;
            Ok(FuzzRow {
                seed,
                trial,
                d,
                n,
                size: set.len(),
                lhs: report.lhs,
                rhs: report.rhs,
                slack: report.slack,
            })
        })
        .collect()
}

pub fn fuzz_csv(rows: &[FuzzRow]) -> String {
    let mut out = String::from("seed,trial,d,n,size,lhs,rhs,slack\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            r.seed, r.trial, r.d, r.n, r.size, r.lhs, r.rhs, r.slack
        )
        .expect("string write");
    }
    out
}
