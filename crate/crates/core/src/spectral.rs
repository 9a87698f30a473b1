//! Spectral gaps, full spectra, the containment of the random-walk spectrum
//! in the interchange-process spectrum, and the closed-form hypercube
//! eigensystem.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{self, Settings};
use crate::lattice::{make_hypercube, HypercubeSpec};
use crate::operators::{ip_generator, rw_generator, StorageMode, SymmetricGenerator};
use crate::rates::RateFunction;
use crate::tolerances::{
    CONTAINMENT, DENSE_IP_MAX_N, FULL_SPECTRUM_CAP, LANCZOS_MAX_ITER, LANCZOS_RESIDUAL,
    LANCZOS_STABILITY,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// Dense for dense-stored generators, Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub gap: f64,
    pub method: Method,
    #[serde(skip)]
    pub eigenvector: Option<Vec<f64>>,
    /// `‖(-Ω)v - gap·v‖` for the returned eigenvector; 0 when none was computed.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct GapOptions {
    pub tol: f64,
    pub method: MethodChoice,
    pub eigenvector: bool,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            tol: LANCZOS_RESIDUAL,
            method: MethodChoice::Auto,
            eigenvector: false,
            seed: 0,
            max_iter: LANCZOS_MAX_ITER,
        }
    }
}

/// `γ(Ω) = min { ⟨f, -Ωf⟩ / ⟨f, f⟩ : f ⊥ 1 }` over real `f`.
pub fn spectral_gap(g: &SymmetricGenerator, tol: f64) -> Result<SpectralResult> {
    spectral_gap_with(
        g,
        &GapOptions {
            tol,
            ..GapOptions::default()
        },
    )
}

pub fn spectral_gap_with(g: &SymmetricGenerator, opts: &GapOptions) -> Result<SpectralResult> {
    let dense = match opts.method {
        MethodChoice::Auto => g.is_dense(),
        MethodChoice::Dense => true,
        MethodChoice::Lanczos => false,
    };
    if dense {
        dense_gap(g, opts.eigenvector)
    } else {
        let out = lanczos::smallest_nonconstant(
            g,
            &Settings {
                tol: opts.tol,
                stability: LANCZOS_STABILITY,
                max_iter: opts.max_iter,
                seed: opts.seed,
            },
        )?;
        Ok(SpectralResult {
            gap: out.gap,
            method: Method::Lanczos,
            eigenvector: opts.eigenvector.then_some(out.vector),
            residual: out.residual,
            iterations: out.iterations,
        })
    }
}

fn negated_dense(g: &SymmetricGenerator) -> Result<DMatrix<f64>> {
    if g.dim() > FULL_SPECTRUM_CAP {
        return Err(Error::ResourceCap {
            what: "dense eigendecomposition",
            requested: g.dim(),
            limit: FULL_SPECTRUM_CAP,
        });
    }
    Ok(-g.to_dense()?)
}

fn dense_gap(g: &SymmetricGenerator, want_vector: bool) -> Result<SpectralResult> {
    let d = g.dim();
    if d < 2 {
        return Err(Error::precondition("gap needs at least two states"));
    }
    let mut m = negated_dense(g)?;
    if !want_vector {
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        return Ok(SpectralResult {
            gap: values[1].max(0.0),
            method: Method::Dense,
            eigenvector: None,
            residual: 0.0,
            iterations: 0,
        });
    }
    // Lifting the constant mode above the spectrum leaves the gap at the
    // bottom, with an eigenvector orthogonal to 1 even when the gap is 0.
    let lift = g.gershgorin_bound() + 1.0;
    m.add_scalar_mut(lift / d as f64);
    let eig = SymmetricEigen::new(m);
    let low = eig.eigenvalues.imin();
    let mut v: Vec<f64> = eig.eigenvectors.column(low).iter().copied().collect();
    let mean = v.iter().sum::<f64>() / d as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let (gap, residual) = rayleigh(g, &v);
    Ok(SpectralResult {
        gap: gap.max(0.0),
        method: Method::Dense,
        eigenvector: Some(v),
        residual,
        iterations: 0,
    })
}

/// `⟨v, -Ωv⟩ / ⟨v, v⟩` and the residual `‖(-Ω)v - ρv‖ / ‖v‖`.
pub fn rayleigh(g: &SymmetricGenerator, v: &[f64]) -> (f64, f64) {
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let gv = g.matvec(v);
    let rho = -v.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>() / norm2;
    let r2: f64 = gv
        .iter()
        .zip(v)
        .map(|(a, b)| (-a - rho * b).powi(2))
        .sum();
    (rho, (r2 / norm2).sqrt())
}

/// All eigenvalues of `-Ω`, ascending.
pub fn full_spectrum(g: &SymmetricGenerator) -> Result<Vec<f64>> {
    let m = negated_dense(g)?;
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Greedy matching of ascending `sub` into ascending `sup`, each element
/// used at most once.
pub fn multiset_contained(sub: &[f64], sup: &[f64], tol: f64) -> bool {
    let mut p = 0;
    for &x in sub {
        while p < sup.len() && sup[p] < x - tol {
            p += 1;
        }
        if p == sup.len() || sup[p] > x + tol {
            return false;
        }
        p += 1;
    }
    true
}

/// `spec Ω^RW_N(q) ⊆ spec Ω^IP_N(q)` as multisets, up to `tol`.
pub fn spectrum_containment(q: &RateFunction, tol: f64) -> Result<bool> {
    if q.size() > DENSE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "containment vertices",
            requested: q.size(),
            limit: DENSE_IP_MAX_N,
        });
    }
    let rw = full_spectrum(&rw_generator(q))?;
    let ip = full_spectrum(&ip_generator(q, StorageMode::Dense)?)?;
    Ok(multiset_contained(&rw, &ip, tol))
}

pub fn spectrum_containment_default(q: &RateFunction) -> Result<bool> {
    spectrum_containment(q, CONTAINMENT)
}

/// `γ^RW(R^d_n) = 4 sin²(π / (2n))`, independent of `d`.
pub fn hypercube_gap_closed_form(d: usize, n: usize) -> Result<f64> {
    if d == 0 || n < 2 {
        return Err(Error::geometry(format!(
            "closed-form hypercube gap needs d >= 1 and n >= 2, got d = {d}, n = {n}"
        )));
    }
    Ok(one_dim_eigenvalue(n, 1).abs())
}

/// Fourier mode index `k ∈ {0, ..., n-1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigenIndex(pub Vec<usize>);

/// `λ^(1)(k) = -4 sin²(πk / (2n))`.
fn one_dim_eigenvalue(n: usize, k: usize) -> f64 {
    let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
    -4.0 * s * s
}

/// `f^(1)(x; 0) = n^{-1/2}`, `f^(1)(x; k) = (2/n)^{1/2} cos(πk(x - ½)/n)`.
fn one_dim_mode(n: usize, k: usize, x: i64) -> f64 {
    let n = n as f64;
    if k == 0 {
        return n.powf(-0.5);
    }
    (2.0 / n).sqrt() * (std::f64::consts::PI * k as f64 * (x as f64 - 0.5) / n).cos()
}

/// Eigenvalue of `Ω^RW(R^d_n)` and its product-form unit eigenvector, in the
/// vertex order of [`make_hypercube`].
pub fn hypercube_eigenpair(d: usize, n: usize, k: &EigenIndex) -> Result<(f64, Vec<f64>)> {
    if k.0.len() != d {
        return Err(Error::SizeMismatch {
            expected: d,
            found: k.0.len(),
        });
    }
    if let Some(&bad) = k.0.iter().find(|&&ki| ki >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: n.saturating_sub(1),
        });
    }
    let cube = make_hypercube(HypercubeSpec::new(d, n))?;
    let lambda = k.0.iter().map(|&ki| one_dim_eigenvalue(n, ki)).sum();
    let f = cube
        .points()
        .iter()
        .map(|p| {
            p.coords()
                .iter()
                .zip(&k.0)
                .map(|(&x, &ki)| one_dim_mode(n, ki, x))
                .product()
        })
        .collect();
    Ok((lambda, f))
}

/// Little-endian `u64` length followed by little-endian `f64` entries.
pub fn write_eigenvector<W: Write>(mut out: W, v: &[f64]) -> Result<()> {
    out.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_eigenvector<R: Read>(mut input: R) -> Result<Vec<f64>> {
    let mut header = [0u8; 8];
    input.read_exact(&mut header)?;
    let len = u64::from_le_bytes(header) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(Error::SizeMismatch {
            expected: 8 * len,
            found: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
