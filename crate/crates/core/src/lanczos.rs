//! Shifted, deflated Lanczos for the smallest nonzero eigenvalue of `-Ω`.
//!
//! Runs on `A = cI + Ω` (spectrum in `[0, c]` for `c >= λ_max(-Ω)`) with the
//! constants projected out after every product, so the top of `A` on the
//! complement of constants is `c - gap`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::SymmetricGenerator;
use crate::spectral::rayleigh;

const PARALLEL_LEN: usize = 1 << 16;
const CHUNK: usize = 8192;

#[derive(Clone, Debug)]
pub(crate) struct Settings {
    pub tol: f64,
    pub stability: f64,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub gap: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < PARALLEL_LEN {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if y.len() < PARALLEL_LEN {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    } else {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
    }
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

fn should_check(k: usize) -> bool {
    k <= 50 || k % 10 == 0
}

pub(crate) fn smallest_nonconstant(g: &SymmetricGenerator, s: &Settings) -> Result<Outcome> {
    let d = g.dim();
    if d < 2 {
        return Err(Error::precondition("gap needs at least two states"));
    }
    let c = g.gershgorin_bound();
    if c == 0.0 {
        let mut v = vec![0.0; d];
        v[0] = std::f64::consts::FRAC_1_SQRT_2;
        v[1] = -std::f64::consts::FRAC_1_SQRT_2;
        return Ok(Outcome {
            gap: 0.0,
            vector: v,
            residual: 0.0,
            iterations: 0,
        });
    }
    let breakdown = 1e-13 * c;
    let max_steps = s.max_iter.min(d - 1).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    remove_mean(&mut v);
    normalize(&mut v);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut w = vec![0.0; d];
    let mut last = (0.0, f64::INFINITY);

    loop {
        g.apply(&v, &mut w);
        axpy(c, &v, &mut w);
        remove_mean(&mut w);
        let alpha = dot(&w, &v);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        basis.push(std::mem::take(&mut v));
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let h = dot(&w, b);
                axpy(-h, b, &mut w);
            }
            remove_mean(&mut w);
        }
        let beta = dot(&w, &w).sqrt();
        let k = alphas.len();
        let exhausted = beta <= breakdown || k >= max_steps;

        if exhausted || should_check(k) {
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = t.symmetric_eigen();
            let top = eig.eigenvalues.imax();
            let theta = eig.eigenvalues[top];
            let estimate = beta * eig.eigenvectors[(k - 1, top)].abs();
            history.push(theta);
            let stable = history.len() >= 3 && {
                let tail = &history[history.len() - 3..];
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo <= s.stability * theta.abs().max(1.0)
            };
            last = (c - theta, estimate);
            if exhausted || (estimate <= s.tol && stable) {
                let mut y = vec![0.0; d];
                for (i, b) in basis.iter().enumerate() {
                    axpy(eig.eigenvectors[(i, top)], b, &mut y);
                }
                remove_mean(&mut y);
                normalize(&mut y);
                let (gap, residual) = rayleigh(g, &y);
                if residual <= s.tol {
                    return Ok(Outcome {
                        gap: gap.max(0.0),
                        vector: y,
                        residual,
                        iterations: k,
                    });
                }
                if exhausted {
                    return Err(Error::NotConverged {
                        iterations: k,
                        ritz: gap,
                        residual,
                    });
                }
            }
        }
        if exhausted {
            return Err(Error::NotConverged {
                iterations: k,
                ritz: last.0,
                residual: last.1,
            });
        }
        w.iter_mut().for_each(|x| *x /= beta);
        betas.push(beta);
        v = std::mem::replace(&mut w, vec![0.0; d]);
    }
}
