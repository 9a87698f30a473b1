//! Aldous-condition testing and the gap-equalization induction along
//! increasing rate sequences, with running-minimum bookkeeping over the
//! traceable lattice sequence.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    enclosing_side, induced_rates, lattice_animals, sequence_is_increasing, traceable_sequence,
    LatticePoint,
};
use crate::operators::{ip_generator, rw_generator, rw_generator_with, StorageMode};
use crate::rates::RateFunction;
use crate::spectral::{spectral_gap, spectral_gap_with, GapOptions, Method};
use crate::tolerances::{
    ALDOUS_DENSE, ALDOUS_LANCZOS, BISECTION_STEPS, DENSE_RW_CAP, GAP_TIE, LANCZOS_RESIDUAL,
    MATRIX_FREE_IP_MAX_N,
};
use crate::trace::sandwich;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AldousVerdict {
    pub gap_rw: f64,
    pub gap_ip: f64,
    pub abs_diff: f64,
    pub tol: f64,
    /// `abs_diff <= tol · max(1, gap_rw)`.
    pub holds: bool,
    /// `gap_ip <= gap_rw + tol · max(1, gap_rw)`.
    pub one_sided: bool,
    pub ip_method: Method,
}

/// Default equality tolerance for a given interchange-process solver.
pub fn aldous_tolerance(method: Method) -> f64 {
    match method {
        Method::Dense => ALDOUS_DENSE,
        Method::Lanczos => ALDOUS_LANCZOS,
    }
}

fn rw_gap(q: &RateFunction) -> Result<f64> {
    Ok(spectral_gap(&rw_generator(q), LANCZOS_RESIDUAL)?.gap)
}

fn ip_gap(q: &RateFunction, opts: &GapOptions) -> Result<(f64, Method)> {
    let g = ip_generator(q, StorageMode::Auto)?;
    let res = spectral_gap_with(&g, opts)?;
    Ok((res.gap, res.method))
}

/// Compares `γ^IP_N(q)` with `γ^RW_N(q)`. The interchange process is solved
/// densely up to 720 states and by Lanczos beyond.
pub fn is_aldous(q: &RateFunction, tol: f64) -> Result<AldousVerdict> {
    is_aldous_with(q, tol, &GapOptions::default())
}

pub fn is_aldous_with(q: &RateFunction, tol: f64, opts: &GapOptions) -> Result<AldousVerdict> {
    if q.size() > MATRIX_FREE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "interchange-process vertices",
            requested: q.size(),
            limit: MATRIX_FREE_IP_MAX_N,
        });
    }
    let gap_rw = rw_gap(q)?;
    let (gap_ip, ip_method) = ip_gap(q, opts)?;
    let abs_diff = (gap_ip - gap_rw).abs();
    let scale = gap_rw.max(1.0);
    Ok(AldousVerdict {
        gap_rw,
        gap_ip,
        abs_diff,
        tol,
        holds: abs_diff <= tol * scale,
        one_sided: gap_ip <= gap_rw + tol * scale,
        ip_method,
    })
}

/// `q̃_{k,t}`: pairs containing vertex `k` (1-based) scaled by `t`, the rest unchanged.
pub fn interpolate_rate(q: &RateFunction, k: usize, t: f64) -> Result<RateFunction> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::precondition(format!("interpolation parameter {t} outside [0, 1]")));
    }
    if k == 0 || k > q.size() {
        return Err(Error::IndexOutOfRange { index: k, size: q.size() });
    }
    let mut out = RateFunction::new(q.size())?;
    for (i, j, r) in q.pairs() {
        let scale = if i + 1 == k || j + 1 == k { t } else { 1.0 };
        out.set(i, j, r * scale)?;
    }
    Ok(out)
}

/// A `t ∈ [0, 1]` with `|γ^RW(q̃_{k,t}) - target| <= tol`, by bisection
/// towards `inf { t : γ^RW(q̃_{k,t}) >= target }`.
pub fn find_tk(q: &RateFunction, k: usize, target: f64, tol: f64) -> Result<f64> {
    let gap_at = |t: f64| -> Result<f64> { rw_gap(&interpolate_rate(q, k, t)?) };
    let top = gap_at(1.0)?;
    if target < 0.0 || target > top + tol {
        return Err(Error::precondition(format!(
            "target gap {target} outside [0, {top}] for k = {k}"
        )));
    }
    if (top - target).abs() <= tol {
        return Ok(1.0);
    }
    if gap_at(0.0)?.abs() <= tol && target <= tol {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let reached = gap_at(hi)?;
    if (reached - target).abs() > tol {
        return Err(Error::Postcondition(format!(
            "bisection for k = {k} ended at t = {hi} with gap {reached}, target {target}"
        )));
    }
    Ok(hi)
}

fn check_sequence(rates: &[RateFunction]) -> Result<Vec<f64>> {
    if rates.is_empty() {
        return Err(Error::precondition("rate sequence is empty"));
    }
    if !sequence_is_increasing(rates)? {
        return Err(Error::precondition("rate sequence is not increasing"));
    }
    let gaps = rates
        .iter()
        .map(|q| {
            if !q.is_connected() {
                return Err(Error::Hypothesis {
                    k: q.size(),
                    reason: "rate function is not connected".into(),
                });
            }
            rw_gap(q)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gaps)
}

/// `q̃_2, ..., q̃_N` with `q̃_N = q_N`, every random-walk gap equal to
/// `γ^RW_N(q_N)`, `q̃_k <= q_k`, and the sequence still increasing.
/// Position `m` holds the rate function on `m + 2` vertices.
pub fn build_equalized_sequence(rates: &[RateFunction], tol: f64) -> Result<Vec<RateFunction>> {
    Ok(equalize(rates, tol)?.into_iter().map(|(q, _)| q).collect())
}

fn equalize(rates: &[RateFunction], tol: f64) -> Result<Vec<(RateFunction, f64)>> {
    let gaps = check_sequence(rates)?;
    let target = *gaps.last().expect("nonempty");
    for (q, &g) in rates.iter().zip(&gaps) {
        if g < target - tol * target.max(1.0) {
            return Err(Error::Hypothesis {
                k: q.size(),
                reason: format!("gap {g} is below the final gap {target}"),
            });
        }
    }
    let last = rates.len() - 1;
    let tilde = rates
        .par_iter()
        .enumerate()
        .map(|(m, q)| {
            if m == last {
                return Ok((q.clone(), 1.0));
            }
            let t = find_tk(q, q.size(), target, tol)?;
            Ok((interpolate_rate(q, q.size(), t)?, t))
        })
        .collect::<Result<Vec<_>>>()?;

    for (m, ((qt, _), q)) in tilde.iter().zip(rates).enumerate() {
        let g = rw_gap(qt)?;
        if (g - target).abs() > tol {
            return Err(Error::Postcondition(format!(
                "equalized gap at k = {} is {g}, target {target}",
                m + 2
            )));
        }
        if !qt.dominated_by(q) {
            return Err(Error::Postcondition(format!("q̃ exceeds q at k = {}", m + 2)));
        }
    }
    let sequence: Vec<RateFunction> = tilde.iter().map(|(q, _)| q.clone()).collect();
    if !sequence_is_increasing(&sequence)? {
        return Err(Error::Postcondition("equalized sequence is not increasing".into()));
    }
    Ok(tilde)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryStep {
    pub k: usize,
    pub gap_rw: f64,
    pub gap_ip: f64,
    pub t: f64,
    pub equalized_gap_rw: f64,
    pub equalized_gap_ip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub steps: Vec<CorollaryStep>,
    pub gap_rw_final: f64,
    pub gap_ip_final: f64,
    pub min_gap_ip: f64,
    /// `|γ^IP_N(q_N) - γ^RW_N(q_N)|`.
    pub aldous_residual: f64,
    /// `|min_k γ^IP_k(q_k) - γ^IP_N(q_N)|`.
    pub min_residual: f64,
    /// Largest `|γ^IP_k(q̃_k) - γ^RW_k(q̃_k)|` along the equalized sequence.
    pub equalized_residual: f64,
    pub tol: f64,
    pub holds: bool,
}

/// Checks `γ^IP_N(q_N) = γ^RW_N(q_N)` and `min_k γ^IP_k(q_k) = γ^IP_N(q_N)`
/// under the running-minimum hypothesis, and that every equalized `q̃_k`
/// satisfies the Aldous condition.
pub fn verify_corollary(rates: &[RateFunction], tol: f64) -> Result<CorollaryReport> {
    verify_corollary_with(rates, tol, &GapOptions::default())
}

pub fn verify_corollary_with(
    rates: &[RateFunction],
    tol: f64,
    opts: &GapOptions,
) -> Result<CorollaryReport> {
    let n = rates.last().map_or(0, RateFunction::size);
    if n > MATRIX_FREE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "interchange-process vertices",
            requested: n,
            limit: MATRIX_FREE_IP_MAX_N,
        });
    }
    let tilde = equalize(rates, tol.min(LANCZOS_RESIDUAL))?;
    let steps = rates
        .iter()
        .zip(&tilde)
        .map(|(q, (qt, t))| {
            Ok(CorollaryStep {
                k: q.size(),
                gap_rw: rw_gap(q)?,
                gap_ip: ip_gap(q, opts)?.0,
                t: *t,
                equalized_gap_rw: rw_gap(qt)?,
                equalized_gap_ip: ip_gap(qt, opts)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = steps.last().expect("nonempty");
    let min_gap_ip = steps.iter().map(|s| s.gap_ip).fold(f64::INFINITY, f64::min);
    let aldous_residual = (last.gap_ip - last.gap_rw).abs();
    let min_residual = (min_gap_ip - last.gap_ip).abs();
    let equalized_residual = steps
        .iter()
        .map(|s| (s.equalized_gap_ip - s.equalized_gap_rw).abs())
        .fold(0.0, f64::max);
    let scale = last.gap_rw.max(1.0);
    Ok(CorollaryReport {
        gap_rw_final: last.gap_rw,
        gap_ip_final: last.gap_ip,
        min_gap_ip,
        aldous_residual,
        min_residual,
        equalized_residual,
        tol,
        holds: aldous_residual <= tol * scale
            && min_residual <= tol * scale
            && equalized_residual <= tol * scale,
        steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnimalVerdict {
    pub points: Vec<LatticePoint>,
    pub verdict: AldousVerdict,
}

/// Aldous verdicts for every connected subset of `Z²` with `2..=max_vertices`
/// points, one per translation class.
pub fn exhaustive_z2(max_vertices: usize, tol: f64) -> Result<Vec<AnimalVerdict>> {
    let animals: Vec<_> = lattice_animals(2, max_vertices)?
        .into_iter()
        .filter(|a| a.len() >= 2)
        .collect();
    animals
        .par_iter()
        .map(|a| {
            Ok(AnimalVerdict {
                points: a.points().to_vec(),
                verdict: is_aldous(&induced_rates(a)?, tol)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    #[serde(rename = "N")]
    pub size: usize,
    pub n: usize,
    pub gap_rw: f64,
    pub gap_ip: Option<f64>,
    pub running_min: f64,
    pub is_local_min: bool,
    #[serde(rename = "K_of_N")]
    pub k_of_n: usize,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub lower_vacuous: bool,
    pub upper_vacuous: bool,
    /// `gap_rw · N^{2/d} / π²`.
    pub ratio: f64,
    /// `gap_ip / gap_rw` where the interchange gap was computed.
    pub ip_rw_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub d: usize,
    pub n_max: usize,
    pub ip_cap: usize,
    pub asymptote_constant: f64,
    pub exponent: f64,
    pub rows: Vec<SequenceRow>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

impl SequenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "N,n,gap_rw,gap_ip,running_min,is_local_min,K_of_N,lower_bound,upper_bound,ratio,ip_rw_ratio,lower_vacuous,upper_vacuous\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.16e},{},{:.16e},{},{},{},{},{:.16e},{},{},{}",
                r.size,
                r.n,
                r.gap_rw,
                opt_cell(r.gap_ip),
                r.running_min,
                r.is_local_min,
                r.k_of_n,
                opt_cell(r.lower_bound),
                opt_cell(r.upper_bound),
                r.ratio,
                opt_cell(r.ip_rw_ratio),
                r.lower_vacuous,
                r.upper_vacuous
            )
            .expect("string write");
        }
        out
    }
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= GAP_TIE * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Running minimum, local-minimum flags and `K(N)` over gaps indexed from `N = 2`.
pub fn running_min_bookkeeping(gaps: &[f64]) -> Vec<(f64, bool, usize)> {
    let mut out = Vec::with_capacity(gaps.len());
    let mut min = f64::INFINITY;
    let mut k = 0;
    for (m, &g) in gaps.iter().enumerate() {
        let size = m + 2;
        if g < min && !tied(g, min) {
            min = g;
            k = size;
        } else if tied(g, min) {
            min = min.min(g);
            k = size;
        }
        out.push((min, tied(g, min), k));
    }
    out
}

/// Gaps along the traceable sequence `V_2, ..., V_{n_max^d}`.
pub fn ratio_table(d: usize, n_max: usize, ip_cap: usize) -> Result<SequenceReport> {
    ratio_table_with(d, n_max, ip_cap, &GapOptions::default())
}

pub fn ratio_table_with(
    d: usize,
    n_max: usize,
    ip_cap: usize,
    opts: &GapOptions,
) -> Result<SequenceReport> {
    if ip_cap > MATRIX_FREE_IP_MAX_N {
        return Err(Error::ResourceCap {
            what: "interchange-process cap",
            requested: ip_cap,
            limit: MATRIX_FREE_IP_MAX_N,
        });
    }
    let sets = traceable_sequence(d, n_max)?;
    let exponent = 2.0 / d as f64;
    let partial = sets
        .par_iter()
        .map(|set| {
            let size = set.len();
            let q = induced_rates(set)?;
            let gap_rw = if size <= DENSE_RW_CAP {
                rw_gap(&q)?
            } else {
                spectral_gap_with(&rw_generator_with(&q, StorageMode::MatrixFree), opts)?.gap
            };
            let gap_ip = if size <= ip_cap {
                Some(ip_gap(&q, opts)?.0)
            } else {
                None
            };
            let n = enclosing_side(d, size);
            let bounds = if n >= 2 { Some(sandwich(d, n, size)?) } else { None };
            Ok((size, n, gap_rw, gap_ip, bounds))
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = partial.iter().map(|p| p.2).collect();
    let rows = partial
        .into_iter()
        .zip(running_min_bookkeeping(&gaps))
        .map(|((size, n, gap_rw, gap_ip, bounds), (running_min, is_local_min, k_of_n))| SequenceRow {
            size,
            n,
            gap_rw,
            gap_ip,
            running_min,
            is_local_min,
            k_of_n,
            lower_bound: bounds.as_ref().map(|b| b.lower),
            upper_bound: bounds.as_ref().map(|b| b.upper),
            lower_vacuous: bounds.as_ref().is_none_or(|b| b.lower_vacuous),
            upper_vacuous: bounds.as_ref().is_none_or(|b| b.upper_vacuous),
            ratio: gap_rw * (size as f64).powf(exponent) / (PI * PI),
            ip_rw_ratio: gap_ip.map(|ip| ip / gap_rw),
        })
        .collect();
    Ok(SequenceReport {
        d,
        n_max,
        ip_cap,
        asymptote_constant: PI * PI,
        exponent,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(rate: f64) -> RateFunction {
        let mut q = RateFunction::new(2).unwrap();
        q.set(0, 1, rate).unwrap();
        q
    }

    #[test]
    fn aldous_examples() {
        let v = is_aldous(&two_point(5.0), ALDOUS_DENSE).unwrap();
        assert!((v.gap_rw - 10.0).abs() < 1e-12 && (v.gap_ip - 10.0).abs() < 1e-12);
        assert!(v.holds && v.one_sided);
        let v = is_aldous(&RateFunction::path(3).unwrap(), ALDOUS_DENSE).unwrap();
        assert!((v.gap_rw - 1.0).abs() < 1e-12 && v.holds);
        assert!(is_aldous(&RateFunction::star(4).unwrap(), ALDOUS_DENSE).unwrap().holds);
        assert!(is_aldous(&RateFunction::path(10).unwrap(), ALDOUS_DENSE).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let q = RateFunction::complete(4).unwrap();
        assert_eq!(interpolate_rate(&q, 4, 1.0).unwrap(), q);
        let cut = interpolate_rate(&q, 4, 0.0).unwrap();
        assert!((rw_gap(&cut).unwrap()).abs() < 1e-12);
        // The null vector separating vertex k from the rest.
        let k = 4.0f64;
        let mut f = vec![-1.0 / (k * (k - 1.0)).sqrt(); 4];
        f[3] = ((k - 1.0) / k).sqrt();
        let gf = rw_generator(&cut).matvec(&f);
        assert!(gf.iter().all(|v| v.abs() < 1e-15));
        assert!(interpolate_rate(&q, 4, 1.5).is_err());
        for t in [0.0, 0.3, 1.0] {
            let g = rw_gap(&interpolate_rate(&two_point(1.0), 2, t).unwrap()).unwrap();
            assert!((g - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn find_tk_examples() {
        let t = find_tk(&two_point(1.0), 2, 1.0, 1e-12).unwrap();
        assert!((t - 0.5).abs() < 1e-10);
        let q = RateFunction::path(4).unwrap();
        let top = rw_gap(&q).unwrap();
        assert_eq!(find_tk(&q, 4, top, 1e-12).unwrap(), 1.0);
        assert_eq!(find_tk(&q, 4, 0.0, 1e-12).unwrap(), 0.0);
        assert!(find_tk(&q, 4, top + 0.1, 1e-12).is_err());
    }

    #[test]
    fn interpolated_gap_is_monotone_in_t() {
        for q in [RateFunction::path(5).unwrap(), RateFunction::star(5).unwrap(), RateFunction::complete(5).unwrap()] {
            let gaps: Vec<f64> = (0..=10)
                .map(|s| rw_gap(&interpolate_rate(&q, 5, s as f64 / 10.0).unwrap()).unwrap())
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{gaps:?}");
        }
    }

    fn paths(n: usize) -> Vec<RateFunction> {
        (2..=n).map(|k| RateFunction::path(k).unwrap()).collect()
    }

    #[test]
    fn equalized_path_sequence() {
        let tilde = build_equalized_sequence(&paths(5), 1e-10).unwrap();
        let target = 4.0 * (PI / 10.0).sin().powi(2);
        for qt in &tilde {
            assert!((rw_gap(qt).unwrap() - target).abs() < 1e-10);
        }
        assert_eq!(tilde.last().unwrap(), &RateFunction::path(5).unwrap());
    }

    #[test]
    fn equal_gaps_keep_t_at_one() {
        let rates: Vec<_> = (2..=4).map(|k| {
            let mut q = RateFunction::new(k).unwrap();
            q.set(0, 1, 1.0).unwrap();
            for j in 2..k {
                q.set(0, j, 1.0).unwrap();
                q.set(1, j, 1.0).unwrap();
            }
            q
        }).collect();
        // Gaps of these nested graphs: K_2 gives 2, K_3 gives 3, K_4 minus an edge gives 2.
        let gaps: Vec<f64> = rates.iter().map(|q| rw_gap(q).unwrap()).collect();
        assert!((gaps[0] - 2.0).abs() < 1e-12 && (gaps[2] - 2.0).abs() < 1e-12);
        let tilde = build_equalized_sequence(&rates, 1e-10).unwrap();
        assert_eq!(tilde[0], rates[0]);
    }

    #[test]
    fn hypothesis_violation_names_k() {
        let mut q2 = RateFunction::new(2).unwrap();
        q2.set(0, 1, 20.0).unwrap();
        let mut q3 = RateFunction::new(3).unwrap();
        q3.set(0, 1, 20.0).unwrap();
        q3.set(1, 2, 1.0).unwrap();
        let mut q4 = RateFunction::new(4).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2), (2, 3)] {
            q4.set(i, j, 20.0).unwrap();
        }
        match build_equalized_sequence(&[q2, q3, q4], 1e-10) {
            Err(Error::Hypothesis { k, .. }) => assert_eq!(k, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equalization_on_paths() {
        let report = verify_corollary(&paths(6), 1e-8).unwrap();
        assert!(report.holds, "{report:?}");
        assert_eq!(report.steps.len(), 5);
        let trivial = verify_corollary(&paths(2), 1e-8).unwrap();
        assert!(trivial.holds);
    }

    #[test]
    fn bookkeeping() {
        let rows = running_min_bookkeeping(&[2.0, 1.0, 1.5, 1.0, 0.5, 0.7]);
        let mins: Vec<f64> = rows.iter().map(|r| r.0).collect();
        assert_eq!(mins, [2.0, 1.0, 1.0, 1.0, 0.5, 0.5]);
        let flags: Vec<bool> = rows.iter().map(|r| r.1).collect();
        assert_eq!(flags, [true, true, false, true, true, false]);
        let ks: Vec<usize> = rows.iter().map(|r| r.2).collect();
        assert_eq!(ks, [2, 3, 3, 5, 6, 6]);
    }

    #[test]
    fn one_dim_ratio_table() {
        let report = ratio_table(1, 30, 6).unwrap();
        assert_eq!(report.rows.len(), 29);
        for r in &report.rows {
            let want = 4.0 * (PI / (2.0 * r.size as f64)).sin().powi(2);
            assert!((r.gap_rw - want).abs() < 1e-10);
            assert!(r.is_local_min && r.k_of_n == r.size);
            if let Some(ip) = r.gap_ip {
                assert_eq!(r.ip_rw_ratio, Some(ip / r.gap_rw));
                assert!((ip / r.gap_rw - 1.0).abs() < 1e-8);
            }
        }
        assert!(report.rows.windows(2).all(|w| w[1].ratio > w[0].ratio));
        assert_eq!(report.rows.iter().filter(|r| r.gap_ip.is_some()).count(), 5);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 30);
        assert!(csv.lines().nth(1).unwrap().starts_with("2,2,"));
    }
}
