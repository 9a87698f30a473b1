//! Default numerical tolerances, kept in one table so every report can
//! print exactly which thresholds it was produced under.

use serde::Serialize;

/// Absolute tolerance for generator axioms, scaled by the largest rate.
pub const GENERATOR_AXIOM: f64 = 1e-12;
/// Ritz residual at which Lanczos declares convergence.
pub const LANCZOS_RESIDUAL: f64 = 1e-9;
/// Ritz value drift allowed over the last three convergence checks.
pub const LANCZOS_STABILITY: f64 = 1e-12;
pub const LANCZOS_MAX_ITER: usize = 500;
/// Sorted-multiset matching tolerance for spectrum containment.
pub const CONTAINMENT: f64 = 1e-8;
/// Relative Aldous-equality tolerance when both gaps come from dense solves.
pub const ALDOUS_DENSE: f64 = 1e-8;
/// Relative Aldous-equality tolerance when a Lanczos gap is involved.
pub const ALDOUS_LANCZOS: f64 = 1e-6;
/// Slack floor for trace inequalities, relative to `max(1, rhs)`.
pub const TRACE_SLACK: f64 = 1e-12;
/// Relative tolerance for gap ties in running-minimum bookkeeping.
pub const GAP_TIE: f64 = 1e-12;
/// Bisection budget for the interpolation parameter search.
pub const BISECTION_STEPS: usize = 60;

/// Largest state space stored as a full matrix by default (6! states).
pub const DENSE_CAP: usize = 720;
/// Largest dense interchange-process state space on explicit request (7!).
pub const DENSE_IP_MAX_N: usize = 7;
/// Largest interchange-process size handled matrix-free.
pub const MATRIX_FREE_IP_MAX_N: usize = 9;
/// Largest random-walk state space diagonalized densely in sequence reports.
pub const DENSE_RW_CAP: usize = 4096;
/// Largest dense full spectrum.
pub const FULL_SPECTRUM_CAP: usize = 5040;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ToleranceTable {
    pub generator_axiom: f64,
    pub lanczos_residual: f64,
    pub lanczos_stability: f64,
    pub lanczos_max_iter: usize,
    pub containment: f64,
    pub aldous_dense: f64,
    pub aldous_lanczos: f64,
    pub trace_slack: f64,
    pub gap_tie: f64,
    pub bisection_steps: usize,
    pub dense_cap: usize,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        Self {
            generator_axiom: GENERATOR_AXIOM,
            lanczos_residual: LANCZOS_RESIDUAL,
            lanczos_stability: LANCZOS_STABILITY,
            lanczos_max_iter: LANCZOS_MAX_ITER,
            containment: CONTAINMENT,
            aldous_dense: ALDOUS_DENSE,
            aldous_lanczos: ALDOUS_LANCZOS,
            trace_slack: TRACE_SLACK,
            gap_tie: GAP_TIE,
            bisection_steps: BISECTION_STEPS,
            dense_cap: DENSE_CAP,
        }
    }
}

impl ToleranceTable {
    /// `key=value` pairs, one per line, for CSV comment headers.
    pub fn header_lines(&self) -> Vec<String> {
        let value = serde_json::to_value(self).expect("tolerance table serializes");
        value
            .as_object()
            .map(|m| m.iter().map(|(k, v)| format!("{k}={v}")).collect())
            .unwrap_or_default()
    }
}
