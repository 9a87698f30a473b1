use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use aldous_core::hjkn::{
    aldous_tolerance, exhaustive_z2, is_aldous, ratio_table_with, verify_corollary,
};
use aldous_core::lattice::{
    enclosing_side, induced_rates, make_hypercube, traceable_order, HypercubeSpec, VertexSet,
};
use aldous_core::operators::{ip_generator, rw_generator_with, StorageMode, SymmetricGenerator};
use aldous_core::perm::factorial;
use aldous_core::rates::RateFunction;
use aldous_core::spectral::{
    full_spectrum, multiset_contained, spectral_gap_with, write_eigenvector, GapOptions, Method,
    MethodChoice,
};
use aldous_core::tolerances::{
    CONTAINMENT, DENSE_CAP, LANCZOS_RESIDUAL, MATRIX_FREE_IP_MAX_N, TRACE_SLACK,
};
use aldous_core::trace::{fuzz_csv, trace_fuzz};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, Graph, MethodArg, Params, ProcessArg};
use crate::Failure;

/// A command's result: the JSON payload, its CSV rendering, and any
/// assertions that did not hold.
pub struct Artifact {
    pub json: Value,
    pub csv: String,
    pub default_format: Format,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Serialize)]
pub struct Violation {
    pub module: &'static str,
    pub operation: &'static str,
    pub inputs: Value,
    pub residual: f64,
    pub tol: f64,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| usage(format!("missing --{flag}")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn sequence_prefix(d: usize, size: usize) -> Result<VertexSet, Failure> {
    let side = enclosing_side(d, size) + 1;
    Ok(traceable_order(d, side)?.prefix(size)?)
}

fn family(graph: Graph, p: &Params, size: usize) -> Result<RateFunction, Failure> {
    Ok(match graph {
        Graph::Path => RateFunction::path(size)?,
        Graph::Complete => RateFunction::complete(size)?,
        Graph::Star => RateFunction::star(size)?,
        Graph::Sequence => induced_rates(&sequence_prefix(need(p.d, "d")?, size)?)?,
        Graph::Hypercube => return Err(usage("hypercubes do not form a nested family by vertex count")),
    })
}

/// The rate function named by `--rates`, `--vertices` or `--graph`, in that order.
fn rate_function(p: &Params) -> Result<RateFunction, Failure> {
    if let Some(path) = &p.rates {
        return read_json(path);
    }
    if let Some(path) = &p.vertices {
        let set: VertexSet = read_json(path)?;
        return Ok(induced_rates(&set)?);
    }
    match need(p.graph, "graph (or --rates / --vertices)")? {
        Graph::Hypercube => {
            let cube = make_hypercube(HypercubeSpec::new(need(p.d, "d")?, need(p.n, "n")?))?;
            Ok(induced_rates(&cube)?)
        }
        g => family(g, p, need(p.big_n, "N")?),
    }
}

fn rate_summary(q: &RateFunction) -> Value {
    json!({ "N": q.size(), "pairs": q.pairs().map(|(i, j, r)| json!([i + 1, j + 1, r])).collect::<Vec<_>>() })
}

fn method_choice(m: Option<MethodArg>) -> MethodChoice {
    match m.unwrap_or(MethodArg::Auto) {
        MethodArg::Auto => MethodChoice::Auto,
        MethodArg::Dense => MethodChoice::Dense,
        MethodArg::Lanczos => MethodChoice::Lanczos,
    }
}

fn generator(q: &RateFunction, p: &Params) -> Result<SymmetricGenerator, Failure> {
    let mode = match p.method {
        Some(MethodArg::Dense) => StorageMode::Dense,
        _ => StorageMode::Auto,
    };
    Ok(match p.process.unwrap_or(ProcessArg::Rw) {
        ProcessArg::Rw => rw_generator_with(q, mode),
        ProcessArg::Ip => ip_generator(q, mode)?,
    })
}

fn key_value_csv(pairs: &[(&str, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in pairs {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// IP tolerance by state-space size: dense solves are held to the tighter one.
fn aldous_default_tol(size: usize) -> f64 {
    let dense = size <= MATRIX_FREE_IP_MAX_N && factorial(size) <= DENSE_CAP as u64;
    aldous_tolerance(if dense { Method::Dense } else { Method::Lanczos })
}

pub fn gap(p: &Params) -> Result<Artifact, Failure> {
    let q = rate_function(p)?;
    let g = generator(&q, p)?;
    let opts = GapOptions {
        tol: p.tol.unwrap_or(LANCZOS_RESIDUAL),
        method: method_choice(p.method),
        eigenvector: p.eigenvector.is_some(),
        seed: p.seed.unwrap_or(0),
        ..GapOptions::default()
    };
    let res = spectral_gap_with(&g, &opts)?;
    if let (Some(path), Some(v)) = (&p.eigenvector, &res.eigenvector) {
        write_eigenvector(BufWriter::new(File::create(path)?), v)?;
    }
    let json = json!({
        "gap": res.gap,
        "method": res.method,
        "residual": res.residual,
        "iterations": res.iterations,
        "process": g.process(),
        "N": q.size(),
        "dim": g.dim(),
    });
    let csv = key_value_csv(&[
        ("gap", sci(res.gap)),
        ("method", json["method"].as_str().unwrap_or_default().to_string()),
        ("residual", sci(res.residual)),
        ("iterations", res.iterations.to_string()),
        ("N", q.size().to_string()),
        ("dim", g.dim().to_string()),
    ]);
    Ok(Artifact {
        json,
        csv,
        default_format: Format::Json,
        violations: Vec::new(),
    })
}

pub fn spectrum(p: &Params) -> Result<Artifact, Failure> {
    let q = rate_function(p)?;
    let g = generator(&q, p)?;
    let values = full_spectrum(&g)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", sci(*v)));
    }
    Ok(Artifact {
        json: json!({ "process": g.process(), "N": q.size(), "dim": g.dim(), "eigenvalues": values }),
        csv,
        default_format: Format::Json,
        violations: Vec::new(),
    })
}

pub fn containment(p: &Params) -> Result<Artifact, Failure> {
    let q = rate_function(p)?;
    let tol = p.tol.unwrap_or(CONTAINMENT);
    let rw = full_spectrum(&rw_generator_with(&q, StorageMode::Dense))?;
    let ip = full_spectrum(&ip_generator(&q, StorageMode::Dense)?)?;
    let holds = multiset_contained(&rw, &ip, tol);
    // Distance from each walk eigenvalue to the nearest interchange eigenvalue.
    let residual = rw
        .iter()
        .map(|a| ip.iter().map(|b| (a - b).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let mut violations = Vec::new();
    if !holds {
        violations.push(Violation {
            module: "spectral",
            operation: "spectrum_containment",
            inputs: rate_summary(&q),
            residual,
            tol,
        });
    }
    Ok(Artifact {
        json: json!({ "holds": holds, "residual": residual, "tol": tol, "rw_spectrum": rw, "N": q.size() }),
        csv: key_value_csv(&[
            ("holds", holds.to_string()),
            ("residual", sci(residual)),
            ("tol", sci(tol)),
            ("N", q.size().to_string()),
        ]),
        default_format: Format::Json,
        violations,
    })
}

pub fn aldous_check(p: &Params) -> Result<Artifact, Failure> {
    if p.exhaustive_z2 {
        return aldous_exhaustive(p);
    }
    let q = rate_function(p)?;
    let tol = p.tol.unwrap_or_else(|| aldous_default_tol(q.size()));
    let v = is_aldous(&q, tol)?;
    let mut violations = Vec::new();
    if !(v.holds && v.one_sided) {
        violations.push(Violation {
            module: "hjkn",
            operation: "is_aldous",
            inputs: rate_summary(&q),
            residual: v.abs_diff,
            tol: tol * v.gap_rw.max(1.0),
        });
    }
    Ok(Artifact {
        csv: key_value_csv(&[
            ("gap_rw", sci(v.gap_rw)),
            ("gap_ip", sci(v.gap_ip)),
            ("abs_diff", sci(v.abs_diff)),
            ("holds", v.holds.to_string()),
            ("one_sided", v.one_sided.to_string()),
        ]),
        json: serde_json::to_value(&v)?,
        default_format: Format::Json,
        violations,
    })
}

fn aldous_exhaustive(p: &Params) -> Result<Artifact, Failure> {
    let max_vertices = p.max_vertices.unwrap_or(6);
    let tol = p.tol.unwrap_or_else(|| aldous_default_tol(max_vertices));
    let verdicts = exhaustive_z2(max_vertices, tol)?;
    let mut csv = String::from("index,N,points,gap_rw,gap_ip,abs_diff,holds,one_sided,ip_method\n");
    let mut violations = Vec::new();
    for (i, a) in verdicts.iter().enumerate() {
        let v = &a.verdict;
        let points: Vec<String> = a
            .points
            .iter()
            .map(|x| x.coords().iter().map(i64::to_string).collect::<Vec<_>>().join(":"))
            .collect();
        let method = serde_json::to_value(v.ip_method)?;
        csv.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{}\n",
            a.points.len(),
            points.join(";"),
            sci(v.gap_rw),
            sci(v.gap_ip),
            sci(v.abs_diff),
            v.holds,
            v.one_sided,
            method.as_str().unwrap_or_default()
        ));
        if !(v.holds && v.one_sided) {
            violations.push(Violation {
                module: "hjkn",
                operation: "is_aldous",
                inputs: json!({ "points": a.points }),
                residual: v.abs_diff,
                tol: tol * v.gap_rw.max(1.0),
            });
        }
    }
    Ok(Artifact {
        json: json!({ "max_vertices": max_vertices, "tol": tol, "count": verdicts.len(), "verdicts": verdicts }),
        csv,
        default_format: Format::Csv,
        violations,
    })
}

pub fn trace_fuzz_cmd(p: &Params) -> Result<Artifact, Failure> {
    let d = p.d.unwrap_or(2);
    let n = p.n.unwrap_or(3);
    let trials = p.trials.unwrap_or(1000);
    let seed = p.seed.unwrap_or(0);
    let tol = p.tol.unwrap_or(TRACE_SLACK);
    let rows = trace_fuzz(d, n, trials, seed)?;
    let violations = rows
        .iter()
        .filter(|r| r.slack < -tol * r.rhs.max(1.0))
        .map(|r| Violation {
            module: "trace_bounds",
            operation: "trace_nd",
            inputs: json!({ "d": r.d, "n": r.n, "seed": r.seed, "trial": r.trial }),
            residual: -r.slack,
            tol: tol * r.rhs.max(1.0),
        })
        .collect();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    Ok(Artifact {
        csv: fuzz_csv(&rows),
        json: json!({ "d": d, "n": n, "trials": trials, "seed": seed, "min_slack": min_slack, "rows": rows }),
        default_format: Format::Csv,
        violations,
    })
}

pub fn sequence(p: &Params) -> Result<Artifact, Failure> {
    let rates: Vec<RateFunction> = match &p.rates {
        Some(path) => read_json(path)?,
        None => {
            let graph = p.graph.unwrap_or(Graph::Path);
            let top = need(p.big_n, "N")?;
            (2..=top).map(|k| family(graph, p, k)).collect::<Result<_, _>>()?
        }
    };
    let top = rates.last().map_or(0, RateFunction::size);
    let tol = p.tol.unwrap_or_else(|| aldous_default_tol(top));
    let report = verify_corollary(&rates, tol)?;
    let scale = report.gap_rw_final.max(1.0);
    let mut violations = Vec::new();
    if !report.holds {
        let residual = report
            .aldous_residual
            .max(report.min_residual)
            .max(report.equalized_residual);
        violations.push(Violation {
            module: "hjkn",
            operation: "verify_corollary",
            inputs: json!({ "sequence": rates.iter().map(rate_summary).collect::<Vec<_>>() }),
            residual,
            tol: tol * scale,
        });
    }
    let mut csv = String::from("k,gap_rw,gap_ip,t,equalized_gap_rw,equalized_gap_ip\n");
    for s in &report.steps {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.k,
            sci(s.gap_rw),
            sci(s.gap_ip),
            sci(s.t),
            sci(s.equalized_gap_rw),
            sci(s.equalized_gap_ip)
        ));
    }
    Ok(Artifact {
        json: serde_json::to_value(&report)?,
        csv,
        default_format: Format::Json,
        violations,
    })
}

pub fn ratio_table(p: &Params) -> Result<Artifact, Failure> {
    let d = p.d.unwrap_or(2);
    let n_max = need(p.n_max, "n-max")?;
    let ip_cap = p.ip_cap.unwrap_or(0);
    let opts = GapOptions {
        tol: LANCZOS_RESIDUAL,
        seed: p.seed.unwrap_or(0),
        ..GapOptions::default()
    };
    let report = ratio_table_with(d, n_max, ip_cap, &opts)?;
    let mut violations = Vec::new();
    for r in &report.rows {
        let row = json!({ "d": d, "N": r.size, "n": r.n });
        if let (Some(ip), Some(ratio)) = (r.gap_ip, r.ip_rw_ratio) {
            let tol = p.tol.unwrap_or_else(|| aldous_default_tol(r.size));
            if ip > r.gap_rw + tol * r.gap_rw.max(1.0) {
                violations.push(Violation {
                    module: "hjkn",
                    operation: "ratio_table.one_sided",
                    inputs: row.clone(),
                    residual: ip - r.gap_rw,
                    tol: tol * r.gap_rw.max(1.0),
                });
            }
            if (ratio - 1.0).abs() > tol {
                violations.push(Violation {
                    module: "hjkn",
                    operation: "ratio_table.ip_rw_ratio",
                    inputs: row.clone(),
                    residual: (ratio - 1.0).abs(),
                    tol,
                });
            }
        }
        if let Some(lo) = r.lower_bound.filter(|_| !r.lower_vacuous) {
            let slack = LANCZOS_RESIDUAL * lo.abs().max(1.0);
            if r.gap_rw < lo - slack {
                violations.push(Violation {
                    module: "trace_bounds",
                    operation: "sandwich.lower",
                    inputs: row.clone(),
                    residual: lo - r.gap_rw,
                    tol: slack,
                });
            }
        }
        if let Some(hi) = r.upper_bound.filter(|_| !r.upper_vacuous) {
            let slack = LANCZOS_RESIDUAL * hi.abs().max(1.0);
            if r.gap_rw > hi + slack {
                violations.push(Violation {
                    module: "trace_bounds",
                    operation: "sandwich.upper",
                    inputs: row,
                    residual: r.gap_rw - hi,
                    tol: slack,
                });
            }
        }
    }
    Ok(Artifact {
        csv: report.to_csv(),
        json: serde_json::to_value(&report)?,
        default_format: Format::Csv,
        violations,
    })
}
