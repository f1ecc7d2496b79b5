//! Serialization helpers. JSON objects use serde_json's default map
//! (sorted keys) and CSV floats use Rust's shortest-round-trip `Display`,
//! so every output is byte-stable for fixed inputs and seeds; only
//! wall-clock timing values vary between runs, and those sit in clearly
//! separated keys/columns.

use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{json, Value};

use cpcca::bench::{BenchPlan, BenchReport, GeneratorTemplate};
use cpcca::pcca::{ClusteringResult, ScanCandidate};

/// Complex eigenvalues as `[[re, im], ...]` in selection order.
pub fn eigenvalues_json(values: &[Complex64]) -> Value {
    Value::Array(values.iter().map(|l| json!([l.re, l.im])).collect())
}

/// The cluster report: everything deterministic about the run, plus the
/// wall-clock duration under the separated `timing` key.
pub fn cluster_report_json(
    result: &ClusteringResult,
    mode: &str,
    weight: &str,
    scan: Option<&[ScanCandidate]>,
    seconds: f64,
) -> Value {
    let trace = result.trace();
    json!({
        "converged": trace.converged,
        "crispness": result.crispness(),
        "eigenvalues": eigenvalues_json(result.eigenvalues()),
        "files": {"coarse": "coarse.csv", "membership": "membership.csv"},
        "iterations": trace.iterations,
        "mode": mode,
        "n_clusters": result.n_clusters(),
        "objective": result.objective(),
        "optimizer": trace.method.to_string(),
        "residual": result.subspace_residual(),
        "scan": scan.map(scan_json).unwrap_or(Value::Null),
        "timing": {"seconds": seconds},
        "vertex_indices": result.vertex_indices(),
        "weight": weight,
    })
}

fn scan_json(candidates: &[ScanCandidate]) -> Value {
    Value::Array(
        candidates
            .iter()
            .map(|c| {
                json!({
                    "crispness": c.crispness,
                    "min_chi": c.min_chi,
                    "n_clusters": c.n_clusters,
                    "selected": c.selected,
                    "skip_reason": c.skip_reason,
                })
            })
            .collect(),
    )
}

/// Dense matrix as headerless CSV, one row per line, `Display` floats.
pub fn matrix_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Long-format timing CSV: one row per (size, trial, stage). Failed
/// trials keep their rows with an empty `seconds` field and the error
/// message; the schema is stable.
pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::from("size,trial,stage,seed,seconds,error\n");
    for record in &report.records {
        for stage in cpcca::StageTimings::STAGES {
            let seconds = record
                .timings
                .as_ref()
                .and_then(|t| t.get(stage))
                .map(|s| s.to_string())
                .unwrap_or_default();
            let error = record.error.as_deref().unwrap_or("");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                record.size,
                record.trial,
                stage,
                record.seed,
                seconds,
                csv_escape(error)
            ));
        }
    }
    out
}

fn generator_json(template: &GeneratorTemplate) -> Value {
    match template {
        GeneratorTemplate::Circular {
            blocks,
            perturbation,
        } => json!({"blocks": blocks, "kind": "circular", "perturbation": perturbation}),
        GeneratorTemplate::NearlyUncoupled { blocks, coupling } => {
            json!({"blocks": blocks, "coupling": coupling, "kind": "uncoupled"})
        }
    }
}

fn timings_json(t: &cpcca::StageTimings) -> Value {
    json!({
        "coarse_grain": t.coarse_grain,
        "optimize": t.optimize,
        "spectral": t.spectral,
        "total": t.total,
    })
}

/// Benchmark summary JSON. Deterministic content (plan echo, seeds,
/// crispness, pairwise norms) sits apart from the timing statistics,
/// which live only under `timing_mean` / `timing_std`.
pub fn bench_json(plan: &BenchPlan, report: &BenchReport) -> Value {
    let summaries: Vec<Value> = report
        .summaries
        .iter()
        .map(|s| {
            json!({
                "failures": s.failures,
                "size": s.size,
                "successes": s.successes,
                "timing_mean": s.mean.as_ref().map(timings_json).unwrap_or(Value::Null),
                "timing_std": s.std.as_ref().map(timings_json).unwrap_or(Value::Null),
            })
        })
        .collect();
    let trials: Vec<Value> = report
        .records
        .iter()
        .map(|r| {
            json!({
                "crispness": r.crispness,
                "error": r.error,
                "seed": r.seed,
                "size": r.size,
                "trial": r.trial,
            })
        })
        .collect();
    let pairwise: Vec<Value> = report
        .pairwise
        .iter()
        .map(|p| {
            json!({
                "norm_1": p.norm_1,
                "norm_2": p.norm_2,
                "norm_inf": p.norm_inf,
                "size": p.size,
                "trial_a": p.trial_a,
                "trial_b": p.trial_b,
            })
        })
        .collect();
    json!({
        "pairwise": pairwise,
        "plan": {
            "generator": generator_json(&plan.generator),
            "mode": plan.mode.to_string(),
            "n_clusters": plan.n_clusters,
            "optimizer": plan.method.to_string(),
            "pairwise_norms": plan.pairwise_norms,
            "parallel": plan.parallel,
            "seed_base": plan.seed_base,
            "sizes": plan.sizes,
            "trials_per_size": plan.trials_per_size,
            "weight": weight_name(&plan.weight),
        },
        "summaries": summaries,
        "trials": trials,
    })
}

pub fn weight_name(weight: &cpcca::WeightChoice) -> &'static str {
    match weight {
        cpcca::WeightChoice::Uniform => "uniform",
        cpcca::WeightChoice::Stationary => "stationary",
    }
}
