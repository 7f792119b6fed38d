//! CSV, JSON and metadata output of sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};
use sgap_core::experiments::{ParamValue, SweepRecord};

pub const CSV_HEADER: &str =
    "param_name,param_value,trials,mean_sg_ratio,std_sg_ratio,mean_snr_db,std_snr_db,mean_max_gap,sampling_pct,excluded_trials";

/// Field-scale anchors `(sg_ratio, snr_db)` at 75% missing receivers.
pub const REFERENCE_ANCHORS: [(f64, f64); 2] = [(0.9828, 3.5), (0.1796, 20.7)];

/// Six decimals; blank for missing or non-finite values.
fn fixed(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.6}"),
        _ => String::new(),
    }
}

fn param_text(p: ParamValue) -> String {
    match p {
        ParamValue::Scalar(v) => format!("{v:.6}"),
        ParamValue::Pair(x, y) => format!("{x:.6}x{y:.6}"),
    }
}

pub fn records_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.param_name,
            param_text(r.param_value),
            r.trials,
            fixed(Some(r.mean_sg_ratio)),
            fixed(Some(r.std_sg_ratio)),
            fixed(r.mean_snr_db),
            fixed(r.std_snr_db),
            fixed(Some(r.mean_max_gap)),
            fixed(Some(r.sampling_pct)),
            r.excluded_trials,
        );
    }
    out
}

fn num(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => Value::Null,
    }
}

/// Same fields as the CSV at full precision; a pair is `[x, y]`.
pub fn records_json(records: &[SweepRecord]) -> Value {
    Value::Array(
        records
            .iter()
            .map(|r| {
                json!({
                    "param_name": r.param_name,
                    "param_value": match r.param_value {
                        ParamValue::Scalar(v) => json!(v),
                        ParamValue::Pair(x, y) => json!([x, y]),
                    },
                    "trials": r.trials,
                    "mean_sg_ratio": num(Some(r.mean_sg_ratio)),
                    "std_sg_ratio": num(Some(r.std_sg_ratio)),
                    "mean_snr_db": num(r.mean_snr_db),
                    "std_snr_db": num(r.std_snr_db),
                    "mean_max_gap": num(Some(r.mean_max_gap)),
                    "sampling_pct": num(Some(r.sampling_pct)),
                    "excluded_trials": r.excluded_trials,
                    "valid": r.valid,
                })
            })
            .collect(),
    )
}

/// Conventions every run records.
pub fn conventions(trim_empty: bool) -> Value {
    json!({
        "matricization": "row = sx * n_rec_x + rx, col = sy * n_rec_y + ry (receiver index fastest)",
        "alternation_phase": "intervals with odd zero-based ordinal (the second, fourth, ...) are restricted",
        "trim_empty": trim_empty,
        "relocation": "joint over the 2D receiver grid, independently per shot",
        "staggered_baseline": "receiver (rx, ry) kept when (rx + ry) mod keep_every == 0",
        "sampling_pct": "fraction of observed entries in [0, 1]",
    })
}

/// Metadata sidecar of a sweep. Holds no timestamps so reruns write the same
/// bytes.
pub fn sweep_meta(
    kind: &str,
    seed: u64,
    geometry: Value,
    config: &BTreeMap<String, String>,
    trim_empty: bool,
    spearman: Option<f64>,
    argv: &[String],
) -> Value {
    let mut meta = json!({
        "command": "sweep",
        "kind": kind,
        "seed": seed,
        "argv": argv,
        "geometry": geometry,
        "conventions": conventions(trim_empty),
        "config": config,
    });
    if let Some(rho) = spearman {
        meta["spearman_sg_snr"] = json!(rho);
    }
    if kind == "relocation" {
        meta["reference_anchors"] = json!({
            "note": "field-scale values at 75% missing receivers, recorded for comparison only",
            "points": REFERENCE_ANCHORS.iter().map(|&(sg, db)| json!({"sg_ratio": sg, "snr_db": db})).collect::<Vec<_>>(),
        });
    }
    meta
}

/// Pretty JSON with a trailing newline.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializing a json value cannot fail");
    s.push('\n');
    s
}
