//! CSV report formatting. All numbers are written with fixed six-decimal
//! formatting so identical runs produce byte-identical files.

use std::fmt::Write as _;

use perftwin_core::littlelaw::LittleRecord;

use crate::pipeline::{metric_value, EvalOutcome, ModelEval, METRIC_NAMES};

/// `report.csv`: one row per (model, metric) bootstrap summary, models in
/// report order, metrics in [`METRIC_NAMES`] order.
pub fn report_csv(evals: &[ModelEval]) -> String {
    let mut out = String::from("model,metric,mean,std\n");
    for eval in evals {
        for (idx, name) in METRIC_NAMES.iter().enumerate() {
            let s = &eval.summaries[idx];
            let _ = writeln!(out, "{},{name},{:.6},{:.6}", eval.choice.as_str(), s.mean, s.std);
        }
    }
    out
}

/// `loads.csv`: the per-stream metric values behind the summaries.
pub fn loads_csv(evals: &[ModelEval]) -> String {
    let mut out = String::from(
        "model,load_id,io_type,pem_iops,pem_latency,pes_iops,pes_latency,fd,mmd\n",
    );
    for eval in evals {
        for (load_id, io_type, m) in &eval.per_stream {
            let _ = write!(out, "{},{load_id},{io_type}", eval.choice.as_str());
            for idx in 0..METRIC_NAMES.len() {
                let _ = write!(out, ",{:.6}", metric_value(m, idx));
            }
            out.push('\n');
        }
    }
    out
}

/// `little.csv`: occupancy/estimate correlation for the observations and for
/// every model's predictions.
pub fn little_csv(outcome: &EvalOutcome) -> String {
    let n = outcome.observed_records.len();
    let mut out = String::from("series,correlation,n_loads\n");
    let _ = writeln!(out, "observed,{:.6},{n}", outcome.observed_little);
    for eval in &outcome.evals {
        let _ = writeln!(out, "{},{:.6},{n}", eval.choice.as_str(), eval.little_correlation);
    }
    out
}

/// `curve.csv`: learning-curve rows, outer order by train size.
pub fn curve_csv(points: &[(usize, Vec<ModelEval>)]) -> String {
    let mut out = String::from("train_loads,model,metric,mean,std\n");
    for (size, evals) in points {
        for eval in evals {
            for (idx, name) in METRIC_NAMES.iter().enumerate() {
                let s = &eval.summaries[idx];
                let _ = writeln!(
                    out,
                    "{size},{},{name},{:.6},{:.6}",
                    eval.choice.as_str(),
                    s.mean,
                    s.std
                );
            }
        }
    }
    out
}

/// `validate` output: queue-balance residual per load plus acceptance at
/// the given relative tolerance.
pub fn validate_csv(records: &[LittleRecord], rel_tol: f64) -> String {
    let mut out = String::from("load_id,occupancy,estimate,residual,accepted\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{}",
            r.load_id,
            r.occupancy,
            r.estimate,
            r.relative_residual(),
            r.relative_residual() <= rel_tol
        );
    }
    out
}
