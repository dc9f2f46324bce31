use std::io::Write;

use super::{RunResult, Trace};
use crate::report::{format_value, write_table};
use crate::{Result, Scalar};

pub const TRACE_COLUMNS: [&str; 3] = ["step", "test_loss", "grad_norm_sq"];
pub const RESULT_COLUMNS: [&str; 6] = ["config", "statistic", "mean", "se", "n_seeds", "n_diverged"];

fn keep(step: usize, last: usize, stride: usize) -> bool {
    stride <= 1 || step.is_multiple_of(stride) || step == last
}

/// Trace rows `step,test_loss,grad_norm_sq`, every `stride`-th step plus the
/// last one.
pub fn write_trace_csv<W: Write, T: Scalar>(out: W, trace: &Trace<T>, stride: usize) -> Result<()> {
    let last = trace.test_loss.len().saturating_sub(1);
    let rows: Vec<Vec<String>> = trace
        .test_loss
        .iter()
        .zip(&trace.grad_norm_sq)
        .enumerate()
        .filter(|(t, _)| keep(*t, last, stride))
        .map(|(t, (&l, &g))| vec![t.to_string(), format_value(l), format_value(g)])
        .collect();
    write_table(out, &TRACE_COLUMNS, &rows)
}

/// Seed-averaged loss curve `step,test_loss`.
pub fn write_curve_csv<W: Write, T: Scalar>(out: W, curve: &[T], stride: usize) -> Result<()> {
    let last = curve.len().saturating_sub(1);
    let rows: Vec<Vec<String>> = curve
        .iter()
        .enumerate()
        .filter(|(t, _)| keep(*t, last, stride))
        .map(|(t, &l)| vec![t.to_string(), format_value(l)])
        .collect();
    write_table(out, &["step", "test_loss"], &rows)
}

/// One row per configuration and statistic:
/// `config,statistic,mean,se,n_seeds,n_diverged`. Statistics are
/// `final_gap`, `mean_grad_norm_sq` and `plateau_loss`; `se` is empty for a
/// single seed.
pub fn write_result_csv<W: Write, T: Scalar>(out: W, results: &[(String, &RunResult<T>)]) -> Result<()> {
    let mut rows = Vec::new();
    for (label, r) in results {
        for (name, stat) in [
            ("final_gap", r.final_gap),
            ("mean_grad_norm_sq", r.mean_grad_norm_sq),
            ("plateau_loss", r.plateau_loss),
        ] {
            rows.push(vec![
                label.clone(),
                name.to_string(),
                format_value(stat.mean),
                stat.se.map(format_value).unwrap_or_default(),
                r.n_seeds().to_string(),
                r.n_diverged().to_string(),
            ]);
        }
    }
    write_table(out, &RESULT_COLUMNS, &rows)
}
