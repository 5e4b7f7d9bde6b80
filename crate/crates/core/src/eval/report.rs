use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::linalg::fmt_f64;

/// One metric value in a run report.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub task: String,
    pub method: String,
    pub kernel: String,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub metric_name: String,
    pub value: f64,
}

/// Writes rows as CSV with the header
/// `task,method,kernel,gamma,seed,metric_name,value`.
pub fn write_metric_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "method", "kernel", "gamma", "seed", "metric_name", "value"])?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.method.clone(),
            r.kernel.clone(),
            r.gamma.map(fmt_f64).unwrap_or_default(),
            r.seed.to_string(),
            r.metric_name.clone(),
            fmt_f64(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows to any writer, for stdout reports.
pub fn write_metric_rows(out: &mut impl Write, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["task", "method", "kernel", "gamma", "seed", "metric_name", "value"])?;
    for r in rows {
        w.write_record([
            r.task.clone(),
            r.method.clone(),
            r.kernel.clone(),
            r.gamma.map(fmt_f64).unwrap_or_default(),
            r.seed.to_string(),
            r.metric_name.clone(),
            fmt_f64(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}
