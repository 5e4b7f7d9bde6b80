use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Classification,
    Regression,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classification" | "classify" => Ok(Self::Classification),
            "regression" | "regress" => Ok(Self::Regression),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Classification => "classification",
            Self::Regression => "regression",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// Class ids with the original label for each id.
    Classes { ids: Vec<usize>, names: Vec<String> },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { ids, .. } => ids.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub features: DenseMatrix,
    pub feature_names: Vec<String>,
    pub targets: Targets,
    pub task: Task,
}

/// Loads a delimited file with a header row. `target_column` is a header
/// name or a zero-based index; every other column must be numeric.
/// Classification targets are label-encoded (numeric labels in numeric
/// order, others lexicographically). With `zscore`, each feature column is
/// standardized; constant columns become zero.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task, zscore: bool) -> Result<TabularDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target = headers
        .iter()
        .position(|h| h == target_column)
        .or_else(|| target_column.parse::<usize>().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| Error::Config(format!("{}: no column '{target_column}'", path.display())))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets: Vec<(String, usize)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(headers.len().saturating_sub(1));
        for (i, field) in record.iter().enumerate() {
            if i == target {
                raw_targets.push((field.to_string(), line));
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::NonNumericFeature {
                        path: path.to_path_buf(),
                        column: headers[i].clone(),
                        line,
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        });
    }
    let mut features = DenseMatrix::from_rows(&rows)?;
    if zscore {
        standardize(&mut features);
    }

    let targets = match task {
        Task::Regression => Targets::Values(
            raw_targets
                .iter()
                .map(|(s, line)| {
                    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: *line,
                        message: format!("target '{s}' is not a finite number"),
                    })
                })
                .collect::<Result<_>>()?,
        ),
        Task::Classification => {
            let mut names: Vec<String> = raw_targets.iter().map(|(s, _)| s.clone()).collect();
            let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
            if numeric.is_some() {
                names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
            } else {
                names.sort();
            }
            names.dedup();
            let ids = raw_targets
                .iter()
                .map(|(s, _)| names.iter().position(|n| n == s).expect("name collected above"))
                .collect();
            Targets::Classes { ids, names }
        }
    };
    Ok(TabularDataset {
        features,
        feature_names,
        targets,
        task,
    })
}

fn standardize(m: &mut DenseMatrix) {
    let (n, d) = m.shape();
    for j in 0..d {
        let col = m.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            m[(i, j)] = (m[(i, j)] - mean) / sd;
        }
    }
}
