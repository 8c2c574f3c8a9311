use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measurement. Every row carries its seed, codimension, ambient
/// dimension and ε (`NaN`-free: ε is 0 for ε-independent metrics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub codim: usize,
    pub dim: usize,
    pub eps: f64,
    pub metric: String,
    pub value: f64,
}

/// Mean and sample standard deviation over seeds for one `(codim, ε, metric)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub codim: usize,
    pub dim: usize,
    pub eps: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub stdev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub timestamp_unix: u64,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    /// Full configuration echo; feeding it back reproduces `results`.
    pub config: serde_json::Value,
    pub results: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
    /// `(codim, seed)` jobs whose training diverged; excluded from aggregates.
    pub failures: Vec<FailedJob>,
    pub environment: Environment,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedJob {
    pub codim: usize,
    pub seed: u64,
    pub reason: String,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(
        experiment_id: &str,
        config: &C,
        mut results: Vec<ResultRow>,
        failures: Vec<FailedJob>,
        runtime_seconds: f64,
    ) -> Result<Self> {
        sort_rows(&mut results);
        let aggregates = aggregate(&results);
        Ok(ExperimentReport {
            experiment_id: experiment_id.to_string(),
            config: serde_json::to_value(config)?,
            results,
            aggregates,
            failures,
            environment: Environment::current(),
            runtime_seconds,
        })
    }

    /// Aggregate for `(codim, eps, metric)`, matching ε to 1e-12.
    pub fn aggregate(&self, codim: usize, eps: f64, metric: &str) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.codim == codim && (a.eps - eps).abs() <= 1e-12 && a.metric == metric)
    }

    pub fn rows<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.results.iter().filter(move |r| r.metric == metric)
    }

    /// Writes `report.json`, `results.csv` and `aggregates.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        fs::write(&json, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::io(&json, e))?;
        write_csv(&dir.join("results.csv"), &self.results)?;
        write_csv(&dir.join("aggregates.csv"), &self.aggregates)?;
        Ok(())
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.codim, a.dim, &a.metric, a.seed)
            .cmp(&(b.codim, b.dim, &b.metric, b.seed))
            .then(a.eps.total_cmp(&b.eps))
    });
}

/// Groups rows by `(codim, dim, ε, metric)` in sorted key order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize, u64, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.codim, r.dim, r.eps.to_bits(), r.metric.clone()))
            .or_default()
            .push(r.value);
    }
    let mut out: Vec<AggregateRow> = groups
        .into_iter()
        .map(|((codim, dim, eps, metric), v)| {
            let (mean, stdev) = mean_stdev(&v);
            AggregateRow {
                codim,
                dim,
                eps: f64::from_bits(eps),
                metric,
                n: v.len(),
                mean,
                stdev,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.codim, a.dim, &a.metric)
            .cmp(&(b.codim, b.dim, &b.metric))
            .then(a.eps.total_cmp(&b.eps))
    });
    out
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_stdev(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, eps: f64, value: f64) -> ResultRow {
        ResultRow {
            seed,
            codim: 1,
            dim: 2,
            eps,
            metric: "acc".into(),
            value,
        }
    }

    #[test]
    fn aggregates_by_key() {
        let rows = vec![row(0, 0.5, 1.0), row(1, 0.5, 0.0), row(0, 1.0, 0.25)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].n, 2);
        assert_eq!(agg[0].mean, 0.5);
        assert!((agg[0].stdev - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(agg[1].stdev, 0.0);
    }
}
