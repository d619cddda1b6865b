//! Result tables: per-run records, per-instance rows and ensemble summaries.
//! Rows and summaries are pure aggregations of the run records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RawQuantum,
    Hybrid,
    ClassicalLimit,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::RawQuantum => "raw-quantum",
            Method::Hybrid => "hybrid",
            Method::ClassicalLimit => "classical-limit",
        })
    }
}

/// One objective value (per shot, per chain or per clustering seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub method: Method,
    pub param: String,
    pub run: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub method: Method,
    pub param: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation; 0 for a single value.
    pub stddev: f64,
    pub count: usize,
    pub optimum: Option<f64>,
    /// `mean / optimum`, when the optimum is known and positive.
    pub ratio: Option<f64>,
    pub shots: usize,
    pub evals: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

impl ResultRow {
    pub fn from_values(
        instance: &str,
        method: Method,
        param: &str,
        values: &[f64],
        optimum: Option<f64>,
        shots: usize,
        evals: usize,
    ) -> Self {
        assert!(!values.is_empty(), "a result row needs at least one value");
        let (mean, stddev) = mean_std(values);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ratio = optimum.filter(|o| *o > 0.0).map(|o| mean / o);
        Self {
            instance: instance.to_string(),
            method,
            param: param.to_string(),
            mean,
            min,
            max,
            stddev,
            count: values.len(),
            optimum,
            ratio,
            shots,
            evals,
        }
    }
}

/// Ensemble aggregate of the rows sharing a method and parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub param: String,
    pub instances: usize,
    pub mean_value: f64,
    /// Mean and standard error of the per-instance ratios, over instances
    /// that have one.
    pub mean_ratio: Option<f64>,
    pub stderr_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<RunRecord>,
}

impl ResultTable {
    /// Records `values` as runs and appends their aggregate row.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        instance: &str,
        method: Method,
        param: &str,
        values: &[f64],
        optimum: Option<f64>,
        shots: usize,
        evals: usize,
    ) {
        self.runs
            .extend(values.iter().enumerate().map(|(run, &value)| RunRecord {
                instance: instance.to_string(),
                method,
                param: param.to_string(),
                run,
                value,
            }));
        self.rows.push(ResultRow::from_values(
            instance, method, param, values, optimum, shots, evals,
        ));
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
        self.runs.extend(other.runs);
    }

    pub fn find(&self, instance: &str, method: Method, param: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.instance == instance && r.method == method && r.param == param)
    }

    /// Groups rows by `(method, param)` in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(Method, String)> = Vec::new();
        let mut groups: BTreeMap<(Method, String), Vec<&ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.method, r.param.clone());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
                let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
                let (mean_ratio, stderr_ratio, min_ratio, max_ratio) = if ratios.is_empty() {
                    (None, None, None, None)
                } else {
                    let (m, sd) = mean_std(&ratios);
                    (
                        Some(m),
                        Some(sd / (ratios.len() as f64).sqrt()),
                        ratios.iter().copied().reduce(f64::min),
                        ratios.iter().copied().reduce(f64::max),
                    )
                };
                SummaryRow {
                    method: key.0,
                    param: key.1,
                    instances: rows.len(),
                    mean_value: mean_std(&means).0,
                    mean_ratio,
                    stderr_ratio,
                    min_ratio,
                    max_ratio,
                }
            })
            .collect()
    }
}

/// Tabular series for one plot (histogram bins, trajectories, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PlotData {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub plots: Vec<PlotData>,
    /// Scalar diagnostics, e.g. invariant violation counts.
    pub checks: BTreeMap<String, f64>,
    /// Other files as (name, contents), e.g. reusable angle tables.
    pub texts: Vec<(String, String)>,
}

/// Counts of each distinct value.
pub fn histogram(values: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((x, c)) if *x == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn row_statistics() {
        let r = ResultRow::from_values(
            "g0",
            Method::Hybrid,
            "p=1",
            &[2.0, 4.0, 6.0],
            Some(8.0),
            3,
            0,
        );
        assert_eq!((r.mean, r.min, r.max, r.count), (4.0, 2.0, 6.0, 3));
        assert_eq!(r.stddev, 2.0);
        assert_eq!(r.ratio, Some(0.5));
        let single = ResultRow::from_values("g0", Method::RawQuantum, "", &[1.5], Some(0.0), 0, 0);
        assert_eq!(single.stddev, 0.0);
        assert_eq!(single.ratio, None);
    }

    #[test]
    fn histogram_counts_sum_to_len() {
        let h = histogram(&[3.0, 1.0, 3.0, 2.0, 3.0]);
        assert_eq!(h, vec![(1.0, 1), (2.0, 1), (3.0, 3)]);
    }

    proptest! {
        #[test]
        fn rows_and_summary_rederive_from_runs(
            groups in proptest::collection::vec(proptest::collection::vec(0u32..20, 1..8), 1..6),
            opt in 20u32..30,
        ) {
            let mut t = ResultTable::default();
            for (i, vals) in groups.iter().enumerate() {
                let vals: Vec<f64> = vals.iter().map(|&v| v as f64).collect();
                t.push(&format!("g{i}"), Method::Hybrid, "x", &vals, Some(opt as f64), vals.len(), 0);
            }
            for row in &t.rows {
                let vals: Vec<f64> = t.runs.iter().filter(|r| r.instance == row.instance).map(|r| r.value).collect();
                let again = ResultRow::from_values(&row.instance, row.method, &row.param, &vals, row.optimum, row.shots, row.evals);
                prop_assert_eq!(&again, row);
                let ratio = row.ratio.unwrap();
                prop_assert!((0.0..=1.0).contains(&ratio));
            }
            let s = t.summary();
            prop_assert_eq!(s.len(), 1);
            let direct = t.rows.iter().map(|r| r.ratio.unwrap()).sum::<f64>() / t.rows.len() as f64;
            prop_assert!((s[0].mean_ratio.unwrap() - direct).abs() < 1e-12);
            prop_assert_eq!(s[0].instances, groups.len());
        }
    }
}
