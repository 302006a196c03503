//! Result tables and run metadata.
//!
//! `results.csv` columns, in this order:
//!
//! ```text
//! dataset, strategy, direction, epsilon, replicate, seed, service,
//! exposure_ratio, ndkl,
//! ndcg@k           for each configured cutoff k
//! skew_dis@k, skew_adv@k   for each configured cutoff k
//! ```
//!
//! Controlled rows carry `direction` ∈ {bidirectional, dis_to_adv,
//! adv_to_dis}, a replicate index and the scenario seed; `service` is empty.
//! Fixture rows carry `direction = fixture`, the service name, and the
//! service's effective error rate as `epsilon`; `replicate` and `seed` are
//! empty. Cutoffs larger than the test set are evaluated at its length but
//! keep their configured column name.
//!
//! `aggregates.csv` averages controlled rows over replicates:
//!
//! ```text
//! dataset, strategy, direction, epsilon, replicates,
//! then <metric>_mean, <metric>_sd for exposure_ratio, ndkl and every ndcg@k column
//! ```
//!
//! The `_sd` columns (sample standard deviation, 0 for a single replicate)
//! go beyond plain replicate means.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairltr::GammaSelection;
use crate::ingest::{NormalizationStats, SkewProfile};
use crate::listwise::LinearRanker;
use crate::noise::{Direction, FixtureReport};
use crate::pipeline::StrategyName;

use super::config::ExperimentConfig;

pub const FIXTURE_DIRECTION: &str = "fixture";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub strategy: StrategyName,
    /// A [`Direction`] name or [`FIXTURE_DIRECTION`].
    pub direction: String,
    pub epsilon: f64,
    pub replicate: Option<usize>,
    pub seed: Option<u64>,
    pub service: Option<String>,
    pub exposure_ratio: f64,
    pub ndkl: f64,
    /// One per cutoff, in cutoff order.
    pub ndcg: Vec<f64>,
    pub skew_dis: Vec<f64>,
    pub skew_adv: Vec<f64>,
}

impl ResultRow {
    pub fn is_fixture(&self) -> bool {
        self.direction == FIXTURE_DIRECTION
    }

    /// Sort key of controlled rows: direction, epsilon, replicate, strategy.
    fn key(&self) -> (u64, u64, usize, StrategyName) {
        let dir = self
            .direction
            .parse::<Direction>()
            .map(|d| d.code())
            .unwrap_or(u64::MAX);
        (dir, self.epsilon.to_bits(), self.replicate.unwrap_or(0), self.strategy)
    }
}

/// Controlled rows first in key order; fixture rows keep their given order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| match (a.is_fixture(), b.is_fixture()) {
        (false, false) => a.key().cmp(&b.key()),
        (false, true) => std::cmp::Ordering::Less,
        (true, false) => std::cmp::Ordering::Greater,
        (true, true) => std::cmp::Ordering::Equal,
    });
}

pub fn result_columns(cutoffs: &[usize]) -> Vec<String> {
    let mut cols: Vec<String> = [
        "dataset",
        "strategy",
        "direction",
        "epsilon",
        "replicate",
        "seed",
        "service",
        "exposure_ratio",
        "ndkl",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(cutoffs.iter().map(|k| format!("ndcg@{k}")));
    for k in cutoffs {
        cols.push(format!("skew_dis@{k}"));
        cols.push(format!("skew_adv@{k}"));
    }
    cols
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow], cutoffs: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(result_columns(cutoffs))?;
    for r in rows {
        let mut rec = vec![
            r.dataset.clone(),
            r.strategy.to_string(),
            r.direction.clone(),
            r.epsilon.to_string(),
            opt(&r.replicate),
            opt(&r.seed),
            opt(&r.service),
            r.exposure_ratio.to_string(),
            r.ndkl.to_string(),
        ];
        rec.extend(r.ndcg.iter().map(|v| v.to_string()));
        for (d, a) in r.skew_dis.iter().zip(&r.skew_adv) {
            rec.push(d.to_string());
            rec.push(a.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

fn parse_cutoffs(header: &csv::StringRecord) -> Result<Vec<usize>> {
    header
        .iter()
        .filter_map(|h| h.strip_prefix("ndcg@"))
        .map(|k| {
            k.parse()
                .map_err(|_| Error::Parse {
                    line: 1,
                    message: format!("bad cutoff column `ndcg@{k}`"),
                })
        })
        .collect()
}

/// Read a results table back, returning rows and the cutoffs its header names.
pub fn read_results<R: Read>(input: R) -> Result<(Vec<ResultRow>, Vec<usize>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let cutoffs = parse_cutoffs(&header)?;
    let expected = result_columns(&cutoffs);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("header does not match the results layout {expected:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            message: format!("bad {what} `{v}`"),
        };
        let num = |j: usize| -> Result<f64> { rec[j].parse().map_err(|_| bad(&header[j], &rec[j])) };
        let nonempty = |j: usize| Some(&rec[j]).filter(|s| !s.is_empty());
        let nk = cutoffs.len();
        rows.push(ResultRow {
            dataset: rec[0].to_string(),
            strategy: rec[1].parse().map_err(|_| bad("strategy", &rec[1]))?,
            direction: rec[2].to_string(),
            epsilon: num(3)?,
            replicate: nonempty(4)
                .map(|s| s.parse().map_err(|_| bad("replicate", s)))
                .transpose()?,
            seed: nonempty(5)
                .map(|s| s.parse().map_err(|_| bad("seed", s)))
                .transpose()?,
            service: nonempty(6).map(str::to_string),
            exposure_ratio: num(7)?,
            ndkl: num(8)?,
            ndcg: (0..nk).map(|j| num(9 + j)).collect::<Result<_>>()?,
            skew_dis: (0..nk).map(|j| num(9 + nk + 2 * j)).collect::<Result<_>>()?,
            skew_adv: (0..nk).map(|j| num(10 + nk + 2 * j)).collect::<Result<_>>()?,
        });
    }
    Ok((rows, cutoffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub strategy: StrategyName,
    pub direction: String,
    pub epsilon: f64,
    pub replicates: usize,
    pub exposure_ratio: MeanSd,
    pub ndkl: MeanSd,
    pub ndcg: Vec<MeanSd>,
}

/// Replicate means of the controlled rows, in row-key order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, u64, u64, StrategyName), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_fixture()) {
        let (dir, eps, _, strat) = r.key();
        groups
            .entry((r.dataset.clone(), dir, eps, strat))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|members| {
            let first = members[0];
            let col = |f: &dyn Fn(&ResultRow) -> f64| {
                MeanSd::of(&members.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            AggregateRow {
                dataset: first.dataset.clone(),
                strategy: first.strategy,
                direction: first.direction.clone(),
                epsilon: first.epsilon,
                replicates: members.len(),
                exposure_ratio: col(&|r| r.exposure_ratio),
                ndkl: col(&|r| r.ndkl),
                ndcg: (0..first.ndcg.len()).map(|j| col(&|r| r.ndcg[j])).collect(),
            }
        })
        .collect()
}

pub fn write_aggregates<W: Write>(out: W, rows: &[AggregateRow], cutoffs: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["dataset", "strategy", "direction", "epsilon", "replicates"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut metric_names = vec!["exposure_ratio".to_string(), "ndkl".to_string()];
    metric_names.extend(cutoffs.iter().map(|k| format!("ndcg@{k}")));
    for m in &metric_names {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sd"));
    }
    w.write_record(&header)?;
    for a in rows {
        let mut rec = vec![
            a.dataset.clone(),
            a.strategy.to_string(),
            a.direction.clone(),
            a.epsilon.to_string(),
            a.replicates.to_string(),
        ];
        for m in [a.exposure_ratio, a.ndkl].iter().chain(&a.ndcg) {
            rec.push(m.mean.to_string());
            rec.push(m.sd.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<aggregates>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub size: usize,
    pub disadvantaged: usize,
    pub advantaged: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub mode: super::config::GroupAssignment,
    pub profile: SkewProfile,
    /// Whether the schema's labels were exchanged to make the detected group
    /// the disadvantaged one.
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub role: String,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_learning_rate: f64,
    /// Relative loss change over the last tenth of the epochs.
    pub loss_tail_change: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_exposure_gap: Option<f64>,
}

impl ModelSummary {
    pub fn of(role: &str, m: &LinearRanker) -> Self {
        let trace = &m.loss_trace;
        let last = *trace.last().unwrap_or(&f64::NAN);
        let tail_from = trace.len().saturating_sub(1 + (trace.len().saturating_sub(1)).div_ceil(10));
        let start = trace.get(tail_from).copied().unwrap_or(last);
        Self {
            role: role.into(),
            feature_names: m.feature_names.clone(),
            weights: m.weights.clone(),
            epochs: m.config.epochs,
            initial_loss: trace.first().copied().unwrap_or(f64::NAN),
            final_loss: last,
            final_learning_rate: m.final_learning_rate,
            loss_tail_change: ((start - last) / start.abs().max(f64::MIN_POSITIVE)).abs(),
            gamma: m.fairness.as_ref().map(|f| f.gamma),
            final_exposure_gap: m.fairness.as_ref().map(|f| f.final_exposure_gap),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub direction: Direction,
    pub epsilon: f64,
    pub replicate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Trained,
    Complete,
    #[serde(rename = "FAILED")]
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub detection: DetectionSummary,
    pub normalization: NormalizationStats,
    pub models: Vec<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_selection: Option<GammaSelection>,
    pub scenarios: Vec<ScenarioSummary>,
    pub fixtures: Vec<FixtureReport>,
    pub columns: Vec<String>,
    pub result_rows: usize,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_file_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
