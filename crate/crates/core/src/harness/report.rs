//! Charts and aggregate tables derived from a results table.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::{epsilon_grid, Direction};
use crate::pipeline::StrategyName;

use super::output::{aggregate, read_results, write_aggregates, write_file_with, AggregateRow, ResultRow};
use super::run::AGGREGATES_FILE;
use super::svg::{render, Chart, Series};

pub const CHART_DIR: &str = "charts";

struct MetricPick {
    key: String,
    title: String,
    ideal: f64,
    agg: Box<dyn Fn(&AggregateRow) -> f64>,
    row: Box<dyn Fn(&ResultRow) -> f64>,
}

fn metric_picks(cutoffs: &[usize]) -> Vec<MetricPick> {
    let mut picks = vec![
        MetricPick {
            key: "exposure_ratio".into(),
            title: "DAdv/Adv exposure ratio".into(),
            ideal: 1.0,
            agg: Box::new(|a| a.exposure_ratio.mean),
            row: Box::new(|r| r.exposure_ratio),
        },
        MetricPick {
            key: "ndkl".into(),
            title: "NDKL".into(),
            ideal: 0.0,
            agg: Box::new(|a| a.ndkl.mean),
            row: Box::new(|r| r.ndkl),
        },
    ];
    for (j, k) in cutoffs.iter().enumerate() {
        picks.push(MetricPick {
            key: format!("ndcg{k}"),
            title: format!("NDCG@{k}"),
            ideal: 1.0,
            agg: Box::new(move |a| a.ndcg[j].mean),
            row: Box::new(move |r| r.ndcg[j]),
        });
    }
    picks
}

fn epsilon_ticks() -> Vec<(f64, String)> {
    epsilon_grid()
        .into_iter()
        .map(|e| (e, format!("{}%", (e * 100.0).round())))
        .collect()
}

/// Charts as `(file name, svg)`: per direction and metric, replicate means
/// against ε; for fixture rows, per metric against services in row order.
pub fn charts(rows: &[ResultRow], cutoffs: &[usize]) -> Vec<(String, String)> {
    let aggregates = aggregate(rows);
    let picks = metric_picks(cutoffs);
    let mut out = Vec::new();
    let directions: BTreeSet<Direction> = aggregates
        .iter()
        .filter_map(|a| a.direction.parse().ok())
        .collect();
    let datasets: BTreeSet<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    for dataset in &datasets {
        let prefix = if datasets.len() > 1 {
            format!("{dataset}_")
        } else {
            String::new()
        };
        for &dir in &directions {
            for pick in &picks {
                let series = StrategyName::ALL
                    .iter()
                    .map(|&s| {
                        let points = aggregates
                            .iter()
                            .filter(|a| a.dataset == *dataset && a.strategy == s && a.direction == dir.name())
                            .map(|a| (a.epsilon, (pick.agg)(a)))
                            .collect();
                        Series::for_strategy(s, points)
                    })
                    .filter(|s| !s.points.is_empty())
                    .collect();
                let chart = Chart {
                    title: format!("{} ({dataset}, {dir})", pick.title),
                    x_label: "inference error ε".into(),
                    y_label: pick.title.clone(),
                    x_ticks: epsilon_ticks(),
                    series,
                    ideal: Some(pick.ideal),
                };
                out.push((format!("{prefix}{}_{}.svg", dir.name(), pick.key), render(&chart)));
            }
        }

        let fixture: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| r.is_fixture() && r.dataset == *dataset)
            .collect();
        if fixture.is_empty() {
            continue;
        }
        let mut services: Vec<&str> = Vec::new();
        for r in &fixture {
            let s = r.service.as_deref().unwrap_or("");
            if !services.contains(&s) {
                services.push(s);
            }
        }
        let ticks: Vec<(f64, String)> = services
            .iter()
            .enumerate()
            .map(|(i, s)| (i as f64, s.to_string()))
            .collect();
        for pick in &picks {
            let series = StrategyName::ALL
                .iter()
                .map(|&s| {
                    let points = fixture
                        .iter()
                        .filter(|r| r.strategy == s)
                        .filter_map(|r| {
                            let svc = r.service.as_deref().unwrap_or("");
                            services.iter().position(|x| *x == svc).map(|i| (i as f64, (pick.row)(r)))
                        })
                        .collect();
                    Series::for_strategy(s, points)
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            let chart = Chart {
                title: format!("{} ({dataset}, inference services)", pick.title),
                x_label: "service, by increasing error".into(),
                y_label: pick.title.clone(),
                x_ticks: ticks.clone(),
                series,
                ideal: Some(pick.ideal),
            };
            out.push((format!("{prefix}fixture_{}.svg", pick.key), render(&chart)));
        }
    }
    out
}

pub fn write_charts(dir: &Path, rows: &[ResultRow], cutoffs: &[usize]) -> Result<()> {
    let chart_dir = dir.join(CHART_DIR);
    std::fs::create_dir_all(&chart_dir).map_err(|e| Error::io(&chart_dir, e))?;
    for (name, svg) in charts(rows, cutoffs) {
        let path = chart_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Rebuild aggregates and charts from an existing results file.
pub fn report(results: &Path, out: &Path) -> Result<usize> {
    let file = std::fs::File::open(results).map_err(|e| Error::io(results, e))?;
    let (rows, cutoffs) = read_results(std::io::BufReader::new(file))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_file_with(&out.join(AGGREGATES_FILE), |buf| {
        write_aggregates(buf, &aggregate(&rows), &cutoffs)
    })?;
    write_charts(out, &rows, &cutoffs)?;
    Ok(rows.len())
}
