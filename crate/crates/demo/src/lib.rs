//! Browser demo: three operations over a synthetic candidate pool, each
//! returning JSON for the page in `www/`.
//!
//! * [`rerank`]: top of a biased ranking before and after DetConstSort.
//! * [`noise_sweep`]: exposure ratio of all seven strategies against the
//!   inference error level of one noise direction.
//! * [`skew_curve`]: disadvantaged-group skew at every cutoff, before and
//!   after re-ranking.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fairrank::detconstsort::{det_const_sort, target_from_observed};
use fairrank::domain::{rank_by_score, Dataset, Group, Ranking};
use fairrank::harness::config::{DatasetSource, ExperimentConfig, FairConfig, MetricsConfig, NoiseConfig, SplitConfig};
use fairrank::harness::output::aggregate;
use fairrank::harness::{generate_synthetic, run_sweep, GroupAssignment, SweepMode, SynthParams};
use fairrank::listwise::TrainConfig;
use fairrank::metrics::{exposure_ratio, ndcg, skew, NdcgNorm};
use fairrank::noise::Direction;
use fairrank::pipeline::StrategyName;
use fairrank::GroupProportions;

fn pool(n: usize, adv_fraction: f64, bias: f64, seed: u64) -> fairrank::Result<Dataset> {
    generate_synthetic(&SynthParams {
        n,
        adv_fraction,
        bias_strength: bias,
        seed,
    })
}

/// Judgment-order ranking: the biased "as is" list of the demo.
fn judgment_ranking(d: &Dataset) -> fairrank::Result<Ranking> {
    let items: Vec<(u64, f64)> = d.candidates().iter().map(|c| (c.id, c.judgment)).collect();
    rank_by_score(&items)
}

fn groups_in_order(r: &Ranking, d: &Dataset) -> fairrank::Result<Vec<Group>> {
    Ok(r.resolve(d)?.iter().map(|c| c.true_group).collect())
}

#[derive(Serialize)]
struct Entry {
    position: usize,
    id: u64,
    group: &'static str,
    score: f64,
}

#[derive(Serialize)]
struct ListSummary {
    top: Vec<Entry>,
    exposure_ratio: f64,
    ndcg_at_top: f64,
}

#[derive(Serialize)]
struct RerankView {
    disadvantaged_share: f64,
    before: ListSummary,
    after: ListSummary,
}

fn summarize(r: &Ranking, d: &Dataset, top: usize) -> fairrank::Result<ListSummary> {
    let cands = r.resolve(d)?;
    let groups: Vec<Group> = cands.iter().map(|c| c.true_group).collect();
    let judgments: Vec<f64> = cands.iter().map(|c| c.judgment).collect();
    let k = top.clamp(1, r.len());
    Ok(ListSummary {
        top: cands
            .iter()
            .zip(r.scores())
            .take(k)
            .enumerate()
            .map(|(i, (c, s))| Entry {
                position: i + 1,
                id: c.id,
                group: c.true_group.short(),
                score: *s,
            })
            .collect(),
        exposure_ratio: exposure_ratio(&groups)?,
        ndcg_at_top: ndcg(&judgments, k, NdcgNorm::Ideal)?,
    })
}

pub fn rerank_json(n: usize, adv_fraction: f64, bias: f64, seed: u64, top: usize) -> fairrank::Result<String> {
    let d = pool(n, adv_fraction, bias, seed)?;
    let before = judgment_ranking(&d)?;
    let labels = groups_in_order(&before, &d)?;
    let target = target_from_observed(&d)?;
    let after = det_const_sort(&before, &labels, &target, before.len())?;
    let view = RerankView {
        disadvantaged_share: d.group_proportions().disadvantaged,
        before: summarize(&before, &d, top)?,
        after: summarize(&after, &d, top)?,
    };
    Ok(serde_json::to_string(&view)?)
}

#[derive(Serialize)]
struct SweepLine {
    strategy: &'static str,
    epsilon: Vec<f64>,
    exposure_ratio: Vec<f64>,
}

/// Small-budget experiment config over a synthetic pool.
pub fn demo_config(n: usize, adv_fraction: f64, bias: f64, seed: u64, direction: Direction) -> ExperimentConfig {
    ExperimentConfig {
        name: "demo".into(),
        seed,
        output_dir: "out".into(),
        disadvantaged: GroupAssignment::AsLabeled,
        dataset: DatasetSource::Synthetic(SynthParams {
            n,
            adv_fraction,
            bias_strength: bias,
            seed,
        }),
        split: SplitConfig {
            fraction: 0.7,
            seed,
        },
        training: TrainConfig {
            learning_rate: 0.05,
            epochs: 300,
            seed: 0,
        },
        fair: FairConfig {
            epochs: 300,
            ..FairConfig::default()
        },
        noise: NoiseConfig {
            directions: vec![direction],
        },
        metrics: MetricsConfig {
            cutoffs: vec![10],
            ..MetricsConfig::default()
        },
        fixtures: None,
    }
}

pub fn noise_sweep_json(
    n: usize,
    adv_fraction: f64,
    bias: f64,
    seed: u64,
    direction: &str,
) -> fairrank::Result<String> {
    let direction: Direction = direction.parse()?;
    let config = demo_config(n, adv_fraction, bias, seed, direction);
    config.validate()?;
    let outcome = run_sweep(&config, SweepMode::Full)?;
    if let Some(e) = outcome.metadata.error {
        return Err(fairrank::Error::Config(e));
    }
    let agg = aggregate(&outcome.rows);
    let lines: Vec<SweepLine> = StrategyName::ALL
        .iter()
        .map(|&s| {
            let pts: Vec<(f64, f64)> = agg
                .iter()
                .filter(|a| a.strategy == s)
                .map(|a| (a.epsilon, a.exposure_ratio.mean))
                .collect();
            SweepLine {
                strategy: s.as_str(),
                epsilon: pts.iter().map(|p| p.0).collect(),
                exposure_ratio: pts.iter().map(|p| p.1).collect(),
            }
        })
        .collect();
    Ok(serde_json::to_string(&lines)?)
}

#[derive(Serialize)]
struct SkewCurve {
    k: Vec<usize>,
    before: Vec<f64>,
    after: Vec<f64>,
}

pub fn skew_curve_json(n: usize, adv_fraction: f64, bias: f64, seed: u64) -> fairrank::Result<String> {
    let d = pool(n, adv_fraction, bias, seed)?;
    let before = judgment_ranking(&d)?;
    let labels = groups_in_order(&before, &d)?;
    let after = det_const_sort(&before, &labels, &target_from_observed(&d)?, before.len())?;
    let population: GroupProportions = d.group_proportions();
    let gb = groups_in_order(&before, &d)?;
    let ga = groups_in_order(&after, &d)?;
    let ks: Vec<usize> = (1..=d.len()).collect();
    let curve = |g: &[Group]| -> fairrank::Result<Vec<f64>> {
        ks.iter()
            .map(|&k| skew(g, &population, Group::Disadvantaged, k))
            .collect()
    };
    Ok(serde_json::to_string(&SkewCurve {
        before: curve(&gb)?,
        after: curve(&ga)?,
        k: ks,
    })?)
}

fn js_err(e: fairrank::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn rerank(n: usize, adv_fraction: f64, bias: f64, seed: u32, top: usize) -> Result<String, JsValue> {
    rerank_json(n, adv_fraction, bias, seed as u64, top).map_err(js_err)
}

#[wasm_bindgen]
pub fn noise_sweep(n: usize, adv_fraction: f64, bias: f64, seed: u32, direction: &str) -> Result<String, JsValue> {
    noise_sweep_json(n, adv_fraction, bias, seed as u64, direction).map_err(js_err)
}

#[wasm_bindgen]
pub fn skew_curve(n: usize, adv_fraction: f64, bias: f64, seed: u32) -> Result<String, JsValue> {
    skew_curve_json(n, adv_fraction, bias, seed as u64).map_err(js_err)
}
