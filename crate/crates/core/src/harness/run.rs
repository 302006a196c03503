//! Experiment driver.
//!
//! 1. Load the dataset, settle which group is disadvantaged, split, and fit
//!    normalization on the training split.
//! 2. Train the oblivious, with-attribute and fair models once.
//! 3. For every scenario (controlled noise or fixture), perturb the observed
//!    labels of the test split once and run all seven strategies on it.

use std::path::{Path, PathBuf};

use crate::domain::{Dataset, Group};
use crate::error::{Error, Result};
use crate::fairltr::{train_fair, train_fair_auto, FairTrainingConfig, GammaSelection};
use crate::ingest::{
    apply_normalization, detect_disadvantaged_group, fit_normalization, load_dataset,
    skew_profile, split_train_test, NormalizationStats,
};
use crate::listwise::{train, AttributeUse, LinearRanker};
use crate::metrics::evaluate;
use crate::noise::{apply_fixture, load_fixtures, perturb, scenario_grid, Direction, FixtureReport, NoiseScenario};
use crate::pipeline::{all_strategies, run_strategy, Models};

use super::config::{DatasetSource, ExperimentConfig, GammaSetting, GroupAssignment};
use super::output::{
    aggregate, result_columns, sort_rows, write_aggregates, write_file_with, write_json, write_results,
    DatasetSummary, DetectionSummary, Metadata, ModelSummary, ResultRow, RunStatus, ScenarioSummary,
    FIXTURE_DIRECTION,
};
use super::report::write_charts;
use super::synth::generate_synthetic;

/// Service name of the ground-truth reference in fixture mode.
pub const GROUND_TRUTH_SERVICE: &str = "G-TRUTH";

#[derive(Debug, Clone)]
pub struct Prepared {
    /// Full dataset after group settlement.
    pub dataset: Dataset,
    pub detection: DetectionSummary,
    /// Raw splits; candidates keep their raw features and judgments.
    pub train: Dataset,
    pub test: Dataset,
    pub normalization: NormalizationStats,
}

pub fn load_source(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.dataset {
        DatasetSource::Synthetic(p) => generate_synthetic(p),
        DatasetSource::Csv { path, .. } => {
            let schema = config.schema()?.expect("csv source has a schema");
            load_dataset(path, &schema)
        }
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    prepare_dataset(load_source(config)?, config)
}

pub fn prepare_dataset(dataset: Dataset, config: &ExperimentConfig) -> Result<Prepared> {
    let profile = skew_profile(&dataset)?;
    let swapped = match config.disadvantaged {
        GroupAssignment::AsLabeled => false,
        GroupAssignment::Detect => detect_disadvantaged_group(&dataset)? == Group::Advantaged,
    };
    let dataset = if swapped { dataset.with_groups_swapped() } else { dataset };
    let (train, test) = split_train_test(&dataset, config.split.fraction, config.split.seed)?;
    let normalization = fit_normalization(&train)?;
    Ok(Prepared {
        dataset,
        detection: DetectionSummary {
            mode: config.disadvantaged,
            profile,
            swapped,
        },
        train,
        test,
        normalization,
    })
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub models: Models,
    pub gamma_selection: Option<GammaSelection>,
}

impl Trained {
    pub fn summaries(&self) -> Vec<ModelSummary> {
        [
            ("oblivious", &self.models.oblivious),
            ("with_attr", &self.models.with_attr),
            ("fair", &self.models.fair),
        ]
        .into_iter()
        .filter_map(|(role, m)| m.as_ref().map(|m| ModelSummary::of(role, m)))
        .collect()
    }
}

/// Train the three models on the normalized training split. Each returned
/// model carries the normalization so it scores raw candidates.
pub fn train_models(prepared: &Prepared, config: &ExperimentConfig) -> Result<Trained> {
    let stats = &prepared.normalization;
    let train_set = apply_normalization(&prepared.train, stats)?;
    let attach = |m: LinearRanker| m.with_normalization(stats.clone());
    let oblivious = train(&train_set, AttributeUse::Excluded, &config.training)?;
    let with_attr = train(&train_set, AttributeUse::GroundTruth, &config.training)?;
    let fair_base = config.fair.train_config(config.training.seed);
    let fair = match config.fair.gamma {
        GammaSetting::Auto => train_fair_auto(&train_set, &fair_base, &config.fair.search())?,
        GammaSetting::Fixed(gamma) => train_fair(
            &train_set,
            &FairTrainingConfig {
                gamma,
                base: fair_base,
            },
        )?,
    };
    let gamma_selection = fair.fairness.as_ref().and_then(|f| f.selection.clone());
    Ok(Trained {
        models: Models {
            oblivious: Some(attach(oblivious)),
            with_attr: Some(attach(with_attr)),
            fair: Some(attach(fair)),
        },
        gamma_selection,
    })
}

/// Where a scenario's observed labels come from.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Noise(NoiseScenario),
    Fixture(FixtureReport),
}

impl ScenarioSource {
    pub fn describe(&self) -> String {
        match self {
            ScenarioSource::Noise(s) => format!(
                "{} ε={} replicate {} (seed {})",
                s.direction, s.epsilon, s.replicate, s.seed
            ),
            ScenarioSource::Fixture(r) => format!("fixture `{}`", r.service),
        }
    }
}

/// Run all seven strategies on one perturbed test split.
pub fn evaluate_scenario(
    name: &str,
    models: &Models,
    test: &Dataset,
    source: &ScenarioSource,
    config: &ExperimentConfig,
) -> Result<Vec<ResultRow>> {
    let cutoffs = &config.metrics.cutoffs;
    let options = config.metrics.options();
    all_strategies()
        .iter()
        .map(|spec| {
            let out = run_strategy(spec, models, test)?;
            let m = evaluate(&out.ranked, test, cutoffs, &options)?;
            let (direction, epsilon, replicate, seed, service) = match source {
                ScenarioSource::Noise(s) => {
                    (s.direction.name().to_string(), s.epsilon, Some(s.replicate), Some(s.seed), None)
                }
                ScenarioSource::Fixture(r) => (
                    FIXTURE_DIRECTION.to_string(),
                    r.effective_error_rate,
                    None,
                    None,
                    Some(r.service.clone()),
                ),
            };
            Ok(ResultRow {
                dataset: name.to_string(),
                strategy: spec.name(),
                direction,
                epsilon,
                replicate,
                seed,
                service,
                exposure_ratio: m.exposure_ratio,
                ndkl: m.ndkl,
                ndcg: m.ndcg.iter().map(|v| v.value).collect(),
                skew_dis: m.skew.iter().map(|s| s.disadvantaged).collect(),
                skew_adv: m.skew.iter().map(|s| s.advantaged).collect(),
            })
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Every controlled scenario of the configured directions.
pub fn controlled_scenarios(config: &ExperimentConfig) -> Vec<NoiseScenario> {
    config
        .noise
        .directions
        .iter()
        .flat_map(|&d| scenario_grid(d, config.seed))
        .collect()
}

/// Fixture scenarios: ground truth first, then services by increasing
/// effective error rate (name breaks ties).
pub fn fixture_scenarios(test: &Dataset, fixtures_path: &Path) -> Result<Vec<(Dataset, FixtureReport)>> {
    let n = test.len();
    let truth = test.with_observed(|c| Some(c.true_group));
    let truth_report = FixtureReport {
        service: GROUND_TRUTH_SERVICE.to_string(),
        test_size: n,
        correct: n,
        incorrect: 0,
        unknown_disadvantaged: 0,
        unknown_advantaged: 0,
        unknown_assigned: 0,
        effective_error_rate: 0.0,
    };
    let mut services = load_fixtures(fixtures_path)?
        .iter()
        .map(|f| {
            if f.service == GROUND_TRUTH_SERVICE {
                return Err(Error::Fixture(format!(
                    "service name `{GROUND_TRUTH_SERVICE}` is reserved for the ground-truth reference"
                )));
            }
            apply_fixture(test, f, Group::Disadvantaged)
        })
        .collect::<Result<Vec<_>>>()?;
    services.sort_by(|a, b| {
        a.1.effective_error_rate
            .total_cmp(&b.1.effective_error_rate)
            .then_with(|| a.1.service.cmp(&b.1.service))
    });
    let mut out = vec![(truth, truth_report)];
    out.extend(services);
    Ok(out)
}

/// What a sweep produced, whether or not it finished.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Controlled scenarios, plus fixtures when configured.
    Full,
    FixturesOnly,
}

fn dataset_summary(config: &ExperimentConfig, p: &Prepared) -> DatasetSummary {
    DatasetSummary {
        name: config.name.clone(),
        size: p.dataset.len(),
        disadvantaged: p.dataset.count(Group::Disadvantaged),
        advantaged: p.dataset.count(Group::Advantaged),
        train_size: p.train.len(),
        test_size: p.test.len(),
        feature_names: p.dataset.feature_names().to_vec(),
    }
}

/// Run the experiment in memory. On a scenario failure the rows of the
/// scenarios that completed are kept and the metadata is marked failed.
pub fn run_sweep(config: &ExperimentConfig, mode: SweepMode) -> Result<SweepOutcome> {
    let prepared = prepare(config)?;
    let trained = train_models(&prepared, config)?;
    Ok(sweep_prepared(config, &prepared, &trained, mode))
}

pub fn sweep_prepared(
    config: &ExperimentConfig,
    prepared: &Prepared,
    trained: &Trained,
    mode: SweepMode,
) -> SweepOutcome {
    let mut metadata = Metadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::Complete,
        error: None,
        config: config.clone(),
        dataset: dataset_summary(config, prepared),
        detection: prepared.detection.clone(),
        normalization: prepared.normalization.clone(),
        models: trained.summaries(),
        gamma_selection: trained.gamma_selection.clone(),
        scenarios: Vec::new(),
        fixtures: Vec::new(),
        columns: result_columns(&config.metrics.cutoffs),
        result_rows: 0,
    };
    let mut rows = Vec::new();
    let mut failure: Option<Error> = None;

    if mode == SweepMode::Full {
        let scenarios = controlled_scenarios(config);
        metadata.scenarios = scenarios
            .iter()
            .map(|s| ScenarioSummary {
                direction: s.direction,
                epsilon: s.epsilon,
                replicate: s.replicate,
                seed: s.seed,
            })
            .collect();
        let results = par_map(&scenarios, |s| {
            let source = ScenarioSource::Noise(*s);
            perturb(&prepared.test, s)
                .and_then(|test| evaluate_scenario(&config.name, &trained.models, &test, &source, config))
                .map_err(|e| Error::Scenario {
                    scenario: source.describe(),
                    source: Box::new(e),
                })
        });
        for r in results {
            match r {
                Ok(mut rs) => rows.append(&mut rs),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        sort_rows(&mut rows);
    }

    if failure.is_none() {
        if let Some(fx) = &config.fixtures {
            match fixture_scenarios(&prepared.test, &fx.path) {
                Ok(list) => {
                    for (test, report) in list {
                        let source = ScenarioSource::Fixture(report.clone());
                        match evaluate_scenario(&config.name, &trained.models, &test, &source, config) {
                            Ok(mut rs) => rows.append(&mut rs),
                            Err(e) => {
                                failure = Some(Error::Scenario {
                                    scenario: source.describe(),
                                    source: Box::new(e),
                                });
                                break;
                            }
                        }
                        metadata.fixtures.push(report);
                    }
                }
                Err(e) => failure = Some(e),
            }
        } else if mode == SweepMode::FixturesOnly {
            failure = Some(Error::Config("fixture mode needs a [fixtures] path".into()));
        }
    }

    if let Some(e) = failure {
        metadata.status = RunStatus::Failed;
        metadata.error = Some(e.to_string());
    }
    metadata.result_rows = rows.len();
    SweepOutcome { rows, metadata }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const METADATA_FILE: &str = "metadata.json";
pub const MODELS_FILE: &str = "models.json";
pub const FAILED_FILE: &str = "FAILED";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write results, aggregates, charts and metadata. A failed sweep still
/// writes what it has, plus a `FAILED` marker holding the error, and then
/// returns that error.
pub fn write_outcome(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let cutoffs = &outcome.metadata.config.metrics.cutoffs;
    write_file_with(&dir.join(RESULTS_FILE), |buf| write_results(buf, &outcome.rows, cutoffs))?;
    write_file_with(&dir.join(AGGREGATES_FILE), |buf| {
        write_aggregates(buf, &aggregate(&outcome.rows), cutoffs)
    })?;
    write_charts(dir, &outcome.rows, cutoffs)?;
    write_json(&dir.join(METADATA_FILE), &outcome.metadata)?;
    let marker = dir.join(FAILED_FILE);
    match &outcome.metadata.error {
        Some(msg) => {
            std::fs::write(&marker, format!("{msg}\n")).map_err(|e| Error::io(&marker, e))?;
            Err(Error::Config(format!("sweep failed: {msg}")))
        }
        None => {
            if marker.exists() {
                std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            }
            Ok(())
        }
    }
}

/// Full pipeline to disk; returns the output directory.
pub fn run_experiment(config: &ExperimentConfig, mode: SweepMode, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    let prepared = prepare(config)?;
    let trained = train_models(&prepared, config)?;
    ensure_dir(&dir)?;
    write_json(&dir.join(MODELS_FILE), &trained.models)?;
    let outcome = sweep_prepared(config, &prepared, &trained, mode);
    write_outcome(&outcome, &dir)?;
    Ok(dir)
}

/// Steps 1 and 2 only: write the trained models and their metadata.
pub fn run_training(config: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    let prepared = prepare(config)?;
    let trained = train_models(&prepared, config)?;
    ensure_dir(&dir)?;
    write_json(&dir.join(MODELS_FILE), &trained.models)?;
    let metadata = Metadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        status: RunStatus::Trained,
        error: None,
        config: config.clone(),
        dataset: dataset_summary(config, &prepared),
        detection: prepared.detection.clone(),
        normalization: prepared.normalization.clone(),
        models: trained.summaries(),
        gamma_selection: trained.gamma_selection,
        scenarios: Vec::new(),
        fixtures: Vec::new(),
        columns: result_columns(&config.metrics.cutoffs),
        result_rows: 0,
    };
    write_json(&dir.join(METADATA_FILE), &metadata)?;
    Ok(dir)
}

/// Restrict the configured directions to `filter` when one is given.
pub fn filter_directions(config: &mut ExperimentConfig, filter: Option<Direction>) {
    if let Some(d) = filter {
        config.noise.directions = vec![d];
    }
}
