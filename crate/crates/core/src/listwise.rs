//! ListNet: a linear scorer trained on the cross-entropy between the top-one
//! probability distributions of predicted scores and ground-truth judgments.
//!
//! ```text
//! P(s)_i = exp(s_i) / Σ_j exp(s_j)
//! L(w)   = -Σ_i P(y)_i · log P(Xw)_i
//! ∇L(w)  =  Σ_i (P(Xw)_i - P(y)_i) · x_i
//! ```
//!
//! Each dataset is treated as a single list, so training is full-batch
//! gradient descent from zero weights.

use serde::{Deserialize, Serialize};

use crate::domain::{rank_by_score, Candidate, Dataset, Ranking};
use crate::error::{Error, Result};
use crate::ingest::NormalizationStats;

/// Name of the protected-attribute column appended to the design matrix.
pub const ATTRIBUTE_FEATURE: &str = "protected_attribute";

#[derive(Debug, Clone, PartialEq)]
pub struct TopOneDistribution(Vec<f64>);

impl TopOneDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Softmax with max-subtraction.
pub fn top_one(scores: &[f64]) -> Result<TopOneDistribution> {
    if scores.is_empty() {
        return Err(Error::Empty("score vector"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {i} is not finite")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(TopOneDistribution(p))
}

/// Log of the top-one probabilities, computed without forming the ratio.
fn log_top_one(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln() + max;
    scores.iter().map(|&s| s - log_total).collect()
}

pub fn listnet_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} predicted scores but {} targets",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.len() < 2 {
        return Err(Error::InvalidArgument("a list needs at least two items".into()));
    }
    let t = top_one(target)?;
    loss_against(predicted, t.probabilities())
}

pub(crate) fn check_design(weights: &[f64], features: &[Vec<f64>], judgments: &[f64]) -> Result<()> {
    if features.len() != judgments.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows but {} judgments",
            features.len(),
            judgments.len()
        )));
    }
    if let Some((i, row)) = features
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != weights.len())
    {
        return Err(Error::Dimension(format!(
            "row {i} has {} features, weights have {}",
            row.len(),
            weights.len()
        )));
    }
    Ok(())
}

pub fn linear_scores(weights: &[f64], features: &[Vec<f64>]) -> Vec<f64> {
    features
        .iter()
        .map(|row| row.iter().zip(weights).map(|(x, w)| x * w).sum())
        .collect()
}

/// `Σ_i v_i · x_i` over the rows of `features`.
pub(crate) fn weighted_row_sum(v: &[f64], features: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (vi, row) in v.iter().zip(features) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += vi * x;
        }
    }
    out
}

pub fn listnet_gradient(weights: &[f64], features: &[Vec<f64>], judgments: &[f64]) -> Result<Vec<f64>> {
    check_design(weights, features, judgments)?;
    let t = top_one(judgments)?;
    gradient_against(weights, features, t.probabilities())
}

/// ListNet gradient against a precomputed target distribution.
pub(crate) fn gradient_against(weights: &[f64], features: &[Vec<f64>], target: &[f64]) -> Result<Vec<f64>> {
    let p = top_one(&linear_scores(weights, features))?;
    let diff: Vec<f64> = p
        .probabilities()
        .iter()
        .zip(target)
        .map(|(a, b)| a - b)
        .collect();
    Ok(weighted_row_sum(&diff, features, weights.len()))
}

/// ListNet loss against a precomputed target distribution.
pub(crate) fn loss_against(scores: &[f64], target: &[f64]) -> Result<f64> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {i} is not finite")));
    }
    let log_p = log_top_one(scores);
    Ok(-target.iter().zip(&log_p).map(|(t, lp)| t * lp).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Recorded for provenance; zero initialization and full-batch updates
    /// make training deterministic regardless of its value.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// A differentiable training objective over linear weights.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    fn loss(&self, weights: &[f64]) -> Result<f64>;
    fn gradient(&self, weights: &[f64]) -> Result<Vec<f64>>;
}

pub(crate) struct Descent {
    pub weights: Vec<f64>,
    pub loss_trace: Vec<f64>,
    pub final_learning_rate: f64,
}

const MAX_HALVINGS: usize = 60;

/// Full-batch gradient descent from zero weights.
///
/// A step that raises the loss (or makes it non-finite) is retried with half
/// the learning rate, and the halved rate is kept for later epochs. The trace
/// holds the initial loss followed by one entry per epoch and never increases.
pub(crate) fn gradient_descent(objective: &dyn Objective, config: &TrainConfig) -> Result<Descent> {
    config.validate()?;
    let mut weights = vec![0.0; objective.dim()];
    let mut loss = objective.loss(&weights)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            learning_rate: config.learning_rate,
        });
    }
    let mut lr = config.learning_rate;
    let mut trace = Vec::with_capacity(config.epochs + 1);
    trace.push(loss);
    for epoch in 1..=config.epochs {
        let grad = objective.gradient(&weights)?;
        let lr_before = lr;
        let mut accepted = false;
        let mut saw_non_finite = false;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = weights
                .iter()
                .zip(&grad)
                .map(|(w, g)| w - lr * g)
                .collect();
            match objective.loss(&candidate) {
                Ok(l) if l.is_finite() && l <= loss => {
                    weights = candidate;
                    loss = l;
                    accepted = true;
                    break;
                }
                Ok(l) if l.is_finite() => {}
                Ok(_) | Err(Error::InvalidArgument(_)) => saw_non_finite = true,
                Err(e) => return Err(e),
            }
            lr *= 0.5;
        }
        if !accepted && saw_non_finite && trace.len() == 1 {
            return Err(Error::Diverged {
                epoch,
                learning_rate: config.learning_rate,
            });
        }
        // With no acceptable step the weights sit at a numerical optimum.
        trace.push(loss);
        if !accepted {
            lr = lr_before;
            trace.resize(config.epochs + 1, loss);
            break;
        }
    }
    Ok(Descent {
        weights,
        loss_trace: trace,
        final_learning_rate: lr,
    })
}

/// How the protected attribute enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeUse {
    /// No attribute column.
    Excluded,
    /// Ground-truth attribute as an extra column during training.
    GroundTruth,
}

/// Which label fills the attribute column at scoring time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeMode {
    True,
    Inferred,
    /// The same constant (1) for every candidate.
    Hidden,
}

/// Gamma bookkeeping attached to fairness-aware models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessInfo {
    pub gamma: f64,
    pub final_exposure_gap: f64,
    #[serde(default)]
    pub selection: Option<crate::fairltr::GammaSelection>,
}

/// Trained linear scoring weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRanker {
    /// Names of the weighted columns: retained features, then the attribute
    /// column when `attribute == GroundTruth`.
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub attribute: AttributeUse,
    /// When present, raw candidate features are normalized before scoring.
    pub normalization: Option<NormalizationStats>,
    pub config: TrainConfig,
    pub final_learning_rate: f64,
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness: Option<FairnessInfo>,
}

impl LinearRanker {
    pub fn with_normalization(mut self, stats: NormalizationStats) -> Self {
        self.normalization = Some(stats);
        self
    }

    /// Weight on the protected-attribute column, if the model has one.
    pub fn attribute_weight(&self) -> Option<f64> {
        match self.attribute {
            AttributeUse::GroundTruth => self.weights.last().copied(),
            AttributeUse::Excluded => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn feature_row(&self, c: &Candidate, mode: AttributeMode) -> Result<Vec<f64>> {
        let mut row = match &self.normalization {
            Some(stats) => stats.transform_features(&c.features),
            None => c.features.clone(),
        };
        if self.attribute == AttributeUse::GroundTruth {
            row.push(attribute_value(c, mode)?);
        }
        if row.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "candidate {} yields {} model inputs, model has {} weights",
                c.id,
                row.len(),
                self.weights.len()
            )));
        }
        Ok(row)
    }

    /// Raw linear score of every candidate, in input order.
    pub fn score_candidates(&self, candidates: &[Candidate], mode: AttributeMode) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|c| {
                let row = self.feature_row(c, mode)?;
                Ok(row.iter().zip(&self.weights).map(|(x, w)| x * w).sum())
            })
            .collect()
    }
}

/// Design matrix for training, with the ground-truth attribute appended when requested.
pub(crate) fn design(train: &Dataset, attribute: AttributeUse) -> (Vec<Vec<f64>>, Vec<f64>, Vec<String>) {
    let mut names = train.feature_names().to_vec();
    if attribute == AttributeUse::GroundTruth {
        names.push(ATTRIBUTE_FEATURE.to_string());
    }
    let rows = train
        .candidates()
        .iter()
        .map(|c| {
            let mut row = c.features.clone();
            if attribute == AttributeUse::GroundTruth {
                row.push(c.true_group.encoding());
            }
            row
        })
        .collect();
    let judgments = train.candidates().iter().map(|c| c.judgment).collect();
    (rows, judgments, names)
}

pub(crate) struct ListNetObjective<'a> {
    pub features: &'a [Vec<f64>],
    /// Top-one distribution of the judgments.
    pub target: Vec<f64>,
    pub dim: usize,
}

impl<'a> ListNetObjective<'a> {
    pub fn new(features: &'a [Vec<f64>], judgments: &[f64], dim: usize) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::InvalidArgument("a list needs at least two items".into()));
        }
        Ok(Self {
            features,
            target: top_one(judgments)?.into_inner(),
            dim,
        })
    }
}

impl Objective for ListNetObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, weights: &[f64]) -> Result<f64> {
        loss_against(&linear_scores(weights, self.features), &self.target)
    }

    fn gradient(&self, weights: &[f64]) -> Result<Vec<f64>> {
        gradient_against(weights, self.features, &self.target)
    }
}

/// Train a ListNet ranker on an already normalized dataset.
pub fn train(train_set: &Dataset, attribute: AttributeUse, config: &TrainConfig) -> Result<LinearRanker> {
    let (rows, judgments, names) = design(train_set, attribute);
    let objective = ListNetObjective::new(&rows, &judgments, names.len())?;
    let run = gradient_descent(&objective, config)?;
    Ok(LinearRanker {
        feature_names: names,
        weights: run.weights,
        attribute,
        normalization: None,
        config: *config,
        final_learning_rate: run.final_learning_rate,
        loss_trace: run.loss_trace,
        fairness: None,
    })
}

/// Score and rank candidates with the attribute column filled per `mode`.
/// Models trained without the attribute ignore `mode`.
pub fn score(model: &LinearRanker, candidates: &[Candidate], mode: AttributeMode) -> Result<Ranking> {
    let scores = model.score_candidates(candidates, mode)?;
    let items: Vec<(u64, f64)> = candidates.iter().map(|c| c.id).zip(scores).collect();
    rank_by_score(&items)
}

/// Attribute encoding a candidate receives under `mode`.
pub fn attribute_value(c: &Candidate, mode: AttributeMode) -> Result<f64> {
    Ok(match mode {
        AttributeMode::True => c.true_group.encoding(),
        AttributeMode::Inferred => c.observed()?.encoding(),
        AttributeMode::Hidden => 1.0,
    })
}
