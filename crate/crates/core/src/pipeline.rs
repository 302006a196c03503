//! The seven strategies: which model scores the test set, which label fills
//! the attribute column, and whether DetConstSort re-ranks the result.
//!
//! | Strategy | Training | Testing | Re-ranking |
//! |----------|----------|---------|------------|
//! | Oblivious | n/a | n/a | n/a |
//! | LTR | ground truth | inferred | n/a |
//! | Hidden | ground truth | hidden | n/a |
//! | FairLTR | ground truth | inferred | n/a |
//! | Oblivious+FairRR | n/a | n/a | inferred |
//! | LTR+FairRR | ground truth | inferred | inferred (same) |
//! | Hidden+FairRR | ground truth | hidden | inferred |
//!
//! "Inferred" always means the observed labels of the test set handed to
//! [`run_strategy`]; a scenario resolves them once, so scoring and re-ranking
//! of LTR+FairRR see the same labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detconstsort::{det_const_sort, observed_labels, target_from_observed};
use crate::domain::{Dataset, Ranking};
use crate::error::{Error, Result};
use crate::listwise::{score, AttributeMode, AttributeUse, LinearRanker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyName {
    Oblivious,
    #[serde(rename = "LTR")]
    Ltr,
    Hidden,
    #[serde(rename = "FairLTR")]
    FairLtr,
    #[serde(rename = "Oblivious+FairRR")]
    ObliviousFairRr,
    #[serde(rename = "LTR+FairRR")]
    LtrFairRr,
    #[serde(rename = "Hidden+FairRR")]
    HiddenFairRr,
}

impl StrategyName {
    pub const ALL: [StrategyName; 7] = [
        StrategyName::Oblivious,
        StrategyName::Ltr,
        StrategyName::Hidden,
        StrategyName::FairLtr,
        StrategyName::ObliviousFairRr,
        StrategyName::LtrFairRr,
        StrategyName::HiddenFairRr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Oblivious => "Oblivious",
            StrategyName::Ltr => "LTR",
            StrategyName::Hidden => "Hidden",
            StrategyName::FairLtr => "FairLTR",
            StrategyName::ObliviousFairRr => "Oblivious+FairRR",
            StrategyName::LtrFairRr => "LTR+FairRR",
            StrategyName::HiddenFairRr => "Hidden+FairRR",
        }
    }

    pub fn spec(self) -> StrategySpec {
        use RerankAttr as R;
        use TestingAttr as Te;
        use TrainingAttr as Tr;
        let (training, testing, rerank) = match self {
            StrategyName::Oblivious => (Tr::None, Te::None, R::None),
            StrategyName::Ltr => (Tr::GroundTruth, Te::Inferred, R::None),
            StrategyName::Hidden => (Tr::GroundTruth, Te::Hidden, R::None),
            StrategyName::FairLtr => (Tr::GroundTruth, Te::Inferred, R::None),
            StrategyName::ObliviousFairRr => (Tr::None, Te::None, R::Inferred),
            StrategyName::LtrFairRr => (Tr::GroundTruth, Te::Inferred, R::Inferred),
            StrategyName::HiddenFairRr => (Tr::GroundTruth, Te::Hidden, R::Inferred),
        };
        StrategySpec {
            name: self,
            training_attr: training,
            testing_attr: testing,
            rerank_attr: rerank,
        }
    }

    /// FairLTR and the re-ranking strategies.
    pub fn is_fairness_aware(self) -> bool {
        !matches!(
            self,
            StrategyName::Oblivious | StrategyName::Ltr | StrategyName::Hidden
        )
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingAttr {
    None,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestingAttr {
    None,
    Inferred,
    Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankAttr {
    None,
    Inferred,
}

/// One row of the strategy table. Only obtainable through [`StrategyName::spec`]
/// or [`all_strategies`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StrategySpec {
    name: StrategyName,
    training_attr: TrainingAttr,
    testing_attr: TestingAttr,
    rerank_attr: RerankAttr,
}

impl StrategySpec {
    pub fn name(&self) -> StrategyName {
        self.name
    }

    pub fn training_attr(&self) -> TrainingAttr {
        self.training_attr
    }

    pub fn testing_attr(&self) -> TestingAttr {
        self.testing_attr
    }

    pub fn rerank_attr(&self) -> RerankAttr {
        self.rerank_attr
    }
}

/// The seven strategies in table order.
pub fn all_strategies() -> Vec<StrategySpec> {
    StrategyName::ALL.iter().map(|n| n.spec()).collect()
}

/// Models trained once per dataset. Each carries the normalization fitted on
/// the training split, so test candidates are scored from raw features.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Models {
    /// ListNet without the attribute column.
    pub oblivious: Option<LinearRanker>,
    /// ListNet with the ground-truth attribute column.
    pub with_attr: Option<LinearRanker>,
    /// Fairness-aware model.
    pub fair: Option<LinearRanker>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutput {
    /// Ranking produced by the scoring model.
    pub scored: Ranking,
    /// Final ranking; equal to `scored` when no re-ranking applies.
    pub ranked: Ranking,
}

fn model_for<'a>(spec: &StrategySpec, models: &'a Models) -> Result<&'a LinearRanker> {
    let (model, which) = match spec.name {
        StrategyName::Oblivious | StrategyName::ObliviousFairRr => (&models.oblivious, "oblivious"),
        StrategyName::FairLtr => (&models.fair, "fair"),
        _ => (&models.with_attr, "with-attribute"),
    };
    let model = model.as_ref().ok_or(Error::MissingModel {
        strategy: spec.name.as_str(),
        model: which,
    })?;
    let expected = match spec.training_attr {
        TrainingAttr::None => AttributeUse::Excluded,
        TrainingAttr::GroundTruth => AttributeUse::GroundTruth,
    };
    if model.attribute != expected {
        return Err(Error::InvalidArgument(format!(
            "strategy `{}` got a model with attribute use {:?}",
            spec.name, model.attribute
        )));
    }
    Ok(model)
}

/// Score `test` with the strategy's model and, for the re-ranking strategies,
/// apply DetConstSort over the whole list with the observed-label proportions.
pub fn run_strategy(spec: &StrategySpec, models: &Models, test: &Dataset) -> Result<StrategyOutput> {
    let model = model_for(spec, models)?;
    let mode = match spec.testing_attr {
        // Ignored by attribute-free models.
        TestingAttr::None => AttributeMode::Hidden,
        TestingAttr::Inferred => AttributeMode::Inferred,
        TestingAttr::Hidden => AttributeMode::Hidden,
    };
    let scored = score(model, test.candidates(), mode)?;
    let ranked = match spec.rerank_attr {
        RerankAttr::None => scored.clone(),
        RerankAttr::Inferred => {
            let labels = observed_labels(&scored, test)?;
            let target = target_from_observed(test)?;
            det_const_sort(&scored, &labels, &target, scored.len())?
        }
    };
    Ok(StrategyOutput { scored, ranked })
}
