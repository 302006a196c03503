//! Core types shared by every module: the binary protected group, candidates,
//! datasets and deterministic rankings.
//!
//! Positions are 1-based throughout, so the top item has exposure
//! `1 / log2(1 + 1) = 1`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary protected group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Disadvantaged,
    Advantaged,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Disadvantaged, Group::Advantaged];

    pub fn flipped(self) -> Group {
        match self {
            Group::Disadvantaged => Group::Advantaged,
            Group::Advantaged => Group::Disadvantaged,
        }
    }

    /// Dense index: disadvantaged 0, advantaged 1.
    pub fn index(self) -> usize {
        match self {
            Group::Disadvantaged => 0,
            Group::Advantaged => 1,
        }
    }

    /// Value of the protected-attribute feature column: 1 for disadvantaged, 0 otherwise.
    pub fn encoding(self) -> f64 {
        match self {
            Group::Disadvantaged => 1.0,
            Group::Advantaged => 0.0,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Group::Disadvantaged => "dis",
            Group::Advantaged => "adv",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// One rankable item.
///
/// `observed_group` is what an inference step reported; `None` means the
/// inference returned "unknown" and must be resolved before any
/// fairness-aware computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub features: Vec<f64>,
    pub judgment: f64,
    pub true_group: Group,
    pub observed_group: Option<Group>,
}

impl Candidate {
    pub fn new(id: u64, features: Vec<f64>, judgment: f64, group: Group) -> Self {
        Self {
            id,
            name: None,
            features,
            judgment,
            true_group: group,
            observed_group: Some(group),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn observed(&self) -> Result<Group> {
        self.observed_group
            .ok_or(Error::UnresolvedUnknown { id: self.id })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupProportions {
    pub disadvantaged: f64,
    pub advantaged: f64,
}

impl GroupProportions {
    pub fn from_counts(dis: usize, adv: usize) -> Result<Self> {
        let n = dis + adv;
        if n == 0 {
            return Err(Error::Empty("group counts"));
        }
        let disadvantaged = dis as f64 / n as f64;
        Ok(Self {
            disadvantaged,
            advantaged: adv as f64 / n as f64,
        })
    }

    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::Disadvantaged => self.disadvantaged,
            Group::Advantaged => self.advantaged,
        }
    }

    /// Proportions with the two groups exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            disadvantaged: self.advantaged,
            advantaged: self.disadvantaged,
        }
    }
}

/// Fraction of each group among `candidates`, using either the true or the
/// observed labels.
pub fn group_proportions(candidates: &[Candidate], use_observed: bool) -> Result<GroupProportions> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let mut counts = [0usize; 2];
    for c in candidates {
        let g = if use_observed { c.observed()? } else { c.true_group };
        counts[g.index()] += 1;
    }
    GroupProportions::from_counts(counts[0], counts[1])
}

/// A single ranking task: every candidate is ranked against all others.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    candidates: Vec<Candidate>,
    feature_names: Vec<String>,
    group_proportions: GroupProportions,
    #[serde(skip)]
    index: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(candidates: Vec<Candidate>, feature_names: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let dim = feature_names.len();
        let mut index = HashMap::with_capacity(candidates.len());
        for (i, c) in candidates.iter().enumerate() {
            if index.insert(c.id, i).is_some() {
                return Err(Error::InvalidDataset(format!("duplicate candidate id {}", c.id)));
            }
            if c.features.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "candidate {} has {} features, expected {dim}",
                    c.id,
                    c.features.len()
                )));
            }
            if !c.judgment.is_finite() {
                return Err(Error::InvalidDataset(format!(
                    "candidate {} has a non-finite judgment",
                    c.id
                )));
            }
        }
        let group_proportions = group_proportions(&candidates, false)?;
        for g in Group::ALL {
            if group_proportions.get(g) == 0.0 {
                return Err(Error::GroupAbsent(g));
            }
        }
        Ok(Self {
            candidates,
            feature_names,
            group_proportions,
            index,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// True-group proportions.
    pub fn group_proportions(&self) -> GroupProportions {
        self.group_proportions
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Candidate> {
        self.index.get(&id).map(|&i| &self.candidates[i])
    }

    pub fn count(&self, group: Group) -> usize {
        self.candidates
            .iter()
            .filter(|c| c.true_group == group)
            .count()
    }

    /// Copy with the observed label of every candidate replaced.
    pub fn with_observed<F>(&self, mut observed: F) -> Dataset
    where
        F: FnMut(&Candidate) -> Option<Group>,
    {
        let mut out = self.clone();
        for c in &mut out.candidates {
            c.observed_group = observed(c);
        }
        out
    }

    /// Copy with the true labels exchanged (observed labels follow along).
    pub fn with_groups_swapped(&self) -> Dataset {
        let mut out = self.clone();
        for c in &mut out.candidates {
            c.true_group = c.true_group.flipped();
            c.observed_group = c.observed_group.map(Group::flipped);
        }
        out.group_proportions = out.group_proportions.mirrored();
        out
    }
}

/// An ordered list of candidate ids, best first, with the score that produced
/// each position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<u64>,
    scores: Vec<f64>,
}

impl Ranking {
    /// Build from parallel vectors without re-sorting. Used by re-rankers
    /// whose output is deliberately not score-sorted.
    pub fn from_parts(order: Vec<u64>, scores: Vec<f64>) -> Result<Self> {
        if order.len() != scores.len() {
            return Err(Error::Dimension(format!(
                "{} ids but {} scores",
                order.len(),
                scores.len()
            )));
        }
        Ok(Self { order, scores })
    }

    pub fn order(&self) -> &[u64] {
        &self.order
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 1-based position of `id`.
    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.order.iter().position(|&x| x == id).map(|p| p + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.order.iter().copied().zip(self.scores.iter().copied())
    }

    /// Look up every ranked candidate in `dataset`, in rank order.
    pub fn resolve<'a>(&self, dataset: &'a Dataset) -> Result<Vec<&'a Candidate>> {
        self.order
            .iter()
            .map(|&id| {
                dataset.get(id).ok_or_else(|| {
                    Error::InvalidArgument(format!("ranked id {id} is not in the dataset"))
                })
            })
            .collect()
    }
}

/// Sort by descending score, ties by ascending id.
pub fn rank_by_score(items: &[(u64, f64)]) -> Result<Ranking> {
    if let Some(&(id, _)) = items.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFiniteScore { id });
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (order, scores) = sorted.into_iter().unzip();
    Ok(Ranking { order, scores })
}
