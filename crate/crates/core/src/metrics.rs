//! Rank fairness and utility measures.
//!
//! | Metric | Ideal | Reads |
//! |--------|-------|-------|
//! | Skew_g@k | 1 | group shares of the top-k against the whole list |
//! | NDKL@k | 0 | discounted KL divergence of prefix group shares, in bits |
//! | DAdv/Adv exposure ratio | 1 | mean `1/log2(pos+1)` of each group |
//! | NDCG@k | 1 | ground-truth judgments in rank order |
//!
//! Every function takes the ranking already resolved to true groups or
//! judgments in rank order; [`evaluate`] does the resolution against a
//! dataset. Metrics never look at observed labels.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Group, GroupProportions, Ranking};
use crate::error::{Error, Result};

#[inline]
fn discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cutoff k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// `p_{τ@k,g} / p_{C,g}` with `population` giving `p_C`.
pub fn skew(ranked: &[Group], population: &GroupProportions, group: Group, k: usize) -> Result<f64> {
    check_k(k, ranked.len())?;
    let p_c = population.get(group);
    if p_c <= 0.0 {
        return Err(Error::GroupAbsent(group));
    }
    let in_top = ranked[..k].iter().filter(|&&g| g == group).count();
    Ok(in_top as f64 / k as f64 / p_c)
}

/// KL divergence in bits; zero-probability terms of the first argument add 0.
fn kl_bits(p: [f64; 2], q: [f64; 2]) -> f64 {
    p.iter()
        .zip(&q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).log2())
        .sum()
}

/// Which prefix the KL term inside the NDKL sum measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdklMode {
    /// Prefix of length `i` at summation index `i`.
    #[default]
    Prefix,
    /// Prefix of length `k` at every summation index.
    Literal,
}

pub fn ndkl(ranked: &[Group], population: &GroupProportions, k: usize, mode: NdklMode) -> Result<f64> {
    check_k(k, ranked.len())?;
    let q = [
        population.get(Group::Disadvantaged),
        population.get(Group::Advantaged),
    ];
    let share = |counts: [usize; 2], len: usize| {
        [counts[0] as f64 / len as f64, counts[1] as f64 / len as f64]
    };
    let mut counts = [0usize; 2];
    let mut prefix_kl = Vec::with_capacity(k);
    for (i, g) in ranked[..k].iter().enumerate() {
        counts[g.index()] += 1;
        prefix_kl.push(kl_bits(share(counts, i + 1), q));
    }
    let mut z = 0.0;
    let mut total = 0.0;
    for i in 1..=k {
        let d = discount(i);
        z += d;
        total += d * match mode {
            NdklMode::Prefix => prefix_kl[i - 1],
            NdklMode::Literal => prefix_kl[k - 1],
        };
    }
    Ok(total / z)
}

/// Mean exposure of each group, indexed by [`Group::index`].
pub fn group_exposure(ranked: &[Group]) -> Result<[f64; 2]> {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (i, g) in ranked.iter().enumerate() {
        sums[g.index()] += discount(i + 1);
        counts[g.index()] += 1;
    }
    for g in Group::ALL {
        if counts[g.index()] == 0 {
            return Err(Error::GroupAbsent(g));
        }
    }
    Ok([
        sums[0] / counts[0] as f64,
        sums[1] / counts[1] as f64,
    ])
}

/// Mean exposure of the disadvantaged group over that of the advantaged group.
pub fn exposure_ratio(ranked: &[Group]) -> Result<f64> {
    let e = group_exposure(ranked)?;
    Ok(e[Group::Disadvantaged.index()] / e[Group::Advantaged.index()])
}

/// Normalizer used by [`ndcg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdcgNorm {
    /// DCG of the judgment-descending order, so the ideal ranking scores 1.
    #[default]
    Ideal,
    /// `Σ_{i≤k} 1/log2(i+1)`, which is only bounded by 1 for judgments in [0, 1].
    DiscountSum,
}

/// Shift that makes every judgment non-negative (0 when none is negative).
pub fn judgment_shift(judgments: &[f64]) -> f64 {
    let min = judgments.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        -min
    } else {
        0.0
    }
}

/// NDCG@k of judgments listed in rank order. Negative judgments are shifted
/// up by [`judgment_shift`] first.
pub fn ndcg(ranked_judgments: &[f64], k: usize, norm: NdcgNorm) -> Result<f64> {
    check_k(k, ranked_judgments.len())?;
    if let Some(i) = ranked_judgments.iter().position(|j| !j.is_finite()) {
        return Err(Error::InvalidArgument(format!("judgment at rank {} is not finite", i + 1)));
    }
    let shift = judgment_shift(ranked_judgments);
    let gains: Vec<f64> = ranked_judgments.iter().map(|j| j + shift).collect();
    let dcg: f64 = gains[..k]
        .iter()
        .enumerate()
        .map(|(i, g)| g * discount(i + 1))
        .sum();
    let z: f64 = match norm {
        NdcgNorm::Ideal => {
            let mut ideal = gains.clone();
            ideal.sort_by(|a, b| b.total_cmp(a));
            ideal[..k]
                .iter()
                .enumerate()
                .map(|(i, g)| g * discount(i + 1))
                .sum()
        }
        NdcgNorm::DiscountSum => (1..=k).map(discount).sum(),
    };
    if z <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "NDCG@{k} is undefined: the ideal top-{k} has zero gain"
        )));
    }
    Ok(dcg / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub ndkl_mode: NdklMode,
    pub ndcg_norm: NdcgNorm,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            ndkl_mode: NdklMode::Prefix,
            ndcg_norm: NdcgNorm::Ideal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewAt {
    pub k: usize,
    pub disadvantaged: f64,
    pub advantaged: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdcgAt {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Requested cutoffs, each clamped to the list length.
    pub skew: Vec<SkewAt>,
    /// NDKL over the whole list.
    pub ndkl: f64,
    pub exposure_disadvantaged: f64,
    pub exposure_advantaged: f64,
    pub exposure_ratio: f64,
    pub ndcg: Vec<NdcgAt>,
    pub judgment_shift: f64,
}

/// Resolve a ranking to true groups and raw judgments, in rank order.
pub fn ranked_truth(ranking: &Ranking, dataset: &Dataset) -> Result<(Vec<Group>, Vec<f64>)> {
    let cands = ranking.resolve(dataset)?;
    Ok((
        cands.iter().map(|c| c.true_group).collect(),
        cands.iter().map(|c| c.judgment).collect(),
    ))
}

/// All metrics of one ranking against the true groups and judgments of
/// `dataset`, with population shares taken from the ranked candidates.
pub fn evaluate(
    ranking: &Ranking,
    dataset: &Dataset,
    cutoffs: &[usize],
    options: &MetricOptions,
) -> Result<MetricReport> {
    let (groups, judgments) = ranked_truth(ranking, dataset)?;
    let n = groups.len();
    if n == 0 {
        return Err(Error::Empty("ranking"));
    }
    let dis = groups.iter().filter(|&&g| g == Group::Disadvantaged).count();
    let population = GroupProportions::from_counts(dis, n - dis)?;
    let mut skews = Vec::with_capacity(cutoffs.len());
    let mut ndcgs = Vec::with_capacity(cutoffs.len());
    for &k in cutoffs {
        let k = k.clamp(1, n);
        skews.push(SkewAt {
            k,
            disadvantaged: skew(&groups, &population, Group::Disadvantaged, k)?,
            advantaged: skew(&groups, &population, Group::Advantaged, k)?,
        });
        ndcgs.push(NdcgAt {
            k,
            value: ndcg(&judgments, k, options.ndcg_norm)?,
        });
    }
    let exposure = group_exposure(&groups)?;
    Ok(MetricReport {
        skew: skews,
        ndkl: ndkl(&groups, &population, n, options.ndkl_mode)?,
        exposure_disadvantaged: exposure[0],
        exposure_advantaged: exposure[1],
        exposure_ratio: exposure[0] / exposure[1],
        ndcg: ndcgs,
        judgment_shift: judgment_shift(&judgments),
    })
}
