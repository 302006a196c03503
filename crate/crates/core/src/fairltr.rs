//! Fairness-aware listwise training: the ListNet loss plus a one-sided,
//! gamma-weighted disparate-exposure penalty.
//!
//! With `P = softmax(Xw)` and `m_g = (1/|g|) Σ_{i∈g} P_i`:
//!
//! ```text
//! gap(w) = m_adv - m_dis
//! U(w)   = max(0, gap)^2
//! loss   = ListNet(w) + γ·U(w)
//! ∂gap/∂w = Σ_j P_j (a_j - gap) x_j,   a_j = [j∈adv]/|adv| - [j∈dis]/|dis|
//! ```
//!
//! Only under-exposure of the disadvantaged group is penalized; once the
//! disadvantaged group's mean top-one probability reaches the advantaged
//! group's, the penalty and its gradient vanish, so raising gamma further has
//! no effect. At the clamp kink (`gap == 0`) the penalty gradient is taken as 0.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Group};
use crate::error::{Error, Result};
use crate::listwise::{
    check_design, design, gradient_descent, linear_scores, top_one, weighted_row_sum, AttributeUse,
    FairnessInfo, LinearRanker, ListNetObjective, Objective, TrainConfig,
};

fn group_sizes(groups: &[Group]) -> Result<[usize; 2]> {
    let mut counts = [0usize; 2];
    for g in groups {
        counts[g.index()] += 1;
    }
    for g in Group::ALL {
        if counts[g.index()] == 0 {
            return Err(Error::GroupAbsent(g));
        }
    }
    Ok(counts)
}

/// `m_adv - m_dis` for a top-one distribution.
fn exposure_gap(p: &[f64], groups: &[Group], sizes: [usize; 2]) -> f64 {
    let mut sums = [0.0f64; 2];
    for (pi, g) in p.iter().zip(groups) {
        sums[g.index()] += pi;
    }
    sums[Group::Advantaged.index()] / sizes[Group::Advantaged.index()] as f64
        - sums[Group::Disadvantaged.index()] / sizes[Group::Disadvantaged.index()] as f64
}

/// Signed difference between the advantaged and disadvantaged groups' mean
/// top-one probability. Positive means the disadvantaged group is under-exposed.
pub fn exposure_difference(scores: &[f64], groups: &[Group]) -> Result<f64> {
    if scores.len() != groups.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} group labels",
            scores.len(),
            groups.len()
        )));
    }
    let sizes = group_sizes(groups)?;
    let p = top_one(scores)?;
    Ok(exposure_gap(p.probabilities(), groups, sizes))
}

/// One-sided squared exposure gap `max(0, m_adv - m_dis)^2`.
pub fn disparate_exposure(scores: &[f64], groups: &[Group]) -> Result<f64> {
    let gap = exposure_difference(scores, groups)?;
    Ok(gap.max(0.0).powi(2))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be a finite non-negative number, got {gamma}"
        )));
    }
    Ok(())
}

pub fn deltr_loss(
    weights: &[f64],
    features: &[Vec<f64>],
    judgments: &[f64],
    groups: &[Group],
    gamma: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    check_design(weights, features, judgments)?;
    let objective = DeltrObjective::new(features, judgments, groups, gamma, weights.len())?;
    objective.loss(weights)
}

pub fn deltr_gradient(
    weights: &[f64],
    features: &[Vec<f64>],
    judgments: &[f64],
    groups: &[Group],
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    check_design(weights, features, judgments)?;
    let objective = DeltrObjective::new(features, judgments, groups, gamma, weights.len())?;
    objective.gradient(weights)
}

pub(crate) struct DeltrObjective<'a> {
    listnet: ListNetObjective<'a>,
    groups: &'a [Group],
    sizes: [usize; 2],
    gamma: f64,
}

impl<'a> DeltrObjective<'a> {
    pub fn new(
        features: &'a [Vec<f64>],
        judgments: &[f64],
        groups: &'a [Group],
        gamma: f64,
        dim: usize,
    ) -> Result<Self> {
        if groups.len() != features.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} group labels",
                features.len(),
                groups.len()
            )));
        }
        Ok(Self {
            listnet: ListNetObjective::new(features, judgments, dim)?,
            sizes: group_sizes(groups)?,
            groups,
            gamma,
        })
    }
}

impl Objective for DeltrObjective<'_> {
    fn dim(&self) -> usize {
        self.listnet.dim
    }

    fn loss(&self, weights: &[f64]) -> Result<f64> {
        let base = self.listnet.loss(weights)?;
        if self.gamma == 0.0 {
            return Ok(base);
        }
        let p = top_one(&linear_scores(weights, self.listnet.features))?;
        let gap = exposure_gap(p.probabilities(), self.groups, self.sizes);
        Ok(base + self.gamma * gap.max(0.0).powi(2))
    }

    fn gradient(&self, weights: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.listnet.gradient(weights)?;
        if self.gamma == 0.0 {
            return Ok(grad);
        }
        let p = top_one(&linear_scores(weights, self.listnet.features))?;
        let p = p.probabilities();
        let gap = exposure_gap(p, self.groups, self.sizes);
        if gap <= 0.0 {
            return Ok(grad);
        }
        let inv_adv = 1.0 / self.sizes[Group::Advantaged.index()] as f64;
        let inv_dis = 1.0 / self.sizes[Group::Disadvantaged.index()] as f64;
        let coeffs: Vec<f64> = p
            .iter()
            .zip(self.groups)
            .map(|(&pj, g)| {
                let a = match g {
                    Group::Advantaged => inv_adv,
                    Group::Disadvantaged => -inv_dis,
                };
                pj * (a - gap)
            })
            .collect();
        let dgap = weighted_row_sum(&coeffs, self.listnet.features, grad.len());
        let scale = self.gamma * 2.0 * gap;
        for (g, d) in grad.iter_mut().zip(dgap) {
            *g += scale * d;
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairTrainingConfig {
    pub gamma: f64,
    pub base: TrainConfig,
}

/// Gradient descent on the penalized loss. The penalty always uses the
/// ground-truth groups and the model always carries the attribute column.
pub fn train_fair(train: &Dataset, config: &FairTrainingConfig) -> Result<LinearRanker> {
    check_gamma(config.gamma)?;
    let (rows, judgments, names) = design(train, AttributeUse::GroundTruth);
    let groups: Vec<Group> = train.candidates().iter().map(|c| c.true_group).collect();
    let objective = DeltrObjective::new(&rows, &judgments, &groups, config.gamma, names.len())?;
    let run = gradient_descent(&objective, &config.base)?;
    let gap = exposure_gap(
        top_one(&linear_scores(&run.weights, &rows))?.probabilities(),
        &groups,
        objective.sizes,
    );
    Ok(LinearRanker {
        feature_names: names,
        weights: run.weights,
        attribute: AttributeUse::GroundTruth,
        normalization: None,
        config: config.base,
        final_learning_rate: run.final_learning_rate,
        loss_trace: run.loss_trace,
        fairness: Some(FairnessInfo {
            gamma: config.gamma,
            final_exposure_gap: gap,
            selection: None,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSearch {
    /// Doubling stops once post-training U falls to this fraction of the
    /// unpenalized U0.
    pub exposure_tolerance: f64,
    pub max_doublings: usize,
}

impl Default for GammaSearch {
    fn default() -> Self {
        Self {
            exposure_tolerance: 0.05,
            max_doublings: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaStep {
    pub gamma: f64,
    pub exposure: f64,
    pub final_loss: f64,
    /// Relative loss change over the last tenth of the epochs.
    pub loss_tail_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    /// ListNet loss L0 and penalty U0 at the unpenalized optimum.
    pub baseline_loss: f64,
    pub baseline_exposure: f64,
    pub heuristic_gamma: f64,
    pub steps: Vec<GammaStep>,
    pub gamma: f64,
}

fn tail_change(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 0.0;
    }
    let start = trace[n - 1 - (n - 1).div_ceil(10)];
    let end = trace[n - 1];
    ((start - end) / start.abs().max(f64::MIN_POSITIVE)).abs()
}

/// Pick gamma as `L0 / U0` and double it (at most `max_doublings` times)
/// while the trained model still leaves more than the tolerated exposure gap.
pub fn select_gamma(train: &Dataset, base: &TrainConfig, search: &GammaSearch) -> Result<GammaSelection> {
    let baseline = crate::listwise::train(train, AttributeUse::GroundTruth, base)?;
    let (rows, _, _) = design(train, AttributeUse::GroundTruth);
    let groups: Vec<Group> = train.candidates().iter().map(|c| c.true_group).collect();
    let scores = linear_scores(&baseline.weights, &rows);
    let l0 = *baseline.loss_trace.last().expect("trace has the initial loss");
    let u0 = disparate_exposure(&scores, &groups)?;
    if u0 < 1e-12 {
        return Ok(GammaSelection {
            baseline_loss: l0,
            baseline_exposure: u0,
            heuristic_gamma: 0.0,
            steps: Vec::new(),
            gamma: 0.0,
        });
    }
    let heuristic = l0 / u0;
    let mut gamma = heuristic;
    let mut steps = Vec::new();
    for doubling in 0..=search.max_doublings {
        let model = train_fair(train, &FairTrainingConfig { gamma, base: *base })?;
        let exposure = disparate_exposure(&linear_scores(&model.weights, &rows), &groups)?;
        steps.push(GammaStep {
            gamma,
            exposure,
            final_loss: *model.loss_trace.last().unwrap(),
            loss_tail_change: tail_change(&model.loss_trace),
        });
        if exposure <= search.exposure_tolerance * u0 || doubling == search.max_doublings {
            break;
        }
        gamma *= 2.0;
    }
    Ok(GammaSelection {
        baseline_loss: l0,
        baseline_exposure: u0,
        heuristic_gamma: heuristic,
        steps,
        gamma,
    })
}

/// Select gamma with [`select_gamma`] and return the model trained with it.
pub fn train_fair_auto(train: &Dataset, base: &TrainConfig, search: &GammaSearch) -> Result<LinearRanker> {
    let selection = select_gamma(train, base, search)?;
    let mut model = train_fair(
        train,
        &FairTrainingConfig {
            gamma: selection.gamma,
            base: *base,
        },
    )?;
    if let Some(info) = model.fairness.as_mut() {
        info.selection = Some(selection);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::listwise::listnet_loss;

    const D: Group = Group::Disadvantaged;
    const A: Group = Group::Advantaged;

    #[test]
    fn equal_scores_have_no_disparity() {
        assert_eq!(disparate_exposure(&[0.3; 4], &[D, A, D, A]).unwrap(), 0.0);
    }

    #[test]
    fn over_exposed_disadvantaged_is_not_penalized() {
        let u = disparate_exposure(&[3.0, 2.0, 1.0, 0.0], &[D, D, A, A]).unwrap();
        assert_eq!(u, 0.0);
        let reversed = disparate_exposure(&[3.0, 2.0, 1.0, 0.0], &[A, A, D, D]).unwrap();
        assert!(reversed > 0.0);
    }

    #[test]
    fn four_candidate_hand_computation() {
        let scores = [1.0, 0.0, 2.0, -1.0];
        let groups = [D, A, A, D];
        let z: f64 = scores.iter().map(|s: &f64| s.exp()).sum();
        let p: Vec<f64> = scores.iter().map(|s| s.exp() / z).collect();
        let m_adv = (p[1] + p[2]) / 2.0;
        let m_dis = (p[0] + p[3]) / 2.0;
        let expected = (m_adv - m_dis).max(0.0).powi(2);
        let got = disparate_exposure(&scores, &groups).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!(got > 0.0);
    }

    #[test]
    fn missing_group_is_an_error() {
        assert!(matches!(
            disparate_exposure(&[1.0, 2.0], &[A, A]),
            Err(Error::GroupAbsent(Group::Disadvantaged))
        ));
    }

    fn instance() -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<Group>) {
        let w = vec![0.4, -0.7];
        let x = vec![
            vec![1.0, 0.0],
            vec![0.5, 1.0],
            vec![-0.3, 0.2],
            vec![0.9, -1.1],
            vec![0.0, 0.0],
        ];
        let y = vec![1.0, 0.2, 0.4, 0.9, 0.1];
        let g = vec![A, D, A, D, A];
        (w, x, y, g)
    }

    #[test]
    fn gamma_zero_reduces_to_listnet_bitwise() {
        let (w, x, y, g) = instance();
        let l = deltr_loss(&w, &x, &y, &g, 0.0).unwrap();
        let base = listnet_loss(&linear_scores(&w, &x), &y).unwrap();
        assert_eq!(l.to_bits(), base.to_bits());
        let grad = deltr_gradient(&w, &x, &y, &g, 0.0).unwrap();
        let base = crate::listwise::listnet_gradient(&w, &x, &y).unwrap();
        assert_eq!(grad, base);
    }

    #[test]
    fn penalty_never_lowers_the_loss() {
        let (w, x, y, g) = instance();
        let base = listnet_loss(&linear_scores(&w, &x), &y).unwrap();
        for gamma in [0.5, 2.0, 100.0] {
            assert!(deltr_loss(&w, &x, &y, &g, gamma).unwrap() >= base);
        }
    }

    #[test]
    fn dead_penalty_gives_listnet_gradient() {
        let (w, x, y, _) = instance();
        let scores = linear_scores(&w, &x);
        // Put the two highest-scored rows in the disadvantaged group.
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut g = vec![A; scores.len()];
        g[idx[0]] = D;
        g[idx[1]] = D;
        assert!(exposure_difference(&scores, &g).unwrap() < 0.0);
        let grad = deltr_gradient(&w, &x, &y, &g, 50.0).unwrap();
        let base = crate::listwise::listnet_gradient(&w, &x, &y).unwrap();
        assert_eq!(grad, base);
    }

    #[test]
    fn negative_gamma_rejected() {
        let (w, x, y, g) = instance();
        assert!(deltr_loss(&w, &x, &y, &g, -1.0).is_err());
        assert!(deltr_loss(&w, &x, &y, &g, f64::NAN).is_err());
    }

    #[test]
    fn tail_change_of_flat_trace_is_zero() {
        assert_eq!(tail_change(&[3.0, 2.0, 2.0, 2.0]), 0.0);
        assert!(tail_change(&[3.0, 2.0, 1.0]) > 0.0);
    }
}
