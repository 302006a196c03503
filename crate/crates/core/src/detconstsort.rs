//! DetConstSort: deterministic re-ranking under per-group prefix floors.
//!
//! For every prefix length `k ≤ k_max` and every group `g` the output holds at
//! least `⌊p_g · k⌋` members of `g`. The algorithm walks `k = 1, 2, …`; when a
//! group's floor rises it appends that group's best pending candidate (several
//! owed groups are served in order of their pending candidate's score), then
//! swaps the new entry upward past lower-scored entries as long as every
//! displaced entry stays within the deepest position its own floor allows.
//!
//! The core works on dense group indices so it serves any number of groups;
//! [`det_const_sort`] is the binary-group wrapper used by the strategies.

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Group, GroupProportions, Ranking};
use crate::error::{Error, Result};

/// Target share of each group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetProportions(GroupProportions);

impl TargetProportions {
    pub fn new(disadvantaged: f64, advantaged: f64) -> Result<Self> {
        let p = GroupProportions {
            disadvantaged,
            advantaged,
        };
        validate_proportions(&[disadvantaged, advantaged])?;
        Ok(Self(p))
    }

    pub fn get(&self, g: Group) -> f64 {
        self.0.get(g)
    }

    pub fn mirrored(&self) -> Self {
        Self(self.0.mirrored())
    }

    pub fn as_proportions(&self) -> GroupProportions {
        self.0
    }
}

fn validate_proportions(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Infeasible(format!("proportions {p:?} must lie in [0, 1]")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Infeasible(format!("proportions sum to {total}, not 1")));
    }
    Ok(())
}

/// Observed-label proportions of the test set.
pub fn target_from_observed(test: &Dataset) -> Result<TargetProportions> {
    let p = crate::domain::group_proportions(test.candidates(), true)?;
    Ok(TargetProportions(p))
}

#[inline]
fn floor_count(p: f64, k: usize) -> usize {
    (p * k as f64).floor() as usize
}

/// Re-rank items given in input order.
///
/// `scores[i]` and `groups[i]` describe input item `i`; `groups` holds dense
/// indices into `proportions`. Returns input indices in output order, of
/// length `k_max`.
pub fn det_const_sort_indices(
    scores: &[f64],
    groups: &[usize],
    proportions: &[f64],
    k_max: usize,
) -> Result<Vec<usize>> {
    let n = scores.len();
    if groups.len() != n {
        return Err(Error::Dimension(format!("{n} scores but {} group labels", groups.len())));
    }
    if k_max > n {
        return Err(Error::InvalidArgument(format!("k_max {k_max} exceeds list length {n}")));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score of input item {i} is not finite")));
    }
    validate_proportions(proportions)?;
    let n_groups = proportions.len();

    // Per-group queues, best score first, input order breaking ties.
    let mut queues: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, &g) in groups.iter().enumerate() {
        if g >= n_groups {
            return Err(Error::InvalidArgument(format!(
                "input item {i} has group {g}, but only {n_groups} proportions were given"
            )));
        }
        queues[g].push(i);
    }
    for q in &mut queues {
        q.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    }
    for (g, q) in queues.iter().enumerate() {
        let needed = floor_count(proportions[g], k_max);
        if needed > q.len() {
            return Err(Error::Infeasible(format!(
                "group {g} needs {needed} of the top {k_max} but has only {} members",
                q.len()
            )));
        }
        if proportions[g] == 0.0 && !q.is_empty() && k_max > n - q.len() {
            return Err(Error::Infeasible(format!(
                "group {g} has members but a target proportion of 0"
            )));
        }
    }

    let mut next = vec![0usize; n_groups];
    let mut floors = vec![0usize; n_groups];
    // Output slots: input index and the deepest 1-based position it may take.
    let mut ranked: Vec<usize> = Vec::with_capacity(k_max);
    let mut max_pos: Vec<usize> = Vec::with_capacity(k_max);

    let mut k = 0usize;
    while ranked.len() < k_max {
        k += 1;
        let mut owed: Vec<usize> = (0..n_groups)
            .filter(|&g| floor_count(proportions[g], k) > floors[g] && next[g] < queues[g].len())
            .collect();
        let total_floor: usize = (0..n_groups).map(|g| floor_count(proportions[g], k)).sum();
        if total_floor > k {
            return Err(Error::Infeasible(format!(
                "floors at k = {k} add up to {total_floor}"
            )));
        }
        for g in 0..n_groups {
            floors[g] = floor_count(proportions[g], k);
        }
        owed.sort_by(|&a, &b| {
            let ia = queues[a][next[a]];
            let ib = queues[b][next[b]];
            scores[ib].total_cmp(&scores[ia]).then(ia.cmp(&ib))
        });
        for g in owed {
            if ranked.len() == k_max {
                break;
            }
            let item = queues[g][next[g]];
            next[g] += 1;
            ranked.push(item);
            max_pos.push(k);
            // Swap upward: the entry above moves down one place, which is
            // allowed only while it stays within its own deepest position.
            let mut at = ranked.len() - 1;
            while at > 0 && max_pos[at - 1] > at && scores[ranked[at - 1]] < scores[ranked[at]] {
                ranked.swap(at - 1, at);
                max_pos.swap(at - 1, at);
                at -= 1;
            }
        }
        if ranked.len() < k_max
            && (0..n_groups).all(|g| next[g] == queues[g].len() || proportions[g] == 0.0)
        {
            return Err(Error::Infeasible(
                "floors never reach the remaining candidates".into(),
            ));
        }
    }
    Ok(ranked)
}

/// Binary-group DetConstSort over a ranking.
///
/// `labels[i]` is the (observed) group of `input.order()[i]`. The output
/// keeps each candidate's original score.
pub fn det_const_sort(
    input: &Ranking,
    labels: &[Group],
    target: &TargetProportions,
    k_max: usize,
) -> Result<Ranking> {
    let groups: Vec<usize> = labels.iter().map(|g| g.index()).collect();
    let p = [target.get(Group::Disadvantaged), target.get(Group::Advantaged)];
    let idx = det_const_sort_indices(input.scores(), &groups, &p, k_max)?;
    let order = idx.iter().map(|&i| input.order()[i]).collect();
    let scores = idx.iter().map(|&i| input.scores()[i]).collect();
    Ranking::from_parts(order, scores)
}

/// Observed labels of a ranking's candidates, in rank order.
pub fn observed_labels(ranking: &Ranking, dataset: &Dataset) -> Result<Vec<Group>> {
    ranking
        .resolve(dataset)?
        .into_iter()
        .map(|c| c.observed())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::rank_by_score;

    const D: Group = Group::Disadvantaged;
    const A: Group = Group::Advantaged;

    fn prefix_ok(out: &[usize], groups: &[usize], p: &[f64]) -> bool {
        let mut counts = vec![0usize; p.len()];
        for (k, &i) in out.iter().enumerate() {
            counts[groups[i]] += 1;
            for g in 0..p.len() {
                if counts[g] < (p[g] * (k + 1) as f64).floor() as usize {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn four_candidates_half_half() {
        // Scores 9, 8, 7, 6 with groups A, A, B, B.
        let scores = [9.0, 8.0, 7.0, 6.0];
        let groups = [0, 0, 1, 1];
        let out = det_const_sort_indices(&scores, &groups, &[0.5, 0.5], 4).unwrap();
        assert_eq!(out, vec![0, 2, 1, 3]);
        assert!(prefix_ok(&out, &groups, &[0.5, 0.5]));
        assert_eq!(out[..2].iter().filter(|&&i| groups[i] == 1).count(), 1);
    }

    #[test]
    fn already_feasible_input_is_a_fixed_point() {
        let scores = [9.0, 8.0, 7.0, 6.0, 5.0, 4.0];
        let groups = [0, 1, 1, 0, 0, 1];
        let out = det_const_sort_indices(&scores, &groups, &[0.5, 0.5], 6).unwrap();
        assert_eq!(out, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn swap_up_restores_score_order() {
        // A9, B8, A7, A6 with p = (0.75, 0.25): B8 is inserted at k = 4 and
        // swaps above A7.
        let scores = [9.0, 8.0, 7.0, 6.0];
        let groups = [0, 1, 0, 0];
        let out = det_const_sort_indices(&scores, &groups, &[0.75, 0.25], 4).unwrap();
        assert_eq!(out, vec![0, 1, 2, 3]);
    }

    #[test]
    fn truncated_output() {
        let scores = [9.0, 8.0, 7.0, 6.0];
        let groups = [0, 0, 1, 1];
        let out = det_const_sort_indices(&scores, &groups, &[0.5, 0.5], 2).unwrap();
        assert_eq!(out, vec![0, 2]);
    }

    #[test]
    fn infeasible_targets_are_rejected() {
        let scores = [4.0, 3.0, 2.0, 1.0];
        let groups = [0, 0, 0, 1];
        assert!(matches!(
            det_const_sort_indices(&scores, &groups, &[0.5, 0.5], 4),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            det_const_sort_indices(&scores, &groups, &[0.6, 0.6], 4),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            det_const_sort_indices(&scores, &groups, &[1.0, 0.0], 4),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn label_swap_gives_identical_ranking() {
        let items: Vec<(u64, f64)> = (0..12).map(|i| (i, ((i * 7) % 12) as f64)).collect();
        let r = rank_by_score(&items).unwrap();
        let labels: Vec<Group> = r
            .order()
            .iter()
            .map(|id| if id % 3 == 0 { D } else { A })
            .collect();
        let dis = labels.iter().filter(|&&g| g == D).count();
        let p = TargetProportions::new(dis as f64 / 12.0, (12 - dis) as f64 / 12.0).unwrap();
        let out = det_const_sort(&r, &labels, &p, 12).unwrap();
        let swapped: Vec<Group> = labels.iter().map(|g| g.flipped()).collect();
        let out2 = det_const_sort(&r, &swapped, &p.mirrored(), 12).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn unknown_labels_are_rejected_when_collecting() {
        let r = rank_by_score(&[(1, 1.0), (2, 0.5)]).unwrap();
        let mut a = crate::domain::Candidate::new(1, vec![0.0], 0.0, D);
        a.observed_group = None;
        let b = crate::domain::Candidate::new(2, vec![0.0], 0.0, A);
        let d = Dataset::new(vec![a, b], vec!["x".into()]).unwrap();
        assert!(matches!(
            observed_labels(&r, &d),
            Err(Error::UnresolvedUnknown { id: 1 })
        ));
    }
}
