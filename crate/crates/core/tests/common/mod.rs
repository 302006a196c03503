//! Independent oracles and random instance builders shared by the
//! integration tests. Nothing here calls into the metric or re-ranking code
//! it is used to check.
#![allow(dead_code)]

use fairrank::rng::SplitMix64;
use fairrank::{Candidate, Dataset, Group};

pub const D: Group = Group::Disadvantaged;
pub const A: Group = Group::Advantaged;

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

pub fn range(rng: &mut SplitMix64, lo: usize, hi_inclusive: usize) -> usize {
    lo + rng.below((hi_inclusive - lo + 1) as u64) as usize
}

/// Random binary group list containing both groups.
pub fn random_groups(rng: &mut SplitMix64, n: usize) -> Vec<Group> {
    assert!(n >= 2);
    loop {
        let p = uniform(rng, 0.1, 0.9);
        let g: Vec<Group> = (0..n).map(|_| if rng.next_f64() < p { D } else { A }).collect();
        if g.contains(&D) && g.contains(&A) {
            return g;
        }
    }
}

// ---- metric oracles, written as plain loops over positions ----

fn log2_discount(pos: usize) -> f64 {
    1.0 / ((pos as f64) + 1.0).ln() * std::f64::consts::LN_2
}

pub fn population(groups: &[Group]) -> [f64; 2] {
    let n = groups.len() as f64;
    let dis = groups.iter().filter(|g| **g == D).count() as f64;
    [dis / n, (n - dis) / n]
}

pub fn oracle_skew(groups: &[Group], group: Group, k: usize) -> f64 {
    let pop = population(groups);
    let p = if group == D { pop[0] } else { pop[1] };
    let mut hits = 0.0;
    for g in &groups[..k] {
        if *g == group {
            hits += 1.0;
        }
    }
    (hits / k as f64) / p
}

fn oracle_kl(prefix: &[Group], q: [f64; 2]) -> f64 {
    let mut out = 0.0;
    for (idx, group) in [D, A].iter().enumerate() {
        let p = prefix.iter().filter(|g| *g == group).count() as f64 / prefix.len() as f64;
        if p > 0.0 {
            out += p * (p.ln() - q[idx].ln()) / std::f64::consts::LN_2;
        }
    }
    out
}

/// Prefix reading: the KL term at index i compares the top-i prefix.
pub fn oracle_ndkl(groups: &[Group], k: usize) -> f64 {
    let q = population(groups);
    let z: f64 = (1..=k).map(log2_discount).sum();
    let mut s = 0.0;
    for i in 1..=k {
        s += log2_discount(i) * oracle_kl(&groups[..i], q);
    }
    s / z
}

pub fn oracle_ndkl_literal(groups: &[Group], k: usize) -> f64 {
    oracle_kl(&groups[..k], population(groups))
}

pub fn oracle_exposure_ratio(groups: &[Group]) -> f64 {
    let (mut sd, mut nd, mut sa, mut na) = (0.0, 0.0, 0.0, 0.0);
    for (i, g) in groups.iter().enumerate() {
        let e = log2_discount(i + 1);
        if *g == D {
            sd += e;
            nd += 1.0;
        } else {
            sa += e;
            na += 1.0;
        }
    }
    (sd / nd) / (sa / na)
}

pub fn oracle_ndcg(judgments: &[f64], k: usize) -> f64 {
    let min = judgments.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let mut dcg = 0.0;
    for (i, j) in judgments[..k].iter().enumerate() {
        dcg += (j + shift) * log2_discount(i + 1);
    }
    // Ideal: repeatedly take the largest remaining gain.
    let mut left: Vec<f64> = judgments.iter().map(|j| j + shift).collect();
    let mut idcg = 0.0;
    for i in 0..k {
        let (best, _) = left
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if *v > acc.1 { (j, *v) } else { acc });
        idcg += left.remove(best) * log2_discount(i + 1);
    }
    dcg / idcg
}

// ---- re-ranking oracle ----

/// Every violated `(k, group)` prefix floor of an output order.
pub fn floor_violations(output: &[usize], groups: &[usize], p: &[f64]) -> Vec<(usize, usize)> {
    let mut bad = Vec::new();
    for k in 1..=output.len() {
        for (g, pg) in p.iter().enumerate() {
            let have = output[..k].iter().filter(|&&i| groups[i] == g).count();
            if have < (pg * k as f64).floor() as usize {
                bad.push((k, g));
            }
        }
    }
    bad
}

/// Random multi-group re-ranking instance that is feasible by construction:
/// every group holds at least `floor(p_g·n)` members.
#[derive(Debug)]
pub struct RerankCase {
    pub scores: Vec<f64>,
    pub groups: Vec<usize>,
    pub p: Vec<f64>,
    pub k_max: usize,
}

pub fn random_rerank_case(rng: &mut SplitMix64, max_n: usize) -> RerankCase {
    let n_groups = range(rng, 2, 4);
    let n = range(rng, n_groups, max_n);
    let raw: Vec<f64> = (0..n_groups).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let mut counts: Vec<usize> = p.iter().map(|pg| (pg * n as f64).floor() as usize).collect();
    while counts.iter().sum::<usize>() < n {
        counts[rng.below(n_groups as u64) as usize] += 1;
    }
    let mut groups: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(g, c)| std::iter::repeat_n(g, *c))
        .collect();
    rng.shuffle(&mut groups);
    // Coarse scores so that ties are common.
    let scores: Vec<f64> = (0..n).map(|_| (uniform(rng, -3.0, 3.0) * 4.0).round() / 4.0).collect();
    let k_max = if rng.next_f64() < 0.5 { n } else { range(rng, 1, n) };
    RerankCase {
        scores,
        groups,
        p,
        k_max,
    }
}

// ---- gradient checking ----

pub const FD_STEP: f64 = 1e-6;

pub fn central_difference(f: impl Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            (f(&up) - f(&down)) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - b|_2 / max(|a|_2, |b|_2, 1e-3)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-3)
}

#[derive(Debug)]
pub struct GradCase {
    pub weights: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub judgments: Vec<f64>,
    pub groups: Vec<Group>,
    pub gamma: f64,
}

pub fn random_grad_case(rng: &mut SplitMix64) -> GradCase {
    let n = range(rng, 2, 20);
    let d = range(rng, 1, 8);
    GradCase {
        weights: (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect(),
        features: (0..n)
            .map(|_| (0..d).map(|_| uniform(rng, -2.0, 2.0)).collect())
            .collect(),
        judgments: (0..n).map(|_| uniform(rng, -2.0, 2.0)).collect(),
        groups: random_groups(rng, n),
        gamma: uniform(rng, 0.0, 20.0),
    }
}

// ---- datasets ----

/// Small dataset with two features and a judgment that depends on the group.
pub fn toy_dataset(rng: &mut SplitMix64, n: usize) -> Dataset {
    let groups = random_groups(rng, n);
    let cands = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let x = vec![uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)];
            let j = x[0] + 0.5 * x[1] - if g == D { 0.7 } else { 0.0 };
            Candidate::new(i as u64 + 1, x, j, g)
        })
        .collect();
    Dataset::new(cands, vec!["a".into(), "b".into()]).unwrap()
}
