//! Controlled demographic-inference errors and offline inference fixtures.
//!
//! A scenario flips the observed label of `round(ε·|g|)` members of each
//! targeted group. Members are visited in an order fixed by one seeded shuffle
//! per (scenario seed, group), so the flipped set at a higher ε always
//! contains the flipped set at a lower ε.
//!
//! Fixture files hold one inference result per line:
//!
//! ```text
//! id,name,service,inferred_label
//! 17,Maya Moore,gender_api,dis
//! ,Lebron James,namsor,unknown
//! ```
//!
//! `inferred_label` is one of `dis`, `adv`, `unknown`. Records join to test
//! candidates on `id` when it is given, otherwise on the exact name.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Group};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Replicates per interior error level.
pub const REPLICATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Both groups lose a fraction ε of their labels to the other group.
    Bidirectional,
    /// Only disadvantaged candidates are mislabeled as advantaged.
    DisToAdv,
    /// Only advantaged candidates are mislabeled as disadvantaged.
    AdvToDis,
}

impl Direction {
    pub const ALL: [Direction; 3] = [
        Direction::Bidirectional,
        Direction::DisToAdv,
        Direction::AdvToDis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Bidirectional => "bidirectional",
            Direction::DisToAdv => "dis_to_adv",
            Direction::AdvToDis => "adv_to_dis",
        }
    }

    /// Stable numeric code used in seed derivation.
    pub fn code(self) -> u64 {
        match self {
            Direction::Bidirectional => 1,
            Direction::DisToAdv => 2,
            Direction::AdvToDis => 3,
        }
    }

    /// Groups whose members may be flipped.
    pub fn sources(self) -> &'static [Group] {
        match self {
            Direction::Bidirectional => &[Group::Disadvantaged, Group::Advantaged],
            Direction::DisToAdv => &[Group::Disadvantaged],
            Direction::AdvToDis => &[Group::Advantaged],
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown direction `{s}` (expected bidirectional, dis_to_adv or adv_to_dis)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScenario {
    pub direction: Direction,
    pub epsilon: f64,
    pub replicate: usize,
    pub seed: u64,
}

impl NoiseScenario {
    pub fn new(direction: Direction, epsilon: f64, seed: u64) -> Self {
        Self {
            direction,
            epsilon,
            replicate: 0,
            seed,
        }
    }
}

/// Error levels 0.0, 0.1, ..., 1.0.
pub fn epsilon_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Seed of replicate `replicate` for `direction` under an experiment seed.
pub fn scenario_seed(experiment_seed: u64, direction: Direction, replicate: usize) -> u64 {
    derive_seed(&[experiment_seed, direction.code(), replicate as u64])
}

/// The 47 scenarios of one direction: ε = 0 and ε = 1 once, every interior
/// level once per replicate seed. Replicate `r` uses the same seed at every
/// ε, so its flip sets are nested.
pub fn scenario_grid(direction: Direction, experiment_seed: u64) -> Vec<NoiseScenario> {
    let mut out = Vec::with_capacity(2 + 9 * REPLICATES);
    for epsilon in epsilon_grid() {
        let replicates = if epsilon == 0.0 || epsilon == 1.0 { 1 } else { REPLICATES };
        for replicate in 0..replicates {
            out.push(NoiseScenario {
                direction,
                epsilon,
                replicate,
                seed: scenario_seed(experiment_seed, direction, replicate),
            });
        }
    }
    out
}

/// `round(ε·size)`, halves rounding up. A 1e-9 slack absorbs the binary
/// representation of decimal ε (0.7 · 5 evaluates just below 3.5).
pub fn flip_count(epsilon: f64, size: usize) -> usize {
    ((epsilon * size as f64 + 0.5 + 1e-9).floor() as usize).min(size)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} is outside [0, 1]")));
    }
    Ok(())
}

/// Ids whose observed label a scenario flips.
pub fn flip_set(test: &Dataset, scenario: &NoiseScenario) -> Result<HashSet<u64>> {
    check_epsilon(scenario.epsilon)?;
    let mut flipped = HashSet::new();
    for &g in scenario.direction.sources() {
        let mut members: Vec<u64> = test
            .candidates()
            .iter()
            .filter(|c| c.true_group == g)
            .map(|c| c.id)
            .collect();
        members.sort_unstable();
        SplitMix64::new(derive_seed(&[scenario.seed, g.index() as u64])).shuffle(&mut members);
        let count = flip_count(scenario.epsilon, members.len());
        flipped.extend(&members[..count]);
    }
    Ok(flipped)
}

/// Copy of `test` whose observed labels follow the scenario. Observed labels
/// on the input are ignored: every candidate starts from its true label.
pub fn perturb(test: &Dataset, scenario: &NoiseScenario) -> Result<Dataset> {
    let flipped = flip_set(test, scenario)?;
    Ok(test.with_observed(|c| {
        Some(if flipped.contains(&c.id) {
            c.true_group.flipped()
        } else {
            c.true_group
        })
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferredLabel {
    Dis,
    Adv,
    Unknown,
}

impl FromStr for InferredLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dis" => Ok(InferredLabel::Dis),
            "adv" => Ok(InferredLabel::Adv),
            "unknown" => Ok(InferredLabel::Unknown),
            other => Err(Error::Fixture(format!(
                "inferred_label `{other}` is not one of dis, adv, unknown"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub id: Option<u64>,
    pub name: Option<String>,
    pub label: InferredLabel,
}

/// One inference service's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceFixture {
    pub service: String,
    pub records: Vec<FixtureRecord>,
}

#[derive(Debug, Deserialize)]
struct FixtureRow {
    id: Option<String>,
    name: Option<String>,
    service: String,
    inferred_label: String,
}

/// Parse a fixture file; services are returned in name order.
pub fn read_fixtures<R: Read>(reader: R) -> Result<Vec<InferenceFixture>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_service: BTreeMap<String, Vec<FixtureRecord>> = BTreeMap::new();
    for (row, rec) in rdr.deserialize::<FixtureRow>().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Fixture(format!("line {line}: {e}")))?;
        let id = match rec.id.as_deref().filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<u64>().map_err(|_| {
                Error::Fixture(format!("line {line}: id `{s}` is not an integer"))
            })?),
            None => None,
        };
        let name = rec.name.filter(|s| !s.is_empty());
        if id.is_none() && name.is_none() {
            return Err(Error::Fixture(format!("line {line}: record has neither id nor name")));
        }
        let label = rec
            .inferred_label
            .parse()
            .map_err(|e: Error| Error::Fixture(format!("line {line}: {e}")))?;
        by_service
            .entry(rec.service)
            .or_default()
            .push(FixtureRecord { id, name, label });
    }
    Ok(by_service
        .into_iter()
        .map(|(service, records)| InferenceFixture { service, records })
        .collect())
}

pub fn load_fixtures(path: impl AsRef<Path>) -> Result<Vec<InferenceFixture>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_fixtures(file)
}

/// Bookkeeping of one fixture applied to a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub service: String,
    pub test_size: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub unknown_disadvantaged: usize,
    pub unknown_advantaged: usize,
    /// Unknowns assigned to the resolution label.
    pub unknown_assigned: usize,
    /// Wrong labels after resolution, divided by the test size.
    pub effective_error_rate: f64,
}

impl FixtureReport {
    pub fn resolved(&self) -> usize {
        self.correct + self.incorrect
    }

    pub fn unknown(&self) -> usize {
        self.unknown_disadvantaged + self.unknown_advantaged
    }
}

/// Set observed labels from a fixture; unknowns become `unknown_label`
/// (the disadvantaged group in the standard protocol).
pub fn apply_fixture(
    test: &Dataset,
    fixture: &InferenceFixture,
    unknown_label: Group,
) -> Result<(Dataset, FixtureReport)> {
    let mut by_id: HashMap<u64, InferredLabel> = HashMap::new();
    let mut by_name: HashMap<&str, InferredLabel> = HashMap::new();
    for r in &fixture.records {
        match (r.id, r.name.as_deref()) {
            (Some(id), _) => {
                if by_id.insert(id, r.label).is_some() {
                    return Err(Error::Fixture(format!(
                        "service `{}` lists id {id} twice",
                        fixture.service
                    )));
                }
            }
            (None, Some(name)) => {
                if by_name.insert(name, r.label).is_some() {
                    return Err(Error::Fixture(format!(
                        "service `{}` lists name `{name}` twice",
                        fixture.service
                    )));
                }
            }
            (None, None) => unreachable!("records carry an id or a name"),
        }
    }

    let mut labels = HashMap::with_capacity(test.len());
    let mut missing = Vec::new();
    for c in test.candidates() {
        let found = by_id
            .get(&c.id)
            .or_else(|| c.name.as_deref().and_then(|n| by_name.get(n)));
        match found {
            Some(&l) => {
                labels.insert(c.id, l);
            }
            None => missing.push(c.id),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(20).map(|id| id.to_string()).collect();
        return Err(Error::Fixture(format!(
            "service `{}` has no result for {} test candidate(s): {}{}",
            fixture.service,
            missing.len(),
            shown.join(", "),
            if missing.len() > 20 { ", ..." } else { "" }
        )));
    }

    let mut report = FixtureReport {
        service: fixture.service.clone(),
        test_size: test.len(),
        correct: 0,
        incorrect: 0,
        unknown_disadvantaged: 0,
        unknown_advantaged: 0,
        unknown_assigned: 0,
        effective_error_rate: 0.0,
    };
    let mut wrong = 0usize;
    let resolved = test.with_observed(|c| {
        let observed = match labels[&c.id] {
            InferredLabel::Dis | InferredLabel::Adv => {
                let g = if labels[&c.id] == InferredLabel::Dis {
                    Group::Disadvantaged
                } else {
                    Group::Advantaged
                };
                if g == c.true_group {
                    report.correct += 1;
                } else {
                    report.incorrect += 1;
                }
                g
            }
            InferredLabel::Unknown => {
                match c.true_group {
                    Group::Disadvantaged => report.unknown_disadvantaged += 1,
                    Group::Advantaged => report.unknown_advantaged += 1,
                }
                report.unknown_assigned += 1;
                unknown_label
            }
        };
        if observed != c.true_group {
            wrong += 1;
        }
        Some(observed)
    });
    report.effective_error_rate = wrong as f64 / test.len() as f64;
    Ok((resolved, report))
}
