//! Loading candidate tables, the seeded train/test split, feature
//! normalization and disadvantaged-group detection.
//!
//! Schemas are written as TOML key-value files:
//!
//! ```toml
//! id_column = "id"
//! judgment_column = "career_points"
//! group_column = "sex"
//! disadvantaged_value = "F"
//! feature_columns = ["seasons", "per"]
//! name_column = "name"          # optional, used to join inference fixtures
//! higher_is_better = true       # optional; false negates the judgment (e.g. race times)
//! ```

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{rank_by_score, Candidate, Dataset, Group};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub id_column: String,
    pub judgment_column: String,
    pub group_column: String,
    pub disadvantaged_value: String,
    pub feature_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_column: Option<String>,
    #[serde(default = "default_true")]
    pub higher_is_better: bool,
}

fn default_true() -> bool {
    true
}

impl DatasetSchema {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: DatasetSchema =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Config("feature_columns must not be empty".into()));
        }
        let mut seen = HashSet::new();
        let mut all = vec![&self.id_column, &self.judgment_column, &self.group_column];
        all.extend(self.feature_columns.iter());
        all.extend(self.name_column.iter());
        for col in all {
            if !seen.insert(col.as_str()) {
                return Err(Error::Config(format!("column `{col}` is listed twice")));
            }
        }
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

/// Parse a comma-separated table with a header row.
///
/// Every row becomes one candidate; rows whose group value equals
/// `disadvantaged_value` are disadvantaged, all other values must agree on a
/// single second label.
pub fn read_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);

    let mut wanted = vec![&schema.id_column, &schema.judgment_column, &schema.group_column];
    wanted.extend(schema.feature_columns.iter());
    wanted.extend(schema.name_column.iter());
    let missing: Vec<String> = wanted
        .iter()
        .filter(|c| column(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let id_col = column(&schema.id_column).unwrap();
    let judgment_col = column(&schema.judgment_column).unwrap();
    let group_col = column(&schema.group_column).unwrap();
    let name_col = schema.name_column.as_deref().and_then(column);
    let feature_cols: Vec<usize> = schema
        .feature_columns
        .iter()
        .map(|c| column(c).unwrap())
        .collect();

    let mut candidates = Vec::new();
    let mut other_value: Option<String> = None;
    for (row, record) in rdr.records().enumerate() {
        // Header is line 1.
        let line = row + 2;
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize, what: &str| -> Result<f64> {
            let raw = cell(i);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("{what} `{raw}` is not a finite number"),
                })
        };

        let id = cell(id_col).parse::<u64>().map_err(|_| Error::Parse {
            line,
            message: format!("id `{}` is not a non-negative integer", cell(id_col)),
        })?;
        let mut judgment = number(judgment_col, &schema.judgment_column)?;
        if !schema.higher_is_better {
            judgment = -judgment;
        }
        let features = feature_cols
            .iter()
            .zip(&schema.feature_columns)
            .map(|(&i, name)| number(i, name))
            .collect::<Result<Vec<_>>>()?;

        let raw_group = cell(group_col);
        let group = if raw_group == schema.disadvantaged_value {
            Group::Disadvantaged
        } else {
            match &other_value {
                None => other_value = Some(raw_group.to_string()),
                Some(v) if v == raw_group => {}
                Some(v) => {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "group column has a third value `{raw_group}` (already saw `{}` and `{v}`)",
                            schema.disadvantaged_value
                        ),
                    })
                }
            }
            Group::Advantaged
        };

        let mut candidate = Candidate::new(id, features, judgment, group);
        if let Some(i) = name_col {
            candidate.name = Some(cell(i).to_string());
        }
        candidates.push(candidate);
    }

    Dataset::new(candidates, schema.feature_columns.clone())
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Seeded uniform shuffle followed by a cut at `round(fraction * n)`.
///
/// Both halves keep the original row order. A half that would lose a whole
/// group is rejected.
pub fn split_train_test(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = dataset.len();
    let n_train = round_half_up(fraction * n as f64);
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut idx);
    let (train_idx, test_idx) = idx.split_at(n_train);

    let take = |part: &[usize], side: &'static str| -> Result<Dataset> {
        let mut part = part.to_vec();
        part.sort_unstable();
        let cands: Vec<Candidate> = part
            .iter()
            .map(|&i| dataset.candidates()[i].clone())
            .collect();
        for g in Group::ALL {
            if !cands.iter().any(|c| c.true_group == g) {
                return Err(Error::EmptySplitGroup { seed, group: g, side });
            }
        }
        Dataset::new(cands, dataset.feature_names().to_vec())
    };
    Ok((take(train_idx, "training")?, take(test_idx, "test")?))
}

/// Feature z-scoring and judgment min-max statistics, fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    /// Names of all input features, in input order.
    pub input_features: Vec<String>,
    /// Indices (into `input_features`) of features kept after dropping constants.
    pub retained: Vec<usize>,
    pub dropped: Vec<String>,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub judgment_min: f64,
    pub judgment_max: f64,
}

impl NormalizationStats {
    pub fn retained_names(&self) -> Vec<String> {
        self.retained
            .iter()
            .map(|&i| self.input_features[i].clone())
            .collect()
    }

    pub fn transform_features(&self, raw: &[f64]) -> Vec<f64> {
        self.retained
            .iter()
            .enumerate()
            .map(|(j, &i)| (raw[i] - self.means[j]) / self.std_devs[j])
            .collect()
    }

    /// Inverse of [`transform_features`](Self::transform_features) on the retained columns.
    pub fn inverse_features(&self, normalized: &[f64]) -> Vec<f64> {
        normalized
            .iter()
            .enumerate()
            .map(|(j, &z)| z * self.std_devs[j] + self.means[j])
            .collect()
    }

    pub fn scale_judgment(&self, judgment: f64) -> f64 {
        (judgment - self.judgment_min) / (self.judgment_max - self.judgment_min)
    }
}

pub fn fit_normalization(train: &Dataset) -> Result<NormalizationStats> {
    let n = train.len();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    let dim = train.feature_names().len();
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    let mut means = Vec::new();
    let mut std_devs = Vec::new();
    for j in 0..dim {
        let column = train.candidates().iter().map(|c| c.features[j]);
        let mean = column.clone().sum::<f64>() / n as f64;
        let var = column.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            retained.push(j);
            means.push(mean);
            std_devs.push(sd);
        } else {
            dropped.push(train.feature_names()[j].clone());
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in train.candidates() {
        lo = lo.min(c.judgment);
        hi = hi.max(c.judgment);
    }
    if hi <= lo {
        return Err(Error::DegenerateJudgments(lo));
    }
    Ok(NormalizationStats {
        input_features: train.feature_names().to_vec(),
        retained,
        dropped,
        means,
        std_devs,
        judgment_min: lo,
        judgment_max: hi,
    })
}

/// Apply training statistics to any split.
pub fn apply_normalization(dataset: &Dataset, stats: &NormalizationStats) -> Result<Dataset> {
    if dataset.feature_names() != stats.input_features.as_slice() {
        return Err(Error::Dimension(
            "dataset features differ from the normalization statistics".into(),
        ));
    }
    let cands = dataset
        .candidates()
        .iter()
        .map(|c| Candidate {
            features: stats.transform_features(&c.features),
            judgment: stats.scale_judgment(c.judgment),
            ..c.clone()
        })
        .collect();
    Dataset::new(cands, stats.retained_names())
}

/// Mean top-half skew of each group when candidates are ordered by judgment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewProfile {
    pub depth: usize,
    pub mean_skew_disadvantaged: f64,
    pub mean_skew_advantaged: f64,
}

pub fn skew_profile(dataset: &Dataset) -> Result<SkewProfile> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let items: Vec<(u64, f64)> = dataset
        .candidates()
        .iter()
        .map(|c| (c.id, c.judgment))
        .collect();
    let ranking = rank_by_score(&items)?;
    let population = dataset.group_proportions();
    let depth = n.div_ceil(2);
    let mut counts = [0usize; 2];
    let mut sums = [0.0f64; 2];
    for (k, id) in ranking.order().iter().take(depth).enumerate() {
        let g = dataset.get(*id).expect("ranked id from dataset").true_group;
        counts[g.index()] += 1;
        let k = (k + 1) as f64;
        for h in Group::ALL {
            sums[h.index()] += counts[h.index()] as f64 / k / population.get(h);
        }
    }
    Ok(SkewProfile {
        depth,
        mean_skew_disadvantaged: sums[0] / depth as f64,
        mean_skew_advantaged: sums[1] / depth as f64,
    })
}

/// The group with the lower mean skew over the top half of the
/// judgment-ordered list. An exact tie is an error.
pub fn detect_disadvantaged_group(dataset: &Dataset) -> Result<Group> {
    let p = skew_profile(dataset)?;
    if p.mean_skew_disadvantaged < p.mean_skew_advantaged {
        Ok(Group::Disadvantaged)
    } else if p.mean_skew_advantaged < p.mean_skew_disadvantaged {
        Ok(Group::Advantaged)
    } else {
        Err(Error::DetectionTie {
            mean_skew: p.mean_skew_disadvantaged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            id_column: "id".into(),
            judgment_column: "score".into(),
            group_column: "sex".into(),
            disadvantaged_value: "F".into(),
            feature_columns: vec!["a".into(), "b".into()],
            name_column: Some("name".into()),
            higher_is_better: true,
        }
    }

    #[test]
    fn two_rows_one_per_group() {
        let csv = "id,name,sex,a,b,score\n1,Ann,F,1,2,3\n2,Bob,M,4,5,6\n";
        let d = read_dataset(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.group_proportions().disadvantaged, 0.5);
        let ann = d.get(1).unwrap();
        assert_eq!(ann.true_group, Group::Disadvantaged);
        assert_eq!(ann.observed_group, Some(Group::Disadvantaged));
        assert_eq!(ann.name.as_deref(), Some("Ann"));
        assert_eq!(ann.features, vec![1.0, 2.0]);
    }

    #[test]
    fn missing_columns_are_listed() {
        let csv = "id,sex,a,score\n1,F,1,3\n";
        match read_dataset(csv.as_bytes(), &schema()) {
            Err(Error::MissingColumns(cols)) => assert_eq!(cols, vec!["b", "name"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let csv = "id,name,sex,a,b,score\n1,Ann,F,1,2,3\n2,Bob,M,x,5,6\n";
        match read_dataset(csv.as_bytes(), &schema()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('a'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn third_group_value_is_rejected() {
        let csv = "id,name,sex,a,b,score\n1,A,F,1,2,3\n2,B,M,4,5,6\n3,C,X,4,5,6\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema()),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn single_group_is_rejected() {
        let csv = "id,name,sex,a,b,score\n1,A,M,1,2,3\n2,B,M,4,5,6\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), &schema()),
            Err(Error::GroupAbsent(Group::Disadvantaged))
        ));
    }

    #[test]
    fn lower_is_better_negates() {
        let mut s = schema();
        s.higher_is_better = false;
        let csv = "id,name,sex,a,b,score\n1,A,F,1,2,3\n2,B,M,4,5,6\n";
        let d = read_dataset(csv.as_bytes(), &s).unwrap();
        assert_eq!(d.get(1).unwrap().judgment, -3.0);
    }

    #[test]
    fn schema_from_toml() {
        let s = DatasetSchema::from_toml(
            r#"
            id_column = "id"
            judgment_column = "score"
            group_column = "sex"
            disadvantaged_value = "F"
            feature_columns = ["a", "b"]
            "#,
        )
        .unwrap();
        assert!(s.higher_is_better);
        assert_eq!(s.name_column, None);
        let dup = DatasetSchema::from_toml(
            r#"
            id_column = "id"
            judgment_column = "a"
            group_column = "sex"
            disadvantaged_value = "F"
            feature_columns = ["a"]
            "#,
        );
        assert!(dup.is_err());
    }

    fn dataset(n: u64) -> Dataset {
        let cands = (0..n)
            .map(|i| {
                let g = if i % 3 == 0 { Group::Disadvantaged } else { Group::Advantaged };
                Candidate::new(i, vec![i as f64, 7.0, (i * i) as f64], i as f64, g)
            })
            .collect();
        Dataset::new(cands, vec!["lin".into(), "const".into(), "sq".into()]).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = dataset(10);
        let (a, b) = split_train_test(&d, 0.8, 42).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = split_train_test(&d, 0.8, 42).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn law_sized_split_rounds_half_up() {
        assert_eq!(round_half_up(0.8 * 6108.0), 4886);
        assert_eq!(round_half_up(2.5), 3);
    }

    #[test]
    fn split_rejects_bad_fraction_and_empty_group() {
        let d = dataset(10);
        assert!(split_train_test(&d, 1.0, 1).is_err());
        assert!(split_train_test(&d, 0.0, 1).is_err());
        let tiny = Dataset::new(
            vec![
                Candidate::new(1, vec![0.0], 0.0, Group::Disadvantaged),
                Candidate::new(2, vec![0.0], 1.0, Group::Advantaged),
                Candidate::new(3, vec![0.0], 1.0, Group::Advantaged),
            ],
            vec!["x".into()],
        )
        .unwrap();
        assert!(matches!(
            split_train_test(&tiny, 0.5, 0),
            Err(Error::EmptySplitGroup { .. })
        ));
    }

    #[test]
    fn constant_feature_dropped() {
        let d = dataset(12);
        let stats = fit_normalization(&d).unwrap();
        assert_eq!(stats.dropped, vec!["const".to_string()]);
        assert_eq!(stats.retained, vec![0, 2]);
        let n = apply_normalization(&d, &stats).unwrap();
        assert_eq!(n.feature_names(), &["lin".to_string(), "sq".to_string()]);
    }

    #[test]
    fn judgments_min_max_scaled() {
        let cands = [10.0, 20.0, 30.0]
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                let g = if i == 0 { Group::Disadvantaged } else { Group::Advantaged };
                Candidate::new(i as u64, vec![i as f64], j, g)
            })
            .collect();
        let d = Dataset::new(cands, vec!["x".into()]).unwrap();
        let stats = fit_normalization(&d).unwrap();
        let n = apply_normalization(&d, &stats).unwrap();
        let js: Vec<f64> = n.candidates().iter().map(|c| c.judgment).collect();
        assert_eq!(js, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn degenerate_judgments() {
        let cands = (0..4)
            .map(|i| {
                let g = if i < 2 { Group::Disadvantaged } else { Group::Advantaged };
                Candidate::new(i, vec![i as f64], 5.0, g)
            })
            .collect();
        let d = Dataset::new(cands, vec!["x".into()]).unwrap();
        assert!(matches!(fit_normalization(&d), Err(Error::DegenerateJudgments(_))));
    }

    #[test]
    fn detection_by_construction() {
        // Advantaged candidates fill the top half.
        let cands = (0..20)
            .map(|i| {
                let g = if i >= 10 { Group::Advantaged } else { Group::Disadvantaged };
                Candidate::new(i, vec![0.0], i as f64, g)
            })
            .collect();
        let d = Dataset::new(cands, vec!["x".into()]).unwrap();
        assert_eq!(detect_disadvantaged_group(&d).unwrap(), Group::Disadvantaged);
        assert_eq!(
            detect_disadvantaged_group(&d.with_groups_swapped()).unwrap(),
            Group::Advantaged
        );
    }

    #[test]
    fn detection_tie_is_an_error() {
        // Depth 2: dis skews 4/3, 2/3 and adv skews 0, 2; both means equal 1.
        let groups = [
            Group::Disadvantaged,
            Group::Advantaged,
            Group::Disadvantaged,
            Group::Disadvantaged,
        ];
        let cands = groups
            .iter()
            .enumerate()
            .map(|(i, &g)| Candidate::new(i as u64, vec![0.0], 10.0 - i as f64, g))
            .collect();
        let d = Dataset::new(cands, vec!["x".into()]).unwrap();
        assert!(matches!(
            detect_disadvantaged_group(&d),
            Err(Error::DetectionTie { .. })
        ));
    }

    #[test]
    fn detection_ignores_monotone_transforms() {
        let cands: Vec<Candidate> = (0..30)
            .map(|i| {
                let g = if i % 4 == 0 || i < 8 { Group::Disadvantaged } else { Group::Advantaged };
                Candidate::new(i, vec![0.0], i as f64 * 0.3 - 2.0, g)
            })
            .collect();
        let d = Dataset::new(cands.clone(), vec!["x".into()]).unwrap();
        let t = Dataset::new(
            cands
                .into_iter()
                .map(|c| Candidate { judgment: c.judgment.exp() * 5.0 + 1.0, ..c })
                .collect(),
            vec!["x".into()],
        )
        .unwrap();
        assert_eq!(skew_profile(&d).unwrap(), skew_profile(&t).unwrap());
    }
}
