//! Synthetic biased candidate pools.
//!
//! With `b = bias_strength`, each candidate gets
//!
//! ```text
//! x1 ~ N(0.4·b·[dis], 1)
//! x2, x3 ~ N(0, 1)
//! judgment = x1 + 0.6·x2 + 0.3·x3 − b·[dis] + N(0, 0.5²)
//! ```
//!
//! Group membership is a shuffled block of exactly `round(adv_fraction·n)`
//! advantaged candidates. The dis-group shift of `x1` offsets part of the
//! judgment penalty. A model without the attribute only sees the shift and
//! slightly over-exposes the disadvantaged group. A model with the attribute
//! learns a weight close to the full penalty. Under bidirectional flips its
//! group gap moves as `0.4·b − b·(1 − 2ε)`, which changes sign near ε = 0.3
//! when the learned weights match the generating ones.
//!
//! The judgment gap between group means is `0.6·b`; with the residual spread
//! of about 1.3, detection of the disadvantaged group is reliable from
//! `b ≈ 0.5` upward at a few hundred candidates.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Candidate, Dataset, Group};
use crate::error::{Error, Result};
use crate::ingest::DatasetSchema;
use crate::rng::{derive_seed, SplitMix64};

pub const FEATURES: [&str; 3] = ["x1", "x2", "x3"];
const FEATURE_SHIFT: f64 = 0.4;
const WEIGHTS: [f64; 3] = [1.0, 0.6, 0.3];
const NOISE_SD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n: usize,
    pub adv_fraction: f64,
    pub bias_strength: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!("n must be at least 10, got {}", self.n)));
        }
        if !(self.adv_fraction > 0.0 && self.adv_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "adv_fraction must lie in (0, 1), got {}",
                self.adv_fraction
            )));
        }
        let n_adv = self.advantaged_count();
        if n_adv == 0 || n_adv == self.n {
            return Err(Error::InvalidArgument(format!(
                "adv_fraction {} leaves a group empty at n = {}",
                self.adv_fraction, self.n
            )));
        }
        if !self.bias_strength.is_finite() {
            return Err(Error::InvalidArgument("bias_strength must be finite".into()));
        }
        Ok(())
    }

    pub fn advantaged_count(&self) -> usize {
        (self.adv_fraction * self.n as f64 + 0.5).floor() as usize
    }
}

pub fn generate_synthetic(params: &SynthParams) -> Result<Dataset> {
    params.validate()?;
    let n = params.n;
    let n_adv = params.advantaged_count();
    let mut groups: Vec<Group> = (0..n)
        .map(|i| if i < n_adv { Group::Advantaged } else { Group::Disadvantaged })
        .collect();
    SplitMix64::new(derive_seed(&[params.seed, 0])).shuffle(&mut groups);

    let mut rng = SplitMix64::new(derive_seed(&[params.seed, 1]));
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let b = params.bias_strength;
    let candidates = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let dis = if g == Group::Disadvantaged { 1.0 } else { 0.0 };
            let x = [
                std.sample(&mut rng) + FEATURE_SHIFT * b * dis,
                std.sample(&mut rng),
                std.sample(&mut rng),
            ];
            let signal: f64 = x.iter().zip(WEIGHTS).map(|(a, w)| a * w).sum();
            let judgment = signal - b * dis + NOISE_SD * std.sample(&mut rng);
            Candidate::new(i as u64, x.to_vec(), judgment, g).with_name(format!("cand-{i}"))
        })
        .collect();
    Dataset::new(candidates, FEATURES.iter().map(|s| s.to_string()).collect())
}

/// Schema matching the CSV written by [`write_synthetic_csv`].
pub fn synthetic_schema() -> DatasetSchema {
    DatasetSchema {
        id_column: "id".into(),
        judgment_column: "judgment".into(),
        group_column: "group".into(),
        disadvantaged_value: "dis".into(),
        feature_columns: FEATURES.iter().map(|s| s.to_string()).collect(),
        name_column: Some("name".into()),
        higher_is_better: true,
    }
}

pub fn write_synthetic_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "name".into()];
    header.extend(dataset.feature_names().iter().cloned());
    header.extend(["judgment".into(), "group".into()]);
    w.write_record(&header)?;
    for c in dataset.candidates() {
        let mut rec = vec![c.id.to_string(), c.name.clone().unwrap_or_default()];
        rec.extend(c.features.iter().map(|x| x.to_string()));
        rec.push(c.judgment.to_string());
        rec.push(c.true_group.short().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Write `<stem>.csv` and a matching `<stem>.schema.toml` next to it.
pub fn save_synthetic(dataset: &Dataset, csv_path: &Path) -> Result<std::path::PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    write_synthetic_csv(dataset, std::io::BufWriter::new(file))?;
    let schema_path = csv_path.with_extension("schema.toml");
    let text = toml::to_string(&synthetic_schema()).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&schema_path, text).map_err(|e| Error::io(&schema_path, e))?;
    Ok(schema_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{detect_disadvantaged_group, read_dataset};

    fn params(n: usize, adv: f64, b: f64, seed: u64) -> SynthParams {
        SynthParams {
            n,
            adv_fraction: adv,
            bias_strength: b,
            seed,
        }
    }

    #[test]
    fn exact_group_sizes() {
        let d = generate_synthetic(&params(992, 0.78, 1.0, 5)).unwrap();
        assert_eq!(d.count(Group::Advantaged), 774);
        assert_eq!(d.count(Group::Disadvantaged), 218);
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&params(50, 0.5, 1.0, 9)).unwrap();
        let b = generate_synthetic(&params(50, 0.5, 1.0, 9)).unwrap();
        assert_eq!(a.candidates(), b.candidates());
        let c = generate_synthetic(&params(50, 0.5, 1.0, 10)).unwrap();
        assert_ne!(a.candidates(), c.candidates());
    }

    #[test]
    fn degenerate_parameters() {
        assert!(generate_synthetic(&params(9, 0.5, 1.0, 0)).is_err());
        assert!(generate_synthetic(&params(100, 0.0, 1.0, 0)).is_err());
        assert!(generate_synthetic(&params(100, 1.0, 1.0, 0)).is_err());
        assert!(generate_synthetic(&params(10, 0.99, 1.0, 0)).is_err());
        assert!(generate_synthetic(&params(100, 0.5, f64::NAN, 0)).is_err());
    }

    #[test]
    fn detection_recovers_the_penalized_group() {
        for seed in 0..5 {
            let d = generate_synthetic(&params(500, 0.78, 1.0, seed)).unwrap();
            assert_eq!(detect_disadvantaged_group(&d).unwrap(), Group::Disadvantaged);
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_synthetic(&params(30, 0.6, 1.0, 2)).unwrap();
        let mut buf = Vec::new();
        write_synthetic_csv(&d, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), &synthetic_schema()).unwrap();
        assert_eq!(back.candidates(), d.candidates());
    }
}
