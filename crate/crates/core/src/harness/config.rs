//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "synthetic-demo"      # dataset label used in every output row
//! seed = 7                     # experiment seed: noise scenarios
//! output_dir = "out"
//! disadvantaged = "detect"     # or "as_labeled"
//!
//! [dataset]
//! kind = "synthetic"           # or "csv" with `path` and `schema`
//! n = 2000
//! adv_fraction = 0.78
//! bias_strength = 1.5
//! seed = 1
//!
//! [split]
//! fraction = 0.8
//! seed = 42
//!
//! [training]                   # ListNet for the Oblivious and LTR models
//! learning_rate = 0.05
//! epochs = 500
//!
//! [fair]
//! gamma = "auto"               # or a non-negative number
//! learning_rate = 0.05
//! epochs = 1000
//! exposure_tolerance = 0.05
//! max_doublings = 3
//!
//! [noise]
//! directions = ["bidirectional", "dis_to_adv", "adv_to_dis"]
//!
//! [metrics]
//! cutoffs = [10, 50, 100]
//! ndkl_mode = "prefix"         # or "literal"
//! ndcg_norm = "ideal"          # or "discount_sum"
//!
//! [fixtures]                   # optional
//! path = "fixtures.csv"
//! ```
//!
//! Only `name` and `[dataset]` are required. Every other key falls back to
//! the value shown, except `seed` (0) and `fixtures` (none).
//!
//! For `kind = "csv"`, `schema` is either a path to a schema TOML file or an
//! inline table with the same keys as [`DatasetSchema`]. Relative paths are
//! resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairltr::GammaSearch;
use crate::ingest::DatasetSchema;
use crate::listwise::TrainConfig;
use crate::metrics::MetricOptions;
use crate::noise::Direction;

use super::synth::SynthParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub disadvantaged: GroupAssignment,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub fair: FairConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<FixtureConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Which group the experiment treats as disadvantaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAssignment {
    /// Group with the lower mean top-half skew; labels are swapped when it is
    /// not the one the schema names.
    #[default]
    Detect,
    /// Keep the schema's labeling.
    AsLabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv { path: PathBuf, schema: SchemaSource },
    Synthetic(SynthParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    File(PathBuf),
    Inline(DatasetSchema),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fraction: 0.8,
            seed: 42,
        }
    }
}

/// Gamma for the fair model: a fixed value or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr", into = "GammaRepr")]
pub enum GammaSetting {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Number(f64),
    Word(String),
}

impl TryFrom<GammaRepr> for GammaSetting {
    type Error = String;

    fn try_from(r: GammaRepr) -> std::result::Result<Self, String> {
        match r {
            GammaRepr::Number(g) if g.is_finite() && g >= 0.0 => Ok(GammaSetting::Fixed(g)),
            GammaRepr::Number(g) => Err(format!("gamma must be finite and non-negative, got {g}")),
            GammaRepr::Word(w) if w == "auto" => Ok(GammaSetting::Auto),
            GammaRepr::Word(w) => Err(format!("gamma must be a number or \"auto\", got \"{w}\"")),
        }
    }
}

impl From<GammaSetting> for GammaRepr {
    fn from(g: GammaSetting) -> Self {
        match g {
            GammaSetting::Auto => GammaRepr::Word("auto".into()),
            GammaSetting::Fixed(v) => GammaRepr::Number(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairConfig {
    pub gamma: GammaSetting,
    pub learning_rate: f64,
    pub epochs: usize,
    pub exposure_tolerance: f64,
    pub max_doublings: usize,
}

impl Default for FairConfig {
    fn default() -> Self {
        let search = GammaSearch::default();
        Self {
            gamma: GammaSetting::Auto,
            learning_rate: 0.05,
            epochs: 1000,
            exposure_tolerance: search.exposure_tolerance,
            max_doublings: search.max_doublings,
        }
    }
}

impl FairConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed,
        }
    }

    pub fn search(&self) -> GammaSearch {
        GammaSearch {
            exposure_tolerance: self.exposure_tolerance,
            max_doublings: self.max_doublings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub directions: Vec<Direction>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            directions: Direction::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub cutoffs: Vec<usize>,
    pub ndkl_mode: crate::metrics::NdklMode,
    pub ndcg_norm: crate::metrics::NdcgNorm,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![10, 50, 100],
            ndkl_mode: Default::default(),
            ndcg_norm: Default::default(),
        }
    }
}

impl MetricsConfig {
    pub fn options(&self) -> MetricOptions {
        MetricOptions {
            ndkl_mode: self.ndkl_mode,
            ndcg_norm: self.ndcg_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    pub path: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file; relative paths inside it become relative to its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::Csv { path, schema } = &mut self.dataset {
            join(path);
            if let SchemaSource::File(p) = schema {
                join(p);
            }
        }
        if let Some(f) = &mut self.fixtures {
            join(&mut f.path);
        }
        join(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.trim().is_empty() {
            return bad("`name` must not be empty".into());
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return bad(format!("split.fraction must lie in (0, 1), got {}", self.split.fraction));
        }
        self.training.validate()?;
        self.fair.train_config(0).validate()?;
        if self.fair.exposure_tolerance.is_nan() || self.fair.exposure_tolerance < 0.0 {
            return bad("fair.exposure_tolerance must be non-negative".into());
        }
        if self.noise.directions.is_empty() {
            return bad("noise.directions must name at least one direction".into());
        }
        if self.metrics.cutoffs.is_empty() || self.metrics.cutoffs.contains(&0) {
            return bad("metrics.cutoffs must be non-empty and positive".into());
        }
        if let DatasetSource::Synthetic(p) = &self.dataset {
            p.validate()?;
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Option<DatasetSchema>> {
        match &self.dataset {
            DatasetSource::Synthetic(_) => Ok(None),
            DatasetSource::Csv { schema, .. } => match schema {
                SchemaSource::Inline(s) => Ok(Some(s.clone())),
                SchemaSource::File(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    Ok(Some(DatasetSchema::from_toml(&text)?))
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "toy"
[dataset]
kind = "synthetic"
n = 100
adv_fraction = 0.7
bias_strength = 1.0
seed = 3
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.noise.directions.len(), 3);
        assert_eq!(c.metrics.cutoffs, vec![10, 50, 100]);
        assert_eq!(c.fair.gamma, GammaSetting::Auto);
        assert_eq!(c.split.fraction, 0.8);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn gamma_accepts_number_or_auto() {
        let fixed = format!("{MINIMAL}\n[fair]\ngamma = 2.5\nlearning_rate = 0.1\nepochs = 10\nexposure_tolerance = 0.05\nmax_doublings = 3\n");
        let c = ExperimentConfig::from_toml(&fixed).unwrap();
        assert_eq!(c.fair.gamma, GammaSetting::Fixed(2.5));
        let bad = fixed.replace("gamma = 2.5", "gamma = \"big\"");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let neg = fixed.replace("gamma = 2.5", "gamma = -1.0");
        assert!(ExperimentConfig::from_toml(&neg).is_err());
    }

    #[test]
    fn csv_source_with_inline_schema() {
        let text = r#"
name = "csv"
[dataset]
kind = "csv"
path = "data.csv"
[dataset.schema]
id_column = "id"
judgment_column = "score"
group_column = "sex"
disadvantaged_value = "F"
feature_columns = ["a", "b"]
"#;
        let mut c = ExperimentConfig::from_toml(text).unwrap();
        c.rebase(Path::new("/tmp/x"));
        match &c.dataset {
            DatasetSource::Csv { path, schema } => {
                assert_eq!(path, Path::new("/tmp/x/data.csv"));
                assert!(matches!(schema, SchemaSource::Inline(_)));
            }
            _ => panic!("expected csv source"),
        }
        assert!(c.schema().unwrap().is_some());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\n[split]\nfraction = 0.8\nseed = 1\nextra = 2\n")).is_err());
    }
}
