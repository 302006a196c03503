//! Fair learning-to-rank toolkit.
//!
//! The crate covers the whole path from a labelled candidate table to fairness
//! and utility numbers for seven ranking strategies under controlled
//! demographic-inference errors:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`domain`] | groups, candidates, datasets, deterministic ranking |
//! | [`ingest`] | CSV loading, seeded 80/20 split, normalization, disadvantaged-group detection |
//! | [`listwise`] | ListNet top-one loss, gradient, linear ranker training and scoring |
//! | [`fairltr`] | disparate-exposure penalty (DELTR-style) training and gamma selection |
//! | [`detconstsort`] | prefix-floor constrained re-ranking |
//! | [`noise`] | cumulative label-flip scenarios and inference fixtures |
//! | [`metrics`] | Skew, NDKL, DAdv/Adv exposure ratio, NDCG |
//! | [`pipeline`] | the seven strategies |
//! | [`harness`] | experiment runner, synthetic data, CSV/JSON/SVG output |
//!
//! All randomness flows through [`rng::SplitMix64`], whose algorithm is fixed
//! so that splits and scenarios can be reproduced outside Rust.

pub mod detconstsort;
pub mod domain;
pub mod error;
pub mod fairltr;
pub mod harness;
pub mod ingest;
pub mod listwise;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod rng;

pub use domain::{Candidate, Dataset, Group, GroupProportions, Ranking};
pub use error::{Error, Result};
