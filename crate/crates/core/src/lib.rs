//! Differentially private rank-based and t hypothesis tests.
//!
//! Five tests are provided: Kruskal-Wallis, an absolute-value variant of
//! Kruskal-Wallis, Mann-Whitney, Wilcoxon signed-rank (Pratt variant) and the
//! one-sample t-test. Each releases a single noisy statistic and compares it
//! against a Monte-Carlo reference distribution built from public parameters.
//!
//! ```
//! use dprank::inference::{run_test, TestConfig, TestData, TestKind};
//! use dprank::privacy::PrivacyBudget;
//! use dprank::rankstats::PairedSample;
//! use dprank::RandomStream;
//!
//! let rows = (0..40).map(|i| (0.0, f64::from(i) - 10.0)).collect();
//! let data = TestData::Paired(PairedSample::new(rows).unwrap());
//! let config = TestConfig::new(TestKind::Wilcoxon, PrivacyBudget::pure(1.0).unwrap(), 10_000);
//! let outcome = run_test(&data, &config, &RandomStream::new(7, 0)).unwrap();
//! assert!((0.0..=1.0).contains(&outcome.p_value));
//! ```

pub mod error;
pub mod harness;
pub mod inference;
pub mod ingest;
pub mod privacy;
pub mod random;
pub mod rankstats;

pub use error::{Error, Result};
pub use random::{FixedUniform, NoiseSource, RandomStream};
