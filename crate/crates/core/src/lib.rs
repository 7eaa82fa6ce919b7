//! Benchmark harness for long-tailed classifiers under label distribution shift.
//!
//! A model is evaluated on a family of test sets whose class distribution has a
//! moving peak. Each test set is resampled from a fixed pool of labeled
//! predictions, and the resulting accuracy-versus-shift curve is summarized by
//! its mean, spread, drop ratio and normalized area under the curve.
//!
//! Class indices are 1-based throughout the public API and the file formats.

pub mod distribution;
pub mod error;
pub mod metrics;
pub mod pool;
pub mod protocol;
pub mod report;
pub mod sampler;

pub use distribution::{
    allocate_counts, alpha_schedule, divergence, make_test_distribution, make_train_distribution,
    total_test_size, AlphaSchedule, ClassCounts, ClassDistribution, DivergenceConvention,
    ShiftProfile,
};
pub use error::{Error, Result};
pub use metrics::{
    accuracy, aggregate, balanced_accuracy, expected_accuracy, group_accuracy, legacy_triplet,
    AggregateMetrics, Group, GroupAccuracy, GroupSpec, LegacyTriplet,
};
pub use pool::{
    generate_synthetic_pool, ingest, per_class_accuracy, DatasetManifest, PredictionPool,
    PredictionRecord,
};
pub use protocol::{
    compare, run, run_named, run_with_threads, EvaluationReport, Leaderboard, LeaderboardRow,
    Metric, ProtocolConfig, ResolvedConfig, SamplingMode, SynthesisRow,
};
pub use report::{curve, read_report, write_report, CurvePoint};
pub use sampler::{derive_stream, draw, DrawMode, TestDraw, PRNG_ID};
