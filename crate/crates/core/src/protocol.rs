//! End-to-end evaluation: peak schedule, target counts, shift values, seeded
//! draws and the aggregated report. Also ranks several reports against each
//! other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{
    allocate_counts, alpha_schedule, divergence, make_test_distribution, normalize_ratio,
    total_test_size, ClassDistribution, DivergenceConvention, ShiftProfile,
};
use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, aggregate, balanced_accuracy, expected_accuracy, group_accuracy, legacy_triplet,
    AggregateMetrics, GroupAccuracy, GroupSpec, LegacyTriplet,
};
use crate::pool::{per_class_accuracy, PredictionPool};
use crate::sampler::{check_feasible, derive_stream, draw, DrawMode, PRNG_ID};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    #[default]
    Bootstrap,
    Exhaustive,
    /// Noise-free: the expectation of the sampled accuracy, computed once.
    Expected,
}

impl SamplingMode {
    pub fn draw_mode(self) -> Option<DrawMode> {
        match self {
            Self::Bootstrap => Some(DrawMode::Bootstrap),
            Self::Exhaustive => Some(DrawMode::Exhaustive),
            Self::Expected => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bootstrap => "bootstrap",
            Self::Exhaustive => "exhaustive",
            Self::Expected => "expected",
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Self::Bootstrap),
            "exhaustive" => Ok(Self::Exhaustive),
            "expected" => Ok(Self::Expected),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampling mode {other:?}"
            ))),
        }
    }
}

/// Protocol parameters. `num_synthesizations = None` means one peak per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub rho_tst: f64,
    pub n_max_tst: usize,
    pub num_synthesizations: Option<usize>,
    pub repeats: usize,
    pub master_seed: u64,
    pub sampling_mode: SamplingMode,
    pub divergence: DivergenceConvention,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rho_tst: 100.0,
            n_max_tst: 1000,
            num_synthesizations: None,
            repeats: DEFAULT_REPEATS,
            master_seed: 0,
            sampling_mode: SamplingMode::Bootstrap,
            divergence: DivergenceConvention::Jeffreys,
        }
    }
}

/// The configuration as actually executed, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub num_classes: usize,
    pub rho_tst: f64,
    pub n_max_tst: usize,
    pub num_synthesizations: usize,
    pub repeats: usize,
    pub master_seed: u64,
    pub sampling_mode: SamplingMode,
    pub divergence: DivergenceConvention,
    pub total_test_size: usize,
}

impl ProtocolConfig {
    pub fn resolve(&self, num_classes: usize) -> Result<ResolvedConfig> {
        let rho_tst = normalize_ratio(self.rho_tst)?;
        let num_synthesizations = self.num_synthesizations.unwrap_or(num_classes);
        if num_synthesizations == 0 {
            return Err(Error::InvalidParameter(
                "number of synthesizations must be at least 1".into(),
            ));
        }
        if num_synthesizations > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many synthesizations".into()));
        }
        let repeats = match self.sampling_mode {
            SamplingMode::Expected => 1,
            _ if self.repeats == 0 || self.repeats > u32::MAX as usize => {
                return Err(Error::InvalidParameter(format!(
                    "repeats must be in [1, 2^32), got {}",
                    self.repeats
                )))
            }
            _ => self.repeats,
        };
        Ok(ResolvedConfig {
            num_classes,
            rho_tst,
            n_max_tst: self.n_max_tst,
            num_synthesizations,
            repeats,
            master_seed: self.master_seed,
            sampling_mode: self.sampling_mode,
            divergence: self.divergence,
            total_test_size: total_test_size(num_classes, rho_tst, self.n_max_tst)?,
        })
    }
}

/// Results of one synthesized test distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRow {
    pub t: usize,
    pub alpha: f64,
    pub delta: f64,
    pub target_counts: Vec<usize>,
    /// One entry per repeat; a single entry in expected mode.
    pub repeat_accuracies: Vec<f64>,
    /// Mean of `repeat_accuracies`.
    pub accuracy: f64,
    /// Population standard deviation of `repeat_accuracies`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub prng: String,
    pub method: String,
    pub dataset: String,
    pub config: ResolvedConfig,
    pub auc_tie_break: String,
    pub train_distribution: ClassDistribution,
    pub per_class_accuracy: Vec<f64>,
    pub rows: Vec<SynthesisRow>,
    pub aggregate: AggregateMetrics,
    pub balanced_accuracy: f64,
    pub group_accuracy: GroupAccuracy,
    pub legacy: LegacyTriplet,
}

impl EvaluationReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.accuracy).collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }
}

fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Synthesis {
    alpha: f64,
    delta: f64,
    dist: ClassDistribution,
    counts: crate::distribution::ClassCounts,
}

/// Runs the protocol on the current rayon pool.
pub fn run(pool: &PredictionPool, config: &ProtocolConfig) -> Result<EvaluationReport> {
    run_named(pool, config, "")
}

/// Runs the protocol on a dedicated pool of `threads` workers. The report does
/// not depend on the thread count.
pub fn run_with_threads(
    pool: &PredictionPool,
    config: &ProtocolConfig,
    threads: usize,
) -> Result<EvaluationReport> {
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    workers.install(|| run(pool, config))
}

/// Like [`run`], labeling the report with a method name.
pub fn run_named(
    pool: &PredictionPool,
    config: &ProtocolConfig,
    method: &str,
) -> Result<EvaluationReport> {
    let c = pool.num_classes();
    let cfg = config.resolve(c)?;
    let train = pool.manifest().train_distribution();
    let schedule = alpha_schedule(c, cfg.num_synthesizations)?;

    let syntheses = schedule
        .peaks()
        .iter()
        .map(|&alpha| {
            let dist = make_test_distribution(&ShiftProfile::new(c, cfg.rho_tst, alpha)?);
            let delta = divergence(&train, &dist, cfg.divergence)?;
            let counts = allocate_counts(&dist, cfg.total_test_size);
            Ok(Synthesis {
                alpha,
                delta,
                dist,
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let class_acc = per_class_accuracy(pool);
    let per_row: Vec<Vec<f64>> = match cfg.sampling_mode.draw_mode() {
        None => syntheses
            .iter()
            .map(|s| expected_accuracy(&class_acc, &s.dist).map(|a| vec![a]))
            .collect::<Result<_>>()?,
        Some(mode) => {
            if mode == DrawMode::Exhaustive {
                for (i, s) in syntheses.iter().enumerate() {
                    check_feasible(pool, &s.counts, Some(i + 1))?;
                }
            }
            let r_count = cfg.repeats;
            let cells: Vec<Result<f64>> = (0..syntheses.len() * r_count)
                .into_par_iter()
                .map(|cell| {
                    let (ti, ri) = (cell / r_count, cell % r_count);
                    let seed = derive_stream(cfg.master_seed, ti as u32 + 1, ri as u32 + 1);
                    let indices = draw(pool, &syntheses[ti].counts, seed, mode)?;
                    accuracy(pool, &indices)
                })
                .collect();
            let cells = cells.into_iter().collect::<Result<Vec<f64>>>()?;
            cells.chunks(r_count).map(<[f64]>::to_vec).collect()
        }
    };

    let rows: Vec<SynthesisRow> = syntheses
        .into_iter()
        .zip(per_row)
        .enumerate()
        .map(|(i, (s, repeat_accuracies))| {
            let (accuracy, spread) = mean_and_spread(&repeat_accuracies);
            SynthesisRow {
                t: i + 1,
                alpha: s.alpha,
                delta: s.delta,
                target_counts: s.counts.counts().to_vec(),
                repeat_accuracies,
                accuracy,
                spread,
            }
        })
        .collect();

    let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let manifest = pool.manifest();

    Ok(EvaluationReport {
        format_version: FORMAT_VERSION,
        prng: PRNG_ID.to_string(),
        method: method.to_string(),
        dataset: manifest.name.clone(),
        auc_tie_break: "ascending-t".to_string(),
        train_distribution: train,
        per_class_accuracy: class_acc,
        aggregate: aggregate(&accs, &deltas)?,
        balanced_accuracy: balanced_accuracy(pool),
        group_accuracy: group_accuracy(pool, &GroupSpec::thirds(&manifest.train_counts))?,
        legacy: legacy_triplet(pool, cfg.rho_tst)?,
        rows,
        config: cfg,
    })
}

/// Leaderboard columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Auc,
    Avg,
    Std,
    Max,
    Min,
    Dr,
    Btd,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Auc,
        Metric::Avg,
        Metric::Std,
        Metric::Max,
        Metric::Min,
        Metric::Dr,
        Metric::Btd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Auc => "AUC",
            Metric::Avg => "AVG",
            Metric::Std => "STD",
            Metric::Max => "MAX",
            Metric::Min => "MIN",
            Metric::Dr => "DR",
            Metric::Btd => "BTD",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Std | Metric::Dr)
    }

    pub fn value(self, report: &EvaluationReport) -> f64 {
        let a = &report.aggregate;
        match self {
            Metric::Auc => a.auc,
            Metric::Avg => a.avg,
            Metric::Std => a.std,
            Metric::Max => a.max_acc,
            Metric::Min => a.min_acc,
            Metric::Dr => a.drop_ratio,
            Metric::Btd => report.balanced_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub method: String,
    /// Indexed like [`Metric::ALL`].
    pub values: Vec<f64>,
    /// Competition ranks (1 = best); equal values share the better rank.
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub metrics: Vec<Metric>,
    pub rows: Vec<LeaderboardRow>,
}

fn shape_mismatches(a: &EvaluationReport, b: &EvaluationReport) -> Vec<&'static str> {
    let (x, y) = (&a.config, &b.config);
    let mut out = Vec::new();
    let checks = [
        ("num_classes", x.num_classes == y.num_classes),
        ("rho_tst", x.rho_tst == y.rho_tst),
        ("n_max_tst", x.n_max_tst == y.n_max_tst),
        (
            "num_synthesizations",
            x.num_synthesizations == y.num_synthesizations,
        ),
        ("repeats", x.repeats == y.repeats),
        ("sampling_mode", x.sampling_mode == y.sampling_mode),
        ("divergence", x.divergence == y.divergence),
        ("dataset", a.dataset == b.dataset),
    ];
    for (name, ok) in checks {
        if !ok {
            out.push(name);
        }
    }
    out
}

/// Ranks reports per metric column.
pub fn compare(reports: &[EvaluationReport]) -> Result<Leaderboard> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidParameter("no reports to compare".into()));
    };
    let mut fields: Vec<String> = Vec::new();
    for (i, other) in reports.iter().enumerate().skip(1) {
        for f in shape_mismatches(first, other) {
            fields.push(format!("{f} (report 1 vs report {})", i + 1));
        }
    }
    if !fields.is_empty() {
        return Err(Error::Incompatible { fields });
    }

    let mut rows: Vec<LeaderboardRow> = reports
        .iter()
        .map(|r| LeaderboardRow {
            method: r.method.clone(),
            values: Metric::ALL.iter().map(|m| m.value(r)).collect(),
            ranks: vec![1; Metric::ALL.len()],
        })
        .collect();
    for (col, metric) in Metric::ALL.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r.values[col]).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            let better = values
                .iter()
                .filter(|&&v| {
                    if metric.higher_is_better() {
                        v > values[i]
                    } else {
                        v < values[i]
                    }
                })
                .count();
            row.ranks[col] = better + 1;
        }
    }
    Ok(Leaderboard {
        metrics: Metric::ALL.to_vec(),
        rows,
    })
}
