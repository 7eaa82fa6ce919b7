//! Analytic class distributions: the exponentially decaying training profile,
//! the shifted test profile with a movable peak, the peak schedule, test-set
//! sizing, integer apportionment and the shift measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `C >= 2` classes, every entry in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "a class distribution needs at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0 && **p <= 1.0))
        {
            return Err(Error::Domain(format!(
                "probability of class {} is {p}, expected a value in (0, 1]",
                i + 1
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Normalizes positive weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Domain(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(num_classes: usize) -> Result<Self> {
        check_classes(num_classes)?;
        Ok(Self(vec![1.0 / num_classes as f64; num_classes]))
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Probability of a 1-based class index.
    pub fn prob(&self, class: usize) -> f64 {
        self.0[class - 1]
    }
}

impl TryFrom<Vec<f64>> for ClassDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<ClassDistribution> for Vec<f64> {
    fn from(d: ClassDistribution) -> Self {
        d.0
    }
}

fn check_classes(num_classes: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(Error::InvalidDimension(format!(
            "at least 2 classes are required, got {num_classes}"
        )));
    }
    Ok(())
}

/// Brings an imbalance ratio into the canonical `rho >= 1` form.
///
/// Ratios below one (the "decay coefficient" convention, e.g. `0.01`) are
/// replaced by their reciprocal.
pub fn normalize_ratio(rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "imbalance ratio must be positive and finite, got {rho}"
        )));
    }
    if rho < 1.0 {
        log::info!("imbalance ratio {rho} < 1 interpreted as {}", 1.0 / rho);
        Ok(1.0 / rho)
    } else {
        Ok(rho)
    }
}

/// Parameters of one shifted test distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftProfile {
    num_classes: usize,
    imbalance_ratio: f64,
    peak: f64,
}

impl ShiftProfile {
    pub fn new(num_classes: usize, imbalance_ratio: f64, peak: f64) -> Result<Self> {
        check_classes(num_classes)?;
        let imbalance_ratio = normalize_ratio(imbalance_ratio)?;
        // The schedule reaches past C when T > C, up to C + 1 - C/T.
        if !(peak >= 1.0 && peak < num_classes as f64 + 1.0) {
            return Err(Error::InvalidParameter(format!(
                "peak {peak} outside [1, {})",
                num_classes + 1
            )));
        }
        Ok(Self {
            num_classes,
            imbalance_ratio,
            peak,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn imbalance_ratio(&self) -> f64 {
        self.imbalance_ratio
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }
}

/// `rho^(-|c - peak| / (C - 1))` for `c = 1..=C`.
fn decay_weights(num_classes: usize, rho: f64, peak: f64) -> Vec<f64> {
    let span = (num_classes - 1) as f64;
    (1..=num_classes)
        .map(|c| rho.powf(-(c as f64 - peak).abs() / span))
        .collect()
}

/// Exponentially decaying training profile: class 1 is the head, class `C`
/// the tail, and `q_1 / q_C = rho`.
pub fn make_train_distribution(num_classes: usize, rho_trn: f64) -> Result<ClassDistribution> {
    check_classes(num_classes)?;
    let rho = normalize_ratio(rho_trn)?;
    ClassDistribution::from_weights(decay_weights(num_classes, rho, 1.0))
}

/// Test profile decaying geometrically away from the (real-valued) peak.
pub fn make_test_distribution(profile: &ShiftProfile) -> ClassDistribution {
    let weights = decay_weights(profile.num_classes, profile.imbalance_ratio, profile.peak);
    ClassDistribution::from_weights(weights).expect("validated profile yields positive weights")
}

/// The sequence of peaks `(t - 1) C / T + 1`, `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    peaks: Vec<f64>,
}

impl AlphaSchedule {
    pub fn num_synthesizations(&self) -> usize {
        self.peaks.len()
    }

    pub fn peaks(&self) -> &[f64] {
        &self.peaks
    }
}

pub fn alpha_schedule(num_classes: usize, num_synthesizations: usize) -> Result<AlphaSchedule> {
    check_classes(num_classes)?;
    if num_synthesizations == 0 {
        return Err(Error::InvalidParameter(
            "number of synthesizations must be at least 1".into(),
        ));
    }
    // Integer numerator keeps each peak a single correctly rounded division.
    let peaks = (0..num_synthesizations)
        .map(|i| (i * num_classes) as f64 / num_synthesizations as f64 + 1.0)
        .collect();
    Ok(AlphaSchedule { peaks })
}

/// Total test-set size: the floored sum of the per-class sizes of the
/// head-peaked profile whose largest class holds `n_max` samples.
pub fn total_test_size(num_classes: usize, rho_tst: f64, n_max: usize) -> Result<usize> {
    check_classes(num_classes)?;
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let rho = normalize_ratio(rho_tst)?;
    let sum: f64 = decay_weights(num_classes, rho, 1.0)
        .into_iter()
        .map(|w| n_max as f64 * w)
        .sum();
    // Sums that are integral in exact arithmetic may land a few ulps low.
    Ok((sum * (1.0 + 1e-12)).floor() as usize)
}

/// Integer per-class sample counts and their total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    counts: Vec<usize>,
    total: usize,
}

impl ClassCounts {
    pub fn new(counts: Vec<usize>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Count of a 1-based class index.
    pub fn count(&self, class: usize) -> usize {
        self.counts[class - 1]
    }
}

/// Fractional parts are compared on a 1e-9 grid so that products which are
/// equal in exact arithmetic tie regardless of rounding noise.
fn remainder_key(frac: f64) -> i64 {
    (frac * 1e9).round() as i64
}

/// Largest-remainder apportionment of `total` units according to `dist`.
///
/// Each class first receives `floor(total * q_c)`; the leftover units go to
/// the classes with the largest fractional parts, lowest class index first
/// on ties.
pub fn allocate_counts(dist: &ClassDistribution, total: usize) -> ClassCounts {
    let quotas: Vec<f64> = dist.probs().iter().map(|q| total as f64 * q).collect();
    let mut counts: Vec<usize> = quotas
        .iter()
        .map(|x| (x + 1e-9).floor().max(0.0) as usize)
        .collect();
    let fracs: Vec<i64> = quotas
        .iter()
        .zip(&counts)
        .map(|(x, &n)| remainder_key(x - n as f64))
        .collect();

    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    if assigned <= total {
        order.sort_by(|&a, &b| fracs[b].cmp(&fracs[a]).then(a.cmp(&b)));
        for &c in order.iter().cycle().take(total - assigned) {
            counts[c] += 1;
        }
    } else {
        // Only reachable when the probabilities sum slightly above one.
        order.sort_by(|&a, &b| fracs[a].cmp(&fracs[b]).then(b.cmp(&a)));
        let mut excess = assigned - total;
        for &c in order.iter().cycle() {
            if excess == 0 {
                break;
            }
            if counts[c] > 0 {
                counts[c] -= 1;
                excess -= 1;
            }
        }
    }
    ClassCounts { counts, total }
}

/// Which divergence quantifies the shift between two class distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceConvention {
    /// Symmetrized KL: `KL(p||q) + KL(q||p)`.
    #[default]
    Jeffreys,
    /// Jensen-Shannon divergence through the midpoint distribution.
    Js,
}

impl DivergenceConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Jeffreys => "jeffreys",
            Self::Js => "js",
        }
    }
}

impl std::str::FromStr for DivergenceConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jeffreys" => Ok(Self::Jeffreys),
            "js" => Ok(Self::Js),
            other => Err(Error::InvalidParameter(format!(
                "unknown divergence convention {other:?}"
            ))),
        }
    }
}

/// Non-negative, symmetric divergence between two distributions.
///
/// Both conventions are evaluated with per-class terms that are symmetric in
/// their arguments, so `divergence(p, q) == divergence(q, p)` bitwise.
pub fn divergence(
    p: &ClassDistribution,
    q: &ClassDistribution,
    convention: DivergenceConvention,
) -> Result<f64> {
    if p.num_classes() != q.num_classes() {
        return Err(Error::InvalidDimension(format!(
            "distributions over {} and {} classes",
            p.num_classes(),
            q.num_classes()
        )));
    }
    if p.probs().iter().chain(q.probs()).any(|&x| x <= 0.0) {
        return Err(Error::Domain(
            "divergence needs strictly positive entries".into(),
        ));
    }
    let pairs = p.probs().iter().zip(q.probs());
    let value = match convention {
        DivergenceConvention::Jeffreys => pairs.map(|(&a, &b)| (a - b) * (a.ln() - b.ln())).sum(),
        DivergenceConvention::Js => pairs
            .map(|(&a, &b)| {
                let m = 0.5 * (a + b);
                0.5 * (a * (a / m).ln() + b * (b / m).ln())
            })
            .sum::<f64>()
            .max(0.0),
    };
    Ok(value)
}
