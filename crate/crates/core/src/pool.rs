//! The labeled prediction pool that test sets are resampled from, together
//! with the training-count manifest of the evaluated model.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{normalize_ratio, ClassDistribution};
use crate::error::{Error, Result};
use crate::sampler::uniform_below;

/// One evaluated sample. Labels are 1-based class indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "label")]
    pub true_label: usize,
    #[serde(rename = "pred")]
    pub predicted_label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl PredictionRecord {
    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }

    fn validate(&self, num_classes: usize) -> Result<()> {
        for (what, label) in [("label", self.true_label), ("pred", self.predicted_label)] {
            if label == 0 || label > num_classes {
                return Err(Error::Validation(format!(
                    "sample {:?}: {what} {label} outside [1, {num_classes}]",
                    self.sample_id
                )));
            }
        }
        if let Some(scores) = &self.scores {
            if scores.len() != num_classes {
                return Err(Error::Validation(format!(
                    "sample {:?}: {} scores for {num_classes} classes",
                    self.sample_id,
                    scores.len()
                )));
            }
            if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(Error::Validation(format!(
                    "sample {:?}: scores must be finite and non-negative",
                    self.sample_id
                )));
            }
            let total: f64 = scores.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!(
                    "sample {:?}: scores sum to {total}",
                    self.sample_id
                )));
            }
            let argmax = argmax_lowest(scores) + 1;
            if argmax != self.predicted_label {
                return Err(Error::Validation(format!(
                    "sample {:?}: pred {} disagrees with score argmax {argmax}",
                    self.sample_id, self.predicted_label
                )));
            }
        }
        Ok(())
    }
}

/// 0-based position of the maximum, lowest index on ties.
fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Training-set description of the evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub num_classes: usize,
    pub train_counts: Vec<u64>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, train_counts: Vec<u64>) -> Result<Self> {
        let manifest = Self {
            name: name.into(),
            num_classes: train_counts.len(),
            train_counts,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    /// Training counts `floor(n_max * rho^(-(c-1)/(C-1)))`, clamped to at least one.
    pub fn exponential(
        name: impl Into<String>,
        num_classes: usize,
        n_max: u64,
        rho_trn: f64,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidDimension(format!(
                "at least 2 classes are required, got {num_classes}"
            )));
        }
        let rho = normalize_ratio(rho_trn)?;
        let span = (num_classes - 1) as f64;
        let counts = (0..num_classes)
            .map(|i| {
                let n = n_max as f64 * rho.powf(-(i as f64) / span);
                ((n * (1.0 + 1e-12)).floor() as u64).max(1)
            })
            .collect();
        Self::new(name, counts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidDimension(format!(
                "manifest {:?}: at least 2 classes are required",
                self.name
            )));
        }
        if self.train_counts.len() != self.num_classes {
            return Err(Error::Validation(format!(
                "manifest {:?}: {} train counts for {} classes",
                self.name,
                self.train_counts.len(),
                self.num_classes
            )));
        }
        if let Some(c) = self.train_counts.iter().position(|&n| n == 0) {
            return Err(Error::Validation(format!(
                "manifest {:?}: class {} has no training samples",
                self.name,
                c + 1
            )));
        }
        Ok(())
    }

    /// Empirical training class distribution.
    pub fn train_distribution(&self) -> ClassDistribution {
        ClassDistribution::from_weights(self.train_counts.iter().map(|&n| n as f64).collect())
            .expect("validated manifest has positive counts")
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let manifest: Self = serde_json::from_reader(reader).map_err(|e| Error::Parse {
            source_name: "manifest".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}

/// A validated pool of predictions indexed by true class.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPool {
    records: Vec<PredictionRecord>,
    manifest: DatasetManifest,
    class_index: Vec<Vec<usize>>,
}

impl PredictionPool {
    pub fn new(records: Vec<PredictionRecord>, manifest: DatasetManifest) -> Result<Self> {
        manifest.validate()?;
        let num_classes = manifest.num_classes;
        let mut seen = HashSet::with_capacity(records.len());
        let mut class_index = vec![Vec::new(); num_classes];
        for (pos, record) in records.iter().enumerate() {
            record.validate(num_classes)?;
            if !seen.insert(record.sample_id.as_str()) {
                return Err(Error::DuplicateId(record.sample_id.clone()));
            }
            class_index[record.true_label - 1].push(pos);
        }
        if let Some(c) = class_index.iter().position(Vec::is_empty) {
            return Err(Error::Coverage { class: c + 1 });
        }
        Ok(Self {
            records,
            manifest,
            class_index,
        })
    }

    /// Replaces the manifest, keeping the records.
    pub fn with_manifest(self, manifest: DatasetManifest) -> Result<Self> {
        if manifest.num_classes != self.num_classes() {
            return Err(Error::Validation(format!(
                "manifest has {} classes but the pool has {}",
                manifest.num_classes,
                self.num_classes()
            )));
        }
        Self::new(self.records, manifest)
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.num_classes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    /// Record positions whose true label is the 1-based `class`.
    pub fn class_members(&self, class: usize) -> &[usize] {
        &self.class_index[class - 1]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.class_index.iter().map(Vec::len).collect()
    }

    /// Fraction of correct predictions over the whole pool.
    pub fn overall_accuracy(&self) -> f64 {
        let correct = self.records.iter().filter(|r| r.is_correct()).count();
        correct as f64 / self.records.len() as f64
    }

    /// Writes the records in the line-delimited predictions format.
    pub fn write_predictions<W: Write>(&self, mut writer: W) -> Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut writer, record)?;
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// Reads a predictions stream and a manifest stream into a validated pool.
pub fn ingest<P: BufRead, M: Read>(predictions: P, manifest: M) -> Result<PredictionPool> {
    let manifest = DatasetManifest::from_reader(manifest)?;
    let mut records = Vec::new();
    for (i, line) in predictions.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: "predictions".into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    PredictionPool::new(records, manifest)
}

/// Per-class recall, indexed by class `1..=C` at positions `0..C`.
pub fn per_class_accuracy(pool: &PredictionPool) -> Vec<f64> {
    pool.class_index
        .iter()
        .map(|members| {
            let correct = members
                .iter()
                .filter(|&&i| pool.records[i].is_correct())
                .count();
            correct as f64 / members.len() as f64
        })
        .collect()
}

/// Builds a pool with exactly `round(size_c * target_c)` correct predictions in
/// class `c`; wrong predictions go to class `(c mod C) + 1`.
///
/// The seed only permutes record order. The manifest uses the class sizes as
/// training counts; swap it with [`PredictionPool::with_manifest`].
pub fn generate_synthetic_pool(
    per_class_accuracy_target: &[f64],
    per_class_size: &[usize],
    seed: u64,
) -> Result<PredictionPool> {
    let num_classes = per_class_accuracy_target.len();
    if num_classes < 2 {
        return Err(Error::InvalidDimension(format!(
            "at least 2 classes are required, got {num_classes}"
        )));
    }
    if per_class_size.len() != num_classes {
        return Err(Error::InvalidDimension(format!(
            "{num_classes} accuracy targets but {} class sizes",
            per_class_size.len()
        )));
    }
    if let Some(t) = per_class_accuracy_target
        .iter()
        .find(|t| !(0.0..=1.0).contains(*t))
    {
        return Err(Error::InvalidParameter(format!(
            "accuracy target {t} outside [0, 1]"
        )));
    }
    if per_class_size.contains(&0) {
        return Err(Error::InvalidParameter(
            "class sizes must be at least 1".into(),
        ));
    }

    let mut records = Vec::with_capacity(per_class_size.iter().sum());
    for (i, (&target, &size)) in per_class_accuracy_target
        .iter()
        .zip(per_class_size)
        .enumerate()
    {
        let class = i + 1;
        let correct = (size as f64 * target).round() as usize;
        let wrong = class % num_classes + 1;
        records.extend((0..size).map(|k| PredictionRecord {
            sample_id: format!("c{class}-{k}"),
            true_label: class,
            predicted_label: if k < correct { class } else { wrong },
            scores: None,
        }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..records.len()).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        records.swap(i, j);
    }

    let manifest = DatasetManifest::new(
        "synthetic",
        per_class_size.iter().map(|&n| n as u64).collect(),
    )?;
    PredictionPool::new(records, manifest)
}
