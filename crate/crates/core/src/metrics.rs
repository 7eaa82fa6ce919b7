//! Accuracy of a draw, its analytic expectation, curve aggregates and the
//! legacy group metrics.

use serde::{Deserialize, Serialize};

use crate::distribution::{make_test_distribution, ClassDistribution, ShiftProfile};
use crate::error::{Error, Result};
use crate::pool::{per_class_accuracy, PredictionPool};

/// Fraction of drawn positions, counted with multiplicity, that are predicted
/// correctly.
pub fn accuracy(pool: &PredictionPool, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty draw".into()));
    }
    let records = pool.records();
    let mut correct = 0usize;
    for &i in indices {
        let record = records.get(i).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "draw index {i} outside a pool of {}",
                records.len()
            ))
        })?;
        correct += usize::from(record.is_correct());
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// `sum_c dist[c] * per_class_acc[c]`, summed in ascending class order.
pub fn expected_accuracy(per_class_acc: &[f64], dist: &ClassDistribution) -> Result<f64> {
    if per_class_acc.len() != dist.num_classes() {
        return Err(Error::InvalidDimension(format!(
            "{} per-class accuracies for a distribution over {} classes",
            per_class_acc.len(),
            dist.num_classes()
        )));
    }
    Ok(per_class_acc
        .iter()
        .zip(dist.probs())
        .map(|(a, q)| q * a)
        .sum())
}

/// Summary of an accuracy-versus-shift curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub auc: f64,
    pub avg: f64,
    pub std: f64,
    pub max_acc: f64,
    pub min_acc: f64,
    pub drop_ratio: f64,
}

/// Aggregates per-synthesization accuracies and their shifts.
///
/// `std` is the population deviation. `auc` is the trapezoid area of the
/// curve with points ordered by ascending shift (ties by input position),
/// divided by the shift range; it falls back to `avg` when the range is zero.
pub fn aggregate(accs: &[f64], deltas: &[f64]) -> Result<AggregateMetrics> {
    if accs.is_empty() {
        return Err(Error::UndefinedMetric("aggregate of an empty curve".into()));
    }
    if accs.len() != deltas.len() {
        return Err(Error::InvalidDimension(format!(
            "{} accuracies but {} shifts",
            accs.len(),
            deltas.len()
        )));
    }
    if let Some(d) = deltas.iter().find(|d| !d.is_finite()) {
        return Err(Error::Domain(format!("non-finite shift {d}")));
    }

    let n = accs.len() as f64;
    let avg = accs.iter().sum::<f64>() / n;
    let std = (accs.iter().map(|a| (a - avg).powi(2)).sum::<f64>() / n).sqrt();
    let max_acc = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_acc = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let drop_ratio = if max_acc > 0.0 {
        (max_acc - min_acc) / max_acc
    } else {
        0.0
    };

    let mut order: Vec<usize> = (0..accs.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]).then(a.cmp(&b)));
    let range = deltas[order[order.len() - 1]] - deltas[order[0]];
    let auc = if range > 0.0 {
        let area: f64 = order
            .windows(2)
            .map(|w| (accs[w[0]] + accs[w[1]]) * (deltas[w[1]] - deltas[w[0]]) / 2.0)
            .sum();
        area / range
    } else {
        avg
    };

    Ok(AggregateMetrics {
        auc,
        avg,
        std,
        max_acc,
        min_acc,
        drop_ratio,
    })
}

/// Accuracy under a uniform class distribution (macro-averaged recall).
pub fn balanced_accuracy(pool: &PredictionPool) -> f64 {
    let uniform = ClassDistribution::uniform(pool.num_classes()).expect("pool has >= 2 classes");
    expected_accuracy(&per_class_accuracy(pool), &uniform).expect("lengths agree")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Many,
    Mid,
    Few,
}

/// Assignment of every class to a many/mid/few-shot group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    groups: Vec<Group>,
}

impl GroupSpec {
    pub fn new(groups: Vec<Group>) -> Self {
        Self { groups }
    }

    /// Classes ranked by training count (descending, stable on class index)
    /// and cut into contiguous thirds of sizes `ceil(C/3)`,
    /// `ceil((C - ceil(C/3)) / 2)` and the remainder.
    pub fn thirds(train_counts: &[u64]) -> Self {
        let c = train_counts.len();
        let many = c.div_ceil(3);
        let mid = (c - many).div_ceil(2);
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| train_counts[b].cmp(&train_counts[a]).then(a.cmp(&b)));
        let mut groups = vec![Group::Few; c];
        for (rank, &class) in order.iter().enumerate() {
            groups[class] = if rank < many {
                Group::Many
            } else if rank < many + mid {
                Group::Mid
            } else {
                Group::Few
            };
        }
        Self { groups }
    }

    /// Many-shot above `many_above` training samples, few-shot below
    /// `few_below`, mid otherwise.
    pub fn thresholds(train_counts: &[u64], many_above: u64, few_below: u64) -> Self {
        let groups = train_counts
            .iter()
            .map(|&n| {
                if n > many_above {
                    Group::Many
                } else if n < few_below {
                    Group::Few
                } else {
                    Group::Mid
                }
            })
            .collect();
        Self { groups }
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Group of a 1-based class.
    pub fn group_of(&self, class: usize) -> Group {
        self.groups[class - 1]
    }
}

/// Micro-averaged accuracy per group; `None` when a group has no records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub many: Option<f64>,
    pub mid: Option<f64>,
    pub few: Option<f64>,
}

impl GroupAccuracy {
    pub fn get(&self, group: Group) -> Option<f64> {
        match group {
            Group::Many => self.many,
            Group::Mid => self.mid,
            Group::Few => self.few,
        }
    }
}

pub fn group_accuracy(pool: &PredictionPool, spec: &GroupSpec) -> Result<GroupAccuracy> {
    if spec.groups.len() != pool.num_classes() {
        return Err(Error::InvalidDimension(format!(
            "group spec covers {} classes, pool has {}",
            spec.groups.len(),
            pool.num_classes()
        )));
    }
    // (correct, total) per group
    let mut tally = [(0usize, 0usize); 3];
    for record in pool.records() {
        let slot = &mut tally[spec.group_of(record.true_label) as usize];
        slot.0 += usize::from(record.is_correct());
        slot.1 += 1;
    }
    let ratio = |(hit, n): (usize, usize)| (n > 0).then(|| hit as f64 / n as f64);
    Ok(GroupAccuracy {
        many: ratio(tally[0]),
        mid: ratio(tally[1]),
        few: ratio(tally[2]),
    })
}

/// Expected accuracies under the head-peaked, uniform and tail-peaked test
/// distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyTriplet {
    pub forward: f64,
    pub uniform: f64,
    pub backward: f64,
}

pub fn legacy_triplet(pool: &PredictionPool, rho_tst: f64) -> Result<LegacyTriplet> {
    let c = pool.num_classes();
    let acc = per_class_accuracy(pool);
    let forward = make_test_distribution(&ShiftProfile::new(c, rho_tst, 1.0)?);
    let backward = make_test_distribution(&ShiftProfile::new(c, rho_tst, c as f64)?);
    Ok(LegacyTriplet {
        forward: expected_accuracy(&acc, &forward)?,
        uniform: balanced_accuracy(pool),
        backward: expected_accuracy(&acc, &backward)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{generate_synthetic_pool, DatasetManifest, PredictionRecord};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn accuracy_counts_multiplicity() {
        let records = [true, false, true, true]
            .iter()
            .enumerate()
            .map(|(i, &ok)| PredictionRecord {
                sample_id: i.to_string(),
                true_label: i % 2 + 1,
                predicted_label: if ok { i % 2 + 1 } else { 2 - i % 2 },
                scores: None,
            })
            .collect();
        let pool =
            PredictionPool::new(records, DatasetManifest::new("m", vec![3, 1]).unwrap()).unwrap();
        // correctness of positions 0, 1, 3 is (T, F, T)
        assert_eq!(accuracy(&pool, &[0, 1, 1, 3]).unwrap(), 0.5);
        assert_eq!(accuracy(&pool, &[1]).unwrap(), 0.0);
        assert!(matches!(
            accuracy(&pool, &[]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(accuracy(&pool, &[4]).is_err());
    }

    #[test]
    fn accuracy_perfect_pool() {
        let pool = generate_synthetic_pool(&[1.0, 1.0], &[3, 3], 0).unwrap();
        assert_eq!(accuracy(&pool, &[0, 0, 5, 2]).unwrap(), 1.0);
    }

    #[test]
    fn expected_accuracy_examples() {
        let half = ClassDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(expected_accuracy(&[1.0, 0.0], &half).unwrap(), 0.5);
        let d = ClassDistribution::new(vec![0.900901, 0.090090, 0.009009]).unwrap();
        assert!(close(
            expected_accuracy(&[0.9, 0.5, 0.3], &d).unwrap(),
            0.858559,
            1e-6
        ));
        let d = ClassDistribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        assert!(close(expected_accuracy(&[1.0; 3], &d).unwrap(), 1.0, 1e-15));
        assert!(matches!(
            expected_accuracy(&[1.0], &half),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn aggregate_two_points() {
        let m = aggregate(&[0.80, 0.60], &[0.0, 2.0]).unwrap();
        assert!(close(m.avg, 0.70, 1e-12));
        assert!(close(m.std, 0.10, 1e-12));
        assert!(close(m.drop_ratio, 0.25, 1e-12));
        assert!(close(m.auc, 0.70, 1e-12));
        assert_eq!((m.max_acc, m.min_acc), (0.80, 0.60));
    }

    #[test]
    fn aggregate_single_point() {
        let m = aggregate(&[0.42], &[3.0]).unwrap();
        assert_eq!((m.avg, m.std, m.drop_ratio, m.auc), (0.42, 0.0, 0.0, 0.42));
    }

    #[test]
    fn aggregate_constant_curve() {
        let m = aggregate(&[0.5; 3], &[0.3, 0.1, 2.0]).unwrap();
        assert_eq!((m.avg, m.std, m.drop_ratio, m.auc), (0.5, 0.0, 0.0, 0.5));
    }

    #[test]
    fn aggregate_orders_by_shift() {
        // Points listed out of order: the curve is 1.0 @ 0, 0.0 @ 1, 0.0 @ 3.
        let m = aggregate(&[0.0, 1.0, 0.0], &[3.0, 0.0, 1.0]).unwrap();
        assert!(close(m.auc, 0.5 / 3.0, 1e-15));
    }

    #[test]
    fn aggregate_zero_range_falls_back_to_mean() {
        let m = aggregate(&[0.2, 0.6], &[1.0, 1.0]).unwrap();
        assert_eq!(m.auc, m.avg);
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(
            aggregate(&[], &[]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(aggregate(&[0.1], &[f64::NAN]).is_err());
        assert!(aggregate(&[0.1, 0.2], &[0.0]).is_err());
    }

    #[test]
    fn all_zero_curve_has_zero_drop() {
        let m = aggregate(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(m.drop_ratio, 0.0);
    }

    #[test]
    fn balanced_examples() {
        let pool = generate_synthetic_pool(&[1.0, 0.0], &[4, 4], 0).unwrap();
        assert_eq!(balanced_accuracy(&pool), 0.5);
        let pool = generate_synthetic_pool(&[0.9, 0.5, 0.3], &[10, 10, 10], 0).unwrap();
        assert!(close(balanced_accuracy(&pool), 0.566667, 1e-6));
        let pool = generate_synthetic_pool(&[1.0; 4], &[2, 3, 4, 5], 0).unwrap();
        assert_eq!(balanced_accuracy(&pool), 1.0);
    }

    #[test]
    fn thirds_grouping() {
        let spec = GroupSpec::thirds(&[10, 50, 30]);
        assert_eq!(spec.groups(), &[Group::Few, Group::Many, Group::Mid]);
        let spec = GroupSpec::thirds(&[10; 10]);
        let count = |g| spec.groups().iter().filter(|&&x| x == g).count();
        assert_eq!(
            (count(Group::Many), count(Group::Mid), count(Group::Few)),
            (4, 3, 3)
        );
        let spec = GroupSpec::thirds(&[5, 1]);
        assert_eq!(spec.groups(), &[Group::Many, Group::Mid]);
    }

    #[test]
    fn threshold_grouping() {
        let spec = GroupSpec::thresholds(&[500, 100, 50, 10], 100, 20);
        assert_eq!(
            spec.groups(),
            &[Group::Many, Group::Mid, Group::Mid, Group::Few]
        );
    }

    #[test]
    fn group_accuracy_examples() {
        let pool = generate_synthetic_pool(&[1.0, 0.5, 0.0], &[4, 4, 4], 1)
            .unwrap()
            .with_manifest(DatasetManifest::new("m", vec![100, 10, 1]).unwrap())
            .unwrap();
        let g = group_accuracy(&pool, &GroupSpec::thirds(&pool.manifest().train_counts)).unwrap();
        assert_eq!((g.many, g.mid, g.few), (Some(1.0), Some(0.5), Some(0.0)));

        let one = group_accuracy(&pool, &GroupSpec::new(vec![Group::Mid; 3])).unwrap();
        assert_eq!(one.mid, Some(pool.overall_accuracy()));
        assert_eq!((one.many, one.few), (None, None));

        let perfect = generate_synthetic_pool(&[1.0; 3], &[2, 2, 2], 0).unwrap();
        let g = group_accuracy(&perfect, &GroupSpec::thirds(&[3, 2, 1])).unwrap();
        assert_eq!((g.many, g.mid, g.few), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn legacy_triplet_examples() {
        let pool = generate_synthetic_pool(&[0.9, 0.5, 0.3], &[10, 10, 10], 0).unwrap();
        let flat = legacy_triplet(&pool, 1.0).unwrap();
        let btd = balanced_accuracy(&pool);
        assert!(close(flat.forward, btd, 1e-12) && close(flat.backward, btd, 1e-12));
        assert_eq!(flat.uniform, btd);

        let t = legacy_triplet(&pool, 100.0).unwrap();
        assert!(close(t.forward, 0.8585585585585586, 1e-12));
        assert!(close(t.uniform, 0.5666666666666667, 1e-12));
        assert!(close(t.backward, 0.3234234234234234, 1e-12));
    }

    #[test]
    fn legacy_triplet_constant_classifier() {
        let pool = generate_synthetic_pool(&[1.0, 0.0, 0.0, 0.0], &[3; 4], 0).unwrap();
        let t = legacy_triplet(&pool, 20.0).unwrap();
        let fwd = make_test_distribution(&ShiftProfile::new(4, 20.0, 1.0).unwrap());
        let bwd = make_test_distribution(&ShiftProfile::new(4, 20.0, 4.0).unwrap());
        assert_eq!(t.forward, fwd.prob(1));
        assert_eq!(t.backward, bwd.prob(1));
    }
}
