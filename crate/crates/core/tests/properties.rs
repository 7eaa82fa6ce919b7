use proptest::prelude::*;
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltshift::{
    accuracy, aggregate, allocate_counts, balanced_accuracy, derive_stream, divergence, draw,
    expected_accuracy, generate_synthetic_pool, ingest, make_test_distribution, per_class_accuracy,
    ClassCounts, ClassDistribution, DatasetManifest, DivergenceConvention, DrawMode,
    PredictionPool, PredictionRecord, ShiftProfile,
};

/// All ways to write `n` as an ordered sum of `parts` positive integers.
fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    (1..=n - (parts - 1))
        .flat_map(|first| {
            compositions(n - first, parts - 1)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}

/// Largest-remainder result found by trying every set of classes to round up
/// and keeping the one whose remainders dominate, in exact integer arithmetic
/// on twentieths.
fn largest_remainder_oracle(twentieths: &[usize], total: usize) -> Vec<usize> {
    let c = twentieths.len();
    let floors: Vec<usize> = twentieths.iter().map(|k| total * k / 20).collect();
    let rems: Vec<usize> = twentieths.iter().map(|k| total * k % 20).collect();
    let extra = total - floors.iter().sum::<usize>();
    let mut found = None;
    for mask in 0u32..(1 << c) {
        if mask.count_ones() as usize != extra {
            continue;
        }
        let up = |i: usize| mask & (1 << i) != 0;
        let dominates = (0..c).filter(|&u| up(u)).all(|u| {
            (0..c)
                .filter(|&d| !up(d))
                .all(|d| rems[u] > rems[d] || (rems[u] == rems[d] && u < d))
        });
        if dominates {
            assert!(found.is_none(), "two dominant round-up sets");
            found = Some((0..c).map(|i| floors[i] + usize::from(up(i))).collect());
        }
    }
    found.expect("a dominant round-up set exists")
}

#[test]
fn allocation_matches_exhaustive_oracle() {
    let mut cases = 0;
    for c in 2..=5 {
        for parts in compositions(20, c) {
            let dist =
                ClassDistribution::new(parts.iter().map(|&k| k as f64 * 0.05).collect()).unwrap();
            for total in 0..=50 {
                let got = allocate_counts(&dist, total);
                assert_eq!(
                    got.counts(),
                    largest_remainder_oracle(&parts, total).as_slice(),
                    "q = {parts:?}/20, total = {total}"
                );
                cases += 1;
            }
        }
    }
    assert!(cases > 200_000);
}

#[test]
fn synthetic_pool_hits_rounded_targets() {
    for tenths in 0..=10 {
        let target = tenths as f64 / 10.0;
        for size in 1..=100usize {
            let pool =
                generate_synthetic_pool(&[target, 1.0 - target], &[size, 101 - size], 0).unwrap();
            let acc = per_class_accuracy(&pool);
            assert_eq!(acc[0], (size as f64 * target).round() / size as f64);
            let other = 1.0 - target;
            assert_eq!(
                acc[1],
                ((101 - size) as f64 * other).round() / (101 - size) as f64
            );
        }
    }
}

#[test]
fn bootstrap_marginals_are_uniform() {
    let k = 7;
    let pool = generate_synthetic_pool(&[0.5, 0.5], &[k, 3], 0).unwrap();
    let members = pool.class_members(1).to_vec();
    let trials = 10_000;
    let mut hits = vec![0usize; pool.len()];
    let counts = ClassCounts::new(vec![1, 0]);
    for s in 0..trials {
        let idx = draw(
            &pool,
            &counts,
            derive_stream(5, 1, s as u32 + 1),
            DrawMode::Bootstrap,
        )
        .unwrap();
        hits[idx[0]] += 1;
    }
    let p = 1.0 / k as f64;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    for m in members {
        let dev = (hits[m] as f64 - trials as f64 * p).abs();
        assert!(dev <= 5.0 * sd, "member {m}: {} hits", hits[m]);
    }
}

#[test]
fn sampled_mean_converges_to_expected_accuracy() {
    // 500 trials of R = 200 bootstrap draws of N = 5000 samples.
    let pool =
        generate_synthetic_pool(&[0.95, 0.7, 0.55, 0.3, 0.1], &[40, 40, 40, 40, 40], 2).unwrap();
    let acc = per_class_accuracy(&pool);
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut agree = 0;
    for trial in 0..500u64 {
        let rho = 1.0 + 99.0 * (rng.next_u64() % 1000) as f64 / 1000.0;
        let alpha = 1.0 + 4.0 * (rng.next_u64() % 1000) as f64 / 1000.0;
        let dist = make_test_distribution(&ShiftProfile::new(5, rho, alpha).unwrap());
        let counts = allocate_counts(&dist, 5000);
        let mean = (1..=200u32)
            .map(|r| {
                let idx = draw(
                    &pool,
                    &counts,
                    derive_stream(trial, 1, r),
                    DrawMode::Bootstrap,
                )
                .unwrap();
                accuracy(&pool, &idx).unwrap()
            })
            .sum::<f64>()
            / 200.0;
        let want = expected_accuracy(&acc, &dist).unwrap();
        agree += usize::from((mean - want).abs() <= 0.01);
    }
    assert!(agree >= 495, "{agree}/500 trials within 0.01");
}

#[test]
fn balanced_accuracy_is_uniform_expectation_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let c = 2 + (rng.next_u64() % 20) as usize;
        let targets: Vec<f64> = (0..c)
            .map(|_| (rng.next_u64() % 101) as f64 / 100.0)
            .collect();
        let sizes: Vec<usize> = (0..c).map(|_| 1 + (rng.next_u64() % 30) as usize).collect();
        let pool = generate_synthetic_pool(&targets, &sizes, 0).unwrap();
        let uniform = ClassDistribution::uniform(c).unwrap();
        assert_eq!(
            balanced_accuracy(&pool).to_bits(),
            expected_accuracy(&per_class_accuracy(&pool), &uniform)
                .unwrap()
                .to_bits()
        );
    }
}

fn arb_pool() -> impl Strategy<Value = PredictionPool> {
    (2usize..6).prop_flat_map(|c| {
        (
            prop::collection::vec((1usize..=c, 1usize..=c), c..40),
            prop::collection::vec(1u64..1000, c),
            any::<bool>(),
        )
            .prop_map(move |(pairs, train, with_scores)| {
                let mut records: Vec<PredictionRecord> = (1..=c)
                    .map(|k| (k, k))
                    .chain(pairs)
                    .enumerate()
                    .map(|(i, (label, pred))| PredictionRecord {
                        sample_id: format!("s{i}"),
                        true_label: label,
                        predicted_label: pred,
                        scores: None,
                    })
                    .collect();
                if with_scores {
                    for r in &mut records {
                        let mut s = vec![0.0; c];
                        s[r.predicted_label - 1] = 1.0;
                        r.scores = Some(s);
                    }
                }
                PredictionPool::new(records, DatasetManifest::new("p", train).unwrap()).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn test_distribution_is_normalized_and_peaked(
        c in 2usize..200,
        rho in 1.0f64..10_000.0,
        frac in 0.0f64..1.0,
    ) {
        let alpha = 1.0 + frac * (c - 1) as f64;
        let q = make_test_distribution(&ShiftProfile::new(c, rho, alpha).unwrap());
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let peak = q.prob(alpha.round() as usize);
        prop_assert!(q.probs().iter().all(|&x| x <= peak));
    }

    #[test]
    fn divergence_is_symmetric_and_nonnegative(
        w in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 2..30),
    ) {
        let p = ClassDistribution::from_weights(w.iter().map(|x| x.0).collect()).unwrap();
        let q = ClassDistribution::from_weights(w.iter().map(|x| x.1).collect()).unwrap();
        for conv in [DivergenceConvention::Jeffreys, DivergenceConvention::Js] {
            let a = divergence(&p, &q, conv).unwrap();
            let b = divergence(&q, &p, conv).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(a >= 0.0);
        }
    }

    #[test]
    fn allocation_preserves_total_and_stays_within_one(
        w in prop::collection::vec(0.001f64..1.0, 2..40),
        total in 0usize..100_000,
    ) {
        let d = ClassDistribution::from_weights(w).unwrap();
        let counts = allocate_counts(&d, total);
        prop_assert_eq!(counts.counts().iter().sum::<usize>(), total);
        for (n, q) in counts.counts().iter().zip(d.probs()) {
            prop_assert!((*n as f64 - total as f64 * q).abs() < 1.0);
        }
    }

    #[test]
    fn pool_serialization_round_trips(pool in arb_pool()) {
        let mut preds = Vec::new();
        pool.write_predictions(&mut preds).unwrap();
        let mut manifest = Vec::new();
        pool.manifest().write_to(&mut manifest).unwrap();
        let back = ingest(preds.as_slice(), manifest.as_slice()).unwrap();
        prop_assert_eq!(back, pool);
    }

    #[test]
    fn overall_accuracy_is_size_weighted_class_accuracy(pool in arb_pool()) {
        let acc = per_class_accuracy(&pool);
        prop_assert!(acc.iter().all(|a| (0.0..=1.0).contains(a)));
        let n = pool.len() as f64;
        let weighted: f64 = pool
            .class_sizes()
            .iter()
            .zip(&acc)
            .map(|(&s, a)| s as f64 / n * a)
            .sum();
        prop_assert!((weighted - pool.overall_accuracy()).abs() < 1e-12);
    }

    #[test]
    fn draws_are_isolated_per_class(
        pool in arb_pool(),
        seed in any::<u64>(),
        base in prop::collection::vec(0usize..12, 5),
        bump in 0usize..12,
        which in 0usize..5,
    ) {
        let c = pool.num_classes();
        let a = ClassCounts::new(base[..c].to_vec());
        let mut changed = base[..c].to_vec();
        let which = which % c;
        changed[which] = bump;
        let b = ClassCounts::new(changed);
        let da = draw(&pool, &a, seed, DrawMode::Bootstrap).unwrap();
        let db = draw(&pool, &b, seed, DrawMode::Bootstrap).unwrap();
        let label = |i: &usize| pool.records()[*i].true_label;
        for class in (1..=c).filter(|&k| k != which + 1) {
            let xa: Vec<_> = da.iter().filter(|i| label(i) == class).collect();
            let xb: Vec<_> = db.iter().filter(|i| label(i) == class).collect();
            prop_assert_eq!(xa, xb);
        }
        prop_assert_eq!(draw(&pool, &a, seed, DrawMode::Bootstrap).unwrap(), da);
    }

    #[test]
    fn aggregate_is_invariant_to_joint_permutation(
        pts in prop::collection::vec((0.0f64..1.0, -5.0f64..5.0), 1..25),
        perm_seed in any::<u64>(),
    ) {
        let mut shuffled = pts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
        }
        let unzip = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
        let (a1, d1) = unzip(&pts);
        let (a2, d2) = unzip(&shuffled);
        let m1 = aggregate(&a1, &d1).unwrap();
        let m2 = aggregate(&a2, &d2).unwrap();
        prop_assert!((m1.auc - m2.auc).abs() <= 1e-12);
        prop_assert!((m1.avg - m2.avg).abs() <= 1e-12);
        prop_assert!((m1.std - m2.std).abs() <= 1e-12);
        prop_assert_eq!((m1.max_acc, m1.min_acc), (m2.max_acc, m2.min_acc));
        prop_assert!(m1.min_acc <= m1.auc + 1e-15 && m1.auc <= m1.max_acc + 1e-15);
        prop_assert!(m1.min_acc <= m1.avg + 1e-15 && m1.avg <= m1.max_acc + 1e-15);
    }
}
