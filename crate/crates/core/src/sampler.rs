//! Seeded per-class resampling of test sets from a prediction pool.
//!
//! The random number pipeline is part of the report format, so it is fixed
//! and documented here:
//!
//! * `mix64` is the SplitMix64 output finalizer (a bijection on `u64`).
//! * `derive_stream(s, t, r) = mix64(mix64(s ^ GOLDEN) ^ (t << 32 | r))`.
//! * Class `c` of a draw uses `ChaCha8Rng::seed_from_u64(mix64(stream + c * GOLDEN))`,
//!   i.e. the `c`-th SplitMix64 output seeded at the stream seed.
//! * Bounded integers come from Lemire's multiply-and-reject method on
//!   successive `next_u64` outputs.
//! * Bootstrap draws take `counts[c]` bounded integers over the class members.
//!   Exhaustive draws run a forward partial Fisher-Yates shuffle over a copy of
//!   the member list and keep its prefix.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::ClassCounts;
use crate::error::{Error, Result};
use crate::pool::PredictionPool;

/// Identifier of the random number pipeline recorded in every report.
pub const PRNG_ID: &str = "splitmix64-chacha8-lemire/v1";

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of repeat `r` of synthesization `t`. Injective in `(t, r)` for a fixed
/// master seed.
pub fn derive_stream(master_seed: u64, t: u32, r: u32) -> u64 {
    let cell = (u64::from(t) << 32) | u64::from(r);
    mix64(mix64(master_seed ^ GOLDEN) ^ cell)
}

fn class_rng(stream_seed: u64, class: usize) -> ChaCha8Rng {
    let seed = mix64(stream_seed.wrapping_add((class as u64).wrapping_mul(GOLDEN)));
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `[0, n)`; `n` must be positive.
pub(crate) fn uniform_below<R: Rng + ?Sized>(rng: &mut R, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(n);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawMode {
    /// Uniform sampling with replacement within each class.
    #[default]
    Bootstrap,
    /// Sampling without replacement within each class.
    Exhaustive,
}

/// One realized test set: pool positions, with multiplicity, grouped by
/// ascending class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDraw {
    pub synthesization_index: usize,
    pub repeat_index: usize,
    pub stream_seed: u64,
    pub indices: Vec<usize>,
}

impl TestDraw {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws `counts[c]` members of every class `c`, each class from its own
/// stream so that draws of one class do not depend on the counts of others.
pub fn draw(
    pool: &PredictionPool,
    counts: &ClassCounts,
    stream_seed: u64,
    mode: DrawMode,
) -> Result<Vec<usize>> {
    if counts.counts().len() != pool.num_classes() {
        return Err(Error::InvalidDimension(format!(
            "{} class counts for a pool over {} classes",
            counts.counts().len(),
            pool.num_classes()
        )));
    }
    if mode == DrawMode::Exhaustive {
        check_feasible(pool, counts, None)?;
    }
    let mut indices = Vec::with_capacity(counts.total());
    for (i, &k) in counts.counts().iter().enumerate() {
        let class = i + 1;
        if k == 0 {
            continue;
        }
        let members = pool.class_members(class);
        let mut rng = class_rng(stream_seed, class);
        match mode {
            DrawMode::Bootstrap => {
                let n = members.len() as u64;
                indices.extend((0..k).map(|_| members[uniform_below(&mut rng, n) as usize]));
            }
            DrawMode::Exhaustive => {
                let mut shuffled = members.to_vec();
                for j in 0..k {
                    let pick = j + uniform_below(&mut rng, (shuffled.len() - j) as u64) as usize;
                    shuffled.swap(j, pick);
                }
                indices.extend_from_slice(&shuffled[..k]);
            }
        }
    }
    Ok(indices)
}

/// Errors on the first class whose target exceeds its pool size.
pub(crate) fn check_feasible(
    pool: &PredictionPool,
    counts: &ClassCounts,
    synthesization: Option<usize>,
) -> Result<()> {
    for (i, &k) in counts.counts().iter().enumerate() {
        let available = pool.class_members(i + 1).len();
        if k > available {
            return Err(Error::InfeasibleDraw {
                synthesization,
                class: i + 1,
                requested: k,
                available,
            });
        }
    }
    Ok(())
}
