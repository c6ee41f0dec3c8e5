//! Seed derivation. Every random stream in the crate is a ChaCha8 generator seeded from
//! an explicit 64-bit seed; sub-streams are derived with a splitmix64 mix so that
//! episode `k` of a run never depends on how many numbers episode `k - 1` consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PlannerRng = ChaCha8Rng;

/// Named sub-streams. Training and evaluation use disjoint tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TrainMaze = 1,
    TrainTask = 2,
    TrainSearch = 3,
    TrainExecute = 4,
    TrainBatch = 5,
    EvalMaze = 11,
    EvalTask = 12,
    EvalSearch = 13,
    EvalExecute = 14,
    ModelInit = 21,
    Hyper = 22,
    Trial = 31,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ (stream as u64).wrapping_mul(0xd1b5_4a32_d192_ed03)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> PlannerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(base: u64, stream: Stream, index: u64) -> PlannerRng {
    rng_from_seed(derive_seed(base, stream, index))
}
