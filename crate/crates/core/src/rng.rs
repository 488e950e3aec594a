//! MRG32k3a combined multiple recursive generator with keyed substreams.
//!
//! Every random draw in the crate comes from an [`RngState`] obtained through
//! [`stream_for`]. A [`StreamKey`] names a macro-replication, a purpose and a
//! per-purpose serial number; distinct keys map to disjoint blocks of the
//! generator's period, so the same key always replays the same numbers no
//! matter which solver variant or thread asks for it.
//!
//! Layout of the period (each block is reached by matrix jump-ahead):
//!
//! * stream `macro_rep * 4 + purpose` starts `2^127 * index` steps after the
//!   seed state;
//! * substream `point_serial` starts `2^76 * point_serial` steps into its
//!   stream.

use std::sync::OnceLock;

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub const M1: u64 = 4_294_967_087;
pub const M2: u64 = 4_294_944_443;

const A12: i64 = 1_403_580;
const A13N: i64 = 810_728;
const A21: i64 = 527_612;
const A23N: i64 = 1_370_589;

/// log2 of the distance between consecutive streams.
pub const STREAM_JUMP_LOG2: u32 = 127;
/// log2 of the distance between consecutive substreams within a stream.
pub const SUBSTREAM_JUMP_LOG2: u32 = 76;
/// Substreams available inside one stream before it runs into the next.
pub const MAX_SUBSTREAMS: u64 = 1 << (STREAM_JUMP_LOG2 - SUBSTREAM_JUMP_LOG2);

type Mat3 = [[u64; 3]; 3];

const A1: Mat3 = [[0, 1, 0], [0, 0, 1], [M1 - A13N as u64, A12 as u64, 0]];
const A2: Mat3 = [[0, 1, 0], [0, 0, 1], [M2 - A23N as u64, 0, A21 as u64]];

/// State of the two component recurrences, oldest value first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngState {
    s1: [u64; 3],
    s2: [u64; 3],
}

impl RngState {
    /// Builds a state from raw component values.
    ///
    /// Each component must lie in `[0, m)` for its modulus and must not be
    /// the all-zero vector.
    pub fn new(s1: [u64; 3], s2: [u64; 3]) -> Result<Self> {
        if s1.iter().any(|&v| v >= M1) || s1.iter().all(|&v| v == 0) {
            return Err(Error::invalid("s1", format!("{s1:?} is not a valid MRG32k3a component")));
        }
        if s2.iter().any(|&v| v >= M2) || s2.iter().all(|&v| v == 0) {
            return Err(Error::invalid("s2", format!("{s2:?} is not a valid MRG32k3a component")));
        }
        Ok(Self { s1, s2 })
    }

    /// The conventional all-12345 seed.
    pub fn default_seed() -> Self {
        Self {
            s1: [12345; 3],
            s2: [12345; 3],
        }
    }

    /// Derives a valid starting state from a 64-bit master seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let mut draw = |modulus: u64| loop {
            let v = splitmix64(&mut sm) % modulus;
            if v != 0 {
                break v;
            }
        };
        let s1 = [draw(M1), draw(M1), draw(M1)];
        let s2 = [draw(M2), draw(M2), draw(M2)];
        Self { s1, s2 }
    }

    pub fn components(&self) -> ([u64; 3], [u64; 3]) {
        (self.s1, self.s2)
    }

    /// Advances both recurrences one step and returns a uniform in (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        let s1 = self.s1.map(|v| v as i64);
        let p1 = (A12 * s1[1] - A13N * s1[0]).rem_euclid(M1 as i64);
        self.s1 = [self.s1[1], self.s1[2], p1 as u64];

        let s2 = self.s2.map(|v| v as i64);
        let p2 = (A21 * s2[2] - A23N * s2[0]).rem_euclid(M2 as i64);
        self.s2 = [self.s2[1], self.s2[2], p2 as u64];

        let z = if p1 > p2 {
            p1 - p2
        } else {
            p1 - p2 + M1 as i64
        };
        z as f64 / (M1 + 1) as f64
    }

    /// Draws from `N(mean, variance)` by inverting the normal CDF at exactly
    /// one uniform.
    pub fn next_normal(&mut self, mean: f64, variance: f64) -> Result<f64> {
        if !(variance >= 0.0) {
            return Err(Error::invalid("variance", format!("{variance} must be non-negative")));
        }
        let u = self.next_uniform();
        Ok(mean + variance.sqrt() * standard_normal_quantile(u))
    }

    /// Draws an exponential variate with the given mean (one uniform).
    pub fn next_exponential(&mut self, mean: f64) -> f64 {
        -mean * self.next_uniform().ln()
    }

    /// Draws uniformly from `[lo, hi)` (one uniform).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Advances the state by `n` steps.
    pub fn advance(&mut self, n: u64) {
        self.apply(&pow_pair(&(A1, A2), n));
    }

    /// Advances the state by `2^e` steps.
    pub fn jump_pow2(&mut self, e: u32) {
        self.apply(&pow2_pair(e));
    }

    fn apply(&mut self, (b1, b2): &(Mat3, Mat3)) {
        self.s1 = mat_vec(b1, &self.s1, M1);
        self.s2 = mat_vec(b2, &self.s2, M2);
    }
}

/// Quantile of the standard normal distribution.
///
/// `u = 0.5` maps to exactly zero.
pub fn standard_normal_quantile(u: f64) -> f64 {
    if u == 0.5 {
        return 0.0;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// What a stream is used for. Each purpose gets its own block of streams so
/// that, e.g., post-replications never reuse solver randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamPurpose {
    Oracle,
    Tuning,
    PostReplication,
    Harness,
}

impl StreamPurpose {
    fn index(self) -> u64 {
        match self {
            StreamPurpose::Oracle => 0,
            StreamPurpose::Tuning => 1,
            StreamPurpose::PostReplication => 2,
            StreamPurpose::Harness => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub macro_rep: u64,
    pub purpose: StreamPurpose,
    pub point_serial: u64,
}

impl StreamKey {
    pub fn new(macro_rep: u64, purpose: StreamPurpose, point_serial: u64) -> Self {
        Self {
            macro_rep,
            purpose,
            point_serial,
        }
    }
}

/// Starting state of the substream named by `key` under `master_seed`.
///
/// Pure: no global generator is consulted or mutated.
pub fn stream_for(key: StreamKey, master_seed: u64) -> RngState {
    debug_assert!(key.point_serial < MAX_SUBSTREAMS);
    let stream_index = key
        .macro_rep
        .checked_mul(4)
        .and_then(|v| v.checked_add(key.purpose.index()))
        .expect("macro_rep out of range");

    let mut state = RngState::from_seed(master_seed);
    state.apply(&pow_pair(jump_matrices(STREAM_JUMP_LOG2), stream_index));
    state.apply(&pow_pair(jump_matrices(SUBSTREAM_JUMP_LOG2), key.point_serial));
    state
}

fn jump_matrices(e: u32) -> &'static (Mat3, Mat3) {
    static STREAM: OnceLock<(Mat3, Mat3)> = OnceLock::new();
    static SUBSTREAM: OnceLock<(Mat3, Mat3)> = OnceLock::new();
    match e {
        STREAM_JUMP_LOG2 => STREAM.get_or_init(|| pow2_pair(e)),
        SUBSTREAM_JUMP_LOG2 => SUBSTREAM.get_or_init(|| pow2_pair(e)),
        _ => unreachable!("no cached jump matrix for 2^{e}"),
    }
}

fn pow2_pair(e: u32) -> (Mat3, Mat3) {
    let (mut b1, mut b2) = (A1, A2);
    for _ in 0..e {
        b1 = mat_mul(&b1, &b1, M1);
        b2 = mat_mul(&b2, &b2, M2);
    }
    (b1, b2)
}

fn pow_pair((a1, a2): &(Mat3, Mat3), n: u64) -> (Mat3, Mat3) {
    (mat_pow(a1, n, M1), mat_pow(a2, n, M2))
}

fn mat_mul(a: &Mat3, b: &Mat3, m: u64) -> Mat3 {
    let mut out = [[0u64; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let acc: u128 = (0..3).map(|l| a[i][l] as u128 * b[l][j] as u128).sum();
            *cell = (acc % m as u128) as u64;
        }
    }
    out
}

fn mat_vec(a: &Mat3, v: &[u64; 3], m: u64) -> [u64; 3] {
    let mut out = [0u64; 3];
    for (i, cell) in out.iter_mut().enumerate() {
        let acc: u128 = (0..3).map(|l| a[i][l] as u128 * v[l] as u128).sum();
        *cell = (acc % m as u128) as u64;
    }
    out
}

fn mat_pow(a: &Mat3, mut n: u64, m: u64) -> Mat3 {
    let mut result = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut base = *a;
    while n > 0 {
        if n & 1 == 1 {
            result = mat_mul(&result, &base, m);
        }
        base = mat_mul(&base, &base, m);
        n >>= 1;
    }
    result
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
