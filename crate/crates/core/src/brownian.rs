//! Reproducible Brownian increments `(ΔW, ΔZ)` and their exact aggregation.
//!
//! # Stream derivation
//!
//! Every step of every path owns an independent SplitMix64 stream whose key
//! is a hash of `(master_seed, path_index, step_index)`:
//!
//! ```text
//! k₀  = mix64(master_seed + 0x9E3779B97F4A7C15)
//! k₁  = mix64(k₀ ⊕ (path_index · 0xBF58476D1CE4E5B9))
//! key = mix64(k₁ ⊕ (step_index · 0x94D049BB133111EB))
//! output_i = mix64(key + i · 0x9E3779B97F4A7C15),   i = 1, 2, ...
//! ```
//!
//! where `mix64` is the SplitMix64 finaliser. The two standard normals of a
//! step are drawn from that step's stream with the ziggurat sampler of
//! `rand_distr`, so a path can be regenerated, or any single step
//! recomputed, without replaying the others.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const PATH_MUL: u64 = 0xBF58_476D_1CE4_E5B9;
const STEP_MUL: u64 = 0x94D0_49BB_1331_11EB;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64 stream keyed by `(seed, path, step)`.
#[derive(Debug, Clone)]
pub struct StepStream {
    key: u64,
    counter: u64,
}

impl StepStream {
    pub fn new(master_seed: u64, path_index: u64, step_index: u64) -> Self {
        let k0 = mix64(master_seed.wrapping_add(GOLDEN));
        let k1 = mix64(k0 ^ path_index.wrapping_mul(PATH_MUL));
        let key = mix64(k1 ^ step_index.wrapping_mul(STEP_MUL));
        Self { key, counter: 0 }
    }
}

impl RngCore for StepStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Wiener increment `ΔW` and iterated integral `ΔZ = ∫∫ dW ds` over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementPair {
    pub dw: f64,
    pub dz: f64,
    pub dt: f64,
}

impl IncrementPair {
    /// `ΔW = √Δ U₁`, `ΔZ = ½ Δ^{3/2} (U₁ + U₂/√3)` from two standard normals.
    ///
    /// This gives `Var ΔW = Δ`, `Var ΔZ = Δ³/3` and `Cov(ΔW, ΔZ) = Δ²/2`.
    pub fn from_normals(u1: f64, u2: f64, dt: f64) -> Self {
        let sqrt_dt = dt.sqrt();
        Self {
            dw: sqrt_dt * u1,
            dz: 0.5 * dt * sqrt_dt * (u1 + u2 / 3f64.sqrt()),
            dt,
        }
    }
}

pub fn sample_increment_pair<R: Rng + ?Sized>(stream: &mut R, dt: f64) -> Result<IncrementPair> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::parameter(
            "dt",
            format!("step length must be positive, got {dt}"),
        ));
    }
    let u1: f64 = stream.sample(StandardNormal);
    let u2: f64 = stream.sample(StandardNormal);
    Ok(IncrementPair::from_normals(u1, u2, dt))
}

/// Increments of one path on the uniform grid `t_k = k T / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathIncrements {
    pub steps: usize,
    pub horizon: f64,
    pub pairs: Vec<IncrementPair>,
    pub master_seed: u64,
    pub path_index: u64,
}

pub fn generate_path(
    master_seed: u64,
    path_index: u64,
    steps: usize,
    horizon: f64,
) -> Result<PathIncrements> {
    if steps == 0 {
        return Err(Error::parameter("N", "need at least one step"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::parameter("T", "horizon must be positive and finite"));
    }
    let dt = horizon / steps as f64;
    let pairs = (0..steps)
        .map(|k| {
            let mut stream = StepStream::new(master_seed, path_index, k as u64);
            sample_increment_pair(&mut stream, dt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathIncrements {
        steps,
        horizon,
        pairs,
        master_seed,
        path_index,
    })
}

/// Combines `M` consecutive pairs of equal length `δ` into one pair of length
/// `Mδ`:
///
/// ```text
/// ΔW = Σᵢ ΔWᵢ
/// ΔZ = Σᵢ [ΔZᵢ + (Σ_{j<i} ΔWⱼ) δ]
/// ```
pub fn aggregate(fine: &[IncrementPair]) -> Result<IncrementPair> {
    let Some(first) = fine.first() else {
        return Err(Error::parameter("fine", "need at least one pair"));
    };
    let delta = first.dt;
    if fine.iter().any(|p| (p.dt - delta).abs() > 1e-12 * delta) {
        return Err(Error::parameter(
            "fine",
            "all pairs must share one step length",
        ));
    }
    let mut w = 0.0;
    let mut z = 0.0;
    for p in fine {
        z += p.dz + w * delta;
        w += p.dw;
    }
    Ok(IncrementPair {
        dw: w,
        dz: z,
        dt: delta * fine.len() as f64,
    })
}

impl PathIncrements {
    /// The same Brownian path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<PathIncrements> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::parameter(
                "factor",
                format!("{factor} does not divide the {} fine steps", self.steps),
            ));
        }
        let coarse_dt = self.horizon / (self.steps / factor) as f64;
        let pairs = self
            .pairs
            .chunks(factor)
            .map(|chunk| {
                aggregate(chunk).map(|mut p| {
                    p.dt = coarse_dt;
                    p
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PathIncrements {
            steps: self.steps / factor,
            horizon: self.horizon,
            pairs,
            master_seed: self.master_seed,
            path_index: self.path_index,
        })
    }

    /// `W_T − W_0`.
    pub fn total_dw(&self) -> f64 {
        self.pairs.iter().map(|p| p.dw).sum()
    }
}
