//! Seedable random streams and the two noise distributions used by the
//! estimators: continuous Laplace and the two-sided geometric distribution.
//!
//! # Stream derivation
//!
//! A [`RandomStream`] is a `(seed, stream_id)` descriptor. Its draws come
//! from ChaCha20 whose 32-byte key is four consecutive SplitMix64 outputs
//! started from state `seed` (each written little-endian), with the 64-bit
//! ChaCha stream (nonce) set to `stream_id` and the block counter starting
//! at zero. Each `u64` is the little-endian combination of
//! two consecutive 32-bit keystream words, as produced by `rand_chacha`'s
//! `ChaCha20Rng::next_u64`.
//!
//! Uniforms on the open interval `(0, 1)` take the top 53 bits `k` of a
//! `u64` and return `k * 2^-53`, rejecting `k == 0`. The largest value is
//! `1 - 2^-53`, so `1.0` is never produced.
//!
//! Laplace draws use one uniform and the inverse CDF
//! `x = -b * sign(u - 1/2) * ln(1 - 2|u - 1/2|)`.
//!
//! Two-sided geometric draws are the difference `G1 - G2` of two
//! independent geometric variables (failures before the first success,
//! success probability `1 - alpha`), each drawn by inverse CDF as
//! `floor(ln(u) / ln(alpha))`.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{param, Result};

/// Immutable descriptor of a reproducible random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
}

impl RandomStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Opens a fresh cursor positioned at the start of the stream.
    pub fn cursor(&self) -> StreamCursor {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        StreamCursor { rng }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the substream `stream_id` of `seed`.
pub fn derive_stream(seed: u64, stream_id: u64) -> RandomStream {
    RandomStream { seed, stream_id }
}

/// Caller-owned sampling state for one [`RandomStream`]. Not meant to be
/// shared between workers; open one cursor per stream instead.
#[derive(Debug, Clone)]
pub struct StreamCursor {
    rng: ChaCha20Rng,
}

impl StreamCursor {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        loop {
            let k = self.next_u64() >> 11;
            if k != 0 {
                return k as f64 * SCALE;
            }
        }
    }
}

/// Scale `b` of a centered Laplace distribution with density
/// `exp(-|x|/b) / 2b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    scale: f64,
}

impl LaplaceParams {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return param(format!("Laplace scale must be positive and finite, got {scale}"));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.scale * self.scale
    }

    pub fn log_density(&self, x: f64) -> f64 {
        -x.abs() / self.scale - (2.0 * self.scale).ln()
    }

    /// Inverse CDF at `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let d = u - 0.5;
        if d == 0.0 {
            return 0.0;
        }
        -self.scale * d.signum() * (-2.0 * d.abs()).ln_1p()
    }
}

/// Parameter `alpha = exp(-eps)` of the two-sided geometric distribution
/// `Pr[Z = k] = (1 - alpha) / (1 + alpha) * alpha^|k|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricParams {
    alpha: f64,
}

impl GeometricParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return param(format!("geometric alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(Self { alpha })
    }

    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return param(format!("epsilon must be positive and finite, got {eps}"));
        }
        Self::new((-eps).exp())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pmf(&self, k: i64) -> f64 {
        let a = self.alpha;
        (1.0 - a) / (1.0 + a) * a.powf(k.unsigned_abs() as f64)
    }

    /// `2 alpha / (1 - alpha)^2`.
    pub fn variance(&self) -> f64 {
        let a = self.alpha;
        2.0 * a / ((1.0 - a) * (1.0 - a))
    }

    fn one_sided(&self, u: f64) -> i64 {
        // saturating float->int cast covers the alpha -> 1 tail
        (u.ln() / self.alpha.ln()).floor() as i64
    }
}

pub fn laplace_sample(cursor: &mut StreamCursor, params: &LaplaceParams) -> f64 {
    params.quantile(cursor.uniform_open())
}

pub fn two_sided_geometric_sample(cursor: &mut StreamCursor, params: &GeometricParams) -> i64 {
    let g1 = params.one_sided(cursor.uniform_open());
    let g2 = params.one_sided(cursor.uniform_open());
    g1.saturating_sub(g2)
}
