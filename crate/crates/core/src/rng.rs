//! Deterministic per-realization random streams and the scalar entry laws.
//!
//! Every Monte Carlo realization owns one [`Stream`], addressed by
//! `(master_seed, stream_id)`. Streams are ChaCha8 keystreams: the master seed
//! selects the key and the stream id selects the 64-bit nonce, so two ids never
//! share a prefix and a stream's content does not depend on which thread
//! consumes it or when.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }
}

/// A stateful generator of uniform 64-bit words. Not shared between threads.
#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

pub fn make_stream(seed: SeedSpec) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
    rng.set_stream(seed.stream_id);
    Stream(rng)
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    Rademacher,
    Uniform,
}

impl std::str::FromStr for DistributionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!(
                "unknown distribution {other:?} (expected gaussian, rademacher or uniform)"
            )),
        }
    }
}

/// Mean-zero entry law with standard deviation `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryDistribution {
    pub kind: DistributionKind,
    pub scale: f64,
}

impl EntryDistribution {
    pub fn new(kind: DistributionKind, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(
                "scale",
                format!("must be a positive finite number, got {scale}"),
            ));
        }
        Ok(Self { kind, scale })
    }

    pub fn gaussian(scale: f64) -> Self {
        Self::new(DistributionKind::Gaussian, scale).expect("positive scale")
    }

    pub fn rademacher(scale: f64) -> Self {
        Self::new(DistributionKind::Rademacher, scale).expect("positive scale")
    }

    pub fn uniform(scale: f64) -> Self {
        Self::new(DistributionKind::Uniform, scale).expect("positive scale")
    }

    /// One draw from the law.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, stream: &mut R) -> f64 {
        match self.kind {
            DistributionKind::Gaussian => {
                let g: f64 = stream.sample(StandardNormal);
                g * self.scale
            }
            DistributionKind::Rademacher => {
                if stream.next_u64() >> 63 == 1 {
                    self.scale
                } else {
                    -self.scale
                }
            }
            DistributionKind::Uniform => {
                // 53 random bits give u in [0, 1); the image is [-√3, √3).
                let u = (stream.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                (2.0 * u - 1.0) * 3f64.sqrt() * self.scale
            }
        }
    }
}

pub fn sample(dist: &EntryDistribution, stream: &mut Stream) -> f64 {
    dist.sample(stream)
}

/// Empirical moments of a batch of draws. `variance` uses the unbiased divisor
/// and `fourth_moment` is the raw moment E[X⁴].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub fourth_moment: f64,
}

pub fn moment_check(
    dist: &EntryDistribution,
    n_draws: usize,
    stream: &mut Stream,
) -> Result<Moments> {
    if n_draws < 2 {
        return Err(Error::invalid(
            "n_draws",
            format!("at least 2 draws are required, got {n_draws}"),
        ));
    }
    let draws: Vec<f64> = (0..n_draws).map(|_| dist.sample(stream)).collect();
    let n = n_draws as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let variance = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let fourth_moment = draws.iter().map(|x| (x * x) * (x * x)).sum::<f64>() / n;
    Ok(Moments {
        mean,
        variance,
        fourth_moment,
    })
}
