//! Random-matrix ensembles realized as dense real symmetric matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{make_stream, DistributionKind, EntryDistribution, SeedSpec};
use crate::stats::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Symmetric matrix with i.i.d. entries `w(x, y) / √N`, `x ≤ y`.
    Wigner,
    /// Gram matrix `(1/N) Σ_μ ξ_μ ξ_μᵀ` of `m = round(c·N)` Gaussian vectors.
    SampleCovariance,
}

impl std::str::FromStr for EnsembleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "wigner" => Ok(Self::Wigner),
            "sample_covariance" => Ok(Self::SampleCovariance),
            other => Err(format!(
                "unknown ensemble {other:?} (expected wigner or sample_covariance)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub entry_dist: EntryDistribution,
    /// Aspect ratio `m/N`; ignored by the Wigner ensemble.
    pub c: f64,
    pub seed: SeedSpec,
}

impl EnsembleSpec {
    pub fn wigner(n: usize, entry_dist: EntryDistribution, seed: SeedSpec) -> Self {
        Self {
            kind: EnsembleKind::Wigner,
            n,
            entry_dist,
            c: 0.0,
            seed,
        }
    }

    pub fn sample_covariance(n: usize, c: f64, u: f64, seed: SeedSpec) -> Self {
        Self {
            kind: EnsembleKind::SampleCovariance,
            n,
            entry_dist: EntryDistribution::gaussian(u),
            c,
            seed,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self {
            seed: self.seed.with_stream(stream_id),
            ..self
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    /// Number of sample vectors `m = round(c·N)`.
    pub fn sample_count(&self) -> usize {
        (self.c * self.n as f64).round() as usize
    }

    /// Realized `m/N`, which only approximates `c`.
    pub fn realized_ratio(&self) -> f64 {
        self.sample_count() as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("N", "matrix dimension must be at least 1"));
        }
        if !(self.entry_dist.scale.is_finite() && self.entry_dist.scale > 0.0) {
            return Err(Error::invalid("scale", "must be positive and finite"));
        }
        if self.kind == EnsembleKind::SampleCovariance {
            if self.entry_dist.kind != DistributionKind::Gaussian {
                return Err(Error::invalid(
                    "entry_dist",
                    "sample_covariance requires Gaussian entries",
                ));
            }
            if !(self.c.is_finite() && self.c > 0.0) {
                return Err(Error::invalid(
                    "c",
                    format!("must be positive and finite, got {}", self.c),
                ));
            }
            if self.sample_count() == 0 {
                return Err(Error::invalid(
                    "c",
                    format!("round(c·N) = 0 for c = {}, N = {}", self.c, self.n),
                ));
            }
        }
        Ok(())
    }
}

/// Full row-major storage of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetricMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DenseSymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds the matrix from `f(x, y)` evaluated on `x ≥ y` and mirrored.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for x in 0..n {
            for y in 0..=x {
                let v = f(x, y);
                m.entries[x * n + y] = v;
                m.entries[y * n + x] = v;
            }
        }
        m
    }

    /// Wraps row-major storage, rejecting anything not exactly symmetric.
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(
                "entries",
                format!("expected {} values, got {}", n * n, entries.len()),
            ));
        }
        for x in 0..n {
            for y in 0..x {
                if entries[x * n + y].to_bits() != entries[y * n + x].to_bits() {
                    return Err(Error::NotSymmetric { row: x, col: y });
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.n..(x + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        compensated_sum((0..self.n).map(|i| self.get(i, i)))
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|v| v * v))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|x| (0..x).all(|y| self.get(x, y).to_bits() == self.get(y, x).to_bits()))
    }
}

/// Draws one realization of `spec`.
pub fn generate(spec: &EnsembleSpec) -> Result<DenseSymmetricMatrix> {
    spec.validate()?;
    Ok(match spec.kind {
        EnsembleKind::Wigner => wigner(spec),
        EnsembleKind::SampleCovariance => sample_covariance(spec),
    })
}

/// `E[Tr A / N]` for the ensemble.
pub fn expected_trace(spec: &EnsembleSpec) -> f64 {
    match spec.kind {
        EnsembleKind::Wigner => 0.0,
        EnsembleKind::SampleCovariance => spec.c * spec.entry_dist.scale.powi(2),
    }
}

fn wigner(spec: &EnsembleSpec) -> DenseSymmetricMatrix {
    let n = spec.n;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let mut stream = make_stream(spec.seed);
    let mut m = DenseSymmetricMatrix::zeros(n);
    // Draw order: upper triangle row by row, diagonal included.
    for x in 0..n {
        for y in x..n {
            let v = spec.entry_dist.sample(&mut stream) * inv_sqrt_n;
            m.entries[x * n + y] = v;
            m.entries[y * n + x] = v;
        }
    }
    m
}

/// Draws `ξ_μ(x)` for `μ = 1..m`, `x = 1..N` in that order; row μ of the
/// returned `m × N` factor is the vector `ξ_μ`.
pub(crate) fn draw_factor(spec: &EnsembleSpec) -> Vec<f64> {
    let n = spec.n;
    let m = spec.sample_count();
    let mut stream = make_stream(spec.seed);
    (0..m * n)
        .map(|_| spec.entry_dist.sample(&mut stream))
        .collect()
}

const TILE_ROWS: usize = 32;
const TILE_COLS: usize = 256;

fn sample_covariance(spec: &EnsembleSpec) -> DenseSymmetricMatrix {
    let n = spec.n;
    let factor = draw_factor(spec);
    let m = spec.sample_count();
    let norm = n as f64;
    let mut out = DenseSymmetricMatrix::zeros(n);

    // Tiled rank-one accumulation. Each entry is summed over μ in increasing
    // order starting from zero, so the result is bit-identical to adding the
    // outer products ξ_μ ξ_μᵀ one at a time.
    let mut acc = vec![0.0f64; TILE_ROWS * TILE_COLS];
    for x0 in (0..n).step_by(TILE_ROWS) {
        let x1 = (x0 + TILE_ROWS).min(n);
        for y0 in (0..x1).step_by(TILE_COLS) {
            let y1 = (y0 + TILE_COLS).min(x1);
            let width = y1 - y0;
            acc[..(x1 - x0) * TILE_COLS].fill(0.0);
            for mu in 0..m {
                let row = &factor[mu * n..(mu + 1) * n];
                let ys = &row[y0..y1];
                for (tx, &a) in row[x0..x1].iter().enumerate() {
                    let dst = &mut acc[tx * TILE_COLS..tx * TILE_COLS + width];
                    for (d, &b) in dst.iter_mut().zip(ys) {
                        *d += a * b;
                    }
                }
            }
            for x in x0..x1 {
                let src = &acc[(x - x0) * TILE_COLS..];
                for y in y0..y1.min(x + 1) {
                    let v = src[y - y0] / norm;
                    out.entries[x * n + y] = v;
                    out.entries[y * n + x] = v;
                }
            }
        }
    }
    out
}
