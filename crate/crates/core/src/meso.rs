//! Smoothed eigenvalue density at mesoscopic resolution `η = N^(−α)` and the
//! Monte Carlo statistics of its fluctuations.
//!
//! A realization is generated, diagonalized and immediately reduced to the
//! handful of numbers an experiment needs; matrices never outlive the worker
//! that built them. Realization `r` always draws from stream `r` (plus a
//! per-study base), and results land in index-addressed slots, so every batch
//! is a pure function of the seed, the grid and the realization count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{spectrum, SpectrumSample};
use crate::ensembles::{generate, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::laws::{covariance_kernel, LimitingLaw};
use crate::stats::{self, linear_fit, LinearFit, Table};

/// Realization count below which covariance standard errors are not trusted.
pub const MIN_REALIZATIONS: usize = 30;

/// Fraction of the support width excluded at each edge of a bulk grid.
pub const BULK_MARGIN: f64 = 0.1;

/// `η = N^(−α)`.
pub fn resolution(n: usize, alpha: f64) -> f64 {
    (n as f64).powf(-alpha)
}

/// Limiting law of an ensemble at its nominal parameters.
pub fn limiting_law(spec: &EnsembleSpec) -> LimitingLaw {
    match spec.kind {
        EnsembleKind::Wigner => LimitingLaw::Semicircle {
            v: spec.entry_dist.scale,
        },
        EnsembleKind::SampleCovariance => LimitingLaw::MarchenkoPastur {
            c: spec.c,
            u: spec.entry_dist.scale,
        },
    }
}

/// Evaluation points `λ_i = λ + τ_i N^(−α)` sharing one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoGrid {
    pub lambda0: f64,
    pub alpha: f64,
    pub offsets: Vec<f64>,
    pub n: usize,
}

impl MesoGrid {
    pub fn new(lambda0: f64, alpha: f64, offsets: Vec<f64>, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in (0, 1), got {alpha}"),
            ));
        }
        if !lambda0.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        if offsets.is_empty() || offsets.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("offsets", "need at least one finite offset"));
        }
        if n == 0 {
            return Err(Error::invalid("N", "matrix dimension must be at least 1"));
        }
        Ok(Self {
            lambda0,
            alpha,
            offsets,
            n,
        })
    }

    pub fn eta(&self) -> f64 {
        resolution(self.n, self.alpha)
    }

    pub fn points(&self) -> Vec<f64> {
        let eta = self.eta();
        self.offsets
            .iter()
            .map(|t| self.lambda0 + t * eta)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `(1/N) Σ_j η/((λ − λ_j)² + η²)` with `η = N^(−α)`.
pub fn smoothed_density(sample: &SpectrumSample, lambda: f64, alpha: f64) -> f64 {
    smoothed_density_at(sample, lambda, resolution(sample.len(), alpha))
}

/// The Cauchy-smoothed density at an explicit resolution `η`.
pub fn smoothed_density_at(sample: &SpectrumSample, lambda: f64, eta: f64) -> f64 {
    let eta2 = eta * eta;
    let sum: f64 = sample
        .eigenvalues
        .iter()
        .map(|&l| {
            let d = lambda - l;
            eta / (d * d + eta2)
        })
        .sum();
    sum / sample.len() as f64
}

/// Fraction of eigenvalues `≤ λ`.
pub fn empirical_cdf(sample: &SpectrumSample, lambda: f64) -> f64 {
    let below = sample.eigenvalues.partition_point(|&l| l <= lambda);
    below as f64 / sample.len() as f64
}

/// Runs `count` realizations on streams `stream_base + r` and maps each
/// spectrum through `reduce`. Output order is realization order.
pub fn map_realizations<T, F>(
    ensemble: &EnsembleSpec,
    count: usize,
    stream_base: u64,
    reduce: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SpectrumSample) -> T + Sync,
{
    ensemble.validate()?;
    (0..count)
        .into_par_iter()
        .map(|r| {
            let stream_id = stream_base + r as u64;
            let spec = ensemble.with_stream(stream_id);
            let sample =
                generate(&spec)
                    .and_then(|a| spectrum(&a))
                    .map_err(|e| Error::Realization {
                        stream_id,
                        source: Box::new(e),
                    })?;
            Ok(reduce(&sample.with_source(spec)))
        })
        .collect()
}

/// `M × k` smoothed-density values, one row per realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationBatch {
    pub values: Table,
    pub grid: MesoGrid,
    pub ensemble: EnsembleSpec,
    pub m: usize,
}

pub fn run_batch(ensemble: &EnsembleSpec, grid: &MesoGrid, m: usize) -> Result<FluctuationBatch> {
    if m == 0 {
        return Err(Error::invalid("M", "need at least one realization"));
    }
    if grid.n != ensemble.n {
        return Err(Error::invalid(
            "N",
            format!(
                "grid is for N = {} but the ensemble has N = {}",
                grid.n, ensemble.n
            ),
        ));
    }
    let points = grid.points();
    let eta = grid.eta();
    let rows = map_realizations(ensemble, m, 0, |s| {
        points
            .iter()
            .map(|&l| smoothed_density_at(s, l, eta))
            .collect::<Vec<_>>()
    })?;
    Ok(FluctuationBatch {
        values: Table::from_rows(m, points.len(), rows.concat()),
        grid: grid.clone(),
        ensemble: *ensemble,
        m,
    })
}

/// `γ = N^(1−α) (R − mean R)` per grid point, centred on the column means.
pub fn fluctuations(batch: &FluctuationBatch) -> Result<Table> {
    let (m, k) = (batch.values.rows(), batch.values.cols());
    if m < 2 {
        return Err(Error::invalid(
            "M",
            "centering needs at least two realizations",
        ));
    }
    let scale = (batch.grid.n as f64).powf(1.0 - batch.grid.alpha);
    let mut out = Table::zeros(m, k);
    for c in 0..k {
        let col: Vec<f64> = batch.values.column(c).collect();
        let mean = stats::mean(&col);
        for (r, v) in col.iter().enumerate() {
            out.set(r, c, scale * (v - mean));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub offsets: Vec<f64>,
    pub estimate: Table,
    pub standard_errors: Table,
    pub predicted: Table,
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    pub m: usize,
}

impl CovarianceReport {
    pub fn k(&self) -> usize {
        self.offsets.len()
    }

    /// Whether every entry lies within `max(sigmas·SE, floor)` of `target`.
    pub fn entries_within(&self, target: &Table, sigmas: f64, floor: f64) -> bool {
        (0..self.k()).all(|i| {
            (0..self.k()).all(|j| {
                let band = (sigmas * self.standard_errors.get(i, j)).max(floor);
                (self.estimate.get(i, j) - target.get(i, j)).abs() <= band
            })
        })
    }

    /// `3·√(6/M)`.
    pub fn skewness_band(&self) -> f64 {
        3.0 * (6.0 / self.m as f64).sqrt()
    }

    /// `3·√(24/M)`.
    pub fn kurtosis_band(&self) -> f64 {
        3.0 * (24.0 / self.m as f64).sqrt()
    }

    pub fn gaussian_within_bands(&self) -> bool {
        let (sb, kb) = (self.skewness_band(), self.kurtosis_band());
        self.skewness.iter().all(|s| s.abs() <= sb)
            && self.excess_kurtosis.iter().all(|k| k.abs() <= kb)
    }
}

/// Sample covariance (divisor `M − 1`) of the columns of `gamma`, asymptotic
/// Gaussian standard errors, kernel predictions and per-column skewness and
/// excess kurtosis.
pub fn covariance_report(gamma: &Table, grid: &MesoGrid) -> Result<CovarianceReport> {
    covariance_report_with_min(gamma, grid, MIN_REALIZATIONS)
}

pub fn covariance_report_with_min(
    gamma: &Table,
    grid: &MesoGrid,
    min_realizations: usize,
) -> Result<CovarianceReport> {
    let (m, k) = (gamma.rows(), gamma.cols());
    if m < min_realizations.max(2) {
        return Err(Error::invalid(
            "M",
            format!("{m} realizations is below the minimum of {min_realizations}"),
        ));
    }
    if k != grid.len() {
        return Err(Error::invalid(
            "offsets",
            format!(
                "table has {k} columns but the grid has {} offsets",
                grid.len()
            ),
        ));
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|c| gamma.column(c).collect()).collect();
    let means: Vec<f64> = columns.iter().map(|c| stats::mean(c)).collect();
    let centred: Vec<Vec<f64>> = columns
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| x - mu).collect())
        .collect();

    let mf = m as f64;
    let mut estimate = Table::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let v = s / (mf - 1.0);
            estimate.set(i, j, v);
            estimate.set(j, i, v);
        }
    }
    let mut standard_errors = Table::zeros(k, k);
    let mut predicted = Table::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let (cii, cjj, cij) = (estimate.get(i, i), estimate.get(j, j), estimate.get(i, j));
            standard_errors.set(i, j, ((cii * cjj + cij * cij) / (mf - 1.0)).sqrt());
            predicted.set(i, j, covariance_kernel(grid.offsets[i], grid.offsets[j]));
        }
    }

    let mut skewness = Vec::with_capacity(k);
    let mut excess_kurtosis = Vec::with_capacity(k);
    for c in &centred {
        let m2 = c.iter().map(|x| x * x).sum::<f64>() / mf;
        let m3 = c.iter().map(|x| x * x * x).sum::<f64>() / mf;
        let m4 = c.iter().map(|x| (x * x) * (x * x)).sum::<f64>() / mf;
        if m2 > 0.0 {
            skewness.push(m3 / m2.powf(1.5));
            excess_kurtosis.push(m4 / (m2 * m2) - 3.0);
        } else {
            // Degenerate column: no shape information.
            skewness.push(0.0);
            excess_kurtosis.push(0.0);
        }
    }

    Ok(CovarianceReport {
        offsets: grid.offsets.clone(),
        estimate,
        standard_errors,
        predicted,
        skewness,
        excess_kurtosis,
        m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub alpha: f64,
    pub lambda: f64,
    pub points: Vec<ScalingPoint>,
    pub fit: LinearFit,
    /// `2α − 2`.
    pub reference_slope: f64,
}

/// Least-squares slope of `log Var R` against `log N`.
pub fn variance_scaling_study(
    template: &EnsembleSpec,
    alpha: f64,
    lambda: f64,
    n_list: &[usize],
    m: usize,
) -> Result<ScalingStudy> {
    let mut studies = variance_scaling_studies(template, &[alpha], lambda, n_list, m)?;
    Ok(studies.remove(0))
}

/// Several exponents evaluated on the same spectra.
pub fn variance_scaling_studies(
    template: &EnsembleSpec,
    alphas: &[f64],
    lambda: f64,
    n_list: &[usize],
    m: usize,
) -> Result<Vec<ScalingStudy>> {
    let mut distinct = n_list.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::invalid(
            "N_list",
            "need at least three distinct matrix sizes",
        ));
    }
    if m < 2 {
        return Err(Error::invalid(
            "M",
            "a variance needs at least two realizations",
        ));
    }
    if let Some(&a) = alphas.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1), got {a}"),
        ));
    }

    // per_n[size][alpha] = samples of R
    let mut per_n: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let spec = template.with_n(n);
        let etas: Vec<f64> = alphas.iter().map(|&a| resolution(n, a)).collect();
        let rows = map_realizations(&spec, m, (idx as u64) << 32, |s| {
            etas.iter()
                .map(|&eta| smoothed_density_at(s, lambda, eta))
                .collect::<Vec<_>>()
        })?;
        per_n.push(
            (0..alphas.len())
                .map(|a| rows.iter().map(|r| r[a]).collect())
                .collect(),
        );
    }

    Ok(alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let points: Vec<ScalingPoint> = n_list
                .iter()
                .zip(&per_n)
                .map(|(&n, samples)| ScalingPoint {
                    n,
                    mean: stats::mean(&samples[a]),
                    variance: stats::variance(&samples[a]),
                })
                .collect();
            let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
            let y: Vec<f64> = points.iter().map(|p| p.variance.ln()).collect();
            ScalingStudy {
                alpha,
                lambda,
                fit: linear_fit(&x, &y),
                points,
                reference_slope: 2.0 * alpha - 2.0,
            }
        })
        .collect())
}

/// `points` evenly spaced values covering the law's support with
/// [`BULK_MARGIN`] of the width removed at each edge.
pub fn bulk_grid(law: &LimitingLaw, points: usize) -> Vec<f64> {
    let (lo, hi) = law.support().inset(BULK_MARGIN);
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Whether `lambda` lies in the margin-inset bulk (with a little rounding slack).
pub fn in_bulk(law: &LimitingLaw, lambda: f64) -> bool {
    let (lo, hi) = law.support().inset(BULK_MARGIN);
    let slack = 1e-12 * law.support().width();
    lambda >= lo - slack && lambda <= hi + slack
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub lambda: f64,
    pub r_mean: f64,
    pub r_stderr: f64,
    pub analytic_pi_rho: f64,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Mean smoothed density over `m` realizations at each of `lambdas`, against
/// `π ρ(λ)` of the ensemble's limiting law.
pub fn density_profile(
    ensemble: &EnsembleSpec,
    lambdas: &[f64],
    alpha: f64,
    m: usize,
) -> Result<Vec<DensityPoint>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1), got {alpha}"),
        ));
    }
    if m == 0 {
        return Err(Error::invalid("M", "need at least one realization"));
    }
    let eta = resolution(ensemble.n, alpha);
    let rows = map_realizations(ensemble, m, 0, |s| {
        lambdas
            .iter()
            .map(|&l| smoothed_density_at(s, l, eta))
            .collect::<Vec<_>>()
    })?;
    let law = limiting_law(ensemble);
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let samples: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let r_mean = stats::mean(&samples);
            let r_stderr = if m > 1 {
                (stats::variance(&samples) / m as f64).sqrt()
            } else {
                0.0
            };
            let analytic_pi_rho = PI * law.density(lambda);
            let abs_error = (r_mean - analytic_pi_rho).abs();
            DensityPoint {
                lambda,
                r_mean,
                r_stderr,
                analytic_pi_rho,
                abs_error,
                rel_error: abs_error / analytic_pi_rho,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::resolvent_trace_oracle;
    use crate::rng::{EntryDistribution, SeedSpec};
    use num_complex::Complex64;

    fn sample(vals: &[f64]) -> SpectrumSample {
        SpectrumSample::from_eigenvalues(vals.to_vec())
    }

    fn wigner(n: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec::wigner(n, EntryDistribution::gaussian(1.0), SeedSpec::new(seed, 0))
    }

    #[test]
    fn single_atom_at_the_evaluation_point() {
        assert_eq!(smoothed_density(&sample(&[0.0]), 0.0, 0.5), 1.0);
    }

    #[test]
    fn two_atoms() {
        // N = 2 with α = 0 would give η = 1; use the explicit resolution.
        assert_eq!(smoothed_density_at(&sample(&[-1.0, 1.0]), 0.0, 1.0), 0.5);
    }

    #[test]
    fn matches_resolvent_oracle() {
        let spec = wigner(32, 3);
        let a = generate(&spec).unwrap();
        let s = spectrum(&a).unwrap();
        let g = resolvent_trace_oracle(&a, Complex64::new(0.3, 0.1)).unwrap();
        assert!((smoothed_density_at(&s, 0.3, 0.1) - g.im).abs() < 1e-9);
        let alpha = 0.4;
        let eta = resolution(32, alpha);
        let g = resolvent_trace_oracle(&a, Complex64::new(-0.7, eta)).unwrap();
        assert!((smoothed_density(&s, -0.7, alpha) - g.im).abs() < 1e-9);
    }

    #[test]
    fn total_mass_is_pi() {
        let s = spectrum(&generate(&wigner(16, 1)).unwrap()).unwrap();
        let r = crate::quadrature::integrate_real_line(|x| smoothed_density(&s, x, 0.5), 1e-10);
        assert!((r.value - PI).abs() < 1e-3, "{}", r.value);
        let wide = crate::quadrature::integrate(|x| smoothed_density(&s, x, 0.5), -2e3, 2e3, 1e-9);
        assert!((wide.value - PI).abs() < 1e-3, "{}", wide.value);
    }

    #[test]
    fn continuous_in_alpha() {
        let s = spectrum(&generate(&wigner(64, 2)).unwrap()).unwrap();
        let values: Vec<f64> = (1..100)
            .map(|i| smoothed_density(&s, 0.1, i as f64 / 100.0))
            .collect();
        let max_jump = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        // dR/dα is bounded by |ln N|·max R over the grid; a step of 0.01 in α
        // moves R by a small fraction of its size.
        let bound = 0.01 * (64f64).ln() * values.iter().cloned().fold(0.0, f64::max) * 2.0;
        assert!(max_jump <= bound, "{max_jump} > {bound}");
    }

    #[test]
    fn cdf_edges() {
        let s = sample(&[-1.0, 0.0, 2.0, 3.0]);
        assert_eq!(empirical_cdf(&s, -5.0), 0.0);
        assert_eq!(empirical_cdf(&s, 10.0), 1.0);
        assert_eq!(empirical_cdf(&s, 0.0), 0.5);
    }

    #[test]
    fn cdf_counts_null_space() {
        let spec = EnsembleSpec::sample_covariance(4, 0.5, 1.0, SeedSpec::new(1, 0));
        let s = spectrum(&generate(&spec).unwrap()).unwrap();
        assert!(empirical_cdf(&s, 1e-8) >= 0.5);
    }

    #[test]
    fn single_realization_batch() {
        let spec = wigner(24, 5);
        let grid = MesoGrid::new(0.2, 0.5, vec![0.0], 24).unwrap();
        let batch = run_batch(&spec, &grid, 1).unwrap();
        let s = spectrum(&generate(&spec.with_stream(0)).unwrap()).unwrap();
        assert_eq!(batch.values.get(0, 0), smoothed_density(&s, 0.2, 0.5));
    }

    #[test]
    fn batch_is_deterministic_and_worker_independent() {
        let spec = EnsembleSpec::sample_covariance(20, 1.5, 1.0, SeedSpec::new(44, 0));
        let grid = MesoGrid::new(2.5, 0.25, vec![0.0, 1.0, 2.0], 20).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        let a = single.install(|| run_batch(&spec, &grid, 8)).unwrap();
        let b = many.install(|| run_batch(&spec, &grid, 8)).unwrap();
        let c = run_batch(&spec, &grid, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn batch_entries_are_positive() {
        let spec = wigner(16, 9);
        let grid = MesoGrid::new(0.0, 0.5, vec![-3.0, 0.0, 40.0], 16).unwrap();
        let batch = run_batch(&spec, &grid, 5).unwrap();
        assert!(batch.values.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn batch_rejects_mismatched_grid() {
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0], 10).unwrap();
        assert!(run_batch(&wigner(12, 0), &grid, 3).is_err());
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0], 12).unwrap();
        assert!(run_batch(&wigner(12, 0), &grid, 0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(MesoGrid::new(0.0, 1.0, vec![0.0], 8).is_err());
        assert!(MesoGrid::new(0.0, 0.0, vec![0.0], 8).is_err());
        assert!(MesoGrid::new(0.0, 0.5, vec![], 8).is_err());
        let g = MesoGrid::new(1.0, 0.5, vec![0.0, 2.0], 16).unwrap();
        assert_eq!(g.eta(), 0.25);
        assert_eq!(g.points(), vec![1.0, 1.5]);
    }

    fn synthetic_batch(values: Vec<f64>, k: usize, n: usize, alpha: f64) -> FluctuationBatch {
        let m = values.len() / k;
        FluctuationBatch {
            values: Table::from_rows(m, k, values),
            grid: MesoGrid::new(0.0, alpha, (0..k).map(|i| i as f64).collect(), n).unwrap(),
            ensemble: wigner(n, 0),
            m,
        }
    }

    #[test]
    fn two_point_centering() {
        let batch = synthetic_batch(vec![3.0, 1.0], 1, 16, 0.5);
        let g = fluctuations(&batch).unwrap();
        assert_eq!(g.get(0, 0), 4.0);
        assert_eq!(g.get(1, 0), -4.0);
    }

    #[test]
    fn constant_column_centres_to_zero() {
        let batch = synthetic_batch(vec![0.1, 0.7, 0.1, 0.3, 0.1, 0.2], 2, 9, 0.3);
        let g = fluctuations(&batch).unwrap();
        assert!(g.column(0).all(|v| v == 0.0));
        assert!(fluctuations(&synthetic_batch(vec![1.0], 1, 4, 0.5)).is_err());
    }

    #[test]
    fn centred_columns_sum_to_zero() {
        let spec = wigner(20, 13);
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0, 1.0, 3.0], 20).unwrap();
        let g = fluctuations(&run_batch(&spec, &grid, 40).unwrap()).unwrap();
        let max = g.as_slice().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for c in 0..3 {
            let s: f64 = g.column(c).sum();
            assert!(s.abs() <= 1e-10 * 40.0 * max);
            assert!((s / 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alternating_column_report() {
        let m = 40;
        let gamma = Table::from_rows(
            m,
            1,
            (0..m)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        );
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0], 64).unwrap();
        let r = covariance_report(&gamma, &grid).unwrap();
        assert!((r.estimate.get(0, 0) - m as f64 / (m as f64 - 1.0)).abs() < 1e-14);
        assert_eq!(r.skewness[0], 0.0);
        assert!((r.excess_kurtosis[0] + 2.0).abs() < 1e-14);
        assert_eq!(r.predicted.get(0, 0), 0.25);
        assert!(r.standard_errors.get(0, 0) > 0.0);
    }

    #[test]
    fn report_requires_minimum_realizations() {
        let gamma = Table::zeros(10, 1);
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0], 64).unwrap();
        assert!(covariance_report(&gamma, &grid).is_err());
        assert!(covariance_report_with_min(&gamma, &grid, 5).is_ok());
    }

    #[test]
    fn predicted_zero_at_separation_two() {
        let gamma = Table::from_rows(30, 2, (0..60).map(|i| (i as f64 * 0.37).sin()).collect());
        let grid = MesoGrid::new(0.0, 0.5, vec![0.0, 2.0], 64).unwrap();
        let r = covariance_report(&gamma, &grid).unwrap();
        assert_eq!(r.predicted.get(0, 1), 0.0);
        assert_eq!(r.estimate.get(0, 1), r.estimate.get(1, 0));
    }

    #[test]
    fn scaling_needs_three_sizes() {
        assert!(variance_scaling_study(&wigner(8, 0), 0.5, 0.0, &[8, 16, 16], 4).is_err());
    }

    #[test]
    fn bulk_grid_respects_margin() {
        let law = LimitingLaw::MarchenkoPastur { c: 2.0, u: 1.0 };
        let g = bulk_grid(&law, 21);
        assert_eq!(g.len(), 21);
        assert!(g.iter().all(|&l| in_bulk(&law, l)));
        assert!(!in_bulk(&law, 0.3));
        let semi = bulk_grid(&LimitingLaw::Semicircle { v: 1.0 }, 21);
        assert!(semi[10].abs() < 1e-15);
    }
}
