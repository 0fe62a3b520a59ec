//! Full-spectrum eigenvalues of dense real symmetric matrices.
//!
//! Householder reduction to tridiagonal form followed by implicit-shift QL
//! iteration. No eigenvectors are formed. [`ResolventOracle`] evaluates
//! `Tr (A − z)⁻¹ / N` by complex elimination on `A` itself and shares no code
//! with the eigenvalue path, which is what makes it usable as a cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::{DenseSymmetricMatrix, EnsembleSpec};
use crate::error::{Error, Result};
use crate::stats::compensated_sum;

/// Default sweep budget per eigenvalue.
pub const DEFAULT_MAX_SWEEPS: usize = 30;

/// Relative budget for the trace and Frobenius identities, per unit dimension.
pub const IDENTITY_BUDGET: f64 = 1e-10;

/// Sorted eigenvalues of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<f64>,
    pub source_spec: Option<EnsembleSpec>,
    pub solver_iterations: usize,
}

impl SpectrumSample {
    /// A sample built directly from eigenvalues (sorted here).
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            source_spec: None,
            solver_iterations: 0,
        }
    }

    pub fn with_source(self, spec: EnsembleSpec) -> Self {
        Self {
            source_spec: Some(spec),
            ..self
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `(1/N) Σ_j 1/(λ_j − z)`.
    pub fn resolvent_trace(&self, z: Complex64) -> Complex64 {
        let sum: Complex64 = self.eigenvalues.iter().map(|&l| (l - z).inv()).sum();
        sum / self.len() as f64
    }
}

/// Orthogonal reduction of `a` to a symmetric tridiagonal matrix.
///
/// Returns `(diagonal, off_diagonal)` of lengths `N` and `N − 1`. The sign of
/// each off-diagonal entry follows the Householder convention and may differ
/// from the input when `a` is already tridiagonal.
pub fn tridiagonalize(a: &DenseSymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    // Working copy of the lower triangle, packed row by row: row i holds
    // columns 0..=i starting at i(i+1)/2.
    let mut low: Vec<f64> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        low.extend_from_slice(&a.row(i)[..=i]);
    }
    let start = |i: usize| i * (i + 1) / 2;

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        diag[k] = low[start(k) + k];
        // Column k below the diagonal.
        let len = n - k - 1;
        for (t, vt) in v[..len].iter_mut().enumerate() {
            *vt = low[start(k + 1 + t) + k];
        }
        let x0 = v[0];
        let tail_sq: f64 = v[1..len].iter().map(|x| x * x).sum();
        if tail_sq == 0.0 {
            off[k] = x0;
            continue;
        }
        let norm = (x0 * x0 + tail_sq).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        off[k] = alpha;
        v[0] = x0 - alpha;
        // H = I − β v vᵀ with β = 2 / vᵀv.
        let beta = 2.0 / (v[0] * v[0] + tail_sq);

        // p = β · A22 v using the packed lower triangle of the trailing block.
        let vs = &v[..len];
        let ps = &mut p[..len];
        ps.fill(0.0);
        for i in 0..len {
            let row = &low[start(k + 1 + i) + k + 1..start(k + 1 + i) + k + 1 + i + 1];
            let vi = vs[i];
            let mut dot = 0.0;
            for (j, &aij) in row[..i].iter().enumerate() {
                dot += aij * vs[j];
                ps[j] += aij * vi;
            }
            ps[i] += dot + row[i] * vi;
        }
        let mut pv = 0.0;
        for (pi, &vi) in ps.iter_mut().zip(vs) {
            *pi *= beta;
            pv += *pi * vi;
        }
        // w = p − (β/2)(pᵀv) v, then A22 ← A22 − v wᵀ − w vᵀ.
        let half = 0.5 * beta * pv;
        for (pi, &vi) in ps.iter_mut().zip(vs) {
            *pi -= half * vi;
        }
        let ws = &p[..len];
        for i in 0..len {
            let base = start(k + 1 + i) + k + 1;
            let row = &mut low[base..base + i + 1];
            let (vi, wi) = (vs[i], ws[i]);
            for ((aij, &vj), &wj) in row.iter_mut().zip(&vs[..=i]).zip(&ws[..=i]) {
                *aij -= vi * wj + wi * vj;
            }
        }
    }
    diag[n - 1] = low[start(n - 1) + n - 1];
    (diag, off)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e`, sorted ascending.
pub fn eigenvalues_tridiagonal(d: &[f64], e: &[f64], max_sweeps: usize) -> Result<Vec<f64>> {
    tridiagonal_ql(d, e, max_sweeps).map(|(vals, _)| vals)
}

/// Implicit QL with Wilkinson shifts; also returns the total sweep count.
fn tridiagonal_ql(d: &[f64], e: &[f64], max_sweeps: usize) -> Result<(Vec<f64>, usize)> {
    let n = d.len();
    if n == 0 {
        if !e.is_empty() {
            return Err(Error::invalid("off_diagonal", "must be empty when N = 0"));
        }
        return Ok((Vec::new(), 0));
    }
    if e.len() != n - 1 {
        return Err(Error::invalid(
            "off_diagonal",
            format!("expected {} entries, got {}", n - 1, e.len()),
        ));
    }
    if max_sweeps == 0 {
        return Err(Error::invalid("max_sweeps", "must be at least 1"));
    }
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut total = 0;
    // Eigenvalues that are zero up to rounding cannot meet the purely local
    // test, so a neighbour sum below the matrix scale is floored at it.
    let scale = d
        .iter()
        .zip(&e)
        .fold(0.0f64, |acc, (di, ei)| acc.max(di.abs() + ei.abs()));

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = (d[m].abs() + d[m + 1].abs()).max(scale);
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if sweeps == max_sweeps {
                return Err(Error::NoConvergence {
                    index: l,
                    max_sweeps,
                });
            }
            sweeps += 1;
            total += 1;

            // Shift from the trailing 2×2 block at l.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok((d, total))
}

/// All eigenvalues of `a`, checked against the trace and Frobenius identities.
pub fn spectrum(a: &DenseSymmetricMatrix) -> Result<SpectrumSample> {
    let (d, e) = tridiagonalize(a);
    let (eigenvalues, solver_iterations) = tridiagonal_ql(&d, &e, DEFAULT_MAX_SWEEPS.max(1))?;

    let n = a.dim() as f64;
    let max_abs = a.max_abs();
    let trace_gap = (compensated_sum(eigenvalues.iter().copied()) - a.trace()).abs();
    let trace_budget = IDENTITY_BUDGET * n * max_abs;
    if trace_gap > trace_budget {
        return Err(Error::InvariantViolation {
            identity: "trace",
            discrepancy: trace_gap,
            budget: trace_budget,
        });
    }
    let frob_gap =
        (compensated_sum(eigenvalues.iter().map(|l| l * l)) - a.frobenius_norm_sq()).abs();
    let frob_budget = IDENTITY_BUDGET * n * max_abs * max_abs;
    if frob_gap > frob_budget {
        return Err(Error::InvariantViolation {
            identity: "Frobenius",
            discrepancy: frob_gap,
            budget: frob_budget,
        });
    }
    Ok(SpectrumSample {
        eigenvalues,
        source_spec: None,
        solver_iterations,
    })
}

/// Default largest dimension accepted by the resolvent oracle.
pub const DEFAULT_ORACLE_CAP: usize = 128;

/// Direct `Tr (A − z)⁻¹ / N` by complex Gaussian elimination, O(N³) per `z`.
#[derive(Debug, Clone, Copy)]
pub struct ResolventOracle {
    pub cap: usize,
}

impl Default for ResolventOracle {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl ResolventOracle {
    pub fn with_cap(cap: usize) -> Self {
        Self { cap }
    }

    pub fn trace(&self, a: &DenseSymmetricMatrix, z: Complex64) -> Result<Complex64> {
        let n = a.dim();
        if n == 0 {
            return Err(Error::invalid("N", "matrix dimension must be at least 1"));
        }
        if n > self.cap {
            return Err(Error::invalid(
                "N",
                format!("{n} exceeds the resolvent oracle cap {}", self.cap),
            ));
        }
        if z.im.is_nan() || z.im <= 0.0 {
            return Err(Error::invalid(
                "z",
                format!("imaginary part must be positive, got {}", z.im),
            ));
        }

        // LU with partial pivoting of M = A − z I, stored row-major.
        let mut lu: Vec<Complex64> = a
            .as_slice()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        for i in 0..n {
            lu[i * n + i] -= z;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&r1, &r2| lu[r1 * n + col].norm().total_cmp(&lu[r2 * n + col].norm()))
                .unwrap();
            if lu[pivot_row * n + col].norm() == 0.0 {
                return Err(Error::SingularPivot { column: col });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor != Complex64::new(0.0, 0.0) {
                    for j in col + 1..n {
                        let u = lu[col * n + j];
                        lu[r * n + j] -= factor * u;
                    }
                }
            }
        }

        // Column i of M⁻¹ solves M x = e_i; only x_i contributes to the trace.
        // With P M = L U, the right-hand side is P e_i.
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for (k, r) in rhs.iter_mut().enumerate() {
                *r = if perm[k] == i {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            for r in 0..n {
                let mut acc = rhs[r];
                for (c, &x) in rhs[..r].iter().enumerate() {
                    acc -= lu[r * n + c] * x;
                }
                rhs[r] = acc;
            }
            for r in (0..n).rev() {
                let mut acc = rhs[r];
                for c in r + 1..n {
                    acc -= lu[r * n + c] * rhs[c];
                }
                rhs[r] = acc / lu[r * n + r];
            }
            sum += rhs[i];
        }
        Ok(sum / n as f64)
    }
}

/// [`ResolventOracle::trace`] with the default dimension cap.
pub fn resolvent_trace_oracle(a: &DenseSymmetricMatrix, z: Complex64) -> Result<Complex64> {
    ResolventOracle::default().trace(a, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::generate;
    use crate::rng::{make_stream, EntryDistribution, SeedSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseSymmetricMatrix {
        let mut s = make_stream(SeedSpec::new(seed, 99));
        DenseSymmetricMatrix::from_lower_fn(n, |_, _| s.random_range(-1.0..1.0))
    }

    fn tridiagonal(d: &[f64], e: &[f64]) -> DenseSymmetricMatrix {
        let n = d.len();
        DenseSymmetricMatrix::from_lower_fn(n, |x, y| {
            if x == y {
                d[x]
            } else if x == y + 1 {
                e[y]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn two_by_two_analytic() {
        let vals = eigenvalues_tridiagonal(&[0.0, 0.0], &[1.0], 30).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_by_one() {
        assert_eq!(eigenvalues_tridiagonal(&[3.5], &[], 30).unwrap(), vec![3.5]);
    }

    #[test]
    fn three_by_three_analytic() {
        let vals = eigenvalues_tridiagonal(&[2.0, 2.0, 2.0], &[1.0, 1.0], 30).unwrap();
        let r = 2f64.sqrt();
        for (got, want) in vals.iter().zip([2.0 - r, 2.0, 2.0 + r]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn inconsistent_lengths_are_rejected() {
        assert!(eigenvalues_tridiagonal(&[1.0, 2.0], &[], 30).is_err());
        assert!(eigenvalues_tridiagonal(&[1.0, 2.0], &[1.0], 0).is_err());
    }

    #[test]
    fn sweep_budget_exhaustion_signals_non_convergence() {
        let d: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let e = vec![1.0; 49];
        assert!(matches!(
            eigenvalues_tridiagonal(&d, &e, 1),
            Err(Error::NoConvergence { max_sweeps: 1, .. })
        ));
    }

    #[test]
    fn tridiagonal_input_is_preserved() {
        let d = [1.0, -2.0, 0.5, 3.0];
        let e = [0.3, -1.2, 2.0];
        let (td, te) = tridiagonalize(&tridiagonal(&d, &e));
        assert_eq!(td, d);
        assert_eq!(td.iter().sum::<f64>(), d.iter().sum::<f64>());
        for (got, want) in te.iter().zip(e) {
            assert_eq!(got.abs(), want.abs());
        }
    }

    #[test]
    fn swap_matrix() {
        let a = DenseSymmetricMatrix::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (d, e) = tridiagonalize(&a);
        assert_eq!(d, vec![0.0, 0.0]);
        assert_eq!(e[0].abs(), 1.0);
    }

    #[test]
    fn householder_preserves_frobenius_norm() {
        let a = random_symmetric(8, 1);
        let (d, e) = tridiagonalize(&a);
        let frob =
            d.iter().map(|x| x * x).sum::<f64>() + 2.0 * e.iter().map(|x| x * x).sum::<f64>();
        assert!((frob - a.frobenius_norm_sq()).abs() < 1e-12 * a.frobenius_norm_sq().max(1.0));
        assert!((d.iter().sum::<f64>() - a.trace()).abs() < 1e-12 * 8.0 * a.max_abs());
    }

    #[test]
    fn identity_spectrum() {
        let s = spectrum(&DenseSymmetricMatrix::identity(5)).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_matrix_spectrum() {
        let s = spectrum(&DenseSymmetricMatrix::zeros(4)).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0; 4]);
    }

    #[test]
    fn wigner_trace_identity() {
        let spec = crate::ensembles::EnsembleSpec::wigner(
            64,
            EntryDistribution::gaussian(1.0),
            SeedSpec::new(2024, 0),
        );
        let a = generate(&spec).unwrap();
        let s = spectrum(&a).unwrap();
        assert!((s.eigenvalues.iter().sum::<f64>() - a.trace()).abs() < 1e-9);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rademacher_frobenius_is_summed_accurately() {
        // Every entry squared is 1/N, so a naive sum drifts by ~5e-10 here,
        // five times the identity budget.
        let spec = crate::ensembles::EnsembleSpec::wigner(
            384,
            EntryDistribution::rademacher(1.0),
            SeedSpec::new(200, 13),
        );
        let a = generate(&spec).unwrap();
        assert!((a.frobenius_norm_sq() - 384.0).abs() < 1e-11);
        spectrum(&a).unwrap();
    }

    #[test]
    fn oracle_scalar_and_diagonal() {
        let i = Complex64::new(0.0, 1.0);
        let zero = DenseSymmetricMatrix::zeros(1);
        let g = resolvent_trace_oracle(&zero, i).unwrap();
        assert!((g - i).norm() < 1e-15);
        let diag = DenseSymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        let g = resolvent_trace_oracle(&diag, i).unwrap();
        assert!((g - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn oracle_rejects_bad_arguments() {
        let a = DenseSymmetricMatrix::identity(3);
        assert!(resolvent_trace_oracle(&a, Complex64::new(0.0, 0.0)).is_err());
        assert!(resolvent_trace_oracle(&a, Complex64::new(1.0, -0.1)).is_err());
        assert!(ResolventOracle::with_cap(2)
            .trace(&a, Complex64::new(0.0, 1.0))
            .is_err());
    }

    #[test]
    fn oracle_matches_eigen_sum() {
        let a = random_symmetric(32, 7);
        let z = Complex64::new(0.3, 0.1);
        let direct = resolvent_trace_oracle(&a, z).unwrap();
        let via = spectrum(&a).unwrap().resolvent_trace(z);
        assert!((direct - via).norm() < 1e-9, "{direct} vs {via}");
    }

    #[test]
    fn oracle_agreement_and_herglotz_on_many_points() {
        let mut s = make_stream(SeedSpec::new(77, 0));
        for (trial, n) in [4usize, 16, 40, 64].into_iter().enumerate() {
            let a = random_symmetric(n, trial as u64);
            let spec = spectrum(&a).unwrap();
            for _ in 0..20 {
                let eta = 10f64.powf(s.random_range(-2.0..0.0));
                let z = Complex64::new(s.random_range(-1.5..1.5), eta);
                let direct = resolvent_trace_oracle(&a, z).unwrap();
                assert!(direct.im > 0.0);
                assert!((direct - spec.resolvent_trace(z)).norm() <= 1e-9 / eta);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn spectrum_invariants_hold(n in 1usize..40, seed in any::<u64>()) {
            let a = random_symmetric(n, seed);
            let s = spectrum(&a).unwrap();
            prop_assert_eq!(s.len(), n);
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let budget = IDENTITY_BUDGET * n as f64 * a.max_abs();
            prop_assert!((s.eigenvalues.iter().sum::<f64>() - a.trace()).abs() <= budget);
        }

        #[test]
        fn eigenvalues_are_roots_of_the_characteristic_polynomial(
            d in proptest::collection::vec(-3.0f64..3.0, 2..12),
            seed in any::<u64>(),
        ) {
            // Sturm count: number of eigenvalues below x equals the number of
            // negative pivots in the LDLᵀ recursion of T − x.
            let mut s = make_stream(SeedSpec::new(seed, 0));
            let e: Vec<f64> = (1..d.len()).map(|_| s.random_range(0.1..2.0)).collect();
            let vals = eigenvalues_tridiagonal(&d, &e, 30).unwrap();
            let count_below = |x: f64| {
                let mut q = d[0] - x;
                let mut c = usize::from(q < 0.0);
                for i in 1..d.len() {
                    q = d[i] - x - e[i - 1] * e[i - 1] / q;
                    c += usize::from(q < 0.0);
                }
                c
            };
            for (k, &l) in vals.iter().enumerate() {
                let tol = 1e-9 * (1.0 + l.abs());
                prop_assert!(count_below(l - tol) <= k);
                prop_assert!(count_below(l + tol) > k);
            }
        }
    }
}
