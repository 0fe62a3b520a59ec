//! Limiting spectral laws and the mesoscopic fluctuation kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitingLaw {
    /// Limit of `(1/N) Σ_μ ξ_μ ξ_μᵀ` with `m/N → c` and entry variance `u²`.
    MarchenkoPastur { c: f64, u: f64 },
    /// Limit of a Wigner matrix with entry variance `v²`.
    Semicircle { v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportAndMass {
    pub lower: f64,
    pub upper: f64,
    pub ac_mass: f64,
    pub atom_at_zero: f64,
}

impl SupportAndMass {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `[lower + f·width, upper − f·width]`.
    pub fn inset(&self, fraction: f64) -> (f64, f64) {
        let w = self.width();
        (self.lower + fraction * w, self.upper - fraction * w)
    }
}

/// Absolutely continuous Marchenko–Pastur density. The atom at zero for
/// `c < 1` is not included; see [`support_and_mass`].
pub fn mp_density(lambda: f64, c: f64, u: f64) -> f64 {
    let u2 = u * u;
    let lower = u2 * (1.0 - c.sqrt()).powi(2);
    let upper = u2 * (1.0 + c.sqrt()).powi(2);
    if !(lambda > lower && lambda < upper) || lambda <= 0.0 {
        return 0.0;
    }
    let centre = u2 * (1.0 + c);
    let disc = 4.0 * c * u2 * u2 - (lambda - centre).powi(2);
    disc.max(0.0).sqrt() / (2.0 * PI * lambda * u2)
}

pub fn semicircle_density(lambda: f64, v: f64) -> f64 {
    let r = 2.0 * v;
    if lambda.abs() >= r {
        return 0.0;
    }
    (r * r - lambda * lambda).max(0.0).sqrt() / (2.0 * PI * v * v)
}

pub fn support_and_mass(law: &LimitingLaw) -> SupportAndMass {
    match *law {
        LimitingLaw::MarchenkoPastur { c, u } => {
            let u2 = u * u;
            SupportAndMass {
                lower: u2 * (1.0 - c.sqrt()).powi(2),
                upper: u2 * (1.0 + c.sqrt()).powi(2),
                ac_mass: c.min(1.0),
                atom_at_zero: (1.0 - c).max(0.0),
            }
        }
        LimitingLaw::Semicircle { v } => SupportAndMass {
            lower: -2.0 * v,
            upper: 2.0 * v,
            ac_mass: 1.0,
            atom_at_zero: 0.0,
        },
    }
}

impl LimitingLaw {
    pub fn density(&self, lambda: f64) -> f64 {
        match *self {
            LimitingLaw::MarchenkoPastur { c, u } => mp_density(lambda, c, u),
            LimitingLaw::Semicircle { v } => semicircle_density(lambda, v),
        }
    }

    pub fn support(&self) -> SupportAndMass {
        support_and_mass(self)
    }

    /// Centre of the bulk: `u²(1 + c)` or `0`.
    pub fn bulk_centre(&self) -> f64 {
        match *self {
            LimitingLaw::MarchenkoPastur { c, u } => u * u * (1.0 + c),
            LimitingLaw::Semicircle { .. } => 0.0,
        }
    }

    /// Second moment `∫ λ² dσ`, which bounds `|g(z) + 1/z|·|z|²` far out.
    pub fn second_moment(&self) -> f64 {
        match *self {
            // Mean c u², variance c u⁴.
            LimitingLaw::MarchenkoPastur { c, u } => c * u.powi(4) + (c * u * u).powi(2),
            LimitingLaw::Semicircle { v } => v * v,
        }
    }
}

/// Stieltjes transform `g(z) = ∫ dσ(λ)/(λ − z)`, atom included.
///
/// Both closed forms are roots of a quadratic. The root is chosen by the
/// Herglotz condition `sign Im g = sign Im z`; only when rounding leaves both
/// or neither root on the right side does the choice fall back to the root
/// closer to the large-`|z|` asymptote `−1/z`.
pub fn stieltjes(law: &LimitingLaw, z: Complex64) -> Complex64 {
    // Coefficients of a g² + b g + 1 = 0.
    let (a, b) = match *law {
        LimitingLaw::MarchenkoPastur { c, u } => {
            let u2 = u * u;
            (u2 * z, z - u2 * (c - 1.0))
        }
        LimitingLaw::Semicircle { v } => (Complex64::new(v * v, 0.0), z),
    };
    // Cancellation-free pair: q = −(b ± √(b² − 4a))/2 with the sign matching
    // b, roots q/a and 1/q.
    let disc = (b * b - 4.0 * a).sqrt();
    let sum = if (b + disc).norm() >= (b - disc).norm() {
        b + disc
    } else {
        b - disc
    };
    let q = -0.5 * sum;
    let roots = [q / a, q.inv()];
    let upper = z.im >= 0.0;
    let herglotz = |g: &Complex64| if upper { g.im > 0.0 } else { g.im < 0.0 };
    match (herglotz(&roots[0]), herglotz(&roots[1])) {
        (true, false) => roots[0],
        (false, true) => roots[1],
        _ => {
            let asymptote = -z.inv();
            if (roots[0] - asymptote).norm() <= (roots[1] - asymptote).norm() {
                roots[0]
            } else {
                roots[1]
            }
        }
    }
}

/// Limiting covariance of the scaled fluctuations at offsets `τ1`, `τ2`:
/// `(4 − Δ²)/(4 + Δ²)²` with `Δ = τ1 − τ2`.
pub fn covariance_kernel(tau1: f64, tau2: f64) -> f64 {
    let d2 = (tau1 - tau2).powi(2);
    (4.0 - d2) / (4.0 + d2).powi(2)
}

/// `C(0, Δ)·Δ² + 1`, which vanishes as `Δ → ∞` since the kernel decays like
/// `−Δ⁻²`.
pub fn kernel_asymptote_check(delta: f64) -> f64 {
    covariance_kernel(0.0, delta) * delta * delta + 1.0
}
