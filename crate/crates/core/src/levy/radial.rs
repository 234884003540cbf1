use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_threshold, planar_jump, LevyMeasure, MomentOrder};
use crate::error::Result;
use crate::quadrature;
use crate::rng::Stream;

const REL_TOL: f64 = 1e-12;
const BREAK: f64 = 1.0;

pub type RadialDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Planar isotropic measure `π(dy) = ψ(|y|) dy` given only by its radial
/// density; every mass and moment goes through adaptive quadrature and jumps
/// are drawn by numerically inverting the tail mass.
#[derive(Clone)]
pub struct RadialDensityMeasure {
    density: RadialDensity,
    alpha: Option<f64>,
    q: Option<f64>,
    moment_sup: f64,
}

impl fmt::Debug for RadialDensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialDensityMeasure")
            .field("alpha", &self.alpha)
            .field("q", &self.q)
            .field("moment_sup", &self.moment_sup)
            .finish_non_exhaustive()
    }
}

impl RadialDensityMeasure {
    /// `moment_sup`: `(H_p)` is assumed for all `p` below it.
    pub fn new(density: RadialDensity, moment_sup: f64) -> Self {
        RadialDensityMeasure { density, alpha: None, q: None, moment_sup }
    }

    pub fn with_activity_index(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_variation_order(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    /// `2π ∫_a^b r^{1+s} ψ(r) dr` on `0 ≤ a < b ≤ ∞`, split at `r = 1`.
    fn radial_integral(&self, s: f64, a: f64, b: f64) -> Result<f64> {
        let psi = &self.density;
        let g = |r: f64| r.powf(1.0 + s) * psi(r);
        let mut total = 0.0;
        if a < BREAK {
            let hi = b.min(BREAK);
            total += if a == 0.0 {
                quadrature::integrate_from_zero(g, hi, 0.0, REL_TOL)?.value
            } else {
                quadrature::integrate(g, a, hi, 0.0, REL_TOL)?.value
            };
        }
        if b > BREAK {
            let lo = a.max(BREAK);
            total += if b.is_infinite() {
                quadrature::integrate_to_infinity(g, lo, 0.0, REL_TOL)?.value
            } else {
                quadrature::integrate(g, lo, b, 0.0, REL_TOL)?.value
            };
        }
        Ok(TAU * total)
    }
}

impl LevyMeasure for RadialDensityMeasure {
    fn dim(&self) -> usize {
        2
    }

    fn tail_mass(&self, u: f64) -> Result<f64> {
        check_threshold(u)?;
        self.radial_integral(0.0, u, f64::INFINITY)
    }

    fn truncated_abs_moment(&self, order: MomentOrder, u: f64) -> Result<f64> {
        check_threshold(u)?;
        self.radial_integral(order.value(), 0.0, u)
    }

    fn small_jump_cov(&self, u: f64) -> Result<DMatrix<f64>> {
        let m2 = self.truncated_abs_moment(MomentOrder::Two, u)?;
        Ok(DMatrix::identity(2, 2) * (0.5 * m2))
    }

    fn compensator_drift(&self, u: f64) -> Result<DVector<f64>> {
        check_threshold(u)?;
        Ok(DVector::zeros(2))
    }

    fn sample_jump_above(&self, u: f64, rng: &mut Stream, out: &mut [f64]) {
        let total = self.tail_mass(u).unwrap_or(0.0);
        let target = rng.uniform_open0() * total;
        // tail_mass is decreasing: find r with tail_mass(r) = target.
        let mut lo = u;
        let mut hi = 2.0 * u.max(1.0);
        while self.tail_mass(hi).map(|m| m > target).unwrap_or(false) && hi < 1e150 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.tail_mass(mid) {
                Ok(m) if m > target => lo = mid,
                _ => hi = mid,
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        let r = 0.5 * (lo + hi);
        planar_jump(r.max(u * (1.0 + f64::EPSILON)), rng, out);
        let n = out[0].hypot(out[1]);
        if n <= u {
            let scale = u * (1.0 + 4.0 * f64::EPSILON) / n;
            out[0] *= scale;
            out[1] *= scale;
        }
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn is_quasi_symmetric_near_zero(&self) -> bool {
        true
    }

    fn activity_index(&self) -> Option<f64> {
        self.alpha
    }

    fn variation_order(&self) -> Option<f64> {
        self.q
    }

    fn moment_order_sup(&self) -> f64 {
        self.moment_sup
    }
}
