use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::{check_threshold, planar_jump, power_integral, LevyMeasure, MomentOrder};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Planar isotropic measure with density `|y|^{-(α+2)}` on `0 < |y| ≤ 1`
/// and `|y|^{-τ}` on `|y| > 1` (`τ = 8` by default).
///
/// All masses and moments are closed-form radial integrals; jumps above a
/// threshold are drawn by choosing the inner or outer band in proportion to
/// its mass and inverting the power-law radial CDF inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicPowerLaw {
    alpha: f64,
    tail_exponent: f64,
}

impl IsotropicPowerLaw {
    pub const DEFAULT_TAIL_EXPONENT: f64 = 8.0;

    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_tail_exponent(alpha, Self::DEFAULT_TAIL_EXPONENT)
    }

    /// `tail_exponent > 4` keeps the second moment finite.
    pub fn with_tail_exponent(alpha: f64, tail_exponent: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(tail_exponent > 4.0 && tail_exponent.is_finite()) {
            return Err(Error::domain(format!(
                "tail exponent must exceed 4, got {tail_exponent}"
            )));
        }
        Ok(IsotropicPowerLaw { alpha, tail_exponent })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    // Radial mass element is 2π r ψ(r) dr.
    fn inner_mass_above(&self, u: f64) -> f64 {
        TAU * power_integral(-self.alpha - 1.0, u, 1.0)
    }

    fn outer_mass_above(&self, u: f64) -> f64 {
        TAU * power_integral(1.0 - self.tail_exponent, u.max(1.0), f64::INFINITY)
    }
}

impl LevyMeasure for IsotropicPowerLaw {
    fn dim(&self) -> usize {
        2
    }

    fn tail_mass(&self, u: f64) -> Result<f64> {
        check_threshold(u)?;
        Ok(self.inner_mass_above(u) + self.outer_mass_above(u))
    }

    fn truncated_abs_moment(&self, order: MomentOrder, u: f64) -> Result<f64> {
        check_threshold(u)?;
        let s = order.value();
        let inner = TAU * power_integral(s - self.alpha - 1.0, 0.0, u.min(1.0));
        let outer = TAU * power_integral(s + 1.0 - self.tail_exponent, 1.0, u.max(1.0));
        let total = inner + outer;
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::domain(format!(
                "moment of order {s} diverges for tail exponent {}",
                self.tail_exponent
            )))
        }
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
        let outer_exp = self.tail_exponent - 2.0;
        let inner = self.inner_mass_above(u);
        let outer = self.outer_mass_above(u);
        loop {
            let r = if inner > 0.0 && rng.uniform() * (inner + outer) < inner {
                // F(r) = (u^-α - r^-α) / (u^-α - 1) on [u, 1]
                let a = self.alpha;
                let top = u.powf(-a);
                let v = rng.uniform_open0();
                (top - v * (top - 1.0)).powf(-1.0 / a)
            } else {
                u.max(1.0) * rng.uniform_open0().powf(-1.0 / outer_exp)
            };
            planar_jump(r, rng, out);
            if out[0].hypot(out[1]) > u {
                return;
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn is_quasi_symmetric_near_zero(&self) -> bool {
        true
    }

    fn activity_index(&self) -> Option<f64> {
        Some(self.alpha)
    }

    fn variation_order(&self) -> Option<f64> {
        // Any q > α is integrable near zero; report the smallest order in
        // the planner's [0, 2] range that is safely above α.
        Some((self.alpha + 1e-9).min(2.0))
    }

    fn moment_order_sup(&self) -> f64 {
        (self.tail_exponent - 2.0) / 2.0
    }
}
