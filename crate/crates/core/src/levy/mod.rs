//! Lévy measures and the quantities every scheme queries: tail masses,
//! truncated absolute moments, small-jump covariances, compensating drifts
//! and samplers for the jumps above a threshold.

mod factor;
mod finite;
mod power_law;
mod radial;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub use factor::{covariance_factor, small_jump_cov_factor, CovFactor, FactorMethod};
pub use finite::{Atom, FiniteActivityMeasure, JumpLaw};
pub use power_law::IsotropicPowerLaw;
pub use radial::RadialDensityMeasure;

/// Orders `s` for which truncated moments `∫_{|y|≤u} |y|^s π(dy)` are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MomentOrder {
    Two = 2,
    Three = 3,
    Four = 4,
}

impl MomentOrder {
    pub const ALL: [MomentOrder; 3] = [MomentOrder::Two, MomentOrder::Three, MomentOrder::Four];

    pub fn value(self) -> f64 {
        self as u8 as f64
    }

    pub fn index(self) -> usize {
        self as usize - 2
    }
}

impl TryFrom<u32> for MomentOrder {
    type Error = Error;

    fn try_from(s: u32) -> Result<Self> {
        match s {
            2 => Ok(MomentOrder::Two),
            3 => Ok(MomentOrder::Three),
            4 => Ok(MomentOrder::Four),
            other => Err(Error::domain(format!("moment order must be 2, 3 or 4, got {other}"))),
        }
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Exact simulation of the jump part over `[0, γ]`, for measures whose
/// increments can be drawn without truncation.
pub trait ExactIncrementSampler: Send + Sync {
    /// Writes the compensated increment into `out` and returns the number of
    /// jumps drawn (0 when the sampler does not count them).
    fn sample_increment(&self, gamma: f64, rng: &mut Stream, out: &mut [f64]) -> Result<u64>;
}

/// A Lévy measure `π` on `ℝ^l \ {0}`.
///
/// Implementations are immutable; samplers draw from an explicit stream.
pub trait LevyMeasure: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `π({|y| > u})`.
    fn tail_mass(&self, u: f64) -> Result<f64>;

    /// `∫_{|y|≤u} |y|^s π(dy)`. `u = ∞` gives the full moment.
    fn truncated_abs_moment(&self, order: MomentOrder, u: f64) -> Result<f64>;

    /// `C_ij(u) = ∫_{|y|≤u} y_i y_j π(dy)`.
    fn small_jump_cov(&self, u: f64) -> Result<DMatrix<f64>>;

    /// `∫_{|y|>u} y π(dy)`.
    fn compensator_drift(&self, u: f64) -> Result<DVector<f64>>;

    /// Draws one jump from `1_{|y|>u} π(dy) / π({|y|>u})` into `out`.
    ///
    /// Callers guarantee `u > 0`, `tail_mass(u) > 0` and `out.len() == dim()`.
    fn sample_jump_above(&self, u: f64, rng: &mut Stream, out: &mut [f64]);

    fn is_symmetric(&self) -> bool;

    /// `∫_{|y|≤u} y^{⊗3} π(dy) = 0` for all small `u`.
    fn is_quasi_symmetric_near_zero(&self) -> bool;

    /// Local exponent `α` with density ≍ `|y|^{-α-l}` near zero.
    fn activity_index(&self) -> Option<f64>;

    /// Some `q ∈ [0, 2]` with `∫_{|y|≤1} |y|^q π(dy) < ∞`.
    fn variation_order(&self) -> Option<f64>;

    /// `(H_p)` holds for every `p` strictly below this value.
    fn moment_order_sup(&self) -> f64;

    /// `π(ℝ^l \ {0})` when finite.
    fn total_mass(&self) -> Option<f64> {
        None
    }

    /// Largest `u₀` with `π({|y| ≤ u₀}) = 0`.
    fn support_inner_radius(&self) -> f64 {
        0.0
    }

    fn exact_sampler(&self) -> Option<&dyn ExactIncrementSampler> {
        None
    }
}

/// Measure traits consumed by the schedule planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureTraits {
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub quasi_symmetric: bool,
}

impl MeasureTraits {
    pub fn of(measure: &dyn LevyMeasure) -> Self {
        MeasureTraits {
            alpha: measure.activity_index(),
            q: measure.variation_order(),
            quasi_symmetric: measure.is_quasi_symmetric_near_zero(),
        }
    }
}

/// Attaches an exact increment sampler to a measure.
pub struct WithExactSampler<M, S> {
    pub measure: M,
    pub sampler: S,
}

impl<M: fmt::Debug, S> fmt::Debug for WithExactSampler<M, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WithExactSampler").field("measure", &self.measure).finish_non_exhaustive()
    }
}

impl<M: LevyMeasure, S: ExactIncrementSampler> LevyMeasure for WithExactSampler<M, S> {
    fn dim(&self) -> usize {
        self.measure.dim()
    }
    fn tail_mass(&self, u: f64) -> Result<f64> {
        self.measure.tail_mass(u)
    }
    fn truncated_abs_moment(&self, order: MomentOrder, u: f64) -> Result<f64> {
        self.measure.truncated_abs_moment(order, u)
    }
    fn small_jump_cov(&self, u: f64) -> Result<DMatrix<f64>> {
        self.measure.small_jump_cov(u)
    }
    fn compensator_drift(&self, u: f64) -> Result<DVector<f64>> {
        self.measure.compensator_drift(u)
    }
    fn sample_jump_above(&self, u: f64, rng: &mut Stream, out: &mut [f64]) {
        self.measure.sample_jump_above(u, rng, out)
    }
    fn is_symmetric(&self) -> bool {
        self.measure.is_symmetric()
    }
    fn is_quasi_symmetric_near_zero(&self) -> bool {
        self.measure.is_quasi_symmetric_near_zero()
    }
    fn activity_index(&self) -> Option<f64> {
        self.measure.activity_index()
    }
    fn variation_order(&self) -> Option<f64> {
        self.measure.variation_order()
    }
    fn moment_order_sup(&self) -> f64 {
        self.measure.moment_order_sup()
    }
    fn total_mass(&self) -> Option<f64> {
        self.measure.total_mass()
    }
    fn support_inner_radius(&self) -> f64 {
        self.measure.support_inner_radius()
    }
    fn exact_sampler(&self) -> Option<&dyn ExactIncrementSampler> {
        Some(&self.sampler)
    }
}

pub(crate) fn check_threshold(u: f64) -> Result<()> {
    if u > 0.0 && !u.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold must be positive, got {u}")))
    }
}

const POLE_EPS: f64 = 1e-9;

/// `∫_a^b r^p dr` for `0 ≤ a ≤ b ≤ ∞`, switching to `ln(b/a)` near `p = -1`.
pub(crate) fn power_integral(p: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let q = p + 1.0;
    if q.abs() < POLE_EPS {
        return (b / a).ln();
    }
    if a == 0.0 {
        return if q > 0.0 { b.powf(q) / q } else { f64::INFINITY };
    }
    if b.is_infinite() {
        return if q < 0.0 { -a.powf(q) / q } else { f64::INFINITY };
    }
    a.powf(q) * (q * (b / a).ln()).exp_m1() / q
}

/// Writes a uniformly oriented planar vector of length `r` into `out`.
#[inline]
pub(crate) fn planar_jump(r: f64, rng: &mut Stream, out: &mut [f64]) {
    let theta = std::f64::consts::TAU * rng.uniform();
    let (s, c) = theta.sin_cos();
    out[0] = r * c;
    out[1] = r * s;
}
