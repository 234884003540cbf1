//! Driving-noise increments for the three schemes.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::levy::LevyMeasure;
use crate::poisson::sample_poisson;
use crate::rng::Stream;

/// Law of the innovations `U` and `Λ`: centred, identity covariance and
/// vanishing third tensor moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnovationLaw {
    #[default]
    Gaussian,
    /// Independent ±1 coordinates.
    RademacherProduct,
}

impl InnovationLaw {
    #[inline]
    pub fn fill(self, rng: &mut Stream, out: &mut [f64]) {
        match self {
            InnovationLaw::Gaussian => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            InnovationLaw::RademacherProduct => {
                for v in out.iter_mut() {
                    *v = if rng.next_bit() { 1.0 } else { -1.0 };
                }
            }
        }
    }
}

impl Stream {
    #[inline]
    fn next_bit(&mut self) -> bool {
        use rand::RngCore;
        self.next_u32() & 1 == 1
    }
}

/// One step's noise, split by origin.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    /// `√γ·U`.
    pub gaussian_part: Vec<f64>,
    /// Compensated jump sum.
    pub jump_part: Vec<f64>,
    /// `√γ·QΛ`; zero for schemes E and P.
    pub wiener_correction: Vec<f64>,
    pub jump_count: u64,
}

impl IncrementSample {
    pub fn zeros(dim: usize) -> Self {
        IncrementSample {
            gaussian_part: vec![0.0; dim],
            jump_part: vec![0.0; dim],
            wiener_correction: vec![0.0; dim],
            jump_count: 0,
        }
    }

    /// The increment fed to the jump coefficient: jump part plus the
    /// Wiener correction.
    pub fn levy_increment(&self) -> Vec<f64> {
        self.jump_part.iter().zip(&self.wiener_correction).map(|(a, b)| a + b).collect()
    }
}

fn check_step(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("step must be positive and finite, got {gamma}")))
    }
}

/// Compensated compound Poisson increment over `[0, γ]` with jumps above
/// `u`, written into `out`. `tail_mass` and `drift` are `π(|y|>u)` and
/// `∫_{|y|>u} y π(dy)` (`None` when zero).
pub(crate) fn truncated_jumps_into(
    measure: &dyn LevyMeasure,
    gamma: f64,
    u: f64,
    tail_mass: f64,
    drift: Option<&[f64]>,
    rng: &mut Stream,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<u64> {
    out.fill(0.0);
    let count = sample_poisson(tail_mass * gamma, rng)?;
    for _ in 0..count {
        measure.sample_jump_above(u, rng, scratch);
        for (o, y) in out.iter_mut().zip(scratch.iter()) {
            *o += y;
        }
    }
    if let Some(d) = drift {
        for (o, c) in out.iter_mut().zip(d) {
            *o -= gamma * c;
        }
    }
    Ok(count)
}

/// Draws the truncated increment `Z_{γ}` keeping only jumps with `|y| > u`.
pub fn sample_truncated_increment(
    measure: &dyn LevyMeasure,
    gamma: f64,
    u: f64,
    rng: &mut Stream,
) -> Result<IncrementSample> {
    check_step(gamma)?;
    let lambda = measure.tail_mass(u)?;
    let drift = if measure.is_symmetric() {
        None
    } else {
        Some(measure.compensator_drift(u)?)
    };
    let dim = measure.dim();
    let mut sample = IncrementSample::zeros(dim);
    let mut scratch = vec![0.0; dim];
    sample.jump_count = truncated_jumps_into(
        measure,
        gamma,
        u,
        lambda,
        drift.as_ref().map(|d| d.as_slice()),
        rng,
        &mut scratch,
        &mut sample.jump_part,
    )?;
    Ok(sample)
}

pub(crate) fn wiener_into(
    q: &DMatrix<f64>,
    gamma: f64,
    law: InnovationLaw,
    rng: &mut Stream,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    law.fill(rng, scratch);
    let sg = gamma.sqrt();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, l) in scratch.iter().enumerate() {
            acc += q[(i, j)] * l;
        }
        *o = sg * acc;
    }
}

/// `√γ·QΛ` with `Λ` drawn from `law`.
pub fn sample_wiener_correction(
    q: &DMatrix<f64>,
    gamma: f64,
    law: InnovationLaw,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    check_step(gamma)?;
    if !q.is_square() {
        return Err(Error::domain(format!(
            "factor must be square, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let n = q.nrows();
    let mut scratch = vec![0.0; n];
    let mut out = vec![0.0; n];
    wiener_into(q, gamma, law, rng, &mut scratch, &mut out);
    Ok(out)
}

/// How a measure's untruncated increment is produced, if at all.
pub(crate) enum ExactRoute<'a> {
    PlugIn(&'a dyn crate::levy::ExactIncrementSampler),
    /// Finite activity: truncate strictly below the support.
    Truncated { u: f64 },
}

pub(crate) fn exact_route(measure: &dyn LevyMeasure) -> Result<ExactRoute<'_>> {
    if let Some(s) = measure.exact_sampler() {
        return Ok(ExactRoute::PlugIn(s));
    }
    let radius = measure.support_inner_radius();
    if measure.total_mass().is_some() && radius > 0.0 {
        return Ok(ExactRoute::Truncated { u: 0.5 * radius });
    }
    Err(Error::Unsupported(
        "exact increments need a finite-activity measure or a registered exact sampler; \
         use scheme P (jump truncation) or scheme W (small-jump wienerization) instead"
            .into(),
    ))
}

/// Draws the exact increment `Z_γ`.
pub fn sample_exact_increment(
    measure: &dyn LevyMeasure,
    gamma: f64,
    rng: &mut Stream,
) -> Result<IncrementSample> {
    let route = exact_route(measure)?;
    if gamma == 0.0 {
        return Ok(IncrementSample::zeros(measure.dim()));
    }
    check_step(gamma)?;
    match route {
        ExactRoute::Truncated { u } => sample_truncated_increment(measure, gamma, u, rng),
        ExactRoute::PlugIn(sampler) => {
            let mut sample = IncrementSample::zeros(measure.dim());
            sample.jump_count = sampler.sample_increment(gamma, rng, &mut sample.jump_part)?;
            Ok(sample)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Atom, FiniteActivityMeasure, IsotropicPowerLaw};

    fn point_mass() -> FiniteActivityMeasure {
        FiniteActivityMeasure::atoms(vec![Atom { mass: 1.0, jump: vec![1.0, 0.0] }]).unwrap()
    }

    #[test]
    fn zero_jumps_leave_only_compensator() {
        let m = point_mass();
        let mut rng = Stream::from_seed(2);
        let mut seen = false;
        for _ in 0..200 {
            let s = sample_truncated_increment(&m, 0.3, 0.5, &mut rng).unwrap();
            if s.jump_count == 0 {
                assert_eq!(s.jump_part, vec![-0.3, 0.0]);
                seen = true;
            }
            assert!(s.wiener_correction.iter().all(|&v| v == 0.0));
        }
        assert!(seen);
    }

    #[test]
    fn symmetric_measure_no_jumps_is_zero() {
        let m = FiniteActivityMeasure::isotropic_tail(1.0, 8.0).unwrap();
        let mut rng = Stream::from_seed(4);
        for _ in 0..500 {
            let s = sample_truncated_increment(&m, 0.01, 0.5, &mut rng).unwrap();
            if s.jump_count == 0 {
                assert_eq!(s.jump_part, vec![0.0, 0.0]);
            }
        }
    }

    #[test]
    fn exact_increment_edge_cases() {
        let m = point_mass();
        let mut rng = Stream::from_seed(1);
        let s = sample_exact_increment(&m, 0.0, &mut rng).unwrap();
        assert_eq!(s.jump_count, 0);
        assert_eq!(s.jump_part, vec![0.0, 0.0]);

        let stable_like = IsotropicPowerLaw::new(1.0).unwrap();
        let err = sample_exact_increment(&stable_like, 0.1, &mut rng).unwrap_err();
        match err {
            Error::Unsupported(msg) => assert!(msg.contains("scheme P") && msg.contains("scheme W")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wiener_edge_cases() {
        let mut rng = Stream::from_seed(1);
        let z = sample_wiener_correction(&DMatrix::zeros(2, 2), 0.7, InnovationLaw::Gaussian, &mut rng)
            .unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
        assert!(sample_wiener_correction(&DMatrix::zeros(2, 3), 0.7, InnovationLaw::Gaussian, &mut rng)
            .is_err());
        assert!(sample_wiener_correction(&DMatrix::identity(2, 2), 0.0, InnovationLaw::Gaussian, &mut rng)
            .is_err());
    }

    #[test]
    fn guard_on_huge_intensity() {
        let m = IsotropicPowerLaw::new(1.9).unwrap();
        let mut rng = Stream::from_seed(1);
        let err = sample_truncated_increment(&m, 1.0, 1e-6, &mut rng).unwrap_err();
        assert!(matches!(err, Error::ComplexityGuard { .. }));
    }
}
