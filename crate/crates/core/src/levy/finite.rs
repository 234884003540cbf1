use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use super::{check_threshold, planar_jump, power_integral, LevyMeasure, MomentOrder};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub mass: f64,
    pub jump: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Finitely many weighted jump sizes.
    Atoms(Vec<Atom>),
    /// Planar density `|y|^{-exponent}` on `|y| > radius`.
    IsotropicTail { radius: f64, exponent: f64 },
}

/// A finite Lévy measure: the driving process is a compensated compound
/// Poisson process and can be simulated exactly.
#[derive(Debug, Clone)]
pub struct FiniteActivityMeasure {
    law: JumpLaw,
    dim: usize,
    total_mass: f64,
    inner_radius: f64,
    symmetric: bool,
    // Atoms sorted by decreasing norm; atoms above u form a prefix.
    norms: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FiniteActivityMeasure {
    pub fn atoms(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms
            .first()
            .map(|a| a.jump.len())
            .ok_or_else(|| Error::domain("at least one atom is required"))?;
        if dim == 0 {
            return Err(Error::domain("atoms must have positive dimension"));
        }
        for a in &atoms {
            if a.jump.len() != dim {
                return Err(Error::domain("atoms have inconsistent dimensions"));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::domain(format!("atom mass must be positive, got {}", a.mass)));
            }
            if a.jump.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("atom coordinates must be finite"));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| norm(&b.jump).total_cmp(&norm(&a.jump)));
        let norms: Vec<f64> = atoms.iter().map(|a| norm(&a.jump)).collect();
        let inner_radius = *norms.last().expect("non-empty");
        if inner_radius == 0.0 {
            return Err(Error::domain("a Lévy measure carries no mass at the origin"));
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.mass;
            cumulative.push(acc);
        }
        let symmetric = atoms.iter().all(|a| {
            atoms.iter().any(|b| {
                b.mass == a.mass && b.jump.iter().zip(&a.jump).all(|(x, y)| *x == -*y)
            })
        });
        Ok(FiniteActivityMeasure {
            law: JumpLaw::Atoms(atoms),
            dim,
            total_mass: acc,
            inner_radius,
            symmetric,
            norms,
            cumulative,
        })
    }

    /// Planar measure with density `|y|^{-exponent}` on `|y| > radius`.
    pub fn isotropic_tail(radius: f64, exponent: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("radius must be positive, got {radius}")));
        }
        if !(exponent > 4.0 && exponent.is_finite()) {
            return Err(Error::domain(format!("tail exponent must exceed 4, got {exponent}")));
        }
        let total_mass = TAU * power_integral(1.0 - exponent, radius, f64::INFINITY);
        Ok(FiniteActivityMeasure {
            law: JumpLaw::IsotropicTail { radius, exponent },
            dim: 2,
            total_mass,
            inner_radius: radius,
            symmetric: true,
            norms: Vec::new(),
            cumulative: Vec::new(),
        })
    }

    pub fn law(&self) -> &JumpLaw {
        &self.law
    }

    fn atoms_above(&self, u: f64) -> usize {
        self.norms.partition_point(|&n| n > u)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl LevyMeasure for FiniteActivityMeasure {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tail_mass(&self, u: f64) -> Result<f64> {
        check_threshold(u)?;
        if u < self.inner_radius {
            return Ok(self.total_mass);
        }
        Ok(match &self.law {
            JumpLaw::Atoms(_) => {
                let k = self.atoms_above(u);
                if k == 0 {
                    0.0
                } else {
                    self.cumulative[k - 1]
                }
            }
            JumpLaw::IsotropicTail { exponent, .. } => {
                TAU * power_integral(1.0 - exponent, u, f64::INFINITY)
            }
        })
    }

    fn truncated_abs_moment(&self, order: MomentOrder, u: f64) -> Result<f64> {
        check_threshold(u)?;
        if u < self.inner_radius {
            return Ok(0.0);
        }
        let s = order.value();
        match &self.law {
            JumpLaw::Atoms(atoms) => {
                let k = self.atoms_above(u);
                Ok(atoms[k..].iter().zip(&self.norms[k..]).map(|(a, n)| a.mass * n.powf(s)).sum())
            }
            JumpLaw::IsotropicTail { radius, exponent } => {
                let v = TAU * power_integral(s + 1.0 - exponent, *radius, u);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::domain(format!(
                        "moment of order {s} diverges for tail exponent {exponent}"
                    )))
                }
            }
        }
    }

    fn small_jump_cov(&self, u: f64) -> Result<DMatrix<f64>> {
        check_threshold(u)?;
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        if u < self.inner_radius {
            return Ok(cov);
        }
        match &self.law {
            JumpLaw::Atoms(atoms) => {
                let k = self.atoms_above(u);
                for a in &atoms[k..] {
                    let y = DVector::from_column_slice(&a.jump);
                    cov += &y * y.transpose() * a.mass;
                }
            }
            JumpLaw::IsotropicTail { .. } => {
                let m2 = self.truncated_abs_moment(MomentOrder::Two, u)?;
                cov.fill_diagonal(0.5 * m2);
            }
        }
        Ok(cov)
    }

    fn compensator_drift(&self, u: f64) -> Result<DVector<f64>> {
        check_threshold(u)?;
        let mut drift = DVector::zeros(self.dim);
        if self.symmetric {
            return Ok(drift);
        }
        if let JumpLaw::Atoms(atoms) = &self.law {
            let k = if u < self.inner_radius { atoms.len() } else { self.atoms_above(u) };
            for a in &atoms[..k] {
                for (d, y) in drift.iter_mut().zip(&a.jump) {
                    *d += a.mass * y;
                }
            }
        }
        Ok(drift)
    }

    fn sample_jump_above(&self, u: f64, rng: &mut Stream, out: &mut [f64]) {
        match &self.law {
            JumpLaw::Atoms(atoms) => {
                let k = if u < self.inner_radius { atoms.len() } else { self.atoms_above(u) };
                let target = rng.uniform() * self.cumulative[k - 1];
                let i = self.cumulative[..k].partition_point(|&c| c <= target).min(k - 1);
                out.copy_from_slice(&atoms[i].jump);
            }
            JumpLaw::IsotropicTail { radius, exponent } => loop {
                let r = u.max(*radius) * rng.uniform_open0().powf(-1.0 / (exponent - 2.0));
                planar_jump(r, rng, out);
                if out[0].hypot(out[1]) > u {
                    return;
                }
            },
        }
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn is_quasi_symmetric_near_zero(&self) -> bool {
        // No mass below the inner radius.
        true
    }

    fn activity_index(&self) -> Option<f64> {
        None
    }

    fn variation_order(&self) -> Option<f64> {
        Some(0.0)
    }

    fn moment_order_sup(&self) -> f64 {
        match &self.law {
            JumpLaw::Atoms(_) => f64::INFINITY,
            JumpLaw::IsotropicTail { exponent, .. } => (exponent - 2.0) / 2.0,
        }
    }

    fn total_mass(&self) -> Option<f64> {
        Some(self.total_mass)
    }

    fn support_inner_radius(&self) -> f64 {
        self.inner_radius
    }
}
