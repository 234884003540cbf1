//! SDE coefficients `dX = b(X)dt + σ(X)dW + κ(X)dZ` with regularity metadata.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Coefficients and assumptions of a Lévy-driven SDE.
///
/// `diffusion` and `jump_coeff` are optional; `None` means identically zero.
/// `reversion_a`, `growth_r` and `moment_p` are the mean-reversion, noise
/// growth and moment exponents the model satisfies with Lyapunov function
/// `lyapunov`. Closed-form generators `Af` may be registered by test
/// function id.
#[derive(Clone)]
pub struct SdeModel {
    pub dim_state: usize,
    pub dim_noise: usize,
    pub drift: VectorField,
    pub diffusion: Option<MatrixField>,
    pub jump_coeff: Option<MatrixField>,
    pub lyapunov: Option<ScalarField>,
    pub reversion_a: f64,
    pub growth_r: f64,
    pub moment_p: f64,
    generators: BTreeMap<String, ScalarField>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("has_diffusion", &self.diffusion.is_some())
            .field("has_jumps", &self.jump_coeff.is_some())
            .field("reversion_a", &self.reversion_a)
            .field("growth_r", &self.growth_r)
            .field("moment_p", &self.moment_p)
            .field("generators", &self.generators.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl SdeModel {
    pub fn new(dim_state: usize, dim_noise: usize, drift: VectorField) -> Result<Self> {
        if dim_state == 0 || dim_noise == 0 {
            return Err(Error::domain("dimensions must be positive"));
        }
        Ok(SdeModel {
            dim_state,
            dim_noise,
            drift,
            diffusion: None,
            jump_coeff: None,
            lyapunov: None,
            reversion_a: 1.0,
            growth_r: 0.0,
            moment_p: 1.0,
            generators: BTreeMap::new(),
        })
    }

    pub fn with_diffusion(mut self, sigma: MatrixField) -> Self {
        self.diffusion = Some(sigma);
        self
    }

    pub fn with_jump_coeff(mut self, kappa: MatrixField) -> Self {
        self.jump_coeff = Some(kappa);
        self
    }

    pub fn with_lyapunov(mut self, v: ScalarField) -> Self {
        self.lyapunov = Some(v);
        self
    }

    pub fn with_exponents(mut self, reversion_a: f64, growth_r: f64, moment_p: f64) -> Result<Self> {
        if !(reversion_a > 0.0 && reversion_a <= 1.0) {
            return Err(Error::domain(format!("mean-reversion exponent a must lie in (0, 1], got {reversion_a}")));
        }
        if !(growth_r >= 0.0) {
            return Err(Error::domain(format!("growth exponent r must be nonnegative, got {growth_r}")));
        }
        if !(moment_p >= 1.0) {
            return Err(Error::domain(format!("moment exponent p must be at least 1, got {moment_p}")));
        }
        self.reversion_a = reversion_a;
        self.growth_r = growth_r;
        self.moment_p = moment_p;
        Ok(self)
    }

    pub fn with_generator(mut self, f_id: impl Into<String>, af: ScalarField) -> Self {
        self.generators.insert(f_id.into(), af);
        self
    }

    pub fn generator(&self, f_id: &str) -> Option<&ScalarField> {
        self.generators.get(f_id)
    }

    pub fn generator_ids(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    /// The model with jumps removed (`κ = 0`).
    pub fn without_jumps(&self) -> Self {
        let mut m = self.clone();
        m.jump_coeff = None;
        m
    }
}

/// `κ ≡ I` on `ℝ^d`, `d = l`.
pub fn identity_field(dim: usize) -> MatrixField {
    Arc::new(move |_x: &[f64], out: &mut DMatrix<f64>| {
        out.fill(0.0);
        for i in 0..dim {
            out[(i, i)] = 1.0;
        }
    })
}

/// `V(x) = 1 + |x|²`.
pub fn quadratic_lyapunov() -> ScalarField {
    Arc::new(|x: &[f64]| 1.0 + x.iter().map(|v| v * v).sum::<f64>())
}
