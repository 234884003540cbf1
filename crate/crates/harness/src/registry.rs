//! Named models and test functions.

use std::sync::Arc;

use ergolevy::levy::{LevyMeasure, MomentOrder};
use ergolevy::model::{identity_field, quadratic_lyapunov, MatrixField, ScalarField, VectorField};
use ergolevy::{SdeModel, TestFunction};

use crate::error::{HarnessError, Result};

pub const MODEL_IDS: &[&str] = &["ou2d", "soft-reverting"];

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Full second moment `m₂ = ∫ |y|² π(dy)`.
pub fn second_moment(measure: &dyn LevyMeasure) -> Result<f64> {
    Ok(measure.truncated_abs_moment(MomentOrder::Two, f64::INFINITY)?)
}

/// Builds a registered model on the measure's dimension.
///
/// * `ou2d`: `b(x) = −x`, `σ = 0`, `κ = I`, with `A|x|² = −2|x|² + m₂`
///   registered for `phi`.
/// * `soft-reverting`: `b(x) = −x/√(1+|x|)`, `σ = 0`, `κ = (1+|x|)^{1/4} I`.
pub fn build_model(id: &str, measure: &dyn LevyMeasure) -> Result<SdeModel> {
    let d = measure.dim();
    match id {
        "ou2d" => {
            let m2 = second_moment(measure)?;
            let drift: VectorField = Arc::new(|x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -v;
                }
            });
            Ok(SdeModel::new(d, d, drift)?
                .with_jump_coeff(identity_field(d))
                .with_lyapunov(quadratic_lyapunov())
                .with_exponents(1.0, 0.0, measure.moment_order_sup().min(3.0) - 0.5)?
                .with_generator("phi", Arc::new(move |x: &[f64]| -2.0 * sq_norm(x) + m2)))
        }
        "soft-reverting" => {
            let drift: VectorField = Arc::new(|x, out| {
                let s = (1.0 + sq_norm(x).sqrt()).sqrt();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -v / s;
                }
            });
            let kappa: MatrixField = Arc::new(move |x, out| {
                let c = (1.0 + sq_norm(x).sqrt()).powf(0.25);
                out.fill(0.0);
                for i in 0..d {
                    out[(i, i)] = c;
                }
            });
            Ok(SdeModel::new(d, d, drift)?
                .with_jump_coeff(kappa)
                .with_lyapunov(quadratic_lyapunov())
                .with_exponents(0.75, 0.25, 2.5)?)
        }
        other => Err(HarnessError::config(format!(
            "unknown model `{other}` (expected one of: {})",
            MODEL_IDS.join(", ")
        ))),
    }
}

/// Resolves a test-function id:
///
/// * `phi`: `|x|²`
/// * `af_phi`: the model's closed-form `A|x|²`
/// * `one`: the constant 1
/// * `v_pow:<e>`: `(1 + |x|²)^e`
/// * `coord:<i>`: `x_i`
pub fn build_function(id: &str, model: &SdeModel) -> Result<TestFunction> {
    let f: ScalarField = match id {
        "phi" => Arc::new(sq_norm),
        "one" => Arc::new(|_: &[f64]| 1.0),
        "af_phi" => model
            .generator("phi")
            .cloned()
            .ok_or_else(|| HarnessError::Core(ergolevy::Error::Unsupported(
                "model has no closed-form generator for phi".into(),
            )))?,
        _ => {
            if let Some(e) = id.strip_prefix("v_pow:") {
                let e: f64 = e
                    .parse()
                    .ok()
                    .filter(|e: &f64| e.is_finite())
                    .ok_or_else(|| HarnessError::config(format!("bad exponent in `{id}`")))?;
                Arc::new(move |x: &[f64]| (1.0 + sq_norm(x)).powf(e))
            } else if let Some(i) = id.strip_prefix("coord:") {
                let i: usize = i.parse().map_err(|_| HarnessError::config(format!("bad index in `{id}`")))?;
                if i >= model.dim_state {
                    return Err(HarnessError::config(format!(
                        "`{id}` out of range for dimension {}",
                        model.dim_state
                    )));
                }
                Arc::new(move |x: &[f64]| x[i])
            } else {
                return Err(HarnessError::config(format!(
                    "unknown test function `{id}` (phi, af_phi, one, v_pow:<e>, coord:<i>)"
                )));
            }
        }
    };
    let mut tf = TestFunction::new(id, f);
    if id == "phi" {
        if let Some(af) = model.generator("phi") {
            tf = tf.with_generator(af.clone());
        }
    }
    Ok(tf)
}

/// Known `ν(f)` for a registered model, when it has a closed form.
///
/// For `ou2d` with a symmetric measure, `A|x|² = −2|x|² + m₂` gives
/// `ν(|x|²) = m₂/2` and `ν(A|x|²) = 0`.
pub fn known_target(model: &str, f_id: &str, measure: &dyn LevyMeasure) -> Result<Option<f64>> {
    if f_id == "one" {
        return Ok(Some(1.0));
    }
    if model != "ou2d" || !measure.is_symmetric() {
        return Ok(None);
    }
    Ok(match f_id {
        "phi" => Some(0.5 * second_moment(measure)?),
        "af_phi" => Some(0.0),
        "coord:0" | "coord:1" => Some(0.0),
        _ => None,
    })
}

/// `σ̂² = ∫∫ (f(x + y) − f(x))² π(dy) ν(dx)` for `f = |x|²` under `ou2d`
/// with an isotropic measure: `m₂² + m₄`.
pub fn clt_reference_variance(measure: &dyn LevyMeasure) -> Result<f64> {
    let m2 = second_moment(measure)?;
    let m4 = measure.truncated_abs_moment(MomentOrder::Four, f64::INFINITY)?;
    Ok(m2 * m2 + m4)
}
