//! Weighted empirical measures `ν̄_n = H_n^{-1} Σ η_k δ_{X̄_{k-1}}`,
//! evaluated online on registered test functions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sum::CompensatedSum;

pub type TestFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A pure, total function on the state space, with an optional closed-form
/// generator image `Af`.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    pub f: TestFn,
    pub generator: Option<TestFn>,
}

impl TestFunction {
    pub fn new(id: impl Into<String>, f: TestFn) -> Self {
        TestFunction { id: id.into(), f, generator: None }
    }

    pub fn with_generator(mut self, af: TestFn) -> Self {
        self.generator = Some(af);
        self
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("has_generator", &self.generator.is_some())
            .finish()
    }
}

/// Uniform reservoir of visited points (Algorithm R).
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    seen: u64,
    points: Vec<Vec<f64>>,
    rng: Stream,
}

impl Reservoir {
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize, rng: Stream) -> Self {
        Reservoir { capacity, seen: 0, points: Vec::with_capacity(capacity.min(1 << 16)), rng }
    }

    fn offer(&mut self, x: &[f64]) {
        self.seen += 1;
        if self.points.len() < self.capacity {
            self.points.push(x.to_vec());
        } else if self.capacity > 0 {
            let j = (self.rng.uniform() * self.seen as f64) as u64;
            if (j as usize) < self.capacity {
                self.points[j as usize] = x.to_vec();
            }
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedError {
    pub raw_err: f64,
    /// `√Γ_n · raw_err`.
    pub sqrt_gamma_scaled: f64,
}

pub fn normalized_error(value: f64, target: f64, gamma_sum: f64) -> NormalizedError {
    let raw_err = value - target;
    NormalizedError { raw_err, sqrt_gamma_scaled: gamma_sum.sqrt() * raw_err }
}

#[derive(Clone)]
pub struct EmpiricalMeasure {
    functions: Arc<[TestFunction]>,
    weight: CompensatedSum,
    accumulators: Vec<CompensatedSum>,
    updates: u64,
    values: Vec<f64>,
    reservoir: Option<Reservoir>,
}

impl fmt::Debug for EmpiricalMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalMeasure")
            .field("functions", &self.ids().collect::<Vec<_>>())
            .field("weight_mass", &self.weight_mass())
            .field("updates", &self.updates)
            .finish()
    }
}

impl EmpiricalMeasure {
    pub fn new(functions: impl Into<Arc<[TestFunction]>>) -> Self {
        let functions = functions.into();
        let n = functions.len();
        EmpiricalMeasure {
            functions,
            weight: CompensatedSum::new(),
            accumulators: vec![CompensatedSum::new(); n],
            updates: 0,
            values: vec![0.0; n],
            reservoir: None,
        }
    }

    pub fn with_reservoir(mut self, reservoir: Reservoir) -> Self {
        self.reservoir = Some(reservoir);
        self
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.id.as_str())
    }

    /// `H_n`.
    pub fn weight_mass(&self) -> f64 {
        self.weight.value()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn reservoir(&self) -> Option<&Reservoir> {
        self.reservoir.as_ref()
    }

    /// Charges `x` with weight `η`. On a non-finite `f(x)` nothing is
    /// updated and the offending function is named.
    pub fn update(&mut self, x: &[f64], weight: f64) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::domain(format!("weight must be positive and finite, got {weight}")));
        }
        for (v, tf) in self.values.iter_mut().zip(self.functions.iter()) {
            *v = (tf.f)(x);
            if !v.is_finite() {
                return Err(Error::PoisonedAccumulator(tf.id.clone()));
            }
        }
        self.weight.add(weight);
        for (acc, v) in self.accumulators.iter_mut().zip(&self.values) {
            acc.add(weight * v);
        }
        self.updates += 1;
        if let Some(r) = self.reservoir.as_mut() {
            r.offer(x);
        }
        Ok(())
    }

    fn position(&self, f_id: &str) -> Result<usize> {
        self.functions
            .iter()
            .position(|f| f.id == f_id)
            .ok_or_else(|| Error::UnknownFunction(f_id.to_string()))
    }

    /// `ν̄_n(f)`.
    pub fn integrate(&self, f_id: &str) -> Result<f64> {
        let i = self.position(f_id)?;
        let h = self.weight_mass();
        if h <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.accumulators[i].value() / h)
    }

    /// `ν̄_n(f)` for every registered function, in registration order.
    pub fn integrate_all(&self) -> Result<Vec<f64>> {
        let h = self.weight_mass();
        if h <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.accumulators.iter().map(|a| a.value() / h).collect())
    }

    pub fn normalized_error(&self, f_id: &str, target: f64, gamma_sum: f64) -> Result<NormalizedError> {
        Ok(normalized_error(self.integrate(f_id)?, target, gamma_sum))
    }

    /// Adds another measure's mass; both must track the same functions.
    pub fn merge(&mut self, other: &EmpiricalMeasure) -> Result<()> {
        if !self.ids().eq(other.ids()) {
            return Err(Error::domain("cannot merge empirical measures over different test functions"));
        }
        self.weight.merge(&other.weight);
        for (a, b) in self.accumulators.iter_mut().zip(&other.accumulators) {
            a.merge(b);
        }
        self.updates += other.updates;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq_norm() -> TestFunction {
        TestFunction::new("phi", Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()))
    }

    fn first() -> TestFunction {
        TestFunction::new("x0", Arc::new(|x: &[f64]| x[0]))
    }

    #[test]
    fn weighted_means() {
        let mut m = EmpiricalMeasure::new(vec![sq_norm()]);
        m.update(&[1.0, 0.0], 1.0).unwrap();
        m.update(&[0.0, 1.0], 1.0).unwrap();
        assert_eq!(m.integrate("phi").unwrap(), 1.0);

        let mut m = EmpiricalMeasure::new(vec![sq_norm()]);
        m.update(&[0.0, 0.0], 1.0).unwrap();
        m.update(&[2.0, 0.0], 3.0).unwrap();
        assert_eq!(m.integrate("phi").unwrap(), 3.0);
    }

    #[test]
    fn errors() {
        let m = EmpiricalMeasure::new(vec![sq_norm()]);
        assert_eq!(m.integrate("phi"), Err(Error::EmptyMeasure));
        let mut m = EmpiricalMeasure::new(vec![sq_norm()]);
        m.update(&[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.integrate("psi"), Err(Error::UnknownFunction("psi".into())));
        assert!(m.update(&[1.0, 1.0], 0.0).is_err());
        assert!(m.update(&[1.0, 1.0], f64::NAN).is_err());

        let log = TestFunction::new("log", Arc::new(|x: &[f64]| x[0].ln()));
        let mut m = EmpiricalMeasure::new(vec![sq_norm(), log]);
        m.update(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(m.update(&[-1.0, 0.0], 1.0), Err(Error::PoisonedAccumulator("log".into())));
        // The failed update left everything untouched.
        assert_eq!(m.weight_mass(), 1.0);
        assert_eq!(m.integrate("phi").unwrap(), 1.0);
    }

    #[test]
    fn single_point_and_normalized_error() {
        let mut m = EmpiricalMeasure::new(vec![sq_norm(), first()]);
        m.update(&[3.0, 4.0], 0.25).unwrap();
        assert_eq!(m.integrate("phi").unwrap(), 25.0);
        assert_eq!(m.integrate("x0").unwrap(), 3.0);
        let e = m.normalized_error("phi", 25.0, 9.0).unwrap();
        assert_eq!((e.raw_err, e.sqrt_gamma_scaled), (0.0, 0.0));
        let e = normalized_error(1.1, 1.0, 100.0);
        assert!((e.sqrt_gamma_scaled - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_rejects_mismatched_functions() {
        let mut a = EmpiricalMeasure::new(vec![sq_norm()]);
        let b = EmpiricalMeasure::new(vec![first()]);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn reservoir_keeps_capacity() {
        let mut m = EmpiricalMeasure::new(vec![first()])
            .with_reservoir(Reservoir::new(100, Stream::from_seed(1)));
        for k in 0..10_000 {
            m.update(&[k as f64], 1.0).unwrap();
        }
        let r = m.reservoir().unwrap();
        assert_eq!(r.points().len(), 100);
        assert_eq!(r.seen(), 10_000);
        // A uniform sample of 0..10⁴ should not sit in the first 100 values.
        let mean = r.points().iter().map(|p| p[0]).sum::<f64>() / 100.0;
        assert!(mean > 2000.0 && mean < 8000.0, "{mean}");
    }
}
