//! Step and threshold sequences and their running sums.

use crate::error::{Error, Result};
use crate::levy::{LevyMeasure, MomentOrder};
use crate::sum::CompensatedSum;

/// Polynomial steps `γ_k = γ₁ k^{-ζ}` with thresholds
/// `u_k = min(γ_k^r, u_cap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub gamma1: f64,
    pub zeta: f64,
    pub r_threshold: f64,
    pub u_cap: Option<f64>,
}

impl Schedule {
    pub const DEFAULT_U_CAP: f64 = 1.0;

    pub fn new(gamma1: f64, zeta: f64, r_threshold: f64) -> Result<Self> {
        if !(gamma1 > 0.0 && gamma1.is_finite()) {
            return Err(Error::domain(format!("gamma1 must be positive, got {gamma1}")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::domain(format!("zeta must lie in (0, 1], got {zeta}")));
        }
        if !(r_threshold > 0.0 && r_threshold.is_finite()) {
            return Err(Error::domain(format!("threshold exponent must be positive, got {r_threshold}")));
        }
        Ok(Schedule { gamma1, zeta, r_threshold, u_cap: Some(Self::DEFAULT_U_CAP) })
    }

    pub fn with_u_cap(mut self, cap: Option<f64>) -> Result<Self> {
        if let Some(c) = cap {
            if !(c > 0.0) {
                return Err(Error::domain(format!("threshold cap must be positive, got {c}")));
            }
        }
        self.u_cap = cap;
        Ok(self)
    }

    /// `γ_k`, `k ≥ 1`.
    #[inline]
    pub fn step(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        self.gamma1 * (k as f64).powf(-self.zeta)
    }

    /// `u_k`, `k ≥ 1`.
    #[inline]
    pub fn threshold(&self, k: u64) -> f64 {
        let u = self.step(k).powf(self.r_threshold);
        match self.u_cap {
            Some(c) => u.min(c),
            None => u,
        }
    }

    /// `Γ_n^{(s)} = Σ_{k≤n} γ_k^s` by direct summation.
    pub fn power_sum(&self, s: f64, n: u64) -> f64 {
        (1..=n).map(|k| self.step(k).powf(s)).collect::<CompensatedSum>().value()
    }
}

/// What the tracker saw at step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub k: u64,
    pub gamma: f64,
    pub u: f64,
    /// `λ_k = π(|y| > u_k)`.
    pub tail_mass: f64,
}

/// Running sums `Γ_n`, `Γ_n^{(2)}`, `β_{n,π}^{(s)}` and the jump budget
/// `sup_{k≤n} λ_k γ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSums {
    n: u64,
    gamma: CompensatedSum,
    gamma2: CompensatedSum,
    beta: [CompensatedSum; 3],
    first_budget: f64,
    sup_budget: f64,
    argsup: u64,
    last: Option<StepInfo>,
}

impl Default for ScheduleSums {
    fn default() -> Self {
        Self::new()
    }
}

impl ScheduleSums {
    pub fn new() -> Self {
        ScheduleSums {
            n: 0,
            gamma: CompensatedSum::new(),
            gamma2: CompensatedSum::new(),
            beta: [CompensatedSum::new(); 3],
            first_budget: 0.0,
            sup_budget: 0.0,
            argsup: 0,
            last: None,
        }
    }

    /// Moves to step `n + 1`, querying the measure at `u_{n+1}`.
    pub fn advance(&mut self, schedule: &Schedule, measure: &dyn LevyMeasure) -> Result<StepInfo> {
        let k = self.n + 1;
        let gamma = schedule.step(k);
        let u = schedule.threshold(k);
        let tail_mass = measure.tail_mass(u)?;
        let mut moments = [0.0; 3];
        for s in MomentOrder::ALL {
            moments[s.index()] = measure.truncated_abs_moment(s, u)?;
        }
        let info = StepInfo { k, gamma, u, tail_mass };
        self.record(info, moments);
        Ok(info)
    }

    fn record(&mut self, info: StepInfo, moments: [f64; 3]) {
        self.n = info.k;
        self.gamma.add(info.gamma);
        self.gamma2.add(info.gamma * info.gamma);
        for (b, m) in self.beta.iter_mut().zip(moments) {
            b.add(info.gamma * m);
        }
        let budget = info.tail_mass * info.gamma;
        if info.k == 1 {
            self.first_budget = budget;
        }
        if budget > self.sup_budget || info.k == 1 {
            self.sup_budget = budget;
            self.argsup = info.k;
        }
        self.last = Some(info);
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `Γ_n`.
    pub fn gamma_sum(&self) -> f64 {
        self.gamma.value()
    }

    /// `Γ_n^{(2)}`.
    pub fn gamma2_sum(&self) -> f64 {
        self.gamma2.value()
    }

    /// `β_{n,π}^{(s)}`.
    pub fn beta(&self, s: MomentOrder) -> f64 {
        self.beta[s.index()].value()
    }

    /// `λ_1 γ_1`.
    pub fn first_budget(&self) -> f64 {
        self.first_budget
    }

    /// `(sup_{k≤n} λ_k γ_k, argsup)`.
    pub fn sup_budget(&self) -> (f64, u64) {
        (self.sup_budget, self.argsup)
    }

    pub fn last(&self) -> Option<StepInfo> {
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::IsotropicPowerLaw;

    #[test]
    fn gamma3_example() {
        let s = Schedule::new(1.0, 1.0 / 3.0, 1.0).unwrap();
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let mut sums = ScheduleSums::new();
        for _ in 0..3 {
            sums.advance(&s, &m).unwrap();
        }
        let expect = 1.0 + 2f64.powf(-1.0 / 3.0) + 3f64.powf(-1.0 / 3.0);
        assert!((sums.gamma_sum() - expect).abs() <= 1e-15 * expect);
    }

    #[test]
    fn threshold_cap() {
        let s = Schedule::new(4.0, 0.5, 1.0).unwrap();
        assert_eq!(s.threshold(1), 1.0);
        assert_eq!(s.threshold(64), 0.5);
        let s = s.with_u_cap(None).unwrap();
        assert_eq!(s.threshold(1), 4.0);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(Schedule::new(0.0, 0.5, 1.0).is_err());
        assert!(Schedule::new(1.0, 0.0, 1.0).is_err());
        assert!(Schedule::new(1.0, 1.5, 1.0).is_err());
        assert!(Schedule::new(1.0, 0.5, 0.0).is_err());
        assert!(Schedule::new(1.0, 0.5, 1.0).unwrap().with_u_cap(Some(0.0)).is_err());
    }
}
