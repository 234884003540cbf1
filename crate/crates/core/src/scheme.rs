//! The decreasing-step Euler recursions
//!
//! ```text
//! X̄_{n+1} = X̄_n + γ_{n+1} b(X̄_n) + √γ_{n+1} σ(X̄_n) U_{n+1} + κ(X̄_n) Z̄_{n+1}
//! ```
//!
//! with `Z̄` the exact increment (E), the jump-truncated increment (P) or the
//! truncated increment plus a Gaussian surrogate for the small jumps (W).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::empirical::{EmpiricalMeasure, TestFunction};
use crate::error::{Error, Result};
use crate::increments::{exact_route, truncated_jumps_into, wiener_into, ExactRoute, InnovationLaw};
use crate::levy::{small_jump_cov_factor, LevyMeasure, MomentOrder};
use crate::model::SdeModel;
use crate::rng::ChainStreams;
use crate::schedule::{Schedule, ScheduleSums};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Exact increments.
    E,
    /// Jumps below the threshold dropped.
    P,
    /// Jumps below the threshold replaced by a Gaussian with the same covariance.
    W,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::E, SchemeKind::P, SchemeKind::W];
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::E => "E",
            SchemeKind::P => "P",
            SchemeKind::W => "W",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "E" | "e" => Ok(SchemeKind::E),
            "P" | "p" => Ok(SchemeKind::P),
            "W" | "w" => Ok(SchemeKind::W),
            other => Err(Error::domain(format!("unknown scheme `{other}` (expected E, P or W)"))),
        }
    }
}

/// Per-chain settings that are not part of the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub kind: SchemeKind,
    pub innovation: InnovationLaw,
    /// `X̄_0`; the origin when `None`.
    pub x0: Option<Vec<f64>>,
    /// Relative change in `u` that triggers a new factor `Q`.
    pub q_refresh_tol: f64,
    pub divergence_bound: f64,
}

impl ChainConfig {
    pub const DEFAULT_Q_REFRESH_TOL: f64 = 1e-3;
    pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e12;

    pub fn new(kind: SchemeKind) -> Self {
        ChainConfig {
            kind,
            innovation: InnovationLaw::Gaussian,
            x0: None,
            q_refresh_tol: Self::DEFAULT_Q_REFRESH_TOL,
            divergence_bound: Self::DEFAULT_DIVERGENCE_BOUND,
        }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_innovation(mut self, law: InnovationLaw) -> Self {
        self.innovation = law;
        self
    }
}

enum JumpSource<'a> {
    Exact(&'a dyn crate::levy::ExactIncrementSampler),
    /// Exact through truncation below the support: fixed `u`, mass and drift.
    FixedTruncation { u: f64, tail_mass: f64, drift: Option<Vec<f64>> },
    Truncated,
}

struct QCache {
    u: f64,
    q: DMatrix<f64>,
}

/// A running chain: current iterate, schedule sums, streams and the
/// empirical measure of the visited points.
pub struct ChainState<'a> {
    model: &'a SdeModel,
    measure: &'a dyn LevyMeasure,
    schedule: Schedule,
    config: ChainConfig,
    jumps: Option<JumpSource<'a>>,
    streams: ChainStreams,
    x: Vec<f64>,
    sums: ScheduleSums,
    empirical: EmpiricalMeasure,
    jump_count: u64,
    q_cache: Option<QCache>,
    q_refreshes: u64,
    // workspace
    next: Vec<f64>,
    coeff: DMatrix<f64>,
    noise: Vec<f64>,
    z: Vec<f64>,
    jump_scratch: Vec<f64>,
    wiener_scratch: Vec<f64>,
    wiener_out: Vec<f64>,
}

impl fmt::Debug for ChainState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainState")
            .field("kind", &self.config.kind)
            .field("n", &self.sums.n())
            .field("x", &self.x)
            .field("jump_count", &self.jump_count)
            .finish()
    }
}

impl<'a> ChainState<'a> {
    pub fn new(
        model: &'a SdeModel,
        measure: &'a dyn LevyMeasure,
        schedule: Schedule,
        config: ChainConfig,
        functions: impl Into<Arc<[TestFunction]>>,
        master_seed: u64,
        replica: u64,
    ) -> Result<Self> {
        let d = model.dim_state;
        let l = model.dim_noise;
        if measure.dim() != l {
            return Err(Error::domain(format!(
                "measure dimension {} does not match noise dimension {l}",
                measure.dim()
            )));
        }
        let x = match &config.x0 {
            Some(x0) if x0.len() != d => {
                return Err(Error::domain(format!(
                    "initial point has dimension {}, expected {d}",
                    x0.len()
                )))
            }
            Some(x0) if x0.iter().any(|v| !v.is_finite()) => {
                return Err(Error::domain("initial point must be finite"))
            }
            Some(x0) => x0.clone(),
            None => vec![0.0; d],
        };
        let source = match config.kind {
            SchemeKind::E => match exact_route(measure)? {
                ExactRoute::PlugIn(s) => JumpSource::Exact(s),
                ExactRoute::Truncated { u } => JumpSource::FixedTruncation {
                    u,
                    tail_mass: measure.tail_mass(u)?,
                    drift: drift_if_needed(measure, u)?,
                },
            },
            SchemeKind::P | SchemeKind::W => JumpSource::Truncated,
        };
        let jumps = model.jump_coeff.as_ref().map(|_| source);
        Ok(ChainState {
            model,
            measure,
            schedule,
            config,
            jumps,
            streams: ChainStreams::derive(master_seed, replica),
            x,
            sums: ScheduleSums::new(),
            empirical: EmpiricalMeasure::new(functions),
            jump_count: 0,
            q_cache: None,
            q_refreshes: 0,
            next: vec![0.0; d],
            coeff: DMatrix::zeros(d, l),
            noise: vec![0.0; l],
            z: vec![0.0; l],
            jump_scratch: vec![0.0; l],
            wiener_scratch: vec![0.0; l],
            wiener_out: vec![0.0; l],
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.config.kind
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n(&self) -> u64 {
        self.sums.n()
    }

    pub fn jump_count(&self) -> u64 {
        self.jump_count
    }

    pub fn sums(&self) -> &ScheduleSums {
        &self.sums
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn empirical(&self) -> &EmpiricalMeasure {
        &self.empirical
    }

    pub fn into_empirical(self) -> EmpiricalMeasure {
        self.empirical
    }

    /// Number of times `Q` was factored.
    pub fn q_refreshes(&self) -> u64 {
        self.q_refreshes
    }

    /// One step `n → n + 1`.
    pub fn step(&mut self) -> Result<()> {
        let info = self.sums.advance(&self.schedule, self.measure)?;
        let gamma = info.gamma;
        self.empirical.update(&self.x, gamma)?;

        let model = self.model;
        (model.drift)(&self.x, &mut self.next);
        for (nx, x) in self.next.iter_mut().zip(&self.x) {
            *nx = x + gamma * *nx;
        }

        if let Some(sigma) = &model.diffusion {
            sigma(&self.x, &mut self.coeff);
            self.config.innovation.fill(&mut self.streams.brownian, &mut self.noise);
            let sg = gamma.sqrt();
            for v in self.noise.iter_mut() {
                *v *= sg;
            }
            add_mat_vec(&self.coeff, &self.noise, &mut self.next);
        }

        if let (Some(kappa), Some(source)) = (&model.jump_coeff, &self.jumps) {
            let count = match source {
                JumpSource::Exact(s) => s.sample_increment(gamma, &mut self.streams.jumps, &mut self.z)?,
                JumpSource::FixedTruncation { u, tail_mass, drift } => truncated_jumps_into(
                    self.measure,
                    gamma,
                    *u,
                    *tail_mass,
                    drift.as_deref(),
                    &mut self.streams.jumps,
                    &mut self.jump_scratch,
                    &mut self.z,
                )?,
                JumpSource::Truncated => {
                    let drift = drift_if_needed(self.measure, info.u)?;
                    truncated_jumps_into(
                        self.measure,
                        gamma,
                        info.u,
                        info.tail_mass,
                        drift.as_deref(),
                        &mut self.streams.jumps,
                        &mut self.jump_scratch,
                        &mut self.z,
                    )?
                }
            };
            if self.config.kind == SchemeKind::W {
                self.refresh_q(info.u)?;
                let q = &self.q_cache.as_ref().expect("factor cached").q;
                wiener_into(
                    q,
                    gamma,
                    self.config.innovation,
                    &mut self.streams.wiener,
                    &mut self.wiener_scratch,
                    &mut self.wiener_out,
                );
                for (z, w) in self.z.iter_mut().zip(&self.wiener_out) {
                    *z += w;
                }
            }
            self.jump_count += count;
            kappa(&self.x, &mut self.coeff);
            add_mat_vec(&self.coeff, &self.z, &mut self.next);
        }

        let norm = self.next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= self.config.divergence_bound) {
            return Err(Error::Divergence { step: info.k, norm });
        }
        std::mem::swap(&mut self.x, &mut self.next);
        Ok(())
    }

    fn refresh_q(&mut self, u: f64) -> Result<()> {
        let stale = match &self.q_cache {
            Some(c) => (u - c.u).abs() > self.config.q_refresh_tol * c.u,
            None => true,
        };
        if stale {
            let f = small_jump_cov_factor(self.measure, u)?;
            self.q_cache = Some(QCache { u, q: f.q });
            self.q_refreshes += 1;
        }
        Ok(())
    }
}

fn drift_if_needed(measure: &dyn LevyMeasure, u: f64) -> Result<Option<Vec<f64>>> {
    if measure.is_symmetric() {
        return Ok(None);
    }
    let d: DVector<f64> = measure.compensator_drift(u)?;
    Ok(Some(d.iter().copied().collect()))
}

#[inline]
fn add_mat_vec(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, vj) in v.iter().enumerate() {
            acc += m[(i, j)] * vj;
        }
        *o += acc;
    }
}

/// Snapshot taken at a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRow {
    pub n: u64,
    pub gamma_n: f64,
    /// `Γ_n`.
    pub gamma_sum: f64,
    /// `Γ_n^{(2)}`.
    pub gamma2_sum: f64,
    /// `β_{n,π}^{(s)}` for `s = 2, 3, 4`.
    pub beta: [f64; 3],
    /// `ν̄_n(f)` in registration order.
    pub values: Vec<f64>,
    /// Mean jumps per step since the previous checkpoint.
    pub jumps_per_step: f64,
    /// `sup_{k≤n} λ_k γ_k`.
    pub sup_budget: f64,
}

impl CheckpointRow {
    pub fn beta(&self, s: MomentOrder) -> f64 {
        self.beta[s.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub kind: SchemeKind,
    pub replica: u64,
    pub f_ids: Vec<String>,
    pub rows: Vec<CheckpointRow>,
    pub final_x: Vec<f64>,
    pub total_jumps: u64,
}

impl RunRecord {
    pub fn value_index(&self, f_id: &str) -> Result<usize> {
        self.f_ids
            .iter()
            .position(|id| id == f_id)
            .ok_or_else(|| Error::UnknownFunction(f_id.to_string()))
    }
}

/// Everything a single chain needs besides the seed.
#[derive(Clone, Copy)]
pub struct ChainSetup<'a> {
    pub model: &'a SdeModel,
    pub measure: &'a dyn LevyMeasure,
    pub schedule: Schedule,
    pub config: &'a ChainConfig,
    pub functions: &'a Arc<[TestFunction]>,
}

/// Runs `n_steps` steps and snapshots at each checkpoint (sorted, within
/// `[1, n_steps]`).
pub fn run_chain(
    setup: ChainSetup<'_>,
    n_steps: u64,
    checkpoints: &[u64],
    master_seed: u64,
    replica: u64,
) -> Result<RunRecord> {
    if n_steps == 0 {
        return Err(Error::domain("n_steps must be at least 1"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("checkpoints must be strictly increasing"));
    }
    if let (Some(&first), Some(&last)) = (checkpoints.first(), checkpoints.last()) {
        if first == 0 || last > n_steps {
            return Err(Error::domain(format!("checkpoints must lie in [1, {n_steps}]")));
        }
    }
    let mut chain = ChainState::new(
        setup.model,
        setup.measure,
        setup.schedule,
        setup.config.clone(),
        setup.functions.clone(),
        master_seed,
        replica,
    )?;
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut last_n = 0u64;
    let mut last_jumps = 0u64;
    for &cp in checkpoints {
        while chain.n() < cp {
            chain
                .step()
                .map_err(|e| e.with_context(format!("replica {replica}, before checkpoint n = {cp}")))?;
        }
        let sums = chain.sums();
        let (sup_budget, _) = sums.sup_budget();
        rows.push(CheckpointRow {
            n: cp,
            gamma_n: sums.last().map_or(0.0, |i| i.gamma),
            gamma_sum: sums.gamma_sum(),
            gamma2_sum: sums.gamma2_sum(),
            beta: MomentOrder::ALL.map(|s| sums.beta(s)),
            values: chain.empirical().integrate_all()?,
            jumps_per_step: (chain.jump_count() - last_jumps) as f64 / (cp - last_n) as f64,
            sup_budget,
        });
        last_n = cp;
        last_jumps = chain.jump_count();
    }
    while chain.n() < n_steps {
        chain
            .step()
            .map_err(|e| e.with_context(format!("replica {replica}, after the last checkpoint")))?;
    }
    Ok(RunRecord {
        kind: chain.kind(),
        replica,
        f_ids: setup.functions.iter().map(|f| f.id.clone()).collect(),
        rows,
        final_x: chain.x().to_vec(),
        total_jumps: chain.jump_count(),
    })
}

/// `sup_{k≤n} λ_k γ_k` against a bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardReport {
    pub sup: f64,
    pub argsup: u64,
    /// `λ_1 γ_1`.
    pub first: f64,
    pub bound: f64,
    pub violated: bool,
    /// First `k` with `λ_k γ_k > bound`.
    pub first_violation: Option<u64>,
}

impl GuardReport {
    /// `sup / (λ_1 γ_1)`.
    pub fn ratio(&self) -> f64 {
        self.sup / self.first
    }
}

/// Evaluates the expected jump count per step over `k ≤ horizon`; the
/// bound is `bound_factor · λ_1 γ_1`.
pub fn complexity_guard(
    schedule: &Schedule,
    measure: &dyn LevyMeasure,
    horizon: u64,
    bound_factor: f64,
) -> Result<GuardReport> {
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let budget = |k: u64| -> Result<f64> {
        let gamma = schedule.step(k);
        Ok(measure.tail_mass(schedule.threshold(k))? * gamma)
    };
    let first = budget(1)?;
    let bound = bound_factor * first;
    let (mut sup, mut argsup, mut first_violation) = (first, 1, None);
    for k in 2..=horizon {
        let b = budget(k)?;
        if b > sup {
            sup = b;
            argsup = k;
        }
        if first_violation.is_none() && b > bound {
            first_violation = Some(k);
        }
    }
    Ok(GuardReport { sup, argsup, first, bound, violated: first_violation.is_some(), first_violation })
}

pub const DEFAULT_GUARD_FACTOR: f64 = 10.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{Atom, FiniteActivityMeasure, IsotropicPowerLaw};
    use crate::model::{identity_field, VectorField};

    fn ou(dim: usize) -> SdeModel {
        let drift: VectorField = Arc::new(|x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = -v;
            }
        });
        SdeModel::new(dim, dim, drift).unwrap().with_jump_coeff(identity_field(dim))
    }

    fn phi() -> Arc<[TestFunction]> {
        vec![TestFunction::new("phi", Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()))].into()
    }

    #[test]
    fn parse_kind() {
        assert_eq!("w".parse::<SchemeKind>().unwrap(), SchemeKind::W);
        assert!("Q".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn frozen_dynamics() {
        let zero: VectorField = Arc::new(|_, out| out.fill(0.0));
        let model = SdeModel::new(2, 2, zero).unwrap();
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.5, 0.5, 1.0).unwrap();
        let cfg = ChainConfig::new(SchemeKind::W).with_x0(vec![1.0, -2.0]);
        let mut c = ChainState::new(&model, &m, s, cfg, phi(), 3, 0).unwrap();
        for _ in 0..10 {
            c.step().unwrap();
        }
        assert_eq!(c.x(), &[1.0, -2.0]);
        assert_eq!(c.n(), 10);
    }

    #[test]
    fn contraction_without_jumps() {
        let model = ou(2).without_jumps();
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.5, 0.5, 1.0).unwrap();
        let cfg = ChainConfig::new(SchemeKind::P).with_x0(vec![1.0, 2.0]);
        let mut c = ChainState::new(&model, &m, s, cfg, phi(), 3, 0).unwrap();
        c.step().unwrap();
        assert_eq!(c.x(), &[0.5, 1.0]);
        c.step().unwrap();
        let g2 = s.step(2);
        assert_eq!(c.x(), &[0.5 * (1.0 - g2), 1.0 * (1.0 - g2)]);
    }

    #[test]
    fn exact_scheme_rejects_infinite_activity() {
        let model = ou(2);
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.5, 0.5, 1.0).unwrap();
        let err = ChainState::new(&model, &m, s, ChainConfig::new(SchemeKind::E), phi(), 1, 0).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn divergence_is_reported() {
        let explode: VectorField = Arc::new(|x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = 1e3 * v;
            }
        });
        let model = SdeModel::new(1, 1, explode).unwrap();
        let m = FiniteActivityMeasure::atoms(vec![Atom { mass: 1.0, jump: vec![1.0] }]).unwrap();
        let s = Schedule::new(1.0, 0.1, 1.0).unwrap();
        let cfg = ChainConfig::new(SchemeKind::P).with_x0(vec![1.0]);
        let functions = phi();
        let setup = ChainSetup { model: &model, measure: &m, schedule: s, config: &cfg, functions: &functions };
        let err = run_chain(setup, 100, &[100], 1, 0).unwrap_err();
        match err.root() {
            Error::Divergence { step, norm } => {
                assert!(*step <= 5);
                assert!(*norm > 1e12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_step_record() {
        let model = ou(2);
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.5, 1.0 / 3.0, 1.0).unwrap();
        let cfg = ChainConfig::new(SchemeKind::W).with_x0(vec![1.0, 1.0]);
        let functions = phi();
        let setup = ChainSetup { model: &model, measure: &m, schedule: s, config: &cfg, functions: &functions };
        let rec = run_chain(setup, 1, &[1], 9, 0).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].values, vec![2.0]);
        assert_eq!(rec.rows[0].gamma_sum, 0.5);
        assert!(run_chain(setup, 0, &[], 9, 0).is_err());
        assert!(run_chain(setup, 5, &[3, 2], 9, 0).is_err());
        assert!(run_chain(setup, 5, &[6], 9, 0).is_err());
    }

    #[test]
    fn weight_identity() {
        let model = ou(2);
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.3, 1.0 / 3.0, 1.0).unwrap();
        let functions: Arc<[TestFunction]> = vec![TestFunction::new("one", Arc::new(|_: &[f64]| 1.0))].into();
        let mut c = ChainState::new(&model, &m, s, ChainConfig::new(SchemeKind::W), functions, 5, 0).unwrap();
        for _ in 0..2000 {
            c.step().unwrap();
        }
        assert_eq!(c.empirical().weight_mass(), c.sums().gamma_sum());
        assert!((c.empirical().integrate("one").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_is_reused_between_small_threshold_moves() {
        let model = ou(2);
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let s = Schedule::new(0.05, 1.0 / 3.0, 1.0).unwrap();
        let mut c = ChainState::new(&model, &m, s, ChainConfig::new(SchemeKind::W), phi(), 5, 0).unwrap();
        for _ in 0..100_000 {
            c.step().unwrap();
        }
        assert!(c.q_refreshes() > 10);
        assert!(c.q_refreshes() < 10_000, "{}", c.q_refreshes());
    }

    #[test]
    fn guard_examples() {
        let m = IsotropicPowerLaw::new(1.0).unwrap();
        let ok = Schedule::new(0.05, 1.0 / 3.0, 1.0).unwrap();
        let r = complexity_guard(&ok, &m, 10_000, DEFAULT_GUARD_FACTOR).unwrap();
        assert!(!r.violated);
        let bad = Schedule::new(0.05, 1.0 / 3.0, 2.0).unwrap();
        let r = complexity_guard(&bad, &m, 100_000, DEFAULT_GUARD_FACTOR).unwrap();
        assert!(r.violated);
        assert!(r.first_violation.is_some());

        let f = FiniteActivityMeasure::isotropic_tail(1.0, 8.0).unwrap();
        let s = Schedule::new(0.2, 0.5, 1.0).unwrap().with_u_cap(Some(0.9)).unwrap();
        let r = complexity_guard(&s, &f, 1000, DEFAULT_GUARD_FACTOR).unwrap();
        assert!((r.sup - f.total_mass().unwrap() * 0.2).abs() < 1e-15);
        assert!(!r.violated);
    }
}
