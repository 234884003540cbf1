//! Replicated runs, aggregation, slope fits and CLT diagnostics.

use std::sync::Arc;

use ergolevy::levy::{LevyMeasure, MeasureTraits, MomentOrder};
use ergolevy::rates::{loglog_fit, moment_order, recommended_schedule, RatePlan};
use ergolevy::scheme::{complexity_guard, ChainSetup, GuardReport, DEFAULT_GUARD_FACTOR};
use ergolevy::{run_chain, ChainConfig, RunRecord, Schedule, SchemeKind, SdeModel, TestFunction};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ScheduleSpec};
use crate::error::{HarnessError, Result};
use crate::registry::{build_function, build_model, known_target};

/// Largest tolerated share of failed replicas.
pub const MAX_FAILED_SHARE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct ResolvedScheme {
    pub kind: SchemeKind,
    pub schedule: Schedule,
    /// The planner's output for auto schedules.
    pub plan: Option<RatePlan>,
    pub guard: GuardReport,
    /// Order of the `β` sum reported in outputs.
    pub s: MomentOrder,
}

/// A configuration with its model, measure, functions and schedules built.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub measure: Arc<dyn LevyMeasure>,
    pub model: SdeModel,
    pub functions: Arc<[TestFunction]>,
    /// Per function, the configured target or the registry's closed form.
    pub targets: Vec<Option<f64>>,
    pub checkpoints: Vec<u64>,
    pub schemes: Vec<ResolvedScheme>,
}

impl Experiment {
    pub fn resolve(config: ExperimentConfig) -> Result<Experiment> {
        let measure = config.measure.build()?;
        let model = build_model(&config.model, measure.as_ref())?;
        let functions: Arc<[TestFunction]> = config
            .functions
            .iter()
            .map(|id| build_function(id, &model))
            .collect::<Result<Vec<_>>>()?
            .into();
        for key in config.targets.keys() {
            if !config.functions.contains(key) {
                return Err(HarnessError::config(format!("target given for unregistered function `{key}`")));
            }
        }
        let mut targets = Vec::with_capacity(functions.len());
        for f in functions.iter() {
            targets.push(match config.targets.get(&f.id) {
                Some(&t) => Some(t),
                None => known_target(&config.model, &f.id, measure.as_ref())?,
            });
        }
        if let Some(x0) = &config.x0 {
            if x0.len() != model.dim_state {
                return Err(HarnessError::config(format!(
                    "x0 has dimension {}, the model has {}",
                    x0.len(),
                    model.dim_state
                )));
            }
        }
        let traits = MeasureTraits::of(measure.as_ref());
        let mut schemes = Vec::with_capacity(config.schemes.len());
        for &kind in &config.schemes {
            let (schedule, plan) = match config.schedule {
                ScheduleSpec::Auto { gamma1 } => {
                    let plan = recommended_schedule(kind, &traits, gamma1)?;
                    (plan.schedule()?, Some(plan))
                }
                ScheduleSpec::Explicit { gamma1, zeta, r } => (Schedule::new(gamma1, zeta, r)?, None),
            };
            let schedule = schedule.with_u_cap(config.u_cap)?;
            let guard = complexity_guard(&schedule, measure.as_ref(), config.steps, DEFAULT_GUARD_FACTOR)?;
            if guard.violated && !config.allow_guard_violation {
                return Err(HarnessError::config(format!(
                    "scheme {kind}: expected jumps per step reach {:.4e} at k = {} (bound {:.4e}); \
                     set allow_guard_violation = true to run anyway",
                    guard.sup, guard.argsup, guard.bound
                )));
            }
            let s = plan
                .and_then(|p| p.s)
                .or_else(|| moment_order(kind, traits.quasi_symmetric))
                .unwrap_or(MomentOrder::Two);
            schemes.push(ResolvedScheme { kind, schedule, plan, guard, s });
        }
        let checkpoints = config.checkpoints.resolve(config.steps);
        Ok(Experiment { config, measure, model, functions, targets, checkpoints, schemes })
    }

    pub fn chain_config(&self, kind: SchemeKind) -> ChainConfig {
        let mut c = ChainConfig::new(kind).with_innovation(self.config.innovation);
        if let Some(x0) = &self.config.x0 {
            c = c.with_x0(x0.clone());
        }
        c
    }

    /// `key = value` pairs describing the resolved experiment.
    pub fn echo(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let mut out: Vec<(String, String)> = c.source.clone();
        out.push(("resolved.model".into(), c.model.clone()));
        out.push(("resolved.measure".into(), c.measure.describe()));
        out.push(("resolved.steps".into(), c.steps.to_string()));
        out.push(("resolved.replicas".into(), c.replicas.to_string()));
        out.push(("resolved.seed".into(), c.seed.to_string()));
        out.push(("resolved.checkpoints".into(), self.checkpoints.len().to_string()));
        for s in &self.schemes {
            let k = s.kind;
            out.push((format!("resolved.{k}.gamma1"), s.schedule.gamma1.to_string()));
            out.push((format!("resolved.{k}.zeta"), s.schedule.zeta.to_string()));
            out.push((format!("resolved.{k}.r"), s.schedule.r_threshold.to_string()));
            out.push((
                format!("resolved.{k}.u_cap"),
                s.schedule.u_cap.map_or_else(|| "none".to_string(), |c| c.to_string()),
            ));
            out.push((format!("resolved.{k}.beta_order"), s.s.to_string()));
            if let Some(p) = &s.plan {
                out.push((format!("resolved.{k}.exponent"), p.exponent.to_string()));
                out.push((format!("resolved.{k}.regime"), p.regime.to_string()));
            }
            out.push((format!("resolved.{k}.guard_ratio"), s.guard.ratio().to_string()));
        }
        for (f, t) in self.functions.iter().zip(&self.targets) {
            if let Some(t) = t {
                out.push((format!("resolved.target.{}", f.id), t.to_string()));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SchemeRuns {
    pub scheme: ResolvedScheme,
    /// Successful replicas, in replica order.
    pub records: Vec<RunRecord>,
    pub failures: Vec<(u64, ergolevy::Error)>,
}

pub struct ExperimentOutcome {
    pub experiment: Experiment,
    pub runs: Vec<SchemeRuns>,
}

impl ExperimentOutcome {
    pub fn runs_for(&self, kind: SchemeKind) -> Option<&SchemeRuns> {
        self.runs.iter().find(|r| r.scheme.kind == kind)
    }

    pub fn aggregate(&self, kind: SchemeKind, f_id: &str) -> Result<AggregateRecord> {
        let runs = self
            .runs_for(kind)
            .ok_or_else(|| HarnessError::config(format!("scheme {kind} was not run")))?;
        let i = self
            .experiment
            .functions
            .iter()
            .position(|f| f.id == f_id)
            .ok_or_else(|| HarnessError::Core(ergolevy::Error::UnknownFunction(f_id.to_string())))?;
        Ok(aggregate(kind, f_id, &runs.records, i, self.experiment.targets[i]))
    }
}

/// Runs every scheme of the experiment over `replicas` independent chains.
///
/// Replicas run on a pool of `threads` workers (rayon's default when
/// `None`); results are identical for any thread count.
pub fn run_experiment(config: ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let experiment = Experiment::resolve(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::config(format!("cannot start worker pool: {e}")))?;
    let mut runs = Vec::with_capacity(experiment.schemes.len());
    for scheme in &experiment.schemes {
        let config = experiment.chain_config(scheme.kind);
        let setup = ChainSetup {
            model: &experiment.model,
            measure: experiment.measure.as_ref(),
            schedule: scheme.schedule,
            config: &config,
            functions: &experiment.functions,
        };
        let steps = experiment.config.steps;
        let seed = experiment.config.seed;
        let checkpoints = &experiment.checkpoints;
        let results: Vec<(u64, ergolevy::Result<RunRecord>)> = pool.install(|| {
            (0..experiment.config.replicas)
                .into_par_iter()
                .map(|r| (r, run_chain(setup, steps, checkpoints, seed, r)))
                .collect()
        });
        let mut records = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (r, res) in results {
            match res {
                Ok(rec) => records.push(rec),
                Err(e) => failures.push((r, e)),
            }
        }
        let total = experiment.config.replicas as usize;
        if failures.len() as f64 > MAX_FAILED_SHARE * total as f64 {
            return Err(HarnessError::ReplicaFailure {
                failed: failures.len(),
                total,
                first: failures.swap_remove(0).1.with_context(format!("scheme {}", scheme.kind)),
            });
        }
        runs.push(SchemeRuns { scheme: scheme.clone(), records, failures });
    }
    Ok(ExperimentOutcome { experiment, runs })
}

/// Cross-replica statistics at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub n: u64,
    pub count: usize,
    pub mean_value: f64,
    pub se_value: f64,
    /// Signed mean error; `None` without a target.
    pub mean_err: Option<f64>,
    pub mean_abs_err: Option<f64>,
    pub se_abs_err: Option<f64>,
    /// Mean and sample variance of `√Γ_n · err`.
    pub mean_scaled: Option<f64>,
    pub var_scaled: Option<f64>,
    pub mean_jumps_per_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub kind: SchemeKind,
    pub f_id: String,
    pub target: Option<f64>,
    pub points: Vec<AggregatePoint>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Aggregates column `f_index` of `records`, taken in the given order.
pub fn aggregate(
    kind: SchemeKind,
    f_id: &str,
    records: &[RunRecord],
    f_index: usize,
    target: Option<f64>,
) -> AggregateRecord {
    let n_rows = records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    let mut points = Vec::with_capacity(n_rows);
    for j in 0..n_rows {
        let rows: Vec<_> = records.iter().map(|r| &r.rows[j]).collect();
        let values: Vec<f64> = rows.iter().map(|row| row.values[f_index]).collect();
        let (mean_value, var_value) = mean_var(&values);
        let count = rows.len();
        let sqrt_n = (count as f64).sqrt();
        let jumps = mean_var(&rows.iter().map(|row| row.jumps_per_step).collect::<Vec<_>>()).0;
        let mut p = AggregatePoint {
            n: rows[0].n,
            count,
            mean_value,
            se_value: var_value.sqrt() / sqrt_n,
            mean_err: None,
            mean_abs_err: None,
            se_abs_err: None,
            mean_scaled: None,
            var_scaled: None,
            mean_jumps_per_step: jumps,
        };
        if let Some(t) = target {
            let errs: Vec<f64> = values.iter().map(|v| v - t).collect();
            let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
            let scaled: Vec<f64> = rows.iter().zip(&errs).map(|(row, e)| row.gamma_sum.sqrt() * e).collect();
            let (ma, va) = mean_var(&abs);
            let (ms, vs) = mean_var(&scaled);
            p.mean_err = Some(mean_var(&errs).0);
            p.mean_abs_err = Some(ma);
            p.se_abs_err = Some(va.sqrt() / sqrt_n);
            p.mean_scaled = Some(ms);
            p.var_scaled = Some(vs);
        }
        points.push(p);
    }
    AggregateRecord { kind, f_id: f_id.to_string(), target, points }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    /// Number of checkpoints in the window.
    pub points: usize,
}

impl SlopeFit {
    /// Two-sided 95% band `slope ± 1.96·stderr`.
    pub fn band(&self) -> (f64, f64) {
        (self.slope - 1.96 * self.stderr, self.slope + 1.96 * self.stderr)
    }
}

/// Least-squares slope of `ln mean|err|` against `ln n` over checkpoints
/// in `[lo, hi]`.
pub fn fit_rate_slope(agg: &AggregateRecord, lo: u64, hi: u64) -> Result<SlopeFit> {
    let pts: Vec<(u64, f64)> = agg
        .points
        .iter()
        .filter(|p| p.n >= lo && p.n <= hi)
        .map(|p| p.mean_abs_err.map(|e| (p.n, e)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| HarnessError::config(format!("no target for `{}`: cannot fit a rate", agg.f_id)))?;
    if pts.len() < 4 {
        return Err(HarnessError::Core(ergolevy::Error::domain(format!(
            "slope fit needs at least 4 checkpoints in [{lo}, {hi}], found {}",
            pts.len()
        ))));
    }
    if pts.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(HarnessError::Core(ergolevy::Error::domain("slope fit needs nonzero errors")));
    }
    let (ns, es): (Vec<u64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = loglog_fit(&ns, &es)?;
    Ok(SlopeFit { slope: fit.slope, stderr: fit.stderr, points: ns.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltReport {
    pub replicas: usize,
    /// Replica mean of `√Γ_n (ν̄_n(f) − target)` at the last checkpoint.
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    pub reference: f64,
}

impl CltReport {
    pub fn variance_ratio(&self) -> f64 {
        self.variance / self.reference
    }
}

/// Normalised-error statistics of `f` at the final checkpoint, against a
/// reference variance.
pub fn clt_diagnostic(agg: &AggregateRecord, reference: f64) -> Result<CltReport> {
    let last = agg.points.last().ok_or(ergolevy::Error::EmptyMeasure)?;
    match (last.mean_scaled, last.var_scaled) {
        (Some(mean), Some(variance)) => Ok(CltReport {
            replicas: last.count,
            mean,
            se: (variance / last.count as f64).sqrt(),
            variance,
            reference,
        }),
        _ => Err(HarnessError::Core(ergolevy::Error::Unsupported(format!(
            "no target for `{}`: the CLT diagnostic needs one",
            agg.f_id
        )))),
    }
}
