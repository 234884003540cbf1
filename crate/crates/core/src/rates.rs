//! Rate exponents, schedule recipes and feasibility conditions for
//! polynomial steps `γ_k = γ₁ k^{-ζ}` and thresholds `u_k = γ_k^r`.

use std::fmt;

use crate::error::{Error, Result};
use crate::levy::{LevyMeasure, MeasureTraits, MomentOrder};
use crate::schedule::{Schedule, ScheduleSums};
use crate::scheme::SchemeKind;

/// Default `γ₁` chosen by the planner. Small enough that the expected jump
/// count per step stays within 5% of its initial value for stable-like
/// measures.
pub const DEFAULT_GAMMA1: f64 = 0.05;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponent {
    /// `h` with error `~ n^{-h}`.
    pub value: f64,
    /// `ζ = 1`: the rate is `√(γ₁ log n)` rather than a power.
    pub logarithmic: bool,
}

/// `h(ζ)`: `ζ` below 1/3, `(1 − ζ)/2` on `[1/3, 1)`, 0 with the
/// logarithmic flag at `ζ = 1`.
pub fn h_of_zeta(zeta: f64) -> Result<RateExponent> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::domain(format!("zeta must lie in (0, 1], got {zeta}")));
    }
    let (value, logarithmic) = if zeta == 1.0 {
        (0.0, true)
    } else if zeta <= 1.0 / 3.0 {
        (zeta, false)
    } else {
        ((1.0 - zeta) / 2.0, false)
    };
    Ok(RateExponent { value, logarithmic })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 2), got {alpha}")))
    }
}

/// Moment order used to control the jump approximation of a scheme.
pub fn moment_order(kind: SchemeKind, quasi_symmetric: bool) -> Option<MomentOrder> {
    match kind {
        SchemeKind::E => None,
        SchemeKind::P => Some(MomentOrder::Two),
        SchemeKind::W if quasi_symmetric => Some(MomentOrder::Four),
        SchemeKind::W => Some(MomentOrder::Three),
    }
}

/// Best attainable exponent for a measure of activity index `α`:
/// `min(1/3, (s − α)/(2s − α))` with `s` from [`moment_order`].
pub fn optimal_exponent(kind: SchemeKind, alpha: f64, quasi_symmetric: bool) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(match moment_order(kind, quasi_symmetric) {
        None => 1.0 / 3.0,
        Some(s) => {
            let s = s.value();
            ((s - alpha) / (2.0 * s - alpha)).min(1.0 / 3.0)
        }
    })
}

/// Limit regime of the normalised error, read off the limit of
/// `Γ_n^{(2)}/√Γ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Limit 0: centred Gaussian limit at rate `√Γ_n`.
    Clt,
    /// Finite positive limit: Gaussian limit with a bias.
    BiasedClt,
    /// Infinite limit: `(Γ_n / Γ_n^{(2)})`-scaled error converges in probability.
    ProbabilityLimit,
}

impl Regime {
    pub fn of_zeta(zeta: f64) -> Result<Regime> {
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::domain(format!("zeta must lie in (0, 1], got {zeta}")));
        }
        // Γ^{(2)}/√Γ ~ n^{(1 − 3ζ)/2}.
        Ok(if (zeta - 1.0 / 3.0).abs() < EPS {
            Regime::BiasedClt
        } else if zeta < 1.0 / 3.0 {
            Regime::ProbabilityLimit
        } else {
            Regime::Clt
        })
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Clt => "clt",
            Regime::BiasedClt => "biased-clt",
            Regime::ProbabilityLimit => "probability-limit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePlan {
    pub kind: SchemeKind,
    pub s: Option<MomentOrder>,
    pub gamma1: f64,
    pub zeta: f64,
    pub r_threshold: f64,
    pub exponent: f64,
    pub regime: Regime,
    /// `r · α ≤ 1` (or `r · q ≤ 1`): bounded expected jumps per step.
    pub complexity_ok: bool,
}

impl RatePlan {
    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(self.gamma1, self.zeta, self.r_threshold)
    }

    /// `key = value` lines.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scheme", self.kind.to_string()),
            ("s", self.s.map_or_else(|| "-".to_string(), |s| s.to_string())),
            ("gamma1", self.gamma1.to_string()),
            ("zeta", self.zeta.to_string()),
            ("r", self.r_threshold.to_string()),
            ("exponent", self.exponent.to_string()),
            ("regime", self.regime.to_string()),
            ("complexity_ok", self.complexity_ok.to_string()),
        ]
    }
}

/// Chooses `(ζ, r)` for a scheme from the measure's local behaviour.
///
/// With an activity index `α`: `ζ = max(1/3, α/(2s − α))`, `r = 1/α`.
/// Otherwise, with a variation order `q`: `ζ = 1/3` and `r` in the band
/// `[1/(s − q), 1/q]`, which must be non-empty.
pub fn recommended_schedule(kind: SchemeKind, traits: &MeasureTraits, gamma1: f64) -> Result<RatePlan> {
    if !(gamma1 > 0.0 && gamma1.is_finite()) {
        return Err(Error::domain(format!("gamma1 must be positive, got {gamma1}")));
    }
    let s = moment_order(kind, traits.quasi_symmetric);
    let third = 1.0 / 3.0;
    let (zeta, r, exponent, index) = match (s, traits.alpha, traits.q) {
        (None, alpha, q) => (third, 1.0, third, alpha.or(q)),
        (Some(s), Some(alpha), _) => {
            check_alpha(alpha)?;
            let sv = s.value();
            let zeta = (alpha / (2.0 * sv - alpha)).max(third);
            let exponent = optimal_exponent(kind, alpha, traits.quasi_symmetric)?;
            (zeta, 1.0 / alpha, exponent, Some(alpha))
        }
        (Some(s), None, Some(q)) => {
            if !(0.0..=2.0).contains(&q) {
                return Err(Error::domain(format!("variation order must lie in [0, 2], got {q}")));
            }
            let sv = s.value();
            if q > sv / 2.0 + EPS {
                return Err(Error::Infeasible(format!(
                    "scheme {kind} with s = {s} needs q ≤ {}, got q = {q}: the threshold band \
                     [1/(s−q), 1/q] is empty",
                    sv / 2.0
                )));
            }
            let lo = 1.0 / (sv - q);
            let r = if q > 0.0 { lo.max(1.0).min(1.0 / q) } else { lo.max(1.0) };
            (third, r, third, Some(q))
        }
        (Some(_), None, None) => {
            return Err(Error::domain(
                "planning needs an activity index or a variation order for the measure",
            ))
        }
    };
    let complexity_ok = index.is_none_or(|a| r * a <= 1.0 + EPS);
    Ok(RatePlan {
        kind,
        s,
        gamma1,
        zeta,
        r_threshold: r,
        exponent,
        regime: Regime::of_zeta(zeta)?,
        complexity_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaRatioPoint {
    pub n: u64,
    /// `β_n^{(s)} / Γ_n^{(2)}`.
    pub over_gamma2: f64,
    /// `β_n^{(s)} / √Γ_n`.
    pub over_sqrt_gamma: f64,
}

/// `β_{n,π}^{(s)}` relative to `Γ_n^{(2)}` and `√Γ_n` at each checkpoint.
pub fn beta_ratio_diagnostics(
    schedule: &Schedule,
    measure: &dyn LevyMeasure,
    s: MomentOrder,
    checkpoints: &[u64],
) -> Result<Vec<BetaRatioPoint>> {
    let mut out = Vec::with_capacity(checkpoints.len());
    for_each_checkpoint(schedule, measure, checkpoints, |n, sums| {
        let beta = sums.beta(s);
        out.push(BetaRatioPoint {
            n,
            over_gamma2: beta / sums.gamma2_sum(),
            over_sqrt_gamma: beta / sums.gamma_sum().sqrt(),
        });
    })?;
    Ok(out)
}

/// `Γ_n / max(√Γ_n, Γ_n^{(2)}, β_n^{(s)})` at each checkpoint, the inverse
/// of the predicted error size of a plan.
pub fn rate_bookkeeping(
    plan: &RatePlan,
    measure: &dyn LevyMeasure,
    checkpoints: &[u64],
) -> Result<Vec<(u64, f64)>> {
    let schedule = plan.schedule()?;
    let mut out = Vec::with_capacity(checkpoints.len());
    for_each_checkpoint(&schedule, measure, checkpoints, |n, sums| {
        let g = sums.gamma_sum();
        let mut denom = g.sqrt().max(sums.gamma2_sum());
        if let Some(s) = plan.s {
            denom = denom.max(sums.beta(s));
        }
        out.push((n, g / denom));
    })?;
    Ok(out)
}

fn for_each_checkpoint(
    schedule: &Schedule,
    measure: &dyn LevyMeasure,
    checkpoints: &[u64],
    mut visit: impl FnMut(u64, &ScheduleSums),
) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first() == Some(&0) {
        return Err(Error::domain("checkpoints must be positive and strictly increasing"));
    }
    let mut sums = ScheduleSums::new();
    for &cp in checkpoints {
        while sums.n() < cp {
            sums.advance(schedule, measure)?;
        }
        visit(cp, &sums);
    }
    Ok(())
}

/// Smallest `ζ` for which the low-moment (`p ∈ (1, 2]`) central limit
/// theorem applies: 1/3 when `a = 1`, else `(p + 2η)/(3p + 2η)` with
/// `η = max(a, 2r)`.
pub fn min_zeta_for_low_moment_clt(a: f64, r: f64, p: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain(format!("a must lie in (0, 1], got {a}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("r must be nonnegative, got {r}")));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::domain(format!("p must lie in (1, 2], got {p}")));
    }
    if a == 1.0 {
        return Ok(1.0 / 3.0);
    }
    let eta = a.max(2.0 * r);
    Ok((p + 2.0 * eta) / (3.0 * p + 2.0 * eta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain("x and y lengths differ"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite point in fit"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("all x values coincide"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, stderr })
}

/// OLS of `ln y` against `ln n`.
pub fn loglog_fit(ns: &[u64], ys: &[f64]) -> Result<LineFit> {
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::domain("log-log fit needs positive values"));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    ols(&xs, &ly)
}

/// Geometric grid on `[lo, hi]` with `per_decade` points per decade,
/// rounded to distinct integers and always containing both ends.
pub fn geometric_grid(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    if lo == 0 || hi < lo || per_decade == 0 {
        return Vec::new();
    }
    let decades = (hi as f64 / lo as f64).log10();
    let steps = (decades * per_decade as f64).ceil() as u64;
    let mut out = Vec::with_capacity(steps as usize + 1);
    for i in 0..=steps {
        let v = (lo as f64 * 10f64.powf(i as f64 / per_decade as f64)).round() as u64;
        let v = v.clamp(lo, hi);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    if out.last() != Some(&hi) {
        out.push(hi);
    }
    out
}
