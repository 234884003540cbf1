//! Decreasing-step Euler schemes for the invariant law of Lévy-driven SDEs.
//!
//! Three recursions approximate `ν` through weighted occupation measures:
//! exact increments ([`SchemeKind::E`]), jumps truncated below a threshold
//! ([`SchemeKind::P`]), and truncation with the removed small jumps replaced
//! by a Gaussian of matching covariance ([`SchemeKind::W`]).

pub mod empirical;
pub mod error;
pub mod increments;
pub mod levy;
pub mod model;
pub mod poisson;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod schedule;
pub mod scheme;
pub mod sum;

pub use empirical::{normalized_error, EmpiricalMeasure, NormalizedError, TestFunction};
pub use error::{Error, Result};
pub use increments::{InnovationLaw, IncrementSample};
pub use levy::{
    FiniteActivityMeasure, IsotropicPowerLaw, LevyMeasure, MeasureTraits, MomentOrder, RadialDensityMeasure,
};
pub use model::SdeModel;
pub use rates::{RatePlan, Regime};
pub use rng::{Stream, StreamRole};
pub use schedule::{Schedule, ScheduleSums};
pub use scheme::{run_chain, ChainConfig, ChainSetup, ChainState, RunRecord, SchemeKind};
