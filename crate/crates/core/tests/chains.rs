use std::sync::Arc;

use ergolevy::levy::{small_jump_cov_factor, FiniteActivityMeasure, IsotropicPowerLaw, LevyMeasure};
use ergolevy::model::{identity_field, MatrixField, VectorField};
use ergolevy::scheme::{ChainSetup, ChainState};
use ergolevy::{
    run_chain, ChainConfig, EmpiricalMeasure, InnovationLaw, Schedule, SchemeKind, SdeModel, Stream, StreamRole,
    TestFunction,
};

fn ou() -> SdeModel {
    let drift: VectorField = Arc::new(|x, out| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -v;
        }
    });
    SdeModel::new(2, 2, drift).unwrap().with_jump_coeff(identity_field(2))
}

fn phi() -> Arc<[TestFunction]> {
    vec![TestFunction::new("phi", Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()))].into()
}

fn path(
    model: &SdeModel,
    measure: &dyn LevyMeasure,
    schedule: Schedule,
    kind: SchemeKind,
    steps: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let cfg = ChainConfig::new(kind).with_x0(vec![0.3, -0.2]);
    let mut c = ChainState::new(model, measure, schedule, cfg, phi(), seed, 0).unwrap();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        c.step().unwrap();
        out.push(c.x().to_vec());
    }
    out
}

#[test]
fn exact_and_truncated_paths_coincide_below_the_support() {
    let model = ou();
    let m = FiniteActivityMeasure::isotropic_tail(1.0, 8.0).unwrap();
    let s = Schedule::new(0.5, 0.5, 1.0).unwrap().with_u_cap(Some(0.5)).unwrap();
    let e = path(&model, &m, s, SchemeKind::E, 10_000, 42);
    let p = path(&model, &m, s, SchemeKind::P, 10_000, 42);
    let w = path(&model, &m, s, SchemeKind::W, 10_000, 42);
    assert_eq!(e, p);
    assert_eq!(p, w);
    assert!(e.iter().any(|x| x[0] != e[0][0]));
}

#[test]
fn w_minus_p_is_the_wiener_correction() {
    let kappa: MatrixField = Arc::new(|x: &[f64], out| {
        out[(0, 0)] = 1.0 + x[0] * x[0];
        out[(0, 1)] = 0.5;
        out[(1, 0)] = -0.25;
        out[(1, 1)] = 2.0;
    });
    let model = ou().with_jump_coeff(kappa.clone());
    let m = IsotropicPowerLaw::new(1.0).unwrap();
    let s = Schedule::new(0.2, 1.0 / 3.0, 1.0).unwrap();
    let seed = 9;
    let p = path(&model, &m, s, SchemeKind::P, 1, seed);
    let w = path(&model, &m, s, SchemeKind::W, 1, seed);

    let x0 = [0.3, -0.2];
    let gamma = s.step(1);
    let q = small_jump_cov_factor(&m, s.threshold(1)).unwrap().q;
    let mut lambda = [0.0; 2];
    InnovationLaw::Gaussian.fill(&mut Stream::derive(seed, 0, StreamRole::Wiener), &mut lambda);
    let mut k = nalgebra::DMatrix::zeros(2, 2);
    kappa(&x0, &mut k);
    let corr = &k * (&q * nalgebra::DVector::from_column_slice(&lambda)) * gamma.sqrt();
    for i in 0..2 {
        let diff = w[0][i] - p[0][i];
        assert!((diff - corr[i]).abs() <= 1e-12 * (1.0 + corr[i].abs()), "{diff} vs {}", corr[i]);
    }
}

#[test]
fn no_jumps_makes_the_schemes_agree() {
    let model = ou().without_jumps().with_diffusion(identity_field(2));
    let finite = FiniteActivityMeasure::isotropic_tail(1.0, 8.0).unwrap();
    let stable = IsotropicPowerLaw::new(1.5).unwrap();
    let s = Schedule::new(0.3, 1.0 / 3.0, 1.0).unwrap();
    let e = path(&model, &finite, s, SchemeKind::E, 2000, 5);
    let p = path(&model, &stable, s, SchemeKind::P, 2000, 5);
    let w = path(&model, &stable, s, SchemeKind::W, 2000, 5);
    assert_eq!(e, p);
    assert_eq!(p, w);
}

#[test]
fn same_seed_same_record() {
    let model = ou();
    let m = IsotropicPowerLaw::new(1.0).unwrap();
    let s = Schedule::new(0.05, 1.0 / 3.0, 1.0).unwrap();
    let cfg = ChainConfig::new(SchemeKind::W);
    let functions = phi();
    let setup = ChainSetup { model: &model, measure: &m, schedule: s, config: &cfg, functions: &functions };
    let a = run_chain(setup, 5000, &[10, 100, 5000], 3, 4).unwrap();
    let b = run_chain(setup, 5000, &[10, 100, 5000], 3, 4).unwrap();
    let c = run_chain(setup, 5000, &[10, 100, 5000], 3, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.final_x, c.final_x);
}

#[test]
fn empirical_measure_replays_the_visited_points() {
    let model = ou();
    let m = IsotropicPowerLaw::new(1.0).unwrap();
    let s = Schedule::new(0.1, 0.5, 1.0).unwrap();
    let mut c = ChainState::new(&model, &m, s, ChainConfig::new(SchemeKind::P), phi(), 8, 0).unwrap();
    let mut replay = EmpiricalMeasure::new(phi());
    for k in 1..=500 {
        replay.update(c.x(), s.step(k)).unwrap();
        c.step().unwrap();
    }
    assert_eq!(c.empirical().integrate("phi").unwrap(), replay.integrate("phi").unwrap());
}

#[test]
fn ou_chain_lands_near_the_invariant_moment() {
    // ν(φ) = π(1/(2−α) + 1/4) at α = 1; a short W run should be in the vicinity.
    let model = ou();
    let m = IsotropicPowerLaw::new(1.0).unwrap();
    let s = Schedule::new(0.05, 1.0 / 3.0, 1.0).unwrap();
    let cfg = ChainConfig::new(SchemeKind::W);
    let functions = phi();
    let setup = ChainSetup { model: &model, measure: &m, schedule: s, config: &cfg, functions: &functions };
    let target = std::f64::consts::PI * 1.25;
    let mean: f64 = (0..4)
        .map(|r| run_chain(setup, 100_000, &[100_000], 11, r).unwrap().rows[0].values[0])
        .sum::<f64>()
        / 4.0;
    assert!((mean - target).abs() / target < 0.15, "{mean}");
}
