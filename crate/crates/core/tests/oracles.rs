//! Closed-form masses and moments against a composite Simpson rule in
//! `t = ln r`, written here independently of the library quadrature.

use std::f64::consts::PI;

use ergolevy::levy::{small_jump_cov_factor, Atom, FiniteActivityMeasure, IsotropicPowerLaw, LevyMeasure, MomentOrder};

/// `∫_{ln a}^{ln b} h(t) dt` by composite Simpson.
fn simpson(h: impl Fn(f64) -> f64, ta: f64, tb: f64, n: usize) -> f64 {
    let step = (tb - ta) / n as f64;
    let mut acc = h(ta) + h(tb);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * h(ta + i as f64 * step);
    }
    acc * step / 3.0
}

/// `ln ψ(e^t)` for the density `|y|^{-(α+2)}` inside the unit ball and
/// `|y|^{-8}` outside.
fn ln_psi(alpha: f64, t: f64) -> f64 {
    if t <= 0.0 {
        -(alpha + 2.0) * t
    } else {
        -8.0 * t
    }
}

/// `2π ∫_a^b r^{1+s} ψ(r) dr` in `t = ln r`, split at the density break.
fn radial(alpha: f64, s: f64, a: f64, b: f64) -> f64 {
    let h = |t: f64| ((2.0 + s) * t + ln_psi(alpha, t)).exp();
    let (ta, tb) = (a.ln(), b.min(1e12).ln());
    let mut total = 0.0;
    if ta < 0.0 {
        total += simpson(h, ta, tb.min(0.0), 200_000);
    }
    if tb > 0.0 {
        total += simpson(h, ta.max(0.0), tb, 200_000);
    }
    2.0 * PI * total
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

const ALPHAS: [f64; 5] = [0.3, 0.7, 1.0, 1.5, 1.9];
const US: [f64; 4] = [0.01, 0.1, 0.5, 1.0];

#[test]
fn tail_mass_matches_oracle() {
    for &alpha in &ALPHAS {
        let m = IsotropicPowerLaw::new(alpha).unwrap();
        for &u in US.iter().chain(&[2.0]) {
            let oracle = radial(alpha, 0.0, u, f64::INFINITY);
            let got = m.tail_mass(u).unwrap();
            assert!(rel(got, oracle) < 1e-8, "alpha {alpha}, u {u}: {got} vs {oracle}");
        }
    }
}

#[test]
fn truncated_moments_match_oracle() {
    for &alpha in &ALPHAS {
        let m = IsotropicPowerLaw::new(alpha).unwrap();
        for &u in US.iter().chain(&[2.0]) {
            for s in MomentOrder::ALL {
                // Integrate from far below u; with s − α ≥ 0.1 the missing piece is < 1e-13 relative.
                let oracle = radial(alpha, s.value(), u * 1e-130, u);
                let got = m.truncated_abs_moment(s, u).unwrap();
                assert!(rel(got, oracle) < 1e-8, "alpha {alpha}, s {s}, u {u}: {got} vs {oracle}");
            }
        }
    }
}

#[test]
fn covariance_matches_angular_oracle() {
    // C_11 = ∫ r³ψ(r) dr · ∫ cos²θ dθ; C_12 = ∫ r³ψ(r) dr · ∫ cosθ sinθ dθ = 0.
    for &alpha in &ALPHAS {
        let m = IsotropicPowerLaw::new(alpha).unwrap();
        for &u in &US {
            let radial_part = radial(alpha, 2.0, u * 1e-130, u) / (2.0 * PI);
            let c11 = radial_part * PI;
            let cov = m.small_jump_cov(u).unwrap();
            assert!(rel(cov[(0, 0)], c11) < 1e-8);
            assert!(rel(cov[(1, 1)], c11) < 1e-8);
            assert_eq!(cov[(0, 1)], 0.0);
            let f = small_jump_cov_factor(&m, u).unwrap();
            let back = &f.q * f.q.transpose();
            assert!((&back - &cov).norm() <= 1e-10 * cov.norm());
        }
    }
}

#[test]
fn closed_form_values() {
    let m1 = IsotropicPowerLaw::new(1.0).unwrap();
    assert!(rel(m1.tail_mass(0.1).unwrap(), 55.0 * PI / 3.0) < 1e-12);
    assert!(rel(m1.tail_mass(1.0).unwrap(), PI / 3.0) < 1e-12);
    assert!(rel(m1.truncated_abs_moment(MomentOrder::Two, 1.0).unwrap(), 2.0 * PI) < 1e-12);
    let m53 = IsotropicPowerLaw::new(5.0 / 3.0).unwrap();
    assert!(rel(m53.truncated_abs_moment(MomentOrder::Two, 1.0).unwrap(), 6.0 * PI) < 1e-10);
    let q = small_jump_cov_factor(&m1, 0.5).unwrap().q;
    assert!(rel(q[(0, 0)], (PI / 2.0).sqrt()) < 1e-12);
    let q = small_jump_cov_factor(&m53, 1.0).unwrap().q;
    assert!(rel(q[(1, 1)], (3.0 * PI).sqrt()) < 1e-10);
}

#[test]
fn finite_sum_oracle_for_atoms() {
    let atoms = vec![
        Atom { mass: 2.0, jump: vec![1.0, 0.0] },
        Atom { mass: 1.0, jump: vec![-3.0, 0.0] },
        Atom { mass: 0.5, jump: vec![0.0, 2.0] },
    ];
    let m = FiniteActivityMeasure::atoms(atoms.clone()).unwrap();
    for &u in &[0.5, 1.5, 2.5, 4.0] {
        let above: Vec<&Atom> = atoms.iter().filter(|a| a.jump.iter().map(|v| v * v).sum::<f64>().sqrt() > u).collect();
        let mass: f64 = above.iter().map(|a| a.mass).sum();
        assert!((m.tail_mass(u).unwrap() - mass).abs() < 1e-14);
        let drift = m.compensator_drift(u).unwrap();
        for i in 0..2 {
            let d: f64 = above.iter().map(|a| a.mass * a.jump[i]).sum();
            assert!((drift[i] - d).abs() < 1e-14);
        }
        for s in MomentOrder::ALL {
            let below: f64 = atoms
                .iter()
                .map(|a| (a.mass, a.jump.iter().map(|v| v * v).sum::<f64>().sqrt()))
                .filter(|&(_, r)| r <= u)
                .map(|(w, r)| w * r.powf(s.value()))
                .sum();
            assert!((m.truncated_abs_moment(s, u).unwrap() - below).abs() < 1e-12);
        }
    }
}

#[test]
fn tail_only_moments() {
    let m = FiniteActivityMeasure::isotropic_tail(1.0, 8.0).unwrap();
    assert!(rel(m.total_mass().unwrap(), PI / 3.0) < 1e-12);
    assert!(rel(m.truncated_abs_moment(MomentOrder::Two, f64::INFINITY).unwrap(), PI / 2.0) < 1e-12);
    assert!(rel(m.truncated_abs_moment(MomentOrder::Four, f64::INFINITY).unwrap(), PI) < 1e-12);
    assert_eq!(m.truncated_abs_moment(MomentOrder::Two, 0.9).unwrap(), 0.0);
    assert_eq!(m.tail_mass(0.5).unwrap(), m.total_mass().unwrap());
    assert_eq!(small_jump_cov_factor(&m, 0.9).unwrap().q.norm(), 0.0);
}
