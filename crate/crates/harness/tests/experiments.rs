use std::f64::consts::PI;

use ergolevy::SchemeKind;
use ergolevy_harness::experiment::{aggregate, clt_diagnostic, run_experiment, Experiment};
use ergolevy_harness::output::{svg_plot, write_csv};
use ergolevy_harness::ExperimentConfig;

const SMALL: &str = r#"
[experiment]
model = "ou2d"
schemes = ["P", "W"]
steps = 2000
replicas = 5
seed = 11
functions = ["phi", "one", "coord:0"]

[measure]
kind = "isotropic-power-law"
alpha = 1.5

[checkpoints]
per_decade = 4
"#;

fn csv(threads: usize) -> Vec<String> {
    let outcome = run_experiment(ExperimentConfig::parse(SMALL).unwrap(), Some(threads)).unwrap();
    outcome
        .runs
        .iter()
        .map(|r| {
            let mut buf = Vec::new();
            write_csv(&mut buf, &outcome, r).unwrap();
            String::from_utf8(buf).unwrap()
        })
        .collect()
}

#[test]
fn thread_count_does_not_change_output() {
    assert_eq!(csv(1), csv(3));
}

#[test]
fn aggregation_ignores_completion_order() {
    let outcome = run_experiment(ExperimentConfig::parse(SMALL).unwrap(), Some(2)).unwrap();
    let runs = outcome.runs_for(SchemeKind::W).unwrap();
    let a = aggregate(SchemeKind::W, "phi", &runs.records, 0, Some(1.0));
    let mut reversed = runs.records.clone();
    reversed.reverse();
    let b = aggregate(SchemeKind::W, "phi", &reversed, 0, Some(1.0));
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((p.mean_value - q.mean_value).abs() <= 1e-12 * p.mean_value.abs());
        assert!((p.var_scaled.unwrap() - q.var_scaled.unwrap()).abs() <= 1e-9 * p.var_scaled.unwrap());
    }
}

#[test]
fn csv_layout() {
    let text = &csv(1)[0];
    let header = ergolevy_harness::output::CSV_HEADER;
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some(header));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == header.split(',').count()));
    // one row per replica, checkpoint and function
    let outcome = Experiment::resolve(ExperimentConfig::parse(SMALL).unwrap()).unwrap();
    assert_eq!(rows.len(), 5 * outcome.checkpoints.len() * 3);
    let one: Vec<_> = rows.iter().filter(|r| r[6] == "one").collect();
    assert!(one.iter().all(|r| r[7] == "1" && r[8] == "0" && r[9] == "0"));
    assert!(text.contains("# measure.alpha = 1.5"));
    assert!(text.contains(&format!("# resolved.target.phi = {}", PI * (2.0 + 0.25))));
}

#[test]
fn svg_has_a_polyline_per_scheme_and_a_target_rule() {
    let outcome = run_experiment(ExperimentConfig::parse(SMALL).unwrap(), Some(1)).unwrap();
    let aggs: Vec<_> = [SchemeKind::P, SchemeKind::W].iter().map(|&k| outcome.aggregate(k, "phi").unwrap()).collect();
    let svg = svg_plot(&aggs);
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(r#"data-scheme="P""#) && svg.contains(r#"data-scheme="W""#));
    assert_eq!(svg.matches(r#"class="target""#).count(), 1);
    let n_points = aggs[0].points.len();
    let poly = svg.lines().find(|l| l.contains("<polyline")).unwrap();
    assert_eq!(poly.split("points=\"").nth(1).unwrap().split(' ').count(), n_points);
}

#[test]
fn auto_schedule_and_guard_resolution() {
    let mut config = ExperimentConfig::parse(SMALL).unwrap();
    config.steps = 1_000_000;
    let exp = Experiment::resolve(config.clone()).unwrap();
    for s in &exp.schemes {
        assert!(!s.guard.violated);
        assert!(s.guard.ratio() <= 1.05);
    }
    // A fixed r = 0.05 threshold lets the jump count explode.
    let text = SMALL.replace("[checkpoints]", "[schedule]\nmode = \"explicit\"\ngamma1 = 1.0\nzeta = 0.9\nr = 3.0\n\n[checkpoints]");
    let mut c = ExperimentConfig::parse(&text).unwrap();
    c.steps = 1_000_000;
    let err = Experiment::resolve(c.clone()).err().expect("guard violation");
    assert_eq!(err.exit_code(), 2);
    c.allow_guard_violation = true;
    assert!(Experiment::resolve(c).is_ok());
}

#[test]
fn clt_fixture_small() {
    // Tail-only jumps, exact scheme: scaled errors are centred with variance near m₂² + m₄.
    let text = r#"
[experiment]
model = "ou2d"
scheme = "E"
steps = 20000
replicas = 40
seed = 3
functions = ["af_phi"]

[measure]
kind = "isotropic-tail"

[schedule]
mode = "explicit"
gamma1 = 0.2
zeta = 0.5
r = 1.0

[checkpoints]
list = [20000]
"#;
    let outcome = run_experiment(ExperimentConfig::parse(text).unwrap(), None).unwrap();
    let agg = outcome.aggregate(SchemeKind::E, "af_phi").unwrap();
    let c = clt_diagnostic(&agg, PI * PI / 4.0 + PI).unwrap();
    assert!(c.mean.abs() < 4.0 * c.se, "{c:?}");
    assert!(c.variance_ratio() > 0.4 && c.variance_ratio() < 1.8, "{c:?}");
}

#[test]
fn replicas_failing_beyond_the_threshold() {
    let text = r#"
[experiment]
model = "ou2d"
scheme = "W"
steps = 500
replicas = 3

[measure]
kind = "isotropic-tail"

[schedule]
mode = "explicit"
gamma1 = 40.0
zeta = 0.5
r = 1.0
"#;
    let err = run_experiment(ExperimentConfig::parse(text).unwrap(), Some(1)).err().unwrap();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("3 of 3 replicas failed"));
}
