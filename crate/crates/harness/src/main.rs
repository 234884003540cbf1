use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergolevy::levy::{LevyMeasure, MomentOrder};
use ergolevy_harness::config::parse_measure;
use ergolevy_harness::experiment::{fit_rate_slope, run_experiment, Experiment};
use ergolevy_harness::output::{emit_csv, emit_svg_plot};
use ergolevy_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "ergolevy", version, about = "Decreasing-step Euler schemes for Lévy-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved step schedule for each scheme.
    Plan(Common),
    /// Print tail masses and truncated moments of the configured measure.
    Moments {
        #[command(flatten)]
        common: Common,
        /// Thresholds at which to evaluate.
        #[arg(long = "u", value_delimiter = ',', default_values_t = [1.0, 0.1, 0.01, 0.001])]
        thresholds: Vec<f64>,
    },
    /// Run the experiment and write CSV and SVG outputs.
    Run(Common),
    /// Report the expected jump count per step over the horizon.
    Guard(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn text(&self) -> Result<String> {
        fs::read_to_string(&self.config).map_err(|e| HarnessError::io(&self.config, e))
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::parse(&self.text()?)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.replicas {
            if r == 0 {
                return Err(HarnessError::config("--replicas must be positive"));
            }
            c.replicas = r;
        }
        if let Some(n) = self.steps {
            if n == 0 {
                return Err(HarnessError::config("--steps must be positive"));
            }
            c.steps = n;
        }
        Ok(c)
    }
}

fn plan(common: &Common) -> Result<()> {
    let exp = Experiment::resolve(common.load()?)?;
    for s in &exp.schemes {
        match &s.plan {
            Some(p) => {
                for (k, v) in p.key_values() {
                    println!("{}.{k} = {v}", s.kind);
                }
            }
            None => {
                println!("{}.gamma1 = {}", s.kind, s.schedule.gamma1);
                println!("{}.zeta = {}", s.kind, s.schedule.zeta);
                println!("{}.r = {}", s.kind, s.schedule.r_threshold);
            }
        }
        if let Some(c) = s.schedule.u_cap {
            println!("{}.u_cap = {c}", s.kind);
        }
    }
    Ok(())
}

fn moments(common: &Common, thresholds: &[f64]) -> Result<()> {
    let measure = parse_measure(&common.text()?)?.build()?;
    let m: &dyn LevyMeasure = measure.as_ref();
    println!("dim = {}", m.dim());
    println!("alpha = {}", m.activity_index().map_or("-".into(), |a| a.to_string()));
    println!("q = {}", m.variation_order().map_or("-".into(), |q| q.to_string()));
    println!("symmetric = {}", m.is_symmetric());
    println!("quasi_symmetric = {}", m.is_quasi_symmetric_near_zero());
    println!("moment_order_sup = {}", m.moment_order_sup());
    for o in MomentOrder::ALL {
        println!("m{o} = {:.12e}", m.truncated_abs_moment(o, f64::INFINITY)?);
    }
    println!("u,tail_mass,m2_below,m3_below,m4_below");
    for &u in thresholds {
        print!("{u},{:.12e}", m.tail_mass(u)?);
        for o in MomentOrder::ALL {
            print!(",{:.12e}", m.truncated_abs_moment(o, u)?);
        }
        println!();
    }
    Ok(())
}

fn guard(common: &Common) -> Result<()> {
    let mut config = common.load()?;
    config.allow_guard_violation = true;
    let exp = Experiment::resolve(config)?;
    let mut violated = false;
    for s in &exp.schemes {
        let g = &s.guard;
        println!(
            "{}: first = {:.6e} sup = {:.6e} at k = {} ratio = {:.4} bound = {:.6e} {}",
            s.kind,
            g.first,
            g.sup,
            g.argsup,
            g.ratio(),
            g.bound,
            if g.violated { "VIOLATED" } else { "ok" }
        );
        violated |= g.violated;
    }
    if violated {
        return Err(HarnessError::config("complexity guard violated"));
    }
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let outcome = run_experiment(common.load()?, common.threads)?;
    let exp = &outcome.experiment;
    let n = exp.config.steps;
    for runs in &outcome.runs {
        if !runs.failures.is_empty() {
            eprintln!("{}: {} replica(s) failed", runs.scheme.kind, runs.failures.len());
        }
        for f in exp.functions.iter() {
            let agg = outcome.aggregate(runs.scheme.kind, &f.id)?;
            let Some(last) = agg.points.last() else { continue };
            print!("{} {} n = {} nu_hat = {:.6} ± {:.6}", agg.kind, agg.f_id, last.n, last.mean_value, last.se_value);
            if let (Some(t), Some(e)) = (agg.target, last.mean_abs_err) {
                print!(" target = {t:.6} mean|err| = {e:.3e}");
                if let Ok(fit) = fit_rate_slope(&agg, (n / 100).max(1), n) {
                    print!(" slope = {:.4} ± {:.4}", fit.slope, fit.stderr);
                }
            }
            println!();
        }
    }
    for p in emit_csv(&common.out, &outcome)?.into_iter().chain(emit_svg_plot(&common.out, &outcome)?) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Plan(c) => plan(c),
        Command::Moments { common, thresholds } => moments(common, thresholds),
        Command::Run(c) => run(c),
        Command::Guard(c) => guard(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
