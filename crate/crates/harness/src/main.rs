use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfrc_core::model::{dbm_to_mw, linear_to_db, AngleGrid, BeamDesign};
use dfrc_harness::config::{ExperimentConfig, Profile, Scenario, Sweep};
use dfrc_harness::experiment::{self, derive_seed, DesignRun, Instance, TrialStatus};
use dfrc_harness::output;
use dfrc_harness::HarnessError;
use serde::Serialize;

/// Secure DFRC beamforming experiments.
///
/// Settings are resolved in order: profile defaults, then the config file,
/// then command-line flags.
#[derive(Debug, Parser)]
#[command(name = "dfrc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesise the flat-top benchmark covariance and write its beampattern.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Output CSV (label,theta_deg,gain_db).
        #[arg(long, default_value = "benchmark.csv")]
        out: PathBuf,
    },
    /// Design one instance and write a JSON report.
    Design {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "design.json")]
        out: PathBuf,
    },
    /// Run seeded trials, optionally over a parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// `name=v1,v2,...`, e.g. `gamma_b_db=5,10,15`.
        #[arg(long)]
        sweep: Option<Sweep>,
        /// Records CSV; the summary goes next to it with a `.json` extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Record wall-clock solve times (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Design one instance per scenario and write their beampatterns.
    Beampattern {
        #[command(flatten)]
        common: Common,
        /// Scenarios to include; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<Scenario>,
        /// Also emit the benchmark pattern under the label `benchmark`.
        #[arg(long)]
        benchmark: bool,
        /// Angular step of the output grid in degrees.
        #[arg(long, default_value_t = 1.0)]
        step_deg: f64,
        #[arg(long, default_value = "beampattern.csv")]
        out: PathBuf,
    },
    /// Write the per-iteration objective and `y` of one design.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "convergence.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter defaults: desk (N = 8, K = 2) or paper (N = 18, K = 4).
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set gamma_b_db=15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path, self.profile)?,
            None => ExperimentConfig::for_profile(self.profile.unwrap_or_default()),
        };
        for s in &self.sets {
            cfg.set(s)?;
        }
        if let Some(s) = self.scenario {
            cfg.scenario = s;
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        Ok(cfg)
    }
}

/// One instance at the configured base seed: trial 0 of an unswept run.
fn single(cfg: &ExperimentConfig, scenario: Scenario) -> Result<(Instance, DesignRun), HarnessError> {
    cfg.validate()?;
    let inst = Instance::sample(scenario, &cfg.params, derive_seed(cfg.base_seed, 0, 0))?;
    let bench = match scenario {
        Scenario::Perfect => Some(experiment::benchmark(&cfg.params, &inst.geom, cfg.solver.tol)?),
        _ => None,
    };
    let run = experiment::run_design(scenario, &inst, bench.as_ref(), &cfg.solver.design_options())?;
    Ok((inst, run))
}

#[derive(Serialize)]
struct DesignReport {
    schema: &'static str,
    scenario: Scenario,
    seed: u64,
    power_mw: f64,
    user_sinrs_db: Vec<f64>,
    eve_sinr_db: f64,
    secrecy_rate: f64,
    extraction_feasible: Option<bool>,
    relaxed_eve_sinr_db: f64,
    iterations: usize,
    converged: bool,
    objective_per_iter: Vec<f64>,
    t_vals: Option<Vec<f64>>,
}

fn design_report(cfg: &ExperimentConfig) -> Result<DesignReport, HarnessError> {
    let (inst, run) = single(cfg, cfg.scenario)?;
    let seed = derive_seed(cfg.base_seed, 0, 0);
    let (d, feasible) = experiment::extract(cfg.extraction, &run.design, &inst, cfg.randomization_samples, seed)?;
    Ok(DesignReport {
        schema: output::SCHEMA,
        scenario: cfg.scenario,
        seed,
        power_mw: d.power(),
        user_sinrs_db: inst.user_sinrs(&d).into_iter().map(linear_to_db).collect(),
        eve_sinr_db: linear_to_db(inst.eve_sinr(&d)),
        secrecy_rate: inst.secrecy_rate(&d),
        extraction_feasible: feasible,
        relaxed_eve_sinr_db: linear_to_db(inst.eve_sinr(&run.design)),
        iterations: run.trace.iterations,
        converged: run.trace.converged,
        objective_per_iter: run.trace.objective_per_iter.clone(),
        t_vals: run.aux.map(|a| a.t_vals),
    })
}

fn sweep(mut cfg: ExperimentConfig, jobs: Option<usize>) -> Result<(), HarnessError> {
    let records = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| experiment::run_experiment(&cfg))?,
        None => experiment::run_experiment(&cfg)?,
    };
    output::write_csv(&cfg.output_path, &records)?;
    let mut summary = experiment::aggregate(&records);
    summary.sweep_param = cfg.sweep.take().map(|s| s.param.name().to_string());
    output::write_json(&cfg.output_path.with_extension("json"), &summary)?;
    if let Some(w) = &summary.warning {
        eprintln!("warning: {w}");
    }
    if records.iter().all(|r| r.status == TrialStatus::Infeasible) {
        return Err(HarnessError::AllInfeasible);
    }
    if records.iter().all(|r| r.status != TrialStatus::Ok) {
        let failed = records.iter().filter(|r| r.status == TrialStatus::SolverFailure).count();
        return Err(HarnessError::AllFailed(failed));
    }
    Ok(())
}

fn beampattern_rows(
    label: &str,
    d: &BeamDesign,
    inst: &Instance,
    grid: &AngleGrid,
) -> Result<Vec<output::BeampatternRow>, HarnessError> {
    Ok(output::labelled(label, &output::emit_beampattern(d, &inst.geom, grid)?))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Synthesize { common, out } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            output::check_writable(&out)?;
            let geom = cfg.params.geometry()?;
            let bench = experiment::benchmark(&cfg.params, &geom, cfg.solver.tol)?;
            let d = BeamDesign::new(vec![], bench.matrix.clone());
            let grid = AngleGrid::full_range_deg(1.0)?;
            let pts = output::emit_beampattern(&d, &geom, &grid)?;
            output::write_csv(&out, &output::labelled("benchmark", &pts))?;
            println!(
                "benchmark: P0 = {} mW, scale = {:.6e}, fit objective = {:.6e}",
                dbm_to_mw(cfg.params.p0_dbm),
                bench.scale,
                bench.objective
            );
        }
        Command::Design { common, out } => {
            let cfg = common.resolve()?;
            output::check_writable(&out)?;
            let report = design_report(&cfg)?;
            output::write_json(&out, &report)?;
            println!(
                "{}: secrecy rate {:.4} bit/s/Hz, eve SINR {:.2} dB, {} iterations{}",
                report.scenario,
                report.secrecy_rate,
                report.eve_sinr_db,
                report.iterations,
                if report.converged { "" } else { " (not converged)" }
            );
        }
        Command::Sweep { common, trials, sweep: sw, out, jobs, timing } => {
            let mut cfg = common.resolve()?;
            if let Some(n) = trials {
                cfg.n_trials = n;
            }
            if sw.is_some() {
                cfg.sweep = sw;
            }
            if let Some(out) = out {
                cfg.output_path = out;
            }
            cfg.record_timing |= timing;
            sweep(cfg, jobs)?;
        }
        Command::Beampattern { common, scenarios, benchmark, step_deg, out } => {
            let cfg = common.resolve()?;
            output::check_writable(&out)?;
            let grid = AngleGrid::full_range_deg(step_deg)?;
            let scenarios = if scenarios.is_empty() { vec![cfg.scenario] } else { scenarios };
            let mut rows = Vec::new();
            if benchmark {
                let geom = cfg.params.geometry()?;
                let bench = experiment::benchmark(&cfg.params, &geom, cfg.solver.tol)?;
                let d = BeamDesign::new(vec![], bench.matrix);
                rows.extend(output::labelled("benchmark", &output::emit_beampattern(&d, &geom, &grid)?));
            }
            for sc in scenarios {
                let (inst, run) = single(&cfg, sc)?;
                rows.extend(beampattern_rows(sc.name(), &run.design, &inst, &grid)?);
            }
            output::write_csv(&out, &rows)?;
        }
        Command::Converge { common, out } => {
            let cfg = common.resolve()?;
            output::check_writable(&out)?;
            let (_, run) = single(&cfg, cfg.scenario)?;
            output::write_csv(&out, &output::convergence_rows(cfg.scenario.name(), &run.trace))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
