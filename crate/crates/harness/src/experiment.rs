//! Seeded Monte Carlo trials and their aggregation.

use std::time::Instant;

use dfrc_core::designers::{
    design_perfect, design_robust_csi, design_statistical, design_wide, DesignOptions, DesignTrace, RobustAux,
};
use dfrc_core::extraction::{extract_eigen, extract_randomized, ExtractionContext};
use dfrc_core::model::{
    deg_to_rad, eve_sinr, sample_channel, secrecy_rate_from_sinrs, user_sinrs, ArrayGeometry, BeamDesign,
    ChannelMatrix, CsiModel, ScenarioParams,
};
use dfrc_core::synthesis::{make_flat_top_pattern, synthesize_benchmark_tol, BenchmarkCov};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExtractionChoice, Scenario, UserParams};
use crate::HarnessError;

/// Seed of trial `trial` at sweep point `sweep_index`.
///
/// SplitMix64 finalisation over the three inputs; stable across platforms
/// and releases, unlike the standard library's hashers.
pub fn derive_seed(base_seed: u64, trial: usize, sweep_index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = mix(base_seed.wrapping_add(GOLDEN));
    h = mix(h ^ (trial as u64).wrapping_add(GOLDEN));
    mix(h ^ (sweep_index as u64).wrapping_add(GOLDEN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Infeasible,
    SolverFailure,
}

/// One row of the records CSV. Metric fields are empty for trials that did
/// not produce a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub swept_value: Option<f64>,
    pub status: TrialStatus,
    pub secrecy_rate: Option<f64>,
    pub min_user_sinr: Option<f64>,
    pub eve_sinr: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub solve_time_ms: f64,
    pub extraction_feasible: Option<bool>,
}

impl TrialRecord {
    /// Counted in aggregates.
    pub fn usable(&self) -> bool {
        self.status == TrialStatus::Ok && self.converged == Some(true)
    }
}

/// A sampled channel and the CSI the designer is given for it. The robust
/// scenarios hand the designer the true channel as the estimate; errors
/// live only inside the uncertainty sets.
#[derive(Debug, Clone)]
pub struct Instance {
    pub geom: ArrayGeometry,
    pub params: ScenarioParams,
    pub channel: ChannelMatrix,
    pub csi: CsiModel,
}

impl Instance {
    pub fn sample(scenario: Scenario, user: &UserParams, seed: u64) -> Result<Self, HarnessError> {
        let geom = user.geometry()?;
        let params = user.scenario()?;
        let channel = sample_channel(user.n_users, &geom, seed)?;
        let k = channel.n_users();
        let csi = match scenario {
            Scenario::Perfect | Scenario::Wide => CsiModel::Perfect { channel: channel.clone() },
            Scenario::RobustCsi => CsiModel::NormBounded { channel_estimate: channel.clone(), radii: vec![user.mu; k] },
            Scenario::Statistical => CsiModel::StatisticalBounded {
                covariances: (0..k).map(|i| channel.user_gram(i)).collect(),
                radii: vec![user.delta; k],
            },
        };
        Ok(Self { geom, params, channel, csi })
    }

    /// User SINRs on the realised channel.
    pub fn user_sinrs(&self, d: &BeamDesign) -> Vec<f64> {
        user_sinrs(d, &self.channel, self.params.sigma2)
    }

    /// Eavesdropper SINR at the nominal target angle.
    pub fn eve_sinr(&self, d: &BeamDesign) -> f64 {
        eve_sinr(d, &self.geom, self.params.theta0, self.params.alpha2, self.params.sigma2)
            .expect("theta0 is validated")
    }

    pub fn secrecy_rate(&self, d: &BeamDesign) -> f64 {
        secrecy_rate_from_sinrs(&self.user_sinrs(d), self.eve_sinr(d))
    }
}

/// Benchmark covariance for the perfect-CSI design: a flat-top pattern
/// around `θ0`.
pub fn benchmark(user: &UserParams, geom: &ArrayGeometry, tol: f64) -> Result<BenchmarkCov, HarnessError> {
    let pattern = make_flat_top_pattern(
        deg_to_rad(user.theta0_deg),
        deg_to_rad(user.benchmark_half_width_deg),
        deg_to_rad(user.grid_step_deg),
    )?;
    Ok(synthesize_benchmark_tol(&pattern, geom, dfrc_core::model::dbm_to_mw(user.p0_dbm), tol)?)
}

/// Relaxed design of one instance.
#[derive(Debug, Clone)]
pub struct DesignRun {
    pub design: BeamDesign,
    pub trace: DesignTrace,
    pub aux: Option<RobustAux>,
}

pub fn run_design(
    scenario: Scenario,
    inst: &Instance,
    bench: Option<&BenchmarkCov>,
    opts: &DesignOptions,
) -> dfrc_core::Result<DesignRun> {
    let (design, trace, aux) = match scenario {
        Scenario::Perfect => {
            let bench = bench.ok_or_else(|| dfrc_core::Error::Contract("perfect scenario needs a benchmark".into()))?;
            let (d, t) = design_perfect(&inst.csi, &inst.params, &inst.geom, bench, opts)?;
            (d, t, None)
        }
        Scenario::Wide => {
            let (d, t) = design_wide(&inst.csi, &inst.params, &inst.geom, opts)?;
            (d, t, None)
        }
        Scenario::RobustCsi => {
            let (d, t, a) = design_robust_csi(&inst.csi, &inst.params, &inst.geom, opts)?;
            (d, t, Some(a))
        }
        Scenario::Statistical => {
            let (d, t, a) = design_statistical(&inst.csi, &inst.params, &inst.geom, opts)?;
            (d, t, Some(a))
        }
    };
    Ok(DesignRun { design, trace, aux })
}

/// Applies the configured extraction; `None` in the flag when extraction
/// is disabled.
pub fn extract(
    choice: ExtractionChoice,
    design: &BeamDesign,
    inst: &Instance,
    samples: usize,
    seed: u64,
) -> dfrc_core::Result<(BeamDesign, Option<bool>)> {
    let ctx = ExtractionContext::new(&inst.csi, &inst.params, &inst.geom);
    match choice {
        ExtractionChoice::None => Ok((design.clone(), None)),
        ExtractionChoice::Eigen => extract_eigen(design, &ctx).map(|(d, r)| (d, Some(r.feasible_after))),
        ExtractionChoice::Randomization => {
            extract_randomized(design, samples, seed, &ctx).map(|(d, r)| (d, Some(r.feasible_after)))
        }
    }
}

struct Point {
    index: usize,
    value: Option<f64>,
    params: UserParams,
    bench: Option<BenchmarkCov>,
}

fn run_trial(cfg: &ExperimentConfig, point: &Point, trial: usize) -> Result<TrialRecord, HarnessError> {
    let seed = derive_seed(cfg.base_seed, trial, point.index);
    let inst = Instance::sample(cfg.scenario, &point.params, seed)?;
    let opts = cfg.solver.design_options();
    let start = Instant::now();
    let outcome = run_design(cfg.scenario, &inst, point.bench.as_ref(), &opts);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = TrialRecord {
        trial_index: trial,
        seed,
        scenario: cfg.scenario,
        swept_value: point.value,
        status: TrialStatus::Ok,
        secrecy_rate: None,
        min_user_sinr: None,
        eve_sinr: None,
        iterations: None,
        converged: None,
        solve_time_ms: if cfg.record_timing { elapsed_ms } else { 0.0 },
        extraction_feasible: None,
    };
    let run = match outcome {
        Ok(run) => run,
        Err(dfrc_core::Error::Infeasible { .. }) => {
            rec.status = TrialStatus::Infeasible;
            return Ok(rec);
        }
        Err(dfrc_core::Error::Solver(_)) => {
            rec.status = TrialStatus::SolverFailure;
            return Ok(rec);
        }
        Err(e) => return Err(e.into()),
    };
    let (design, feasible) = extract(cfg.extraction, &run.design, &inst, cfg.randomization_samples, seed)?;
    let sinrs = inst.user_sinrs(&design);
    let eve = inst.eve_sinr(&design);
    rec.secrecy_rate = Some(secrecy_rate_from_sinrs(&sinrs, eve));
    rec.min_user_sinr = Some(sinrs.iter().copied().fold(f64::INFINITY, f64::min));
    rec.eve_sinr = Some(eve);
    rec.iterations = Some(run.trace.iterations);
    rec.converged = Some(run.trace.converged);
    rec.extraction_feasible = feasible;
    Ok(rec)
}

/// Runs every (sweep point, trial) pair on the current rayon pool. Records
/// come back ordered by sweep point, then trial, whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>, HarnessError> {
    cfg.validate()?;
    crate::output::check_writable(&cfg.output_path)?;
    let points = cfg
        .sweep_points()
        .into_iter()
        .enumerate()
        .map(|(index, (value, params))| {
            let bench = match cfg.scenario {
                Scenario::Perfect => Some(benchmark(&params, &params.geometry()?, cfg.solver.tol)?),
                _ => None,
            };
            Ok(Point { index, value, params, bench })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let work: Vec<(&Point, usize)> = points.iter().flat_map(|p| (0..cfg.n_trials).map(move |t| (p, t))).collect();
    work.par_iter().map(|&(p, t)| run_trial(cfg, p, t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub swept_value: Option<f64>,
    pub n_trials: usize,
    pub n_feasible: usize,
    /// Feasible and converged trials, the ones the statistics cover.
    pub n_used: usize,
    pub feasibility_fraction: f64,
    pub secrecy_rate: Option<Stat>,
    pub eve_sinr: Option<Stat>,
    pub min_user_sinr: Option<Stat>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub scenario: Option<Scenario>,
    pub sweep_param: Option<String>,
    /// Set when no trial at all was usable.
    pub warning: Option<String>,
    pub groups: Vec<GroupSummary>,
}

/// Per swept value statistics over the usable records, in order of first
/// appearance.
pub fn aggregate(records: &[TrialRecord]) -> Summary {
    let mut keys: Vec<Option<u64>> = Vec::new();
    for r in records {
        let k = r.swept_value.map(f64::to_bits);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let groups: Vec<GroupSummary> = keys
        .iter()
        .map(|k| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.swept_value.map(f64::to_bits) == *k).collect();
            let used: Vec<&TrialRecord> = rows.iter().copied().filter(|r| r.usable()).collect();
            let n_feasible = rows.iter().filter(|r| r.status == TrialStatus::Ok).count();
            let col = |f: fn(&TrialRecord) -> Option<f64>| used.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
            let iters = col(|r| r.iterations.map(|i| i as f64));
            GroupSummary {
                swept_value: k.map(f64::from_bits),
                n_trials: rows.len(),
                n_feasible,
                n_used: used.len(),
                feasibility_fraction: n_feasible as f64 / rows.len() as f64,
                secrecy_rate: Stat::of(&col(|r| r.secrecy_rate)),
                eve_sinr: Stat::of(&col(|r| r.eve_sinr)),
                min_user_sinr: Stat::of(&col(|r| r.min_user_sinr)),
                mean_iterations: Stat::of(&iters).map(|s| s.mean),
            }
        })
        .collect();
    let any_used = groups.iter().any(|g| g.n_used > 0);
    Summary {
        schema: crate::output::SCHEMA.to_string(),
        scenario: records.first().map(|r| r.scenario),
        sweep_param: None,
        warning: (!any_used).then(|| "no feasible and converged trials; statistics are empty".to_string()),
        groups: if any_used { groups } else { Vec::new() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(value: Option<f64>, rate: f64, status: TrialStatus) -> TrialRecord {
        TrialRecord {
            trial_index: 0,
            seed: 0,
            scenario: Scenario::Perfect,
            swept_value: value,
            status,
            secrecy_rate: Some(rate),
            min_user_sinr: Some(10.0),
            eve_sinr: Some(0.1),
            iterations: Some(3),
            converged: Some(true),
            solve_time_ms: 0.0,
            extraction_feasible: Some(true),
        }
    }

    #[test]
    fn single_record_has_zero_spread() {
        let s = aggregate(&[rec(None, 1.5, TrialStatus::Ok)]);
        let g = &s.groups[0];
        assert_eq!(g.secrecy_rate, Some(Stat { mean: 1.5, std: 0.0 }));
        assert_eq!(g.feasibility_fraction, 1.0);
        assert!(s.warning.is_none());
    }

    #[test]
    fn two_records_average() {
        let s = aggregate(&[rec(None, 1.0, TrialStatus::Ok), rec(None, 3.0, TrialStatus::Ok)]);
        assert_eq!(s.groups[0].secrecy_rate.unwrap().mean, 2.0);
    }

    #[test]
    fn groups_follow_sweep_order_and_skip_unusable_rows() {
        let mut unconverged = rec(Some(5.0), 100.0, TrialStatus::Ok);
        unconverged.converged = Some(false);
        let s = aggregate(&[
            rec(Some(10.0), 2.0, TrialStatus::Ok),
            rec(Some(5.0), 1.0, TrialStatus::Ok),
            unconverged,
            rec(Some(5.0), 0.0, TrialStatus::Infeasible),
        ]);
        assert_eq!(s.groups.len(), 2);
        assert_eq!(s.groups[0].swept_value, Some(10.0));
        let g = &s.groups[1];
        assert_eq!((g.n_trials, g.n_feasible, g.n_used), (3, 2, 1));
        assert_eq!(g.secrecy_rate.unwrap().mean, 1.0);
        assert!((g.feasibility_fraction - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_infeasible_gives_warning() {
        let s = aggregate(&[rec(None, 0.0, TrialStatus::Infeasible)]);
        assert!(s.groups.is_empty());
        assert!(s.warning.is_some());
    }

    #[test]
    fn seeds_differ_across_trials_and_points() {
        let a = derive_seed(1, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(2, 0, 0));
    }
}
