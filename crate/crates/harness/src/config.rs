//! Experiment configuration in user units (degrees, dB, dBm).
//!
//! Configs are flat TOML tables. Every key is optional; missing keys fall
//! back to the selected profile.
//!
//! ```toml
//! scenario = "wide"
//! n_trials = 50
//! base_seed = 7
//! gamma_b_db = 10.0
//! sweep_param = "gamma_s_db"
//! sweep_values = [20.0, 30.0, 40.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dfrc_core::designers::DesignOptions;
use dfrc_core::model::{
    db_to_linear, dbm_to_mw, deg_to_rad, ArrayGeometry, ScenarioParams,
};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Known target angle, perfect CSI.
    Perfect,
    /// Target somewhere in `[θ0 − Δθ, θ0 + Δθ]`, perfect CSI.
    Wide,
    /// Norm-bounded channel errors of radius `mu`.
    RobustCsi,
    /// Channel covariances known up to a Frobenius ball of radius `delta`.
    Statistical,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Perfect, Scenario::Wide, Scenario::RobustCsi, Scenario::Statistical];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Perfect => "perfect",
            Scenario::Wide => "wide",
            Scenario::RobustCsi => "robust_csi",
            Scenario::Statistical => "statistical",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?} (expected perfect, wide, robust_csi or statistical)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionChoice {
    Eigen,
    Randomization,
    None,
}

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GammaBDb,
    GammaSDb,
    P0Dbm,
    DeltaThetaDeg,
    Mu,
    Delta,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::GammaBDb,
        SweepParam::GammaSDb,
        SweepParam::P0Dbm,
        SweepParam::DeltaThetaDeg,
        SweepParam::Mu,
        SweepParam::Delta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::GammaBDb => "gamma_b_db",
            SweepParam::GammaSDb => "gamma_s_db",
            SweepParam::P0Dbm => "p0_dbm",
            SweepParam::DeltaThetaDeg => "delta_theta_deg",
            SweepParam::Mu => "mu",
            SweepParam::Delta => "delta",
        }
    }

    pub fn apply(self, params: &mut UserParams, value: f64) {
        match self {
            SweepParam::GammaBDb => params.gamma_b_db = value,
            SweepParam::GammaSDb => params.gamma_s_db = value,
            SweepParam::P0Dbm => params.p0_dbm = value,
            SweepParam::DeltaThetaDeg => params.delta_theta_deg = value,
            SweepParam::Mu => params.mu = value,
            SweepParam::Delta => params.delta = value,
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = SweepParam::ALL.iter().map(|p| p.name()).collect();
            format!("unknown sweep parameter {s:?} (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = String;

    /// `name=v1,v2,...`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, list) = s.split_once('=').ok_or_else(|| format!("sweep {s:?} is not of the form name=v1,v2"))?;
        let param = name.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad sweep value {v:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Sweep { param, values })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// N = 8, K = 2.
    #[default]
    Desk,
    /// N = 18, K = 4, γ_s = 40 dB.
    Paper,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(format!("unknown profile {s:?} (expected desk or paper)")),
        }
    }
}

/// Scenario constants in user units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserParams {
    pub n_antennas: usize,
    pub n_users: usize,
    pub spacing: f64,
    pub theta0_deg: f64,
    pub delta_theta_deg: f64,
    pub gamma_b_db: f64,
    pub gamma_s_db: f64,
    pub p0_dbm: f64,
    pub sigma2: f64,
    pub alpha2: f64,
    pub ripple: f64,
    /// `γ_bp = gamma_bp_factor · P_0²`.
    pub gamma_bp_factor: f64,
    pub grid_step_deg: f64,
    pub guard_deg: f64,
    /// Half-width of the flat-top pattern the perfect-CSI benchmark is
    /// synthesised from.
    pub benchmark_half_width_deg: f64,
    pub mu: f64,
    pub delta: f64,
}

impl UserParams {
    pub fn for_profile(profile: Profile) -> Self {
        let desk = Self {
            n_antennas: 8,
            n_users: 2,
            spacing: 0.5,
            theta0_deg: 0.0,
            delta_theta_deg: 5.0,
            gamma_b_db: 10.0,
            gamma_s_db: 30.0,
            p0_dbm: 30.0,
            sigma2: 1.0,
            alpha2: 1.0,
            ripple: 0.1,
            gamma_bp_factor: 0.1,
            grid_step_deg: 1.0,
            guard_deg: 5.0,
            benchmark_half_width_deg: 5.0,
            mu: 0.1,
            delta: 0.05,
        };
        match profile {
            Profile::Desk => desk,
            Profile::Paper => Self { n_antennas: 18, n_users: 4, gamma_s_db: 40.0, ..desk },
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, HarnessError> {
        Ok(ArrayGeometry::new(self.n_antennas, self.spacing)?)
    }

    /// Linear-unit parameters with the default main-beam and sidelobe grids.
    pub fn scenario(&self) -> Result<ScenarioParams, HarnessError> {
        let theta0 = deg_to_rad(self.theta0_deg);
        let delta = deg_to_rad(self.delta_theta_deg);
        let (main, side) = ScenarioParams::default_grids(
            theta0,
            delta,
            deg_to_rad(self.grid_step_deg),
            deg_to_rad(self.guard_deg),
        )?;
        let p0 = dbm_to_mw(self.p0_dbm);
        let params = ScenarioParams {
            theta0,
            delta_theta: delta,
            gamma_b: db_to_linear(self.gamma_b_db),
            gamma_s: db_to_linear(self.gamma_s_db),
            gamma_bp: self.gamma_bp_factor * p0 * p0,
            p0,
            sigma2: self.sigma2,
            alpha2: self.alpha2,
            ripple: self.ripple,
            mainbeam_grid: main,
            sidelobe_grid: side,
        };
        params.validate()?;
        Ok(params)
    }

    fn check(&self) -> Result<(), String> {
        if self.n_antennas < 2 {
            return Err("n_antennas must be at least 2".into());
        }
        if self.n_users == 0 {
            return Err("n_users must be at least 1".into());
        }
        let finite = [
            self.spacing,
            self.theta0_deg,
            self.delta_theta_deg,
            self.gamma_b_db,
            self.gamma_s_db,
            self.p0_dbm,
            self.sigma2,
            self.alpha2,
            self.ripple,
            self.gamma_bp_factor,
            self.grid_step_deg,
            self.guard_deg,
            self.benchmark_half_width_deg,
            self.mu,
            self.delta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("all numeric parameters must be finite".into());
        }
        if self.mu < 0.0 || self.delta < 0.0 {
            return Err("uncertainty radii mu and delta must be nonnegative".into());
        }
        Ok(())
    }
}

/// Solver and iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub epsilon: f64,
    pub iter_max: usize,
    pub eve_sinr_floor: f64,
    pub objective_rtol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = DesignOptions::default();
        Self {
            tol: d.tol,
            epsilon: d.epsilon,
            iter_max: d.iter_max,
            eve_sinr_floor: d.eve_sinr_floor,
            objective_rtol: d.objective_rtol,
        }
    }
}

impl SolverSettings {
    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            epsilon: self.epsilon,
            iter_max: self.iter_max,
            tol: self.tol,
            eve_sinr_floor: self.eve_sinr_floor,
            objective_rtol: self.objective_rtol,
            ..DesignOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub params: UserParams,
    pub n_trials: usize,
    pub base_seed: u64,
    pub sweep: Option<Sweep>,
    pub extraction: ExtractionChoice,
    pub randomization_samples: usize,
    pub solver: SolverSettings,
    pub output_path: PathBuf,
    /// Measure wall-clock solve time. Off by default so that repeated runs
    /// produce identical bytes.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            scenario: Scenario::Perfect,
            params: UserParams::for_profile(profile),
            n_trials: 10,
            base_seed: 1,
            sweep: None,
            extraction: ExtractionChoice::Eigen,
            randomization_samples: 200,
            solver: SolverSettings::default(),
            output_path: PathBuf::from("records.csv"),
            record_timing: false,
        }
    }

    /// Profile defaults overridden by the keys present in a TOML file. An
    /// explicit `profile` argument wins over the file's `profile` key.
    pub fn load(path: &Path, profile: Option<Profile>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, profile)
    }

    pub fn from_toml(text: &str, profile: Option<Profile>) -> Result<Self, HarnessError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let profile = profile.or(file.profile).unwrap_or_default();
        let mut cfg = Self::for_profile(profile);
        file.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the keys of a flat TOML snippet on top of `self`. `profile`
    /// is not accepted here.
    pub fn merge_toml(&mut self, text: &str) -> Result<(), HarnessError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if file.profile.is_some() {
            return Err(HarnessError::Config("profile can only be chosen on the command line or at the top of a config file".into()));
        }
        file.apply(self)
    }

    /// Applies a `key=value` override. Bare words are taken as strings.
    pub fn set(&mut self, assignment: &str) -> Result<(), HarnessError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {assignment:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let mut trial = self.clone();
        match trial.merge_toml(&format!("{key} = {value}")) {
            Ok(()) => {
                *self = trial;
                Ok(())
            }
            Err(first) => {
                let quoted = format!("{key} = {}", toml::Value::String(value.to_string()));
                self.merge_toml(&quoted).map_err(|_| first)
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_trials == 0 {
            return Err(HarnessError::Config("n_trials must be at least 1".into()));
        }
        self.params.check().map_err(HarnessError::Config)?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(HarnessError::Config("sweep needs at least one value".into()));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::Config("sweep values must be finite".into()));
            }
        }
        if self.extraction == ExtractionChoice::Randomization && self.randomization_samples == 0 {
            return Err(HarnessError::Config("randomization_samples must be at least 1".into()));
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || !(s.epsilon > 0.0) || s.iter_max == 0 {
            return Err(HarnessError::Config("tol, epsilon and iter_max must be positive".into()));
        }
        for params in self.swept_params() {
            params.scenario().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// `(swept value, parameters)` for each sweep point; a single point with
    /// no value when there is no sweep.
    pub fn sweep_points(&self) -> Vec<(Option<f64>, UserParams)> {
        match &self.sweep {
            None => vec![(None, self.params.clone())],
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let mut p = self.params.clone();
                    sweep.param.apply(&mut p, v);
                    (Some(v), p)
                })
                .collect(),
        }
    }

    fn swept_params(&self) -> Vec<UserParams> {
        self.sweep_points().into_iter().map(|(_, p)| p).collect()
    }
}

/// On-disk form: every key optional and flat.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<Profile>,
    scenario: Option<Scenario>,
    n_trials: Option<usize>,
    base_seed: Option<u64>,
    extraction: Option<ExtractionChoice>,
    randomization_samples: Option<usize>,
    output_path: Option<PathBuf>,
    record_timing: Option<bool>,
    sweep_param: Option<SweepParam>,
    sweep_values: Option<Vec<f64>>,

    n_antennas: Option<usize>,
    n_users: Option<usize>,
    spacing: Option<f64>,
    theta0_deg: Option<f64>,
    delta_theta_deg: Option<f64>,
    gamma_b_db: Option<f64>,
    gamma_s_db: Option<f64>,
    p0_dbm: Option<f64>,
    sigma2: Option<f64>,
    alpha2: Option<f64>,
    ripple: Option<f64>,
    gamma_bp_factor: Option<f64>,
    grid_step_deg: Option<f64>,
    guard_deg: Option<f64>,
    benchmark_half_width_deg: Option<f64>,
    mu: Option<f64>,
    delta: Option<f64>,

    tol: Option<f64>,
    epsilon: Option<f64>,
    iter_max: Option<usize>,
    eve_sinr_floor: Option<f64>,
    objective_rtol: Option<f64>,
}

impl FileConfig {
    fn apply(self, cfg: &mut ExperimentConfig) -> Result<(), HarnessError> {
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = self.$src { $dst = v; })*
            };
        }
        set! {
            scenario => cfg.scenario,
            n_trials => cfg.n_trials,
            base_seed => cfg.base_seed,
            extraction => cfg.extraction,
            randomization_samples => cfg.randomization_samples,
            output_path => cfg.output_path,
            record_timing => cfg.record_timing,
            n_antennas => cfg.params.n_antennas,
            n_users => cfg.params.n_users,
            spacing => cfg.params.spacing,
            theta0_deg => cfg.params.theta0_deg,
            delta_theta_deg => cfg.params.delta_theta_deg,
            gamma_b_db => cfg.params.gamma_b_db,
            gamma_s_db => cfg.params.gamma_s_db,
            p0_dbm => cfg.params.p0_dbm,
            sigma2 => cfg.params.sigma2,
            alpha2 => cfg.params.alpha2,
            ripple => cfg.params.ripple,
            gamma_bp_factor => cfg.params.gamma_bp_factor,
            grid_step_deg => cfg.params.grid_step_deg,
            guard_deg => cfg.params.guard_deg,
            benchmark_half_width_deg => cfg.params.benchmark_half_width_deg,
            mu => cfg.params.mu,
            delta => cfg.params.delta,
            tol => cfg.solver.tol,
            epsilon => cfg.solver.epsilon,
            iter_max => cfg.solver.iter_max,
            eve_sinr_floor => cfg.solver.eve_sinr_floor,
            objective_rtol => cfg.solver.objective_rtol,
        }
        match (self.sweep_param, self.sweep_values) {
            (Some(param), Some(values)) => cfg.sweep = Some(Sweep { param, values }),
            (None, None) => {}
            _ => return Err(HarnessError::Config("sweep_param and sweep_values must be given together".into())),
        }
        Ok(())
    }
}
