#![allow(dead_code)]

use dfrc_core::model::{
    db_to_linear, deg_to_rad, dbm_to_mw, sample_channel, ArrayGeometry, ChannelMatrix, CsiModel,
    ScenarioParams,
};
use dfrc_core::synthesis::{make_flat_top_pattern, synthesize_benchmark, BenchmarkCov};

pub struct Instance {
    pub geom: ArrayGeometry,
    pub channel: ChannelMatrix,
    pub params: ScenarioParams,
}

/// Desk-scale scenario with thresholds in dB, power in dBm and angles in
/// degrees.
pub fn params(theta0_deg: f64, delta_deg: f64, gamma_b_db: f64, gamma_s_db: f64, p0_dbm: f64) -> ScenarioParams {
    let theta0 = deg_to_rad(theta0_deg);
    let delta = deg_to_rad(delta_deg);
    let (main, side) =
        ScenarioParams::default_grids(theta0, delta, deg_to_rad(1.0), deg_to_rad(5.0)).unwrap();
    let p0 = dbm_to_mw(p0_dbm);
    ScenarioParams {
        theta0,
        delta_theta: delta,
        gamma_b: db_to_linear(gamma_b_db),
        gamma_s: db_to_linear(gamma_s_db),
        gamma_bp: 0.1 * p0 * p0,
        p0,
        sigma2: 1.0,
        alpha2: 1.0,
        ripple: 0.1,
        mainbeam_grid: main,
        sidelobe_grid: side,
    }
}

pub fn instance(n: usize, k: usize, seed: u64, params: ScenarioParams) -> Instance {
    let geom = ArrayGeometry::half_wavelength(n).unwrap();
    let channel = sample_channel(k, &geom, seed).unwrap();
    Instance { geom, channel, params }
}

pub fn benchmark(inst: &Instance) -> BenchmarkCov {
    let pat = make_flat_top_pattern(inst.params.theta0, deg_to_rad(5.0), deg_to_rad(1.0)).unwrap();
    synthesize_benchmark(&pat, &inst.geom, inst.params.p0).unwrap()
}

pub fn perfect(inst: &Instance) -> CsiModel {
    CsiModel::Perfect { channel: inst.channel.clone() }
}

pub fn norm_bounded(inst: &Instance, mu: f64) -> CsiModel {
    CsiModel::NormBounded {
        channel_estimate: inst.channel.clone(),
        radii: vec![mu; inst.channel.n_users()],
    }
}

pub fn statistical(inst: &Instance, delta: f64) -> CsiModel {
    let k = inst.channel.n_users();
    CsiModel::StatisticalBounded {
        covariances: (0..k).map(|i| inst.channel.user_gram(i)).collect(),
        radii: vec![delta; k],
    }
}
