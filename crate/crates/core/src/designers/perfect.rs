//! Known target angle and perfect CSI: Dinkelbach iteration over SDPs.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ArrayGeometry, BeamDesign, CsiModel, ScenarioParams};
use crate::sdp::{ConicProblem, Sense};
use crate::synthesis::BenchmarkCov;

use super::common::{self, Unit, Vars, BEAMPATTERN};
use super::{DesignOptions, DesignTrace};

/// Minimises the eavesdropper SINR at `θ_0` subject to user SINR, benchmark
/// beampattern mismatch and power constraints.
///
/// Each iteration solves `min U − c·V` with `U = |α|² a₀ᴴ(ΣW_i)a₀` and
/// `V = |α|² a₀ᴴ R_N a₀ + σ²`, then sets `c ← U/V`, starting from `c = 0`.
/// Should solver noise ever produce an increase of `c`, the previous iterate
/// is kept and the loop stops, so the returned trace is non-increasing.
pub fn design_perfect(
    csi: &CsiModel,
    params: &ScenarioParams,
    geom: &ArrayGeometry,
    benchmark: &BenchmarkCov,
    opts: &DesignOptions,
) -> Result<(BeamDesign, DesignTrace)> {
    let CsiModel::Perfect { channel } = csi else {
        return Err(Error::Contract("design_perfect needs a perfect channel".into()));
    };
    csi.validate()?;
    params.validate()?;
    let (k, n) = (channel.n_users(), channel.n_antennas());
    common::check_dims(k, n, geom)?;
    if benchmark.matrix.shape() != (n, n) {
        return Err(Error::Contract("benchmark covariance has the wrong dimension".into()));
    }
    let unit = Unit::new(params);
    let a0 = geom.steering_vector(params.theta0)?;
    let grams: Vec<_> = (0..k).map(|i| channel.user_gram(i)).collect();
    let rd = benchmark.matrix.scale(1.0 / unit.p0);
    let bp_radius = params.gamma_bp.sqrt() / unit.p0;
    let gamma = params.gamma_b * (1.0 + opts.sinr_backoff);

    let mut c = 0.0;
    let mut trace = DesignTrace::default();
    let mut best: Option<BeamDesign> = None;
    for _ in 0..opts.iter_max.max(1) {
        let mut p = ConicProblem::new();
        let vars = Vars::declare(&mut p, k, n);
        common::add_power(&mut p, &vars);
        for (i, g) in grams.iter().enumerate() {
            common::add_nominal_sinr(&mut p, &vars, g, i, gamma, unit.sigma2);
        }
        if bp_radius.is_finite() {
            let mut diff = vars.total();
            diff.add_const(&rd.scale(-1.0));
            p.add_soc(BEAMPATTERN, diff.frobenius_components(), bp_radius.into());
        }
        let u = vars.signal().quad(&a0) * params.alpha2;
        let v = vars.rn.expr().quad(&a0) * params.alpha2 + unit.sigma2;
        p.set_objective(Sense::Minimize, u - v * c);

        let res = match common::solve_checked(&p, opts) {
            Ok(res) => res,
            Err(Error::Solver(_) | Error::Infeasible { .. }) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        let design = vars.design(&res, 1.0);
        let sig = linalg::quad_form(&design.signal_cov(), &a0);
        let an = linalg::quad_form(&design.an_cov, &a0);
        let c_new = params.alpha2 * sig / (params.alpha2 * an + unit.sigma2);

        if best.is_some() && c_new > c {
            trace.converged = true;
            break;
        }
        trace.objective_per_iter.push(c_new);
        best = Some(design);
        let step = (c_new - c).abs();
        c = c_new;
        if step < opts.epsilon {
            trace.converged = true;
            break;
        }
    }
    trace.iterations = trace.objective_per_iter.len();
    let mut design = best.expect("at least one iteration runs");
    for w in design.user_covs.iter_mut() {
        *w = w.scale(unit.p0);
    }
    design.an_cov = design.an_cov.scale(unit.p0);
    Ok((design, trace))
}
