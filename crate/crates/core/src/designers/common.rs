use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{ArrayGeometry, BeamDesign, ScenarioParams};
use crate::sdp::{self, ConicProblem, HermExpr, LinExpr, MatVar, SolveResult, SolveStatus};

use super::DesignOptions;

pub(crate) const POWER: &str = "power";
pub(crate) const SINR: &str = "sinr";
pub(crate) const BEAMPATTERN: &str = "beampattern";
pub(crate) const DOMINANCE: &str = "dominance";
pub(crate) const RIPPLE: &str = "ripple";

/// Scenario constants at unit transmit power.
pub(crate) struct Unit {
    pub p0: f64,
    pub sigma2: f64,
    pub gamma_s: f64,
}

impl Unit {
    pub fn new(params: &ScenarioParams) -> Self {
        Self {
            p0: params.p0,
            sigma2: params.sigma2 / params.p0,
            gamma_s: params.gamma_s / params.p0,
        }
    }
}

/// Decision variables `W_1..W_K` and `R_N`.
pub(crate) struct Vars {
    pub w: Vec<MatVar>,
    pub rn: MatVar,
}

impl Vars {
    pub fn declare(p: &mut ConicProblem, k: usize, n: usize) -> Self {
        let w = (0..k).map(|i| p.add_hermitian(&format!("W{}", i + 1), n, true)).collect();
        let rn = p.add_hermitian("RN", n, true);
        Self { w, rn }
    }

    /// `Σ_i W_i`.
    pub fn signal(&self) -> HermExpr {
        let mut acc = HermExpr::zeros(self.rn.dim());
        for w in &self.w {
            acc.add_scaled(&w.expr(), 1.0);
        }
        acc
    }

    /// `Σ_i W_i + R_N`.
    pub fn total(&self) -> HermExpr {
        let mut acc = self.signal();
        acc.add_scaled(&self.rn.expr(), 1.0);
        acc
    }

    /// `W_i − γ Σ_{k≠i} W_k − γ R_N`.
    pub fn sinr_margin(&self, i: usize, gamma: f64) -> HermExpr {
        let mut y = self.w[i].expr();
        for (k, w) in self.w.iter().enumerate() {
            if k != i {
                y.add_scaled(&w.expr(), -gamma);
            }
        }
        y.add_scaled(&self.rn.expr(), -gamma);
        y
    }

    /// Relaxed design in caller units.
    pub fn design(&self, res: &SolveResult, p0: f64) -> BeamDesign {
        // Interior-point iterates can sit a round-off distance outside the cone.
        let get = |m: &MatVar| linalg::project_psd(&m.value(&res.x)).scale(p0);
        BeamDesign::new(self.w.iter().map(get).collect(), get(&self.rn))
    }
}

/// `tr(R_X) = 1`.
pub(crate) fn add_power(p: &mut ConicProblem, vars: &Vars) {
    let mut tr = vars.rn.trace();
    for w in &vars.w {
        tr += &w.trace();
    }
    p.add_eq(POWER, tr, 1.0);
}

/// `tr(G W_i) ≥ γ (Σ_{k≠i} tr(G W_k) + tr(G R_N) + σ²)` for a user Gram
/// matrix `G` (`h_i* h_iᵀ` or a channel covariance).
pub(crate) fn add_nominal_sinr(p: &mut ConicProblem, vars: &Vars, gram: &CMat, i: usize, gamma: f64, sigma2: f64) {
    let margin = vars.sinr_margin(i, gamma);
    // Dividing through by γ keeps high thresholds from dominating the row.
    let scale = 1.0 / gamma.max(1.0);
    let lhs = herm_inner(&margin, gram) * scale;
    p.add_ge(SINR, lhs, gamma * sigma2 * scale);
}

/// `tr(C M)` for Hermitian `C` and a Hermitian expression `M`.
pub(crate) fn herm_inner(m: &HermExpr, c: &CMat) -> LinExpr {
    let n = m.dim();
    let mut acc = LinExpr::zero();
    for i in 0..n {
        for j in 0..n {
            // Re(C_ji M_ij)
            let cji = c[(j, i)];
            let e = m.get(i, j);
            acc.add_scaled(&e.re, cji.re);
            acc.add_scaled(&e.im, -cji.im);
        }
    }
    acc.compressed()
}

/// Main-beam dominance over `Ω` and ripple over `Φ` on `R_X`.
pub(crate) fn add_beam_shape(
    p: &mut ConicProblem,
    total: &HermExpr,
    geom: &ArrayGeometry,
    params: &ScenarioParams,
    mainbeam: &[f64],
    unit: &Unit,
) -> Result<()> {
    let a0 = geom.steering_vector(params.theta0)?;
    let g0 = total.quad(&a0);
    for theta in params.sidelobe_grid.iter() {
        let g = total.quad(&geom.steering_vector(theta)?);
        p.add_ge(DOMINANCE, g0.clone() - g, unit.gamma_s);
    }
    let rho = params.ripple;
    for &theta in mainbeam {
        if (theta - params.theta0).abs() < 1e-12 {
            continue;
        }
        let g = total.quad(&geom.steering_vector(theta)?);
        p.add_ge(RIPPLE, g.clone() - g0.scaled(1.0 - rho), 0.0);
        p.add_ge(RIPPLE, g0.scaled(1.0 + rho) - g, 0.0);
    }
    Ok(())
}

/// Angles of the main-beam region, `{θ_0}` when no grid is given.
pub(crate) fn mainbeam_angles(params: &ScenarioParams) -> Vec<f64> {
    if params.mainbeam_grid.is_empty() {
        vec![params.theta0]
    } else {
        params.mainbeam_grid.angles().to_vec()
    }
}

pub(crate) fn check_dims(k: usize, n: usize, geom: &ArrayGeometry) -> Result<()> {
    if n != geom.n_antennas() {
        return Err(Error::Contract(format!(
            "CSI has {n} antennas, array has {}",
            geom.n_antennas()
        )));
    }
    if k == 0 {
        return Err(Error::Contract("at least one user is required".into()));
    }
    Ok(())
}

/// Solves and maps non-optimal outcomes to errors. On infeasibility each
/// constraint family except the power budget is dropped in turn; the first
/// whose removal makes the problem solvable is reported as binding.
pub(crate) fn solve_checked(p: &ConicProblem, opts: &DesignOptions) -> Result<SolveResult> {
    let res = sdp::solve(p, opts.tol)?;
    match res.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(res),
        SolveStatus::Infeasible => {
            let family = if opts.probe_infeasibility { probe(p, opts.tol) } else { None };
            Err(Error::Infeasible { family })
        }
        SolveStatus::Failure => Err(Error::Solver(format!(
            "conic solver stopped after {} iterations without a solution ({})",
            res.stats.iterations, res.stats.backend_status
        ))),
    }
}

fn probe(p: &ConicProblem, tol: f64) -> Option<String> {
    p.families().into_iter().filter(|f| f != POWER).find(|f| {
        sdp::solve(&p.without_family(f), tol).map(|r| r.has_values()).unwrap_or(false)
    })
}

pub(crate) fn steering(geom: &ArrayGeometry, angles: &[f64]) -> Result<Vec<CVec>> {
    angles.iter().map(|&t| geom.steering_vector(t)).collect()
}
