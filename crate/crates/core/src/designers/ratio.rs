//! Angle-uncertain and robust designs: quadratic-transform iterations over a
//! main-beam region `Φ`.
//!
//! For each `θ_m ∈ Φ` the inverted eavesdropper SINR is a ratio
//! `num_m / den_m` with `num_m` affine in `R_N` and `den_m` affine in
//! `ΣW_i`. With `y` fixed the transformed objective `2 y_m √num_m − y_m² den_m`
//! is concave; `√num_m` enters through a rotated cone `s_m² ≤ num_m`. The
//! wide-beam design maximises the sum of the transformed terms, the robust
//! designs their minimum through an epigraph variable `z`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{ArrayGeometry, BeamDesign, CsiModel, ScenarioParams};
use crate::sdp::{ConicProblem, HermExpr, LinExpr, MatVar, ScalarVar, Sense, SolveResult, SolveStatus};

use super::common::{self, Unit, Vars};
use super::{DesignOptions, DesignTrace, RobustAux};

const EPIGRAPH: &str = "epigraph";
const RATIO: &str = "ratio";
const ROBUST_SINR: &str = "robust_sinr";
const STATISTICAL_SINR: &str = "statistical_sinr";

enum UserConstraints<'a> {
    Nominal { grams: Vec<CMat> },
    SProcedure { estimates: Vec<CVec>, radii: &'a [f64] },
    Statistical { covariances: &'a [CMat], radii: &'a [f64] },
}

#[derive(Clone, Copy, PartialEq)]
enum Aggregate {
    Sum,
    Min,
}

/// `num = κ·aᴴR_N a + ν`, `den = κ·aᴴ(ΣW)a`.
struct RatioForm {
    kappa: f64,
    nu: f64,
}

struct Built {
    problem: ConicProblem,
    vars: Vars,
    t: Vec<ScalarVar>,
    z_mats: Vec<MatVar>,
    s: Vec<ScalarVar>,
    /// Epigraph variable, stored as `z / z_scale`.
    z: Option<ScalarVar>,
    z_scale: f64,
}

struct Setup<'a> {
    k: usize,
    n: usize,
    params: &'a ScenarioParams,
    geom: &'a ArrayGeometry,
    unit: Unit,
    users: UserConstraints<'a>,
    form: RatioForm,
    aggregate: Aggregate,
    mainbeam: Vec<f64>,
    steer: Vec<CVec>,
    /// Threshold the SINR constraints are imposed at.
    gamma: f64,
}

impl Setup<'_> {
    fn build(&self, y: &[f64], z_scale: f64) -> Result<Built> {
        let (k, n) = (self.k, self.n);
        let gamma = self.gamma;
        let mut p = ConicProblem::new();
        let vars = Vars::declare(&mut p, k, n);
        let mut t = Vec::new();
        let mut z_mats = Vec::new();
        common::add_power(&mut p, &vars);

        match &self.users {
            UserConstraints::Nominal { grams } => {
                for (i, g) in grams.iter().enumerate() {
                    common::add_nominal_sinr(&mut p, &vars, g, i, gamma, self.unit.sigma2);
                }
            }
            UserConstraints::SProcedure { estimates, radii } => {
                for i in 0..k {
                    let ti = p.add_scalar(&format!("t{}", i + 1), Some(0.0));
                    let g = &estimates[i];
                    let y_i = vars.sinr_margin(i, gamma);
                    let corner = y_i.quad(g) - gamma * self.unit.sigma2 - ti.expr() * radii[i].powi(2);
                    let border = y_i.left_mul(g);
                    let mut body = y_i.clone();
                    body.add_diagonal(&ti.expr());
                    p.add_lmi(ROBUST_SINR, HermExpr::bordered(corner, &border, &body));
                    t.push(ti);
                }
            }
            UserConstraints::Statistical { covariances, radii } => {
                for i in 0..k {
                    let zi = p.add_hermitian(&format!("Z{}", i + 1), n, true);
                    let si = p.add_scalar(&format!("s{}", i + 1), None);
                    // A_i = γ Σ_{k≠i} W_k − W_i
                    let mut a_i = vars.sinr_margin(i, gamma);
                    a_i.add_scaled(&vars.rn.expr(), gamma);
                    let a_i = scaled(&a_i, -1.0);
                    let mut normed = a_i.clone();
                    normed.add_scaled(&vars.rn.expr(), gamma);
                    normed.add_scaled(&zi.expr(), 1.0);
                    p.add_soc(STATISTICAL_SINR, normed.frobenius_components(), si.expr());
                    let r = &covariances[i];
                    let mut za = a_i;
                    za.add_scaled(&zi.expr(), 1.0);
                    let lhs = -(si.expr() * radii[i])
                        - common::herm_inner(&za, r)
                        - common::herm_inner(&vars.rn.expr(), r) * gamma;
                    p.add_ge(STATISTICAL_SINR, lhs, gamma * self.unit.sigma2);
                    z_mats.push(zi);
                }
            }
        }

        common::add_beam_shape(&mut p, &vars.total(), self.geom, self.params, &self.mainbeam, &self.unit)?;

        let signal = vars.signal();
        let rn = vars.rn.expr();
        let mut terms = Vec::with_capacity(y.len());
        let mut s_vars = Vec::with_capacity(y.len());
        for (m, a) in self.steer.iter().enumerate() {
            let s = p.add_scalar(&format!("sqrt_num{m}"), None);
            let num = rn.quad(a) * self.form.kappa + self.form.nu;
            p.add_square_le(RATIO, s.expr(), num);
            let den = signal.quad(a) * self.form.kappa;
            terms.push(s.expr() * (2.0 * y[m]) - den * (y[m] * y[m]));
            s_vars.push(s);
        }
        // Large y (a nearly nulled eavesdropper direction) makes the y²
        // coefficients huge; rescaling the objective or the epigraph rows
        // leaves the optimiser unchanged and keeps the solver well posed.
        let weight = |ym: f64| 1.0 / (ym * ym * self.form.kappa * self.n as f64).max(1.0);
        let z = match self.aggregate {
            Aggregate::Sum => {
                let scale = y.iter().map(|&ym| weight(ym)).fold(1.0, f64::min);
                let total = terms.into_iter().fold(LinExpr::zero(), |acc, t| acc + t);
                p.set_objective(Sense::Maximize, total * scale);
                None
            }
            Aggregate::Min => {
                // z is carried in units of the previous objective so that it
                // stays O(1); the solver's residuals scale with the largest
                // variable and a large z loosens the PSD blocks.
                let z = p.add_scalar("z", None);
                for (term, &ym) in terms.into_iter().zip(y) {
                    p.add_ge(EPIGRAPH, (term - z.expr() * z_scale) * weight(ym), 0.0);
                }
                p.set_objective(Sense::Maximize, z.expr());
                Some(z)
            }
        };
        Ok(Built { problem: p, vars, t, z_mats, s: s_vars, z, z_scale })
    }

    /// Unscaled transformed objective at the solution: the sum of
    /// `2 y_m s_m − y_m² den_m`, or the epigraph value `z`.
    fn transformed_objective(&self, res: &SolveResult, built: &Built, y: &[f64]) -> f64 {
        if let Some(z) = built.z {
            return z.value(&res.x) * built.z_scale;
        }
        let d = built.vars.design(res, 1.0);
        self.ratio_parts(&d)
            .iter()
            .zip(&built.s)
            .zip(y)
            .map(|(((_, den), s), ym)| 2.0 * ym * s.value(&res.x) - ym * ym * den)
            .sum()
    }

    /// `(num_m, den_m)` at a unit-power design.
    fn ratio_parts(&self, d: &BeamDesign) -> Vec<(f64, f64)> {
        let signal = d.signal_cov();
        self.steer
            .iter()
            .map(|a| {
                let num = self.form.kappa * linalg::quad_form(&d.an_cov, a) + self.form.nu;
                let den = self.form.kappa * linalg::quad_form(&signal, a);
                (num, den)
            })
            .collect()
    }

    /// `y_m = √num_m / den_m`, with `den_m ≥ floor · num_m`.
    fn y_update(&self, d: &BeamDesign, floor: f64) -> Vec<f64> {
        self.ratio_parts(d).into_iter().map(|(num, den)| num.sqrt() / den.max(floor * num)).collect()
    }
}

fn scaled(m: &HermExpr, s: f64) -> HermExpr {
    let mut out = HermExpr::zeros(m.dim());
    out.add_scaled(m, s);
    out
}

struct Outcome {
    design: BeamDesign,
    trace: DesignTrace,
    last: SolveResult,
    built: Built,
}

fn iterate(setup: &Setup, opts: &DesignOptions) -> Result<Outcome> {
    let m = setup.steer.len();
    let mut y = vec![1.0; m];
    let mut trace = DesignTrace { y_per_iter: Some(Vec::new()), ..Default::default() };
    // y is tracked at unit power; reported values are in caller units,
    // y_caller = y_unit / √P_0.
    let y_scale = 1.0 / setup.unit.p0.sqrt();
    let (mut exact, mut inexact) = (None, None);
    for iter in 0..opts.iter_max.max(1) {
        let z_scale = trace.objective_per_iter.last().map_or(1.0, |o: &f64| o.abs().max(1.0));
        let built = setup.build(&y, z_scale)?;
        // The feasible set does not depend on y, so a failure after the first
        // solve is numerical; the previous iterate stays valid.
        let res = match common::solve_checked(&built.problem, opts) {
            Ok(res) => res,
            Err(Error::Solver(_) | Error::Infeasible { .. }) if exact.is_some() || inexact.is_some() => break,
            Err(e) => return Err(e),
        };
        let design = built.vars.design(&res, 1.0);
        let y_new = setup.y_update(&design, opts.eve_sinr_floor);
        let obj = setup.transformed_objective(&res, &built, &y);
        let stalled = trace
            .objective_per_iter
            .last()
            .is_some_and(|&prev| iter > 1 && (obj - prev).abs() <= opts.objective_rtol * obj.abs().max(prev.abs()));
        trace.objective_per_iter.push(obj);
        if let Some(ys) = trace.y_per_iter.as_mut() {
            ys.push(y_new.iter().map(|v| v * y_scale).collect());
        }
        let step = y_new.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        // The first solve runs at the neutral start y = 1 and only seeds the
        // closed-form update.
        let converged = (iter > 0 && step <= opts.epsilon * size) || stalled;
        y = y_new;
        if res.status == SolveStatus::Optimal {
            exact = Some((design, res, built));
        } else {
            inexact = Some((design, res, built));
        }
        if converged {
            trace.converged = true;
            break;
        }
    }
    trace.iterations = trace.objective_per_iter.len();
    // An inexact solve can leave eigenvalues well below zero whose projection
    // costs user SINR, so the last exact iterate is returned when there is one.
    let (mut design, last, built) = exact.or(inexact).expect("at least one iteration runs");
    let p0 = setup.unit.p0;
    for w in design.user_covs.iter_mut() {
        *w = w.scale(p0);
    }
    design.an_cov = design.an_cov.scale(p0);
    Ok(Outcome { design, trace, last, built })
}

fn mainbeam_setup<'a>(
    k: usize,
    n: usize,
    params: &'a ScenarioParams,
    geom: &'a ArrayGeometry,
    users: UserConstraints<'a>,
    form: RatioForm,
    aggregate: Aggregate,
) -> Result<Setup<'a>> {
    params.validate()?;
    common::check_dims(k, n, geom)?;
    let mainbeam = common::mainbeam_angles(params);
    let steer = common::steering(geom, &mainbeam)?;
    let gamma = params.gamma_b;
    Ok(Setup { k, n, params, geom, unit: Unit::new(params), users, form, aggregate, mainbeam, steer, gamma })
}

/// Wide main beam over `Φ` with perfect CSI: maximises `Σ_m A_m / B_m`,
/// `A_m = |α|² aᴴR_N a + σ²`, `B_m = |α|² aᴴ(ΣW)a`, subject to main-beam
/// dominance over `Ω`, ripple over `Φ`, user SINR and power constraints.
pub fn design_wide(
    csi: &CsiModel,
    params: &ScenarioParams,
    geom: &ArrayGeometry,
    opts: &DesignOptions,
) -> Result<(BeamDesign, DesignTrace)> {
    let CsiModel::Perfect { channel } = csi else {
        return Err(Error::Contract("design_wide needs a perfect channel".into()));
    };
    csi.validate()?;
    let k = channel.n_users();
    let grams = (0..k).map(|i| channel.user_gram(i)).collect();
    let unit_sigma2 = params.sigma2 / params.p0;
    let mut setup = mainbeam_setup(
        k,
        channel.n_antennas(),
        params,
        geom,
        UserConstraints::Nominal { grams },
        RatioForm { kappa: params.alpha2, nu: unit_sigma2 },
        Aggregate::Sum,
    )?;
    setup.gamma *= 1.0 + opts.sinr_backoff;
    let out = iterate(&setup, opts)?;
    Ok((out.design, out.trace))
}

/// Norm-bounded CSI errors `‖e_i‖ ≤ μ_i`: maximises `z ≤ min_m C_m / D_m`,
/// `C_m = aᴴR_N a + σ²/|α|²`, `D_m = aᴴ(ΣW)a`, with one S-procedure LMI
/// per user guaranteeing `SINR_i ≥ γ_b` over the whole error ball.
pub fn design_robust_csi(
    csi: &CsiModel,
    params: &ScenarioParams,
    geom: &ArrayGeometry,
    opts: &DesignOptions,
) -> Result<(BeamDesign, DesignTrace, RobustAux)> {
    let CsiModel::NormBounded { channel_estimate, radii } = csi else {
        return Err(Error::Contract("design_robust_csi needs a norm-bounded CSI model".into()));
    };
    csi.validate()?;
    let k = channel_estimate.n_users();
    // g_i = conj(h̃_i) so that h̃_iᵀ Y h̃_i* = g_iᴴ Y g_i.
    let estimates = (0..k).map(|i| channel_estimate.row(i).conjugate()).collect();
    let mut setup = mainbeam_setup(
        k,
        channel_estimate.n_antennas(),
        params,
        geom,
        UserConstraints::SProcedure { estimates, radii },
        RatioForm { kappa: 1.0, nu: params.sigma2 / params.p0 / params.alpha2 },
        Aggregate::Min,
    )?;
    setup.gamma *= 1.0 + opts.sinr_backoff;
    let out = iterate(&setup, opts)?;
    let p0 = params.p0;
    let t_vals = out.built.t.iter().map(|t| t.value(&out.last.x) * p0).collect();
    let z_val = out.built.z.map(|z| z.value(&out.last.x) * out.built.z_scale).unwrap_or(f64::NAN);
    Ok((out.design, out.trace, RobustAux { t_vals, z_val, dual_mats: None }))
}

/// Statistical CSI with `‖Δ_i‖_F ≤ δ_i` on the estimated covariances.
///
/// The worst case of `tr((R̃_i + Δ_i) Y_i) ≥ γ_b σ²`, `Y_i = −(A_i + γ_b R_N)`,
/// `A_i = γ_b Σ_{k≠i} W_k − W_i`, over the ball intersected with the PSD
/// cone is certified through its Lagrange dual:
/// `−δ_i ‖A_i + γ_b R_N + Z_i‖_F − tr(R̃_i (Z_i + A_i)) − γ_b tr(R̃_i R_N) − γ_b σ² ≥ 0`
/// with `Z_i ⪰ 0`.
pub fn design_statistical(
    csi: &CsiModel,
    params: &ScenarioParams,
    geom: &ArrayGeometry,
    opts: &DesignOptions,
) -> Result<(BeamDesign, DesignTrace, RobustAux)> {
    let CsiModel::StatisticalBounded { covariances, radii } = csi else {
        return Err(Error::Contract("design_statistical needs a statistical CSI model".into()));
    };
    csi.validate()?;
    let k = covariances.len();
    let n = csi.n_antennas();
    let mut setup = mainbeam_setup(
        k,
        n,
        params,
        geom,
        UserConstraints::Statistical { covariances, radii },
        RatioForm { kappa: 1.0, nu: params.sigma2 / params.p0 / params.alpha2 },
        Aggregate::Min,
    )?;
    setup.gamma *= 1.0 + opts.sinr_backoff;
    let out = iterate(&setup, opts)?;
    let p0 = params.p0;
    let dual = out
        .built
        .z_mats
        .iter()
        .map(|z| linalg::project_psd(&z.value(&out.last.x)).scale(p0))
        .collect();
    let z_val = out.built.z.map(|z| z.value(&out.last.x) * out.built.z_scale).unwrap_or(f64::NAN);
    Ok((out.design, out.trace, RobustAux { t_vals: vec![0.0; k], z_val, dual_mats: Some(dual) }))
}
