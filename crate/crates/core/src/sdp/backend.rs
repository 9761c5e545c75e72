use std::sync::Once;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    ConicProblem, ConstraintKind, LinExpr, MatVar, Sense, SolveResult, SolveStatus, SolverStats,
    VarKind,
};
use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(num_threads: std::os::raw::c_int);
}

static BLAS_INIT: Once = Once::new();

fn single_threaded_blas() {
    // Threaded BLAS kernels are not bitwise reproducible and fight with the
    // trial-level worker pool.
    BLAS_INIT.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Rows of `A x + s = b` for one cone, where each cone component `s_k` equals
/// the affine expression `e_k(x)`: `A_k = −coef(e_k)`, `b_k = const(e_k)`.
#[derive(Default)]
struct RowBuilder {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl RowBuilder {
    fn push(&mut self, e: &LinExpr) {
        let r = self.b.len();
        for &(c, v) in e.terms() {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(-v);
        }
        self.b.push(e.constant);
    }
}

const STALL_DUAL_RES: f64 = 1e-4;
const STALL_GAP: f64 = 1e-3;
/// Clarabel's default static KKT regularisation, and the heavier one used
/// for a second attempt after a failed solve. Infeasible SDPs in particular
/// often end in NumericalError at the default.
const REGULARIZATION: [f64; 2] = [1e-8, 1e-7];

/// Solves `problem` with the Clarabel interior-point method.
///
/// `tol` sets the feasibility and (absolute and relative) duality-gap
/// tolerances. The call is deterministic for identical inputs.
pub fn solve(problem: &ConicProblem, tol: f64) -> Result<SolveResult> {
    problem.validate()?;
    single_threaded_blas();

    let n = problem.n_params();
    let mut zero = RowBuilder::default();
    let mut nonneg = RowBuilder::default();
    let mut socs: Vec<Vec<LinExpr>> = Vec::new();
    let mut psds: Vec<Vec<LinExpr>> = Vec::new();

    for v in problem.vars() {
        match v.kind {
            VarKind::Hermitian { dim, psd: true } => {
                psds.push(MatVar { offset: v.offset, dim }.expr().embedded_svec());
            }
            VarKind::Scalar { lower: Some(lb) } => {
                nonneg.push(&(LinExpr::term(v.offset, 1.0) - lb));
            }
            _ => {}
        }
    }
    for c in problem.constraints() {
        match &c.kind {
            ConstraintKind::Eq(e) => zero.push(e),
            ConstraintKind::Ge(e) => nonneg.push(e),
            ConstraintKind::Soc { bound, vector } => {
                let mut comps = Vec::with_capacity(vector.len() + 1);
                comps.push(bound.clone());
                comps.extend(vector.iter().cloned());
                socs.push(comps);
            }
            ConstraintKind::Lmi(m) => psds.push(m.embedded_svec()),
        }
    }

    let mut all = RowBuilder::default();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let append = |rb: &RowBuilder, all: &mut RowBuilder| {
        let base = all.b.len();
        all.rows.extend(rb.rows.iter().map(|r| r + base));
        all.cols.extend_from_slice(&rb.cols);
        all.vals.extend_from_slice(&rb.vals);
        all.b.extend_from_slice(&rb.b);
    };
    if !zero.b.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(zero.b.len()));
        append(&zero, &mut all);
    }
    if !nonneg.b.is_empty() {
        cones.push(SupportedConeT::NonnegativeConeT(nonneg.b.len()));
        append(&nonneg, &mut all);
    }
    for comps in &socs {
        cones.push(SupportedConeT::SecondOrderConeT(comps.len()));
        comps.iter().for_each(|e| all.push(e));
    }
    for comps in &psds {
        // comps.len() = d(d+1)/2 for the embedded dimension d
        let d = (((8 * comps.len() + 1) as f64).sqrt() as usize - 1) / 2;
        cones.push(SupportedConeT::PSDTriangleConeT(d));
        comps.iter().for_each(|e| all.push(e));
    }

    let m = all.b.len();
    let a = CscMatrix::new_from_triplets(m, n, all.rows, all.cols, all.vals);
    let p = CscMatrix::zeros((n, n));
    let sign = match problem.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q = vec![0.0; n];
    for &(i, c) in problem.objective().terms() {
        q[i] += sign * c;
    }

    let mut result = run(problem, &p, &q, &a, &all.b, &cones, tol, REGULARIZATION[0])?;
    if result.status == SolveStatus::Failure {
        result = run(problem, &p, &q, &a, &all.b, &cones, tol, REGULARIZATION[1])?;
    }
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn run(
    problem: &ConicProblem,
    p: &CscMatrix<f64>,
    q: &[f64],
    a: &CscMatrix<f64>,
    b: &[f64],
    cones: &[SupportedConeT<f64>],
    tol: f64,
    regularization: f64,
) -> Result<SolveResult> {
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(tol)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .max_iter(400)
        .chordal_decomposition_enable(false)
        .static_regularization_constant(regularization)
        .build()
        .map_err(|e| Error::Solver(format!("invalid solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(p, q, a, b, cones, settings)
        .map_err(|e| Error::Solver(format!("solver setup failed: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;

    let finite = sol.x.iter().all(|v| v.is_finite());
    let gap_scale = 1f64.max(sol.obj_val.abs()).max(sol.obj_val_dual.abs());
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / gap_scale;
    // NumericalError and InsufficientProgress show up when the KKT system
    // degrades close to the optimum; the last iterate is often still good.
    let usable = finite && sol.r_prim <= 1e3 * tol && sol.r_dual <= STALL_DUAL_RES && gap <= STALL_GAP;
    let status = match sol.status {
        SolverStatus::Solved if finite => SolveStatus::Optimal,
        SolverStatus::AlmostSolved if finite => SolveStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::NumericalError | SolverStatus::InsufficientProgress | SolverStatus::MaxIterations
            if usable =>
        {
            SolveStatus::Inaccurate
        }
        _ => SolveStatus::Failure,
    };
    let stats = SolverStats {
        iterations: sol.iterations,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        relative_gap: gap,
        backend_status: format!("{:?}", sol.status),
    };
    let mut result = SolveResult {
        status,
        values: Default::default(),
        objective_value: f64::NAN,
        stats,
        x: Vec::new(),
    };
    if result.has_values() {
        result.values = SolveResult::collect_values(problem, &sol.x);
        result.objective_value = problem.objective().eval(&sol.x);
        result.x = sol.x.clone();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, CMat, C64};

    #[test]
    fn trace_minimization_over_shifted_cone() {
        // min tr(X) s.t. X − I ⪰ 0
        let mut p = ConicProblem::new();
        let x = p.add_hermitian("X", 2, false);
        let mut lmi = x.expr();
        lmi.add_const(&CMat::identity(2, 2).scale(-1.0));
        p.add_lmi("shift", lmi);
        p.set_objective(Sense::Minimize, x.trace());
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective_value - 2.0).abs() < 1e-6);
        let xv = r.matrix("X").unwrap();
        assert!((xv - CMat::identity(2, 2)).norm() < 1e-5);
    }

    #[test]
    fn max_linear_functional_hits_top_eigenvalue() {
        let j = C64::new(0.0, 1.0);
        let c = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 0.0), 1.0 + j, C64::new(0.0, 0.0),
                1.0 - j, C64::new(1.0, 0.0), 0.5 * j,
                C64::new(0.0, 0.0), -0.5 * j, C64::new(-1.0, 0.0),
            ],
        );
        let mut p = ConicProblem::new();
        let x = p.add_hermitian("X", 3, true);
        p.add_eq("trace", x.trace(), 1.0);
        p.set_objective(Sense::Maximize, x.inner(&c));
        let r = solve(&p, 1e-9).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let top = linalg::max_eigenvalue(&c);
        assert!((r.objective_value - top).abs() < 1e-6, "{} vs {top}", r.objective_value);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let mut p = ConicProblem::new();
        let x = p.add_hermitian("X", 2, true);
        p.add_eq("a", x.trace(), 1.0);
        p.add_eq("b", x.trace(), 2.0);
        p.set_objective(Sense::Minimize, x.trace());
        let r = solve(&p, 1e-8).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.values.is_empty());
    }

    #[test]
    fn soc_and_scalar_bounds() {
        // min s s.t. ‖(3, 4)‖ <= s, s >= 0
        let mut p = ConicProblem::new();
        let s = p.add_scalar("s", Some(0.0));
        p.add_soc("norm", vec![LinExpr::constant(3.0), LinExpr::constant(4.0)], s.expr());
        p.set_objective(Sense::Minimize, s.expr());
        let r = solve(&p, 1e-9).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.scalar("s").unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn undeclared_reference_is_rejected() {
        let mut p = ConicProblem::new();
        p.add_scalar("s", None);
        p.set_objective(Sense::Minimize, LinExpr::term(7, 1.0));
        assert!(solve(&p, 1e-8).is_err());
    }
}
