//! Beamforming and artificial-noise design procedures.
//!
//! Every designer works on a copy of the problem normalised to unit transmit
//! power (covariances divided by `P_0`, noise power by `P_0`), which keeps
//! the conic programs well scaled across power budgets. Returned designs and
//! auxiliary quantities are mapped back to the caller's units.

mod common;
mod perfect;
mod ratio;

use crate::linalg::CMat;

pub use perfect::design_perfect;
pub use ratio::{design_robust_csi, design_statistical, design_wide};

/// Iteration and solver controls shared by all designers.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Stopping threshold on the change of `c` (Dinkelbach) or the relative
    /// change of the auxiliary vector `y` (quadratic transform).
    pub epsilon: f64,
    pub iter_max: usize,
    /// Conic solver tolerance.
    pub tol: f64,
    /// Eavesdropper SINRs below this value count as equal to it in the `y`
    /// update. Without the clamp a design that nulls the eavesdropper over
    /// `Φ` drives `y` (and the inverted ratios) to infinity.
    pub eve_sinr_floor: f64,
    /// The quadratic-transform loops also stop once the transformed
    /// objective changes by less than this relative amount between solves.
    /// Near a null of the eavesdropper `y` is only resolved to the conic
    /// solver's accuracy and keeps wobbling at about `1e-4` relative.
    pub objective_rtol: f64,
    /// Run stage-wise relaxation probing on infeasibility to name the
    /// binding constraint family.
    pub probe_infeasibility: bool,
    /// User SINR constraints are imposed at `γ_b (1 + sinr_backoff)`, so
    /// that the PSD projection of a solution at solver accuracy still meets
    /// `γ_b`.
    pub sinr_backoff: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            iter_max: 20,
            tol: crate::sdp::DEFAULT_TOL,
            eve_sinr_floor: 1e-3,
            objective_rtol: 1e-3,
            probe_infeasibility: true,
            sinr_backoff: 1e-4,
        }
    }
}

/// Per-iteration record of an outer loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignTrace {
    /// `c` after each solve for the Dinkelbach loop; the transformed
    /// objective (sum or epigraph value) for the quadratic-transform loops.
    pub objective_per_iter: Vec<f64>,
    /// Auxiliary vector `y` produced by the closed-form update after each
    /// solve.
    pub y_per_iter: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Auxiliary variables of the robust designs.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustAux {
    /// S-procedure multipliers `t_i` (zero for the statistical design).
    pub t_vals: Vec<f64>,
    /// Epigraph value `z`.
    pub z_val: f64,
    /// Lagrange-dual matrices `Z_i` of the statistical design.
    pub dual_mats: Option<Vec<CMat>>,
}
