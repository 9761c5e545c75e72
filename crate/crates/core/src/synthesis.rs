//! Benchmark radar covariance by constrained least-squares pattern fitting.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{deg_to_rad, AngleGrid, ArrayGeometry};
use crate::sdp::{self, ConicProblem, Sense, SolveStatus};

/// Desired beampattern `P_d(θ_m)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPattern {
    grid: AngleGrid,
    gains: Vec<f64>,
}

impl DesiredPattern {
    pub fn new(grid: AngleGrid, gains: Vec<f64>) -> Result<Self> {
        if grid.len() != gains.len() {
            return Err(Error::Contract(format!(
                "pattern has {} angles but {} gains",
                grid.len(),
                gains.len()
            )));
        }
        if let Some(g) = gains.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::Domain(format!("pattern gain {g} is not finite and nonnegative")));
        }
        Ok(Self { grid, gains })
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Same gains at negated angles.
    pub fn mirrored(&self) -> Self {
        let angles: Vec<f64> = self.grid.angles().iter().rev().map(|t| -t).collect();
        let gains = self.gains.iter().rev().copied().collect();
        Self { grid: AngleGrid::new(angles).expect("negated sorted grid stays sorted"), gains }
    }
}

/// Fitted benchmark covariance `R_d` with its pattern scale `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCov {
    pub matrix: CMat,
    pub scale: f64,
    /// Sum of squared fit residuals at the optimum.
    pub objective: f64,
}

/// Unit gain on `[θ0 − half_width, θ0 + half_width]`, zero elsewhere, on a
/// uniform grid over `[−90°, 90°]`.
pub fn make_flat_top_pattern(theta0: f64, half_width: f64, grid_step: f64) -> Result<DesiredPattern> {
    if !(grid_step > 0.0) {
        return Err(Error::Domain(format!("grid step must be positive, got {grid_step}")));
    }
    if !(half_width >= 0.0) {
        return Err(Error::Domain(format!("half width must be nonnegative, got {half_width}")));
    }
    let grid = AngleGrid::full_range_deg(grid_step.to_degrees())?;
    // Half a micro-degree of slack so that grid points landing on the edge
    // count as inside despite rounding.
    let slack = deg_to_rad(5e-7);
    let gains = grid
        .iter()
        .map(|t| if (t - theta0).abs() <= half_width + slack { 1.0 } else { 0.0 })
        .collect();
    DesiredPattern::new(grid, gains)
}

/// Jointly fits `(η, R_d)` minimising `Σ_m |η·P_d(θ_m) − aᴴ(θ_m) R_d a(θ_m)|²`
/// subject to `tr(R_d) = P_0`, `R_d ⪰ 0` and `η ≥ 0`.
///
/// The program is solved at unit power and rescaled, which is exact because
/// the optimum scales linearly in `P_0`.
pub fn synthesize_benchmark(pattern: &DesiredPattern, geom: &ArrayGeometry, p0: f64) -> Result<BenchmarkCov> {
    synthesize_benchmark_tol(pattern, geom, p0, sdp::DEFAULT_TOL)
}

pub fn synthesize_benchmark_tol(
    pattern: &DesiredPattern,
    geom: &ArrayGeometry,
    p0: f64,
    tol: f64,
) -> Result<BenchmarkCov> {
    if pattern.grid.is_empty() {
        return Err(Error::Contract("desired pattern grid is empty".into()));
    }
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::Domain(format!("power budget must be positive, got {p0}")));
    }
    let n = geom.n_antennas();
    let mut p = ConicProblem::new();
    let r = p.add_hermitian("R", n, true);
    let eta = p.add_scalar("eta", Some(0.0));
    let t = p.add_scalar("t", Some(0.0));
    p.add_eq("power", r.trace(), 1.0);

    let mut residuals = Vec::with_capacity(pattern.gains.len());
    for (theta, &g) in pattern.grid.iter().zip(&pattern.gains) {
        let a = geom.steering_vector(theta)?;
        let fit = r.expr().quad(&a);
        residuals.push(eta.expr() * g - fit);
    }
    p.add_soc("fit", residuals, t.expr());
    p.set_objective(Sense::Minimize, t.expr());

    let res = sdp::solve(&p, tol)?;
    match res.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible { family: None }),
        SolveStatus::Failure => return Err(Error::Solver("benchmark synthesis failed".into())),
    }
    let rv = res.matrix("R").expect("declared variable");
    let matrix = linalg::hermitian_part(rv).scale(p0);
    let eta_v = res.scalar("eta").expect("declared variable") * p0;
    let t_v = res.scalar("t").expect("declared variable") * p0;
    Ok(BenchmarkCov { matrix, scale: eta_v, objective: t_v * t_v })
}

/// Sum of squared residuals of a candidate `(η, R)` against `pattern`.
pub fn fit_objective(pattern: &DesiredPattern, geom: &ArrayGeometry, eta: f64, r: &CMat) -> Result<f64> {
    let mut acc = 0.0;
    for (theta, &g) in pattern.grid.iter().zip(&pattern.gains) {
        let d = eta * g - crate::model::beampattern_gain(r, geom, theta)?;
        acc += d * d;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(x: f64) -> f64 {
        deg_to_rad(x)
    }

    #[test]
    fn flat_top_counts() {
        let spike = make_flat_top_pattern(0.0, 0.0, deg(1.0)).unwrap();
        assert_eq!(spike.grid().len(), 181);
        assert_eq!(spike.gains().iter().filter(|g| **g == 1.0).count(), 1);
        assert_eq!(spike.gains()[90], 1.0);
        let top = make_flat_top_pattern(0.0, deg(5.0), deg(1.0)).unwrap();
        assert_eq!(top.gains().iter().filter(|g| **g == 1.0).count(), 11);
        let omni = make_flat_top_pattern(0.0, deg(90.0), deg(1.0)).unwrap();
        assert!(omni.gains().iter().all(|g| *g == 1.0));
    }

    #[test]
    fn flat_top_rejects_bad_step() {
        assert!(matches!(make_flat_top_pattern(0.0, 0.1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(make_flat_top_pattern(0.0, 0.1, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn omni_beats_scaled_identity() {
        let geom = ArrayGeometry::half_wavelength(6).unwrap();
        let pat = make_flat_top_pattern(0.0, deg(90.0), deg(2.0)).unwrap();
        let p0 = 3.0;
        let b = synthesize_benchmark(&pat, &geom, p0).unwrap();
        // Identity candidate: every gain equals P0, so the 1-D least-squares
        // scale is η = Σ g·P0 / Σ g² and the residual vanishes.
        let r_id = CMat::identity(6, 6).scale(p0 / 6.0);
        let g = pat.gains();
        let eta_id = g.iter().map(|x| x * p0).sum::<f64>() / g.iter().map(|x| x * x).sum::<f64>();
        let bound = fit_objective(&pat, &geom, eta_id, &r_id).unwrap();
        assert!(b.objective <= bound + 1e-6, "{} > {bound}", b.objective);
        assert!((linalg::trace_re(&b.matrix) - p0).abs() <= 1e-6 * p0);
    }

    #[test]
    fn spike_peaks_at_its_angle() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let pat = make_flat_top_pattern(0.0, 0.0, deg(1.0)).unwrap();
        let b = synthesize_benchmark(&pat, &geom, 1.0).unwrap();
        let gains: Vec<f64> = pat
            .grid()
            .iter()
            .map(|t| crate::model::beampattern_gain(&b.matrix, &geom, t).unwrap())
            .collect();
        let mean = gains.iter().sum::<f64>() / gains.len() as f64;
        assert!(gains[90] > mean, "{} vs mean {mean}", gains[90]);
        assert!((linalg::trace_re(&b.matrix) - 1.0).abs() <= 1e-6);
        assert!(linalg::min_eigenvalue(&b.matrix) >= -1e-7);
    }

    #[test]
    fn reported_objective_matches_replay() {
        let geom = ArrayGeometry::half_wavelength(5).unwrap();
        let pat = make_flat_top_pattern(deg(20.0), deg(10.0), deg(2.0)).unwrap();
        let b = synthesize_benchmark(&pat, &geom, 2.0).unwrap();
        let replay = fit_objective(&pat, &geom, b.scale, &b.matrix).unwrap();
        assert!((replay - b.objective).abs() <= 1e-5 * (1.0 + replay), "{replay} vs {}", b.objective);
    }
}
