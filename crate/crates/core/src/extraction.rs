//! Rank-one beamvector recovery from relaxed designs, with a power-preserving
//! feasibility repair.
//!
//! After extraction the beamvectors `w_i` are rescaled by a common factor
//! `s ≥ 1` and whatever power `Σ s²‖w_i‖²` leaves of `P_0` is given to the
//! artificial noise (by scaling `R_N`, or as white noise when `R_N` is
//! empty). Since raising `s` moves power from noise to signal, every user
//! SINR is nondecreasing in `s`; the smallest feasible `s` is found by
//! bisection. When even `s_max` (no artificial noise) is infeasible, the
//! unscaled extraction is returned and flagged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::model::{self, ArrayGeometry, BeamDesign, CsiModel, ScenarioParams};

/// Relative SINR slack accepted when judging post-extraction feasibility.
pub const SINR_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMethod {
    Eigen,
    Randomization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub method: ExtractionMethod,
    pub candidates_tried: usize,
    /// Nominal user SINRs of the returned design.
    pub post_sinrs: Vec<f64>,
    pub feasible_after: bool,
    /// Common factor `s` applied to every beamvector by the repair.
    pub rescale_factor: f64,
}

/// What extraction needs to judge a candidate: the nominal SINR model of
/// the scenario and the eavesdropper angles whose worst SINR is the
/// objective.
#[derive(Debug, Clone)]
pub struct ExtractionContext {
    pub geom: ArrayGeometry,
    /// Per-user Gram matrices of the nominal SINR (`h_i* h_iᵀ`, or the
    /// estimated covariance in the statistical case).
    pub grams: Vec<CMat>,
    pub sigma2: f64,
    pub alpha2: f64,
    pub gamma_b: f64,
    pub p0: f64,
    pub eve_angles: Vec<f64>,
}

impl ExtractionContext {
    /// Nominal model of `csi`; the eavesdropper is evaluated over the
    /// main-beam region of `params` (just `θ_0` without one).
    pub fn new(csi: &CsiModel, params: &ScenarioParams, geom: &ArrayGeometry) -> Self {
        let grams = (0..csi.n_users()).map(|i| csi.nominal_gram(i)).collect();
        let eve_angles = if params.mainbeam_grid.is_empty() {
            vec![params.theta0]
        } else {
            params.mainbeam_grid.angles().to_vec()
        };
        Self {
            geom: *geom,
            grams,
            sigma2: params.sigma2,
            alpha2: params.alpha2,
            gamma_b: params.gamma_b,
            p0: params.p0,
            eve_angles,
        }
    }

    pub fn sinrs(&self, d: &BeamDesign) -> Vec<f64> {
        self.grams
            .iter()
            .enumerate()
            .map(|(i, g)| model::statistical_sinr(d, g, i, self.sigma2))
            .collect()
    }

    /// Worst eavesdropper SINR over the configured angles.
    pub fn objective(&self, d: &BeamDesign) -> f64 {
        self.eve_angles
            .iter()
            .map(|&t| model::eve_sinr(d, &self.geom, t, self.alpha2, self.sigma2).unwrap_or(f64::NAN))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn feasible(&self, d: &BeamDesign) -> bool {
        let floor = self.gamma_b * (1.0 - SINR_SLACK);
        self.sinrs(d).iter().all(|s| *s >= floor) && d.power() <= self.p0 * (1.0 + 1e-6)
    }

    fn check(&self, d: &BeamDesign) -> Result<()> {
        if d.n_users() != self.grams.len() || d.n_antennas() != self.geom.n_antennas() {
            return Err(Error::Contract(format!(
                "design is {} users x {} antennas, context expects {} x {}",
                d.n_users(),
                d.n_antennas(),
                self.grams.len(),
                self.geom.n_antennas()
            )));
        }
        Ok(())
    }
}

/// Principal-eigenvector extraction `w_i = √λ_max(W_i) u_max(W_i)` followed
/// by the repair described in the module docs.
pub fn extract_eigen(design: &BeamDesign, ctx: &ExtractionContext) -> Result<(BeamDesign, ExtractionReport)> {
    ctx.check(design)?;
    let ws: Vec<CVec> = design.user_covs.iter().map(principal_vector).collect();
    let (out, s, ok) = repair(&ws, &design.an_cov, ctx);
    let report = ExtractionReport {
        method: ExtractionMethod::Eigen,
        candidates_tried: 1,
        post_sinrs: ctx.sinrs(&out),
        feasible_after: ok,
        rescale_factor: s,
    };
    Ok((out, report))
}

/// Gaussian randomisation: draws `w_i ~ CN(0, W_i)` rescaled to
/// `‖w_i‖² = tr(W_i)`, repairs each candidate set, and keeps the feasible
/// one with the lowest eavesdropper SINR. Falls back to the eigen result
/// (flagged infeasible) when no candidate is feasible.
pub fn extract_randomized(
    design: &BeamDesign,
    n_samples: usize,
    seed: u64,
    ctx: &ExtractionContext,
) -> Result<(BeamDesign, ExtractionReport)> {
    ctx.check(design)?;
    if n_samples == 0 {
        return Err(Error::Domain("randomization needs at least one sample".into()));
    }
    let factors: Vec<CMat> = design.user_covs.iter().map(psd_sqrt).collect();
    let traces: Vec<f64> = design.user_covs.iter().map(linalg::trace_re).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = design.n_antennas();
    let mut best: Option<(f64, BeamDesign, f64)> = None;
    for _ in 0..n_samples {
        let ws: Vec<CVec> = factors
            .iter()
            .zip(&traces)
            .map(|(f, &tr)| {
                let xi = model::sample_cn_matrix(&mut rng, n, 1).column(0).into_owned();
                let w = f * xi;
                let norm2 = w.norm_squared();
                if norm2 > 0.0 {
                    w.scale((tr / norm2).sqrt())
                } else {
                    w
                }
            })
            .collect();
        let (cand, s, ok) = repair(&ws, &design.an_cov, ctx);
        if !ok {
            continue;
        }
        let obj = ctx.objective(&cand);
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, cand, s));
        }
    }
    match best {
        Some((_, out, s)) => {
            let report = ExtractionReport {
                method: ExtractionMethod::Randomization,
                candidates_tried: n_samples,
                post_sinrs: ctx.sinrs(&out),
                feasible_after: true,
                rescale_factor: s,
            };
            Ok((out, report))
        }
        None => {
            let (out, mut report) = extract_eigen(design, ctx)?;
            report.method = ExtractionMethod::Randomization;
            report.candidates_tried = n_samples;
            report.feasible_after = false;
            Ok((out, report))
        }
    }
}

fn principal_vector(w: &CMat) -> CVec {
    let (vals, vecs) = linalg::hermitian_eigen(w);
    let n = vals.len();
    let lam = vals[n - 1].max(0.0);
    vecs.column(n - 1).scale(lam.sqrt())
}

/// `W^{1/2}` of the PSD part of `w`.
fn psd_sqrt(w: &CMat) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigen(w);
    // Round-off eigenvalues would otherwise be amplified by the square root.
    let cut = 1e-12 * vals.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(if l > cut { l.sqrt() } else { 0.0 }, 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

fn assemble(ws: &[CVec], an: &CMat, s: f64, ctx: &ExtractionContext) -> BeamDesign {
    let scaled: Vec<CVec> = ws.iter().map(|w| w.scale(s)).collect();
    let user_covs: Vec<CMat> = scaled.iter().map(linalg::outer).collect();
    let signal: f64 = scaled.iter().map(|w| w.norm_squared()).sum();
    let surplus = (ctx.p0 - signal).max(0.0);
    let tr_an = linalg::trace_re(an);
    let n = an.nrows();
    let an_cov = if tr_an > 1e-12 * ctx.p0 {
        an.scale(surplus / tr_an)
    } else {
        CMat::identity(n, n).scale(surplus / n as f64)
    };
    BeamDesign {
        user_covs,
        an_cov,
        beamvectors: Some(scaled),
        rank_one_extracted: true,
    }
}

fn repair(ws: &[CVec], an: &CMat, ctx: &ExtractionContext) -> (BeamDesign, f64, bool) {
    let base = assemble(ws, an, 1.0, ctx);
    if ctx.feasible(&base) {
        return (base, 1.0, true);
    }
    let signal: f64 = ws.iter().map(|w| w.norm_squared()).sum();
    if signal <= 0.0 {
        return (base, 1.0, false);
    }
    let s_max = (ctx.p0 / signal).sqrt();
    if s_max <= 1.0 || !ctx.feasible(&assemble(ws, an, s_max, ctx)) {
        return (base, 1.0, false);
    }
    let (mut lo, mut hi) = (1.0, s_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ctx.feasible(&assemble(ws, an, mid, ctx)) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    (assemble(ws, an, hi, ctx), hi, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelMatrix;
    use rand::SeedableRng;

    fn ctx(n: usize, k: usize, gamma_b: f64, p0: f64) -> ExtractionContext {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ChannelMatrix::new(model::sample_cn_matrix(&mut rng, k, n)).unwrap();
        ExtractionContext {
            geom: ArrayGeometry::half_wavelength(n).unwrap(),
            grams: (0..k).map(|i| h.user_gram(i)).collect(),
            sigma2: 1.0,
            alpha2: 1.0,
            gamma_b,
            p0,
            eve_angles: vec![0.0],
        }
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
        let f = model::sample_cn_matrix(rng, n, rank);
        &f * f.adjoint()
    }

    #[test]
    fn eigen_is_idempotent_on_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = ctx(4, 2, 1e-3, 100.0);
        let ws: Vec<CMat> = (0..2).map(|_| random_psd(&mut rng, 4, 1)).collect();
        let used: f64 = ws.iter().map(linalg::trace_re).sum();
        let an = CMat::identity(4, 4).scale((100.0 - used) / 4.0);
        let d = BeamDesign::new(ws.clone(), an.clone());
        let (out, rep) = extract_eigen(&d, &c).unwrap();
        assert!(rep.feasible_after);
        assert_eq!(rep.rescale_factor, 1.0);
        for (a, b) in out.user_covs.iter().zip(&ws) {
            assert!((a - b).norm() <= 1e-10 * b.norm());
        }
        assert!((&out.an_cov - &an).norm() <= 1e-10 * an.norm());
    }

    #[test]
    fn eigen_trace_equals_top_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_psd(&mut rng, 5, 3);
        let v = principal_vector(&w);
        let top = linalg::max_eigenvalue(&w);
        assert!((v.norm_squared() - top).abs() <= 1e-10 * top);
    }

    #[test]
    fn identity_loses_half_its_power_to_noise() {
        // W = I_2 keeps one unit of signal power; the other goes to R_N.
        let mut c = ctx(2, 1, 1e-6, 2.0);
        c.grams = vec![CMat::identity(2, 2)];
        let d = BeamDesign::new(vec![CMat::identity(2, 2)], CMat::zeros(2, 2));
        let (out, rep) = extract_eigen(&d, &c).unwrap();
        assert!((linalg::trace_re(&out.user_covs[0]) - 1.0).abs() < 1e-12);
        assert!((out.power() - 2.0).abs() < 1e-12);
        assert_eq!(rep.rescale_factor, 1.0);
    }

    #[test]
    fn repair_raises_signal_until_feasible() {
        let c = ctx(4, 1, 5.0, 10.0);
        let g = c.grams[0].clone();
        let (vals, vecs) = linalg::hermitian_eigen(&g);
        let u = vecs.column(3).into_owned();
        // Weak beam along the channel, lots of noise power.
        let w = linalg::outer(&u).scale(0.1);
        let d = BeamDesign::new(vec![w], CMat::identity(4, 4).scale(9.9 / 4.0));
        let before = model::statistical_sinr(&d, &g, 0, 1.0);
        assert!(before < 5.0, "{before} {vals:?}");
        let (out, rep) = extract_eigen(&d, &c).unwrap();
        assert!(rep.feasible_after);
        assert!(rep.rescale_factor > 1.0);
        assert!(rep.post_sinrs[0] >= 5.0 * (1.0 - SINR_SLACK));
        assert!(out.power() <= 10.0 * (1.0 + 1e-6));
    }

    #[test]
    fn randomized_reports_recomputed_sinrs_and_improves_with_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = ctx(4, 2, 0.2, 50.0);
        let ws: Vec<CMat> = (0..2)
            .map(|_| {
                let w = random_psd(&mut rng, 4, 2);
                w.scale(20.0 / linalg::trace_re(&w))
            })
            .collect();
        let used: f64 = ws.iter().map(linalg::trace_re).sum();
        let d = BeamDesign::new(ws, CMat::identity(4, 4).scale((50.0 - used) / 4.0));
        let (few, rep_few) = extract_randomized(&d, 50, 1, &c).unwrap();
        let (many, rep_many) = extract_randomized(&d, 500, 1, &c).unwrap();
        assert!(rep_few.feasible_after && rep_many.feasible_after);
        assert_eq!(rep_many.post_sinrs, c.sinrs(&many));
        // The first 50 draws of the larger run are the draws of the smaller one.
        assert!(c.objective(&many) <= c.objective(&few));
    }

    #[test]
    fn randomized_on_rank_one_matches_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = ctx(4, 1, 1e-3, 10.0);
        let w = random_psd(&mut rng, 4, 1);
        let d = BeamDesign::new(vec![w.clone()], CMat::identity(4, 4).scale((10.0 - linalg::trace_re(&w)) / 4.0));
        let (e, _) = extract_eigen(&d, &c).unwrap();
        let (r, _) = extract_randomized(&d, 1, 0, &c).unwrap();
        assert!((&e.user_covs[0] - &r.user_covs[0]).norm() <= 1e-9 * w.norm());
        assert!((c.objective(&e) - c.objective(&r)).abs() <= 1e-9 * (1.0 + c.objective(&e)));
    }
}
