//! System model: the transmit array, channels, scenario constants, the
//! decision variables of a design and every performance metric computed
//! from them.
//!
//! Conventions: angles are radians, all powers and thresholds are linear.
//! Channel rows follow the downlink model `y = H x + z`, so user `i` sees the
//! quadratic form `h_iᵀ W h_i*` rather than `h_iᴴ W h_i`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};

const ANGLE_SLACK: f64 = 1e-12;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_angle(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta.abs() > FRAC_PI_2 + ANGLE_SLACK {
        return Err(Error::Domain(format!(
            "angle {theta} rad outside [-pi/2, pi/2]"
        )));
    }
    Ok(())
}

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_antennas: usize,
    spacing: f64,
}

impl ArrayGeometry {
    /// `spacing` is the element spacing in wavelengths.
    pub fn new(n_antennas: usize, spacing: f64) -> Result<Self> {
        if n_antennas < 2 {
            return Err(Error::Domain(format!(
                "array needs at least 2 antennas, got {n_antennas}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { n_antennas, spacing })
    }

    /// Half-wavelength ULA.
    pub fn half_wavelength(n_antennas: usize) -> Result<Self> {
        Self::new(n_antennas, 0.5)
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `a(θ)` with entry `k` equal to `exp(j 2π k Δ sin θ)`.
    pub fn steering_vector(&self, theta: f64) -> Result<CVec> {
        check_angle(theta)?;
        let step = 2.0 * PI * self.spacing * theta.sin();
        Ok(CVec::from_fn(self.n_antennas, |k, _| {
            C64::from_polar(1.0, step * k as f64)
        }))
    }

    /// `a(θ) a(θ)ᴴ`.
    pub fn steering_outer(&self, theta: f64) -> Result<CMat> {
        Ok(linalg::outer(&self.steering_vector(theta)?))
    }
}

/// Strictly increasing list of angles inside `[-π/2, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        for &a in &angles {
            check_angle(a)?;
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("angle grid must be strictly increasing".into()));
        }
        Ok(Self {
            angles: angles.into_iter().map(|a| a.clamp(-FRAC_PI_2, FRAC_PI_2)).collect(),
        })
    }

    pub fn empty() -> Self {
        Self { angles: Vec::new() }
    }

    /// Points `start + k·step` (degrees) up to and including `stop`.
    pub fn uniform_deg(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0) {
            return Err(Error::Domain(format!("grid step must be positive, got {step_deg}")));
        }
        let count = ((stop_deg - start_deg) / step_deg + 1e-9).floor();
        if count < 0.0 {
            return Ok(Self::empty());
        }
        let angles = (0..=count as usize)
            .map(|k| deg_to_rad(start_deg + k as f64 * step_deg))
            .collect();
        Self::new(angles)
    }

    /// The default full-range grid: 1° steps over [-90°, 90°].
    pub fn full_range_deg(step_deg: f64) -> Result<Self> {
        Self::uniform_deg(-90.0, 90.0, step_deg)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.angles.iter().any(|a| (a - theta).abs() <= 1e-9)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.angles.iter().copied()
    }
}

/// Downlink channel, row `i` holding `h_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMat,
}

impl ChannelMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Contract("channel matrix must be non-empty".into()));
        }
        if !linalg::is_finite(&entries) {
            return Err(Error::Contract("channel matrix has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn n_users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// `h_i` as a column vector (the transpose of row `i`).
    pub fn row(&self, i: usize) -> CVec {
        self.entries.row(i).transpose()
    }

    /// `h_i* h_iᵀ`, the Hermitian matrix with `tr(h_i* h_iᵀ W) = h_iᵀ W h_i*`.
    pub fn user_gram(&self, i: usize) -> CMat {
        linalg::outer(&self.row(i).conjugate())
    }
}

/// Draws a `k_users × N` matrix with i.i.d. CN(0, 1) entries.
pub fn sample_channel(k_users: usize, geom: &ArrayGeometry, seed: u64) -> Result<ChannelMatrix> {
    if k_users == 0 {
        return Err(Error::Domain("need at least one user".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelMatrix::new(sample_cn_matrix(&mut rng, k_users, geom.n_antennas()))
}

/// Matrix of i.i.d. circularly-symmetric CN(0, 1) draws.
pub fn sample_cn_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    })
}

/// Physical and design constants of one scenario, in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    /// Nominal target direction.
    pub theta0: f64,
    /// Half-width of the target-direction uncertainty interval.
    pub delta_theta: f64,
    /// Legitimate-user SINR threshold.
    pub gamma_b: f64,
    /// Required main-beam to sidelobe gap.
    pub gamma_s: f64,
    /// Bound on `‖R_X − R_d‖_F²`.
    pub gamma_bp: f64,
    /// Transmit power budget.
    pub p0: f64,
    pub sigma2: f64,
    /// Target path gain `|α|²`.
    pub alpha2: f64,
    /// Allowed main-beam ripple fraction ρ: gains inside the main beam stay
    /// within `(1 ± ρ)` of the gain at `theta0`.
    pub ripple: f64,
    pub mainbeam_grid: AngleGrid,
    pub sidelobe_grid: AngleGrid,
}

impl ScenarioParams {
    /// Main-beam and sidelobe grids: the main beam covers
    /// `[θ0 − Δθ, θ0 + Δθ]` in `step` increments; the sidelobe region is
    /// the full-range grid minus the main beam widened by `guard` on both
    /// sides. All arguments in radians.
    pub fn default_grids(
        theta0: f64,
        delta_theta: f64,
        step: f64,
        guard: f64,
    ) -> Result<(AngleGrid, AngleGrid)> {
        check_angle(theta0)?;
        if !(step > 0.0) || delta_theta < 0.0 || guard < 0.0 {
            return Err(Error::Domain("grid step must be positive, widths nonnegative".into()));
        }
        let half = (delta_theta / step + 1e-9).floor() as i64;
        let main: Vec<f64> = (-half..=half)
            .map(|k| theta0 + k as f64 * step)
            .filter(|a| a.abs() <= FRAC_PI_2 + ANGLE_SLACK)
            .collect();
        let exclusion = delta_theta + guard + 1e-9;
        let full = AngleGrid::full_range_deg(rad_to_deg(step))?;
        let side: Vec<f64> = full.iter().filter(|a| (a - theta0).abs() > exclusion).collect();
        Ok((AngleGrid::new(main)?, AngleGrid::new(side)?))
    }

    pub fn validate(&self) -> Result<()> {
        check_angle(self.theta0)?;
        let positive = [
            ("gamma_b", self.gamma_b),
            ("gamma_s", self.gamma_s),
            ("p0", self.p0),
            ("sigma2", self.sigma2),
            ("alpha2", self.alpha2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta_theta >= 0.0) {
            return Err(Error::Domain("delta_theta must be nonnegative".into()));
        }
        if !(self.gamma_bp >= 0.0) {
            return Err(Error::Domain("gamma_bp must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.ripple) {
            return Err(Error::Domain(format!("ripple must lie in [0, 1), got {}", self.ripple)));
        }
        if self.mainbeam_grid.iter().any(|a| self.sidelobe_grid.contains(a)) {
            return Err(Error::Domain("main-beam and sidelobe grids overlap".into()));
        }
        if self.delta_theta > 0.0 && !self.mainbeam_grid.contains(self.theta0) {
            return Err(Error::Domain("theta0 must lie on the main-beam grid".into()));
        }
        Ok(())
    }
}

/// What the transmitter knows about the user channels.
#[derive(Debug, Clone)]
pub enum CsiModel {
    Perfect {
        channel: ChannelMatrix,
    },
    /// Estimate `H̃` with `‖e_i‖ ≤ μ_i` per user.
    NormBounded {
        channel_estimate: ChannelMatrix,
        radii: Vec<f64>,
    },
    /// Estimated covariances `R̃_{h_i}` with `‖Δ_i‖_F ≤ δ_i` per user.
    StatisticalBounded {
        covariances: Vec<CMat>,
        radii: Vec<f64>,
    },
}

impl CsiModel {
    pub fn n_users(&self) -> usize {
        match self {
            CsiModel::Perfect { channel } => channel.n_users(),
            CsiModel::NormBounded { channel_estimate, .. } => channel_estimate.n_users(),
            CsiModel::StatisticalBounded { covariances, .. } => covariances.len(),
        }
    }

    pub fn n_antennas(&self) -> usize {
        match self {
            CsiModel::Perfect { channel } => channel.n_antennas(),
            CsiModel::NormBounded { channel_estimate, .. } => channel_estimate.n_antennas(),
            CsiModel::StatisticalBounded { covariances, .. } => {
                covariances.first().map(|c| c.nrows()).unwrap_or(0)
            }
        }
    }

    /// Per-user Hermitian matrix `G_i` such that the nominal user-`i` power
    /// term is `tr(G_i W)`.
    pub fn nominal_gram(&self, i: usize) -> CMat {
        match self {
            CsiModel::Perfect { channel } => channel.user_gram(i),
            CsiModel::NormBounded { channel_estimate, .. } => channel_estimate.user_gram(i),
            CsiModel::StatisticalBounded { covariances, .. } => covariances[i].clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_radii = |radii: &[f64], k: usize| -> Result<()> {
            if radii.len() != k {
                return Err(Error::Contract(format!(
                    "expected {k} radii, got {}",
                    radii.len()
                )));
            }
            if radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(Error::Domain("radii must be finite and nonnegative".into()));
            }
            Ok(())
        };
        match self {
            CsiModel::Perfect { .. } => Ok(()),
            CsiModel::NormBounded { channel_estimate, radii } => {
                check_radii(radii, channel_estimate.n_users())
            }
            CsiModel::StatisticalBounded { covariances, radii } => {
                if covariances.is_empty() {
                    return Err(Error::Contract("need at least one covariance".into()));
                }
                check_radii(radii, covariances.len())?;
                let n = covariances[0].nrows();
                for (i, c) in covariances.iter().enumerate() {
                    if c.nrows() != n {
                        return Err(Error::Contract("covariance dimensions differ".into()));
                    }
                    linalg::ensure_hermitian(c, &format!("covariance {i}"))?;
                    let tol = 1e-7 * linalg::trace_re(c).abs() + 1e-12;
                    if linalg::min_eigenvalue(c) < -tol {
                        return Err(Error::Contract(format!("covariance {i} is not PSD")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Per-user signal covariances `W_i`, the artificial-noise covariance `R_N`
/// and, after extraction, the beamvectors `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamDesign {
    pub user_covs: Vec<CMat>,
    pub an_cov: CMat,
    pub beamvectors: Option<Vec<CVec>>,
    /// Set when `user_covs[i] == w_i w_iᴴ` by construction.
    pub rank_one_extracted: bool,
}

impl BeamDesign {
    pub fn new(user_covs: Vec<CMat>, an_cov: CMat) -> Self {
        Self { user_covs, an_cov, beamvectors: None, rank_one_extracted: false }
    }

    pub fn zeros(k_users: usize, n: usize) -> Self {
        Self::new(vec![CMat::zeros(n, n); k_users], CMat::zeros(n, n))
    }

    pub fn n_users(&self) -> usize {
        self.user_covs.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.an_cov.nrows()
    }

    /// `Σ_i W_i`.
    pub fn signal_cov(&self) -> CMat {
        let n = self.n_antennas();
        self.user_covs.iter().fold(CMat::zeros(n, n), |acc, w| acc + w)
    }

    pub fn power(&self) -> f64 {
        self.user_covs.iter().map(linalg::trace_re).sum::<f64>() + linalg::trace_re(&self.an_cov)
    }

    /// Hermitian within 1e-9 and minimum eigenvalue ≥ −1e-7·trace for every
    /// covariance.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_antennas();
        for (idx, m) in self.user_covs.iter().chain(std::iter::once(&self.an_cov)).enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Contract("design covariances differ in dimension".into()));
            }
            linalg::ensure_hermitian(m, &format!("design matrix {idx}"))?;
            let tol = 1e-7 * linalg::trace_re(m).abs() + 1e-12;
            let lam = linalg::min_eigenvalue(m);
            if lam < -tol {
                return Err(Error::Contract(format!(
                    "design matrix {idx} not PSD (min eigenvalue {lam:.3e})"
                )));
            }
        }
        Ok(())
    }
}

/// `a(θ)ᴴ R a(θ)`.
pub fn beampattern_gain(cov: &CMat, geom: &ArrayGeometry, theta: f64) -> Result<f64> {
    linalg::ensure_hermitian(cov, "covariance")?;
    if cov.nrows() != geom.n_antennas() {
        return Err(Error::Contract(format!(
            "covariance is {}x{}, array has {} antennas",
            cov.nrows(),
            cov.ncols(),
            geom.n_antennas()
        )));
    }
    let a = geom.steering_vector(theta)?;
    Ok(linalg::quad_form(cov, &a))
}

/// `h_iᵀ W h_i*` for a channel row `h`.
pub fn channel_power(cov: &CMat, channel_row: &CVec) -> f64 {
    linalg::quad_form(cov, &channel_row.conjugate())
}

/// SINR of user `user_index` given its (realized) channel row.
pub fn user_sinr(design: &BeamDesign, channel_row: &CVec, user_index: usize, sigma2: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (k, w) in design.user_covs.iter().enumerate() {
        let p = channel_power(w, channel_row);
        if k == user_index {
            signal = p;
        } else {
            interference += p;
        }
    }
    let an = channel_power(&design.an_cov, channel_row);
    signal / (interference + an + sigma2)
}

/// SINR of user `user_index` when only the channel covariance `R_h` is known:
/// `tr(R W_i) / (Σ_{k≠i} tr(R W_k) + tr(R R_N) + σ²)`.
pub fn statistical_sinr(design: &BeamDesign, cov: &CMat, user_index: usize, sigma2: f64) -> f64 {
    let tr = |m: &CMat| (cov * m).trace().re;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (k, w) in design.user_covs.iter().enumerate() {
        if k == user_index {
            signal = tr(w);
        } else {
            interference += tr(w);
        }
    }
    signal / (interference + tr(&design.an_cov) + sigma2)
}

/// All user SINRs under a realized channel.
pub fn user_sinrs(design: &BeamDesign, channel: &ChannelMatrix, sigma2: f64) -> Vec<f64> {
    (0..channel.n_users())
        .map(|i| user_sinr(design, &channel.row(i), i, sigma2))
        .collect()
}

/// Eavesdropper SINR at angle `theta`.
pub fn eve_sinr(
    design: &BeamDesign,
    geom: &ArrayGeometry,
    theta: f64,
    alpha2: f64,
    sigma2: f64,
) -> Result<f64> {
    let a = geom.steering_vector(theta)?;
    let signal: f64 = design.user_covs.iter().map(|w| linalg::quad_form(w, &a)).sum();
    let an = linalg::quad_form(&design.an_cov, &a);
    Ok(alpha2 * signal / (alpha2 * an + sigma2))
}

/// `½ [log2(1 + SINR_i) − log2(1 + SINR_E)]⁺` minimized over users.
pub fn secrecy_rate_from_sinrs(user_sinrs: &[f64], eve_sinr: f64) -> f64 {
    let eve_rate = (1.0 + eve_sinr).log2();
    user_sinrs
        .iter()
        .map(|s| 0.5 * ((1.0 + s).log2() - eve_rate).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Secrecy rate of a design evaluated on a realized (perfect) channel with
/// the eavesdropper at `eve_theta`.
pub fn secrecy_rate(
    design: &BeamDesign,
    csi: &CsiModel,
    params: &ScenarioParams,
    geom: &ArrayGeometry,
    eve_theta: f64,
) -> Result<f64> {
    let CsiModel::Perfect { channel } = csi else {
        return Err(Error::Contract(
            "secrecy rate is evaluated on a realized (perfect) channel".into(),
        ));
    };
    let sinrs = user_sinrs(design, channel, params.sigma2);
    let eve = eve_sinr(design, geom, eve_theta, params.alpha2, params.sigma2)?;
    Ok(secrecy_rate_from_sinrs(&sinrs, eve))
}

/// `R_X = Σ_i W_i + R_N`.
pub fn total_cov(design: &BeamDesign) -> Result<CMat> {
    let n = design.an_cov.nrows();
    if !design.an_cov.is_square() || design.user_covs.iter().any(|w| w.shape() != (n, n)) {
        return Err(Error::Contract("design covariances differ in dimension".into()));
    }
    Ok(design.signal_cov() + &design.an_cov)
}
