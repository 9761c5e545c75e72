use dfrc_core::linalg::{self, CMat, CVec, C64};
use dfrc_core::model::{
    beampattern_gain, sample_cn_matrix, secrecy_rate_from_sinrs, total_cov, user_sinr, ArrayGeometry, BeamDesign,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_vectors(seed: u64, n: usize, count: usize) -> Vec<CVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_cn_matrix(&mut rng, n, 1).column(0).into_owned()).collect()
}

fn random_psd(seed: u64, n: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = sample_cn_matrix(&mut rng, n, n);
    &f * f.adjoint()
}

// Loop-based oracle for a(θ)ᴴ R a(θ), building a(θ) from its definition.
fn gain_oracle(r: &CMat, n: usize, spacing: f64, theta: f64) -> f64 {
    let a: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * spacing * k as f64 * theta.sin()))
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[i].conj() * r[(i, j)] * a[j];
        }
    }
    acc.re
}

// Beamvector form: |hᵀw_i|² / (Σ_{k≠i} |hᵀw_k|² + hᵀR_N h* + σ²).
fn vector_sinr(ws: &[CVec], an: &CMat, h: &CVec, i: usize, sigma2: f64) -> f64 {
    let power = |w: &CVec| {
        let mut s = C64::new(0.0, 0.0);
        for n in 0..h.len() {
            s += h[n] * w[n];
        }
        s.norm_sqr()
    };
    let interference: f64 = ws.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, w)| power(w)).sum();
    let an_power = (h.transpose() * an * h.conjugate())[(0, 0)].re;
    power(&ws[i]) / (interference + an_power + sigma2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn steering_entries_have_unit_modulus(n in 2usize..24, spacing in 0.1f64..1.0, theta in -1.5f64..1.5) {
        let a = ArrayGeometry::new(n, spacing).unwrap().steering_vector(theta).unwrap();
        prop_assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        prop_assert!((a.norm_squared() - n as f64).abs() < 1e-10);
    }

    #[test]
    fn white_covariance_has_flat_beampattern(n in 2usize..24, theta in -1.5f64..1.5) {
        let g = ArrayGeometry::half_wavelength(n).unwrap();
        let gain = beampattern_gain(&CMat::identity(n, n), &g, theta).unwrap();
        prop_assert!((gain - n as f64).abs() < 1e-10);
    }

    #[test]
    fn beampattern_matches_loop_oracle(seed in any::<u64>(), n in 2usize..12, theta in -1.5f64..1.5) {
        let r = random_psd(seed, n);
        let g = ArrayGeometry::half_wavelength(n).unwrap();
        let fast = beampattern_gain(&r, &g, theta).unwrap();
        let slow = gain_oracle(&r, n, 0.5, theta);
        prop_assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()));
    }

    #[test]
    fn covariance_and_beamvector_sinr_agree(seed in any::<u64>(), n in 2usize..10, k in 1usize..5, sigma2 in 0.01f64..10.0) {
        let ws = random_vectors(seed, n, k);
        let an = random_psd(seed ^ 0x5a5a, n);
        let h = &random_vectors(seed.wrapping_add(1), n, 1)[0];
        let design = BeamDesign::new(ws.iter().map(linalg::outer).collect(), an.clone());
        for i in 0..k {
            let a = user_sinr(&design, h, i, sigma2);
            let b = vector_sinr(&ws, &an, h, i, sigma2);
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn total_cov_is_sum_and_keeps_psd(seed in any::<u64>(), n in 2usize..8, k in 1usize..4) {
        let ws: Vec<CMat> = (0..k).map(|i| random_psd(seed.wrapping_add(i as u64), n)).collect();
        let an = random_psd(seed ^ 0xff, n);
        let d = BeamDesign::new(ws.clone(), an.clone());
        let r = total_cov(&d).unwrap();
        let sum = ws.iter().fold(an, |acc, w| acc + w);
        prop_assert!((&r - &sum).norm() <= 1e-12 * sum.norm());
        prop_assert!(linalg::min_eigenvalue(&r) >= -1e-9 * linalg::trace_re(&r));
        prop_assert!((linalg::trace_re(&r) - d.power()).abs() <= 1e-10 * d.power());
    }

    #[test]
    fn secrecy_rate_ignores_user_order(mut sinrs in prop::collection::vec(0.0f64..1e3, 1..6), eve in 0.0f64..1e3, rot in 0usize..6) {
        let a = secrecy_rate_from_sinrs(&sinrs, eve);
        let len = sinrs.len();
        sinrs.rotate_left(rot % len);
        sinrs.reverse();
        prop_assert_eq!(a, secrecy_rate_from_sinrs(&sinrs, eve));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn secrecy_rate_monotone_in_eve(sinrs in prop::collection::vec(0.0f64..1e3, 1..6), e1 in 0.0f64..1e3, e2 in 0.0f64..1e3) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(secrecy_rate_from_sinrs(&sinrs, hi) <= secrecy_rate_from_sinrs(&sinrs, lo));
    }
}
