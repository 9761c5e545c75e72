//! Real symmetric embedding of complex Hermitian matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// `T(H) = [[Re H, −Im H], [Im H, Re H]]`.
///
/// `T(H)` is PSD exactly when `H` is, its trace is `2·tr(H)` and each
/// eigenvalue of `H` appears twice in its spectrum.
pub fn embed_hermitian(h: &CMat) -> Result<DMatrix<f64>> {
    linalg::ensure_hermitian(h, "embedded matrix")?;
    let n = h.nrows();
    Ok(DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}

/// Inverse of [`embed_hermitian`], reading the first block column.
pub fn unembed_hermitian(t: &DMatrix<f64>) -> Result<CMat> {
    if !t.is_square() || !t.nrows().is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "embedding must be square of even size, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    let n = t.nrows() / 2;
    Ok(CMat::from_fn(n, n, |i, j| C64::new(t[(i, j)], t[(i + n, j)])))
}

/// Inner product of two embedded matrices with the ½ factor that makes it
/// equal `Re tr(Aᴴ B)` of the complex originals.
pub fn embedded_inner(ta: &DMatrix<f64>, tb: &DMatrix<f64>) -> f64 {
    0.5 * ta.dot(tb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn identity_embeds_to_identity() {
        let t = embed_hermitian(&CMat::identity(2, 2)).unwrap();
        assert_eq!(t, DMatrix::identity(4, 4));
    }

    #[test]
    fn spectrum_is_doubled() {
        let j = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let h = CMat::from_row_slice(2, 2, &[one, j, -j, one]);
        // eigenvalues of h are {0, 2}
        let (vals, _) = linalg::hermitian_eigen(&h);
        assert!((vals[0]).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        let t = embed_hermitian(&h).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expected = [0.0, 0.0, 2.0, 2.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMat::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
        assert!(embed_hermitian(&m).is_err());
    }

    #[test]
    fn inner_product_scaling() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let b = CMat::from_fn(3, 3, |i, j| C64::new((i * j) as f64 + 1.0, 2.0 * (j as f64 - i as f64)));
        let direct = (a.adjoint() * &b).trace().re;
        let emb = embedded_inner(&embed_hermitian(&a).unwrap(), &embed_hermitian(&b).unwrap());
        assert!((direct - emb).abs() < 1e-12);
        let ta = embed_hermitian(&a).unwrap();
        assert!((ta.trace() - 2.0 * linalg::trace_re(&a)).abs() < 1e-12);
    }
}
