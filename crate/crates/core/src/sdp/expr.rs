//! Affine expressions over the flat real parameter vector of a
//! [`ConicProblem`](super::ConicProblem).
//!
//! A Hermitian `n×n` variable is parametrized by `n²` reals: the real parts of
//! the upper triangle (diagonal included) followed by the imaginary parts of
//! the strict upper triangle. The lower triangle is implied, so symmetry is
//! exact rather than enforced by constraints.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::linalg::{CMat, CVec, C64};

/// Real affine function `Σ coef·x[idx] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub(crate) terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub(crate) fn term(idx: usize, coef: f64) -> Self {
        Self { terms: vec![(idx, coef)], constant: 0.0 }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
        self.constant += other.constant * s;
    }

    /// Sorts terms by index and merges duplicates.
    pub fn compress(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
    }

    pub fn compressed(mut self) -> Self {
        self.compress();
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self -= &rhs;
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Complex affine expression, stored as real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CExpr {
    pub fn real(re: LinExpr) -> Self {
        Self { re, im: LinExpr::zero() }
    }

    pub fn constant(c: C64) -> Self {
        Self { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    /// `self += c · other`.
    pub fn add_mul(&mut self, other: &CExpr, c: C64) {
        self.re.add_scaled(&other.re, c.re);
        self.re.add_scaled(&other.im, -c.im);
        self.im.add_scaled(&other.im, c.re);
        self.im.add_scaled(&other.re, c.im);
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    fn compress(&mut self) {
        self.re.compress();
        self.im.compress();
    }
}

/// Hermitian-matrix-valued affine expression (full storage, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HermExpr {
    dim: usize,
    entries: Vec<CExpr>,
}

impl HermExpr {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![CExpr::default(); dim * dim] }
    }

    pub fn from_const(m: &CMat) -> Self {
        let dim = m.nrows();
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out.entries[i * dim + j] = CExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &CExpr {
        &self.entries[i * self.dim + j]
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut CExpr {
        &mut self.entries[i * self.dim + j]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)` to the conjugate.
    pub(crate) fn set_upper(&mut self, i: usize, j: usize, e: CExpr) {
        *self.get_mut(j, i) = e.conj();
        *self.get_mut(i, j) = e;
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &HermExpr, s: f64) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in HermExpr");
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.re.add_scaled(&b.re, s);
            a.im.add_scaled(&b.im, s);
        }
    }

    pub fn add_const(&mut self, m: &CMat) {
        assert_eq!((self.dim, self.dim), m.shape(), "dimension mismatch in HermExpr");
        for i in 0..self.dim {
            for j in 0..self.dim {
                let e = self.get_mut(i, j);
                e.re.constant += m[(i, j)].re;
                e.im.constant += m[(i, j)].im;
            }
        }
    }

    /// Adds `s · I` where `s` is a real affine expression.
    pub fn add_diagonal(&mut self, s: &LinExpr) {
        for i in 0..self.dim {
            self.get_mut(i, i).re += s;
        }
    }

    /// `vᴴ M v`.
    pub fn quad(&self, v: &CVec) -> LinExpr {
        let mut acc = CExpr::default();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc.add_mul(self.get(i, j), v[i].conj() * v[j]);
            }
        }
        acc.re.compressed()
    }

    /// `uᴴ M` as a row of complex expressions.
    pub fn left_mul(&self, u: &CVec) -> Vec<CExpr> {
        (0..self.dim)
            .map(|j| {
                let mut acc = CExpr::default();
                for i in 0..self.dim {
                    acc.add_mul(self.get(i, j), u[i].conj());
                }
                acc.compress();
                acc
            })
            .collect()
    }

    /// `[[corner, border], [borderᴴ, body]]`, a Hermitian expression of
    /// dimension `body.dim() + 1`.
    pub fn bordered(corner: LinExpr, border: &[CExpr], body: &HermExpr) -> Self {
        assert_eq!(border.len(), body.dim);
        let n = body.dim + 1;
        let mut out = Self::zeros(n);
        *out.get_mut(0, 0) = CExpr::real(corner);
        for (j, b) in border.iter().enumerate() {
            *out.get_mut(0, j + 1) = b.clone();
            *out.get_mut(j + 1, 0) = b.conj();
        }
        for i in 0..body.dim {
            for j in 0..body.dim {
                *out.get_mut(i + 1, j + 1) = body.get(i, j).clone();
            }
        }
        out
    }

    /// Real components whose Euclidean norm equals `‖M‖_F` for Hermitian `M`.
    pub fn frobenius_components(&self) -> Vec<LinExpr> {
        let s2 = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            out.push(self.get(i, i).re.clone().compressed());
            for j in (i + 1)..self.dim {
                let e = self.get(i, j);
                out.push(e.re.scaled(s2).compressed());
                out.push(e.im.scaled(s2).compressed());
            }
        }
        out
    }

    /// Upper triangle of the real embedding `[[Re M, −Im M], [Im M, Re M]]`,
    /// column-major with off-diagonal entries scaled by √2.
    pub fn embedded_svec(&self) -> Vec<LinExpr> {
        let n = self.dim;
        let s2 = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(n * (2 * n + 1));
        for col in 0..2 * n {
            for row in 0..=col {
                let e = match (row < n, col < n) {
                    (true, true) => self.get(row, col).re.clone(),
                    (true, false) => self.get(row, col - n).im.scaled(-1.0),
                    (false, false) => self.get(row - n, col - n).re.clone(),
                    (false, true) => unreachable!("lower triangle"),
                };
                let e = if row == col { e } else { e.scaled(s2) };
                out.push(e.compressed());
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.dim, self.dim, |i, j| self.get(i, j).eval(x))
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        self.entries
            .iter()
            .flat_map(|e| [e.re.max_index(), e.im.max_index()])
            .flatten()
            .max()
    }
}

/// Handle to a Hermitian matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatVar {
    pub(crate) offset: usize,
    pub(crate) dim: usize,
}

impl MatVar {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn n_params(dim: usize) -> usize {
        dim * dim
    }

    fn re_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // upper triangle, row-major
        self.offset + i * self.dim - i * (i + 1) / 2 + j
    }

    fn im_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let n = self.dim;
        let strict_row_start = i * (n - 1) - i * (i + 1) / 2 + i;
        self.offset + n * (n + 1) / 2 + strict_row_start + (j - i - 1)
    }

    /// Entry `(i, j)` as a complex affine expression.
    pub fn entry(&self, i: usize, j: usize) -> CExpr {
        let re = LinExpr::term(self.re_index(i, j), 1.0);
        let im = match i.cmp(&j) {
            std::cmp::Ordering::Equal => LinExpr::zero(),
            std::cmp::Ordering::Less => LinExpr::term(self.im_index(i, j), 1.0),
            std::cmp::Ordering::Greater => LinExpr::term(self.im_index(j, i), -1.0),
        };
        CExpr { re, im }
    }

    pub fn expr(&self) -> HermExpr {
        let n = self.dim;
        let mut out = HermExpr::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] = self.entry(i, j);
            }
        }
        out
    }

    /// `Re tr(Cᴴ X)`; for Hermitian `C` this is `tr(C X)`.
    pub fn inner(&self, c: &CMat) -> LinExpr {
        assert_eq!(c.shape(), (self.dim, self.dim), "coefficient matrix shape");
        let mut out = LinExpr::zero();
        for i in 0..self.dim {
            out.add_term(self.re_index(i, i), c[(i, i)].re);
            for j in (i + 1)..self.dim {
                let w = c[(i, j)].conj() + c[(j, i)];
                out.add_term(self.re_index(i, j), w.re);
                out.add_term(self.im_index(i, j), -w.im);
            }
        }
        out
    }

    pub fn trace(&self) -> LinExpr {
        let mut out = LinExpr::zero();
        for i in 0..self.dim {
            out.add_term(self.re_index(i, i), 1.0);
        }
        out
    }

    /// Rebuilds the Hermitian matrix from a parameter vector.
    pub fn value(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval(x))
    }
}

/// Handle to a real scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar {
    pub(crate) index: usize,
}

impl ScalarVar {
    pub fn expr(&self) -> LinExpr {
        LinExpr::term(self.index, 1.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x[self.index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_herm(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
        &a + a.adjoint()
    }

    #[test]
    fn parameters_cover_every_slot_once() {
        let v = MatVar { offset: 3, dim: 4 };
        let mut seen = vec![0; 16];
        for i in 0..4 {
            for j in i..4 {
                seen[v.re_index(i, j) - 3] += 1;
                if i < j {
                    seen[v.im_index(i, j) - 3] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "{seen:?}");
    }

    #[test]
    fn inner_matches_trace() {
        let v = MatVar { offset: 0, dim: 3 };
        let x: Vec<f64> = (0..9).map(|k| (k as f64 * 0.37).sin()).collect();
        let xm = v.value(&x);
        let c = sample_herm(3, 5);
        let direct = (&c * &xm).trace().re;
        assert!((v.inner(&c).eval(&x) - direct).abs() < 1e-12);
        // non-Hermitian coefficient: Re tr(Cᴴ X)
        let c2 = CMat::from_fn(3, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64));
        let direct2 = (c2.adjoint() * &xm).trace().re;
        assert!((v.inner(&c2).eval(&x) - direct2).abs() < 1e-12);
    }

    #[test]
    fn quad_and_frobenius_components() {
        let v = MatVar { offset: 0, dim: 3 };
        let x: Vec<f64> = (0..9).map(|k| (k as f64 * 1.3).cos()).collect();
        let xm = v.value(&x);
        let u = CVec::from_fn(3, |k, _| C64::new(k as f64, 1.0 - k as f64));
        let q = v.expr().quad(&u).eval(&x);
        assert!((q - u.dotc(&(&xm * &u)).re).abs() < 1e-12);
        let comps: f64 = v.expr().frobenius_components().iter().map(|e| e.eval(&x).powi(2)).sum();
        assert!((comps.sqrt() - xm.norm()).abs() < 1e-12);
    }
}
