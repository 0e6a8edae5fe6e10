//! Dense complex linear algebra shared by every module.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Real diagonal matrix.
pub fn diag(entries: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn from_real(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= tol
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of the hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn lambda_min(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn lambda_max(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a: f64, &s| a.max(s))
}

/// Spectral condition number; infinite when singular.
pub fn condition_number(m: &CMat) -> f64 {
    let s = m.clone().singular_values();
    let hi = s.iter().fold(0.0, |a: f64, &x| a.max(x));
    let lo = s.iter().fold(f64::INFINITY, |a: f64, &x| a.min(x));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(alloc::format!("{}x{} matrix", m.nrows(), m.ncols())))
}

/// Apply `f` to the eigenvalues of a hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        let mut col = scaled.column_mut(k);
        col *= Complex64::new(f(v), 0.0);
    }
    &scaled * vecs.adjoint()
}

/// Square root of a PSD matrix, negative eigenvalues clamped to zero.
pub fn psd_sqrt(m: &CMat) -> CMat {
    hermitian_fn(m, |x| x.max(0.0).sqrt())
}

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]`.
pub fn realify(m: &CMat) -> RMat {
    let (r, c) = m.shape();
    let mut out = RMat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`realify`], averaging the two copies of each entry.
pub fn derealify(m: &RMat) -> CMat {
    let r = m.nrows() / 2;
    let c = m.ncols() / 2;
    CMat::from_fn(r, c, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + r, j + c)]);
        let im = 0.5 * (m[(i + r, j)] - m[(i, j + c)]);
        Complex64::new(re, im)
    })
}

pub fn random_complex(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_real(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    hermitian_part(&random_complex(rng, n, n))
}

/// Random unitary: orthonormalized random complex matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMat {
    loop {
        let m = random_complex(rng, n, n);
        let qr = m.clone().qr();
        let r = qr.r();
        if (0..n).all(|k| r[(k, k)].norm() > 1e-6) {
            return qr.q();
        }
    }
}

pub fn inner(x: &nalgebra::DVector<Complex64>, y: &nalgebra::DVector<Complex64>) -> Complex64 {
    y.dotc(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 5);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            vals.iter().map(|&v| c(v, 0.0)),
        ));
        let back = &vecs * d * vecs.adjoint();
        assert!(max_abs_diff(&back, &h) < 1e-12);
    }

    #[test]
    fn realification_doubles_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 4);
            let vals = eigvalsh(&h);
            let rv = eigvalsh(&from_real(&realify(&h)));
            for (k, v) in vals.iter().enumerate() {
                assert!((rv[2 * k] - v).abs() < 1e-10);
                assert!((rv[2 * k + 1] - v).abs() < 1e-10);
            }
            assert!(max_abs_diff(&derealify(&realify(&h)), &h) < 1e-15);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_complex(&mut rng, 3, 3);
        let g = f.adjoint() * &f;
        let s = psd_sqrt(&g);
        assert!(max_abs_diff(&(&s * &s), &g) < 1e-10);
    }
}
