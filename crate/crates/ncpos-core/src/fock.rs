//! Truncated Fock space: symmetrized creation operators, the extraction
//! matrix and coefficient recovery from `q(A)`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{enumerate_words, word_count, NcPoly, Word, WordBasis, WordImages};
use crate::pencil::LinearPencil;

pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// `A_j = C_j + C_j^*` compressed to words of length `≤ depth`.
#[derive(Clone, Debug)]
pub struct FockTuple {
    depth: usize,
    basis: WordBasis,
    ops: Vec<CMat>,
}

pub fn build_fock_tuple(g: usize, depth: usize) -> Result<FockTuple> {
    build_fock_tuple_with_cap(g, depth, DEFAULT_SIZE_CAP)
}

pub fn build_fock_tuple_with_cap(g: usize, depth: usize, cap: usize) -> Result<FockTuple> {
    if g == 0 || depth == 0 {
        return Err(Error::InvalidArgument(format!("need g ≥ 1 and depth ≥ 1, got ({g}, {depth})")));
    }
    let n = word_count(g, depth).unwrap_or(usize::MAX);
    if n > cap {
        return Err(Error::SizeCap { size: n, cap });
    }
    let basis = enumerate_words(g, depth)?;
    let mut ops = alloc::vec![linalg::zeros(n, n); g];
    for (col, w) in basis.words().iter().enumerate() {
        if w.len() == depth {
            continue;
        }
        for j in 1..=g as u32 {
            let row = basis.index_of(&Word::letter(j).concat(w)).expect("word within depth");
            ops[j as usize - 1][(row, col)] = linalg::ONE;
            ops[j as usize - 1][(col, row)] = linalg::ONE;
        }
    }
    Ok(FockTuple { depth, basis, ops })
}

impl FockTuple {
    pub fn g(&self) -> usize {
        self.ops.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn basis(&self) -> &WordBasis {
        &self.basis
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The tuple `t·A`.
    pub fn scaled(&self, t: f64) -> Vec<CMat> {
        self.ops.iter().map(|a| a * Complex64::new(t, 0.0)).collect()
    }
}

/// Rows are the vectors `A^w Ω`: `M[w, v] = ⟨A^w Ω, e_v⟩`.
#[derive(Clone, Debug)]
pub struct ExtractionMatrix {
    pub m: CMat,
    pub m_inv: CMat,
    pub condition: f64,
}

pub fn extraction_matrix(f: &FockTuple) -> Result<ExtractionMatrix> {
    let n = f.dim();
    let mut m = linalg::zeros(n, n);
    // A^w Ω = A_{i_1} (A^{w'} Ω) for w = x_{i_1} w'; rows are filled shortest first.
    for (k, w) in f.basis.words().iter().enumerate() {
        if w.is_empty() {
            m[(k, 0)] = linalg::ONE;
            continue;
        }
        let letters = w.letters();
        let rest = f.basis.index_of(&Word::new(&letters[1..])).expect("suffix in basis");
        let prev = m.row(rest).transpose();
        let next = &f.ops[letters[0] as usize - 1] * prev;
        m.set_row(k, &next.transpose());
    }
    let m_inv = linalg::inverse(&m)?;
    let residual = linalg::max_abs_diff(&(&m * &m_inv), &linalg::identity(n));
    if residual > 1e-10 {
        return Err(Error::Singular(format!("extraction matrix (‖MM⁻¹ − I‖ = {residual:e})")));
    }
    let condition = linalg::condition_number(&m);
    Ok(ExtractionMatrix { m, m_inv, condition })
}

impl ExtractionMatrix {
    /// `λ = ‖M⁻¹‖ · N`, bounding every coefficient of `q` by `λ ‖q(A)‖`.
    pub fn coefficient_bound(&self) -> f64 {
        linalg::spectral_norm(&self.m_inv) * self.m.nrows() as f64
    }
}

/// Recovers `q` from `T = q(A)`: with `Z_v` the `(e_v, e_∅)` block of `T`,
/// the coefficient row is `Q = Z · M⁻¹`.
pub fn extract_coefficients(t: &CMat, f: &FockTuple, ext: &ExtractionMatrix, nu: usize) -> Result<NcPoly> {
    extract_coefficients_with(t, f, ext, nu, &mut WordImages::new(f.ops())?)
}

/// As [`extract_coefficients`], reusing word images of `A` for the check `q(A) = T`.
pub fn extract_coefficients_with(
    t: &CMat,
    f: &FockTuple,
    ext: &ExtractionMatrix,
    nu: usize,
    images: &mut WordImages,
) -> Result<NcPoly> {
    let n = f.dim();
    if t.shape() != (nu * n, nu * n) {
        return Err(Error::DimensionMismatch(format!(
            "T is {:?}, expected {}x{}",
            t.shape(),
            nu * n,
            nu * n
        )));
    }
    let mut q = NcPoly::zero(f.g(), nu);
    for (wi, w) in f.basis.words().iter().enumerate() {
        let mut coeff = linalg::zeros(nu, nu);
        for v in 0..n {
            let s = ext.m_inv[(v, wi)];
            if s == linalg::ZERO {
                continue;
            }
            for a in 0..nu {
                for b in 0..nu {
                    coeff[(a, b)] += t[(a * n + v, b * n)] * s;
                }
            }
        }
        q.add_term(w.clone(), coeff);
    }
    let back = q.evaluate_cached(images)?;
    let err = linalg::max_abs_diff(&back, t);
    if err > 1e-6 * linalg::max_abs(t).max(1.0) {
        return Err(Error::NotPolynomialImage(f.depth, err));
    }
    Ok(q)
}

/// Largest `t ∈ {1, 1/2, 1/4, ..}` with `λ_min(L(tA)) ≥ 1/2`.
pub fn scale_for_pencil(l: &LinearPencil, f: &FockTuple) -> Result<f64> {
    if !l.is_monic() {
        return Err(Error::NotMonic);
    }
    if l.g() != f.g() {
        return Err(Error::DimensionMismatch(format!("pencil has {} variables, tuple {}", l.g(), f.g())));
    }
    let mut t = 1.0;
    for _ in 0..=40 {
        if linalg::lambda_min(&l.evaluate(&f.scaled(t))?) >= 0.5 {
            return Ok(t);
        }
        t *= 0.5;
    }
    Err(Error::PathologicalScaling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(rows: usize, data: &[f64]) -> CMat {
        CMat::from_iterator(rows, rows, data.iter().map(|&x| c(x, 0.0))).transpose()
    }

    #[test]
    fn single_variable_depth_two() {
        let f = build_fock_tuple(1, 2).unwrap();
        assert_eq!(f.ops()[0], real(3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]));
        let ext = extraction_matrix(&f).unwrap();
        assert_eq!(ext.m, real(3, &[1., 0., 0., 0., 1., 0., 1., 0., 1.]));
        let f1 = build_fock_tuple(1, 1).unwrap();
        assert_eq!(extraction_matrix(&f1).unwrap().m, linalg::identity(2));
    }

    #[test]
    fn depth_one_truncation() {
        let f = build_fock_tuple(2, 1).unwrap();
        let a1 = &f.ops()[0];
        // basis (∅, x1, x2)
        assert_eq!(a1.column(0).iter().map(|z| z.re).collect::<Vec<_>>(), vec![0., 1., 0.]);
        assert_eq!(a1.column(1).iter().map(|z| z.re).collect::<Vec<_>>(), vec![1., 0., 0.]);
        assert_eq!(a1.column(2).iter().map(|z| z.re).collect::<Vec<_>>(), vec![0., 0., 0.]);
    }

    #[test]
    fn operators_are_symmetric_and_extraction_invertible() {
        for g in 1..=3 {
            for depth in 1..=4 {
                let f = build_fock_tuple(g, depth).unwrap();
                for a in f.ops() {
                    assert_eq!(a, &a.transpose());
                }
                let ext = extraction_matrix(&f).unwrap();
                assert!(ext.condition.is_finite());
            }
        }
    }

    #[test]
    fn size_cap_enforced() {
        assert!(matches!(build_fock_tuple_with_cap(3, 4, 100), Err(Error::SizeCap { size: 121, cap: 100 })));
    }

    #[test]
    fn extracts_identity_and_generator() {
        let f = build_fock_tuple(2, 2).unwrap();
        let ext = extraction_matrix(&f).unwrap();
        let q = extract_coefficients(&linalg::identity(7), &f, &ext, 1).unwrap().prune(1e-14);
        assert_eq!(q, NcPoly::one(2, 1));
        let q = extract_coefficients(&f.ops()[0], &f, &ext, 1).unwrap().prune(1e-14);
        assert_eq!(q, NcPoly::scalar_term(2, &[1], linalg::ONE));
    }

    #[test]
    fn random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = build_fock_tuple(2, 3).unwrap();
        let ext = extraction_matrix(&f).unwrap();
        for _ in 0..5 {
            let q = NcPoly::random(&mut rng, 2, 2, 2, 3);
            let t = q.evaluate(f.ops()).unwrap();
            let back = extract_coefficients(&t, &f, &ext, 2).unwrap();
            assert!(back.max_coeff_diff(&q) <= 1e-9);
            let worst = q.max_coeff_abs();
            assert!(worst <= ext.coefficient_bound() * linalg::spectral_norm(&t));
        }
    }

    #[test]
    fn non_polynomial_image_rejected() {
        let f = build_fock_tuple(1, 2).unwrap();
        let ext = extraction_matrix(&f).unwrap();
        let mut t = linalg::identity(3);
        t[(0, 2)] = c(5.0, 0.0);
        assert!(matches!(extract_coefficients(&t, &f, &ext, 1), Err(Error::NotPolynomialImage(2, _))));
    }

    #[test]
    fn scaling_examples() {
        let f = build_fock_tuple(1, 2).unwrap();
        let l = LinearPencil::monic(vec![linalg::identity(1)], None).unwrap();
        let t = scale_for_pencil(&l, &f).unwrap();
        assert_eq!(t, 0.25);
        assert!(linalg::lambda_min(&l.evaluate(&f.scaled(t)).unwrap()) >= 0.5);
        let flat = LinearPencil::monic(vec![linalg::zeros(2, 2)], None).unwrap();
        assert_eq!(scale_for_pencil(&flat, &f).unwrap(), 1.0);
    }
}
