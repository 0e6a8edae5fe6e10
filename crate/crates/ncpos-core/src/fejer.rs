//! Positivity and sum-of-hermitian-squares factorization in the group algebra
//! of `ℤ_{n_1} ∗ ⋯ ∗ ℤ_{n_m}`, through the POVM pencil.
//!
//! The pipeline maps `p` to `Ω(p)`, solves the membership problem for the
//! POVM pencil at degree `⌊extent/2⌋`, and pulls the certificate back with
//! the splitting `s`. On failure the moment witness is a POVM tuple, which is
//! dilated to unitaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::collections::BTreeMap;

use nalgebra::DVector;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::certify::{self, Certificate, CertifyOptions, MembershipProblem, WitnessSearch};
use crate::error::{Error, Result};
use crate::groupfree::{
    self, factor_projection, naimark_dilate, omega_map, povm_from_variables, split_map, GroupPoly, GroupWord,
    PovmTuple, Signature,
};
use crate::linalg::{self, CMat};
use crate::ncpoly::word_count;
use crate::pencil::build_povm_pencil;
use crate::sdp;

#[derive(Clone, Debug)]
pub struct FactorizeOptions {
    pub certify: CertifyOptions,
    /// Certificate degree; `None` uses `⌊extent/2⌋`. Lower values are rejected.
    pub degree: Option<usize>,
    /// Unitary tuples sampled when verifying a factorization.
    pub samples: usize,
    pub seed: u64,
    /// Largest accepted coefficient residual of `p − Σ q*q`.
    pub tol_residual: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions { certify: CertifyOptions::default(), degree: None, samples: 100, seed: 0, tol_residual: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct FactorizationResult {
    /// `p = Σ q*q`, each `q` with `1 × ν` coefficients.
    pub summands: Vec<GroupPoly>,
    pub extent: usize,
    pub degree: usize,
    /// `⌊extent/2⌋ + 1`.
    pub extent_bound: usize,
    /// `ν·(Σ n_i)·N(extent)`, with `N` counting words in the POVM letters.
    pub count_bound: Option<usize>,
    /// Summands were re-factored through their joint Gram matrix.
    pub compressed: bool,
    pub coeff_residual: f64,
    pub sample_margin: f64,
    pub certificate: Certificate,
}

impl FactorizationResult {
    pub fn count(&self) -> usize {
        self.summands.len()
    }

    pub fn max_summand_extent(&self) -> usize {
        self.summands.iter().filter_map(GroupPoly::extent).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryWitness {
    pub unitaries: Vec<CMat>,
    pub vector: DVector<Complex64>,
    /// `⟨p(U)η, η⟩` for the unit vector `η`.
    pub value: f64,
    pub lambda_min: f64,
}

#[derive(Clone, Debug)]
pub struct GroupWitness {
    pub povm: PovmTuple,
    /// Unit vector with `⟨Ω(p)(E)ξ, ξ⟩ = value`.
    pub xi: DVector<Complex64>,
    pub value: f64,
    pub unitary: Option<UnitaryWitness>,
    /// Set when the dilation did not produce a verified negative value.
    pub dilation_note: Option<String>,
}

#[derive(Clone, Debug)]
pub enum PositivityVerdict {
    Positive(FactorizationResult),
    NotPositive(GroupWitness),
    Inaccurate(String),
}

/// `Ω(p)` over the POVM pencil at the chosen degree, after the `s∘Ω = id` self-check.
pub fn membership_problem(p: &GroupPoly, degree: Option<usize>) -> Result<MembershipProblem> {
    let defect = p.hermitian_defect();
    if defect > 1e-10 {
        return Err(Error::NotHermitian(format!("group polynomial (defect {defect:e})")));
    }
    let sig = p.signature();
    let extent = p.extent().unwrap_or(0);
    let auto = extent / 2;
    let degree = match degree {
        Some(k) if k < auto => {
            return Err(Error::InvalidArgument(format!("degree {k} is below the guaranteed degree {auto}")));
        }
        Some(k) => k,
        None => auto,
    };
    let f = omega_map(p);
    if f.degree().unwrap_or(0) > extent {
        return Err(Error::Numerical(format!("Ω raised the degree above the extent {extent}")));
    }
    let back = split_map(&f, sig)?.max_coeff_diff(p);
    if back > 1e-10 {
        return Err(Error::Numerical(format!("s(Ω(p)) differs from p by {back:e}")));
    }
    MembershipProblem::with_degree(f, build_povm_pencil(sig.orders())?, degree)
}

/// Decides positivity of a hermitian group polynomial, returning either the
/// factorization `p = Σ q*q` or a witness.
pub fn factorize(p: &GroupPoly, opts: &FactorizeOptions) -> Result<PositivityVerdict> {
    let mp = membership_problem(p, opts.degree)?;
    let (sol, cert) = certify::certify(&mp, &opts.certify)?;
    if let Some(cert) = cert {
        let result = assemble_factorization(p, &mp, cert, opts)?;
        if result.coeff_residual > opts.tol_residual {
            return Ok(PositivityVerdict::Inaccurate(format!(
                "factorization residual {:e} exceeds {:e}",
                result.coeff_residual, opts.tol_residual
            )));
        }
        return Ok(PositivityVerdict::Positive(result));
    }
    match certify::find_witness(&mp, &opts.certify)? {
        WitnessSearch::Found(w) => {
            let povm = povm_from_variables(p.signature(), &w.y)?;
            group_witness(p, povm, &w.gamma).map(PositivityVerdict::NotPositive)
        }
        WitnessSearch::NonNegative(lambda) => Ok(PositivityVerdict::Inaccurate(format!(
            "membership SDP {:?} ({}) but the bound problem gives λ = {lambda:e}",
            sol.status, sol.message
        ))),
        WitnessSearch::Inaccurate(msg) => {
            Ok(PositivityVerdict::Inaccurate(format!("membership SDP {:?}; no witness: {msg}", sol.status)))
        }
    }
}

fn assemble_factorization(
    p: &GroupPoly,
    mp: &MembershipProblem,
    cert: Certificate,
    opts: &FactorizeOptions,
) -> Result<FactorizationResult> {
    let sig = p.signature();
    let nu = p.coeff_dim();
    let mut summands = Vec::with_capacity(cert.factor_count());
    for r in &cert.sos {
        summands.push(split_map(r, sig)?);
    }
    // Localizing blocks come per factor as y_{i,1}, .., y_{i,n_i−1}, 1 − Σ_j y_{i,j},
    // each scaled by n_i; the projection absorbs √n_i.
    let mut slots = Vec::new();
    for (i, &n) in sig.orders().iter().enumerate() {
        for j in 1..=n {
            slots.push((i, j, n));
        }
    }
    for (qs, &(i, j, n)) in cert.localizing.iter().zip(&slots) {
        let proj = factor_projection(sig, i, j).scale(Complex64::new((n as f64).sqrt(), 0.0));
        for q in qs {
            summands.push(proj.multiply(&split_map(q, sig)?)?);
        }
    }

    let extent = p.extent().unwrap_or(0);
    let count_bound = word_count(sig.povm_vars(), extent).and_then(|w| w.checked_mul(nu * sig.orders().iter().sum::<usize>()));
    let mut compressed = false;
    if count_bound.is_some_and(|b| summands.len() > b) {
        summands = compress(sig, nu, &summands, opts.certify.rank_tol)?;
        compressed = true;
    }

    let mut total = GroupPoly::zero(sig, nu);
    for q in &summands {
        total = total.checked_add(&q.adjoint().multiply(q)?)?;
    }
    let coeff_residual = total.max_coeff_diff(p);
    let mut sample_margin = f64::INFINITY;
    for s in 0..opts.samples {
        let u = groupfree::sample_unitary_tuple(sig, 1 + s % 3, opts.seed.wrapping_add(s as u64));
        sample_margin = sample_margin.min(linalg::lambda_min(&p.evaluate(&u)?));
    }
    Ok(FactorizationResult {
        summands,
        extent,
        degree: mp.degree(),
        extent_bound: extent / 2 + 1,
        count_bound,
        compressed,
        coeff_residual,
        sample_margin,
        certificate: cert,
    })
}

/// Re-factors `Σ q*q` through the joint Gram matrix over the words used.
fn compress(sig: &Signature, nu: usize, summands: &[GroupPoly], rank_tol: f64) -> Result<Vec<GroupPoly>> {
    let mut index: BTreeMap<GroupWord, usize> = BTreeMap::new();
    for q in summands {
        for (w, _) in q.terms() {
            let next = index.len();
            index.entry(w.clone()).or_insert(next);
        }
    }
    let words: Vec<GroupWord> = {
        let mut v = alloc::vec![GroupWord::identity(); index.len()];
        for (w, &k) in &index {
            v[k] = w.clone();
        }
        v
    };
    let mut f = linalg::zeros(summands.len(), words.len() * nu);
    for (row, q) in summands.iter().enumerate() {
        for (w, m) in q.terms() {
            let k = index[w];
            for a in 0..nu {
                f[(row, k * nu + a)] = m[(0, a)];
            }
        }
    }
    let gram = f.adjoint() * &f;
    let factor = sdp::psd_factor(&linalg::hermitian_part(&gram), rank_tol)?;
    Ok((0..factor.nrows())
        .map(|row| {
            let mut q = GroupPoly::zero_rect(sig, 1, nu);
            for (k, w) in words.iter().enumerate() {
                let coeff = factor.view((row, k * nu), (1, nu)).into_owned();
                if coeff.iter().any(|z| *z != linalg::ZERO) {
                    q.add_term(w.clone(), coeff);
                }
            }
            q
        })
        .collect())
}

const NEGATIVE: f64 = -1e-8;

/// Checks the POVM witness directly and dilates it to unitaries.
pub fn group_witness(p: &GroupPoly, povm: PovmTuple, gamma: &DVector<Complex64>) -> Result<GroupWitness> {
    let sig = p.signature();
    let norm = gamma.norm();
    if norm == 0.0 {
        return Err(Error::Numerical("zero witness vector".into()));
    }
    let xi = gamma / Complex64::new(norm, 0.0);
    let f = omega_map(p);
    let value = quadratic_form(&f.evaluate(&groupfree::povm_as_variables(&povm))?, &xi);
    if value > NEGATIVE {
        return Err(Error::Numerical(format!("POVM witness value {value:e} is not negative")));
    }
    let mut out = GroupWitness { povm, xi, value, unitary: None, dilation_note: None };
    let dilation = match naimark_dilate(sig, &out.povm) {
        Ok(d) => d,
        Err(e) => {
            out.dilation_note = Some(format!("dilation failed: {e}"));
            return Ok(out);
        }
    };
    let pu = p.evaluate(&dilation.unitaries)?;
    let lifted = linalg::kron(&linalg::identity(p.coeff_dim()), &dilation.isometry) * &out.xi;
    let lifted_value = quadratic_form(&pu, &lifted);
    let (vals, vecs) = linalg::eigh(&linalg::hermitian_part(&pu));
    let lambda_min = vals[0];
    let (vector, value) = if lifted_value <= NEGATIVE {
        (lifted, lifted_value)
    } else {
        (vecs.column(0).into_owned(), lambda_min)
    };
    if value <= NEGATIVE {
        out.unitary = Some(UnitaryWitness { unitaries: dilation.unitaries, vector, value, lambda_min });
    } else {
        out.dilation_note = Some(format!("dilated tuple has λ_min(p(U)) = {lambda_min:e}"));
    }
    Ok(out)
}

fn quadratic_form(m: &CMat, v: &DVector<Complex64>) -> f64 {
    linalg::inner(v, &(m * v)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupfree::{sample_povm_tuple, sample_unitary_tuple, spectral_povm};
    use crate::linalg::c;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(ns: &[usize]) -> Signature {
        Signature::new(ns.to_vec()).unwrap()
    }

    fn z3(constant: f64) -> GroupPoly {
        let s = sig(&[3]);
        let mut p = GroupPoly::scalar_term(&s, GroupWord::identity(), c(constant, 0.0));
        p.add_term(GroupWord::generator(&s, 0, 1), linalg::identity(1));
        p.add_term(GroupWord::generator(&s, 0, 2), linalg::identity(1));
        p
    }

    fn positive(v: PositivityVerdict) -> FactorizationResult {
        match v {
            PositivityVerdict::Positive(r) => r,
            other => panic!("expected Positive, got {other:?}"),
        }
    }

    fn negative(v: PositivityVerdict) -> GroupWitness {
        match v {
            PositivityVerdict::NotPositive(w) => w,
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn z3_positive_example() {
        let p = z3(2.0);
        for k in 0..3 {
            let u = vec![linalg::identity(1) * sig(&[3]).root_power(0, k)];
            let v = p.evaluate(&u).unwrap()[(0, 0)].re;
            assert!([4.0, 1.0].iter().any(|t| (v - t).abs() < 1e-12));
        }
        let r = positive(factorize(&p, &FactorizeOptions::default()).unwrap());
        assert!(r.max_summand_extent() <= 1);
        assert!(r.coeff_residual <= 1e-8, "residual {}", r.coeff_residual);
        assert!(r.sample_margin >= 1.0 - 1e-9);
    }

    #[test]
    fn z3_negative_example() {
        let w = negative(factorize(&z3(0.5), &FactorizeOptions::default()).unwrap());
        assert!((w.value + 0.5).abs() < 1e-6, "value {}", w.value);
        let u = w.unitary.expect("unitary witness");
        assert!((u.value + 0.5).abs() < 1e-6);
    }

    #[test]
    fn z2_generator_is_not_positive() {
        let s = sig(&[2]);
        let x = GroupPoly::scalar_term(&s, GroupWord::generator(&s, 0, 1), linalg::ONE);
        let w = negative(factorize(&x, &FactorizeOptions::default()).unwrap());
        assert!((w.value + 1.0).abs() < 1e-6);
        assert!(w.unitary.is_some());
    }

    #[test]
    fn constants() {
        let s = sig(&[2, 3]);
        let r = positive(factorize(&GroupPoly::one(&s, 1), &FactorizeOptions::default()).unwrap());
        assert!(r.max_summand_extent() <= 1);
        assert!(r.count() <= r.count_bound.unwrap());
        let w = negative(factorize(&GroupPoly::one(&s, 1).scale(c(-1.0, 0.0)), &FactorizeOptions::default()).unwrap());
        assert!((w.value + 1.0).abs() < 1e-6);
    }

    #[test]
    fn square_of_extent_one_element() {
        let s = sig(&[2, 2]);
        let mut q = GroupPoly::one(&s, 1);
        q.add_term(GroupWord::from_syllables(&s, &[(0, 1), (1, 1)]).unwrap(), linalg::identity(1));
        let p = q.adjoint().multiply(&q).unwrap();
        let r = positive(factorize(&p, &FactorizeOptions::default()).unwrap());
        assert!(r.coeff_residual <= 1e-8, "residual {}", r.coeff_residual);
        assert!(r.max_summand_extent() <= 2);
    }

    #[test]
    fn degree_override_below_guarantee_rejected() {
        let s = sig(&[2, 2]);
        let w = GroupWord::from_syllables(&s, &[(0, 1), (1, 1)]).unwrap();
        let mut p = GroupPoly::scalar_term(&s, w.clone(), linalg::ONE);
        p.add_term(w.inverse(&s), linalg::identity(1));
        let opts = FactorizeOptions { degree: Some(0), ..Default::default() };
        assert!(matches!(factorize(&p, &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_hermitian_rejected() {
        let s = sig(&[3]);
        let x = GroupPoly::scalar_term(&s, GroupWord::generator(&s, 0, 1), linalg::ONE);
        assert!(matches!(factorize(&x, &FactorizeOptions::default()), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn operator_valued_sums_of_squares_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (k, ns) in [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2]].into_iter().enumerate() {
            let s = sig(&ns);
            let nu = 1 + k % 2;
            let mut p = GroupPoly::zero(&s, nu);
            for _ in 0..rng.random_range(1..3) {
                let q = GroupPoly::random(&mut rng, &s, nu, nu, 1);
                p = p.checked_add(&q.adjoint().multiply(&q).unwrap()).unwrap();
            }
            let r = positive(factorize(&p, &FactorizeOptions::default()).unwrap());
            assert!(r.max_summand_extent() <= r.extent_bound);
            assert!(r.count() <= r.count_bound.unwrap());
            assert!(r.sample_margin >= -1e-6);
        }
    }

    #[test]
    fn unitary_minimum_is_reached_by_povm_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = sig(&[2, 3]);
        let z = GroupPoly::random(&mut rng, &s, 2, 2, 2);
        let p = z.checked_add(&z.adjoint()).unwrap();
        let f = omega_map(&p);
        let mut unitary_min = f64::INFINITY;
        let mut povm_min = f64::INFINITY;
        for seed in 0..100 {
            let u = sample_unitary_tuple(&s, 1 + seed as usize % 3, seed);
            let pu = linalg::lambda_min(&p.evaluate(&u).unwrap());
            unitary_min = unitary_min.min(pu);
            // Spectral measurements of the sampled unitaries are POVM samples too.
            let spectral = groupfree::povm_as_variables(&spectral_povm(&s, &u).unwrap());
            let pe = linalg::lambda_min(&f.evaluate(&spectral).unwrap());
            assert!((pe - pu).abs() < 1e-9);
            let random = groupfree::povm_as_variables(&sample_povm_tuple(&s, 1 + seed as usize % 3, seed));
            povm_min = povm_min.min(pe).min(linalg::lambda_min(&f.evaluate(&random).unwrap()));
        }
        assert!(unitary_min >= povm_min - 1e-6);
    }
}
