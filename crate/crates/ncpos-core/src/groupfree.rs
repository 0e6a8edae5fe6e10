//! Group algebras of free products `ℤ_{n_1} ∗ ⋯ ∗ ℤ_{n_m}`: reduced words,
//! polynomials, spectral projections, the maps to and from the POVM algebra,
//! unitary evaluation and Naimark dilation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{NcPoly, Word};
use crate::pencil::povm_variable;

/// Factor orders `(n_1, .., n_m)`, each at least 2.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(Vec<usize>);

impl Signature {
    pub fn new(ns: impl Into<Vec<usize>>) -> Result<Self> {
        let ns = ns.into();
        if ns.is_empty() || ns.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!("factor orders must be ≥ 2, got {ns:?}")));
        }
        Ok(Signature(ns))
    }

    pub fn orders(&self) -> &[usize] {
        &self.0
    }

    pub fn factors(&self) -> usize {
        self.0.len()
    }

    pub fn order(&self, i: usize) -> usize {
        self.0[i]
    }

    /// `ω_i^k` with `ω_i = exp(2πi/n_i)`.
    pub fn root_power(&self, i: usize, k: i64) -> Complex64 {
        let n = self.0[i] as i64;
        let k = k.rem_euclid(n);
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
    }

    /// Number of POVM variables `Σ (n_i − 1)`.
    pub fn povm_vars(&self) -> usize {
        self.0.iter().map(|n| n - 1).sum()
    }

    /// Inverse of [`povm_variable`]: the 1-based letter `y` maps to `(i, j)`.
    pub fn povm_letter(&self, letter: u32) -> (usize, usize) {
        let mut idx = letter as usize - 1;
        for (i, &n) in self.0.iter().enumerate() {
            if idx < n - 1 {
                return (i, idx + 1);
            }
            idx -= n - 1;
        }
        panic!("letter {letter} outside the POVM alphabet");
    }
}

/// Reduced word: syllables `(factor, exponent)` with `1 ≤ exponent < n_factor`
/// and adjacent factors distinct. Factors are 0-based.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct GroupWord(Vec<(usize, usize)>);

impl GroupWord {
    pub fn identity() -> Self {
        GroupWord(Vec::new())
    }

    /// `x_i^r`, reduced mod `n_i`.
    pub fn generator(sig: &Signature, i: usize, r: i64) -> Self {
        let r = r.rem_euclid(sig.order(i) as i64) as usize;
        if r == 0 {
            Self::identity()
        } else {
            GroupWord(alloc::vec![(i, r)])
        }
    }

    /// Reduces an arbitrary syllable sequence.
    pub fn from_syllables(sig: &Signature, syllables: &[(usize, i64)]) -> Result<Self> {
        let mut out = Self::identity();
        for &(i, r) in syllables {
            if i >= sig.factors() {
                return Err(Error::InvalidArgument(format!("factor {} outside signature {:?}", i + 1, sig.0)));
            }
            out.push(sig, i, r.rem_euclid(sig.order(i) as i64) as usize);
        }
        Ok(out)
    }

    fn push(&mut self, sig: &Signature, i: usize, r: usize) {
        if r == 0 {
            return;
        }
        match self.0.last_mut() {
            Some((f, e)) if *f == i => {
                let s = (*e + r) % sig.order(i);
                if s == 0 {
                    self.0.pop();
                } else {
                    *e = s;
                }
            }
            _ => self.0.push((i, r)),
        }
    }

    pub fn syllables(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn extent(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &GroupWord, sig: &Signature) -> GroupWord {
        let mut out = self.clone();
        for &(i, r) in &other.0 {
            out.push(sig, i, r);
        }
        out
    }

    /// `w* = w⁻¹`.
    pub fn inverse(&self, sig: &Signature) -> GroupWord {
        GroupWord(self.0.iter().rev().map(|&(i, r)| (i, sig.order(i) - r)).collect())
    }
}

impl Ord for GroupWord {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for GroupWord {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for (k, (i, r)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "·")?;
            }
            write!(f, "x{}^{}", i + 1, r)?;
        }
        Ok(())
    }
}

/// All reduced words of extent `≤ max_extent`, in graded order.
pub fn enumerate_group_words(sig: &Signature, max_extent: usize) -> Vec<GroupWord> {
    let mut out = alloc::vec![GroupWord::identity()];
    let mut layer = alloc::vec![GroupWord::identity()];
    for _ in 0..max_extent {
        let mut next = Vec::new();
        for w in &layer {
            for (i, &n) in sig.0.iter().enumerate() {
                if w.0.last().is_some_and(|&(f, _)| f == i) {
                    continue;
                }
                for r in 1..n {
                    let mut v = w.clone();
                    v.0.push((i, r));
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out.sort();
    out
}

/// `Σ P_w ⊗ w` over reduced words, with `rows × cols` coefficients.
#[derive(Clone, PartialEq)]
pub struct GroupPoly {
    sig: Signature,
    rows: usize,
    cols: usize,
    terms: BTreeMap<GroupWord, CMat>,
}

impl GroupPoly {
    pub fn zero(sig: &Signature, nu: usize) -> Self {
        Self::zero_rect(sig, nu, nu)
    }

    pub fn zero_rect(sig: &Signature, rows: usize, cols: usize) -> Self {
        GroupPoly { sig: sig.clone(), rows, cols, terms: BTreeMap::new() }
    }

    pub fn one(sig: &Signature, nu: usize) -> Self {
        Self::constant(sig, linalg::identity(nu))
    }

    pub fn constant(sig: &Signature, m: CMat) -> Self {
        let mut p = Self::zero_rect(sig, m.nrows(), m.ncols());
        p.add_term(GroupWord::identity(), m);
        p
    }

    pub fn scalar_term(sig: &Signature, w: GroupWord, z: Complex64) -> Self {
        let mut p = Self::zero(sig, 1);
        p.add_term(w, linalg::identity(1) * z);
        p
    }

    /// Adds `m·w`, dropping exact zeros.
    pub fn add_term(&mut self, w: GroupWord, m: CMat) {
        assert_eq!(m.shape(), (self.rows, self.cols), "coefficient shape");
        let slot = self.terms.entry(w.clone()).or_insert_with(|| CMat::zeros(self.rows, self.cols));
        *slot += m;
        if slot.iter().all(|z| *z == linalg::ZERO) {
            self.terms.remove(&w);
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coeff_dim(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupWord, &CMat)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &GroupWord) -> Option<&CMat> {
        self.terms.get(w)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn extent(&self) -> Option<usize> {
        self.terms.keys().map(GroupWord::extent).max()
    }

    /// Sum of syllable exponents of the longest term, a display statistic only.
    pub fn total_degree(&self) -> usize {
        self.terms.keys().map(|w| w.0.iter().map(|&(_, r)| r).sum::<usize>()).max().unwrap_or(0)
    }

    fn check_compatible(&self, other: &Self, rows: usize, cols: usize) -> Result<()> {
        if self.sig != other.sig {
            return Err(Error::DimensionMismatch(format!("signatures {:?} vs {:?}", self.sig.0, other.sig.0)));
        }
        if rows != cols {
            return Err(Error::DimensionMismatch(format!("inner dimensions {rows} vs {cols}")));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other, self.rows, other.rows)?;
        self.check_compatible(other, self.cols, other.cols)?;
        let mut out = self.clone();
        for (w, m) in &other.terms {
            out.add_term(w.clone(), m.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other, self.cols, other.rows)?;
        let mut out = Self::zero_rect(&self.sig, self.rows, other.cols);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.mul(v, &self.sig), a * b);
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero_rect(&self.sig, self.cols, self.rows);
        for (w, m) in &self.terms {
            out.add_term(w.inverse(&self.sig), m.adjoint());
        }
        out
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let mut out = Self::zero_rect(&self.sig, self.rows, self.cols);
        for (w, m) in &self.terms {
            out.add_term(w.clone(), m * z);
        }
        out
    }

    /// Replaces every coefficient `P_w` by `a·P_w`.
    pub fn left_mul_matrix(&self, a: &CMat) -> Result<Self> {
        if a.ncols() != self.rows {
            return Err(Error::DimensionMismatch(format!("{}x{} times {} rows", a.nrows(), a.ncols(), self.rows)));
        }
        let mut out = Self::zero_rect(&self.sig, a.nrows(), self.cols);
        for (w, m) in &self.terms {
            out.add_term(w.clone(), a * m);
        }
        Ok(out)
    }

    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (w, m) in &self.terms {
            worst = worst.max(match other.terms.get(w) {
                Some(o) => linalg::max_abs_diff(m, o),
                None => linalg::max_abs(m),
            });
        }
        for (w, m) in &other.terms {
            if !self.terms.contains_key(w) {
                worst = worst.max(linalg::max_abs(m));
            }
        }
        worst
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |a, m| a.max(linalg::max_abs(m)))
    }

    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.max_coeff_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn prune(&self, eps: f64) -> Self {
        let mut out = Self::zero_rect(&self.sig, self.rows, self.cols);
        for (w, m) in &self.terms {
            if linalg::max_abs(m) > eps {
                out.add_term(w.clone(), m.clone());
            }
        }
        out
    }

    /// `p(U) = Σ P_w ⊗ U^w`.
    pub fn evaluate(&self, u: &[CMat]) -> Result<CMat> {
        if u.len() != self.sig.factors() {
            return Err(Error::DimensionMismatch(format!(
                "{} unitaries for {} factors",
                u.len(),
                self.sig.factors()
            )));
        }
        let l = u.first().map_or(1, |m| m.nrows());
        if u.iter().any(|m| m.shape() != (l, l)) {
            return Err(Error::DimensionMismatch("unitaries differ in size".into()));
        }
        let mut powers: Vec<Vec<CMat>> = Vec::with_capacity(u.len());
        for (i, ui) in u.iter().enumerate() {
            let mut list = alloc::vec![linalg::identity(l)];
            for r in 1..self.sig.order(i) {
                let next = &list[r - 1] * ui;
                list.push(next);
            }
            powers.push(list);
        }
        let mut out = linalg::zeros(self.rows * l, self.cols * l);
        for (w, m) in &self.terms {
            let mut img = linalg::identity(l);
            for &(i, r) in &w.0 {
                img *= &powers[i][r];
            }
            out += linalg::kron(m, &img);
        }
        Ok(out)
    }

    /// Random polynomial with every reduced word of extent `≤ extent` present.
    pub fn random(rng: &mut impl Rng, sig: &Signature, rows: usize, cols: usize, extent: usize) -> Self {
        let mut p = Self::zero_rect(sig, rows, cols);
        for w in enumerate_group_words(sig, extent) {
            p.add_term(w, linalg::random_complex(rng, rows, cols));
        }
        p
    }
}

impl fmt::Debug for GroupPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// The projection `𝓅_{i,k} = (1/n_i) Σ_t ω_i^{−tk} x_i^t` (`k = n_i` gives the trivial character).
pub fn factor_projection(sig: &Signature, i: usize, k: usize) -> GroupPoly {
    let n = sig.order(i);
    let mut p = GroupPoly::zero(sig, 1);
    for t in 0..n {
        let z = sig.root_power(i, -((t * k) as i64)) / n as f64;
        p.add_term(GroupWord::generator(sig, i, t as i64), linalg::identity(1) * z);
    }
    p
}

/// Minimal central projections `q_1, .., q_n` of `ℂ[ℤ_n]`.
pub fn spectral_projections(n: usize) -> Result<Vec<GroupPoly>> {
    let sig = Signature::new(alloc::vec![n])?;
    Ok((1..=n).map(|k| factor_projection(&sig, 0, k)).collect())
}

/// `Ω`: each syllable `x_i^r` maps to `1 + Σ_k (ω_i^{rk} − 1) y_{i,k}`, words to ordered products.
pub fn omega_map(p: &GroupPoly) -> NcPoly {
    let sig = &p.sig;
    let g = sig.povm_vars();
    let syllable = |i: usize, r: usize| -> NcPoly {
        let mut s = NcPoly::one(g, 1);
        for k in 1..sig.order(i) {
            let z = sig.root_power(i, (r * k) as i64) - linalg::ONE;
            let letter = 1 + povm_variable(sig.orders(), i, k) as u32;
            s.add_term(Word::letter(letter), linalg::identity(1) * z);
        }
        s
    };
    let mut out = NcPoly::zero_rect(g, p.rows, p.cols);
    for (w, m) in &p.terms {
        let mut img = NcPoly::one(g, 1);
        for &(i, r) in &w.0 {
            img = img.multiply(&syllable(i, r)).expect("scalar polynomials");
        }
        for (v, z) in img.terms() {
            out.add_term(v.clone(), m * z[(0, 0)]);
        }
    }
    out
}

/// The splitting `s`: substitutes `y_{i,j} ↦ 𝓅_{i,j}` and reduces.
pub fn split_map(f: &NcPoly, sig: &Signature) -> Result<GroupPoly> {
    if f.g() != sig.povm_vars() {
        return Err(Error::DimensionMismatch(format!(
            "polynomial in {} variables, signature has {}",
            f.g(),
            sig.povm_vars()
        )));
    }
    let mut cache: BTreeMap<Word, GroupPoly> = BTreeMap::new();
    cache.insert(Word::empty(), GroupPoly::one(sig, 1));
    let mut out = GroupPoly::zero_rect(sig, f.rows(), f.cols());
    for (w, m) in f.terms() {
        let img = word_image(&mut cache, w, sig);
        for (gw, z) in &img.terms {
            out.add_term(gw.clone(), m * z[(0, 0)]);
        }
    }
    Ok(out)
}

fn word_image(cache: &mut BTreeMap<Word, GroupPoly>, w: &Word, sig: &Signature) -> GroupPoly {
    if let Some(p) = cache.get(w) {
        return p.clone();
    }
    let letters = w.letters();
    let head = word_image(cache, &Word::new(&letters[..letters.len() - 1]), sig);
    let (i, j) = sig.povm_letter(letters[letters.len() - 1]);
    let img = head.multiply(&factor_projection(sig, i, j)).expect("scalar polynomials");
    cache.insert(w.clone(), img.clone());
    img
}

/// Random tuple with `U_i = Q diag(ω_i^{k_t}) Q*` for a random unitary `Q`.
pub fn sample_unitary_tuple(sig: &Signature, ell: usize, seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sig.factors())
        .map(|i| {
            let q = linalg::random_unitary(&mut rng, ell);
            let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                ell,
                (0..ell).map(|_| sig.root_power(i, rng.random_range(0..sig.order(i)) as i64)),
            ));
            &q * d * q.adjoint()
        })
        .collect()
}

/// `E[i][j−1] = E_{i,j}` for `j = 1..n_i − 1`; `E_{i,n_i} = I − Σ_j E_{i,j}` is implicit.
pub type PovmTuple = Vec<Vec<CMat>>;

/// The POVM tuple as values of the variables `y_{i,j}`.
pub fn povm_as_variables(e: &PovmTuple) -> Vec<CMat> {
    e.iter().flatten().cloned().collect()
}

pub fn povm_from_variables(sig: &Signature, y: &[CMat]) -> Result<PovmTuple> {
    if y.len() != sig.povm_vars() {
        return Err(Error::DimensionMismatch(format!("{} matrices for {} variables", y.len(), sig.povm_vars())));
    }
    let mut out = Vec::with_capacity(sig.factors());
    let mut rest = y;
    for &n in sig.orders() {
        let (head, tail) = rest.split_at(n - 1);
        out.push(head.to_vec());
        rest = tail;
    }
    Ok(out)
}

/// Random complete POVMs `S^{-1/2} B_k S^{-1/2}`, scaled by a random factor in `(0, 1]`.
pub fn sample_povm_tuple(sig: &Signature, ell: usize, seed: u64) -> PovmTuple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sig.orders()
        .iter()
        .map(|&n| {
            let parts: Vec<CMat> = (0..n)
                .map(|_| {
                    let f = linalg::random_complex(&mut rng, ell, ell);
                    f.adjoint() * f
                })
                .collect();
            let total = parts.iter().fold(linalg::zeros(ell, ell), |a, b| a + b);
            let w = linalg::hermitian_fn(&total, |x| 1.0 / x.max(1e-300).sqrt());
            let t = 1.0 - 0.5 * rng.random::<f64>();
            parts[..n - 1].iter().map(|b| linalg::hermitian_part(&(&w * b * &w)) * Complex64::new(t, 0.0)).collect()
        })
        .collect()
}

/// Spectral POVM of a unitary tuple: `E_{i,k} = 𝓅_{i,k}(U_i)`.
pub fn spectral_povm(sig: &Signature, u: &[CMat]) -> Result<PovmTuple> {
    let mut out = Vec::with_capacity(sig.factors());
    for i in 0..sig.factors() {
        let single = Signature::new(alloc::vec![sig.order(i)])?;
        let mut list = Vec::new();
        for k in 1..sig.order(i) {
            let proj = factor_projection(&single, 0, k);
            list.push(proj.evaluate(core::slice::from_ref(&u[i]))?);
        }
        out.push(list);
    }
    Ok(out)
}

/// Largest violation of `E_{i,j} ⪰ 0` and `Σ_j E_{i,j} ⪯ I`.
pub fn povm_violation(e: &PovmTuple) -> f64 {
    let mut worst: f64 = 0.0;
    for factor in e {
        let Some(first) = factor.first() else { continue };
        let ell = first.nrows();
        let mut total = linalg::zeros(ell, ell);
        for m in factor {
            worst = worst.max(-linalg::lambda_min(m));
            total += m;
        }
        worst = worst.max(linalg::lambda_max(&total) - 1.0);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct Dilation {
    pub unitaries: Vec<CMat>,
    /// Isometry `V` from the original space into the dilation space.
    pub isometry: CMat,
}

/// Sequential Naimark dilation of a POVM tuple into unitaries with `U_i^{n_i} = I`.
///
/// Factor `i` is dilated through the isometry `W = [E'_{i,1}^{1/2}; ..; E'_{i,n_i}^{1/2}]`
/// with `E'_{i,k} = V E_{i,k} V*`; factors already dilated extend by
/// `W U W* + (I − W W*)`, putting the new mass on the trivial exponent.
pub fn naimark_dilate(sig: &Signature, e: &PovmTuple) -> Result<Dilation> {
    if e.len() != sig.factors() || e.iter().zip(sig.orders()).any(|(f, &n)| f.len() != n - 1) {
        return Err(Error::DimensionMismatch("POVM tuple does not match the signature".into()));
    }
    let ell = e.first().and_then(|f| f.first()).map_or(1, |m| m.nrows());
    let violation = povm_violation(e);
    if violation > 1e-8 {
        return Err(Error::Indefinite(-violation));
    }
    let mut v = linalg::identity(ell);
    let mut unitaries: Vec<CMat> = Vec::with_capacity(sig.factors());
    for (i, factor) in e.iter().enumerate() {
        let n = sig.order(i);
        let dim = v.nrows();
        let mut parts: Vec<CMat> = factor.iter().map(|m| linalg::hermitian_part(&(&v * m * v.adjoint()))).collect();
        let sum = parts.iter().fold(linalg::zeros(dim, dim), |a, b| a + b);
        parts.push(linalg::identity(dim) - sum);
        let projective = parts.iter().all(|p| linalg::max_abs_diff(&(p * p), p) <= 1e-10);
        if projective {
            let mut u = linalg::zeros(dim, dim);
            for (k, p) in parts.iter().enumerate() {
                u += p * sig.root_power(i, (k + 1) as i64);
            }
            unitaries.push(u);
            continue;
        }
        let big = n * dim;
        let mut w = linalg::zeros(big, dim);
        for (k, p) in parts.iter().enumerate() {
            w.view_mut((k * dim, 0), (dim, dim)).copy_from(&linalg::psd_sqrt(p));
        }
        // Re-orthonormalize W to absorb clamping of slightly negative parts.
        let gram = w.adjoint() * &w;
        w = &w * linalg::hermitian_fn(&gram, |x| 1.0 / x.max(1e-300).sqrt());
        let complement = linalg::identity(big) - &w * w.adjoint();
        for u in unitaries.iter_mut() {
            *u = &w * &*u * w.adjoint() + &complement;
        }
        let mut u = linalg::zeros(big, big);
        for k in 0..n {
            let z = sig.root_power(i, (k + 1) as i64);
            for r in 0..dim {
                u[(k * dim + r, k * dim + r)] = z;
            }
        }
        unitaries.push(u);
        v = &w * v;
    }
    Ok(Dilation { unitaries, isometry: v })
}
