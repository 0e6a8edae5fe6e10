//! Words in the free monoid and noncommutative polynomials with matrix coefficients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// A word in letters `1..=g`; the empty word is the unit.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(letters: impl Into<Vec<u32>>) -> Self {
        Word(letters.into())
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(j: u32) -> Self {
        Word(alloc::vec![j])
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The involution `w*`: letters in reverse order.
    pub fn star(&self) -> Self {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `u* · x_j · v`, or `u* · v` for `j = 0`.
    pub fn sandwich(u: &Word, j: u32, v: &Word) -> Self {
        let mut out: Vec<u32> = u.0.iter().rev().copied().collect();
        if j > 0 {
            out.push(j);
        }
        out.extend_from_slice(&v.0);
        Word(out)
    }

    pub fn is_valid_for(&self, g: usize) -> bool {
        self.0.iter().all(|&l| l >= 1 && (l as usize) <= g)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        for l in &self.0 {
            write!(f, "x{l}")?;
        }
        Ok(())
    }
}

/// `N(d) = 1 + g + ... + g^d`, `None` on overflow.
pub fn word_count(g: usize, d: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut power: usize = 1;
    for k in 0..=d {
        total = total.checked_add(power)?;
        if k < d {
            power = power.checked_mul(g)?;
        }
    }
    Some(total)
}

/// All words of length at most `d`, in graded lexicographic order.
#[derive(Clone, Debug)]
pub struct WordBasis {
    g: usize,
    d: usize,
    words: Vec<Word>,
    index: BTreeMap<Word, usize>,
}

pub fn enumerate_words(g: usize, d: usize) -> Result<WordBasis> {
    if g == 0 {
        return Err(Error::InvalidArgument("alphabet size must be positive".into()));
    }
    let n = word_count(g, d).ok_or(Error::SizeCap { size: usize::MAX, cap: usize::MAX })?;
    let mut words = Vec::with_capacity(n);
    words.push(Word::empty());
    let mut layer = alloc::vec![Word::empty()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(layer.len() * g);
        for w in &layer {
            for j in 1..=g as u32 {
                let mut v = w.0.clone();
                v.push(j);
                next.push(Word(v));
            }
        }
        words.extend(next.iter().cloned());
        layer = next;
    }
    let index = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    Ok(WordBasis { g, d, words, index })
}

impl WordBasis {
    pub fn g(&self) -> usize {
        self.g
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }
}

/// `p = Σ P_w w` with `rows × cols` complex coefficients.
///
/// Square polynomials have `rows == cols == ν`. Rectangular coefficients
/// appear as factors of sums of squares.
#[derive(Clone, PartialEq)]
pub struct NcPoly {
    g: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<Word, CMat>,
}

fn is_exact_zero(m: &CMat) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

impl NcPoly {
    pub fn zero(g: usize, nu: usize) -> Self {
        Self::zero_rect(g, nu, nu)
    }

    pub fn zero_rect(g: usize, rows: usize, cols: usize) -> Self {
        NcPoly { g, rows, cols, terms: BTreeMap::new() }
    }

    pub fn one(g: usize, nu: usize) -> Self {
        Self::constant(g, linalg::identity(nu))
    }

    pub fn constant(g: usize, m: CMat) -> Self {
        let mut p = Self::zero_rect(g, m.nrows(), m.ncols());
        p.add_term(Word::empty(), m);
        p
    }

    /// Scalar (`ν = 1`) monomial `z · w`.
    pub fn scalar_term(g: usize, letters: &[u32], z: Complex64) -> Self {
        let mut p = Self::zero(g, 1);
        p.add_term(Word::new(letters), CMat::from_element(1, 1, z));
        p
    }

    pub fn monomial(g: usize, w: Word, m: CMat) -> Result<Self> {
        if !w.is_valid_for(g) {
            return Err(Error::InvalidArgument(format!("word {w:?} uses letters outside 1..={g}")));
        }
        let mut p = Self::zero_rect(g, m.nrows(), m.ncols());
        p.add_term(w, m);
        Ok(p)
    }

    pub fn from_terms(
        g: usize,
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (Word, CMat)>,
    ) -> Result<Self> {
        let mut p = Self::zero_rect(g, rows, cols);
        for (w, m) in terms {
            if !w.is_valid_for(g) {
                return Err(Error::InvalidArgument(format!(
                    "word {w:?} uses letters outside 1..={g}"
                )));
            }
            if m.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient of {w:?} is {:?}, expected {:?}",
                    m.shape(),
                    (rows, cols)
                )));
            }
            p.add_term(w, m);
        }
        Ok(p)
    }

    /// Accumulates `m` into the coefficient of `w`; exact zeros are dropped.
    pub fn add_term(&mut self, w: Word, m: CMat) {
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        match self.terms.get_mut(&w) {
            Some(existing) => {
                *existing += m;
                if is_exact_zero(existing) {
                    self.terms.remove(&w);
                }
            }
            None => {
                if !is_exact_zero(&m) {
                    self.terms.insert(w, m);
                }
            }
        }
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn coeff_dim(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &CMat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, w: &Word) -> Option<&CMat> {
        self.terms.get(w)
    }

    /// Coefficient of `w`, zero matrix when absent.
    pub fn coefficient_or_zero(&self, w: &Word) -> CMat {
        self.terms.get(w).cloned().unwrap_or_else(|| linalg::zeros(self.rows, self.cols))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(Word::len).max()
    }

    pub fn scale(&self, z: Complex64) -> Self {
        let mut out = Self::zero_rect(self.g, self.rows, self.cols);
        for (w, m) in &self.terms {
            out.add_term(w.clone(), m * z);
        }
        out
    }

    /// Left multiplication of every coefficient by a fixed matrix.
    pub fn left_mul_matrix(&self, a: &CMat) -> Result<Self> {
        if a.ncols() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times {}-row polynomial",
                a.nrows(),
                a.ncols(),
                self.rows
            )));
        }
        let mut out = Self::zero_rect(self.g, a.nrows(), self.cols);
        for (w, m) in &self.terms {
            out.add_term(w.clone(), a * m);
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.g != other.g || self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "(g={}, {}x{}) vs (g={}, {}x{})",
                self.g, self.rows, self.cols, other.g, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (w, m) in &other.terms {
            out.add_term(w.clone(), m.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&-other)
    }

    /// Convolution product: the coefficient of `w` is `Σ_{uv=w} P_u Q_v`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.g != other.g || self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "(g={}, {}x{}) times (g={}, {}x{})",
                self.g, self.rows, self.cols, other.g, other.rows, other.cols
            )));
        }
        let mut out = Self::zero_rect(self.g, self.rows, other.cols);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        Ok(out)
    }

    /// `p* = Σ P_w^* w^*`.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero_rect(self.g, self.cols, self.rows);
        for (w, m) in &self.terms {
            out.add_term(w.star(), m.adjoint());
        }
        out
    }

    /// Largest entrywise deviation between `p` and `p*`.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let adj = self.adjoint();
        self.max_coeff_diff(&adj)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(p + p*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    /// Max-norm over all coefficient entries of `self − other`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (w, m) in &self.terms {
            let d = match other.terms.get(w) {
                Some(o) => linalg::max_abs_diff(m, o),
                None => linalg::max_abs(m),
            };
            worst = worst.max(d);
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

    /// Drops coefficients whose entries are all below `eps` in modulus.
    pub fn prune(&self, eps: f64) -> Self {
        let mut out = Self::zero_rect(self.g, self.rows, self.cols);
        for (w, m) in &self.terms {
            if linalg::max_abs(m) > eps {
                out.add_term(w.clone(), m.clone());
            }
        }
        out
    }

    /// `p(X) = Σ P_w ⊗ X^w`.
    pub fn evaluate(&self, x: &[CMat]) -> Result<CMat> {
        self.evaluate_cached(&mut WordImages::new(x)?)
    }

    /// As [`NcPoly::evaluate`], reusing the word images of a fixed tuple.
    pub fn evaluate_cached(&self, images: &mut WordImages) -> Result<CMat> {
        if images.x.len() != self.g {
            return Err(Error::DimensionMismatch(format!(
                "tuple of length {} for {} variables",
                images.x.len(),
                self.g
            )));
        }
        let l = images.size();
        let mut out = linalg::zeros(self.rows * l, self.cols * l);
        for (w, coeff) in &self.terms {
            let power = images.get(w);
            if coeff.len() == 1 {
                out += power * coeff[(0, 0)];
            } else {
                out += linalg::kron(coeff, power);
            }
        }
        Ok(out)
    }

    /// Random polynomial with every word of length `≤ degree` present.
    pub fn random(rng: &mut impl Rng, g: usize, rows: usize, cols: usize, degree: usize) -> Self {
        let basis = enumerate_words(g, degree).expect("g ≥ 1");
        let mut p = Self::zero_rect(g, rows, cols);
        for w in basis.words() {
            p.add_term(w.clone(), linalg::random_complex(rng, rows, cols));
        }
        p
    }

    /// Row polynomial `r` whose coefficient of `w` is the `(·, w)` column block of `f`.
    ///
    /// `f` is `rows × (cols·N)` with columns indexed by `(word, entry)`.
    pub fn from_coefficient_row(f: &CMat, basis: &WordBasis, cols: usize) -> Result<Self> {
        if f.ncols() != cols * basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient row has {} columns, expected {}",
                f.ncols(),
                cols * basis.len()
            )));
        }
        let mut p = Self::zero_rect(basis.g(), f.nrows(), cols);
        for (k, w) in basis.words().iter().enumerate() {
            p.add_term(w.clone(), f.columns(k * cols, cols).into_owned());
        }
        Ok(p)
    }
}

/// Cache of `X^w` for one tuple `X`.
#[derive(Clone, Debug)]
pub struct WordImages {
    x: Vec<CMat>,
    images: BTreeMap<Word, CMat>,
}

impl WordImages {
    pub fn new(x: &[CMat]) -> Result<Self> {
        let l = x.first().map_or(1, |m| m.nrows());
        if x.iter().any(|m| m.nrows() != l || m.ncols() != l) {
            return Err(Error::DimensionMismatch("tuple entries differ in size".into()));
        }
        let mut images = BTreeMap::new();
        images.insert(Word::empty(), linalg::identity(l));
        Ok(WordImages { x: x.to_vec(), images })
    }

    pub fn size(&self) -> usize {
        self.x.first().map_or(1, |m| m.nrows())
    }

    /// `X^w`, computed from the image of its longest proper prefix.
    pub fn get(&mut self, w: &Word) -> &CMat {
        if !self.images.contains_key(w) {
            let letters = w.letters();
            let head = self.get(&Word::new(&letters[..letters.len() - 1])).clone();
            let m = head * &self.x[(letters[letters.len() - 1] - 1) as usize];
            self.images.insert(w.clone(), m);
        }
        &self.images[w]
    }
}

/// `V_d^* G V_d`: the coefficient of `w` is `Σ_{u*v = w} G[u, v]`.
pub fn gram_to_poly(gram: &CMat, basis: &WordBasis, nu: usize) -> Result<NcPoly> {
    let n = basis.len() * nu;
    if gram.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix is {:?}, expected {n}x{n}",
            gram.shape()
        )));
    }
    let mut p = NcPoly::zero(basis.g(), nu);
    for (a, u) in basis.words().iter().enumerate() {
        for (b, v) in basis.words().iter().enumerate() {
            let block = gram.view((a * nu, b * nu), (nu, nu)).into_owned();
            p.add_term(Word::sandwich(u, 0, v), block);
        }
    }
    Ok(p)
}

impl Add<&NcPoly> for &NcPoly {
    type Output = NcPoly;
    fn add(self, rhs: &NcPoly) -> NcPoly {
        self.checked_add(rhs).expect("polynomial shapes must agree")
    }
}

impl Sub<&NcPoly> for &NcPoly {
    type Output = NcPoly;
    fn sub(self, rhs: &NcPoly) -> NcPoly {
        self.checked_sub(rhs).expect("polynomial shapes must agree")
    }
}

impl Mul<&NcPoly> for &NcPoly {
    type Output = NcPoly;
    fn mul(self, rhs: &NcPoly) -> NcPoly {
        self.multiply(rhs).expect("polynomial shapes must agree")
    }
}

impl Neg for &NcPoly {
    type Output = NcPoly;
    fn neg(self) -> NcPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl fmt::Debug for NcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NcPoly(g={}, {}x{}) {{", self.g, self.rows, self.cols)?;
        for (w, m) in &self.terms {
            if self.rows == 1 && self.cols == 1 {
                write!(f, " {:?}·{w:?}", m[(0, 0)])?;
            } else {
                write!(f, " [..]·{w:?}")?;
            }
        }
        write!(f, " }}")
    }
}
