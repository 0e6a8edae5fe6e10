//! Linear pencils, their free spectrahedra, affine changes of variables, the
//! POVM pencil and the bounding augmentation.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RMat};

/// Defect below which coefficients are silently symmetrized.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Defect above which a coefficient is rejected as non-hermitian.
pub const HERMITIAN_REJECT: f64 = 1e-8;

/// `L(x) = A_0 + Σ_j A_j x_j` with a declared block-diagonal decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPencil {
    g: usize,
    mu: usize,
    coeffs: Vec<CMat>,
    blocks: Vec<(usize, usize)>,
    symmetrized: bool,
}

impl LinearPencil {
    /// `coeffs = [A_0, A_1, .., A_g]`; `blocks = None` declares a single block.
    pub fn new(coeffs: Vec<CMat>, blocks: Option<Vec<(usize, usize)>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::InvalidArgument("a pencil needs at least A_0".into()));
        };
        let mu = first.nrows();
        if mu == 0 {
            return Err(Error::InvalidArgument("pencil size must be positive".into()));
        }
        let mut symmetrized = false;
        let mut clean = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs.into_iter().enumerate() {
            if a.shape() != (mu, mu) {
                return Err(Error::DimensionMismatch(format!(
                    "A_{j} is {:?}, expected {mu}x{mu}",
                    a.shape()
                )));
            }
            let defect = linalg::hermitian_defect(&a);
            if defect > HERMITIAN_REJECT {
                return Err(Error::NotHermitian(format!("A_{j} (defect {defect:e})")));
            }
            if defect > 0.0 {
                symmetrized |= defect > HERMITIAN_TOL;
                clean.push(linalg::hermitian_part(&a));
            } else {
                clean.push(a);
            }
        }
        let blocks = blocks.unwrap_or_else(|| alloc::vec![(0, mu)]);
        let mut next = 0;
        for &(off, size) in &blocks {
            if off != next || size == 0 {
                return Err(Error::InvalidArgument(format!(
                    "blocks must tile 0..{mu} contiguously; got ({off}, {size}) at {next}"
                )));
            }
            next += size;
        }
        if next != mu {
            return Err(Error::InvalidArgument(format!("blocks cover {next} of {mu} rows")));
        }
        for (j, a) in clean.iter().enumerate() {
            for r in 0..mu {
                for c in 0..mu {
                    let same = blocks.iter().any(|&(o, s)| (o..o + s).contains(&r) && (o..o + s).contains(&c));
                    if !same && a[(r, c)] != linalg::ZERO {
                        return Err(Error::InvalidArgument(format!(
                            "A_{j} has entry ({r}, {c}) outside the declared blocks"
                        )));
                    }
                }
            }
        }
        Ok(LinearPencil { g: clean.len() - 1, mu, coeffs: clean, blocks, symmetrized })
    }

    /// Monic pencil `I + Σ A_j x_j`.
    pub fn monic(linear: Vec<CMat>, blocks: Option<Vec<(usize, usize)>>) -> Result<Self> {
        let mu = linear.first().map(|a| a.nrows()).ok_or_else(|| {
            Error::InvalidArgument("monic pencil needs at least one variable".into())
        })?;
        let mut coeffs = alloc::vec![linalg::identity(mu)];
        coeffs.extend(linear);
        Self::new(coeffs, blocks)
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &CMat {
        &self.coeffs[j]
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// True when construction had to symmetrize a coefficient beyond round-off.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs[0] == linalg::identity(self.mu)
    }

    /// Coefficients `A_{k,0..g}` of block `k`.
    pub fn block_coeffs(&self, k: usize) -> Vec<CMat> {
        let (o, s) = self.blocks[k];
        self.coeffs.iter().map(|a| a.view((o, o), (s, s)).into_owned()).collect()
    }

    /// `L(X) = A_0 ⊗ I + Σ A_j ⊗ X_j`.
    pub fn evaluate(&self, x: &[CMat]) -> Result<CMat> {
        let l = check_tuple(x, self.g)?;
        let mut out = linalg::kron(&self.coeffs[0], &linalg::identity(l));
        for (a, xj) in self.coeffs[1..].iter().zip(x) {
            out += linalg::kron(a, xj);
        }
        Ok(out)
    }

    /// `L(x)` at a real scalar point.
    pub fn evaluate_scalar(&self, x: &[f64]) -> CMat {
        let mut out = self.coeffs[0].clone();
        for (a, &t) in self.coeffs[1..].iter().zip(x) {
            out += a * Complex64::new(t, 0.0);
        }
        out
    }

    pub fn membership(&self, x: &[CMat], tol: f64) -> Result<bool> {
        Ok(linalg::lambda_min(&self.evaluate(x)?) >= -tol)
    }

    /// `x ↦ L(Tx + b)` without any monicity requirement.
    pub fn substitute(&self, ch: &AffineChange) -> Result<Self> {
        let g = self.g;
        if ch.t.shape() != (g, ch.t.ncols()) || ch.b.len() != g {
            return Err(Error::DimensionMismatch(format!(
                "change of variables is {:?} with shift {}, pencil has {g} variables",
                ch.t.shape(),
                ch.b.len()
            )));
        }
        let mut constant = self.coeffs[0].clone();
        for j in 0..g {
            constant += &self.coeffs[j + 1] * Complex64::new(ch.b[j], 0.0);
        }
        let mut coeffs = alloc::vec![constant];
        for k in 0..ch.t.ncols() {
            let mut a = linalg::zeros(self.mu, self.mu);
            for j in 0..g {
                a += &self.coeffs[j + 1] * Complex64::new(ch.t[(j, k)], 0.0);
            }
            coeffs.push(a);
        }
        Self::new(coeffs, Some(self.blocks.clone()))
    }

    /// `L̂(x) = L(Tx + b)`, required to have identity constant term.
    pub fn monicize(&self, ch: &AffineChange) -> Result<Self> {
        let mut out = self.substitute(ch)?;
        let dev = linalg::max_abs_diff(&out.coeffs[0], &linalg::identity(self.mu));
        if dev > 1e-10 {
            return Err(Error::NotMonicizable(dev));
        }
        out.coeffs[0] = linalg::identity(self.mu);
        Ok(out)
    }

    /// Largest interval `[lo, hi]` of `t` with `L(t·x) ⪰ 0`; infinite ends when unbounded.
    pub fn scalar_range(&self, j: usize) -> (f64, f64) {
        let mut dir = alloc::vec![0.0; self.g];
        dir[j] = 1.0;
        (-ray_extent(self, &dir.iter().map(|v| -v).collect::<Vec<_>>()), ray_extent(self, &dir))
    }
}

/// Sup of `t ≥ 0` with `L(t·dir) ⪰ 0` for monic `L`, computed from the
/// generalized eigenvalues of the linear part.
fn ray_extent(l: &LinearPencil, dir: &[f64]) -> f64 {
    let mut lin = linalg::zeros(l.mu, l.mu);
    for (a, &t) in l.coeffs[1..].iter().zip(dir) {
        lin += a * Complex64::new(t, 0.0);
    }
    let lo = linalg::lambda_min(&lin);
    if lo >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lo
    }
}

fn check_tuple(x: &[CMat], g: usize) -> Result<usize> {
    if x.len() != g {
        return Err(Error::DimensionMismatch(format!("tuple of length {} for {g} variables", x.len())));
    }
    let l = x.first().map_or(1, |m| m.nrows());
    for (j, m) in x.iter().enumerate() {
        if m.shape() != (l, l) {
            return Err(Error::DimensionMismatch(format!("X_{} is {:?}, expected {l}x{l}", j + 1, m.shape())));
        }
        if linalg::hermitian_defect(m) > 1e-10 {
            return Err(Error::NotHermitian(format!("X_{}", j + 1)));
        }
    }
    Ok(l)
}

/// `x ↦ Tx + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChange {
    pub t: RMat,
    pub b: Vec<f64>,
}

impl AffineChange {
    pub fn new(t: RMat, b: Vec<f64>) -> Result<Self> {
        if !t.is_square() || t.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "T is {:?}, b has length {}",
                t.shape(),
                b.len()
            )));
        }
        if t.clone().try_inverse().is_none() {
            return Err(Error::Singular("change-of-variables matrix T".into()));
        }
        Ok(AffineChange { t, b })
    }

    pub fn identity(g: usize) -> Self {
        AffineChange { t: RMat::identity(g, g), b: alloc::vec![0.0; g] }
    }

    /// `y ↦ T^{-1}(y − b)`.
    pub fn inverse(&self) -> Result<Self> {
        let ti = self.t.clone().try_inverse().ok_or_else(|| Error::Singular("T".into()))?;
        let b = nalgebra::DVector::from_column_slice(&self.b);
        let nb = -(&ti * b);
        Ok(AffineChange { t: ti, b: nb.iter().copied().collect() })
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(&linalg::from_real(&self.t))
    }
}

/// Index of the variable `y_{i,j}` (0-based factor `i`, 1-based `j < n_i`).
pub fn povm_variable(ns: &[usize], i: usize, j: usize) -> usize {
    ns[..i].iter().map(|n| n - 1).sum::<usize>() + (j - 1)
}

/// `⊕_i n_i·𝔏[n_i]` with `𝔏[n](y) = diag(y_1, .., y_{n−1}, 1 − Σ y)`, one
/// scalar block per diagonal entry.
pub fn build_povm_pencil(ns: &[usize]) -> Result<LinearPencil> {
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(format!("every factor order must be at least 2, got {ns:?}")));
    }
    let g: usize = ns.iter().map(|n| n - 1).sum();
    let mu: usize = ns.iter().sum();
    let mut coeffs = alloc::vec![linalg::zeros(mu, mu); g + 1];
    let mut slot = 0;
    for (i, &n) in ns.iter().enumerate() {
        let scale = Complex64::new(n as f64, 0.0);
        let last = slot + n - 1;
        coeffs[0][(last, last)] = scale;
        for j in 1..n {
            let v = 1 + povm_variable(ns, i, j);
            coeffs[v][(slot + j - 1, slot + j - 1)] = scale;
            coeffs[v][(last, last)] = -scale;
        }
        slot += n;
    }
    let blocks = (0..mu).map(|k| (k, 1)).collect();
    LinearPencil::new(coeffs, Some(blocks))
}

/// The change `T = I`, `b_{i,j} = 1/n_i` that monicizes the POVM pencil.
pub fn povm_monicizing_change(ns: &[usize]) -> AffineChange {
    let b: Vec<f64> = ns.iter().flat_map(|&n| core::iter::repeat_n(1.0 / n as f64, n - 1)).collect();
    AffineChange { t: RMat::identity(b.len(), b.len()), b }
}

/// The POVM barycentre `y_{i,j} = 1/n_i`, an interior point of the POVM spectrahedron.
pub fn povm_center(ns: &[usize]) -> Vec<f64> {
    povm_monicizing_change(ns).b
}

/// `Λ_n = I + Σ_j (A_j ⊕ (1/n) S_j) x_j`, whose spectrahedron is bounded by `n`.
pub fn augment_bounded(l: &LinearPencil, n: usize) -> Result<LinearPencil> {
    if !l.is_monic() {
        return Err(Error::NotMonic);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("bound n must be at least 1".into()));
    }
    let g = l.g;
    let mu = l.mu;
    let size = mu + 2 * g;
    let inv = Complex64::new(1.0 / n as f64, 0.0);
    let mut linear = Vec::with_capacity(g);
    for j in 0..g {
        let mut a = linalg::zeros(size, size);
        a.view_mut((0, 0), (mu, mu)).copy_from(&l.coeffs[j + 1]);
        a[(mu + 2 * j, mu + 2 * j + 1)] = inv;
        a[(mu + 2 * j + 1, mu + 2 * j)] = inv;
        linear.push(a);
    }
    let mut blocks = l.blocks.clone();
    blocks.extend((0..g).map(|j| (mu + 2 * j, 2)));
    LinearPencil::monic(linear, Some(blocks))
}

/// Random member of `D_L` at matrix size `ℓ`, starting from the origin.
pub fn sample_point(l: &LinearPencil, ell: usize, seed: u64) -> Result<Vec<CMat>> {
    if !l.is_monic() {
        return Err(Error::NotMonic);
    }
    sample_point_from(l, &alloc::vec![0.0; l.g], ell, seed)
}

const SAMPLE_MARGIN: f64 = 1e-6;
const SAMPLE_TRIES: usize = 1000;

/// Random member of `D_L` along rays from a scalar interior point `center`.
///
/// A random hermitian direction is drawn with a random length; if the
/// endpoint leaves `D_L` it is pulled back by bisection along the ray to
/// the last point with margin `1e−6`.
pub fn sample_point_from(l: &LinearPencil, center: &[f64], ell: usize, seed: u64) -> Result<Vec<CMat>> {
    let base: Vec<CMat> = center.iter().map(|&c| linalg::identity(ell) * Complex64::new(c, 0.0)).collect();
    let margin_at = |t: f64, dir: &[CMat]| -> f64 {
        let x: Vec<CMat> = base.iter().zip(dir).map(|(b, d)| b + d * Complex64::new(t, 0.0)).collect();
        l.evaluate(&x).map(|m| linalg::lambda_min(&m)).unwrap_or(f64::NEG_INFINITY)
    };
    if margin_at(0.0, &base) < SAMPLE_MARGIN {
        return Err(Error::InvalidArgument("sampling centre is not an interior point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLE_TRIES {
        let radius = 3.0 * rng.random::<f64>() + 0.05;
        let dir: Vec<CMat> = (0..l.g)
            .map(|_| {
                let h = if l.coeffs.iter().all(|a| a.iter().all(|z| z.im == 0.0)) && rng.random::<bool>() {
                    linalg::hermitian_part(&linalg::random_real(&mut rng, ell, ell))
                } else {
                    linalg::random_hermitian(&mut rng, ell)
                };
                h * Complex64::new(radius, 0.0)
            })
            .collect();
        let t = if margin_at(1.0, &dir) >= SAMPLE_MARGIN {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if margin_at(mid, &dir) >= SAMPLE_MARGIN {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if margin_at(t, &dir) >= SAMPLE_MARGIN {
            return Ok(base.iter().zip(&dir).map(|(b, d)| b + d * Complex64::new(t, 0.0)).collect());
        }
    }
    Err(Error::SamplingFailed(SAMPLE_TRIES))
}

/// Random monic pencil with real symmetric or hermitian blocks of the given sizes.
pub fn random_monic_pencil(rng: &mut impl Rng, g: usize, block_sizes: &[usize], complex: bool) -> LinearPencil {
    let mu: usize = block_sizes.iter().sum();
    let mut blocks = Vec::new();
    let mut off = 0;
    for &s in block_sizes {
        blocks.push((off, s));
        off += s;
    }
    let linear = (0..g)
        .map(|_| {
            let mut a = DMatrix::zeros(mu, mu);
            for &(o, s) in &blocks {
                let h = if complex {
                    linalg::random_hermitian(rng, s)
                } else {
                    linalg::hermitian_part(&linalg::random_real(rng, s, s))
                };
                a.view_mut((o, o), (s, s)).copy_from(&h);
            }
            a
        })
        .collect();
    LinearPencil::monic(linear, Some(blocks)).expect("blocks are valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use alloc::vec;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    #[test]
    fn origin_is_member_of_monic_pencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = random_monic_pencil(&mut rng, 2, &[2, 1], true);
        let zero = vec![linalg::zeros(3, 3); 2];
        assert_eq!(l.evaluate(&zero).unwrap(), linalg::identity(9));
        assert!(l.membership(&zero, 1e-12).unwrap());
    }

    #[test]
    fn interval_pencil_membership() {
        // 𝔏[2](y) = diag(y, 1 − y)
        let l = LinearPencil::new(
            vec![
                linalg::diag(&[0., 1.]),
                linalg::diag(&[1., -1.]),
            ],
            None,
        )
        .unwrap();
        assert!(l.membership(&[scalar(0.5)], 0.0).unwrap());
        let at2 = l.evaluate(&[scalar(2.0)]).unwrap();
        assert_eq!(linalg::eigvalsh(&at2), vec![-1.0, 2.0]);
        assert!(!l.membership(&[scalar(2.0)], 1e-9).unwrap());
    }

    #[test]
    fn monicize_interval() {
        let two_l2 = build_povm_pencil(&[2]).unwrap();
        let ch = AffineChange::new(RMat::identity(1, 1), vec![0.5]).unwrap();
        let hat = two_l2.monicize(&ch).unwrap();
        assert!(hat.is_monic());
        let expected = linalg::diag(&[2., -2.]);
        assert_eq!(hat.coeff(1), &expected);
        let back = hat.substitute(&ch.inverse().unwrap()).unwrap();
        for (a, b) in back.coeffs().iter().zip(two_l2.coeffs()) {
            assert!(linalg::max_abs_diff(a, b) <= 1e-12);
        }
        assert!(two_l2.monicize(&AffineChange::identity(1)).is_err());
    }

    #[test]
    fn povm_pencil_structure() {
        let l = build_povm_pencil(&[2]).unwrap();
        assert_eq!(l.g(), 1);
        assert_eq!(l.coeff(0), &linalg::diag(&[0., 2.]));
        assert_eq!(l.coeff(1), &linalg::diag(&[2., -2.]));

        let l23 = build_povm_pencil(&[2, 3]).unwrap();
        assert_eq!(l23.g(), 3);
        assert_eq!(l23.mu(), 5);
        let e = [scalar(0.5), scalar(1.0 / 3.0), scalar(1.0 / 3.0)];
        assert!(l23.membership(&e, 1e-12).unwrap());
        let bad = [scalar(-0.1), scalar(0.2), scalar(0.2)];
        assert!(!l23.membership(&bad, 1e-12).unwrap());
        assert!(build_povm_pencil(&[1]).is_err());

        let hat = l23.monicize(&povm_monicizing_change(&[2, 3])).unwrap();
        assert!(hat.is_monic());
    }

    #[test]
    fn augmentation_bounds_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = random_monic_pencil(&mut rng, 1, &[2], false);
        let aug = augment_bounded(&l, 1).unwrap();
        let s1 = aug.coeff(1).view((2, 2), (2, 2)).into_owned();
        assert_eq!(s1, CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        for n in [1usize, 2, 4] {
            let aug = augment_bounded(&l, n).unwrap();
            let big = [linalg::identity(1) * c(n as f64 + 1.0, 0.0)];
            assert!(!aug.membership(&big, 1e-9).unwrap());
            for seed in 0..20 {
                let x = sample_point(&aug, 2, seed).unwrap();
                assert!(l.membership(&x, 1e-9).unwrap());
                assert!(linalg::spectral_norm(&x[0]) <= n as f64 + 1e-6);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = random_monic_pencil(&mut rng, 2, &[2, 2], true);
        let a = sample_point(&l, 3, 77).unwrap();
        let b = sample_point(&l, 3, 77).unwrap();
        assert_eq!(a, b);
        assert!(l.membership(&a, 1e-8).unwrap());
    }

    #[test]
    fn povm_samples_decode_to_povms() {
        let ns = [2, 3];
        let l = build_povm_pencil(&ns).unwrap();
        for seed in 0..10 {
            let e = sample_point_from(&l, &povm_center(&ns), 2, seed).unwrap();
            for m in &e {
                assert!(linalg::lambda_min(m) >= -1e-9);
            }
            let sum = &e[1] + &e[2];
            assert!(linalg::lambda_max(&sum) <= 1.0 + 1e-9);
            assert!(linalg::lambda_max(&e[0]) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = CMat::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(LinearPencil::new(vec![a], None), Err(Error::NotHermitian(_))));
        let off = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let r = LinearPencil::monic(vec![off], Some(vec![(0, 1), (1, 1)]));
        assert!(r.is_err());
        let eps = CMat::from_row_slice(1, 1, &[c(1., 1e-11)]);
        let l = LinearPencil::new(vec![linalg::identity(1), eps], None).unwrap();
        assert!(l.was_symmetrized());
        assert!(l.coeff(1)[(0, 0)].im == 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn povm_membership_matches_componentwise_conditions(seed in any::<u64>()) {
            let ns = [2usize, 3];
            let l = build_povm_pencil(&ns).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<CMat> = (0..3).map(|_| {
                let h = linalg::random_hermitian(&mut rng, 2);
                &h * &h * c(0.6, 0.0) - linalg::identity(2) * c(0.05, 0.0)
            }).collect();
            let member = l.membership(&e, 1e-12).unwrap();
            let psd = e.iter().all(|m| linalg::lambda_min(m) >= -1e-12);
            let f1 = linalg::lambda_max(&e[0]) <= 1.0 + 1e-12;
            let f2 = linalg::lambda_max(&(&e[1] + &e[2])) <= 1.0 + 1e-12;
            prop_assert_eq!(member, psd && f1 && f2);
        }

        #[test]
        fn affine_change_round_trips(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_monic_pencil(&mut rng, 2, &[2], true);
            let t = RMat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * rng.random_range(-1.0..1.0));
            let ch = AffineChange::new(t, vec![0.0, 0.0]).unwrap();
            let hat = l.monicize(&ch).unwrap();
            let back = hat.substitute(&ch.inverse().unwrap()).unwrap();
            for (a, b) in back.coeffs().iter().zip(l.coeffs()) {
                prop_assert!(linalg::max_abs_diff(a, b) <= 1e-12);
            }
        }
    }
}
