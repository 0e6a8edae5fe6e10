//! Weighted sum-of-squares certificates on free spectrahedra, variable
//! bounds, and moment (GNS) witnesses when positivity fails.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::ncpoly::{enumerate_words, NcPoly, Word, WordBasis};
use crate::pencil::{self, LinearPencil};
use crate::sdp::{self, Functional, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

/// Tolerance for accepting `p` as hermitian.
const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// `⌈(D − 1)/2⌉` for `D ≥ 1`, and `0` for constants and the zero polynomial.
pub fn certificate_degree(poly_degree: Option<usize>) -> usize {
    match poly_degree {
        None | Some(0) => 0,
        Some(deg) => deg / 2,
    }
}

/// Is `p` in the weighted cone of `L` at degree `d`?
#[derive(Clone, Debug)]
pub struct MembershipProblem {
    p: NcPoly,
    pencil: LinearPencil,
    degree: usize,
}

impl MembershipProblem {
    pub fn new(p: NcPoly, pencil: LinearPencil) -> Result<Self> {
        let d = certificate_degree(p.degree());
        Self::with_degree(p, pencil, d)
    }

    pub fn with_degree(p: NcPoly, pencil: LinearPencil, degree: usize) -> Result<Self> {
        if p.rows() != p.cols() {
            return Err(Error::DimensionMismatch(format!("p has {}x{} coefficients", p.rows(), p.cols())));
        }
        let defect = p.hermitian_defect();
        if defect > HERMITIAN_INPUT_TOL {
            return Err(Error::NotHermitian(format!("polynomial (defect {defect:e})")));
        }
        if p.g() != pencil.g() {
            return Err(Error::DimensionMismatch(format!(
                "polynomial in {} variables, pencil in {}",
                p.g(),
                pencil.g()
            )));
        }
        if let Some(deg) = p.degree() {
            if deg > 2 * degree + 1 {
                return Err(Error::InvalidArgument(format!(
                    "degree {deg} exceeds 2d+1 = {} for certificate degree {degree}",
                    2 * degree + 1
                )));
            }
        }
        Ok(MembershipProblem { p: p.hermitian_part(), pencil, degree })
    }

    pub fn p(&self) -> &NcPoly {
        &self.p
    }

    pub fn pencil(&self) -> &LinearPencil {
        &self.pencil
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nu(&self) -> usize {
        self.p.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Part {
    Re,
    Im,
}

/// The coefficient entry and part matched by each constraint row.
#[derive(Clone, Debug)]
struct Layout {
    nu: usize,
    rows: Vec<(Word, usize, usize, Part)>,
}

fn is_canonical(w: &Word, a: usize, b: usize) -> bool {
    let mirror = w.star();
    (w, a, b) <= (&mirror, b, a)
}

/// `(block, r, s, c)` contributions `c · X_block[r, s]`, grouped by canonical key.
type Contributions = BTreeMap<(Word, usize, usize), Vec<(usize, usize, usize, Complex64)>>;

fn contributions(mp: &MembershipProblem, sos_basis: &WordBasis, basis: &WordBasis) -> Contributions {
    let nu = mp.nu();
    let mut out: Contributions = BTreeMap::new();
    for (ui, u) in sos_basis.words().iter().enumerate() {
        for (vi, v) in sos_basis.words().iter().enumerate() {
            let w = Word::sandwich(u, 0, v);
            for a in 0..nu {
                for b in 0..nu {
                    if is_canonical(&w, a, b) {
                        out.entry((w.clone(), a, b)).or_default().push((0, ui * nu + a, vi * nu + b, linalg::ONE));
                    }
                }
            }
        }
    }
    let words = basis.words();
    for k in 0..mp.pencil.blocks().len() {
        let coeffs = mp.pencil.block_coeffs(k);
        let mu = coeffs[0].nrows();
        for (j, a_kj) in coeffs.iter().enumerate() {
            let nz: Vec<(usize, usize, Complex64)> = (0..mu)
                .flat_map(|al| (0..mu).map(move |be| (al, be)))
                .filter_map(|(al, be)| {
                    let z = a_kj[(al, be)];
                    (z != linalg::ZERO).then_some((al, be, z))
                })
                .collect();
            if nz.is_empty() {
                continue;
            }
            for (ui, u) in words.iter().enumerate() {
                for (vi, v) in words.iter().enumerate() {
                    let w = Word::sandwich(u, j as u32, v);
                    for a in 0..nu {
                        for b in 0..nu {
                            if !is_canonical(&w, a, b) {
                                continue;
                            }
                            let list = out.entry((w.clone(), a, b)).or_default();
                            for &(al, be, z) in &nz {
                                list.push((1 + k, (ui * mu + al) * nu + a, (vi * mu + be) * nu + b, z));
                            }
                        }
                    }
                }
            }
        }
    }
    for (w, m) in mp.p.terms() {
        for a in 0..nu {
            for b in 0..nu {
                if m[(a, b)] != linalg::ZERO && is_canonical(w, a, b) {
                    out.entry((w.clone(), a, b)).or_default();
                }
            }
        }
    }
    out
}

/// Which cone an assembled SDP describes.
#[derive(Clone, Copy, Debug)]
struct Shape {
    /// Degree of the sum-of-squares part; the localizing part always uses `d`.
    sos_degree: usize,
    /// Maximize `λ` with `p + ε·Σ_{|u| ≤ sos_degree} u*u − λ` in the cone.
    bound: Option<f64>,
}

impl Shape {
    fn membership(mp: &MembershipProblem) -> Self {
        Shape { sos_degree: mp.degree, bound: None }
    }

    /// SOS over `V_{d+1}`, so the dual is a moment matrix over `V_{d+1}`.
    /// Without the `ε` term the top Gram block is forced to zero and the
    /// problem has no interior point.
    fn witness(mp: &MembershipProblem) -> Self {
        let scale = mp.p.max_coeff_abs().max(1.0);
        Shape { sos_degree: mp.degree + 1, bound: Some(WITNESS_REGULARIZATION * scale) }
    }
}

/// Relative eigenvalue cutoff when factoring the moment matrix.
const GNS_EIGEN_CUTOFF: f64 = 1e-6;
/// Relative singular value cutoff for the span of `{φ_w : |w| ≤ d}`.
const GNS_SPAN_CUTOFF: f64 = 1e-7;

/// Relative eigenvalue threshold for the primal range in dual refinement.
const DUAL_REFINE_RANK: f64 = 1e-6;

/// Weight of the `Σ u*u` term in the witness SDP, relative to the size of `p`.
/// Must stay above `DUAL_REFINE_RANK` so that the Gram directions it feeds
/// count as part of the primal range.
const WITNESS_REGULARIZATION: f64 = 1e-5;

fn assemble(mp: &MembershipProblem, shape: Shape) -> Result<(SdpProblem, Layout)> {
    let nu = mp.nu();
    let basis = enumerate_words(mp.p.g(), mp.degree)?;
    let sos_basis = enumerate_words(mp.p.g(), shape.sos_degree)?;
    let n = basis.len();
    let block_sizes: Vec<usize> = mp.pencil.blocks().iter().map(|&(_, s)| s).collect();
    let mut blocks = alloc::vec![nu * sos_basis.len()];
    blocks.extend(block_sizes.iter().map(|mu| mu * nu * n));
    let bound_blocks = blocks.len();
    if shape.bound.is_some() {
        blocks.extend([1, 1]);
    }
    let mut prob = SdpProblem::new(blocks);
    let mut rows = Vec::new();
    for ((w, a, b), list) in contributions(mp, &sos_basis, &basis) {
        let mut target = mp.p.coefficient(&w).map_or(linalg::ZERO, |m| m[(a, b)]);
        let self_mirror = a == b && w == w.star();
        if let Some(eps) = shape.bound {
            if self_mirror && w.len() % 2 == 0 && w.len() <= 2 * shape.sos_degree {
                target += eps;
            }
        }
        let parts: &[Part] = if self_mirror { &[Part::Re] } else { &[Part::Re, Part::Im] };
        for &part in parts {
            let rot = if part == Part::Re { linalg::ONE } else { -linalg::I };
            let mut f = Functional::new();
            for &(blk, r, s, z) in &list {
                f.add(blk, r, s, rot * z);
            }
            if shape.bound.is_some() && self_mirror && w.is_empty() {
                f.add(bound_blocks, 0, 0, linalg::ONE);
                f.add(bound_blocks + 1, 0, 0, -linalg::ONE);
            }
            let rhs = if part == Part::Re { target.re } else { target.im };
            prob.add_constraint(f, rhs);
            rows.push((w.clone(), a, b, part));
        }
    }
    if shape.bound.is_some() {
        // maximize the bound λ = λ⁺ − λ⁻
        prob.objective.add(bound_blocks, 0, 0, -linalg::ONE);
        prob.objective.add(bound_blocks + 1, 0, 0, linalg::ONE);
    }
    Ok((prob, Layout { nu, rows }))
}

/// Feasibility SDP for `p = Σ r*r + Σ_k Σ q* L_k q` with factors of degree `≤ d`.
///
/// Blocks: the Gram `G₀` over `V_d`, then one localizing Gram of size
/// `μ_k ν N(d)` per pencil block. Each constraint matches one real or
/// imaginary part of one coefficient entry, with words in graded order.
pub fn assemble_membership_sdp(mp: &MembershipProblem) -> Result<SdpProblem> {
    assemble(mp, Shape::membership(mp)).map(|(p, _)| p)
}

/// Largest `λ` with `p + ε·Σ u*u − λ·1` in the cone with sums of squares of
/// degree `d + 1`, plus two scalar blocks for `λ = λ⁺ − λ⁻`. Its dual is the
/// moment matrix over `V_{d+1}` used for witnesses.
pub fn assemble_lower_bound_sdp(mp: &MembershipProblem) -> Result<SdpProblem> {
    assemble(mp, Shape::witness(mp)).map(|(p, _)| p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub g: usize,
    pub nu: usize,
    /// Factors `r` with `1 × ν` coefficients.
    pub sos: Vec<NcPoly>,
    /// Per pencil block `k`, factors `q` with `μ_k × ν` coefficients.
    pub localizing: Vec<Vec<NcPoly>>,
    /// Max-norm coefficient error of the certified identity.
    pub residual: f64,
}

impl Certificate {
    /// `Σ r*r + Σ_k Σ q* L_k q`.
    pub fn polynomial(&self, l: &LinearPencil) -> Result<NcPoly> {
        if l.blocks().len() != self.localizing.len() {
            return Err(Error::DimensionMismatch(format!(
                "certificate has {} localizing groups, pencil {} blocks",
                self.localizing.len(),
                l.blocks().len()
            )));
        }
        let mut total = NcPoly::zero(self.g, self.nu);
        for r in &self.sos {
            total = total.checked_add(&r.adjoint().multiply(r)?)?;
        }
        for (k, qs) in self.localizing.iter().enumerate() {
            if qs.is_empty() {
                continue;
            }
            let lk = block_polynomial(l, k);
            for q in qs {
                total = total.checked_add(&q.adjoint().multiply(&lk)?.multiply(q)?)?;
            }
        }
        Ok(total)
    }

    pub fn factor_count(&self) -> usize {
        self.sos.len() + self.localizing.iter().map(Vec::len).sum::<usize>()
    }

    pub fn degree(&self) -> Option<usize> {
        self.sos.iter().chain(self.localizing.iter().flatten()).filter_map(NcPoly::degree).max()
    }

    /// Certificate of `p + p'` from certificates of `p` and `p'`.
    pub fn concat(&self, other: &Certificate) -> Result<Certificate> {
        if self.g != other.g || self.nu != other.nu || self.localizing.len() != other.localizing.len() {
            return Err(Error::DimensionMismatch("certificates over different data".into()));
        }
        let mut out = self.clone();
        out.sos.extend(other.sos.iter().cloned());
        for (mine, theirs) in out.localizing.iter_mut().zip(&other.localizing) {
            mine.extend(theirs.iter().cloned());
        }
        out.residual = self.residual + other.residual;
        Ok(out)
    }
}

/// Block `k` of the pencil as a polynomial with `μ_k × μ_k` coefficients.
fn block_polynomial(l: &LinearPencil, k: usize) -> NcPoly {
    let coeffs = l.block_coeffs(k);
    let mu = coeffs[0].nrows();
    let mut p = NcPoly::zero(l.g(), mu);
    for (j, a) in coeffs.into_iter().enumerate() {
        let w = if j == 0 { Word::empty() } else { Word::letter(j as u32) };
        p.add_term(w, a);
    }
    p
}

/// Factors the primal Grams of a solved membership SDP.
pub fn extract_certificate(mp: &MembershipProblem, sol: &SdpSolution, rank_tol: f64) -> Result<Certificate> {
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Numerical(format!("cannot extract from a {:?} solution", sol.status)));
    }
    let basis = enumerate_words(mp.p.g(), mp.degree)?;
    let nu = mp.nu();
    let n = basis.len();
    let f0 = sdp::psd_factor(&sol.x[0], rank_tol)?;
    let mut sos = Vec::with_capacity(f0.nrows());
    for rho in 0..f0.nrows() {
        sos.push(NcPoly::from_coefficient_row(&f0.rows(rho, 1).into_owned(), &basis, nu)?);
    }
    let mut localizing = Vec::new();
    for (k, &(_, mu)) in mp.pencil.blocks().iter().enumerate() {
        let fk = sdp::psd_factor(&sol.x[1 + k], rank_tol)?;
        let mut qs = Vec::with_capacity(fk.nrows());
        for rho in 0..fk.nrows() {
            let mut q = NcPoly::zero_rect(mp.p.g(), mu, nu);
            for (ui, u) in basis.words().iter().enumerate() {
                let coeff = CMat::from_fn(mu, nu, |al, a| fk[(rho, (ui * mu + al) * nu + a)]);
                q.add_term(u.clone(), coeff);
            }
            qs.push(q);
        }
        localizing.push(qs);
        debug_assert_eq!(sol.x[1 + k].nrows(), mu * nu * n);
    }
    let mut cert = Certificate { g: mp.p.g(), nu, sos, localizing, residual: 0.0 };
    cert.residual = cert.polynomial(&mp.pencil)?.max_coeff_diff(&mp.p);
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verification {
    pub coeff_residual: f64,
    /// `min λ_min(p(X))` over the sampled points of `D_L`.
    pub min_eval_margin: f64,
}

/// Symbolic residual and sampled positivity of a certificate on a monic pencil.
pub fn verify_certificate(
    p: &NcPoly,
    l: &LinearPencil,
    cert: &Certificate,
    n_samples: usize,
    seed: u64,
) -> Result<Verification> {
    if !l.is_monic() {
        return Err(Error::NotMonic);
    }
    verify_certificate_from(p, l, cert, &alloc::vec![0.0; l.g()], n_samples, seed)
}

/// As [`verify_certificate`], sampling along rays from a scalar interior point.
pub fn verify_certificate_from(
    p: &NcPoly,
    l: &LinearPencil,
    cert: &Certificate,
    center: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Verification> {
    let coeff_residual = cert.polynomial(l)?.max_coeff_diff(p);
    let mut min_eval_margin = f64::INFINITY;
    for s in 0..n_samples {
        let ell = 1 + s % 3;
        let x = pencil::sample_point_from(l, center, ell, seed.wrapping_add(s as u64))?;
        min_eval_margin = min_eval_margin.min(linalg::lambda_min(&p.evaluate(&x)?));
    }
    Ok(Verification { coeff_residual, min_eval_margin })
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub sdp: SdpOptions,
    pub rank_tol: f64,
    pub tol_cert: f64,
    pub tol_witness: f64,
    pub samples: usize,
    pub seed: u64,
    /// Largest `n` tried for the bounding augmentation `Λ_n`.
    pub bound_cap: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            sdp: SdpOptions::default(),
            rank_tol: 1e-8,
            tol_cert: 1e-6,
            tol_witness: 1e-6,
            samples: 100,
            seed: 0,
            bound_cap: 1 << 10,
        }
    }
}

/// Solves the membership SDP and extracts a certificate if it is feasible.
pub fn certify(mp: &MembershipProblem, opts: &CertifyOptions) -> Result<(SdpSolution, Option<Certificate>)> {
    let prob = assemble_membership_sdp(mp)?;
    let sol = sdp::solve(&prob, &opts.sdp)?;
    if sol.status != SdpStatus::Optimal {
        return Ok((sol, None));
    }
    let cert = extract_certificate(mp, &sol, opts.rank_tol)?;
    Ok((sol, Some(cert)))
}

#[derive(Clone, Debug)]
pub enum VariableBound {
    /// `c ± x_j` both certified at degree 0.
    Bounded { c: f64, upper: Certificate, lower: Certificate },
    /// `cap ± x_j` is not certified.
    UnboundedAtCap { cap: f64 },
}

/// Least `c ≤ cap` (up to `tol`) with `c − x_j` and `c + x_j` in the degree-0 cone.
pub fn bound_variable(l: &LinearPencil, j: usize, tol: f64, opts: &CertifyOptions) -> Result<VariableBound> {
    if !l.is_monic() {
        return Err(Error::NotMonic);
    }
    if j == 0 || j > l.g() {
        return Err(Error::InvalidArgument(format!("variable index {j} outside 1..={}", l.g())));
    }
    let cap = opts.bound_cap as f64;
    let try_c = |c: f64| -> Result<Option<(Certificate, Certificate)>> {
        let mut certs = Vec::with_capacity(2);
        for sign in [-1.0, 1.0] {
            let mut p = NcPoly::constant(l.g(), linalg::identity(1) * Complex64::new(c, 0.0));
            p.add_term(Word::letter(j as u32), linalg::identity(1) * Complex64::new(sign, 0.0));
            let mp = MembershipProblem::with_degree(p, l.clone(), 0)?;
            match certify(&mp, opts)? {
                (_, Some(cert)) if cert.residual <= opts.tol_cert => certs.push(cert),
                _ => return Ok(None),
            }
        }
        let lower = certs.pop().expect("two certificates");
        let upper = certs.pop().expect("two certificates");
        Ok(Some((upper, lower)))
    };
    let Some(mut best) = try_c(cap)? else {
        return Ok(VariableBound::UnboundedAtCap { cap });
    };
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match try_c(mid)? {
            Some(certs) => {
                best = certs;
                hi = mid;
            }
            None => lo = mid,
        }
    }
    Ok(VariableBound::Bounded { c: hi, upper: best.0, lower: best.1 })
}

/// A positive linear functional on polynomials of degree `≤ 2d + 1`, given
/// by its moments: `φ(q) = Σ_w Σ_{a,b} S_w[a, b] Q_w[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFunctional {
    pub g: usize,
    pub nu: usize,
    pub degree: usize,
    pub moments: BTreeMap<Word, CMat>,
}

impl MomentFunctional {
    pub fn moment(&self, w: &Word) -> CMat {
        self.moments.get(w).cloned().unwrap_or_else(|| linalg::zeros(self.nu, self.nu))
    }

    pub fn apply(&self, q: &NcPoly) -> Complex64 {
        q.terms().map(|(w, m)| self.moment(w).component_mul(m).sum()).sum()
    }

    /// Block matrix `[S_{u*v}]` with rows over `V_{row_degree}`, columns over `V_{col_degree}`.
    pub fn moment_matrix(&self, row_degree: usize, col_degree: usize) -> Result<CMat> {
        let rows = enumerate_words(self.g, row_degree)?;
        let cols = enumerate_words(self.g, col_degree)?;
        let nu = self.nu;
        let mut out = linalg::zeros(nu * rows.len(), nu * cols.len());
        for (i, u) in rows.words().iter().enumerate() {
            for (k, v) in cols.words().iter().enumerate() {
                out.view_mut((i * nu, k * nu), (nu, nu)).copy_from(&self.moment(&Word::sandwich(u, 0, v)));
            }
        }
        Ok(out)
    }
}

/// Moments from the dual vector of an assembled SDP (`φ = −y`).
fn moments_from_dual(layout: &Layout, g: usize, degree: usize, y: &[f64]) -> MomentFunctional {
    let nu = layout.nu;
    let mut parts: BTreeMap<(Word, usize, usize), (f64, f64)> = BTreeMap::new();
    for (row, (w, a, b, part)) in layout.rows.iter().enumerate() {
        let slot = parts.entry((w.clone(), *a, *b)).or_insert((0.0, 0.0));
        match part {
            Part::Re => slot.0 = -y[row],
            Part::Im => slot.1 = -y[row],
        }
    }
    let mut moments: BTreeMap<Word, CMat> = BTreeMap::new();
    let mut put = |w: Word, a: usize, b: usize, z: Complex64| {
        moments.entry(w).or_insert_with(|| linalg::zeros(nu, nu))[(a, b)] = z;
    };
    for ((w, a, b), (re, im)) in parts {
        if a == b && w == w.star() {
            put(w, a, a, Complex64::new(re, 0.0));
        } else {
            let z = Complex64::new(re, -im) * 0.5;
            put(w.star(), b, a, z.conj());
            put(w, a, b, z);
        }
    }
    MomentFunctional { g, nu, degree, moments }
}

/// Finite-dimensional witness `(Y, γ)` with `value = ⟨p(Y)γ, γ⟩`.
#[derive(Clone, Debug)]
pub struct MomentWitness {
    pub functional: MomentFunctional,
    pub y: Vec<CMat>,
    pub gamma: nalgebra::DVector<Complex64>,
    pub value: f64,
    pub lambda_min_pencil: f64,
    /// `n` of the bounding augmentation `Λ_n` whose moments produced the witness.
    pub augmented: Option<usize>,
}

impl MomentWitness {
    /// `⟨r(Y)γ, q(Y)γ⟩`.
    pub fn pairing(&self, r: &NcPoly, q: &NcPoly) -> Result<Complex64> {
        let rv = r.evaluate(&self.y)? * &self.gamma;
        let qv = q.evaluate(&self.y)? * &self.gamma;
        Ok(qv.dotc(&rv))
    }
}

/// GNS construction from moments up to degree `2d + 2`.
///
/// Factors the moment matrix over `V_{d+1}` as `F*F`; the columns `φ_w` of
/// `F` with `|w| ≤ d` span the space, and `Y_j` compresses the shift
/// `φ_w ↦ φ_{x_j w}` onto it.
pub fn gns_witness(mp: &MembershipProblem, phi: &MomentFunctional, tol: f64) -> Result<MomentWitness> {
    let d = phi.degree;
    let nu = phi.nu;
    let g = phi.g;
    let outer = enumerate_words(g, d + 1)?;
    let inner = enumerate_words(g, d)?.len();
    let moments = linalg::hermitian_part(&phi.moment_matrix(d + 1, d + 1)?);
    let (vals, vecs) = linalg::eigh(&moments);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Numerical("moment matrix has no positive eigenvalue".into()));
    }
    if vals[0] < -tol * top.max(1.0) {
        return Err(Error::Numerical(format!("moment matrix has eigenvalue {:e}", vals[0])));
    }
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > GNS_EIGEN_CUTOFF * top).collect();
    let f = CMat::from_fn(keep.len(), moments.ncols(), |r, col| {
        vecs[(col, keep[r])].conj() * vals[keep[r]].sqrt()
    });
    let f_inner = f.columns(0, nu * inner).into_owned();
    let svd = f_inner.svd(true, true);
    let (u, v_t) = (svd.u.expect("left vectors"), svd.v_t.expect("right vectors"));
    let s_top = svd.singular_values.max();
    let span: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > GNS_SPAN_CUTOFF * s_top)
        .collect();
    let rank = span.len();
    let q = CMat::from_fn(u.nrows(), rank, |r, k| u[(r, span[k])]);
    let q_adj = q.adjoint();
    let mut y = Vec::with_capacity(g);
    for j in 1..=g as u32 {
        let mut shifted = linalg::zeros(f.nrows(), nu * inner);
        for (wi, w) in outer.words()[..inner].iter().enumerate() {
            let target = outer.index_of(&Word::letter(j).concat(w)).expect("shift stays in V_{d+1}");
            for e in 0..nu {
                shifted.set_column(wi * nu + e, &f.column(target * nu + e));
            }
        }
        // Y_j = Q* F_shift F_inner⁺ Q with F_inner⁺ Q = V Σ⁻¹.
        let right = CMat::from_fn(nu * inner, rank, |r, k| {
            v_t[(span[k], r)].conj() / svd.singular_values[span[k]]
        });
        y.push(linalg::hermitian_part(&(&q_adj * shifted * right)));
    }
    // γ stacks the projections of φ_{(∅,e)}.
    let mut gamma = nalgebra::DVector::zeros(nu * rank);
    for e in 0..nu {
        let coords = &q_adj * f.column(e);
        for k in 0..rank {
            gamma[e * rank + k] = coords[k];
        }
    }
    let value = gamma.dotc(&(mp.p.evaluate(&y)? * &gamma)).re;
    let lambda_min_pencil = linalg::lambda_min(&mp.pencil.evaluate(&y)?);
    let witness = MomentWitness { functional: phi.clone(), y, gamma, value, lambda_min_pencil, augmented: None };
    if value >= 0.0 || lambda_min_pencil < -tol {
        return Err(Error::Numerical(format!(
            "witness inaccurate: value {value:e}, lambda_min(L(Y)) {lambda_min_pencil:e}"
        )));
    }
    Ok(witness)
}

#[derive(Clone, Debug)]
pub enum WitnessSearch {
    Found(MomentWitness),
    /// `p − λ` is certified with `λ ≥ −tol`: no negative value at this degree.
    NonNegative(f64),
    Inaccurate(String),
}

/// Maximizes `λ` with `p − λ` in the cone and turns the optimal dual into a
/// witness. When the bound problem is not solvable on `L`, retries on
/// `Λ_n = L ⊕ (bounding blocks)` for `n = 1, 2, 4, .., cap`.
pub fn find_witness(mp: &MembershipProblem, opts: &CertifyOptions) -> Result<WitnessSearch> {
    let mut notes: Vec<String> = Vec::new();
    let mut attempt = |l: &LinearPencil, aug: Option<usize>| -> Result<Option<WitnessSearch>> {
        let sub = MembershipProblem { p: mp.p.clone(), pencil: l.clone(), degree: mp.degree };
        let (prob, layout) = assemble(&sub, Shape::witness(&sub))?;
        let sol = sdp::solve(&prob, &opts.sdp)?;
        if sol.status != SdpStatus::Optimal {
            notes.push(format!("bound problem on {}: {:?} {}", label(aug), sol.status, sol.message));
            return Ok(None);
        }
        let lambda = -sol.primal_objective;
        if lambda >= -opts.tol_witness {
            return Ok(Some(WitnessSearch::NonNegative(lambda)));
        }
        // Moments feed the GNS construction directly; clear the barrier noise first.
        let sol = sdp::refine_dual(&prob, &sol, DUAL_REFINE_RANK, opts.tol_witness).unwrap_or(sol);
        let phi = moments_from_dual(&layout, mp.p.g(), mp.degree, &sol.y);
        match gns_witness(mp, &phi, opts.tol_witness) {
            Ok(mut w) if w.value <= -opts.tol_witness => {
                w.augmented = aug;
                Ok(Some(WitnessSearch::Found(w)))
            }
            Ok(w) => {
                notes.push(format!("{}: witness value {:e} too close to zero", label(aug), w.value));
                Ok(None)
            }
            Err(e) => {
                notes.push(format!("{}: {e}", label(aug)));
                Ok(None)
            }
        }
    };
    if let Some(found) = attempt(&mp.pencil, None)? {
        match found {
            WitnessSearch::NonNegative(_) if mp.pencil.is_monic() => {}
            other => return Ok(other),
        }
    }
    if mp.pencil.is_monic() {
        let mut n = 1;
        while n <= opts.bound_cap {
            let aug = pencil::augment_bounded(&mp.pencil, n)?;
            if let Some(WitnessSearch::Found(w)) = attempt(&aug, Some(n))? {
                return Ok(WitnessSearch::Found(w));
            }
            n *= 2;
        }
    }
    Ok(WitnessSearch::Inaccurate(notes.join("; ")))
}

fn label(aug: Option<usize>) -> String {
    match aug {
        None => "L".into(),
        Some(n) => format!("Λ_{n}"),
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Certified(Certificate),
    NotPositive(MomentWitness),
    Inaccurate(String),
}

/// Certificate, witness, or an explicit report that neither was found at tolerance.
pub fn decide(mp: &MembershipProblem, opts: &CertifyOptions) -> Result<Verdict> {
    let (sol, cert) = certify(mp, opts)?;
    if let Some(cert) = cert {
        if cert.residual <= opts.tol_cert {
            return Ok(Verdict::Certified(cert));
        }
        return Ok(Verdict::Inaccurate(format!(
            "membership SDP solved but certificate residual is {:e}",
            cert.residual
        )));
    }
    match find_witness(mp, opts)? {
        WitnessSearch::Found(w) => Ok(Verdict::NotPositive(w)),
        WitnessSearch::NonNegative(lambda) => Ok(Verdict::Inaccurate(format!(
            "membership SDP {:?} ({}) but p − λ is certified for λ = {lambda:e}",
            sol.status, sol.message
        ))),
        WitnessSearch::Inaccurate(msg) => Ok(Verdict::Inaccurate(format!(
            "membership SDP {:?}; no witness: {msg}",
            sol.status
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(g: usize, terms: &[(&[u32], f64)]) -> NcPoly {
        let mut p = NcPoly::zero(g, 1);
        for (w, v) in terms {
            p.add_term(Word::new(*w), linalg::identity(1) * c(*v, 0.0));
        }
        p
    }

    fn one_plus_x() -> LinearPencil {
        LinearPencil::monic(vec![linalg::identity(1)], None).unwrap()
    }

    /// `{0 ⪯ y ⪯ 1}` as `diag(y, 1 − y)`, two scalar blocks.
    fn unit_interval() -> LinearPencil {
        LinearPencil::new(
            vec![linalg::diag(&[0.0, 1.0]), linalg::diag(&[1.0, -1.0])],
            Some(vec![(0, 1), (1, 1)]),
        )
        .unwrap()
    }

    #[test]
    fn degree_policy() {
        assert_eq!(certificate_degree(None), 0);
        assert_eq!(certificate_degree(Some(0)), 0);
        assert_eq!(certificate_degree(Some(1)), 0);
        assert_eq!(certificate_degree(Some(2)), 1);
        assert_eq!(certificate_degree(Some(3)), 1);
        assert_eq!(certificate_degree(Some(4)), 2);
    }

    #[test]
    fn constant_one_is_certified_with_one_square() {
        let mp = MembershipProblem::new(NcPoly::one(1, 1), one_plus_x()).unwrap();
        let prob = assemble_membership_sdp(&mp).unwrap();
        assert_eq!(prob.blocks, vec![1, 1]);
        let (_, cert) = certify(&mp, &CertifyOptions::default()).unwrap();
        let cert = cert.unwrap();
        assert!(cert.residual < 1e-7);
        assert!(cert.degree().unwrap_or(0) == 0);
    }

    #[test]
    fn interval_identities() {
        // y = 1·y·1 on [0, 1]
        let mp = MembershipProblem::new(scalar(1, &[(&[1], 1.0)]), unit_interval()).unwrap();
        let (_, cert) = certify(&mp, &CertifyOptions::default()).unwrap();
        assert!(cert.unwrap().residual < 1e-7);
        // 1 − y² = (1 − y)(1 + y), degree 1
        let p = scalar(1, &[(&[], 1.0), (&[1, 1], -1.0)]);
        let mp = MembershipProblem::new(p.clone(), unit_interval()).unwrap();
        assert_eq!(mp.degree(), 1);
        let (_, cert) = certify(&mp, &CertifyOptions::default()).unwrap();
        let cert = cert.unwrap();
        assert!(cert.residual < 1e-6);
        assert!(cert.localizing.iter().all(|qs| !qs.is_empty()));
        let v = verify_certificate_from(&p, &unit_interval(), &cert, &[0.5], 30, 4).unwrap();
        assert!(v.coeff_residual < 1e-6);
        assert!(v.min_eval_margin > -1e-9);
    }

    #[test]
    fn non_hermitian_rejected() {
        let p = &scalar(1, &[(&[], 1.0)]) + &scalar(1, &[(&[1], 1.0)]).scale(linalg::I);
        assert!(matches!(MembershipProblem::new(p, one_plus_x()), Err(Error::NotHermitian(_))));
        let p = scalar(1, &[(&[1, 1, 1], 1.0)]);
        assert!(MembershipProblem::with_degree(p, one_plus_x(), 0).is_err());
    }

    #[test]
    fn hand_built_and_corrupted_certificates() {
        let l = one_plus_x();
        // 1 + x + x² = (x)(x) + 1·(1 + x)·1 with factors r = x, q = 1.
        let cert = Certificate {
            g: 1,
            nu: 1,
            sos: vec![scalar(1, &[(&[1], 1.0)])],
            localizing: vec![vec![scalar(1, &[(&[], 1.0)])]],
            residual: 0.0,
        };
        let p = scalar(1, &[(&[], 1.0), (&[1], 1.0), (&[1, 1], 1.0)]);
        let v = verify_certificate(&p, &l, &cert, 20, 1).unwrap();
        assert!(v.coeff_residual <= 1e-12);
        assert!(v.min_eval_margin >= -1e-9);
        let mut broken = cert.clone();
        broken.sos[0] = NcPoly::zero_rect(1, 1, 1);
        assert!(verify_certificate(&p, &l, &broken, 0, 1).unwrap().coeff_residual > 1e-3);
    }

    #[test]
    fn rank_one_gram_gives_one_factor() {
        // (1 + x)² on {x ⪰ −1}: the membership SDP has rank-one Gram solutions among others,
        // so check the factor contract directly.
        let f = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let g = f.adjoint() * &f;
        assert_eq!(sdp::psd_factor(&g, 1e-8).unwrap().nrows(), 1);
    }

    #[test]
    fn constant_negative_gives_witness() {
        let mp = MembershipProblem::new(scalar(2, &[(&[], -1.0)]), random_pencil(2, 5)).unwrap();
        match decide(&mp, &CertifyOptions::default()).unwrap() {
            Verdict::NotPositive(w) => assert!((w.value + 1.0).abs() < 1e-6),
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    fn random_pencil(g: usize, seed: u64) -> LinearPencil {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pencil::random_monic_pencil(&mut rng, g, &[2, 1], false)
    }

    #[test]
    fn shifted_interval_witness_near_origin() {
        // y − 1/2 ... scaled so that the minimum −1 sits at y = 0
        let p = scalar(1, &[(&[], -1.0), (&[1], 2.0)]);
        let mp = MembershipProblem::new(p, unit_interval()).unwrap();
        match decide(&mp, &CertifyOptions::default()).unwrap() {
            Verdict::NotPositive(w) => {
                assert!(w.value < -0.5);
                assert!(linalg::max_abs(&w.y[0]) < 1e-3);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn representation_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = random_pencil(2, 3);
        // −1 + x1 x2 + x2 x1 − x1²·3 is negative at the origin.
        let p = scalar(2, &[(&[], -1.0), (&[1, 2], 1.0), (&[2, 1], 1.0), (&[1, 1], -3.0)]);
        let mp = MembershipProblem::new(p, l).unwrap();
        let WitnessSearch::Found(w) = find_witness(&mp, &CertifyOptions::default()).unwrap() else {
            panic!("no witness");
        };
        let d = mp.degree();
        for _ in 0..20 {
            let r = NcPoly::random(&mut rng, 2, 1, 1, d + 1);
            let q = NcPoly::random(&mut rng, 2, 1, 1, d);
            let lhs = w.pairing(&r, &q).unwrap();
            let rhs = w.functional.apply(&q.adjoint().multiply(&r).unwrap());
            assert!((lhs - rhs).norm() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn unbounded_direction_hits_cap() {
        let opts = CertifyOptions { bound_cap: 16, ..Default::default() };
        assert!(matches!(
            bound_variable(&one_plus_x(), 1, 1e-3, &opts).unwrap(),
            VariableBound::UnboundedAtCap { .. }
        ));
    }

    #[test]
    fn augmented_pencil_is_bounded_by_n() {
        let l = pencil::augment_bounded(&one_plus_x(), 2).unwrap();
        match bound_variable(&l, 1, 1e-3, &CertifyOptions::default()).unwrap() {
            VariableBound::Bounded { c, upper, lower } => {
                assert!((2.0 - 1e-3..=3.0).contains(&c), "c = {c}");
                assert!(upper.residual < 1e-6 && lower.residual < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cone_is_closed_under_addition() {
        let l = unit_interval();
        let p1 = scalar(1, &[(&[1], 1.0)]);
        let p2 = scalar(1, &[(&[], 1.0), (&[1, 1], -1.0)]);
        let c1 = certify(&MembershipProblem::with_degree(p1.clone(), l.clone(), 1).unwrap(), &Default::default())
            .unwrap()
            .1
            .unwrap();
        let c2 = certify(&MembershipProblem::new(p2.clone(), l.clone()).unwrap(), &Default::default()).unwrap().1.unwrap();
        let sum = c1.concat(&c2).unwrap();
        let target = &p1 + &p2;
        assert!(sum.polynomial(&l).unwrap().max_coeff_diff(&target) < 1e-6);
    }
}
