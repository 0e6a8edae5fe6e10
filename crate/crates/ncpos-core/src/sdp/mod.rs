//! Dense semidefinite programming over hermitian PSD blocks.
//!
//! Standard form: minimize `⟨C, X⟩` subject to `⟨A_i, X⟩ = b_i`, `X ⪰ 0`,
//! with `⟨A, X⟩ = Re tr(A X)` summed over blocks. The dual is
//! `max bᵀy` subject to `C − Σ y_i A_i ⪰ 0`.

mod ipm;
mod sdpa;

pub use sdpa::{export_sdpa, import_sdpa};

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};



/// Matrix entry `A[row, col] = value` of a hermitian coefficient, `row ≤ col`.
/// The mirrored entry `A[col, row]` is the conjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: Complex64,
}

/// A real linear functional on the block variable, stored as upper-triangular
/// entries of hermitian coefficient matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Functional {
    entries: BTreeMap<(usize, usize, usize), Complex64>,
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `Re(c · X_block[r, s])` to the functional.
    pub fn add(&mut self, block: usize, r: usize, s: usize, c: Complex64) {
        let (key, value) = match r.cmp(&s) {
            core::cmp::Ordering::Equal => ((block, r, r), Complex64::new(c.re, 0.0)),
            core::cmp::Ordering::Less => ((block, r, s), c.conj() * 0.5),
            core::cmp::Ordering::Greater => ((block, s, r), c * 0.5),
        };
        if value == linalg::ZERO {
            return;
        }
        let slot = self.entries.entry(key).or_insert(linalg::ZERO);
        *slot += value;
        if *slot == linalg::ZERO {
            self.entries.remove(&key);
        }
    }

    /// Sets the hermitian coefficient entry `A[row, col]` directly (`row ≤ col`).
    pub fn set_entry(&mut self, e: Entry) {
        debug_assert!(e.row <= e.col);
        let v = if e.row == e.col { Complex64::new(e.value.re, 0.0) } else { e.value };
        if v == linalg::ZERO {
            self.entries.remove(&(e.block, e.row, e.col));
        } else {
            self.entries.insert((e.block, e.row, e.col), v);
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.entries.iter().map(|(&(block, row, col), &value)| Entry { block, row, col, value })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_real(&self) -> bool {
        self.entries.values().all(|v| v.im == 0.0)
    }

    /// `Re tr(A X)`.
    pub fn eval(&self, x: &[CMat]) -> f64 {
        self.entries()
            .map(|e| {
                let xv = x[e.block][(e.row, e.col)];
                if e.row == e.col {
                    e.value.re * xv.re
                } else {
                    2.0 * (e.value * xv.conj()).re
                }
            })
            .sum()
    }

    /// Dense hermitian coefficient matrix of one block.
    pub fn dense_block(&self, block: usize, n: usize) -> CMat {
        let mut m = linalg::zeros(n, n);
        for e in self.entries().filter(|e| e.block == block) {
            m[(e.row, e.col)] = e.value;
            m[(e.col, e.row)] = e.value.conj();
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub functional: Functional,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub constraints: Vec<Constraint>,
    pub objective: Functional,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        SdpProblem { blocks, constraints: Vec::new(), objective: Functional::new() }
    }

    pub fn add_constraint(&mut self, functional: Functional, rhs: f64) {
        self.constraints.push(Constraint { functional, rhs });
    }

    pub fn is_real(&self) -> bool {
        self.objective.is_real() && self.constraints.iter().all(|c| c.functional.is_real())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.contains(&0) {
            return Err(Error::InvalidArgument("block sizes must be positive".into()));
        }
        let check = |f: &Functional, what: &str| -> Result<()> {
            for e in f.entries() {
                let ok = e.block < self.blocks.len() && e.col < self.blocks[e.block] && e.row <= e.col;
                if !ok {
                    return Err(Error::DimensionMismatch(format!(
                        "{what} entry ({}, {}, {}) outside block structure {:?}",
                        e.block, e.row, e.col, self.blocks
                    )));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.functional, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("constraint {i} has non-finite rhs")));
            }
        }
        Ok(())
    }

    /// The real symmetric problem obtained by the embedding
    /// `X ↦ [[Re X, −Im X], [Im X, Re X]]`, with coefficients halved so
    /// that functional values are preserved.
    pub fn realified(&self) -> SdpProblem {
        let blocks: Vec<usize> = self.blocks.iter().map(|n| 2 * n).collect();
        let map = |f: &Functional| -> Functional {
            let mut out = Functional::new();
            for e in f.entries() {
                let n = self.blocks[e.block];
                let (r, c) = (e.row, e.col);
                let (alpha, beta) = (0.5 * e.value.re, 0.5 * e.value.im);
                let mut put = |row: usize, col: usize, v: f64| {
                    if v != 0.0 {
                        let key = (e.block, row.min(col), row.max(col));
                        let slot = out.entries.entry(key).or_insert(linalg::ZERO);
                        slot.re += v;
                    }
                };
                put(r, c, alpha);
                put(r + n, c + n, alpha);
                if r != c {
                    put(r, c + n, -beta);
                    put(c, r + n, beta);
                }
            }
            out.entries.retain(|_, v| *v != linalg::ZERO);
            out
        };
        SdpProblem {
            blocks,
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint { functional: map(&c.functional), rhs: c.rhs })
                .collect(),
            objective: map(&self.objective),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub tol_feas: f64,
    pub tol_psd: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    pub max_iter: usize,
    pub max_constraints: usize,
    /// Project the primal solution back onto the affine constraints after convergence.
    pub polish: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol_feas: 1e-8,
            tol_psd: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            max_iter: 200,
            max_constraints: 20_000,
            polish: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Primal infeasible; `y` holds a normalized improving ray with `bᵀy = 1`.
    Infeasible,
    Inaccurate,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal blocks `X`.
    pub x: Vec<CMat>,
    /// Dual vector, one entry per constraint of the original problem.
    pub y: Vec<f64>,
    /// Dual slack `C − Σ y_i A_i` (for `Infeasible`: `−Σ y_i A_i`).
    pub z: Vec<CMat>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub message: String,
}

impl SdpSolution {
    pub fn min_primal_eigenvalue(&self) -> f64 {
        self.x.iter().map(linalg::lambda_min).fold(f64::INFINITY, f64::min)
    }
}

/// Solves the problem with a homogeneous self-dual interior-point method.
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    if p.constraints.len() > opts.max_constraints {
        return Err(Error::SizeCap { size: p.constraints.len(), cap: opts.max_constraints });
    }
    let real = p.is_real();
    let work = if real { p.clone() } else { p.realified() };
    let raw = ipm::solve_real(&ipm::RealSdp::from_problem(&work), opts);
    let unpack = |blocks: &[linalg::RMat], factor: f64| -> Vec<CMat> {
        blocks
            .iter()
            .map(|b| {
                if real {
                    linalg::from_real(b) * Complex64::new(factor, 0.0)
                } else {
                    linalg::derealify(b) * Complex64::new(2.0 * factor, 0.0)
                }
            })
            .collect()
    };
    let x = if real {
        unpack(&raw.x, 1.0)
    } else {
        raw.x.iter().map(linalg::derealify).collect()
    };
    let z = unpack(&raw.s, 1.0);
    Ok(SdpSolution {
        status: raw.status,
        x,
        y: raw.y,
        z,
        primal_objective: raw.pobj,
        dual_objective: raw.dobj,
        primal_residual: raw.pres,
        dual_residual: raw.dres,
        gap: raw.gap,
        iterations: raw.iterations,
        message: raw.message,
    })
}

/// Newton refinement of an optimal pair on the face it identifies.
///
/// Interior-point iterates stop with eigenvalues of order the barrier
/// parameter where the exact `X` and `Z` are singular, and their ranges are
/// only accurate to about the square root of that. Writing `X_b = U_b U_b*`
/// with `U_b` spanning the eigenvalues above `rank_tol · λ_max(X)`, this solves
/// `A(U U*) = b`, `Z_b(y) U_b = 0` by Gauss-Newton with least-norm steps.
/// Returns `None` if the system does not converge, `y` moves by more than
/// `1e-3 · max(1, |y|)`, or `Z(y)` leaves the cone by more than
/// `psd_tol · max(1, λ_max(Z))`.
pub fn refine_dual(p: &SdpProblem, sol: &SdpSolution, rank_tol: f64, psd_tol: f64) -> Option<SdpSolution> {
    let top = sol.x.iter().map(linalg::lambda_max).fold(0.0, f64::max);
    if sol.status != SdpStatus::Optimal || top <= 0.0 {
        return None;
    }
    let mut u: Vec<CMat> = sol
        .x
        .iter()
        .map(|x| {
            let (vals, vecs) = linalg::eigh(x);
            let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > rank_tol * top).collect();
            CMat::from_fn(x.nrows(), keep.len(), |r, k| vecs[(r, keep[k])] * vals[keep[k]].sqrt())
        })
        .collect();
    let m = p.constraints.len();
    let dense: Vec<Vec<CMat>> = p
        .constraints
        .iter()
        .map(|c| p.blocks.iter().enumerate().map(|(b, &n)| c.functional.dense_block(b, n)).collect())
        .collect();
    let objective: Vec<CMat> = p.blocks.iter().enumerate().map(|(b, &n)| p.objective.dense_block(b, n)).collect();
    let slack = |y: &[f64]| -> Vec<CMat> {
        let mut z = objective.clone();
        for (a, &yi) in dense.iter().zip(y) {
            for (zb, ab) in z.iter_mut().zip(a) {
                *zb -= ab * Complex64::new(yi, 0.0);
            }
        }
        z
    };
    let unknowns: usize = m + u.iter().map(|ub| 2 * ub.len()).sum::<usize>();
    let equations: usize = m + u.iter().map(|ub| 2 * ub.len()).sum::<usize>();
    // Residual at (u, y) or, with `lin = Some((u0, y0))`, the derivative at
    // (u0, y0) in the direction (u, y).
    let residual = |u: &[CMat], y: &[f64], lin: Option<(&[CMat], &[f64])>| -> nalgebra::DVector<f64> {
        let mut out = nalgebra::DVector::zeros(equations);
        for (i, a) in dense.iter().enumerate() {
            let mut v = 0.0;
            for (b, ab) in a.iter().enumerate() {
                v += match lin {
                    None => (ab * &u[b] * u[b].adjoint()).trace().re,
                    Some((u0, _)) => 2.0 * (ab * &u[b] * u0[b].adjoint()).trace().re,
                };
            }
            out[i] = match lin {
                None => v - p.constraints[i].rhs,
                Some(_) => v,
            };
        }
        let mut at = m;
        let z = match lin {
            None => slack(y),
            Some((_, y0)) => slack(y0),
        };
        for b in 0..u.len() {
            let zu = match lin {
                None => &z[b] * &u[b],
                Some((u0, _)) => {
                    let mut dz = linalg::zeros(u[b].nrows(), u[b].nrows());
                    for (a, &yi) in dense.iter().zip(y) {
                        dz -= &a[b] * Complex64::new(yi, 0.0);
                    }
                    &z[b] * &u[b] + dz * &u0[b]
                }
            };
            for v in zu.iter() {
                out[at] = v.re;
                out[at + 1] = v.im;
                at += 2;
            }
        }
        out
    };
    let mut y = sol.y.clone();
    let scale = p.constraints.iter().map(|c| c.rhs.abs()).fold(1.0, f64::max).max(top);
    let mut converged = false;
    for _ in 0..REFINE_MAX_STEPS {
        let f = residual(&u, &y, None);
        if f.amax() <= REFINE_TOL * scale {
            converged = true;
            break;
        }
        let mut jac = linalg::RMat::zeros(equations, unknowns);
        let zero_u: Vec<CMat> = u.iter().map(|ub| linalg::zeros(ub.nrows(), ub.ncols())).collect();
        let mut col = 0;
        for i in 0..m {
            let mut dy = alloc::vec![0.0; m];
            dy[i] = 1.0;
            jac.set_column(col, &residual(&zero_u, &dy, Some((&u, &y))));
            col += 1;
        }
        let zero_y = alloc::vec![0.0; m];
        for b in 0..u.len() {
            for k in 0..u[b].len() {
                for unit in [linalg::ONE, linalg::I] {
                    let mut du = zero_u.clone();
                    du[b][k] = unit;
                    jac.set_column(col, &residual(&du, &zero_y, Some((&u, &y))));
                    col += 1;
                }
            }
        }
        let svd = jac.svd(true, true);
        let cutoff = REFINE_SVD_CUTOFF * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let step = svd.solve(&(-&f), cutoff).ok()?;
        // Halve the step until the residual decreases.
        let current = f.amax();
        let mut alpha = 1.0;
        loop {
            let trial_y: Vec<f64> = y.iter().zip(step.iter()).map(|(yi, d)| yi + alpha * d).collect();
            let mut trial_u = u.clone();
            let mut at = m;
            for ub in trial_u.iter_mut() {
                for v in ub.iter_mut() {
                    *v += Complex64::new(step[at], step[at + 1]) * alpha;
                    at += 2;
                }
            }
            if residual(&trial_u, &trial_y, None).amax() < current {
                u = trial_u;
                y = trial_y;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-4 {
                return None;
            }
        }
    }
    if !converged {
        return None;
    }
    let y_scale = sol.y.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if y.iter().zip(&sol.y).any(|(a, b)| (a - b).abs() > 1e-3 * y_scale) {
        return None;
    }
    let z = slack(&y);
    let z_top = z.iter().map(linalg::lambda_max).fold(1.0, f64::max);
    if z.iter().map(linalg::lambda_min).fold(f64::INFINITY, f64::min) < -psd_tol * z_top {
        return None;
    }
    let x: Vec<CMat> = u.iter().map(|ub| ub * ub.adjoint()).collect();
    let primal_objective = objective.iter().zip(&x).map(|(c, xb)| (c * xb).trace().re).sum();
    let dual_objective = p.constraints.iter().zip(&y).map(|(c, yi)| c.rhs * yi).sum();
    Some(SdpSolution { x, y, z, primal_objective, dual_objective, ..sol.clone() })
}

const REFINE_MAX_STEPS: usize = 30;
const REFINE_SVD_CUTOFF: f64 = 1e-10;
const REFINE_TOL: f64 = 1e-13;

/// `G ≈ F^* F` with one row of `F` per eigenvalue above `rank_tol · λ_max`.
pub fn psd_factor(g: &CMat, rank_tol: f64) -> Result<CMat> {
    let n = g.nrows();
    if !g.is_square() {
        return Err(Error::DimensionMismatch(format!("Gram matrix is {:?}", g.shape())));
    }
    let (vals, vecs) = linalg::eigh(g);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let low = vals.first().copied().unwrap_or(0.0);
    if low < -10.0 * rank_tol * top.max(f64::MIN_POSITIVE) && low < -1e-300 {
        return Err(Error::Indefinite(low));
    }
    let keep: Vec<usize> = (0..n).filter(|&k| top > 0.0 && vals[k] > rank_tol * top).collect();
    let mut f = linalg::zeros(keep.len(), n);
    // Largest eigenvalue first.
    for (row, &k) in keep.iter().rev().enumerate() {
        let s = Complex64::new(vals[k].sqrt(), 0.0);
        for col in 0..n {
            f[(row, col)] = s * vecs[(col, k)].conj();
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trace_functional(block: usize, n: usize) -> Functional {
        let mut f = Functional::new();
        for k in 0..n {
            f.add(block, k, k, linalg::ONE);
        }
        f
    }

    #[test]
    fn functional_add_matches_real_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = linalg::random_hermitian(&mut rng, 3);
        for (r, s) in [(0, 1), (2, 0), (1, 1)] {
            let coef = c(0.3, -1.7);
            let mut f = Functional::new();
            f.add(0, r, s, coef);
            let expected = (coef * x[(r, s)]).re;
            assert!((f.eval(core::slice::from_ref(&x)) - expected).abs() < 1e-14);
            let dense = f.dense_block(0, 3);
            assert!(((&dense * &x).trace().re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_one_minimization() {
        let mut p = SdpProblem::new(vec![1]);
        p.add_constraint(trace_functional(0, 1), 1.0);
        p.objective = trace_functional(0, 1);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.x[0][(0, 0)].re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new(vec![1]);
        p.add_constraint(trace_functional(0, 1), -1.0);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        // Farkas ray: bᵀy = 1 and −Aᵀy ⪰ 0.
        assert!((-sol.y[0] - 1.0).abs() < 1e-6);
        assert!(linalg::lambda_min(&sol.z[0]) >= -1e-8);
    }

    #[test]
    fn unit_diagonal_maximizes_off_diagonal() {
        let mut p = SdpProblem::new(vec![2]);
        for k in 0..2 {
            let mut f = Functional::new();
            f.add(0, k, k, linalg::ONE);
            p.add_constraint(f, 1.0);
        }
        // maximize X12 + X21 = minimize −2 Re X12
        p.objective.add(0, 0, 1, c(-2.0, 0.0));
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 2.0).abs() < 1e-7);
        assert!(linalg::max_abs_diff(&sol.x[0], &CMat::from_element(2, 2, linalg::ONE)) < 1e-4);
        assert!(sol.primal_objective >= sol.dual_objective - 1e-8);
    }

    #[test]
    fn refined_dual_is_complementary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_feasible_problem(&mut rng, &[3, 2], 4);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let refined = refine_dual(&p, &sol, 1e-6, 1e-6).expect("consistent");
        for (x, z) in refined.x.iter().zip(&refined.z) {
            assert!(linalg::max_abs(&(x * z)) <= 1e-11, "{}", linalg::max_abs(&(x * z)));
            assert!(linalg::lambda_min(z) >= -1e-9);
        }
        for c in &p.constraints {
            assert!((c.functional.eval(&refined.x) - c.rhs).abs() < 1e-11);
        }
        assert!((refined.dual_objective - sol.primal_objective).abs() < 1e-6);
        assert!((refined.dual_objective - refined.primal_objective).abs() < 1e-11);
    }

    #[test]
    fn complex_problem_is_solved_through_realification() {
        // minimize Re tr(C X) with C = [[1, i], [−i, 1]], tr X = 1: optimum λ_min(C) = 0.
        let mut p = SdpProblem::new(vec![2]);
        p.add_constraint(trace_functional(0, 2), 1.0);
        p.objective.set_entry(Entry { block: 0, row: 0, col: 0, value: linalg::ONE });
        p.objective.set_entry(Entry { block: 0, row: 1, col: 1, value: linalg::ONE });
        p.objective.set_entry(Entry { block: 0, row: 0, col: 1, value: linalg::I });
        assert!(!p.is_real());
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-7);
        let cm = p.objective.dense_block(0, 2);
        assert!((&cm * &sol.x[0]).trace().re.abs() < 1e-7);
        assert!(linalg::lambda_min(&sol.z[0]) >= -1e-7);
    }

    #[test]
    fn dependent_and_zero_rows_are_handled() {
        let mut p = SdpProblem::new(vec![2]);
        p.add_constraint(trace_functional(0, 2), 1.0);
        p.add_constraint(trace_functional(0, 2), 1.0);
        p.add_constraint(Functional::new(), 0.0);
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let mut q = SdpProblem::new(vec![2]);
        q.add_constraint(trace_functional(0, 2), 1.0);
        q.add_constraint(trace_functional(0, 2), 2.0);
        let sol = solve(&q, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        let mut r = SdpProblem::new(vec![1]);
        r.add_constraint(Functional::new(), 1.0);
        assert_eq!(solve(&r, &SdpOptions::default()).unwrap().status, SdpStatus::Infeasible);
    }

    #[test]
    fn deterministic_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_feasible_problem(&mut rng, &[3, 2], 5);
        let a = solve(&p, &SdpOptions::default()).unwrap();
        let b = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn psd_factor_examples() {
        let f = psd_factor(&linalg::diag(&[4.0, 0.0]), 1e-8).unwrap();
        assert_eq!(f.nrows(), 1);
        assert!((f[(0, 0)].norm() - 2.0).abs() < 1e-14);
        assert_eq!(f[(0, 1)], linalg::ZERO);
        let f = psd_factor(&linalg::identity(3), 1e-8).unwrap();
        assert!(linalg::max_abs_diff(&(f.adjoint() * &f), &linalg::identity(3)) < 1e-14);
        assert!(matches!(psd_factor(&linalg::diag(&[1.0, -0.5]), 1e-8), Err(Error::Indefinite(_))));
        assert_eq!(psd_factor(&linalg::zeros(2, 2), 1e-8).unwrap().nrows(), 0);
    }

    /// Random problem with a known strictly feasible point.
    pub(crate) fn random_feasible_problem(rng: &mut ChaCha8Rng, blocks: &[usize], m: usize) -> SdpProblem {
        let x0: Vec<CMat> = blocks
            .iter()
            .map(|&n| {
                let f = linalg::random_complex(rng, n, n);
                f.adjoint() * f + linalg::identity(n)
            })
            .collect();
        let mut p = SdpProblem::new(blocks.to_vec());
        for _ in 0..m {
            let mut f = Functional::new();
            for (b, &n) in blocks.iter().enumerate() {
                for r in 0..n {
                    for s in r..n {
                        if rng.random::<f64>() < 0.5 {
                            let v = if r == s { c(rng.random_range(-1.0..1.0), 0.0) } else { linalg::random_complex(rng, 1, 1)[(0, 0)] };
                            f.set_entry(Entry { block: b, row: r, col: s, value: v });
                        }
                    }
                }
            }
            let rhs = f.eval(&x0);
            p.add_constraint(f, rhs);
        }
        for (b, &n) in blocks.iter().enumerate() {
            for k in 0..n {
                p.objective.add(b, k, k, linalg::ONE);
            }
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn weak_duality_and_feasibility_on_random_problems(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_feasible_problem(&mut rng, &[3, 2], 6);
            let sol = solve(&p, &SdpOptions::default()).unwrap();
            prop_assert_eq!(sol.status, SdpStatus::Optimal);
            prop_assert!(sol.primal_objective >= sol.dual_objective - 1e-7);
            prop_assert!(sol.min_primal_eigenvalue() >= -1e-8);
            for con in &p.constraints {
                prop_assert!((con.functional.eval(&sol.x) - con.rhs).abs() <= 1e-7 * (1.0 + con.rhs.abs()));
            }
        }

        #[test]
        fn psd_factor_round_trip(seed in any::<u64>(), n in 1usize..6, r in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f0 = linalg::random_complex(&mut rng, r, n);
            let g = f0.adjoint() * &f0;
            let f = psd_factor(&g, 1e-8).unwrap();
            prop_assert!(f.nrows() <= r.min(n));
            prop_assert!(linalg::max_abs_diff(&(f.adjoint() * &f), &g) <= 1e-10);
        }
    }
}
