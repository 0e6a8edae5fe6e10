//! Homogeneous self-dual interior-point method with the HKM direction and
//! Mehrotra predictor-corrector steps, on real symmetric blocks.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DVector, RowDVector};

use super::{SdpOptions, SdpProblem, SdpStatus};
use crate::linalg::RMat;

/// Upper-triangular entry `(block, row, col, value)` of a symmetric matrix.
type SymEntry = (usize, usize, usize, f64);

pub(crate) struct RealSdp {
    pub blocks: Vec<usize>,
    pub rows: Vec<Vec<SymEntry>>,
    pub b: Vec<f64>,
    pub c: Vec<SymEntry>,
}

impl RealSdp {
    pub fn from_problem(p: &SdpProblem) -> Self {
        let conv = |f: &super::Functional| -> Vec<SymEntry> {
            f.entries().map(|e| (e.block, e.row, e.col, e.value.re)).collect()
        };
        RealSdp {
            blocks: p.blocks.clone(),
            rows: p.constraints.iter().map(|c| conv(&c.functional)).collect(),
            b: p.constraints.iter().map(|c| c.rhs).collect(),
            c: conv(&p.objective),
        }
    }
}

pub(crate) struct RawSolution {
    pub status: SdpStatus,
    pub x: Vec<RMat>,
    pub s: Vec<RMat>,
    pub y: Vec<f64>,
    pub pobj: f64,
    pub dobj: f64,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub iterations: usize,
    pub message: String,
}

fn sym_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        2.0
    }
}

fn apply(entries: &[SymEntry], x: &[RMat]) -> f64 {
    entries.iter().map(|&(b, i, j, v)| sym_weight(i, j) * v * x[b][(i, j)]).sum()
}

fn scatter(entries: &[SymEntry], scale: f64, out: &mut [RMat]) {
    for &(b, i, j, v) in entries {
        out[b][(i, j)] += scale * v;
        if i != j {
            out[b][(j, i)] += scale * v;
        }
    }
}

fn inner(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[RMat]) -> f64 {
    inner(a, a).sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sym(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// Pivoted Cholesky of a PSD matrix: indices of a maximal well-conditioned
/// subset of rows, in pivot order.
fn independent_rows(k: &RMat, rel_tol: f64) -> Vec<usize> {
    let m = k.nrows();
    let mut diag: Vec<f64> = (0..m).map(|i| k[(i, i)]).collect();
    let max_diag = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut chosen: Vec<usize> = Vec::new();
    // Columns of L stored row-major by chosen pivot: l[t][i].
    let mut l: Vec<Vec<f64>> = Vec::new();
    let mut used = alloc::vec![false; m];
    loop {
        let mut best = None;
        let mut best_val = rel_tol * max_diag;
        for i in 0..m {
            if !used[i] && diag[i] > best_val {
                best_val = diag[i];
                best = Some(i);
            }
        }
        let Some(p) = best else { break };
        used[p] = true;
        let piv = diag[p].sqrt();
        let mut col = alloc::vec![0.0; m];
        for i in 0..m {
            if used[i] && i != p {
                continue;
            }
            let mut s = k[(i, p)];
            for lt in &l {
                s -= lt[i] * lt[p];
            }
            col[i] = s / piv;
        }
        for i in 0..m {
            if !used[i] {
                diag[i] -= col[i] * col[i];
            }
        }
        l.push(col);
        chosen.push(p);
    }
    chosen
}

struct Presolved {
    /// Kept original row indices.
    keep: Vec<usize>,
    /// Row scaling applied to kept rows.
    scale: Vec<f64>,
}

enum PresolveOutcome {
    Ready(Presolved),
    /// Inconsistent equations: ray `y` on the original rows with `Aᵀy = 0`, `bᵀy = 1`.
    Inconsistent(Vec<f64>, String),
}

fn gram_of_rows(p: &RealSdp, rows: &[usize], scale: &[f64]) -> RMat {
    let m = rows.len();
    let mut by_entry: alloc::collections::BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> =
        alloc::collections::BTreeMap::new();
    for (t, &r) in rows.iter().enumerate() {
        for &(b, i, j, v) in &p.rows[r] {
            by_entry.entry((b, i, j)).or_default().push((t, v * scale[t]));
        }
    }
    let mut k = RMat::zeros(m, m);
    for (&(_, i, j), list) in &by_entry {
        let w = sym_weight(i, j);
        for &(s, vs) in list {
            for &(t, vt) in list {
                k[(s, t)] += w * vs * vt;
            }
        }
    }
    k
}

fn presolve(p: &RealSdp) -> PresolveOutcome {
    let m = p.rows.len();
    let bscale = 1.0 + norm(&p.b);
    let mut nonzero = Vec::new();
    let mut scale = Vec::new();
    for r in 0..m {
        let nrm = p.rows[r].iter().map(|&(_, i, j, v)| sym_weight(i, j) * v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            if p.b[r].abs() > 1e-12 * bscale {
                let mut y = alloc::vec![0.0; m];
                y[r] = 1.0 / p.b[r];
                return PresolveOutcome::Inconsistent(y, format!("constraint {r} is 0 = {}", p.b[r]));
            }
            continue;
        }
        nonzero.push(r);
        scale.push(1.0 / nrm);
    }
    let k = gram_of_rows(p, &nonzero, &scale);
    let order = independent_rows(&k, 1e-12);
    if order.len() == nonzero.len() {
        return PresolveOutcome::Ready(Presolved { keep: nonzero, scale });
    }
    let mut basis: Vec<usize> = order.clone();
    basis.sort_unstable();
    let kb = RMat::from_fn(basis.len(), basis.len(), |s, t| k[(basis[s], basis[t])]);
    let Some(chol) = kb.cholesky() else {
        return PresolveOutcome::Ready(Presolved { keep: nonzero, scale });
    };
    let bb: Vec<f64> = basis.iter().map(|&t| p.b[nonzero[t]] * scale[t]).collect();
    for t in 0..nonzero.len() {
        if basis.binary_search(&t).is_ok() {
            continue;
        }
        let rhs = DVector::from_iterator(basis.len(), basis.iter().map(|&s| k[(s, t)]));
        let coef = chol.solve(&rhs);
        let predicted: f64 = coef.iter().zip(&bb).map(|(c, b)| c * b).sum();
        let actual = p.b[nonzero[t]] * scale[t];
        let miss = actual - predicted;
        if miss.abs() > 1e-9 * (1.0 + actual.abs() + predicted.abs()) {
            let mut y = alloc::vec![0.0; m];
            y[nonzero[t]] = scale[t] / miss;
            for (s, &bs) in basis.iter().enumerate() {
                y[nonzero[bs]] -= coef[s] * scale[bs] / miss;
            }
            return PresolveOutcome::Inconsistent(
                y,
                format!("constraint {} contradicts a combination of the others", nonzero[t]),
            );
        }
    }
    let keep = basis.iter().map(|&t| nonzero[t]).collect();
    let scale = basis.iter().map(|&t| scale[t]).collect();
    PresolveOutcome::Ready(Presolved { keep, scale })
}

/// Working problem: kept rows, scaled to unit norm.
struct Work<'a> {
    blocks: &'a [usize],
    rows: Vec<Vec<SymEntry>>,
    /// `rows` expanded to full symmetric entries, grouped by block.
    full_by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    b: Vec<f64>,
    c: &'a [SymEntry],
}

impl<'a> Work<'a> {
    fn new(p: &'a RealSdp, pre: &Presolved) -> Self {
        let rows: Vec<Vec<SymEntry>> = pre
            .keep
            .iter()
            .zip(&pre.scale)
            .map(|(&r, &s)| p.rows[r].iter().map(|&(b, i, j, v)| (b, i, j, v * s)).collect())
            .collect();
        let b = pre.keep.iter().zip(&pre.scale).map(|(&r, &s)| p.b[r] * s).collect();
        let mut full_by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = alloc::vec![Vec::new(); p.blocks.len()];
        for (k, row) in rows.iter().enumerate() {
            let mut per: alloc::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
            for &(b, i, j, v) in row {
                let e = per.entry(b).or_default();
                e.push((i, j, v));
                if i != j {
                    e.push((j, i, v));
                }
            }
            for (b, list) in per {
                full_by_block[b].push((k, list));
            }
        }
        Work { blocks: &p.blocks, rows, full_by_block, b, c: &p.c }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn zeros(&self) -> Vec<RMat> {
        self.blocks.iter().map(|&n| RMat::zeros(n, n)).collect()
    }

    fn a(&self, x: &[RMat]) -> Vec<f64> {
        self.rows.iter().map(|r| apply(r, x)).collect()
    }

    fn at(&self, y: &[f64]) -> Vec<RMat> {
        let mut out = self.zeros();
        for (r, &v) in self.rows.iter().zip(y) {
            if v != 0.0 {
                scatter(r, v, &mut out);
            }
        }
        out
    }

    fn c_dense(&self) -> Vec<RMat> {
        let mut out = self.zeros();
        scatter(self.c, 1.0, &mut out);
        out
    }

    /// Schur complement `M_ij = tr(A_i X A_j S⁻¹)`.
    fn schur(&self, x: &[RMat], sinv: &[RMat]) -> RMat {
        let m = self.m();
        let mut out = RMat::zeros(m, m);
        for (b, list) in self.full_by_block.iter().enumerate() {
            let n = self.blocks[b];
            let xb = &x[b];
            let sb = &sinv[b];
            let mut t = RMat::zeros(n, n);
            for (jj, (j, ej)) in list.iter().enumerate() {
                // t = X A_j S⁻¹ as a sum of rank-one terms over the rows of A_j.
                t.fill(0.0);
                let mut rows: alloc::collections::BTreeMap<usize, RowDVector<f64>> = Default::default();
                for &(r, s, v) in ej {
                    let row = rows.entry(r).or_insert_with(|| RowDVector::zeros(n));
                    *row += sb.row(s) * v;
                }
                for (r, row) in &rows {
                    t.ger(1.0, &xb.column(*r), &row.transpose(), 1.0);
                }
                for (i, ei) in &list[jj..] {
                    let val: f64 = ei.iter().map(|&(p, q, v)| v * t[(q, p)]).sum();
                    out[(*i, *j)] += val;
                    if i != j {
                        out[(*j, *i)] += val;
                    }
                }
            }
        }
        out
    }
}

struct Factors {
    sinv: Vec<RMat>,
    lx: Vec<RMat>,
    ls: Vec<RMat>,
}

fn factor(x: &[RMat], s: &[RMat]) -> Option<Factors> {
    let mut sinv = Vec::with_capacity(s.len());
    let mut lx = Vec::with_capacity(x.len());
    let mut ls = Vec::with_capacity(s.len());
    for (xb, sb) in x.iter().zip(s) {
        let cx = sym(xb).cholesky()?;
        let cs = sym(sb).cholesky()?;
        sinv.push(sym(&cs.inverse()));
        lx.push(cx.l());
        ls.push(cs.l());
    }
    Some(Factors { sinv, lx, ls })
}

/// Largest `α` with `L Lᵀ + α Δ ⪰ 0`, infinite if unbounded.
fn max_step(l: &RMat, delta: &RMat) -> f64 {
    let n = l.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let Some(a) = l.solve_lower_triangular(delta) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let w = sym(&w);
    let lo = w.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if lo >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lo
    }
}

struct Direction {
    dx: Vec<RMat>,
    ds: Vec<RMat>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

pub(crate) fn solve_real(p: &RealSdp, opts: &SdpOptions) -> RawSolution {
    let m_orig = p.rows.len();
    let pre = match presolve(p) {
        PresolveOutcome::Ready(pre) => pre,
        PresolveOutcome::Inconsistent(y, msg) => {
            let mut s: Vec<RMat> = p.blocks.iter().map(|&n| RMat::zeros(n, n)).collect();
            for (r, &v) in p.rows.iter().zip(&y) {
                if v != 0.0 {
                    scatter(r, -v, &mut s);
                }
            }
            return RawSolution {
                status: SdpStatus::Infeasible,
                x: p.blocks.iter().map(|&n| RMat::zeros(n, n)).collect(),
                s,
                y,
                pobj: f64::NAN,
                dobj: f64::NAN,
                pres: f64::NAN,
                dres: f64::NAN,
                gap: f64::NAN,
                iterations: 0,
                message: msg,
            };
        }
    };
    let w = Work::new(p, &pre);
    let m = w.m();
    let order: usize = p.blocks.iter().sum();
    let c = w.c_dense();
    let cnorm = frob(&c);
    let bnorm = norm(&w.b);

    let mut x: Vec<RMat> = p.blocks.iter().map(|&n| RMat::identity(n, n)).collect();
    let mut s = x.clone();
    let mut y = alloc::vec![0.0; m];
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut status = SdpStatus::IterationLimit;
    let mut message = String::new();
    let mut iterations = 0;
    let mut ray: Option<Vec<f64>> = None;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = w.a(&x);
        let aty = w.at(&y);
        let ep: Vec<f64> = ax.iter().zip(&w.b).map(|(a, b)| a - b * tau).collect();
        let ed: Vec<RMat> = (0..x.len()).map(|k| &c[k] * tau - &aty[k] - &s[k]).collect();
        let cx = inner(&c, &x);
        let by = dot(&w.b, &y);
        let eg = by - cx - kappa;
        let mu = (inner(&x, &s) + tau * kappa) / (order as f64 + 1.0);

        let pres = norm(&ep) / tau / (1.0 + bnorm);
        let dres = frob(&ed) / tau / (1.0 + cnorm);
        let pobj = cx / tau;
        let dobj = by / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pres <= opts.tol_feas && dres <= opts.tol_feas && gap <= opts.tol_gap {
            status = SdpStatus::Optimal;
            break;
        }
        if by > 0.0 && kappa > tau {
            let resid: Vec<RMat> = aty.iter().zip(&s).map(|(a, sk)| a + sk).collect();
            if frob(&resid) / by <= opts.tol_infeas {
                status = SdpStatus::Infeasible;
                ray = Some(y.iter().map(|v| v / by).collect());
                break;
            }
        }
        if cx < 0.0 && kappa > tau && norm(&ax) / (-cx) <= opts.tol_infeas {
            status = SdpStatus::Inaccurate;
            message = "dual infeasible (primal unbounded)".into();
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        let Some(f) = factor(&x, &s) else {
            status = SdpStatus::Inaccurate;
            message = format!("iterate lost definiteness at iteration {iter}");
            break;
        };
        let h = |v: &[RMat]| -> Vec<RMat> {
            v.iter().enumerate().map(|(k, vk)| sym(&(&x[k] * vk * &f.sinv[k]))).collect()
        };
        let mut schur = w.schur(&x, &f.sinv);
        let Some(chol) = (|| {
            if let Some(ch) = schur.clone().cholesky() {
                return Some(ch);
            }
            let reg = 1e-14 * (0..m).map(|i| schur[(i, i)]).fold(1.0, f64::max);
            for i in 0..m {
                schur[(i, i)] += reg;
            }
            schur.clone().cholesky()
        })() else {
            status = SdpStatus::Inaccurate;
            message = format!("Schur complement not positive definite at iteration {iter}");
            break;
        };
        let msolve = |v: &[f64]| -> Vec<f64> { chol.solve(&DVector::from_column_slice(v)).iter().copied().collect() };

        let hc = h(&c);
        let u = w.a(&hc);
        let c_hc = inner(&c, &hc);
        let bu: Vec<f64> = w.b.iter().zip(&u).map(|(b, u)| b + u).collect();
        let v2 = msolve(&bu);
        let b_minus_u: Vec<f64> = w.b.iter().zip(&u).map(|(b, u)| b - u).collect();
        let hed = h(&ed);
        let a_hed = w.a(&hed);
        let c_hed = inner(&c, &hed);
        let denom = dot(&b_minus_u, &v2) + c_hc + kappa / tau;

        let direction = |rc: &[RMat], eta: f64, comp: f64| -> Direction {
            let arc = w.a(rc);
            let rhs1: Vec<f64> = (0..m).map(|i| -eta * ep[i] - arc[i] + eta * a_hed[i]).collect();
            let v1 = msolve(&rhs1);
            let rhs3 = -eta * eg + inner(&c, rc) - eta * c_hed + comp / tau;
            let dtau = (rhs3 - dot(&b_minus_u, &v1)) / denom;
            let dy: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + dtau * b).collect();
            let atdy = w.at(&dy);
            let ds: Vec<RMat> = (0..x.len()).map(|k| &c[k] * dtau - &atdy[k] + &ed[k] * eta).collect();
            let hds = h(&ds);
            let dx: Vec<RMat> = rc.iter().zip(&hds).map(|(r, hd)| r - hd).collect();
            let dkappa = (comp - kappa * dtau) / tau;
            Direction { dx, ds, dy, dtau, dkappa }
        };
        let step_to_boundary = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for k in 0..x.len() {
                a = a.min(max_step(&f.lx[k], &d.dx[k]));
                a = a.min(max_step(&f.ls[k], &d.ds[k]));
            }
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let rc_aff: Vec<RMat> = x.iter().map(|xk| -xk).collect();
        let aff = direction(&rc_aff, 1.0, -tau * kappa);
        let alpha_aff = step_to_boundary(&aff).min(1.0);
        let mu_aff = {
            let xs: f64 = (0..x.len())
                .map(|k| (&x[k] + &aff.dx[k] * alpha_aff).dot(&(&s[k] + &aff.ds[k] * alpha_aff)))
                .sum();
            (xs + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa)) / (order as f64 + 1.0)
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rc: Vec<RMat> = (0..x.len())
            .map(|k| &f.sinv[k] * (sigma * mu) - &x[k] - sym(&(&aff.dx[k] * &aff.ds[k] * &f.sinv[k])))
            .collect();
        let comp = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = direction(&rc, 1.0 - sigma, comp);
        let alpha = (0.95 * step_to_boundary(&dir)).min(1.0);
        if alpha < 1e-10 {
            status = SdpStatus::Inaccurate;
            message = format!("step length collapsed at iteration {iter}");
            break;
        }
        for k in 0..x.len() {
            x[k] = sym(&(&x[k] + &dir.dx[k] * alpha));
            s[k] = sym(&(&s[k] + &dir.ds[k] * alpha));
        }
        for (yi, dyi) in y.iter_mut().zip(&dir.dy) {
            *yi += alpha * dyi;
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    // Map back to the original rows and un-homogenize.
    let mut y_full = alloc::vec![0.0; m_orig];
    let (xs, ss, ys) = match (&status, &ray) {
        (SdpStatus::Infeasible, Some(r)) => {
            let zero: Vec<RMat> = p.blocks.iter().map(|&n| RMat::zeros(n, n)).collect();
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            (zero, w.at(&neg), r.clone())
        }
        _ => {
            let xs: Vec<RMat> = x.iter().map(|m| m / tau).collect();
            let ss: Vec<RMat> = s.iter().map(|m| m / tau).collect();
            let ys: Vec<f64> = y.iter().map(|v| v / tau).collect();
            (xs, ss, ys)
        }
    };
    for (t, &r) in pre.keep.iter().enumerate() {
        y_full[r] = ys[t] * pre.scale[t];
    }
    let mut xs = xs;
    if status == SdpStatus::Optimal && opts.polish {
        polish(&w, &mut xs);
    }
    let ax = w.a(&xs);
    let pres = norm(&ax.iter().zip(&w.b).map(|(a, b)| a - b).collect::<Vec<_>>()) / (1.0 + bnorm);
    let aty = w.at(&ys);
    let dres = frob(&(0..xs.len()).map(|k| &c[k] - &aty[k] - &ss[k]).collect::<Vec<_>>()) / (1.0 + cnorm);
    let pobj = inner(&c, &xs);
    let dobj = dot(&w.b, &ys);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    RawSolution {
        status,
        x: xs,
        s: ss,
        y: y_full,
        pobj,
        dobj,
        pres,
        dres,
        gap,
        iterations,
        message,
    }
}

/// Minimal-norm correction `X ← X + Aᵀ(AAᵀ)⁻¹(b − A X)`, kept only if it
/// does not reduce the smallest eigenvalue below zero.
fn polish(w: &Work<'_>, x: &mut [RMat]) {
    let m = w.m();
    if m == 0 {
        return;
    }
    let idx: Vec<usize> = (0..m).collect();
    let ones = alloc::vec![1.0; m];
    let fake = RealSdp { blocks: w.blocks.to_vec(), rows: w.rows.clone(), b: w.b.clone(), c: Vec::new() };
    let k = gram_of_rows(&fake, &idx, &ones);
    let Some(chol) = k.cholesky() else { return };
    for _ in 0..2 {
        let r: Vec<f64> = w.a(x).iter().zip(&w.b).map(|(a, b)| b - a).collect();
        let z = chol.solve(&DVector::from_column_slice(&r));
        let corr = w.at(z.as_slice());
        let cand: Vec<RMat> = x.iter().zip(&corr).map(|(a, b)| a + b).collect();
        let before = x.iter().map(min_eig).fold(f64::INFINITY, f64::min);
        let after = cand.iter().map(min_eig).fold(f64::INFINITY, f64::min);
        if after >= 0.0 || after >= before {
            x.clone_from_slice(&cand);
        } else {
            return;
        }
    }
}

fn min_eig(m: &RMat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym(m).symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b))
}
