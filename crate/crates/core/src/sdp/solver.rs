//! Infeasible-start primal-dual path-following method.
//!
//! The program is brought to the standard form
//!
//! ```text
//! minimize  <C, X> + c.x
//! s.t.      <A_k, X> + a_k.x = b_k,   X PSD, x >= 0
//! ```
//!
//! with inequalities turned into equalities on extra nonnegative slacks, and
//! every row scaled to unit norm. Each iteration solves the Schur-complement
//! system of the HKM direction twice (Mehrotra predictor, then corrector).
//! Rank-one constraint matrices `s |v><v|` are kept as vectors so the Schur
//! complement among them costs `O(m^2 d)` instead of `O(m^2 d^2)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::program::{BlockCoefficient, ConicProgram, Sense};
use crate::error::{Error, Result};
use crate::linalg::{hs_inner, symmetrize, ComplexMatrix, HermitianMatrix, C64};

/// Direction family and step rule, recorded in experiment metadata.
pub const SEARCH_DIRECTION: &str = "HKM, Mehrotra predictor-corrector, infeasible start";

/// Iterations without halving the merit `max(pres/ftol, dres/ftol, gap/gtol)`
/// after which the solve is abandoned as stalled. A stall reports
/// `MaxIterations` (tolerances unmet) with the best iterate seen;
/// `NumericalFailure` is kept for singular Newton systems.
const STALL_ITERATIONS: usize = 20;
const NEIGHBORHOOD: f64 = 1e-2;
const BACKTRACKS: usize = 30;
const PROGRESS_FACTOR: f64 = 0.5;

/// Dual objective beyond which a dual ray is tested as an infeasibility certificate.
const DIVERGENCE: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iters: 200,
            step_fraction: 0.99,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gap_tol > 0.0
            && self.feas_tol > 0.0
            && self.max_iters > 0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "invalid solver settings {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `<X, Z> + x.z`
    pub complementarity: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

/// Primal and dual answer of [`solve`].
///
/// `dual` holds one multiplier per constraint, equalities first, in the sign
/// convention of the Lagrangian `obj - sum y_k (f_k - rhs_k)`: nonnegative for
/// `>=` rows and nonpositive for `<=` rows at optimality. On
/// `PrimalInfeasible` it holds a Farkas ray `y` with `sum y_k rhs_k = 1`; on
/// `DualInfeasible` the primal fields hold a normalized improving ray.
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub psd: ComplexMatrix,
    pub nonneg: Vec<f64>,
    pub dual: Vec<f64>,
    /// Nonnegative slack of each inequality, `|f - rhs|`.
    pub slacks: Vec<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    /// `|pobj - dobj| / (1 + |pobj| + |dobj|)`
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub history: Vec<IterationLog>,
}

/// Normalized standard form of a [`ConicProgram`].
struct StandardForm {
    d: usize,
    n: usize,
    n_user: usize,
    m: usize,
    n_constraints: usize,
    /// Original constraint index of each kept row.
    origin: Vec<usize>,
    row_norm: Vec<f64>,
    dense: Vec<(usize, ComplexMatrix)>,
    /// Rank-one vectors as columns, with their scales and rows.
    v: ComplexMatrix,
    v_scale: Vec<f64>,
    v_row: Vec<usize>,
    nn_rows: Vec<Vec<(usize, f64)>>,
    nn_cols: Vec<Vec<(usize, f64)>>,
    b: DVector<f64>,
    c_mat: ComplexMatrix,
    c_vec: DVector<f64>,
}

enum Presolve {
    Ready(Box<StandardForm>),
    Infeasible(Vec<f64>),
}

impl StandardForm {
    fn build(p: &ConicProgram) -> Presolve {
        let d = p.psd_dim;
        let n_user = p.nonneg_count;
        let n = n_user + p.inequalities.len();
        let n_constraints = p.num_constraints();

        struct RawRow {
            block: Option<BlockCoefficient>,
            nn: Vec<(usize, f64)>,
            rhs: f64,
        }
        let mut raw: Vec<RawRow> = Vec::with_capacity(n_constraints);
        for e in &p.equalities {
            raw.push(RawRow {
                block: e.functional.psd.clone(),
                nn: merge_sparse(&e.functional.nonneg),
                rhs: e.rhs,
            });
        }
        for (k, ineq) in p.inequalities.iter().enumerate() {
            let mut nn = merge_sparse(&ineq.functional.nonneg);
            let slack_coef = match ineq.sense {
                Sense::GreaterEq => -1.0,
                Sense::LessEq => 1.0,
            };
            nn.push((n_user + k, slack_coef));
            raw.push(RawRow {
                block: ineq.functional.psd.clone(),
                nn,
                rhs: ineq.rhs,
            });
        }

        let norms: Vec<f64> = raw
            .iter()
            .map(|r| {
                let blk = r.block.as_ref().map_or(0.0, |a| a.frobenius_norm());
                (blk * blk + r.nn.iter().map(|(_, a)| a * a).sum::<f64>()).sqrt()
            })
            .collect();

        // A nonnegative variable used by exactly one row makes that row
        // independent of all others; only the remaining rows need checking.
        let mut uses = vec![0usize; n];
        for r in &raw {
            for &(j, a) in &r.nn {
                if a != 0.0 {
                    uses[j] += 1;
                }
            }
        }
        let has_private: Vec<bool> = raw
            .iter()
            .map(|r| r.nn.iter().any(|&(j, a)| a != 0.0 && uses[j] == 1))
            .collect();

        let mut dropped = vec![false; raw.len()];
        for (k, r) in raw.iter().enumerate() {
            if norms[k] == 0.0 {
                if r.rhs.abs() > 0.0 {
                    let mut y = vec![0.0; n_constraints];
                    y[k] = 1.0 / r.rhs;
                    return Presolve::Infeasible(y);
                }
                dropped[k] = true;
            }
        }
        let candidates: Vec<usize> = (0..raw.len())
            .filter(|&k| !has_private[k] && !dropped[k])
            .collect();
        if candidates.len() > 1 {
            let dense_blocks: Vec<Option<ComplexMatrix>> = candidates
                .iter()
                .map(|&k| raw[k].block.as_ref().map(|a| a.to_dense()))
                .collect();
            let q = candidates.len();
            let gram = DMatrix::from_fn(q, q, |i, j| {
                let (ri, rj) = (&raw[candidates[i]], &raw[candidates[j]]);
                let blk = match (&dense_blocks[i], &dense_blocks[j]) {
                    (Some(a), Some(b)) => hs_inner(a, b),
                    _ => 0.0,
                };
                let nn: f64 = ri
                    .nn
                    .iter()
                    .map(|&(a, x)| {
                        rj.nn
                            .iter()
                            .filter(|(b, _)| *b == a)
                            .map(|(_, y)| x * y)
                            .sum::<f64>()
                    })
                    .sum();
                (blk + nn) / (norms[candidates[i]] * norms[candidates[j]])
            });
            let rhs: Vec<f64> = candidates.iter().map(|&k| raw[k].rhs / norms[k]).collect();
            let (basis, dependent) = pivoted_independent_set(&gram, 1e-10);
            if !dependent.is_empty() {
                let g_bb =
                    DMatrix::from_fn(basis.len(), basis.len(), |i, j| gram[(basis[i], basis[j])]);
                let chol = Cholesky::new(g_bb);
                for &r in &dependent {
                    let g_br = DVector::from_fn(basis.len(), |i, _| gram[(basis[i], r)]);
                    let w = chol
                        .as_ref()
                        .map_or_else(|| DVector::zeros(basis.len()), |c| c.solve(&g_br));
                    let predicted: f64 =
                        basis.iter().zip(w.iter()).map(|(&i, wi)| wi * rhs[i]).sum();
                    let mismatch = rhs[r] - predicted;
                    let scale = 1.0
                        + w.iter().map(|x| x.abs()).sum::<f64>()
                            * rhs.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                    if mismatch.abs() > 1e-8 * scale {
                        let mut y = vec![0.0; n_constraints];
                        let kr = candidates[r];
                        y[kr] = 1.0 / (norms[kr] * mismatch);
                        for (&i, wi) in basis.iter().zip(w.iter()) {
                            let ki = candidates[i];
                            y[ki] = -wi / (norms[ki] * mismatch);
                        }
                        return Presolve::Infeasible(y);
                    }
                    dropped[candidates[r]] = true;
                }
            }
        }

        let mut sf = StandardForm {
            d,
            n,
            n_user,
            m: 0,
            n_constraints,
            origin: Vec::new(),
            row_norm: Vec::new(),
            dense: Vec::new(),
            v: ComplexMatrix::zeros(d, 0),
            v_scale: Vec::new(),
            v_row: Vec::new(),
            nn_rows: Vec::new(),
            nn_cols: vec![Vec::new(); n],
            b: DVector::zeros(0),
            c_mat: p
                .objective
                .psd
                .as_ref()
                .map_or_else(|| ComplexMatrix::zeros(d, d), |a| a.to_dense()),
            c_vec: DVector::zeros(n),
        };
        for &(j, a) in &p.objective.nonneg {
            sf.c_vec[j] += a;
        }

        let mut rank_one_vectors = Vec::new();
        let mut b = Vec::new();
        for (k, r) in raw.into_iter().enumerate() {
            if dropped[k] {
                continue;
            }
            let row = sf.origin.len();
            let s = norms[k];
            sf.origin.push(k);
            sf.row_norm.push(s);
            b.push(r.rhs / s);
            match r.block {
                None => {}
                Some(BlockCoefficient::Dense(a)) => sf.dense.push((row, a / C64::new(s, 0.0))),
                Some(BlockCoefficient::RankOne { vector, scale }) => {
                    rank_one_vectors.push(vector);
                    sf.v_scale.push(scale / s);
                    sf.v_row.push(row);
                }
            }
            let nn: Vec<(usize, f64)> = r.nn.iter().map(|&(j, a)| (j, a / s)).collect();
            for &(j, a) in &nn {
                sf.nn_cols[j].push((row, a));
            }
            sf.nn_rows.push(nn);
        }
        sf.m = sf.origin.len();
        sf.b = DVector::from_vec(b);
        if !rank_one_vectors.is_empty() {
            sf.v = ComplexMatrix::from_columns(&rank_one_vectors);
        }
        Presolve::Ready(Box::new(sf))
    }

    fn has_block(&self) -> bool {
        self.d > 0
    }

    /// `<A_k, X> + a_k.x` for Hermitian `X`.
    fn apply(&self, x_mat: &ComplexMatrix, x_vec: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        if self.has_block() {
            if self.v.ncols() > 0 {
                let xv = x_mat * &self.v;
                for (j, (&row, &s)) in self.v_row.iter().zip(&self.v_scale).enumerate() {
                    out[row] += s * self.v.column(j).dotc(&xv.column(j)).re;
                }
            }
            for (row, a) in &self.dense {
                out[*row] += hs_inner(a, x_mat);
            }
        }
        for (row, nn) in self.nn_rows.iter().enumerate() {
            out[row] += nn.iter().map(|&(j, a)| a * x_vec[j]).sum::<f64>();
        }
        out
    }

    /// `sum_k y_k (A_k, a_k)`.
    fn adjoint(&self, y: &DVector<f64>) -> (ComplexMatrix, DVector<f64>) {
        let mut mat = ComplexMatrix::zeros(self.d, self.d);
        if self.has_block() {
            if self.v.ncols() > 0 {
                let mut weighted = self.v.clone();
                for (j, (&row, &s)) in self.v_row.iter().zip(&self.v_scale).enumerate() {
                    weighted.column_mut(j).scale_mut(s * y[row]);
                }
                mat += weighted * self.v.adjoint();
            }
            for (row, a) in &self.dense {
                mat += a * C64::new(y[*row], 0.0);
            }
            mat = symmetrize(&mat);
        }
        let mut vec = DVector::zeros(self.n);
        for (j, col) in self.nn_cols.iter().enumerate() {
            vec[j] = col.iter().map(|&(row, a)| a * y[row]).sum();
        }
        (mat, vec)
    }

    /// Schur complement `M_kl = Re Tr(A_k X A_l Z^-1) + sum_j a_kj (x_j/z_j) a_lj`.
    fn schur(
        &self,
        x_mat: &ComplexMatrix,
        z_inv: &ComplexMatrix,
        ratio: &DVector<f64>,
    ) -> DMatrix<f64> {
        let m = self.m;
        let mut out = DMatrix::zeros(m, m);
        if self.has_block() {
            let r = self.v.ncols();
            let (xv, zv) = if r > 0 {
                (x_mat * &self.v, z_inv * &self.v)
            } else {
                (
                    ComplexMatrix::zeros(self.d, 0),
                    ComplexMatrix::zeros(self.d, 0),
                )
            };
            if r > 0 {
                let g1 = self.v.adjoint() * &xv;
                let g2 = self.v.adjoint() * &zv;
                for i in 0..r {
                    for j in i..r {
                        let val =
                            self.v_scale[i] * self.v_scale[j] * (g1[(i, j)] * g2[(i, j)].conj()).re;
                        let (ri, rj) = (self.v_row[i], self.v_row[j]);
                        out[(ri, rj)] += val;
                        if ri != rj {
                            out[(rj, ri)] += val;
                        } else if i != j {
                            out[(ri, rj)] += val;
                        }
                    }
                }
            }
            for (k, (row_k, a_k)) in self.dense.iter().enumerate() {
                let bmat = z_inv * a_k * x_mat;
                if r > 0 {
                    let bv = &bmat * &self.v;
                    for j in 0..r {
                        let val = self.v_scale[j] * self.v.column(j).dotc(&bv.column(j)).re;
                        let rj = self.v_row[j];
                        out[(*row_k, rj)] += val;
                        out[(rj, *row_k)] += val;
                    }
                }
                for (row_l, a_l) in self.dense.iter().skip(k) {
                    let val = hs_inner(a_l, &bmat);
                    out[(*row_k, *row_l)] += val;
                    if row_k != row_l {
                        out[(*row_l, *row_k)] += val;
                    }
                }
            }
        }
        for (j, col) in self.nn_cols.iter().enumerate() {
            let w = ratio[j];
            for &(r1, a1) in col {
                for &(r2, a2) in col {
                    out[(r1, r2)] += w * a1 * a2;
                }
            }
        }
        out
    }
}

fn merge_sparse(entries: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for &(j, a) in entries {
        match out.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += a,
            None => out.push((j, a)),
        }
    }
    out
}

/// Diagonal-pivoted Cholesky on a Gram matrix; returns `(independent, dependent)`.
fn pivoted_independent_set(gram: &DMatrix<f64>, tol: f64) -> (Vec<usize>, Vec<usize>) {
    let q = gram.nrows();
    let mut residual: Vec<f64> = (0..q).map(|i| gram[(i, i)]).collect();
    let mut l = DMatrix::<f64>::zeros(q, q);
    let mut chosen: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..q).collect();
    let scale = residual
        .iter()
        .fold(0.0_f64, |a, &x| a.max(x))
        .max(f64::MIN_POSITIVE);
    while !remaining.is_empty() {
        let (pos, &piv) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| residual[*a.1].total_cmp(&residual[*b.1]))
            .unwrap();
        if residual[piv] <= tol * scale {
            break;
        }
        remaining.swap_remove(pos);
        let k = chosen.len();
        let pivot = residual[piv].sqrt();
        l[(piv, k)] = pivot;
        for &i in &remaining {
            let mut s = gram[(i, piv)];
            for t in 0..k {
                s -= l[(i, t)] * l[(piv, t)];
            }
            l[(i, k)] = s / pivot;
            residual[i] -= l[(i, k)] * l[(i, k)];
        }
        chosen.push(piv);
    }
    chosen.sort_unstable();
    remaining.sort_unstable();
    (chosen, remaining)
}

#[derive(Clone)]
struct Iterate {
    x_mat: ComplexMatrix,
    x_vec: DVector<f64>,
    y: DVector<f64>,
    z_mat: ComplexMatrix,
    z_vec: DVector<f64>,
}

struct Direction {
    dx_mat: ComplexMatrix,
    dx_vec: DVector<f64>,
    dy: DVector<f64>,
    dz_mat: ComplexMatrix,
    dz_vec: DVector<f64>,
}

struct Residuals {
    r_p: DVector<f64>,
    r_dmat: ComplexMatrix,
    r_dvec: DVector<f64>,
    pobj: f64,
    dobj: f64,
    compl: f64,
    pres: f64,
    dres: f64,
    gap: f64,
}

fn inverse_hpd(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    Cholesky::new(m.clone()).map(|c| symmetrize(&c.inverse()))
}

/// Largest `t` with `X + t dX` PSD (infinite if `dX` is PSD).
fn max_step_psd(x: &ComplexMatrix, dx: &ComplexMatrix) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(chol) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = chol.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&t.adjoint()) else {
        return 0.0;
    };
    let lmin = HermitianMatrix::from_symmetrized(&w).min_eigenvalue();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_orthant(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Engine<'a> {
    sf: &'a StandardForm,
    b_norm: f64,
    c_norm: f64,
}

impl Engine<'_> {
    fn residuals(&self, it: &Iterate) -> Residuals {
        let sf = self.sf;
        let r_p = &sf.b - sf.apply(&it.x_mat, &it.x_vec);
        let (aty_mat, aty_vec) = sf.adjoint(&it.y);
        let r_dmat = &sf.c_mat - &it.z_mat - aty_mat;
        let r_dvec = &sf.c_vec - &it.z_vec - aty_vec;
        let pobj = hs_inner(&sf.c_mat, &it.x_mat) + sf.c_vec.dot(&it.x_vec);
        let dobj = sf.b.dot(&it.y);
        let compl = hs_inner(&it.x_mat, &it.z_mat) + it.x_vec.dot(&it.z_vec);
        let pres = r_p.norm() / (1.0 + self.b_norm);
        let dres = (r_dmat.norm_squared() + r_dvec.norm_squared()).sqrt() / (1.0 + self.c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        Residuals {
            r_p,
            r_dmat,
            r_dvec,
            pobj,
            dobj,
            compl,
            pres,
            dres,
            gap,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        z_inv: &ComplexMatrix,
        chol: &Cholesky<f64, Dyn>,
        res: &Residuals,
        sigma_mu: f64,
        corrector: Option<&Direction>,
    ) -> Direction {
        let sf = self.sf;
        let mut g = z_inv * C64::new(sigma_mu, 0.0) - &it.x_mat;
        let mut g_vec = DVector::from_fn(sf.n, |j, _| sigma_mu / it.z_vec[j] - it.x_vec[j]);
        if let Some(c) = corrector {
            g -= &c.dx_mat * &c.dz_mat * z_inv;
            for j in 0..sf.n {
                g_vec[j] -= c.dx_vec[j] * c.dz_vec[j] / it.z_vec[j];
            }
        }
        let ratio = DVector::from_fn(sf.n, |j, _| it.x_vec[j] / it.z_vec[j]);

        let t = &g - &it.x_mat * &res.r_dmat * z_inv;
        let t_vec = DVector::from_fn(sf.n, |j, _| g_vec[j] - ratio[j] * res.r_dvec[j]);
        let rhs = &res.r_p - sf.apply(&symmetrize(&t), &t_vec);
        let dy = chol.solve(&rhs);

        let (aty_mat, aty_vec) = sf.adjoint(&dy);
        let dz_mat = &res.r_dmat - aty_mat;
        let dz_vec = &res.r_dvec - aty_vec;
        let dx_mat = symmetrize(&(g - &it.x_mat * &dz_mat * z_inv));
        let dx_vec = DVector::from_fn(sf.n, |j, _| g_vec[j] - ratio[j] * dz_vec[j]);
        Direction {
            dx_mat,
            dx_vec,
            dy,
            dz_mat,
            dz_vec,
        }
    }

    fn step_lengths(&self, it: &Iterate, dir: &Direction) -> (f64, f64) {
        let ap = max_step_psd(&it.x_mat, &dir.dx_mat).min(max_step_orthant(&it.x_vec, &dir.dx_vec));
        let ad = max_step_psd(&it.z_mat, &dir.dz_mat).min(max_step_orthant(&it.z_vec, &dir.dz_vec));
        (ap, ad)
    }
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let max_diag = (0..n)
        .map(|i| m[(i, i)])
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14 * max_diag;
    for _ in 0..8 {
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(m.clone()) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

/// Solves a conic program; see the module documentation for the method.
pub fn solve(p: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution> {
    p.validate()?;
    settings.validate()?;
    let sf = match StandardForm::build(p) {
        Presolve::Ready(sf) => *sf,
        Presolve::Infeasible(y) => return Ok(infeasible_from_presolve(p, y)),
    };
    let d = sf.d;
    let nu = (d + sf.n) as f64;
    let engine = Engine {
        sf: &sf,
        b_norm: sf.b.norm(),
        c_norm: (sf.c_mat.norm_squared() + sf.c_vec.norm_squared()).sqrt(),
    };

    let a_max = 1.0_f64;
    let b_ratio =
        sf.b.iter()
            .map(|b| (1.0 + b.abs()) / (1.0 + a_max))
            .fold(0.0_f64, f64::max);
    let dim_scale = (d.max(1) as f64).sqrt();
    let xi = 10f64.max(dim_scale).max(d.max(1) as f64 * b_ratio);
    let eta = 10f64.max(dim_scale).max(engine.c_norm).max(a_max);
    let mut it = Iterate {
        x_mat: ComplexMatrix::identity(d, d) * C64::new(xi, 0.0),
        x_vec: DVector::from_element(sf.n, xi),
        y: DVector::zeros(sf.m),
        z_mat: ComplexMatrix::identity(d, d) * C64::new(eta, 0.0),
        z_vec: DVector::from_element(sf.n, eta),
    };

    let mut history = Vec::new();
    let mut best: Option<(f64, Iterate)> = None;
    let mut status = SolveStatus::MaxIterations;
    let mut stalled = 0;
    let mut since_progress = 0;
    let mut iterations = 0;

    loop {
        let res = engine.residuals(&it);
        let merit = (res.pres / settings.feas_tol)
            .max(res.dres / settings.feas_tol)
            .max(res.gap / settings.gap_tol);
        match &best {
            Some((m, _)) if merit >= *m => since_progress += 1,
            Some((m, _)) => {
                if merit < PROGRESS_FACTOR * m {
                    since_progress = 0;
                } else {
                    since_progress += 1;
                }
                best = Some((merit, it.clone()));
            }
            None => best = Some((merit, it.clone())),
        }
        if res.pres <= settings.feas_tol
            && res.dres <= settings.feas_tol
            && res.gap <= settings.gap_tol
        {
            status = SolveStatus::Optimal;
            history.push(log_entry(iterations, &res, f64::NAN, f64::NAN));
            break;
        }
        // Farkas-type rays: b.y > 0 with A*y + Z ~ 0, or <C,X> < 0 with A(X) ~ 0
        if res.dobj > 0.0 {
            let ray = ((&sf.c_mat - &res.r_dmat).norm_squared()
                + (&sf.c_vec - &res.r_dvec).norm_squared())
            .sqrt();
            if (res.dobj > DIVERGENCE || ray / res.dobj < settings.feas_tol)
                && ray / res.dobj < settings.feas_tol * 1e2
            {
                status = SolveStatus::PrimalInfeasible;
                best = Some((0.0, it.clone()));
                history.push(log_entry(iterations, &res, f64::NAN, f64::NAN));
                break;
            }
        }
        if res.pobj < 0.0 {
            let ray = (&sf.b - &res.r_p).norm();
            if (-res.pobj > DIVERGENCE || ray / -res.pobj < settings.feas_tol)
                && ray / -res.pobj < settings.feas_tol * 1e2
            {
                status = SolveStatus::DualInfeasible;
                best = Some((0.0, it.clone()));
                history.push(log_entry(iterations, &res, f64::NAN, f64::NAN));
                break;
            }
        }
        if since_progress >= STALL_ITERATIONS {
            status = SolveStatus::MaxIterations;
            break;
        }
        if iterations >= settings.max_iters {
            history.push(log_entry(iterations, &res, f64::NAN, f64::NAN));
            break;
        }

        let Some(z_inv) = inverse_hpd(&it.z_mat) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ratio = DVector::from_fn(sf.n, |j, _| it.x_vec[j] / it.z_vec[j]);
        let Some(chol) = factor_schur(sf.schur(&it.x_mat, &z_inv, &ratio)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mu = res.compl / nu;

        let predictor = engine.direction(&it, &z_inv, &chol, &res, 0.0, None);
        let (ap, ad) = engine.step_lengths(&it, &predictor);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff = &it.x_mat + &predictor.dx_mat * C64::new(ap, 0.0);
        let z_aff = &it.z_mat + &predictor.dz_mat * C64::new(ad, 0.0);
        let mu_aff = (hs_inner(&x_aff, &z_aff)
            + (&it.x_vec + &predictor.dx_vec * ap).dot(&(&it.z_vec + &predictor.dz_vec * ad)))
            / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let dir = engine.direction(&it, &z_inv, &chol, &res, sigma * mu, Some(&predictor));
        let (ap, ad) = engine.step_lengths(&it, &dir);
        let mut ap = (settings.step_fraction * ap).min(1.0);
        let mut ad = (settings.step_fraction * ad).min(1.0);
        // keep the iterate inside a wide neighborhood of the central path
        for _ in 0..BACKTRACKS {
            if centrality(&it, &dir, ap, ad, nu) >= NEIGHBORHOOD {
                break;
            }
            ap *= 0.8;
            ad *= 0.8;
        }
        history.push(log_entry(iterations, &res, ap, ad));

        it.x_mat = symmetrize(&(&it.x_mat + &dir.dx_mat * C64::new(ap, 0.0)));
        it.x_vec += &dir.dx_vec * ap;
        it.y += &dir.dy * ad;
        it.z_mat = symmetrize(&(&it.z_mat + &dir.dz_mat * C64::new(ad, 0.0)));
        it.z_vec += &dir.dz_vec * ad;
        iterations += 1;

        if ap.max(ad) < 1e-9 {
            stalled += 1;
            if stalled >= 3 {
                status = SolveStatus::MaxIterations;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let final_it = match status {
        SolveStatus::Optimal | SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => it,
        _ => best.map(|(_, b)| b).unwrap_or(it),
    };
    let res = engine.residuals(&final_it);
    if matches!(
        status,
        SolveStatus::NumericalFailure | SolveStatus::MaxIterations
    ) && res.pres <= settings.feas_tol
        && res.dres <= settings.feas_tol
        && res.gap <= settings.gap_tol
    {
        status = SolveStatus::Optimal;
    }
    Ok(assemble_solution(
        p, &sf, status, final_it, &res, iterations, history,
    ))
}

/// `min eig(X Z) / mu` at the trial point.
fn centrality(it: &Iterate, dir: &Direction, ap: f64, ad: f64, nu: f64) -> f64 {
    let x = symmetrize(&(&it.x_mat + &dir.dx_mat * C64::new(ap, 0.0)));
    let z = symmetrize(&(&it.z_mat + &dir.dz_mat * C64::new(ad, 0.0)));
    let xv = &it.x_vec + &dir.dx_vec * ap;
    let zv = &it.z_vec + &dir.dz_vec * ad;
    let mu = (hs_inner(&x, &z) + xv.dot(&zv)) / nu;
    if mu <= 0.0 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    if x.nrows() > 0 {
        let Some(c) = Cholesky::new(x) else {
            return 0.0;
        };
        let l = c.l();
        let w = l.adjoint() * z * &l;
        lo = HermitianMatrix::from_symmetrized(&w).min_eigenvalue();
    }
    for j in 0..xv.len() {
        lo = lo.min(xv[j] * zv[j]);
    }
    lo / mu
}

fn log_entry(iteration: usize, res: &Residuals, ap: f64, ad: f64) -> IterationLog {
    IterationLog {
        iteration,
        primal_objective: res.pobj,
        dual_objective: res.dobj,
        complementarity: res.compl,
        primal_residual: res.pres,
        dual_residual: res.dres,
        primal_step: ap,
        dual_step: ad,
    }
}

fn assemble_solution(
    p: &ConicProgram,
    sf: &StandardForm,
    status: SolveStatus,
    it: Iterate,
    res: &Residuals,
    iterations: usize,
    history: Vec<IterationLog>,
) -> ConicSolution {
    let mut dual = vec![0.0; sf.n_constraints];
    for (row, (&k, &s)) in sf.origin.iter().zip(&sf.row_norm).enumerate() {
        dual[k] = it.y[row] / s;
    }
    let mut psd = it.x_mat;
    let mut x_vec = it.x_vec;
    let (mut pobj, mut dobj) = (res.pobj, res.dobj);
    match status {
        SolveStatus::PrimalInfeasible => {
            let scale = res.dobj;
            dual.iter_mut().for_each(|y| *y /= scale);
            dobj = 1.0;
        }
        SolveStatus::DualInfeasible => {
            let scale = -res.pobj;
            psd /= C64::new(scale, 0.0);
            x_vec /= scale;
            pobj = -1.0;
        }
        _ => {}
    }
    let slacks = x_vec.as_slice()[sf.n_user..].to_vec();
    debug_assert_eq!(slacks.len(), p.inequalities.len());
    ConicSolution {
        status,
        psd: symmetrize(&psd),
        nonneg: x_vec.as_slice()[..sf.n_user].to_vec(),
        dual,
        slacks,
        objective_value: pobj,
        dual_objective: dobj,
        gap: res.gap,
        primal_residual: res.pres,
        dual_residual: res.dres,
        iterations,
        history,
    }
}

fn infeasible_from_presolve(p: &ConicProgram, y: Vec<f64>) -> ConicSolution {
    let dobj: f64 = p.constraint_rhs().zip(&y).map(|(b, y)| b * y).sum();
    ConicSolution {
        status: SolveStatus::PrimalInfeasible,
        psd: ComplexMatrix::zeros(p.psd_dim, p.psd_dim),
        nonneg: vec![0.0; p.nonneg_count],
        dual: y,
        slacks: vec![0.0; p.inequalities.len()],
        objective_value: f64::NAN,
        dual_objective: dobj,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: 0,
        history: Vec::new(),
    }
}
