use serde::{Deserialize, Serialize};

use super::program::{ConicProgram, Sense};
use super::solver::ConicSolution;
use crate::linalg::{hs_inner, ComplexMatrix, HermitianMatrix, C64};

/// Relative optimality residuals recomputed from the program alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

fn negative_part_norm(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    HermitianMatrix::from_symmetrized(m)
        .eig()
        .values
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| l * l)
        .sum::<f64>()
        .sqrt()
}

/// Primal feasibility, dual feasibility and duality gap of `sol` for `p`.
///
/// Nothing from the solver's internal state is reused: the dual slack is
/// rebuilt as `C - sum y_k A_k` and cone memberships are checked through
/// eigenvalues.
pub fn kkt_residuals(p: &ConicProgram, sol: &ConicSolution) -> KktResiduals {
    let d = p.psd_dim;
    let x_block = &sol.psd;
    let x_vec = &sol.nonneg;

    let mut primal_sq = 0.0;
    for e in &p.equalities {
        primal_sq += (e.functional.evaluate(x_block, x_vec) - e.rhs).powi(2);
    }
    for ineq in &p.inequalities {
        let f = ineq.functional.evaluate(x_block, x_vec);
        let viol = match ineq.sense {
            Sense::GreaterEq => (ineq.rhs - f).max(0.0),
            Sense::LessEq => (f - ineq.rhs).max(0.0),
        };
        primal_sq += viol * viol;
    }
    primal_sq += negative_part_norm(x_block).powi(2);
    primal_sq += x_vec.iter().map(|x| x.min(0.0).powi(2)).sum::<f64>();
    let b_norm = p.constraint_rhs().map(|b| b * b).sum::<f64>().sqrt();

    let c_mat = p
        .objective
        .psd
        .as_ref()
        .map_or_else(|| ComplexMatrix::zeros(d, d), |a| a.to_dense());
    let mut c_vec = vec![0.0; p.nonneg_count];
    for &(j, a) in &p.objective.nonneg {
        c_vec[j] += a;
    }
    let mut z_mat = c_mat.clone();
    let mut z_vec = c_vec.clone();
    let mut dual_sq = 0.0;
    for (k, (f, &y)) in p.constraint_functionals().zip(&sol.dual).enumerate() {
        if let Some(a) = &f.psd {
            z_mat -= a.to_dense() * C64::new(y, 0.0);
        }
        for &(j, a) in &f.nonneg {
            z_vec[j] -= a * y;
        }
        if k >= p.equalities.len() {
            let viol = match p.inequalities[k - p.equalities.len()].sense {
                Sense::GreaterEq => y.min(0.0),
                Sense::LessEq => y.max(0.0),
            };
            dual_sq += viol * viol;
        }
    }
    dual_sq += negative_part_norm(&z_mat).powi(2);
    dual_sq += z_vec.iter().map(|z| z.min(0.0).powi(2)).sum::<f64>();
    let c_norm = (c_mat.norm_squared() + c_vec.iter().map(|c| c * c).sum::<f64>()).sqrt();

    let pobj = hs_inner(&c_mat, x_block) + c_vec.iter().zip(x_vec).map(|(c, x)| c * x).sum::<f64>();
    let dobj: f64 = p.constraint_rhs().zip(&sol.dual).map(|(b, y)| b * y).sum();

    KktResiduals {
        primal: primal_sq.sqrt() / (1.0 + b_norm),
        dual: dual_sq.sqrt() / (1.0 + c_norm),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
    }
}
