use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{
    hermiticity_error, hs_inner, max_abs, outer, ComplexMatrix, ComplexVector, C64,
};

/// Coefficient of a linear functional on the Hermitian block.
#[derive(Clone, Debug)]
pub enum BlockCoefficient {
    /// A Hermitian matrix `A`, contributing `Tr(A X)`.
    Dense(ComplexMatrix),
    /// `scale |v><v|`, contributing `scale <v|X|v>`.
    RankOne { vector: ComplexVector, scale: f64 },
}

impl BlockCoefficient {
    pub fn to_dense(&self) -> ComplexMatrix {
        match self {
            BlockCoefficient::Dense(m) => m.clone(),
            BlockCoefficient::RankOne { vector, scale } => outer(vector) * C64::new(*scale, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BlockCoefficient::Dense(m) => m.nrows(),
            BlockCoefficient::RankOne { vector, .. } => vector.len(),
        }
    }

    /// `Tr(A X)` for Hermitian `X`.
    pub fn apply(&self, x: &ComplexMatrix) -> f64 {
        match self {
            BlockCoefficient::Dense(m) => hs_inner(m, x),
            BlockCoefficient::RankOne { vector, scale } => scale * vector.dotc(&(x * vector)).re,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            BlockCoefficient::Dense(m) => m.norm(),
            BlockCoefficient::RankOne { vector, scale } => scale.abs() * vector.norm_squared(),
        }
    }
}

/// `Tr(A X) + sum_j a_j x_j` over the Hermitian block `X` and the orthant `x`.
#[derive(Clone, Debug, Default)]
pub struct LinearFunctional {
    pub psd: Option<BlockCoefficient>,
    /// Sparse `(index, coefficient)` pairs on the nonnegative variables.
    pub nonneg: Vec<(usize, f64)>,
}

impl LinearFunctional {
    pub fn new(psd: Option<BlockCoefficient>, nonneg: Vec<(usize, f64)>) -> Self {
        Self { psd, nonneg }
    }

    pub fn evaluate(&self, x_block: &ComplexMatrix, x_vec: &[f64]) -> f64 {
        let block = self.psd.as_ref().map_or(0.0, |a| a.apply(x_block));
        block + self.nonneg.iter().map(|&(j, a)| a * x_vec[j]).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    GreaterEq,
    LessEq,
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub functional: LinearFunctional,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct Inequality {
    pub functional: LinearFunctional,
    pub rhs: f64,
    pub sense: Sense,
}

/// Minimize a linear objective over one Hermitian PSD block and a
/// nonnegative orthant, subject to linear equalities and inequalities.
#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    pub psd_dim: usize,
    pub nonneg_count: usize,
    pub objective: LinearFunctional,
    pub equalities: Vec<Equality>,
    pub inequalities: Vec<Inequality>,
}

impl ConicProgram {
    pub fn new(psd_dim: usize, nonneg_count: usize) -> Self {
        Self {
            psd_dim,
            nonneg_count,
            ..Default::default()
        }
    }

    pub fn add_equality(&mut self, functional: LinearFunctional, rhs: f64) {
        self.equalities.push(Equality { functional, rhs });
    }

    pub fn add_inequality(&mut self, functional: LinearFunctional, sense: Sense, rhs: f64) {
        self.inequalities.push(Inequality {
            functional,
            rhs,
            sense,
        });
    }

    pub fn num_constraints(&self) -> usize {
        self.equalities.len() + self.inequalities.len()
    }

    /// All constraint functionals, equalities first.
    pub fn constraint_functionals(&self) -> impl Iterator<Item = &LinearFunctional> {
        self.equalities
            .iter()
            .map(|e| &e.functional)
            .chain(self.inequalities.iter().map(|i| &i.functional))
    }

    pub fn constraint_rhs(&self) -> impl Iterator<Item = f64> + '_ {
        self.equalities
            .iter()
            .map(|e| e.rhs)
            .chain(self.inequalities.iter().map(|i| i.rhs))
    }

    fn check_functional(&self, f: &LinearFunctional, what: &str) -> Result<()> {
        if let Some(a) = &f.psd {
            if self.psd_dim == 0 {
                return Err(Error::InvalidInput(format!(
                    "{what} uses a missing PSD block"
                )));
            }
            if a.dim() != self.psd_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.psd_dim,
                    found: a.dim(),
                });
            }
            if let BlockCoefficient::Dense(m) = a {
                if !m.is_square() || hermiticity_error(m) > 1e-12 * max_abs(m).max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "{what} block coefficient is not Hermitian"
                    )));
                }
            }
            if let BlockCoefficient::RankOne { scale, .. } = a {
                if !scale.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "{what} has a non-finite scale"
                    )));
                }
            }
        }
        for &(j, a) in &f.nonneg {
            if j >= self.nonneg_count {
                return Err(Error::InvalidInput(format!(
                    "{what} references nonnegative variable {j} of {}",
                    self.nonneg_count
                )));
            }
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{what} has a non-finite coefficient"
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.psd_dim == 0 && self.nonneg_count == 0 {
            return Err(Error::InvalidInput("program has no variables".into()));
        }
        self.check_functional(&self.objective, "objective")?;
        for (k, f) in self.constraint_functionals().enumerate() {
            self.check_functional(f, &format!("constraint {k}"))?;
        }
        if self.constraint_rhs().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("non-finite right-hand side".into()));
        }
        Ok(())
    }

    /// JSON dump for comparing against other solvers. Block coefficients are
    /// written densely as `[re, im]` pairs.
    pub fn to_debug_json(&self) -> Value {
        fn functional(f: &LinearFunctional) -> Value {
            let psd = f.psd.as_ref().map(|a| {
                let m = a.to_dense();
                Value::Array(
                    (0..m.nrows())
                        .map(|i| {
                            Value::Array(
                                (0..m.ncols())
                                    .map(|j| json!([m[(i, j)].re, m[(i, j)].im]))
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            });
            json!({ "psd": psd, "nonneg": f.nonneg })
        }
        json!({
            "psd_dim": self.psd_dim,
            "nonneg_count": self.nonneg_count,
            "objective": functional(&self.objective),
            "equalities": self.equalities.iter().map(|e| json!({
                "functional": functional(&e.functional), "rhs": e.rhs
            })).collect::<Vec<_>>(),
            "inequalities": self.inequalities.iter().map(|i| json!({
                "functional": functional(&i.functional), "rhs": i.rhs,
                "sense": match i.sense { Sense::GreaterEq => ">=", Sense::LessEq => "<=" },
            })).collect::<Vec<_>>(),
        })
    }
}
