//! Decomposable entanglement witnesses `W = P + Q^Γ` with `Tr W = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    partial_transpose, symmetrize, ComplexMatrix, DensityMatrix, HermitianMatrix, Subsystem, C64,
};
use crate::sdp::{
    self, BlockCoefficient, ConicProgram, LinearFunctional, SolveStatus, SolverSettings,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessResult {
    pub witness: HermitianMatrix,
    /// `Tr(W rho)`
    pub value: f64,
    /// `min(value, 0)`
    pub entanglement: f64,
    pub p: HermitianMatrix,
    pub q: HermitianMatrix,
    /// Relative duality gap reported by the solver.
    pub gap: f64,
}

/// Settings used when the caller does not pass any.
pub fn default_settings() -> SolverSettings {
    SolverSettings {
        gap_tol: 1e-10,
        feas_tol: 1e-10,
        ..SolverSettings::default()
    }
}

fn check_dims(rho: &DensityMatrix, dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.0 * dims.1 != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: dims.0 * dims.1,
        });
    }
    Ok(())
}

/// Minimizes `Tr(W rho)` over trace-one `W = P + Q^Γ`, `P, Q >= 0`, with Γ the
/// partial transpose on the second factor.
///
/// Since `Tr(Q^Γ rho) = Tr(Q rho^Γ)`, the program is solved over a single block
/// `X = [[P, *], [*, Q]]` of size `2 dA dB` with cost `diag(rho, rho^Γ)` and
/// `Tr X = 1`.
pub fn decomposable_witness(rho: &DensityMatrix, dims: (usize, usize)) -> Result<WitnessResult> {
    decomposable_witness_with(rho, dims, &default_settings())
}

pub fn decomposable_witness_with(
    rho: &DensityMatrix,
    dims: (usize, usize),
    settings: &SolverSettings,
) -> Result<WitnessResult> {
    check_dims(rho, dims)?;
    let n = rho.dim();
    let rho_pt = partial_transpose(rho.matrix(), dims, Subsystem::B)?;
    let mut cost = ComplexMatrix::zeros(2 * n, 2 * n);
    cost.view_mut((0, 0), (n, n)).copy_from(rho.matrix());
    cost.view_mut((n, n), (n, n)).copy_from(&rho_pt);

    let mut program = ConicProgram::new(2 * n, 0);
    program.objective =
        LinearFunctional::new(Some(BlockCoefficient::Dense(symmetrize(&cost))), vec![]);
    program.add_equality(
        LinearFunctional::new(
            Some(BlockCoefficient::Dense(ComplexMatrix::identity(
                2 * n,
                2 * n,
            ))),
            vec![],
        ),
        1.0,
    );
    let sol = sdp::solve(&program, settings)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Numerical(format!(
            "witness program ended with status {:?}",
            sol.status
        )));
    }

    let p = HermitianMatrix::from_symmetrized(&sol.psd.view((0, 0), (n, n)).into_owned());
    let q = HermitianMatrix::from_symmetrized(&sol.psd.view((n, n), (n, n)).into_owned());
    let w = p.matrix() + partial_transpose(q.matrix(), dims, Subsystem::B)?;
    let trace: f64 = (0..n).map(|i| w[(i, i)].re).sum();
    let witness = HermitianMatrix::from_symmetrized(&(w / C64::new(trace, 0.0)));
    let value = rho.expectation(witness.matrix());
    Ok(WitnessResult {
        witness,
        value,
        entanglement: value.min(0.0),
        p,
        q,
        gap: sol.gap,
    })
}

/// `Tr(W rho)` for the optimal decomposable witness when negative, else 0.
pub fn entanglement_value(rho: &DensityMatrix, dims: (usize, usize)) -> Result<f64> {
    Ok(decomposable_witness(rho, dims)?.entanglement)
}

/// `E(estimate) / E(truth)`; fails when the truth has no witnessed entanglement.
pub fn entanglement_fraction(
    estimate: &DensityMatrix,
    truth: &DensityMatrix,
    dims: (usize, usize),
) -> Result<f64> {
    let e_truth = entanglement_value(truth, dims)?;
    if e_truth == 0.0 {
        return Err(Error::UndefinedFraction);
    }
    Ok(entanglement_value(estimate, dims)? / e_truth)
}
