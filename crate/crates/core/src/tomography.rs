//! Variational tomography: the state closest to the measured data that puts
//! the least weight on the unmeasured projectors.
//!
//! ```text
//! minimize   Tr(H r) + sum_k D_k
//! s.t.       r PSD, Tr r = 1, D_k >= 0,
//!            (1 - D_k) p_k <= Tr(r P_k) <= (1 + D_k) p_k
//! ```
//!
//! with `H` the sum of the unmeasured projectors.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bases::ProjectorSet;
use crate::error::{Error, Result};
use crate::linalg::{
    fidelity, purity, trace_distance, ComplexMatrix, DensityMatrix, HermitianMatrix,
};
use crate::sdp::{
    self, BlockCoefficient, ConicProgram, LinearFunctional, Sense, SolveStatus, SolverSettings,
};
use crate::states::MeasurementRecord;
use crate::witness;

/// Default ratio between the relaxation a record needs and its declared error
/// before the record is reported as incompatible.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 3.0;
/// Absolute allowance on `D p` so solver round-off never flags exact data.
pub const FLAG_ABSOLUTE_TOL: f64 = 1e-7;

/// Bipartite cut `(p, d / p)` at the smallest prime factor `p`; `None` for prime `d`.
pub fn default_cut(d: usize) -> Option<(usize, usize)> {
    let p = (2..d).find(|&k| d.is_multiple_of(k))?;
    Some((p, d / p))
}

#[derive(Clone, Debug)]
pub struct TomographyProblem {
    projector_set: ProjectorSet,
    measured: Vec<MeasurementRecord>,
    unmeasured: Vec<usize>,
    epsilon_floor: f64,
    witness_dims: Option<(usize, usize)>,
}

impl TomographyProblem {
    /// Every projector without a record is unmeasured.
    pub fn new(projector_set: ProjectorSet, measured: Vec<MeasurementRecord>) -> Result<Self> {
        let seen: BTreeSet<usize> = measured.iter().map(|r| r.projector_index).collect();
        let unmeasured = (0..projector_set.len())
            .filter(|l| !seen.contains(l))
            .collect();
        Self::with_unmeasured(projector_set, measured, unmeasured)
    }

    pub fn with_unmeasured(
        projector_set: ProjectorSet,
        measured: Vec<MeasurementRecord>,
        unmeasured: Vec<usize>,
    ) -> Result<Self> {
        let total = projector_set.len();
        for r in &measured {
            if r.projector_index >= total {
                return Err(Error::InvalidInput(format!(
                    "record for projector {} of {total}",
                    r.projector_index
                )));
            }
            if !(r.frequency.is_finite() && r.frequency >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "frequency {} of projector {} is not a nonnegative number",
                    r.frequency, r.projector_index
                )));
            }
            if !(r.epsilon.is_finite() && r.epsilon >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "negative or non-finite epsilon for projector {}",
                    r.projector_index
                )));
            }
        }
        let known: BTreeSet<usize> = measured.iter().map(|r| r.projector_index).collect();
        let unknown: BTreeSet<usize> = unmeasured.iter().copied().collect();
        if unknown.len() != unmeasured.len() || unknown.iter().any(|&l| l >= total) {
            return Err(Error::InvalidInput(
                "unmeasured indices repeat or fall out of range".into(),
            ));
        }
        if let Some(l) = known.intersection(&unknown).next() {
            return Err(Error::InvalidInput(format!(
                "projector {l} is both measured and unmeasured"
            )));
        }
        if known.len() + unknown.len() != total {
            return Err(Error::InvalidInput(format!(
                "measured and unmeasured sets cover {} of {total} projectors",
                known.len() + unknown.len()
            )));
        }
        let witness_dims = default_cut(projector_set.dim());
        Ok(Self {
            projector_set,
            measured,
            unmeasured,
            epsilon_floor: 0.0,
            witness_dims,
        })
    }

    /// Scale floor for the relaxation, so a record with `p = 0` becomes the
    /// additive bound `|Tr(r P)| <= D floor`.
    pub fn with_epsilon_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon floor {floor} must be >= 0"
            )));
        }
        self.epsilon_floor = floor;
        Ok(self)
    }

    /// Cut used for the witnessed entanglement in diagnostics; `None` skips it.
    pub fn with_witness_dims(mut self, dims: Option<(usize, usize)>) -> Result<Self> {
        if let Some((a, b)) = dims {
            if a * b != self.projector_set.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.projector_set.dim(),
                    found: a * b,
                });
            }
        }
        self.witness_dims = dims;
        Ok(self)
    }

    pub fn projector_set(&self) -> &ProjectorSet {
        &self.projector_set
    }

    pub fn measured(&self) -> &[MeasurementRecord] {
        &self.measured
    }

    pub fn unmeasured(&self) -> &[usize] {
        &self.unmeasured
    }

    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor
    }

    pub fn witness_dims(&self) -> Option<(usize, usize)> {
        self.witness_dims
    }

    pub fn dim(&self) -> usize {
        self.projector_set.dim()
    }
}

/// `H = sum of P_l over the unmeasured l`.
pub fn cost_operator(ps: &ProjectorSet, unmeasured: &[usize]) -> Result<HermitianMatrix> {
    let d = ps.dim();
    if let Some(&l) = unmeasured.iter().find(|&&l| l >= ps.len()) {
        return Err(Error::InvalidInput(format!("projector {l} out of range")));
    }
    if unmeasured.is_empty() {
        return Ok(HermitianMatrix::zeros(d));
    }
    let v = ComplexMatrix::from_columns(
        &unmeasured
            .iter()
            .map(|&l| ps.vector(l).clone())
            .collect::<Vec<_>>(),
    );
    Ok(HermitianMatrix::from_symmetrized(&(&v * v.adjoint())))
}

/// The conic program above. Record `k` owns nonnegative variable `k` and
/// inequalities `2k` (lower bound) and `2k + 1` (upper bound).
pub fn assemble_sdp(tp: &TomographyProblem) -> Result<ConicProgram> {
    let d = tp.dim();
    let n = tp.measured.len();
    let h = cost_operator(&tp.projector_set, &tp.unmeasured)?;
    let mut p = ConicProgram::new(d, n);
    p.objective = LinearFunctional::new(
        Some(BlockCoefficient::Dense(h.into_matrix())),
        (0..n).map(|k| (k, 1.0)).collect(),
    );
    p.add_equality(
        LinearFunctional::new(
            Some(BlockCoefficient::Dense(ComplexMatrix::identity(d, d))),
            vec![],
        ),
        1.0,
    );
    for (k, r) in tp.measured.iter().enumerate() {
        let block = BlockCoefficient::RankOne {
            vector: tp.projector_set.vector(r.projector_index).clone(),
            scale: 1.0,
        };
        let s = r.frequency.max(tp.epsilon_floor);
        let delta = |coef: f64| if s > 0.0 { vec![(k, coef * s)] } else { vec![] };
        p.add_inequality(
            LinearFunctional::new(Some(block.clone()), delta(1.0)),
            Sense::GreaterEq,
            r.frequency,
        );
        p.add_inequality(
            LinearFunctional::new(Some(block), delta(-1.0)),
            Sense::LessEq,
            r.frequency,
        );
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub purity: f64,
    pub fidelity: f64,
    pub trace_distance: f64,
    /// `min(Tr(W e), 0)` for the optimal decomposable witness of the estimate.
    pub witnessed_entanglement: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TomographyResult {
    pub estimate: DensityMatrix,
    pub deltas: Vec<f64>,
    /// `Tr(H e)`
    pub cost: f64,
    /// `cost + sum(deltas)`
    pub objective: f64,
    pub status: SolveStatus,
    /// False when the solver stopped at its iteration limit.
    pub certified: bool,
    pub iterations: usize,
    pub incompatible: Vec<usize>,
    pub diagnostics: Option<Diagnostics>,
}

/// Purity of `estimate` and its distances to `reference`.
pub fn diagnostics(
    estimate: &DensityMatrix,
    reference: &DensityMatrix,
    witness_dims: Option<(usize, usize)>,
) -> Result<Diagnostics> {
    let witnessed_entanglement = witness_dims
        .map(|dims| witness::entanglement_value(estimate, dims))
        .transpose()?;
    Ok(Diagnostics {
        purity: purity(estimate),
        fidelity: fidelity(estimate, reference)?,
        trace_distance: trace_distance(estimate, reference)?,
        witnessed_entanglement,
    })
}

/// Records whose relaxation `D p` exceeds `threshold_factor` times their
/// declared error, as sorted projector indices.
pub fn detect_incompatible(
    result: &TomographyResult,
    records: &[MeasurementRecord],
    threshold_factor: f64,
) -> Vec<usize> {
    let flagged: BTreeSet<usize> = records
        .iter()
        .zip(&result.deltas)
        .filter(|(r, &delta)| {
            delta * r.frequency > threshold_factor * r.epsilon + FLAG_ABSOLUTE_TOL
        })
        .map(|(r, _)| r.projector_index)
        .collect();
    flagged.into_iter().collect()
}

/// Solves the program for `tp` and extracts the estimate.
pub fn reconstruct(
    tp: &TomographyProblem,
    settings: &SolverSettings,
    reference: Option<&DensityMatrix>,
) -> Result<TomographyResult> {
    reconstruct_with_threshold(tp, settings, reference, DEFAULT_THRESHOLD_FACTOR)
}

pub fn reconstruct_with_threshold(
    tp: &TomographyProblem,
    settings: &SolverSettings,
    reference: Option<&DensityMatrix>,
    threshold_factor: f64,
) -> Result<TomographyResult> {
    if let Some(r) = reference {
        if r.dim() != tp.dim() {
            return Err(Error::DimensionMismatch {
                expected: tp.dim(),
                found: r.dim(),
            });
        }
    }
    let program = assemble_sdp(tp)?;
    let sol = sdp::solve(&program, settings)?;
    let certified = match sol.status {
        SolveStatus::Optimal => true,
        SolveStatus::MaxIterations => false,
        other => return Err(Error::Numerical(format!(
            "tomography program with {} records ended with status {other:?} after {} iterations",
            tp.measured.len(),
            sol.iterations
        ))),
    };
    let estimate = DensityMatrix::from_clipped(&sol.psd)?;
    let deltas = sol.nonneg.clone();
    let h = cost_operator(&tp.projector_set, &tp.unmeasured)?;
    let cost = estimate.expectation(h.matrix());
    let objective = cost + deltas.iter().sum::<f64>();
    let diagnostics = reference
        .map(|r| diagnostics(&estimate, r, tp.witness_dims))
        .transpose()?;
    let mut result = TomographyResult {
        estimate,
        deltas,
        cost,
        objective,
        status: sol.status,
        certified,
        iterations: sol.iterations,
        incompatible: Vec::new(),
        diagnostics,
    };
    result.incompatible = detect_incompatible(&result, &tp.measured, threshold_factor);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::mub;
    use crate::linalg::C64;
    use crate::states::{exact_probabilities, noisy_frequencies, werner_state, NoiseModel};

    fn exact_records(
        probs: &[f64],
        indices: impl Iterator<Item = usize>,
    ) -> Vec<MeasurementRecord> {
        indices
            .map(|l| MeasurementRecord {
                projector_index: l,
                frequency: probs[l],
                epsilon: 0.0,
            })
            .collect()
    }

    #[test]
    fn cost_operator_examples() {
        let ps = mub(3).unwrap();
        assert_eq!(cost_operator(&ps, &[]).unwrap(), HermitianMatrix::zeros(3));
        let all: Vec<usize> = (0..ps.len()).collect();
        let h = cost_operator(&ps, &all).unwrap();
        assert!((h.matrix() - ComplexMatrix::identity(3, 3) * C64::new(4.0, 0.0)).camax() < 1e-12);
        let one_class: Vec<usize> = ps.class_range(2).collect();
        let h = cost_operator(&ps, &one_class).unwrap();
        assert!((h.matrix() - ComplexMatrix::identity(3, 3)).camax() < 1e-12);
        assert!(cost_operator(&ps, &[12]).is_err());
    }

    #[test]
    fn problem_validation() {
        let ps = mub(2).unwrap();
        let rec = |l| MeasurementRecord {
            projector_index: l,
            frequency: 0.5,
            epsilon: 0.0,
        };
        let tp = TomographyProblem::new(ps.clone(), vec![rec(0), rec(3)]).unwrap();
        assert_eq!(tp.unmeasured(), &[1, 2, 4, 5]);
        assert!(TomographyProblem::with_unmeasured(
            ps.clone(),
            vec![rec(0)],
            vec![0, 1, 2, 3, 4, 5]
        )
        .is_err());
        assert!(TomographyProblem::with_unmeasured(ps.clone(), vec![rec(0)], vec![1, 2]).is_err());
        assert!(TomographyProblem::new(ps.clone(), vec![rec(6)]).is_err());
        // repeated measurements of one projector are allowed
        let tp = TomographyProblem::new(ps, vec![rec(0), rec(0)]).unwrap();
        assert_eq!(assemble_sdp(&tp).unwrap().inequalities.len(), 4);
    }

    #[test]
    fn nothing_measured() {
        let ps = mub(3).unwrap();
        let tp = TomographyProblem::new(ps, vec![]).unwrap();
        let p = assemble_sdp(&tp).unwrap();
        assert_eq!(
            (p.nonneg_count, p.equalities.len(), p.inequalities.len()),
            (0, 1, 0)
        );
        let r = reconstruct(&tp, &SolverSettings::default(), None).unwrap();
        assert!((r.objective - 4.0).abs() < 1e-7);
    }

    #[test]
    fn zero_frequency_pins_the_projector() {
        let ps = mub(2).unwrap();
        let rec = MeasurementRecord {
            projector_index: 1,
            frequency: 0.0,
            epsilon: 0.0,
        };
        let tp = TomographyProblem::new(ps, vec![rec]).unwrap();
        let p = assemble_sdp(&tp).unwrap();
        assert!(p
            .inequalities
            .iter()
            .all(|i| i.functional.nonneg.is_empty() && i.rhs == 0.0));
    }

    #[test]
    fn werner_exact_data() {
        let ps = mub(9).unwrap();
        let w = werner_state(-0.8, 3).unwrap();
        let probs = exact_probabilities(&w, &ps).unwrap();
        let tp = TomographyProblem::new(ps.clone(), exact_records(&probs, 0..ps.len())).unwrap();
        let r = reconstruct(&tp, &SolverSettings::default(), Some(&w)).unwrap();
        let diag = r.diagnostics.unwrap();
        assert!(diag.trace_distance < 1e-6, "{}", diag.trace_distance);
        assert!(r.deltas.iter().sum::<f64>() < 1e-7);
        assert!(r.incompatible.is_empty());
        assert!((diag.witnessed_entanglement.unwrap() + 0.2121).abs() < 1e-3);
    }

    #[test]
    fn noisy_werner_is_compatible() {
        let ps = mub(9).unwrap();
        let w = werner_state(-0.8, 3).unwrap();
        let probs = exact_probabilities(&w, &ps).unwrap();
        let records = noisy_frequencies(&probs, &NoiseModel::uniform(0.5, 3)).unwrap();
        let tp = TomographyProblem::new(ps, records.clone()).unwrap();
        let r = reconstruct(&tp, &SolverSettings::default(), None).unwrap();
        assert!(r.incompatible.is_empty(), "{:?}", r.incompatible);
        for (rec, delta) in records.iter().zip(&r.deltas) {
            let t = r
                .estimate
                .expectation(&tp.projector_set().projector(rec.projector_index));
            assert!(*delta >= -1e-10);
            assert!(
                t >= (1.0 - delta) * rec.frequency - 1e-7
                    && t <= (1.0 + delta) * rec.frequency + 1e-7
            );
        }
    }

    #[test]
    fn single_corrupted_record_is_flagged() {
        let ps = mub(3).unwrap();
        let w = crate::states::random_density(3, 3, 8).unwrap();
        let probs = exact_probabilities(&w, &ps).unwrap();
        let mut records = exact_records(&probs, 0..ps.len());
        records[4].frequency = 1.0;
        let tp = TomographyProblem::new(ps, records).unwrap();
        let r = reconstruct(&tp, &SolverSettings::default(), None).unwrap();
        assert!(r.incompatible.contains(&4), "{:?}", r.incompatible);
    }

    #[test]
    fn default_cuts() {
        assert_eq!(default_cut(9), Some((3, 3)));
        assert_eq!(default_cut(6), Some((2, 3)));
        assert_eq!(default_cut(32), Some((2, 16)));
        assert_eq!(default_cut(5), None);
    }
}
