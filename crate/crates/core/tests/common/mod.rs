//! Shared generators for the integration targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtomo::linalg::{ComplexMatrix, ComplexVector, C64};
use qtomo::sdp::{BlockCoefficient, ConicProgram, LinearFunctional, Sense};
use qtomo::states::random_density_with;

pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// `min Tr(H X)` s.t. `Tr X = 1` gives the smallest eigenvalue of `H`.
pub fn min_eigenvalue_program(h: &ComplexMatrix) -> ConicProgram {
    let d = h.nrows();
    let mut p = ConicProgram::new(d, 0);
    p.objective = LinearFunctional::new(Some(BlockCoefficient::Dense(h.clone())), vec![]);
    p.add_equality(
        LinearFunctional::new(
            Some(BlockCoefficient::Dense(ComplexMatrix::identity(d, d))),
            vec![],
        ),
        1.0,
    );
    p
}

/// Feasible and bounded by construction: `b = A(X0, x0)` and `C = Z0 + A*(y0)`.
///
/// Block size in `2..=max_d`, at most `max_m` constraints in total.
pub fn random_feasible_program(seed: u64, max_d: usize, max_m: usize) -> ConicProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=max_d);
    let n = rng.random_range(0..4);
    let m_eq = rng.random_range(1..=max_m / 2);
    let m_in = rng.random_range(0..=max_m - m_eq);
    let rank = rng.random_range(1..=d);
    let x0 = random_density_with(&mut rng, d, rank).into_matrix() * C64::new(2.0, 0.0);
    let xv0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut p = ConicProgram::new(d, n);
    let mut c = random_density_with(&mut rng, d, d).into_matrix();
    let mut cv: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    for k in 0..(m_eq + m_in) {
        let block = if rng.random_bool(0.5) {
            BlockCoefficient::Dense(random_hermitian(&mut rng, d))
        } else {
            let v = ComplexVector::from_fn(d, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            BlockCoefficient::RankOne {
                vector: v,
                scale: rng.random_range(0.5..2.0),
            }
        };
        let nonneg: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        let f = LinearFunctional::new(Some(block.clone()), nonneg.clone());
        let value = f.evaluate(&x0, &xv0);
        let y0: f64 = rng.random_range(-1.0..1.0);
        if k < m_eq {
            p.add_equality(f, value);
            c += block.to_dense() * C64::new(y0, 0.0);
            for (j, a) in &nonneg {
                cv[*j] += a * y0;
            }
        } else {
            let sense = if rng.random_bool(0.5) {
                Sense::GreaterEq
            } else {
                Sense::LessEq
            };
            let slack = rng.random_range(0.0..0.5);
            let rhs = match sense {
                Sense::GreaterEq => value - slack,
                Sense::LessEq => value + slack,
            };
            p.add_inequality(f, sense, rhs);
            // dual sign must match the row sense
            let y = match sense {
                Sense::GreaterEq => y0.abs(),
                Sense::LessEq => -y0.abs(),
            };
            c += block.to_dense() * C64::new(y, 0.0);
            for (j, a) in &nonneg {
                cv[*j] += a * y;
            }
        }
    }
    p.objective = LinearFunctional::new(
        Some(BlockCoefficient::Dense(c)),
        cv.into_iter().enumerate().collect(),
    );
    p
}
