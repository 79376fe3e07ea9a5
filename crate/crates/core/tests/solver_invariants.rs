mod common;

use proptest::prelude::*;

use common::{min_eigenvalue_program, random_feasible_program, random_hermitian};
use qtomo::linalg::{hermiticity_error, HermitianMatrix};
use qtomo::sdp::{kkt_residuals, solve, SolveStatus, SolverSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tight enough that the relative gap bounds the absolute one by 1e-7 here.
fn certification_settings() -> SolverSettings {
    SolverSettings {
        gap_tol: 1e-9,
        feas_tol: 1e-9,
        ..SolverSettings::default()
    }
}

#[test]
fn random_programs_close_the_gap() {
    for seed in 0..50 {
        let p = random_feasible_program(seed, 10, 20);
        let sol = solve(&p, &certification_settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        assert!(
            sol.objective_value - sol.dual_objective <= 1e-7,
            "seed {seed}"
        );
        assert!(hermiticity_error(&sol.psd) <= 1e-10);
        assert!(HermitianMatrix::from_symmetrized(&sol.psd).min_eigenvalue() >= -1e-8);
        let first = sol.history.first().unwrap().complementarity;
        let last = sol.history.last().unwrap().complementarity;
        assert!(last <= first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    for seed in [3, 14, 15] {
        let p = random_feasible_program(seed, 8, 12);
        let a = solve(&p, &SolverSettings::default()).unwrap();
        let b = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }
}

#[test]
fn iteration_limit_is_reported() {
    let p = random_feasible_program(2, 6, 8);
    let s = SolverSettings {
        max_iters: 2,
        ..SolverSettings::default()
    };
    let sol = solve(&p, &s).unwrap();
    assert_eq!(sol.status, SolveStatus::MaxIterations);
    assert!(sol.iterations <= 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kkt_holds_for_arbitrary_seeds(seed in 1000u64..100_000) {
        let p = random_feasible_program(seed, 7, 12);
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(kkt_residuals(&p, &sol).max() <= 1e-7);
    }

    #[test]
    fn smallest_eigenvalue_matches(seed in any::<u64>(), d in 1usize..9) {
        let h = random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), d);
        let expected = HermitianMatrix::from_symmetrized(&h).min_eigenvalue();
        let sol = solve(&min_eigenvalue_program(&h), &SolverSettings::default()).unwrap();
        prop_assert!((sol.objective_value - expected).abs() <= 1e-7);
    }
}
