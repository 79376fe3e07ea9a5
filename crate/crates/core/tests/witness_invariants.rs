use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtomo::linalg::{partial_transpose, DensityMatrix, HermitianMatrix, Subsystem, C64};
use qtomo::states::random_density_with;
use qtomo::witness::decomposable_witness;

fn pt_min_eigenvalue(rho: &DensityMatrix, dims: (usize, usize)) -> f64 {
    HermitianMatrix::from_symmetrized(&partial_transpose(rho.matrix(), dims, Subsystem::B).unwrap())
        .min_eigenvalue()
}

#[test]
fn witness_agrees_with_ppt() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for dims in [(2, 2), (2, 3)] {
        let d = dims.0 * dims.1;
        let mut entangled = 0;
        for _ in 0..50 {
            let rank = rng.random_range(1..=d);
            let pure_part = random_density_with(&mut rng, d, rank);
            let t: f64 = rng.random_range(0.0..1.0);
            let m = pure_part.matrix() * C64::new(1.0 - t, 0.0)
                + DensityMatrix::maximally_mixed(d).matrix() * C64::new(t, 0.0);
            let rho = DensityMatrix::new(m).unwrap();
            let r = decomposable_witness(&rho, dims).unwrap();
            let lmin = pt_min_eigenvalue(&rho, dims);
            // the block program's optimum is min(lambda_min(rho), lambda_min(rho^G))
            let closed = lmin.min(rho.eig().values[0]);
            assert!(
                (r.value - closed).abs() <= 1e-7,
                "{dims:?}: {} vs {closed}",
                r.value
            );
            if lmin.abs() > 1e-7 {
                assert_eq!(r.value < 0.0, lmin < 0.0, "{dims:?}");
            }
            entangled += usize::from(lmin < 0.0);
            assert!(r.gap <= 1e-7);
            assert!((r.witness.trace() - 1.0).abs() <= 1e-8);
            assert!(r.p.min_eigenvalue() >= -1e-8 && r.q.min_eigenvalue() >= -1e-8);
            let rebuilt =
                r.p.matrix() + partial_transpose(r.q.matrix(), dims, Subsystem::B).unwrap();
            let scale = r.p.trace() + r.q.trace();
            let w = r.witness.matrix() * C64::new(scale, 0.0);
            assert!((rebuilt - w).camax() <= 1e-8);
        }
        assert!(
            entangled > 5 && entangled < 50,
            "{dims:?}: {entangled} entangled"
        );
    }
}

#[test]
fn depolarizing_never_deepens_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for dims in [(2, 2), (2, 3), (3, 3)] {
        let d = dims.0 * dims.1;
        for _ in 0..5 {
            let rho = random_density_with(&mut rng, d, 1);
            let mixed = DensityMatrix::maximally_mixed(d);
            let mut last = f64::NEG_INFINITY;
            for k in 0..5 {
                let t = k as f64 / 4.0;
                let m = rho.matrix() * C64::new(1.0 - t, 0.0) + mixed.matrix() * C64::new(t, 0.0);
                let v = decomposable_witness(&DensityMatrix::new(m).unwrap(), dims)
                    .unwrap()
                    .value;
                assert!(v >= last - 1e-8, "{dims:?} t={t}: {v} < {last}");
                assert!(v <= 1.0 / d as f64 + 1e-8);
                last = v;
            }
        }
    }
}
