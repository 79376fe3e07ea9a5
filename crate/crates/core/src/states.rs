//! Benchmark states and simulated measurement records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bases::ProjectorSet;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, DensityMatrix, C64};

/// Name of the generator behind every seeded draw in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

/// Swap operator `F|ij> = |ji>` on `C^d (x) C^d`.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let mut f = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    f
}

/// Werner state `(I + beta F) / (d^2 + d beta)` for `beta` in `[-1, 1]`.
pub fn werner_state(beta: f64, d: usize) -> Result<DensityMatrix> {
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!(
            "Werner parameter {beta} outside [-1, 1]"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidInput(
            "Werner state needs local dimension >= 2".into(),
        ));
    }
    let n = d * d;
    let norm = (n as f64) + d as f64 * beta;
    let m = (ComplexMatrix::identity(n, n) + swap_operator(d) * C64::new(beta, 0.0))
        / C64::new(norm, 0.0);
    DensityMatrix::new(m)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state drawn from `rng`.
pub fn random_pure_with<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    let v = ComplexVector::from_fn(d, |_, _| complex_gaussian(rng));
    DensityMatrix::pure(&v).expect("Gaussian vector is nonzero with probability one")
}

/// `|v><v|` with `v` a normalized vector of independent complex Gaussians.
pub fn random_pure(d: usize, seed: u64) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidInput("random_pure needs d >= 2".into()));
    }
    Ok(random_pure_with(&mut ChaCha20Rng::seed_from_u64(seed), d))
}

/// `G G† / Tr(G G†)` with `G` a `d x rank` complex Gaussian matrix.
pub fn random_density_with<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(d, rank, |_, _| complex_gaussian(rng));
    let gg = &g * g.adjoint();
    let tr: f64 = (0..d).map(|i| gg[(i, i)].re).sum();
    DensityMatrix::from_clipped(&(gg / C64::new(tr, 0.0)))
        .expect("Gram matrix of a Gaussian sample is PSD")
}

pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidInput(format!("rank {rank} outside 1..={d}")));
    }
    Ok(random_density_with(
        &mut ChaCha20Rng::seed_from_u64(seed),
        d,
        rank,
    ))
}

/// `Tr(rho P_lambda)` for every projector of the set, in flat order.
pub fn exact_probabilities(rho: &DensityMatrix, ps: &ProjectorSet) -> Result<Vec<f64>> {
    if rho.dim() != ps.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            found: rho.dim(),
        });
    }
    Ok((0..ps.len())
        .map(|lambda| {
            let v = ps.vector(lambda);
            v.dotc(&(rho.matrix() * v)).re.max(0.0)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    UniformMultiplicative,
}

/// Relative measurement noise: `f = p (1 + u)`, `u ~ U[-level, level]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            level: 0.0,
            seed: 0,
        }
    }

    pub fn uniform(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::UniformMultiplicative,
            level,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.level) {
            return Err(Error::InvalidInput(format!(
                "noise level {} outside [0, 1)",
                self.level
            )));
        }
        Ok(())
    }

    fn effective_level(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::UniformMultiplicative => self.level,
        }
    }

    /// The relative error `u` applied to projector `lambda`.
    ///
    /// Each projector draws from its own ChaCha stream keyed by `lambda`, so
    /// the value does not depend on which other projectors are simulated.
    pub fn relative_error(&self, lambda: usize) -> f64 {
        let level = self.effective_level();
        if level == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(lambda as u64);
        rng.random_range(-level..=level)
    }
}

/// One measured frequency `p_lambda` with its declared error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub projector_index: usize,
    pub frequency: f64,
    pub epsilon: f64,
}

/// Applies the noise model to probabilities indexed by flat projector index.
pub fn noisy_frequencies(
    probabilities: &[f64],
    model: &NoiseModel,
) -> Result<Vec<MeasurementRecord>> {
    model.validate()?;
    let level = model.effective_level();
    Ok(probabilities
        .iter()
        .enumerate()
        .map(|(lambda, &p)| MeasurementRecord {
            projector_index: lambda,
            frequency: p * (1.0 + model.relative_error(lambda)),
            epsilon: level * p,
        })
        .collect())
}
