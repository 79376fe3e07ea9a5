//! Dense complex linear algebra shared by every other module.
//!
//! All spectral work goes through [`herm_eig`]; square roots, absolute values
//! and the distance measures between states are derived from it. Matrices are
//! small (d <= 64) so everything is dense.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Elementwise tolerance (relative to the largest entry) for `M = M†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_TOL` count as nonnegative.
pub const PSD_TOL: f64 = 1e-9;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut err = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// `(M + M†) / 2`.
pub fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        out[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// `Re Tr(A B)` for Hermitian `A`, computed as `Re sum(conj(a_ij) b_ij)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// Outer product `|v><v|`.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// JSON form of a complex number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

/// Row-major nested `{re, im}` arrays.
pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<ComplexEntry>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| ComplexEntry {
                    re: m[(i, j)].re,
                    im: m[(i, j)].im,
                })
                .collect()
        })
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<ComplexEntry>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(ComplexMatrix::from_fn(n, cols, |i, j| {
        C64::new(rows[i][j].re, rows[i][j].im)
    }))
}

/// A square matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Validates Hermiticity within [`HERMITIAN_TOL`] and stores the symmetrized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = max_abs(&m).max(1.0);
        let err = hermiticity_error(&m);
        if err > HERMITIAN_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (asymmetry {err:.3e})"
            )));
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Takes the Hermitian part of `m` without checking how far it was off.
    pub fn from_symmetrized(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "Hermitian part of a non-square matrix");
        Self(symmetrize(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(ComplexMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(identity(d))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = ComplexMatrix::zeros(d, d);
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn eig(&self) -> Eigen {
        eig_unchecked(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values[0]
    }

    /// `Re Tr(self * other)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        hs_inner(&self.0, &other.0)
    }
}

/// Spectral decomposition `M = V diag(values) V†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|x| x)
    }

    /// `V diag(f(values)) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &x) in self.values.iter().enumerate() {
            let fx = f(x);
            scaled.column_mut(j).scale_mut(fx);
        }
        symmetrize(&(scaled * self.vectors.adjoint()))
    }

    pub fn vector(&self, j: usize) -> ComplexVector {
        self.vectors.column(j).into_owned()
    }
}

fn eig_unchecked(m: &ComplexMatrix) -> Eigen {
    let n = m.nrows();
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        };
    }
    let se = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &se.eigenvectors.column(k));
    }
    Eigen { values, vectors }
}

/// Eigendecomposition of a Hermitian matrix given as a raw complex matrix.
pub fn herm_eig(m: &ComplexMatrix) -> Result<Eigen> {
    Ok(HermitianMatrix::new(m.clone())?.eig())
}

/// Principal square root of a PSD matrix.
///
/// With `clip_negative`, eigenvalues in `[-PSD_TOL, 0)` are treated as zero;
/// without it any negative eigenvalue is rejected.
pub fn matrix_sqrt(m: &HermitianMatrix, clip_negative: bool) -> Result<HermitianMatrix> {
    let eig = m.eig();
    let min = eig.values.first().copied().unwrap_or(0.0);
    let floor = if clip_negative { -PSD_TOL } else { 0.0 };
    if min < floor {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(HermitianMatrix(eig.map_values(|x| x.max(0.0).sqrt())))
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(m: &HermitianMatrix) -> f64 {
    m.eig().values.iter().map(|x| x.abs()).sum()
}

/// Trace-one positive-semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min = h.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self(h.0))
    }

    /// Clips negative eigenvalues to zero and rescales to unit trace.
    pub fn from_clipped(m: &ComplexMatrix) -> Result<Self> {
        let eig = eig_unchecked(m);
        let total: f64 = eig.values.iter().map(|x| x.max(0.0)).sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::NotPsd {
                min_eigenvalue: eig.values.first().copied().unwrap_or(f64::NAN),
            });
        }
        Ok(Self(eig.map_values(|x| x.max(0.0) / total)))
    }

    /// `|v><v| / <v|v>`.
    pub fn pure(v: &ComplexVector) -> Result<Self> {
        let norm2 = v.norm_squared();
        if norm2.is_nan() || norm2 <= 0.0 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        Ok(Self(symmetrize(&(outer(v) / C64::new(norm2, 0.0)))))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d) / C64::new(d as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    pub fn eig(&self) -> Eigen {
        eig_unchecked(&self.0)
    }

    /// `Tr(rho O)` for Hermitian `O`.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        hs_inner(&self.0, op)
    }
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Uhlmann fidelity `Tr sqrt(sqrt(a) b sqrt(a))` (not squared).
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    // nuclear norm of sqrt(a) sqrt(b); avoids square roots of round-off eigenvalues
    let sa = matrix_sqrt(&a.as_hermitian(), true)?;
    let sb = matrix_sqrt(&b.as_hermitian(), true)?;
    let prod = sa.matrix() * sb.matrix();
    Ok(prod.singular_values().iter().sum())
}

/// `Tr|a - b| / 2`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    let diff = HermitianMatrix::from_symmetrized(&(a.matrix() - b.matrix()));
    Ok(0.5 * trace_norm(&diff))
}

/// `Tr(a^2)`.
pub fn purity(a: &DensityMatrix) -> f64 {
    a.matrix().iter().map(|z| z.norm_sqr()).sum()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which tensor factor a partial transpose acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Transposes the indices of one factor of a `dA x dB` bipartite operator.
pub fn partial_transpose(
    m: &ComplexMatrix,
    dims: (usize, usize),
    subsystem: Subsystem,
) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let n = da * db;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "partial transpose over {da}x{db} needs a {n}x{n} matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for ia in 0..da {
        for ib in 0..db {
            for ja in 0..da {
                for jb in 0..db {
                    let v = m[(ia * db + ib, ja * db + jb)];
                    let (r, c) = match subsystem {
                        Subsystem::A => (ja * db + ib, ia * db + jb),
                        Subsystem::B => (ia * db + jb, ja * db + ib),
                    };
                    out[(r, c)] = v;
                }
            }
        }
    }
    Ok(out)
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<ComplexEntry>>::deserialize(d)?;
        matrix_from_rows(&rows)
            .and_then(HermitianMatrix::new)
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(&self.0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<ComplexEntry>>::deserialize(d)?;
        matrix_from_rows(&rows)
            .and_then(DensityMatrix::new)
            .map_err(serde::de::Error::custom)
    }
}
