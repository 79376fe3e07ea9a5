//! Informationally complete measurement sets.
//!
//! A [`ProjectorSet`] is an ordered list of complete measurements ("classes"),
//! each made of `d` orthogonal rank-one projectors. Projectors carry a flat
//! index `lambda` running class by class in construction order.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{prime_power, GaloisField, MAX_ORDER};
use crate::linalg::{outer, ComplexMatrix, ComplexVector, HermitianMatrix, C64, ZERO};

const COMPLETENESS_TOL: f64 = 1e-10;
/// Overlap matrices with a larger condition number are rejected as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// How a projector set was built, carried into exported files and manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisMetadata {
    pub construction: String,
    /// Reduction polynomial of the field used, constant term first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_polynomial: Option<Vec<u32>>,
    /// Field elements (polynomial codes) labelling the digits of a
    /// computational-basis index, most significant digit first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_basis: Option<Vec<usize>>,
}

/// Ordered complete measurements of rank-one projectors.
#[derive(Clone, Debug)]
pub struct ProjectorSet {
    dim: usize,
    classes: Vec<Vec<ComplexVector>>,
    metadata: BasisMetadata,
}

impl ProjectorSet {
    /// Builds a set from unit vectors, checking that each class is an
    /// orthonormal basis.
    pub fn new(
        dim: usize,
        classes: Vec<Vec<ComplexVector>>,
        metadata: BasisMetadata,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(
                "projector dimension must be at least 2".into(),
            ));
        }
        for (l, class) in classes.iter().enumerate() {
            if class.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "class {l} has {} projectors, expected {dim}",
                    class.len()
                )));
            }
            for (i, u) in class.iter().enumerate() {
                if u.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: u.len(),
                    });
                }
                for (j, v) in class.iter().enumerate().skip(i) {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (u.dotc(v).norm() - target).abs() > COMPLETENESS_TOL {
                        return Err(Error::InvalidInput(format!(
                            "class {l} is not an orthonormal basis (members {i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            classes,
            metadata,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Total number of projectors.
    pub fn len(&self) -> usize {
        self.classes.len() * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn metadata(&self) -> &BasisMetadata {
        &self.metadata
    }

    pub fn classes(&self) -> &[Vec<ComplexVector>] {
        &self.classes
    }

    /// `(class, member)` of flat index `lambda`.
    pub fn locate(&self, lambda: usize) -> (usize, usize) {
        (lambda / self.dim, lambda % self.dim)
    }

    pub fn flat_index(&self, class: usize, member: usize) -> usize {
        class * self.dim + member
    }

    /// Flat indices of one class.
    pub fn class_range(&self, class: usize) -> Range<usize> {
        class * self.dim..(class + 1) * self.dim
    }

    /// Unit vector `v` with `P_lambda = |v><v|`.
    pub fn vector(&self, lambda: usize) -> &ComplexVector {
        let (l, i) = self.locate(lambda);
        &self.classes[l][i]
    }

    pub fn projector(&self, lambda: usize) -> ComplexMatrix {
        outer(self.vector(lambda))
    }

    /// The first `d - 1` projectors of every class.
    pub fn independent_subset(&self) -> Vec<usize> {
        (0..self.num_classes())
            .flat_map(|l| self.class_range(l).take(self.dim - 1))
            .collect()
    }

    /// A new set holding only the listed classes, in the given order.
    pub fn select_classes(&self, classes: &[usize]) -> Result<Self> {
        let picked = classes
            .iter()
            .map(|&l| {
                self.classes
                    .get(l)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("class {l} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            classes: picked,
            metadata: self.metadata.clone(),
        })
    }

    /// `|<v_a|v_b>|^2 = Tr(P_a P_b)`.
    pub fn overlap(&self, a: usize, b: usize) -> f64 {
        self.vector(a).dotc(self.vector(b)).norm_sqr()
    }
}

/// Deterministic pseudo-random complex coefficients for the class operators.
fn mixing_coefficients(count: usize, attempt: u64) -> Vec<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x6d75_6273 ^ attempt);
    (0..count)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// A basis `e_1..e_n` of GF(p^n) over GF(p) with `tr(e_i e_j) = 0` for `i != j`
/// and `tr(e_i e_i) != 0`, preferring small codes (and `1`) first.
fn trace_orthogonal_basis(field: &GaloisField) -> Option<Vec<usize>> {
    fn extend(field: &GaloisField, chosen: &mut Vec<usize>, candidates: &[usize]) -> bool {
        if chosen.len() == field.degree() as usize {
            return true;
        }
        for &u in candidates {
            let ok = field.trace(field.mul(u, u)) != 0
                && chosen.iter().all(|&e| field.trace(field.mul(u, e)) == 0);
            if ok {
                chosen.push(u);
                if extend(field, chosen, candidates) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let candidates: Vec<usize> = (1..field.order()).collect();
    let mut chosen = Vec::new();
    extend(field, &mut chosen, &candidates).then_some(chosen)
}

/// Mutually unbiased bases for a prime-power dimension `d <= 64`.
///
/// The computational index `y` with base-p digits `y_1..y_n` (most
/// significant first) stands for the field element `sum y_i e_i`, where `e`
/// is a trace-orthogonal basis, so the tensor-factor structure of `C^d` is
/// that of the digits.
///
/// Class 0 is the computational basis. The other classes are the joint
/// eigenbases of the commuting displacement operators `X(x) Z(a x)`, one per
/// field element `a`, where `X(x)|y> = |y + x>` and `Z(z)|y> = w^tr(z y) |y>`.
/// Elements `a` of the prime subfield come first: for those the operators
/// factorize over the digits and the class is a product basis. The remaining
/// `a` follow in index order. One joint eigenvector is found numerically from
/// a generic Hermitian element of the class algebra; the rest of the class is
/// generated from it by the phase operators `Z(b)`, in index order of `b`.
pub fn mub(d: usize) -> Result<ProjectorSet> {
    if d > MAX_ORDER {
        return Err(Error::UnsupportedSize(format!(
            "MUB dimension {d} exceeds {MAX_ORDER}"
        )));
    }
    prime_power(d).ok_or(Error::UnsupportedDimension(d))?;
    let field = GaloisField::standard(d)?;
    let basis = trace_orthogonal_basis(&field)
        .ok_or_else(|| Error::Numerical(format!("no trace-orthogonal basis for GF({d})")))?;
    let pu = field.characteristic() as usize;
    let n = field.degree() as usize;
    // elem[y] = sum_i digit_i(y) e_i
    let elem: Vec<usize> = (0..d)
        .map(|y| {
            let mut acc = 0;
            let mut rest = y;
            for i in (0..n).rev() {
                let digit = rest % pu;
                rest /= pu;
                for _ in 0..digit {
                    acc = field.add(acc, basis[i]);
                }
            }
            acc
        })
        .collect();
    let mut index = vec![0; d];
    for (y, &e) in elem.iter().enumerate() {
        index[e] = y;
    }

    let p = pu as f64;
    let omega = |k: u32| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / p);
    let amp = 1.0 / (d as f64).sqrt();

    let mut classes = Vec::with_capacity(d + 1);
    classes.push(
        (0..d)
            .map(|y| {
                let mut v = ComplexVector::zeros(d);
                v[y] = C64::new(1.0, 0.0);
                v
            })
            .collect(),
    );

    // prime-subfield codes are 0..p
    let mut labels: Vec<usize> = (0..pu).collect();
    labels.extend((0..d).map(|j| elem[j]).filter(|&a| a >= pu));

    for a in labels {
        // D_x[y + x, y] = w^tr(a x y)
        let ops: Vec<ComplexMatrix> = (1..d)
            .map(|x| {
                let ax = field.mul(a, x);
                let mut m = ComplexMatrix::zeros(d, d);
                for y in 0..d {
                    m[(index[field.add(elem[y], x)], y)] =
                        omega(field.trace(field.mul(ax, elem[y])));
                }
                m
            })
            .collect();

        let mut seed_vector = None;
        for attempt in 0..8 {
            let coef = mixing_coefficients(ops.len(), attempt);
            let mut k = ComplexMatrix::zeros(d, d);
            for (c, op) in coef.iter().zip(&ops) {
                k += op * *c + op.adjoint() * c.conj();
            }
            let eig = HermitianMatrix::from_symmetrized(&k).eig();
            let v = eig.vector(0);
            let is_joint = ops.iter().all(|op| {
                let w = op * &v;
                let mu = v.dotc(&w);
                (w - &v * mu).norm() < 1e-11
            });
            if is_joint {
                seed_vector = Some(v);
                break;
            }
        }
        let v = seed_vector.ok_or_else(|| {
            Error::Numerical(format!(
                "could not isolate a joint eigenvector for MUB label {a}"
            ))
        })?;
        let phase0 = v[0] / v[0].norm();
        let v = v.map(|z| {
            let z = z / phase0;
            C64::from_polar(amp, z.arg())
        });

        classes.push(
            (0..d)
                .map(|j| {
                    let b = elem[j];
                    ComplexVector::from_fn(d, |y, _| {
                        v[y] * omega(field.trace(field.mul(b, elem[y])))
                    })
                })
                .collect(),
        );
    }

    ProjectorSet::new(
        d,
        classes,
        BasisMetadata {
            construction: format!("mub-displacement-gf{d}"),
            field_polynomial: Some(field.modulus().to_vec()),
            field_basis: Some(basis),
        },
    )
}

/// Generalized Gell-Mann matrices for dimension `d`, normalized to
/// `Tr(s_i s_j) = 2 delta_ij`, followed by the identity.
///
/// Order: symmetric `E_jk + E_kj` (j < k), antisymmetric `-i E_jk + i E_kj`
/// (j < k), then the diagonal generators; the identity comes last, giving
/// `d^2` matrices in total.
pub fn gell_mann_observables(d: usize) -> Result<Vec<HermitianMatrix>> {
    if d < 2 {
        return Err(Error::InvalidInput("Gell-Mann set needs d >= 2".into()));
    }
    let i_unit = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = C64::new(1.0, 0.0);
            m[(k, j)] = C64::new(1.0, 0.0);
            out.push(HermitianMatrix::from_symmetrized(&m));
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = -i_unit;
            m[(k, j)] = i_unit;
            out.push(HermitianMatrix::from_symmetrized(&m));
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..d)
            .map(|j| match j.cmp(&l) {
                std::cmp::Ordering::Less => norm,
                std::cmp::Ordering::Equal => -(l as f64) * norm,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out.push(HermitianMatrix::identity(d));
    Ok(out)
}

/// Rotates `v` so its first non-negligible component is real and positive.
fn fix_phase(v: &mut ComplexVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = z / z.norm();
        v.iter_mut().for_each(|x| *x /= phase);
    }
}

/// One complete measurement per observable, made of its eigenprojectors.
///
/// Degenerate eigenspaces are split canonically: the computational basis
/// vectors are projected onto the eigenspace and orthonormalized in order, so
/// diagonal observables resolve into the computational basis.
pub fn observables_to_projectors(observables: &[HermitianMatrix]) -> Result<ProjectorSet> {
    let d = observables
        .first()
        .map(|o| o.dim())
        .ok_or_else(|| Error::InvalidInput("no observables given".into()))?;
    let mut classes = Vec::with_capacity(observables.len());
    for obs in observables {
        if obs.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: obs.dim(),
            });
        }
        let eig = obs.eig();
        let scale = eig.values.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        let mut class: Vec<ComplexVector> = Vec::with_capacity(d);
        let mut start = 0;
        while start < d {
            let mut end = start + 1;
            while end < d && eig.values[end] - eig.values[end - 1] < 1e-9 * scale {
                end += 1;
            }
            if end - start == 1 {
                let mut v = eig.vector(start);
                fix_phase(&mut v);
                class.push(v);
            } else {
                let span: Vec<ComplexVector> = (start..end).map(|j| eig.vector(j)).collect();
                let mut chosen: Vec<ComplexVector> = Vec::new();
                for k in 0..d {
                    if chosen.len() == span.len() {
                        break;
                    }
                    let mut w = ComplexVector::from_element(d, ZERO);
                    for u in &span {
                        w += u * u[k].conj();
                    }
                    for c in &chosen {
                        let proj = c.dotc(&w);
                        w -= c * proj;
                    }
                    let norm = w.norm();
                    if norm > 1e-6 {
                        let mut v = w / C64::new(norm, 0.0);
                        fix_phase(&mut v);
                        chosen.push(v);
                    }
                }
                class.extend(chosen);
            }
            start = end;
        }
        classes.push(class);
    }
    ProjectorSet::new(
        d,
        classes,
        BasisMetadata {
            construction: "observable-eigenprojectors".into(),
            field_polynomial: None,
            field_basis: None,
        },
    )
}

/// Gram matrix `S_{mu nu} = Tr(P_mu P_nu)` over a subset of projectors.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    indices: Vec<usize>,
    entries: DMatrix<f64>,
    condition: f64,
    factor: Cholesky<f64, nalgebra::Dyn>,
}

impl OverlapMatrix {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `S^-1 rhs` using the cached factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(rhs)
    }
}

pub fn overlap_matrix(ps: &ProjectorSet, subset: &[usize]) -> Result<OverlapMatrix> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= ps.len()) {
        return Err(Error::InvalidInput(format!(
            "projector index {bad} out of range"
        )));
    }
    let m = subset.len();
    let entries = DMatrix::from_fn(m, m, |i, j| ps.overlap(subset[i], subset[j]));
    let eig = entries.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::SingularBasis { condition });
    }
    let factor = Cholesky::new(entries.clone()).ok_or(Error::SingularBasis { condition })?;
    Ok(OverlapMatrix {
        indices: subset.to_vec(),
        entries,
        condition,
        factor,
    })
}

/// Linear-inversion estimate `C0 I + sum C_lambda P_lambda` from probabilities
/// on the independent subset.
///
/// The coefficients satisfy `p = C0 + S C` with `C0 = (1 - sum C) / d`, solved
/// through the cached factor of `S` with a rank-one correction for `C0`.
/// Noisy input generally gives a matrix that is not positive.
pub fn linear_inversion(probabilities: &[f64], ps: &ProjectorSet) -> Result<HermitianMatrix> {
    let d = ps.dim();
    let subset = ps.independent_subset();
    if subset.len() != d * d - 1 {
        return Err(Error::InvalidInput(format!(
            "independent subset has {} projectors, linear inversion needs {}",
            subset.len(),
            d * d - 1
        )));
    }
    if probabilities.len() != subset.len() {
        return Err(Error::DimensionMismatch {
            expected: subset.len(),
            found: probabilities.len(),
        });
    }
    let s = overlap_matrix(ps, &subset)?;
    let m = subset.len();
    let inv_d = 1.0 / d as f64;
    let ones = DVector::from_element(m, 1.0);
    let shifted = DVector::from_iterator(m, probabilities.iter().map(|p| p - inv_d));
    let a = s.solve(&ones);
    let b = s.solve(&shifted);
    let denom = d as f64 - a.sum();
    if denom.abs() < 1e-12 {
        return Err(Error::SingularBasis {
            condition: f64::INFINITY,
        });
    }
    let coeffs = &b + &a * (b.sum() / denom);
    let c0 = (1.0 - coeffs.sum()) * inv_d;
    let mut rho = ComplexMatrix::identity(d, d) * C64::new(c0, 0.0);
    for (k, &lambda) in subset.iter().enumerate() {
        rho += ps.projector(lambda) * C64::new(coeffs[k], 0.0);
    }
    Ok(HermitianMatrix::from_symmetrized(&rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    fn check_class_completeness(ps: &ProjectorSet) {
        let d = ps.dim();
        for l in 0..ps.num_classes() {
            let mut sum = ComplexMatrix::zeros(d, d);
            for lambda in ps.class_range(l) {
                let p = ps.projector(lambda);
                assert!((&p * &p - &p).camax() < 1e-10);
                sum += p;
            }
            assert!((sum - identity(d)).camax() < 1e-10);
        }
    }

    #[test]
    fn qubit_mub() {
        let ps = mub(2).unwrap();
        assert_eq!(ps.num_classes(), 3);
        check_class_completeness(&ps);
        for a in 0..6 {
            for b in 0..6 {
                if a / 2 != b / 2 {
                    assert!((ps.overlap(a, b) - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mub_counts_match_figures() {
        let ps = mub(9).unwrap();
        assert_eq!((ps.num_classes(), ps.len()), (10, 90));
        assert_eq!(
            ps.metadata().field_polynomial.as_deref(),
            Some(&[2, 2, 1][..])
        );
        let ps = mub(32).unwrap();
        assert_eq!((ps.num_classes(), ps.len()), (33, 1056));
    }

    /// Singular values of `v` reshaped as a `da x (d / da)` matrix.
    fn schmidt_rank(v: &ComplexVector, da: usize) -> usize {
        let db = v.len() / da;
        let m = ComplexMatrix::from_fn(da, db, |i, j| v[i * db + j]);
        m.singular_values().iter().filter(|&&s| s > 1e-8).count()
    }

    #[test]
    fn subfield_classes_are_product_bases() {
        for (d, p) in [(4, 2), (8, 2), (9, 3), (16, 2), (27, 3)] {
            let ps = mub(d).unwrap();
            let basis = ps.metadata().field_basis.clone().unwrap();
            let field = GaloisField::standard(d).unwrap();
            for (i, &a) in basis.iter().enumerate() {
                for &b in &basis[i + 1..] {
                    assert_eq!(field.trace(field.mul(a, b)), 0);
                }
            }
            let mut cut = p;
            while cut < d {
                for class in 0..=p {
                    for lambda in ps.class_range(class) {
                        assert_eq!(
                            schmidt_rank(ps.vector(lambda), cut),
                            1,
                            "d={d} class {class}"
                        );
                    }
                }
                cut *= p;
            }
            let entangled = ps
                .class_range(p + 1)
                .any(|l| schmidt_rank(ps.vector(l), p) > 1);
            assert!(entangled, "d={d}");
        }
    }

    #[test]
    fn mub_rejects_composite_dimension() {
        assert!(matches!(mub(6), Err(Error::UnsupportedDimension(6))));
        assert!(matches!(mub(81), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn gell_mann_sets() {
        let g = gell_mann_observables(2).unwrap();
        assert_eq!(g.len(), 4);
        let x = g[0].matrix();
        assert_eq!(x[(0, 1)], C64::new(1.0, 0.0));
        let y = g[1].matrix();
        assert_eq!(y[(0, 1)], C64::new(0.0, -1.0));
        let z = g[2].matrix();
        assert_eq!((z[(0, 0)].re, z[(1, 1)].re), (1.0, -1.0));
        assert_eq!(gell_mann_observables(6).unwrap().len(), 36);
    }

    #[test]
    fn gell_mann_qutrit_gram() {
        let g = gell_mann_observables(3).unwrap();
        let traceless = &g[..8];
        for (i, a) in traceless.iter().enumerate() {
            assert!(a.trace().abs() < 1e-14);
            for (j, b) in traceless.iter().enumerate() {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert!((a.inner(b) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigenprojector_classes() {
        let z = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let ps = observables_to_projectors(&[z]).unwrap();
        // ascending eigenvalues: |1><1| then |0><0|
        assert!((ps.projector(0)[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!((ps.projector(1)[(0, 0)].re - 1.0).abs() < 1e-15);

        let degenerate = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 2.0]);
        let ps = observables_to_projectors(&[degenerate]).unwrap();
        check_class_completeness(&ps);
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ps.overlap(a, b) - expected).abs() < 1e-12);
            }
        }

        let g = gell_mann_observables(6).unwrap();
        let ps = observables_to_projectors(&g[..35]).unwrap();
        assert_eq!(ps.len(), 210);
        check_class_completeness(&ps);
    }

    #[test]
    fn overlap_matrix_examples() {
        let ps = mub(2).unwrap();
        let s = overlap_matrix(&ps, &ps.independent_subset()).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0]);
        assert!((s.entries() - expected).amax() < 1e-12);

        let s = overlap_matrix(&ps, &[0, 1]).unwrap();
        assert!((s.entries() - DMatrix::identity(2, 2)).amax() < 1e-12);

        // the same projector twice is singular
        assert!(matches!(
            overlap_matrix(&ps, &[0, 0]),
            Err(Error::SingularBasis { .. })
        ));
        assert!(overlap_matrix(&ps, &[7]).is_err());
    }

    #[test]
    fn inversion_of_maximally_mixed() {
        let ps = mub(3).unwrap();
        let probs = vec![1.0 / 3.0; 8];
        let rho = linear_inversion(&probs, &ps).unwrap();
        assert!((rho.matrix() - identity(3) / C64::new(3.0, 0.0)).camax() < 1e-12);
        assert!(linear_inversion(&probs[..7], &ps).is_err());
    }

    #[test]
    fn noisy_inversion_is_not_positive() {
        let ps = mub(2).unwrap();
        // |0><0|: class 0 member 0 has p = 1, the other classes have p = 1/2
        let mut probs: Vec<f64> = ps
            .independent_subset()
            .iter()
            .map(|&l| ps.projector(l)[(0, 0)].re)
            .collect();
        probs[1] += 0.2;
        let rho = linear_inversion(&probs, &ps).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() < -1e-3);
    }
}
