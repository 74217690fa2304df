//! SPD matrix types and eigendecomposition-based matrix functions.
//!
//! Every matrix function here goes through one symmetric eigendecomposition,
//! `V diag(f(λ)) Vᵀ`, and the result is re-symmetrized exactly so that
//! downstream products stay on the symmetric subspace.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry invariant of in-memory matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative tolerance applied when loading matrices from JSON.
pub const LOAD_SYMMETRY_TOL: f64 = 1e-9;

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// Rebuilds `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest violation of `|m_ij − m_ji| ≤ tol · max(1, |m_ij|, |m_ji|)`, as a
/// relative quantity. Returns 0 for exactly symmetric input.
fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            let scale = 1f64.max(a.abs()).max(b.abs());
            let r = (a - b).abs() / scale;
            if r.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(r);
        }
    }
    worst
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    check_square(m)?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let asym = relative_asymmetry(m);
    if asym > tol {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Symmetric eigendecomposition with ascending eigenvalues.
///
/// Ties keep the solver's column order, so the result is deterministic.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEig> {
    check_symmetric(m, SYMMETRY_TOL)?;
    Ok(eig_unchecked(m))
}

pub(crate) fn eig_unchecked(m: &DMatrix<f64>) -> SymEig {
    let e = m.clone().symmetric_eigen();
    let n = e.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&k| e.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &e.eigenvectors.column(src));
    }
    SymEig { values, vectors }
}

/// A symmetric positive-definite matrix.
#[derive(Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpdMatrix").field(&self.rows()).finish()
    }
}

impl SpdMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness, then
    /// stores the exactly symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, SYMMETRY_TOL)
    }

    fn with_tolerance(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_symmetric(&m, tol)?;
        let m = symmetrize(&m);
        let min = eig_unchecked(&m).min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(SpdMatrix(m))
    }

    /// Wraps a matrix known to be SPD by construction (congruences and
    /// spectral maps with positive output). Symmetrizes exactly.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        SpdMatrix(symmetrize(&m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn eig(&self) -> SymEig {
        eig_unchecked(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().min()
    }

    /// Matrix logarithm; a symmetric (tangent) matrix.
    pub fn log(&self) -> DMatrix<f64> {
        self.eig().map(f64::ln)
    }

    pub fn sqrt(&self) -> SpdMatrix {
        SpdMatrix(self.eig().map(f64::sqrt))
    }

    pub fn inv_sqrt(&self) -> SpdMatrix {
        SpdMatrix(self.eig().map(|x| 1.0 / x.sqrt()))
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix(self.eig().map(f64::recip))
    }

    /// Fractional power via the eigenvalue map `λ ↦ λˢ`.
    pub fn powf(&self, s: f64) -> SpdMatrix {
        SpdMatrix(self.eig().map(|x| x.powf(s)))
    }

    /// `A M Aᵀ`. The caller guarantees `A` is invertible.
    pub fn congruence(&self, a: &DMatrix<f64>) -> SpdMatrix {
        SpdMatrix::from_trusted(a * &self.0 * a.transpose())
    }

    /// `A M A` for symmetric `A`, the recentering form.
    pub(crate) fn sandwich(&self, a: &DMatrix<f64>) -> SpdMatrix {
        SpdMatrix::from_trusted(a * &self.0 * a)
    }

    pub fn frobenius_distance(&self, other: &SpdMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// Matrix exponential of a symmetric matrix; always SPD.
pub fn exp_sym(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    check_symmetric(m, SYMMETRY_TOL)?;
    Ok(SpdMatrix(eig_unchecked(&symmetrize(m)).map(f64::exp)))
}

/// Scalar functions that can be lifted to matrices through the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Pow(f64),
}

/// Applies `f` spectrally. `Exp` accepts any symmetric matrix; the others
/// require an SPD argument.
pub fn mat_fn(m: &DMatrix<f64>, f: MatrixFunction) -> Result<DMatrix<f64>> {
    if let MatrixFunction::Exp = f {
        return exp_sym(m).map(SpdMatrix::into_matrix);
    }
    let spd = SpdMatrix::new(m.clone())?;
    Ok(match f {
        MatrixFunction::Log => spd.log(),
        MatrixFunction::Sqrt => spd.sqrt().0,
        MatrixFunction::InvSqrt => spd.inv_sqrt().0,
        MatrixFunction::Pow(s) => spd.powf(s).0,
        MatrixFunction::Exp => unreachable!(),
    })
}

/// A symmetric matrix living in the tangent space at `base`.
#[derive(Debug, Clone)]
pub struct SymmetricTangent {
    matrix: DMatrix<f64>,
    base: SpdMatrix,
}

impl SymmetricTangent {
    pub fn new(matrix: DMatrix<f64>, base: SpdMatrix) -> Result<Self> {
        check_symmetric(&matrix, SYMMETRY_TOL)?;
        if matrix.nrows() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(SymmetricTangent {
            matrix: symmetrize(&matrix),
            base,
        })
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let d = base.dim();
        SymmetricTangent {
            matrix: DMatrix::zeros(d, d),
            base,
        }
    }

    pub(crate) fn from_trusted(matrix: DMatrix<f64>, base: SpdMatrix) -> Self {
        SymmetricTangent {
            matrix: symmetrize(&matrix),
            base,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Riemannian norm at the base point.
    pub fn norm(&self) -> f64 {
        crate::metric::inner(&self.matrix, &self.matrix, &self.base)
            .map(f64::sqrt)
            .unwrap_or(f64::NAN)
    }

    pub fn scale(&self, s: f64) -> Self {
        SymmetricTangent {
            matrix: &self.matrix * s,
            base: self.base.clone(),
        }
    }
}

/// An ordered, non-empty set of SPD matrices of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudRepr", into = "CloudRepr")]
pub struct SpdCloud {
    points: Vec<SpdMatrix>,
    labels: Option<Vec<String>>,
}

impl SpdCloud {
    pub fn new(points: Vec<SpdMatrix>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let dim = first.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(SpdCloud {
            points,
            labels: None,
        })
    }

    pub fn with_labels(points: Vec<SpdMatrix>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: labels.len(),
            });
        }
        let mut cloud = Self::new(points)?;
        cloud.labels = Some(labels);
        Ok(cloud)
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpdMatrix] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &SpdMatrix {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpdMatrix> {
        self.points.iter()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn into_points(self) -> Vec<SpdMatrix> {
        self.points
    }

    /// Applies `f` to every point, keeping labels.
    pub fn map(&self, f: impl FnMut(&SpdMatrix) -> SpdMatrix) -> SpdCloud {
        SpdCloud {
            points: self.points.iter().map(f).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Sub-cloud at the given indices (labels follow).
    pub fn select(&self, indices: &[usize]) -> Result<SpdCloud> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidInput(format!(
                "index {bad} out of range for cloud of {}",
                self.len()
            )));
        }
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        let mut out = SpdCloud::new(points)?;
        out.labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        Ok(out)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare {
            rows: n,
            cols: r.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SpdRepr {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpdRepr {
            dim: self.dim(),
            rows: self.rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SpdRepr::deserialize(d)?;
        SpdMatrix::from_repr(repr).map_err(serde::de::Error::custom)
    }
}

impl SpdMatrix {
    fn from_repr(repr: SpdRepr) -> Result<Self> {
        if repr.rows.len() != repr.dim {
            return Err(Error::DimensionMismatch {
                expected: repr.dim,
                found: repr.rows.len(),
            });
        }
        let m = matrix_from_rows(&repr.rows)?;
        SpdMatrix::with_tolerance(m, LOAD_SYMMETRY_TOL)
    }

    /// Parses the `{ "dim": D, "rows": [[...]] }` document.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("SPD matrix serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct CloudRepr {
    points: Vec<SpdMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl TryFrom<CloudRepr> for SpdCloud {
    type Error = Error;

    fn try_from(r: CloudRepr) -> Result<Self> {
        match r.labels {
            Some(l) => SpdCloud::with_labels(r.points, l),
            None => SpdCloud::new(r.points),
        }
    }
}

impl From<SpdCloud> for CloudRepr {
    fn from(c: SpdCloud) -> Self {
        CloudRepr {
            points: c.points,
            labels: c.labels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::identity(3, 3)).norm() < 1e-12);

        let e = sym_eig(&m2(4.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 4.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_hand_solved_2x2() {
        // λ² − 3λ + 1 = 0
        let m = m2(2.0, -1.0, -1.0, 1.0);
        let e = sym_eig(&m).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e.values[0] - (3.0 - s5) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (3.0 + s5) / 2.0).abs() < 1e-14);
        let rebuilt = e.map(|x| x);
        assert!((rebuilt - &m).norm() / m.norm() < 1e-10);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let err = sym_eig(&m2(1.0, 0.5, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn matrix_functions() {
        let log_i = mat_fn(&DMatrix::identity(3, 3), MatrixFunction::Log).unwrap();
        assert_eq!(log_i.norm(), 0.0);

        let r = mat_fn(&m2(4.0, 0.0, 0.0, 1.0), MatrixFunction::Pow(0.5)).unwrap();
        assert!((r - m2(2.0, 0.0, 0.0, 1.0)).norm() < 1e-14);

        let m = m2(2.0, -1.0, -1.0, 1.0);
        let back = exp_sym(&mat_fn(&m, MatrixFunction::Log).unwrap()).unwrap();
        assert!((back.matrix() - &m).norm() < 1e-10);

        let s = mat_fn(&m, MatrixFunction::Sqrt).unwrap();
        assert!((&s * &s - &m).norm() < 1e-12);
        let is = mat_fn(&m, MatrixFunction::InvSqrt).unwrap();
        assert!((&is * &s - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn log_of_non_spd_is_domain_error() {
        let err = mat_fn(&m2(1.0, 0.0, 0.0, -1.0), MatrixFunction::Log).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        let err = mat_fn(&m2(1.0, 0.0, 0.0, 0.0), MatrixFunction::Sqrt).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn exp_accepts_indefinite_symmetric() {
        let e = mat_fn(&m2(-1.0, 2.0, 2.0, 0.5), MatrixFunction::Exp).unwrap();
        assert!(SpdMatrix::new(e).is_ok());
    }

    #[test]
    fn json_round_trip_and_symmetrization() {
        let text = r#"{"dim":2,"rows":[[2.0,-1.0],[-1.0000000000001,1.0]]}"#;
        let m = SpdMatrix::from_json(text).unwrap();
        assert_eq!(m.matrix()[(0, 1)], m.matrix()[(1, 0)]);
        let again = SpdMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn json_rejects_bad_documents() {
        for bad in [
            r#"{"dim":2,"rows":[[1.0,0.1],[0.0,1.0]]}"#,
            r#"{"dim":2,"rows":[[1.0,0.0],[0.0,-1.0]]}"#,
            r#"{"dim":3,"rows":[[1.0,0.0],[0.0,1.0]]}"#,
            r#"{"dim":2,"rows":[[1.0,0.0,0.0],[0.0,1.0]]}"#,
            r#"{"dim":0,"rows":[]}"#,
        ] {
            assert!(SpdMatrix::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cloud_invariants() {
        assert!(matches!(SpdCloud::new(vec![]), Err(Error::EmptyCloud)));
        let mixed = SpdCloud::new(vec![SpdMatrix::identity(2), SpdMatrix::identity(3)]);
        assert!(matches!(mixed, Err(Error::DimensionMismatch { .. })));
        let labelled = SpdCloud::with_labels(
            vec![SpdMatrix::identity(2), SpdMatrix::identity(2)],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let sub = labelled.select(&[1]).unwrap();
        assert_eq!(sub.labels().unwrap(), &["b".to_string()]);
    }
}
