//! Affine-invariant Riemannian geometry on the SPD manifold.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{eig_unchecked, symmetrize, SpdCloud, SpdMatrix, SymmetricTangent};

/// Eigenvalue floor used when projecting regularized data onto the manifold.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-4;

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Squared distance from a point whose inverse square root is `w` to `x`.
pub(crate) fn dist_sq_whitened(w: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let y = symmetrize(&(w * x * w));
    y.symmetric_eigenvalues()
        .iter()
        .map(|&l| {
            let l = l.max(f64::MIN_POSITIVE).ln();
            l * l
        })
        .sum()
}

/// Affine-invariant distance `‖log(a^{-1/2} b a^{-1/2})‖_F`.
pub fn dist(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    if a == b {
        // Round-off in the whitening would otherwise leave ~1e-15.
        return Ok(0.0);
    }
    Ok(dist_sq_whitened(a.inv_sqrt().matrix(), b.matrix()).sqrt())
}

/// Affine-invariant inner product of two symmetric matrices at `base`.
pub fn inner(l1: &DMatrix<f64>, l2: &DMatrix<f64>, base: &SpdMatrix) -> Result<f64> {
    same_dim(base.dim(), l1.nrows())?;
    same_dim(base.dim(), l2.nrows())?;
    if !l1.is_square() || !l2.is_square() {
        return Err(Error::NotSquare {
            rows: l1.nrows(),
            cols: l1.ncols(),
        });
    }
    let w = base.inv_sqrt();
    let w = w.matrix();
    let a = w * l1 * w;
    let b = w * l2 * w;
    Ok(a.dot(&b))
}

/// Riemannian logarithm of `m` at `base`.
pub fn log_map(m: &SpdMatrix, base: &SpdMatrix) -> Result<SymmetricTangent> {
    same_dim(base.dim(), m.dim())?;
    let e = base.eig();
    let h = e.map(f64::sqrt);
    let w = e.map(|x| 1.0 / x.sqrt());
    let inner = symmetrize(&(&w * m.matrix() * &w));
    let l = eig_unchecked(&inner).map(f64::ln);
    Ok(SymmetricTangent::from_trusted(&h * l * &h, base.clone()))
}

/// Riemannian exponential of a tangent vector at its base point.
pub fn exp_map(l: &SymmetricTangent) -> SpdMatrix {
    let e = l.base().eig();
    let h = e.map(f64::sqrt);
    let w = e.map(|x| 1.0 / x.sqrt());
    let inner = symmetrize(&(&w * l.matrix() * &w));
    let ex = eig_unchecked(&inner).map(f64::exp);
    SpdMatrix::from_trusted(&h * ex * &h)
}

/// A point on a geodesic; `extrapolated` is set when `t ∉ [0, 1]`.
#[derive(Debug, Clone)]
pub struct GeodesicPoint {
    pub point: SpdMatrix,
    pub extrapolated: bool,
}

/// `a^{1/2} (a^{-1/2} b a^{-1/2})^t a^{1/2}`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<GeodesicPoint> {
    same_dim(a.dim(), b.dim())?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("geodesic parameter {t}")));
    }
    let e = a.eig();
    let h = e.map(f64::sqrt);
    let w = e.map(|x| 1.0 / x.sqrt());
    let inner = symmetrize(&(&w * b.matrix() * &w));
    let p = eig_unchecked(&inner).map(|x| x.powf(t));
    Ok(GeodesicPoint {
        point: SpdMatrix::from_trusted(&h * p * &h),
        extrapolated: !(0.0..=1.0).contains(&t),
    })
}

const MIN_MEAN_STEP: f64 = 1.0 / 1024.0;

/// Stopping parameters for the Karcher mean iteration.
#[derive(Debug, Clone, Copy)]
pub struct MeanOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Once the step has shrunk to its minimum the averaged tangent is
    /// rounding noise; the iterate is accepted if the residual is below this.
    pub stall_tol: f64,
}

impl Default for MeanOptions {
    fn default() -> Self {
        MeanOptions {
            tol: 1e-10,
            max_iter: 1000,
            stall_tol: 1e-7,
        }
    }
}

/// Geometric (Karcher) mean of a cloud under the affine-invariant metric.
///
/// One point returns itself, two points the geodesic midpoint. Otherwise a
/// fixed-point iteration runs from the log-Euclidean mean until the averaged
/// tangent is below `tol` in both the ambient and the Riemannian norm. Steps
/// start at unit length and are halved for good whenever the averaged tangent
/// grows or reverses direction. When the step bottoms out, the iterate is
/// accepted if the residual is below `stall_tol`.
pub fn geometric_mean(cloud: &SpdCloud, opts: MeanOptions) -> Result<SpdMatrix> {
    let pts = cloud.points();
    match pts.len() {
        0 => return Err(Error::EmptyCloud),
        1 => return Ok(pts[0].clone()),
        2 => return Ok(geodesic(&pts[0], &pts[1], 0.5)?.point),
        _ => {}
    }
    let n = pts.len() as f64;
    let d = cloud.dim();

    let mut log_sum = DMatrix::zeros(d, d);
    for p in pts {
        log_sum += p.log();
    }
    let mut x = SpdMatrix::from_trusted(eig_unchecked(&(log_sum / n)).map(f64::exp));

    // Averaged log map at `x`, with the square-root factor of `x`.
    let tangent_at = |x: &SpdMatrix| {
        let e = x.eig();
        let h = e.map(f64::sqrt);
        let w = e.map(|v| 1.0 / v.sqrt());
        let mut mean_tan = DMatrix::zeros(d, d);
        for p in pts {
            let y = symmetrize(&(&w * p.matrix() * &w));
            mean_tan += eig_unchecked(&y).map(f64::ln);
        }
        (h, mean_tan / n)
    };

    let (mut h, mut g) = tangent_at(&x);
    let mut t = 1.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        residual = (&h * &g * &h).norm().max(g.norm());
        if residual < opts.tol {
            return Ok(x);
        }
        if t < MIN_MEAN_STEP {
            if residual < opts.stall_tol {
                return Ok(x);
            }
            break;
        }
        // Widely spread clouds make the unit step overshoot along stiff
        // directions: the averaged tangent then grows or flips sign. Halve
        // the step in either case and keep the shorter step from then on.
        loop {
            let cand = SpdMatrix::from_trusted(&h * eig_unchecked(&(t * &g)).map(f64::exp) * &h);
            let (h2, g2) = tangent_at(&cand);
            if g2.norm() < g.norm() || t < MIN_MEAN_STEP {
                if g2.dot(&g) < 0.0 {
                    t *= 0.5;
                }
                (x, h, g) = (cand, h2, g2);
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::NonConvergence {
        iterations,
        residual,
        last_iterate: Box::new(x),
    })
}

/// Mean (unsquared) Riemannian distance of the cloud to `center`.
pub fn dispersion(cloud: &SpdCloud, center: &SpdMatrix) -> Result<f64> {
    cloud.check_dim(center.dim())?;
    let w = center.inv_sqrt();
    let total: f64 = cloud
        .iter()
        .map(|p| dist_sq_whitened(w.matrix(), p.matrix()).sqrt())
        .sum();
    Ok(total / cloud.len() as f64)
}

/// Replaces eigenvalues below `floor` by `floor`. Matrices already above the
/// floor are returned unchanged (only exactly symmetrized).
///
/// # Panics
/// If `floor` is not strictly positive.
pub fn project_to_spd(m: &DMatrix<f64>, floor: f64) -> SpdMatrix {
    assert!(floor > 0.0, "eigenvalue floor must be positive, got {floor}");
    assert!(m.is_square(), "projection needs a square matrix");
    let m = symmetrize(m);
    let e = eig_unchecked(&m);
    if e.min() >= floor {
        return SpdMatrix::from_trusted(m);
    }
    SpdMatrix::from_trusted(e.map(|x| x.max(floor)))
}
