//! Weighted rotation fitting on SO(D) by Riemannian steepest descent.
//!
//! Minimizes `Σ_i w_i · d²(S_i, R T_i Rᵀ)` over rotations, with a matrix
//! exponential retraction and Armijo backtracking, from the identity plus a
//! number of seeded random starts.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::dist_sq_whitened;
use crate::spd::{matrix_from_rows, matrix_to_rows, symmetrize, SpdCloud, SpdMatrix};

/// Orthogonality tolerance for [`Rotation`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const REL_DECREASE_TOL: f64 = 1e-10;

/// A proper rotation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation(DMatrix<f64>);

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        Rotation(DMatrix::identity(dim, dim))
    }

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        let err = (m.transpose() * &m - DMatrix::identity(n, n)).norm();
        if !(err < ORTHOGONALITY_TOL) {
            return Err(Error::InvalidInput(format!("matrix is not orthogonal (‖RᵀR − I‖ = {err:e})")));
        }
        if m.determinant() <= 0.0 {
            return Err(Error::InvalidInput("rotation must have determinant +1".into()));
        }
        Ok(Rotation(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// Planar rotation by `theta`.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Rotation(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
    }

    /// Haar-distributed rotation: QR of a Gaussian matrix with the usual
    /// sign fix, then a column flip if the determinant is negative.
    pub fn random(dim: usize, rng: &mut impl rand::Rng) -> Self {
        let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        Rotation(q)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(orthonormalize(&self.0 * &other.0))
    }

    /// Rotation angle from `‖R − I‖_F = 2√2 sin(θ/2)`; exact for rotations
    /// acting in a single plane.
    pub fn angle(&self) -> f64 {
        let n = self.dim();
        let r = (&self.0 - DMatrix::identity(n, n)).norm() / (2.0 * 2f64.sqrt());
        2.0 * r.min(1.0).asin()
    }

    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dim();
        (self.0.transpose() * &self.0 - DMatrix::identity(n, n)).norm()
    }

    /// `R M Rᵀ`.
    pub fn apply(&self, m: &SpdMatrix) -> SpdMatrix {
        m.congruence(&self.0)
    }
}

/// One Newton step of the polar iteration; removes rounding drift.
fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mtm = m.transpose() * &m;
    &m * 1.5 - &m * mtm * 0.5
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Rotation::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Index-paired sources and targets with per-pair weights, with the source
/// whiteners `S_i^{-1/2}` precomputed.
#[derive(Debug, Clone)]
pub struct PairedProblem {
    whiteners: Vec<DMatrix<f64>>,
    targets: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    dim: usize,
    /// Stack-allocated copy of the nonzero-weight pairs when `dim == 3`.
    fixed3: Option<Vec<(Matrix3<f64>, Matrix3<f64>, f64)>>,
}

fn sym_log(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = symmetrize(m).symmetric_eigen();
    let d = e.eigenvalues.map(|l| l.max(f64::MIN_POSITIVE).ln());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// Eigenvectors by ascending eigenvalue, or `None` if finite data is missing.
fn sorted_eigenvectors(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !m.iter().all(|x| x.is_finite()) {
        return None;
    }
    let e = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    Some(DMatrix::from_fn(m.nrows(), m.nrows(), |i, j| e.eigenvectors[(i, order[j])]))
}

fn to3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

impl PairedProblem {
    pub fn new(sources: &[SpdMatrix], targets: &[SpdMatrix], weights: &[f64]) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: sources.len(),
                right: targets.len(),
            });
        }
        if weights.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: targets.len(),
                right: weights.len(),
            });
        }
        let dim = sources.first().ok_or(Error::EmptyCloud)?.dim();
        for m in sources.iter().chain(targets) {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("weight {w} must be finite and nonnegative")));
        }
        Ok(PairedProblem::assemble(
            sources.iter().map(|s| s.inv_sqrt().into_matrix()).collect(),
            targets.iter().map(|t| t.matrix().clone()).collect(),
            weights.to_vec(),
            dim,
        ))
    }

    fn assemble(whiteners: Vec<DMatrix<f64>>, targets: Vec<DMatrix<f64>>, weights: Vec<f64>, dim: usize) -> Self {
        let fixed3 = (dim == 3).then(|| {
            whiteners
                .iter()
                .zip(&targets)
                .zip(&weights)
                .filter(|(_, &w)| w != 0.0)
                .map(|((wh, t), &w)| (to3(wh), to3(t), w))
                .collect()
        });
        PairedProblem {
            whiteners,
            targets,
            weights,
            dim,
            fixed3,
        }
    }

    /// Builds a problem from already whitened sources; `whiteners[j]` must be
    /// `S_j^{-1/2}` and `source_of[i]` names the source paired with target `i`.
    pub(crate) fn from_whiteners(
        whiteners: &[DMatrix<f64>],
        source_of: &[usize],
        targets: &[SpdMatrix],
        weights: &[f64],
    ) -> Self {
        debug_assert_eq!(source_of.len(), targets.len());
        PairedProblem::assemble(
            source_of.iter().map(|&j| whiteners[j].clone()).collect(),
            targets.iter().map(|t| t.matrix().clone()).collect(),
            weights.to_vec(),
            targets[0].dim(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rotations carrying the eigenframe of `Σ w (log T)²` onto that of
    /// `Σ w (log S)²`, one per admissible choice of axis signs. These are
    /// exact solutions when the targets are a rotated copy of the sources
    /// with distinct moment eigenvalues.
    pub fn moment_aligned_starts(&self) -> Vec<Rotation> {
        let n = self.dim;
        let mut cs = DMatrix::zeros(n, n);
        let mut ct = DMatrix::zeros(n, n);
        for ((wh, t), &w) in self.whiteners.iter().zip(&self.targets).zip(&self.weights) {
            // log S = −2 log S^{-1/2}
            let ls = sym_log(wh) * -2.0;
            let lt = sym_log(t);
            cs += &ls * &ls * w;
            ct += &lt * &lt * w;
        }
        let (Some(vs), Some(vt)) = (sorted_eigenvectors(&cs), sorted_eigenvectors(&ct)) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for mask in 0..(1usize << n) {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }));
            let r = &vs * d * vt.transpose();
            if r.determinant() > 0.0 {
                if let Ok(rot) = Rotation::new(r) {
                    out.push(rot);
                }
            }
        }
        out
    }

    /// Objective at an arbitrary (not necessarily orthogonal) matrix `r`.
    pub fn objective(&self, r: &DMatrix<f64>) -> f64 {
        if let Some(pairs) = &self.fixed3 {
            let r = to3(r);
            let rt = r.transpose();
            return pairs
                .iter()
                .map(|(wh, t, w)| {
                    let y = wh * r * t * rt * wh;
                    let y = (y + y.transpose()) * 0.5;
                    w * y.symmetric_eigenvalues().iter().map(|&l| l.max(f64::MIN_POSITIVE).ln().powi(2)).sum::<f64>()
                })
                .sum();
        }
        let rt = r.transpose();
        self.whiteners
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|((wh, t), &w)| w * dist_sq_whitened(wh, &(r * t * &rt)))
            .sum()
    }

    /// Gradient of [`Self::objective`] with respect to the entries of `r`.
    ///
    /// With `Y = W X W`, `X = R T Rᵀ`, `W = S^{-1/2}`, the derivative of
    /// `‖log Y‖²` in `X` is `2 W log(Y) Y⁻¹ W`, and the chain rule through
    /// `X` contributes the factor `2 (·) R T`.
    pub fn gradient(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        if let Some(pairs) = &self.fixed3 {
            let r = to3(r);
            let rt = r.transpose();
            let mut g = Matrix3::zeros();
            for (wh, t, w) in pairs {
                let rtm = r * t;
                let y = wh * rtm * rt * wh;
                let e = ((y + y.transpose()) * 0.5).symmetric_eigen();
                let d = e.eigenvalues.map(|l| l.ln() / l);
                let f = e.eigenvectors * Matrix3::from_diagonal(&d) * e.eigenvectors.transpose();
                g += (wh * f * wh) * rtm * (4.0 * w);
            }
            return DMatrix::from_fn(3, 3, |i, j| g[(i, j)]);
        }
        let rt = r.transpose();
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for ((wh, t), &w) in self.whiteners.iter().zip(&self.targets).zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let rtm = r * t;
            let y = symmetrize(&(wh * &rtm * &rt * wh));
            let f = crate::spd::eig_unchecked(&y).map(|l| l.ln() / l);
            g += (wh * f * wh) * rtm * (4.0 * w);
        }
        g
    }
}

/// `Σ_i w_i d²(S_i, R T_i Rᵀ)` for index-paired clouds.
pub fn objective(r: &Rotation, sources: &SpdCloud, targets: &SpdCloud, weights: &[f64]) -> Result<f64> {
    let p = PairedProblem::new(sources.points(), targets.points(), weights)?;
    check_rotation_dim(r, p.dim())?;
    Ok(p.objective(r.matrix()))
}

/// Ambient (Euclidean) gradient of [`objective`] in the entries of `R`.
pub fn euclidean_gradient(
    r: &Rotation,
    sources: &SpdCloud,
    targets: &SpdCloud,
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    let p = PairedProblem::new(sources.points(), targets.points(), weights)?;
    check_rotation_dim(r, p.dim())?;
    Ok(p.gradient(r.matrix()))
}

fn check_rotation_dim(r: &Rotation, dim: usize) -> Result<()> {
    if r.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: r.dim(),
        });
    }
    Ok(())
}

/// Skew-symmetric part of `Rᵀ G`: the Riemannian gradient in body
/// coordinates.
pub fn riemannian_direction(r: &Rotation, ambient_grad: &DMatrix<f64>) -> DMatrix<f64> {
    let a = r.matrix().transpose() * ambient_grad;
    (&a - a.transpose()) * 0.5
}

/// Retraction `R · exp(−step · ξ)` with `ξ = skew(Rᵀ G)`.
pub fn riemannian_step(r: &Rotation, ambient_grad: &DMatrix<f64>, step: f64) -> Rotation {
    let xi = riemannian_direction(r, ambient_grad);
    retract(r, &xi, step)
}

fn retract(r: &Rotation, xi: &DMatrix<f64>, step: f64) -> Rotation {
    if step == 0.0 || xi.iter().all(|&x| x == 0.0) {
        return r.clone();
    }
    let e = (xi * -step).exp();
    Rotation(orthonormalize(r.matrix() * e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationConfig {
    /// Total starts: the identity, then the moment-aligned rotations, then
    /// random ones.
    pub restarts: usize,
    pub max_iter: usize,
    /// Threshold on the Riemannian gradient norm `‖skew(RᵀG)‖_F`.
    pub grad_tol: f64,
    /// Rotation angle (radians) of the first trial step of a restart.
    pub step_init: f64,
    pub seed: u64,
}

impl Default for RotationConfig {
    fn default() -> Self {
        RotationConfig {
            restarts: 8,
            max_iter: 100,
            grad_tol: 1e-7,
            step_init: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub best_rotation: Rotation,
    pub best_objective: f64,
    /// Index of the winning start (0 is the identity).
    pub best_restart: usize,
    /// Objective per iteration of the winning start, starting value first.
    pub objective_history: Vec<f64>,
    pub restarts: usize,
    pub converged: bool,
    pub iterations: usize,
}

struct RunResult {
    rotation: Rotation,
    objective: f64,
    history: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn descend(problem: &PairedProblem, start: Rotation, cfg: &RotationConfig) -> RunResult {
    let mut r = start;
    let mut f = problem.objective(r.matrix());
    let mut history = vec![f];
    // Previous accepted step and its body-frame direction.
    let mut prev: Option<(f64, DMatrix<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let g = problem.gradient(r.matrix());
        let xi = riemannian_direction(&r, &g);
        let gnorm = xi.norm();
        if gnorm < cfg.grad_tol || f == 0.0 {
            converged = true;
            break;
        }
        // Barzilai-Borwein trial step. The retraction moves along ξ_prev, so
        // ξ_prev reads the same in the old and new body frames.
        let mut t = match &prev {
            None => cfg.step_init / gnorm,
            Some((tp, xp)) => {
                let curvature = xp.dot(&(xp - &xi));
                let bb = if curvature > 0.0 { tp * xp.norm_squared() / curvature } else { 2.0 * tp };
                bb.min(PI / gnorm)
            }
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = retract(&r, &xi, t);
            let fc = problem.objective(cand.matrix());
            if fc <= f - ARMIJO_C * t * gnorm * gnorm {
                accepted = Some((cand, fc));
                break;
            }
            t *= BACKTRACK;
        }
        iterations += 1;
        let Some((cand, fc)) = accepted else {
            // No decrease representable at this precision: stationary.
            converged = true;
            break;
        };
        let rel = (f - fc) / f.max(f64::MIN_POSITIVE);
        r = cand;
        f = fc;
        history.push(f);
        prev = Some((t, xi));
        if rel < REL_DECREASE_TOL {
            converged = true;
            break;
        }
    }
    RunResult {
        rotation: r,
        objective: f,
        history,
        converged,
        iterations,
    }
}

/// Multi-start steepest descent over the problem; the lowest final objective
/// wins, ties going to the earlier start.
pub fn optimize_problem(problem: &PairedProblem, cfg: &RotationConfig) -> OptimizerReport {
    let dim = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts = cfg.restarts.max(1);
    let mut seeded = vec![Rotation::identity(dim)];
    seeded.extend(problem.moment_aligned_starts());
    let mut best: Option<(usize, RunResult)> = None;
    for k in 0..starts {
        let start = match seeded.get(k) {
            Some(r) => r.clone(),
            None => Rotation::random(dim, &mut rng),
        };
        let run = descend(problem, start, cfg);
        let better = match &best {
            None => true,
            Some((_, b)) => run.objective < b.objective,
        };
        if better {
            best = Some((k, run));
        }
    }
    let (k, run) = best.expect("at least one start");
    OptimizerReport {
        best_rotation: run.rotation,
        best_objective: run.objective,
        best_restart: k,
        objective_history: run.history,
        restarts: starts,
        converged: run.converged,
        iterations: run.iterations,
    }
}

pub fn optimize(
    sources: &SpdCloud,
    targets: &SpdCloud,
    weights: &[f64],
    cfg: &RotationConfig,
) -> Result<OptimizerReport> {
    let p = PairedProblem::new(sources.points(), targets.points(), weights)?;
    Ok(optimize_problem(&p, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(v).unwrap()
    }

    #[test]
    fn objective_examples() {
        let s = SpdCloud::new(vec![diag(&[4.0, 1.0])]).unwrap();
        let t = SpdCloud::new(vec![diag(&[1.0, 4.0])]).unwrap();
        let f = objective(&Rotation::identity(2), &s, &t, &[1.0]).unwrap();
        let l4 = 4f64.ln();
        assert!((f - 2.0 * l4 * l4).abs() < 1e-12);
        assert_eq!(objective(&Rotation::identity(2), &s, &s, &[1.0]).unwrap(), 0.0);

        let r = Rotation::planar(0.7);
        let rt = SpdCloud::new(vec![r.transpose().apply(s.get(0))]).unwrap();
        assert!(objective(&r, &s, &rt, &[1.0]).unwrap() < 1e-20);
    }

    #[test]
    fn objective_length_mismatch() {
        let s = SpdCloud::new(vec![diag(&[4.0, 1.0])]).unwrap();
        let t = SpdCloud::new(vec![diag(&[1.0, 4.0]), diag(&[1.0, 2.0])]).unwrap();
        assert!(matches!(
            objective(&Rotation::identity(2), &s, &t, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let s = SpdCloud::new(vec![diag(&[4.0, 1.0])]).unwrap();
        let t = SpdCloud::new(vec![diag(&[1.0, 3.0])]).unwrap();
        let g = euclidean_gradient(&Rotation::planar(0.3), &s, &t, &[0.0]).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn step_examples() {
        let r = Rotation::planar(0.4);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(riemannian_step(&r, &zero, 1.0), r);

        // With G = ξ at R = I, skew(G) = ξ and the step rotates by −θ.
        let xi = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let theta = 0.9;
        let out = riemannian_step(&Rotation::identity(2), &xi, theta);
        assert!((out.matrix() - Rotation::planar(-theta).matrix()).norm() < 1e-12);
        assert!(out.orthogonality_error() < 1e-10);
    }

    #[test]
    fn rotation_validation_and_angle() {
        assert!(Rotation::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(Rotation::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        assert!((Rotation::planar(0.25).angle() - 0.25).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let q = Rotation::random(3, &mut rng);
            assert!(q.orthogonality_error() < 1e-12);
            assert!(q.matrix().determinant() > 0.0);
        }
    }

    #[test]
    fn recovers_planted_rotation() {
        let pts = vec![diag(&[4.0, 1.0]), diag(&[0.5, 2.0]), diag(&[3.0, 0.2])];
        let s = SpdCloud::new(pts.clone()).unwrap();
        let r_star = Rotation::planar(1.1);
        // S_i = R* T_i R*ᵀ  ⇒  T_i = R*ᵀ S_i R*
        let t = s.map(|p| r_star.transpose().apply(p));
        let rep = optimize(&s, &t, &[1.0; 3], &RotationConfig::default()).unwrap();
        assert!(rep.best_objective < 1e-8, "{}", rep.best_objective);
        // Diagonal data is invariant under the half-turn, so compare the action.
        for (sp, tp) in s.iter().zip(t.iter()) {
            assert!(rep.best_rotation.apply(tp).frobenius_distance(sp) < 1e-4);
        }
        for w in rep.objective_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn identical_clouds_stay_at_identity() {
        let s = SpdCloud::new(vec![diag(&[4.0, 1.0, 2.0]), diag(&[0.5, 2.0, 1.0])]).unwrap();
        let rep = optimize(&s, &s, &[1.0, 1.0], &RotationConfig::default()).unwrap();
        assert!(rep.best_objective < 1e-20, "{}", rep.best_objective);
        for p in s.iter() {
            assert!(rep.best_rotation.apply(p).frobenius_distance(p) < 1e-9);
        }
        assert!(rep.converged);
    }

    #[test]
    fn moment_alignment_solves_exact_congruence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = Rotation::random(3, &mut rng);
        let s: Vec<SpdMatrix> = [[5.0, 1.0, 0.3], [2.0, 0.7, 1.1], [0.4, 3.0, 1.0]]
            .iter()
            .map(|d| diag(d).congruence(Rotation::random(3, &mut rng).matrix()))
            .collect();
        let t: Vec<SpdMatrix> = s.iter().map(|m| m.congruence(truth.matrix())).collect();
        let p = PairedProblem::new(&s, &t, &[1.0; 3]).unwrap();
        let starts = p.moment_aligned_starts();
        assert_eq!(starts.len(), 4);
        let best = starts.iter().map(|r| p.objective(r.matrix())).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-18, "{best}");
    }

    #[test]
    fn rotation_json() {
        let r = Rotation::planar(0.3);
        let text = serde_json::to_string(&r).unwrap();
        let back: Rotation = serde_json::from_str(&text).unwrap();
        assert!((back.matrix() - r.matrix()).norm() < 1e-15);
        assert!(serde_json::from_str::<Rotation>("[[1,0],[0,-1]]").is_err());
    }
}
