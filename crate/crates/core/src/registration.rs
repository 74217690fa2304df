//! Manifold-aware ICP with parallel-transport initialization.
//!
//! Stages, each a map from SPD to SPD:
//!
//! 1. optional parallel transport `T ↦ E T Eᵀ`, `E = (S̄ T̄⁻¹)^{1/2}`
//! 2. recentering `M ↦ M̄^{-1/2} M M̄^{-1/2}` of both clouds
//! 3. dispersion matching `T ↦ Tˢ`, `s = c_S / c_T`
//! 4. alternating correspondence matching and rotation fitting, `T ↦ R T Rᵀ`
//! 5. translation onto the student mean `T ↦ S̄^{1/2} T S̄^{1/2}`
//!
//! Only the parameters are kept; [`RigidSpdTransform::apply`] replays the
//! stages on new teacher points.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{cloud_features, match_features, CorrespondenceSet, MatchMode};
use crate::metric::{dispersion, geometric_mean, MeanOptions};
use crate::rotation::{optimize_problem, OptimizerReport, PairedProblem, Rotation, RotationConfig};
use crate::spd::{matrix_from_rows, matrix_to_rows, SpdCloud, SpdMatrix};

/// Stop the outer loop once a rotation update is smaller than this (rad).
pub const ICP_ANGLE_TOL: f64 = 1e-6;
/// Or once the fitted objective changes by less than this, relatively.
pub const ICP_REL_OBJECTIVE_TOL: f64 = 1e-10;

pub const TRANSFORM_FORMAT_VERSION: u32 = 1;

/// Transport matrix `E = (S̄ T̄⁻¹)^{1/2}` (principal root), built as
/// `S̄^{1/2} A^{1/2} S̄^{-1/2}` with `A = S̄^{1/2} T̄⁻¹ S̄^{1/2}`; satisfies
/// `E T̄ Eᵀ = S̄`.
pub fn pt_matrix(student_mean: &SpdMatrix, teacher_mean: &SpdMatrix) -> Result<DMatrix<f64>> {
    if student_mean.dim() != teacher_mean.dim() {
        return Err(Error::DimensionMismatch {
            expected: student_mean.dim(),
            found: teacher_mean.dim(),
        });
    }
    let e = student_mean.eig();
    let h = e.map(f64::sqrt);
    let w = e.map(|x| 1.0 / x.sqrt());
    let a = teacher_mean.inverse().sandwich(&h);
    let e_mat = &h * a.sqrt().matrix() * &w;
    let check = teacher_mean.congruence(&e_mat);
    let rel = check.frobenius_distance(student_mean) / student_mean.matrix().norm();
    if !(rel < 1e-6) {
        return Err(Error::SquareRoot(format!(
            "transport does not map the teacher mean onto the student mean (rel. error {rel:e})"
        )));
    }
    Ok(e_mat)
}

/// Parallel transport of the teacher cloud onto the student mean.
pub fn pt_initialize(targets: &SpdCloud, student_mean: &SpdMatrix, teacher_mean: &SpdMatrix) -> Result<SpdCloud> {
    targets.check_dim(student_mean.dim())?;
    let e = pt_matrix(student_mean, teacher_mean)?;
    Ok(targets.map(|t| t.congruence(&e)))
}

/// `M ↦ mean^{-1/2} M mean^{-1/2}`.
pub fn recenter(cloud: &SpdCloud, mean: &SpdMatrix) -> Result<SpdCloud> {
    cloud.check_dim(mean.dim())?;
    let w = mean.inv_sqrt();
    Ok(cloud.map(|m| m.sandwich(w.matrix())))
}

/// `M ↦ M^exponent`; scales every distance to the identity by `exponent`.
pub fn scale_dispersion(cloud: &SpdCloud, exponent: f64) -> Result<SpdCloud> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidInput(format!("scale exponent {exponent} must be positive")));
    }
    Ok(cloud.map(|m| m.powf(exponent)))
}

/// `M ↦ R M Rᵀ`.
pub fn apply_rotation(cloud: &SpdCloud, r: &Rotation) -> Result<SpdCloud> {
    cloud.check_dim(r.dim())?;
    Ok(cloud.map(|m| r.apply(m)))
}

/// `M ↦ S̄^{1/2} M S̄^{1/2}`.
pub fn translate_to_source(cloud: &SpdCloud, student_mean: &SpdMatrix) -> Result<SpdCloud> {
    cloud.check_dim(student_mean.dim())?;
    let h = student_mean.sqrt();
    Ok(cloud.map(|m| m.sandwich(h.matrix())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub use_pt: bool,
    pub weight_exponent: u32,
    pub icp_max_iter: usize,
    /// Per-iteration optimizer settings; its `seed` is overridden by
    /// streams derived from [`FitConfig::seed`].
    pub rotation: RotationConfig,
    pub seed: u64,
    pub match_mode: MatchMode,
    /// Permit `|𝒮| ≠ |𝒯|`.
    pub allow_unequal: bool,
    pub mean_tol: f64,
    pub mean_max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let mean = MeanOptions::default();
        FitConfig {
            use_pt: true,
            weight_exponent: 3,
            icp_max_iter: 100,
            rotation: RotationConfig::default(),
            seed: 0,
            match_mode: MatchMode::ManyToOne,
            allow_unequal: false,
            mean_tol: mean.tol,
            mean_max_iter: mean.max_iter,
        }
    }
}

impl FitConfig {
    fn mean_options(&self) -> MeanOptions {
        MeanOptions {
            tol: self.mean_tol,
            max_iter: self.mean_max_iter,
            ..MeanOptions::default()
        }
    }
}

/// Fitted registration parameters.
#[derive(Debug, Clone)]
pub struct RigidSpdTransform {
    teacher_mean: SpdMatrix,
    recenter_mean: SpdMatrix,
    student_mean: SpdMatrix,
    scale_exponent: f64,
    rotation: Rotation,
    pt_matrix: Option<DMatrix<f64>>,
    recenter_w: DMatrix<f64>,
    student_h: DMatrix<f64>,
}

impl RigidSpdTransform {
    /// `recenter_mean` is the teacher mean actually used for recentering:
    /// the mean of the transported cloud when `pt_matrix` is set, otherwise
    /// `teacher_mean` itself.
    pub fn new(
        teacher_mean: SpdMatrix,
        recenter_mean: SpdMatrix,
        student_mean: SpdMatrix,
        scale_exponent: f64,
        rotation: Rotation,
        pt_matrix: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let d = teacher_mean.dim();
        for found in [recenter_mean.dim(), student_mean.dim(), rotation.dim()] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        if let Some(e) = &pt_matrix {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: e.nrows(),
                });
            }
            if !(e.determinant().abs() > 0.0) || e.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("transport matrix must be invertible".into()));
            }
        }
        if !(scale_exponent > 0.0 && scale_exponent.is_finite()) {
            return Err(Error::InvalidInput(format!("scale exponent {scale_exponent} must be positive")));
        }
        Ok(RigidSpdTransform {
            recenter_w: recenter_mean.inv_sqrt().into_matrix(),
            student_h: student_mean.sqrt().into_matrix(),
            teacher_mean,
            recenter_mean,
            student_mean,
            scale_exponent,
            rotation,
            pt_matrix,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let i = SpdMatrix::identity(dim);
        Self::new(i.clone(), i.clone(), i, 1.0, Rotation::identity(dim), None).expect("identity transform")
    }

    pub fn dim(&self) -> usize {
        self.teacher_mean.dim()
    }

    pub fn teacher_mean(&self) -> &SpdMatrix {
        &self.teacher_mean
    }

    pub fn recenter_mean(&self) -> &SpdMatrix {
        &self.recenter_mean
    }

    pub fn student_mean(&self) -> &SpdMatrix {
        &self.student_mean
    }

    pub fn scale_exponent(&self) -> f64 {
        self.scale_exponent
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn pt_matrix(&self) -> Option<&DMatrix<f64>> {
        self.pt_matrix.as_ref()
    }

    pub fn used_pt(&self) -> bool {
        self.pt_matrix.is_some()
    }

    /// Transport, recenter, scale and rotate; the point ends up in the
    /// identity-centred student frame.
    pub fn to_aligned_frame(&self, m: &SpdMatrix) -> SpdMatrix {
        let transported;
        let m = match &self.pt_matrix {
            Some(e) => {
                transported = m.congruence(e);
                &transported
            }
            None => m,
        };
        let scaled = m.sandwich(&self.recenter_w).powf(self.scale_exponent);
        self.rotation.apply(&scaled)
    }

    pub fn apply_point(&self, m: &SpdMatrix) -> Result<SpdMatrix> {
        if m.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.dim(),
            });
        }
        Ok(self.to_aligned_frame(m).sandwich(&self.student_h))
    }

    /// Maps new teacher points into the student domain; labels are kept.
    pub fn apply(&self, cloud: &SpdCloud) -> Result<SpdCloud> {
        cloud.check_dim(self.dim())?;
        Ok(cloud.map(|m| self.to_aligned_frame(m).sandwich(&self.student_h)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TransformRepr::from(self)).expect("transform serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: TransformRepr = serde_json::from_str(text)?;
        repr.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    version: u32,
    dim: usize,
    teacher_mean: SpdMatrix,
    student_mean: SpdMatrix,
    scale_exponent: f64,
    rotation: Vec<Vec<f64>>,
    pt_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recenter_mean: Option<SpdMatrix>,
}

impl From<&RigidSpdTransform> for TransformRepr {
    fn from(t: &RigidSpdTransform) -> Self {
        TransformRepr {
            version: TRANSFORM_FORMAT_VERSION,
            dim: t.dim(),
            teacher_mean: t.teacher_mean.clone(),
            student_mean: t.student_mean.clone(),
            scale_exponent: t.scale_exponent,
            rotation: t.rotation.rows(),
            pt_matrix: t.pt_matrix.as_ref().map(matrix_to_rows),
            recenter_mean: Some(t.recenter_mean.clone()),
        }
    }
}

impl TryFrom<TransformRepr> for RigidSpdTransform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        if r.version != TRANSFORM_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(r.version));
        }
        if r.teacher_mean.dim() != r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: r.teacher_mean.dim(),
            });
        }
        let rotation = Rotation::from_rows(&r.rotation)?;
        let pt = r.pt_matrix.as_deref().map(matrix_from_rows).transpose()?;
        let recenter = match (r.recenter_mean, &pt) {
            (Some(m), _) => m,
            (None, Some(e)) => r.teacher_mean.congruence(e),
            (None, None) => r.teacher_mean.clone(),
        };
        RigidSpdTransform::new(r.teacher_mean, recenter, r.student_mean, r.scale_exponent, rotation, pt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcpIteration {
    pub iteration: usize,
    pub objective: f64,
    pub rotation_angle: f64,
    pub best_restart: usize,
    pub optimizer_iterations: usize,
    /// Targets whose matched source changed since the previous iteration.
    pub reassigned: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IcpIteration>,
    /// Objective of the last correspondences evaluated through
    /// [`RigidSpdTransform::to_aligned_frame`].
    pub final_objective: f64,
    pub source_dispersion: f64,
    pub target_dispersion: f64,
    pub scale_exponent: f64,
    pub correspondences: CorrespondenceSet,
    pub optimizer: OptimizerReport,
    /// Training targets mapped by the returned transform.
    pub aligned: SpdCloud,
}

fn iteration_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((k as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// Fits the teacher cloud `targets` onto the student cloud `sources`.
pub fn fit(sources: &SpdCloud, targets: &SpdCloud, config: &FitConfig) -> Result<(RigidSpdTransform, FitReport)> {
    sources.check_dim(targets.dim())?;
    if sources.len() != targets.len() && !config.allow_unequal {
        return Err(Error::LengthMismatch {
            left: sources.len(),
            right: targets.len(),
        });
    }
    if config.icp_max_iter == 0 {
        return Err(Error::InvalidInput("icp_max_iter must be at least 1".into()));
    }
    if config.weight_exponent == 0 {
        return Err(Error::InvalidInput("weight exponent must be positive".into()));
    }
    let dim = sources.dim();
    let mean_opts = config.mean_options();

    let student_mean = geometric_mean(sources, mean_opts)?;
    let teacher_mean = geometric_mean(targets, mean_opts)?;

    let (pt, transported) = if config.use_pt {
        let e = pt_matrix(&student_mean, &teacher_mean)?;
        let moved = targets.map(|t| t.congruence(&e));
        (Some(e), moved)
    } else {
        (None, targets.clone())
    };
    let recenter_mean = if config.use_pt {
        geometric_mean(&transported, mean_opts)?
    } else {
        teacher_mean.clone()
    };

    let s_rct = recenter(sources, &student_mean)?;
    let t_rct = recenter(&transported, &recenter_mean)?;

    let identity = SpdMatrix::identity(dim);
    let c_s = dispersion(&s_rct, &identity)?;
    let c_t = dispersion(&t_rct, &identity)?;
    let scale = if c_t > 0.0 {
        c_s / c_t
    } else if c_s == 0.0 {
        1.0
    } else {
        return Err(Error::DegenerateNormalization(
            "teacher cloud has zero dispersion but the student cloud does not".into(),
        ));
    };
    if !(scale > 0.0) {
        return Err(Error::DegenerateNormalization("student cloud has zero dispersion".into()));
    }
    let t_scl = scale_dispersion(&t_rct, scale)?;

    let source_features = cloud_features(&s_rct);
    let whiteners: Vec<DMatrix<f64>> = s_rct.iter().map(|s| s.inv_sqrt().into_matrix()).collect();

    let mut current = t_scl;
    let mut total = Rotation::identity(dim);
    let mut history = Vec::new();
    let mut converged = false;
    let mut previous: Option<CorrespondenceSet> = None;
    let mut last_report = None;

    for k in 1..=config.icp_max_iter {
        let corr = match_features(
            &cloud_features(&current),
            &source_features,
            config.weight_exponent,
            config.match_mode,
        )?;
        let problem = PairedProblem::from_whiteners(&whiteners, &corr.source_indices(), current.points(), &corr.weights);
        let rot_cfg = RotationConfig {
            seed: iteration_seed(config.seed, k),
            ..config.rotation
        };
        let report = optimize_problem(&problem, &rot_cfg);
        let step = report.best_rotation.clone();
        current = apply_rotation(&current, &step)?;
        total = step.compose(&total);

        let reassigned = previous
            .as_ref()
            .map(|p| p.pairs.iter().zip(&corr.pairs).filter(|(a, b)| a != b).count())
            .unwrap_or(corr.len());
        let angle = step.angle();
        let objective_change = history.last().map(|h: &IcpIteration| {
            (report.best_objective - h.objective).abs() / h.objective.max(f64::MIN_POSITIVE)
        });
        history.push(IcpIteration {
            iteration: k,
            objective: report.best_objective,
            rotation_angle: angle,
            best_restart: report.best_restart,
            optimizer_iterations: report.iterations,
            reassigned,
        });
        previous = Some(corr);
        last_report = Some(report);
        if angle < ICP_ANGLE_TOL || objective_change.is_some_and(|c| c < ICP_REL_OBJECTIVE_TOL) {
            converged = true;
            break;
        }
    }

    let transform = RigidSpdTransform::new(teacher_mean, recenter_mean, student_mean, scale, total, pt)?;
    let correspondences = previous.expect("at least one iteration");
    let optimizer = last_report.expect("at least one iteration");

    let aligned_frame: Vec<SpdMatrix> = targets.iter().map(|t| transform.to_aligned_frame(t)).collect();
    let final_problem = PairedProblem::from_whiteners(
        &whiteners,
        &correspondences.source_indices(),
        &aligned_frame,
        &correspondences.weights,
    );
    let final_objective = final_problem.objective(&DMatrix::identity(dim, dim));
    let aligned = transform.apply(targets)?;

    let report = FitReport {
        iterations: history.len(),
        converged,
        history,
        final_objective,
        source_dispersion: c_s,
        target_dispersion: c_t,
        scale_exponent: scale,
        correspondences,
        optimizer,
        aligned,
    };
    Ok((transform, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::dist;

    fn diag(v: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(v).unwrap()
    }

    fn sample_cloud() -> SpdCloud {
        SpdCloud::new(vec![
            diag(&[4.0, 1.0, 0.5]),
            SpdMatrix::new(DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 1.0, 0.2, 0.0, 0.2, 0.7])).unwrap(),
            diag(&[0.3, 2.0, 1.5]),
            SpdMatrix::new(DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.3, 0.4, 3.0, 0.0, 0.3, 0.0, 0.4])).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn pt_with_equal_means_is_identity() {
        let m = diag(&[2.0, 0.5, 1.0]);
        let e = pt_matrix(&m, &m).unwrap();
        assert!((e - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn pt_from_identity_is_sqrt() {
        let s = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0])).unwrap();
        let e = pt_matrix(&s, &SpdMatrix::identity(2)).unwrap();
        assert!((e - s.sqrt().matrix()).norm() < 1e-12);
    }

    #[test]
    fn recenter_single_point_gives_identity() {
        let m = diag(&[2.0, 0.5]);
        let c = SpdCloud::new(vec![m.clone()]).unwrap();
        let r = recenter(&c, &m).unwrap();
        assert!(r.get(0).frobenius_distance(&SpdMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn scale_examples() {
        let e2 = std::f64::consts::E.powi(2);
        let c = SpdCloud::new(vec![diag(&[e2, 1.0])]).unwrap();
        assert_eq!(scale_dispersion(&c, 1.0).unwrap().get(0).matrix(), c.get(0).matrix());
        let half = scale_dispersion(&c, 0.5).unwrap();
        assert!(half.get(0).frobenius_distance(&diag(&[std::f64::consts::E, 1.0])) < 1e-14);
        let i = SpdMatrix::identity(2);
        assert!((dispersion(&half, &i).unwrap() - 1.0).abs() < 1e-14);
        assert!(scale_dispersion(&c, 0.0).is_err());
    }

    #[test]
    fn translate_identity_gives_mean() {
        let s = diag(&[2.0, 0.5]);
        let c = SpdCloud::new(vec![SpdMatrix::identity(2)]).unwrap();
        assert!(translate_to_source(&c, &s).unwrap().get(0).frobenius_distance(&s) < 1e-14);
    }

    #[test]
    fn self_fit_is_near_identity() {
        let c = sample_cloud();
        let (t, rep) = fit(&c, &c, &FitConfig::default()).unwrap();
        assert!((t.scale_exponent() - 1.0).abs() < 1e-10);
        for (a, b) in rep.aligned.iter().zip(c.iter()) {
            assert!(dist(a, b).unwrap() < 1e-6);
        }
        assert!(rep.converged);
    }

    #[test]
    fn identity_transform_passthrough() {
        let c = sample_cloud();
        let out = RigidSpdTransform::identity(3).apply(&c).unwrap();
        for (a, b) in out.iter().zip(c.iter()) {
            assert!(a.frobenius_distance(b) < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let c = sample_cloud();
        let short = c.select(&[0, 1]).unwrap();
        assert!(matches!(fit(&c, &short, &FitConfig::default()), Err(Error::LengthMismatch { .. })));
        let cfg = FitConfig {
            allow_unequal: true,
            ..FitConfig::default()
        };
        assert!(fit(&c, &short, &cfg).is_ok());
        let two = SpdCloud::new(vec![SpdMatrix::identity(2)]).unwrap();
        assert!(matches!(fit(&c, &two, &FitConfig::default()), Err(Error::DimensionMismatch { .. })));
        let cfg = FitConfig {
            icp_max_iter: 0,
            ..FitConfig::default()
        };
        assert!(fit(&c, &c, &cfg).is_err());
    }

    #[test]
    fn transform_json_round_trip() {
        let c = sample_cloud();
        let other = c.map(|m| m.powf(1.3).congruence(&DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.1, 0.3, 0.1, 0.0, 0.9])));
        let (t, _) = fit(&c, &other, &FitConfig::default()).unwrap();
        let text = t.to_json();
        assert!(text.contains("\"version\": 1"));
        let back = RigidSpdTransform::from_json(&text).unwrap();
        let a = t.apply(&other).unwrap();
        let b = back.apply(&other).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(x.frobenius_distance(y) <= 1e-12 * x.matrix().norm());
        }
        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(RigidSpdTransform::from_json(&bumped), Err(Error::UnsupportedVersion(2))));
    }
}
