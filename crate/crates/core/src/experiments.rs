//! Reproducible experiment protocols shared by the command-line tool and the
//! test suites: the planted-transform toy problem, the planar base-rotation
//! transfer, and the 7-DoF arm-to-robot transfer.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_transfer, build_nn_map, rmse, EvalReport};
use crate::error::{Error, Result};
use crate::kinematics::{
    arm_motion_trajectories, builtin_model, planar_eval_trajectories, sample_random_dataset, trajectory_dataset,
    JointTrajectory, SerialManipulator, TrajectoryProtocol,
};
use crate::matching::features_of;
use crate::registration::{fit, FitConfig, FitReport, RigidSpdTransform};
use crate::rotation::Rotation;
use crate::spd::{exp_sym, SpdCloud, SpdMatrix};

fn model(name: &str) -> Result<SerialManipulator> {
    builtin_model(name).ok_or_else(|| Error::InvalidInput(format!("unknown built-in model {name:?}")))
}

/// `X ↦ P^{1/2} R (C^{-1/2} X C^{-1/2})^s Rᵀ P^{1/2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedTransform {
    pub center: SpdMatrix,
    pub exponent: f64,
    pub rotation: Rotation,
    pub translation: SpdMatrix,
}

impl PlantedTransform {
    /// Haar rotation, exponent uniform in `[0.5, 2]`, and translation
    /// `exp(G)` for a symmetric Gaussian `G` with entry scale `0.5`.
    pub fn random(center: SpdMatrix, rng: &mut impl Rng) -> Self {
        let dim = center.dim();
        let rotation = Rotation::random(dim, rng);
        let exponent = rng.random_range(0.5..=2.0);
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let translation = exp_sym(&(0.5 * (&g + g.transpose()))).expect("exponential of a symmetric matrix");
        PlantedTransform {
            center,
            exponent,
            rotation,
            translation,
        }
    }

    pub fn apply_point(&self, x: &SpdMatrix) -> SpdMatrix {
        let w = self.center.inv_sqrt();
        let whitened = x.congruence(w.matrix()).powf(self.exponent);
        self.rotation.apply(&whitened).congruence(self.translation.sqrt().matrix())
    }

    pub fn apply(&self, cloud: &SpdCloud) -> SpdCloud {
        cloud.map(|x| self.apply_point(x))
    }
}

/// Which student points enter the singular-subset fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetSelection {
    /// The images of the selected teacher points.
    #[default]
    Paired,
    /// The most singular student points, chosen on their own.
    Independent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyConfig {
    pub model: String,
    pub samples: usize,
    pub heldout: usize,
    /// Fit on only this many of the most singular training points.
    pub singular_subset: Option<usize>,
    pub subset_selection: SubsetSelection,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            model: "panda7".into(),
            samples: 100,
            heldout: 10,
            singular_subset: None,
            subset_selection: SubsetSelection::Paired,
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub seed: u64,
    pub planted: PlantedTransform,
    pub eval: EvalReport,
    pub iterations: usize,
    pub converged: bool,
    pub training_points: usize,
}

/// Indices of the `k` points with the largest eigenvalue ratio, most singular first.
pub fn most_singular(cloud: &SpdCloud, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    let p: Vec<f64> = cloud.iter().map(|m| features_of(m).p).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Samples a teacher cloud, plants a transform centred at the identity,
/// fits it back, and scores the held-out points against their images.
pub fn run_toy(cfg: &ToyConfig) -> Result<ToyOutcome> {
    if cfg.samples == 0 || cfg.heldout < 2 {
        return Err(Error::InvalidInput("toy protocol needs training points and at least two held-out points".into()));
    }
    let m = model(&cfg.model)?;
    let pool = sample_random_dataset(&m, cfg.samples + cfg.heldout, cfg.seed)?;
    let train_idx: Vec<usize> = (0..cfg.samples).collect();
    let held_idx: Vec<usize> = (cfg.samples..cfg.samples + cfg.heldout).collect();
    let teacher = pool.select(&train_idx)?;
    let held = pool.select(&held_idx)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_7041);
    let planted = PlantedTransform::random(SpdMatrix::identity(pool.dim()), &mut rng);
    let student = planted.apply(&teacher);

    let (teacher, student) = match cfg.singular_subset {
        None => (teacher, student),
        Some(k) => {
            let t_idx = most_singular(&teacher, k);
            let s_idx = match cfg.subset_selection {
                SubsetSelection::Paired => t_idx.clone(),
                SubsetSelection::Independent => most_singular(&student, k),
            };
            (teacher.select(&t_idx)?, student.select(&s_idx)?)
        }
    };
    let fit_cfg = FitConfig {
        seed: cfg.seed,
        ..cfg.fit.clone()
    };
    let (transform, report) = fit(&student, &teacher, &fit_cfg)?;
    let eval = rmse(&transform.apply(&held)?, &planted.apply(&held))?.with_iterations(report.iterations);
    Ok(ToyOutcome {
        seed: cfg.seed,
        planted,
        eval,
        iterations: report.iterations,
        converged: report.converged,
        training_points: teacher.len(),
    })
}

/// Named fit variant of the ablation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub use_pt: bool,
    pub weight_exponent: u32,
}

impl Variant {
    pub fn name(&self) -> String {
        let prefix = if self.use_pt { "PT+ICP" } else { "ICP" };
        format!("{prefix}+w{}", self.weight_exponent)
    }

    pub fn config(&self, base: &FitConfig, seed: u64) -> FitConfig {
        FitConfig {
            use_pt: self.use_pt,
            weight_exponent: self.weight_exponent,
            seed,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingKind {
    Trajectory,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSetResult {
    pub id: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub variant: String,
    pub samples: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub eval: Vec<EvalSetResult>,
}

fn subsample(cloud: &SpdCloud, count: usize) -> Result<SpdCloud> {
    if count == 0 || count > cloud.len() {
        return Err(Error::InvalidInput(format!(
            "cannot take {count} samples from a {}-point dataset",
            cloud.len()
        )));
    }
    let stride = cloud.len() / count;
    let idx: Vec<usize> = (0..count).map(|i| i * stride).collect();
    cloud.select(&idx)
}

fn eval_trajectories(
    transform: &RigidSpdTransform,
    teacher: &SerialManipulator,
    student: &SerialManipulator,
    trajectories: &[JointTrajectory],
) -> Result<Vec<EvalSetResult>> {
    trajectories
        .iter()
        .map(|t| {
            let protocol = TrajectoryProtocol::Scripted(vec![t.clone()]);
            let source = trajectory_dataset(teacher, &protocol)?;
            let truth = trajectory_dataset(student, &protocol)?;
            Ok(EvalSetResult {
                id: t.id.clone(),
                report: rmse(&transform.apply(&source)?, &truth)?,
            })
        })
        .collect()
}

/// Planar horizontal → vertical transfer evaluated on the three held-out
/// trajectories, whose ground truth is the student arm on the same joints.
/// Trajectory training data is the 20×20 sweep subsampled to `samples`;
/// random training data draws `samples` joint vectors per arm.
pub fn run_planar_transfer(
    variant: Variant,
    kind: TrainingKind,
    samples: usize,
    seed: u64,
    base: &FitConfig,
) -> Result<(TransferOutcome, RigidSpdTransform, FitReport)> {
    let teacher = model("planar2_horizontal")?;
    let student = model("planar2_vertical")?;
    let (t_data, s_data) = match kind {
        TrainingKind::Trajectory => {
            let protocol = TrajectoryProtocol::PlanarSweep { n_fixed: 20, n_steps: 20 };
            (
                subsample(&trajectory_dataset(&teacher, &protocol)?, samples)?,
                subsample(&trajectory_dataset(&student, &protocol)?, samples)?,
            )
        }
        TrainingKind::Random => (
            sample_random_dataset(&teacher, samples, seed)?,
            sample_random_dataset(&student, samples, seed.wrapping_add(1))?,
        ),
    };
    let (transform, report) = fit(&s_data, &t_data, &variant.config(base, seed))?;
    let eval = eval_trajectories(&transform, &teacher, &student, &planar_eval_trajectories(20))?;
    let outcome = TransferOutcome {
        variant: variant.name(),
        samples,
        seed,
        iterations: report.iterations,
        converged: report.converged,
        eval,
    };
    Ok((outcome, transform, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmEvalResult {
    pub id: String,
    /// Transferred trajectory against the baseline's output.
    pub transferred: EvalReport,
    /// Raw teacher trajectory against the baseline's output.
    pub untransferred: EvalReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmTransferOutcome {
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub eval: Vec<ArmEvalResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmTransferConfig {
    pub teacher: String,
    pub student: String,
    pub kind: TrainingKind,
    /// Samples per scripted trajectory, or total random samples.
    pub samples: usize,
    pub baseline_samples: usize,
    pub fit: FitConfig,
}

impl Default for ArmTransferConfig {
    fn default() -> Self {
        ArmTransferConfig {
            teacher: "surrogate7_teacher".into(),
            student: "panda7".into(),
            kind: TrainingKind::Trajectory,
            samples: 25,
            baseline_samples: 5000,
            fit: FitConfig::default(),
        }
    }
}

/// 7-DoF teacher → student transfer scored against the nearest-neighbour
/// baseline, since the two arms have no common ground truth.
pub fn run_arm_transfer(cfg: &ArmTransferConfig, seed: u64) -> Result<ArmTransferOutcome> {
    run_arm_transfer_with(&model(&cfg.teacher)?, &model(&cfg.student)?, cfg, seed)
}

/// As [`run_arm_transfer`] with explicit arms; the model names in `cfg` are
/// ignored and the motion scripts are chosen by each arm's own name.
pub fn run_arm_transfer_with(
    teacher: &SerialManipulator,
    student: &SerialManipulator,
    cfg: &ArmTransferConfig,
    seed: u64,
) -> Result<ArmTransferOutcome> {
    let (teacher, student) = (teacher.clone(), student.clone());
    let (t_train, t_eval) = arm_motion_trajectories(&teacher, cfg.samples)?;
    let (s_train, _) = arm_motion_trajectories(&student, cfg.samples)?;
    let (t_data, s_data) = match cfg.kind {
        TrainingKind::Trajectory => (
            trajectory_dataset(&teacher, &TrajectoryProtocol::Scripted(t_train))?,
            trajectory_dataset(&student, &TrajectoryProtocol::Scripted(s_train))?,
        ),
        TrainingKind::Random => (
            sample_random_dataset(&teacher, cfg.samples, seed)?,
            sample_random_dataset(&student, cfg.samples, seed.wrapping_add(1))?,
        ),
    };
    let fit_cfg = FitConfig {
        seed,
        ..cfg.fit.clone()
    };
    let (transform, report) = fit(&s_data, &t_data, &fit_cfg)?;
    let map = build_nn_map(&teacher, &student, cfg.baseline_samples, seed)?;
    let eval = t_eval
        .iter()
        .map(|t| {
            let raw = trajectory_dataset(&teacher, &TrajectoryProtocol::Scripted(vec![t.clone()]))?;
            let reference = baseline_transfer(&map, &raw)?;
            Ok(ArmEvalResult {
                id: t.id.clone(),
                transferred: rmse(&transform.apply(&raw)?, &reference)?,
                untransferred: rmse(&raw, &reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ArmTransferOutcome {
        seed,
        iterations: report.iterations,
        converged: report.converged,
        eval,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::dist;

    #[test]
    fn planted_transform_is_an_isometry_up_to_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = PlantedTransform::random(SpdMatrix::identity(3), &mut rng);
        assert!((0.5..=2.0).contains(&t.exponent));
        // Distances from the centre scale by the exponent.
        let x = SpdMatrix::from_diagonal(&[2.0, 0.5, 3.0]).unwrap();
        let image_of_center = t.apply_point(&SpdMatrix::identity(3));
        let d0 = dist(&SpdMatrix::identity(3), &x).unwrap();
        let d1 = dist(&image_of_center, &t.apply_point(&x)).unwrap();
        assert!((d1 - t.exponent * d0).abs() < 1e-10);
    }

    #[test]
    fn most_singular_orders_by_ratio() {
        let c = SpdCloud::new(vec![
            SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap(),
            SpdMatrix::from_diagonal(&[1.0, 9.0]).unwrap(),
            SpdMatrix::from_diagonal(&[3.0, 1.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(most_singular(&c, 2), vec![1, 2]);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn toy_rejects_bad_sizes() {
        let cfg = ToyConfig {
            heldout: 1,
            ..ToyConfig::default()
        };
        assert!(run_toy(&cfg).is_err());
    }
}
