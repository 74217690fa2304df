//! Serial-manipulator kinematics in the standard (distal) DH convention.
//!
//! Only the translational part of the geometric Jacobian is used, so every
//! manipulability is a 3×3 SPD matrix, planar arms included (their
//! out-of-plane eigenvalue is floored).

mod dataset;
mod models;

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{project_to_spd, DEFAULT_EIGEN_FLOOR};
use crate::spd::SpdMatrix;

pub use dataset::{
    arm_motion_trajectories, linear_trajectory, planar_eval_trajectories, planar_sweep, sample_joint_vectors,
    sample_random_dataset, trajectory_dataset, DatasetFile, JointTrajectory, TrajectoryProtocol,
};
pub use models::{builtin_model, builtin_models, BUILTIN_MODEL_NAMES};

/// Task-space dimension of all manipulabilities produced here.
pub const TASK_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    #[default]
    Revolute,
    Prismatic,
}

/// One standard DH row: `Rz(θ + θ₀) · Tz(d) · Tx(a) · Rx(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub theta_offset: f64,
}

impl DhRow {
    pub const fn new(a: f64, d: f64, alpha: f64, theta_offset: f64) -> Self {
        DhRow {
            a,
            d,
            alpha,
            theta_offset,
        }
    }

    fn transform(&self, q: f64, kind: JointKind) -> Matrix4<f64> {
        let (theta, d) = match kind {
            JointKind::Revolute => (q + self.theta_offset, self.d),
            JointKind::Prismatic => (self.theta_offset, self.d + q),
        };
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Matrix4::new(
            ct,
            -st * ca,
            st * sa,
            self.a * ct,
            st,
            ct * ca,
            -ct * sa,
            self.a * st,
            0.0,
            sa,
            ca,
            d,
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Rigid pose of the base frame in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for BasePose {
    fn default() -> Self {
        BasePose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

impl BasePose {
    fn homogeneous(&self) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerialManipulator {
    pub name: String,
    pub dh: Vec<DhRow>,
    pub joint_kinds: Vec<JointKind>,
    pub limits: Vec<(f64, f64)>,
    pub base_pose: BasePose,
}

/// Joint frames and end-effector position of one configuration.
#[derive(Debug, Clone)]
pub struct ForwardKinematics {
    pub end_effector: Vector3<f64>,
    /// Origin of frame `i − 1` for each joint `i`, world coordinates.
    pub joint_origins: Vec<Vector3<f64>>,
    /// Motion axis `z_{i−1}` of each joint, world coordinates.
    pub joint_axes: Vec<Vector3<f64>>,
    pub within_limits: bool,
}

impl SerialManipulator {
    pub fn new(
        name: impl Into<String>,
        dh: Vec<DhRow>,
        limits: Vec<(f64, f64)>,
        base_pose: BasePose,
    ) -> Result<Self> {
        let kinds = vec![JointKind::Revolute; dh.len()];
        Self::with_joint_kinds(name, dh, kinds, limits, base_pose)
    }

    pub fn with_joint_kinds(
        name: impl Into<String>,
        dh: Vec<DhRow>,
        joint_kinds: Vec<JointKind>,
        limits: Vec<(f64, f64)>,
        base_pose: BasePose,
    ) -> Result<Self> {
        if dh.is_empty() {
            return Err(Error::InvalidInput("a manipulator needs at least one joint".into()));
        }
        if limits.len() != dh.len() || joint_kinds.len() != dh.len() {
            return Err(Error::InvalidInput(format!(
                "{} DH rows but {} joint limits and {} joint kinds",
                dh.len(),
                limits.len(),
                joint_kinds.len()
            )));
        }
        if let Some((i, (lo, hi))) = limits.iter().enumerate().find(|(_, (lo, hi))| !(lo < hi)) {
            return Err(Error::InvalidInput(format!("joint {i} limits [{lo}, {hi}] are empty")));
        }
        let finite = dh
            .iter()
            .all(|r| [r.a, r.d, r.alpha, r.theta_offset].iter().all(|x| x.is_finite()))
            && base_pose.rotation.iter().chain(base_pose.translation.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite kinematic parameter".into()));
        }
        let r = &base_pose.rotation;
        if (r.transpose() * r - Matrix3::identity()).norm() > 1e-9 || r.determinant() < 0.0 {
            return Err(Error::InvalidInput("base rotation is not a proper rotation".into()));
        }
        Ok(SerialManipulator {
            name: name.into(),
            dh,
            joint_kinds,
            limits,
            base_pose,
        })
    }

    pub fn dof(&self) -> usize {
        self.dh.len()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.iter().zip(&self.limits).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::LengthMismatch {
                left: self.dof(),
                right: q.len(),
            });
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, q: &[f64]) -> Result<ForwardKinematics> {
        self.check_len(q)?;
        let mut frame = self.base_pose.homogeneous();
        let mut joint_origins = Vec::with_capacity(self.dof());
        let mut joint_axes = Vec::with_capacity(self.dof());
        for ((row, &qi), &kind) in self.dh.iter().zip(q).zip(&self.joint_kinds) {
            joint_origins.push(frame.fixed_view::<3, 1>(0, 3).into_owned());
            joint_axes.push(frame.fixed_view::<3, 1>(0, 2).into_owned());
            frame *= row.transform(qi, kind);
        }
        Ok(ForwardKinematics {
            end_effector: frame.fixed_view::<3, 1>(0, 3).into_owned(),
            joint_origins,
            joint_axes,
            within_limits: self.within_limits(q),
        })
    }

    /// 3×N translational geometric Jacobian in the world frame.
    pub fn translational_jacobian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let fk = self.forward_kinematics(q)?;
        let mut j = DMatrix::zeros(TASK_DIM, self.dof());
        for (i, kind) in self.joint_kinds.iter().enumerate() {
            let z = fk.joint_axes[i];
            let col = match kind {
                JointKind::Revolute => z.cross(&(fk.end_effector - fk.joint_origins[i])),
                JointKind::Prismatic => z,
            };
            j.set_column(i, &col);
        }
        Ok(j)
    }

    /// `J Jᵀ` with eigenvalues below `floor` raised to `floor`.
    pub fn manipulability(&self, q: &[f64], floor: f64) -> Result<SpdMatrix> {
        let j = self.translational_jacobian(q)?;
        Ok(project_to_spd(&(&j * j.transpose()), floor))
    }

    pub fn manipulability_default(&self, q: &[f64]) -> Result<SpdMatrix> {
        self.manipulability(q, DEFAULT_EIGEN_FLOOR)
    }

    /// Copy with the base rotated by `r` (left-multiplied).
    pub fn with_base_rotation(&self, name: impl Into<String>, r: Matrix3<f64>) -> Result<Self> {
        let base = BasePose {
            rotation: r * self.base_pose.rotation,
            translation: r * self.base_pose.translation,
        };
        Self::with_joint_kinds(name, self.dh.clone(), self.joint_kinds.clone(), self.limits.clone(), base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    #[serde(default = "standard_dh")]
    pub convention: String,
    /// Rows of `[a, d, alpha, theta_offset]`.
    pub dh: Vec<[f64; 4]>,
    pub limits: Vec<[f64; 2]>,
    pub base_pose: BasePoseFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_types: Option<Vec<JointKind>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasePoseFile {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

fn standard_dh() -> String {
    "standard-dh".into()
}

impl From<&SerialManipulator> for ModelFile {
    fn from(m: &SerialManipulator) -> Self {
        let r = &m.base_pose.rotation;
        let any_prismatic = m.joint_kinds.iter().any(|k| *k == JointKind::Prismatic);
        ModelFile {
            name: m.name.clone(),
            convention: standard_dh(),
            dh: m.dh.iter().map(|r| [r.a, r.d, r.alpha, r.theta_offset]).collect(),
            limits: m.limits.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            base_pose: BasePoseFile {
                rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
                translation: std::array::from_fn(|i| m.base_pose.translation[i]),
            },
            joint_types: any_prismatic.then(|| m.joint_kinds.clone()),
        }
    }
}

impl TryFrom<ModelFile> for SerialManipulator {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.convention != "standard-dh" {
            return Err(Error::InvalidInput(format!("unsupported DH convention {:?}", f.convention)));
        }
        let dh = f.dh.iter().map(|r| DhRow::new(r[0], r[1], r[2], r[3])).collect::<Vec<_>>();
        let kinds = f.joint_types.unwrap_or_else(|| vec![JointKind::Revolute; dh.len()]);
        let base = BasePose {
            rotation: Matrix3::from_fn(|i, j| f.base_pose.rotation[i][j]),
            translation: Vector3::from_column_slice(&f.base_pose.translation),
        };
        SerialManipulator::with_joint_kinds(f.name, dh, kinds, f.limits.iter().map(|l| (l[0], l[1])).collect(), base)
    }
}
