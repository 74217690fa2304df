//! Random and trajectory-based manipulability datasets.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SerialManipulator;
use crate::error::{Error, Result};
use crate::metric::DEFAULT_EIGEN_FLOOR;
use crate::spd::{SpdCloud, SpdMatrix};

/// Ordered joint-space samples, every one inside the arm's limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub id: String,
    pub samples: Vec<Vec<f64>>,
}

impl JointTrajectory {
    pub fn new(id: impl Into<String>, samples: Vec<Vec<f64>>) -> Self {
        JointTrajectory {
            id: id.into(),
            samples,
        }
    }

    pub fn validate(&self, m: &SerialManipulator) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidInput(format!("trajectory {:?} has no samples", self.id)));
        }
        for (k, q) in self.samples.iter().enumerate() {
            if q.len() != m.dof() {
                return Err(Error::LengthMismatch {
                    left: m.dof(),
                    right: q.len(),
                });
            }
            if !m.within_limits(q) {
                return Err(Error::InvalidInput(format!(
                    "trajectory {:?} sample {k} violates the joint limits of {}",
                    self.id, m.name
                )));
            }
        }
        Ok(())
    }
}

/// `steps` evenly spaced samples from `start` to `end`, both included.
pub fn linear_trajectory(id: impl Into<String>, start: &[f64], end: &[f64], steps: usize) -> JointTrajectory {
    assert_eq!(start.len(), end.len(), "endpoint lengths differ");
    let samples = (0..steps)
        .map(|k| {
            let t = if steps == 1 { 0.0 } else { k as f64 / (steps - 1) as f64 };
            start.iter().zip(end).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect();
    JointTrajectory::new(id, samples)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryProtocol {
    /// Joint 2 held at `n_fixed` angles spread over its range (endpoints
    /// excluded) while joint 1 sweeps 180° in `n_steps` samples.
    PlanarSweep { n_fixed: usize, n_steps: usize },
    Scripted(Vec<JointTrajectory>),
}

impl std::str::FromStr for TrajectoryProtocol {
    type Err = Error;

    /// Parses `planar_sweep:<fixed>x<steps>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unrecognized trajectory protocol {s:?}"));
        let spec = s.strip_prefix("planar_sweep:").ok_or_else(bad)?;
        let (a, b) = spec.split_once('x').ok_or_else(bad)?;
        let n_fixed = a.parse().map_err(|_| bad())?;
        let n_steps = b.parse().map_err(|_| bad())?;
        if n_fixed == 0 || n_steps == 0 {
            return Err(bad());
        }
        Ok(TrajectoryProtocol::PlanarSweep { n_fixed, n_steps })
    }
}

pub fn planar_sweep(m: &SerialManipulator, n_fixed: usize, n_steps: usize) -> Result<Vec<JointTrajectory>> {
    if m.dof() != 2 {
        return Err(Error::InvalidInput(format!(
            "planar_sweep needs a 2-DoF arm, {} has {} joints",
            m.name,
            m.dof()
        )));
    }
    let (lo2, hi2) = m.limits[1];
    let (lo1, hi1) = m.limits[0];
    let center = 0.5 * (lo1 + hi1);
    let (start, end) = ((center - FRAC_PI_2).max(lo1), (center + FRAC_PI_2).min(hi1));
    Ok((0..n_fixed)
        .map(|k| {
            let fixed = lo2 + (k + 1) as f64 * (hi2 - lo2) / (n_fixed + 1) as f64;
            linear_trajectory(format!("sweep{k:02}"), &[start, fixed], &[end, fixed], n_steps)
        })
        .collect())
}

/// Three held-out planar trajectories: an elbow sweep, a shoulder sweep at
/// an elbow angle between the training angles, and a coupled motion.
pub fn planar_eval_trajectories(steps: usize) -> Vec<JointTrajectory> {
    vec![
        linear_trajectory("m-eval-1", &[0.5, 0.2], &[0.5, 2.6], steps),
        linear_trajectory("m-eval-2", &[-1.2, 1.2], &[1.4, 1.2], steps),
        linear_trajectory("m-eval-3", &[-1.0, 2.5], &[1.0, 0.5], steps),
    ]
}

/// Scripted reaching motions of the 7-DoF built-ins: the (nearly) extended
/// arm is raised at several shoulder rotations and swung sideways at several
/// elevations. Returns `(training, evaluation)`; the fourth evaluation
/// trajectory is a vertical raise of the extended arm.
pub fn arm_motion_trajectories(
    m: &SerialManipulator,
    steps: usize,
) -> Result<(Vec<JointTrajectory>, Vec<JointTrajectory>)> {
    let (train, eval) = match m.name.as_str() {
        "surrogate7_teacher" => {
            let pose = |plane: f64, elevation: f64, elbow: f64| vec![plane, elevation, 0.0, elbow, 0.0, 0.0, 0.0];
            let mut train = Vec::new();
            for (i, plane) in [0.0, 0.8, 1.6, 2.4].into_iter().enumerate() {
                train.push(linear_trajectory(format!("raise{i}"), &pose(plane, 0.0, 0.2), &pose(plane, -2.6, 0.2), steps));
            }
            for (i, elevation) in [-0.8, -1.3, -1.8, -2.3].into_iter().enumerate() {
                train.push(linear_trajectory(
                    format!("swing{i}"),
                    &pose(-1.2, elevation, 0.2),
                    &pose(2.8, elevation, 0.2),
                    steps,
                ));
            }
            let eval = vec![
                linear_trajectory("h-eval-1", &pose(0.4, 0.0, 0.3), &pose(0.4, -2.4, 0.3), steps),
                linear_trajectory("h-eval-2", &pose(2.0, 0.0, 0.3), &pose(2.0, -2.4, 0.3), steps),
                linear_trajectory("h-eval-3", &pose(-1.0, -1.05, 0.3), &pose(2.6, -1.05, 0.3), steps),
                linear_trajectory("h-eval-4", &pose(1.2, 0.0, 0.05), &pose(1.2, -3.0, 0.05), steps),
            ];
            (train, eval)
        }
        "panda7" => {
            let pose = |rotation: f64, elevation: f64, elbow: f64| vec![rotation, elevation, 0.0, elbow, 0.0, 0.3, 0.0];
            let mut train = Vec::new();
            for (i, rotation) in [-1.2, -0.4, 0.4, 1.2].into_iter().enumerate() {
                train.push(linear_trajectory(
                    format!("raise{i}"),
                    &pose(rotation, 1.6, -0.2),
                    &pose(rotation, 0.0, -0.2),
                    steps,
                ));
            }
            for (i, elevation) in [0.4, 0.8, 1.2, 1.6].into_iter().enumerate() {
                train.push(linear_trajectory(
                    format!("swing{i}"),
                    &pose(-2.0, elevation, -0.2),
                    &pose(2.0, elevation, -0.2),
                    steps,
                ));
            }
            let eval = vec![
                linear_trajectory("h-eval-1", &pose(0.0, 1.5, -0.3), &pose(0.0, 0.1, -0.3), steps),
                linear_trajectory("h-eval-2", &pose(0.8, 1.5, -0.3), &pose(0.8, 0.1, -0.3), steps),
                linear_trajectory("h-eval-3", &pose(-1.8, 1.0, -0.3), &pose(1.8, 1.0, -0.3), steps),
                linear_trajectory("h-eval-4", &pose(-0.8, 1.7, -0.1), &pose(-0.8, 0.0, -0.1), steps),
            ];
            (train, eval)
        }
        other => {
            return Err(Error::InvalidInput(format!("no scripted arm motions for model {other:?}")));
        }
    };
    for t in train.iter().chain(&eval) {
        t.validate(m)?;
    }
    Ok((train, eval))
}

/// Uniform joint vectors inside the limits; sample `i` draws from its own
/// ChaCha stream so the result does not depend on evaluation order.
pub fn sample_joint_vectors(m: &SerialManipulator, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            m.limits.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
        })
        .collect()
}

pub fn sample_random_dataset(m: &SerialManipulator, count: usize, seed: u64) -> Result<SpdCloud> {
    if count == 0 {
        return Err(Error::InvalidInput("dataset size must be at least 1".into()));
    }
    let qs = sample_joint_vectors(m, count, seed);
    let points = qs
        .par_iter()
        .map(|q| m.manipulability(q, DEFAULT_EIGEN_FLOOR))
        .collect::<Result<Vec<SpdMatrix>>>()?;
    let labels = (0..count).map(|i| format!("random/{i}")).collect();
    SpdCloud::with_labels(points, labels)
}

/// Manipulabilities along every trajectory, labeled `<trajectory id>/<step>`.
pub fn trajectory_dataset(m: &SerialManipulator, protocol: &TrajectoryProtocol) -> Result<SpdCloud> {
    let trajectories = match protocol {
        TrajectoryProtocol::PlanarSweep { n_fixed, n_steps } => planar_sweep(m, *n_fixed, *n_steps)?,
        TrajectoryProtocol::Scripted(ts) => ts.clone(),
    };
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for t in &trajectories {
        t.validate(m)?;
        for (k, q) in t.samples.iter().enumerate() {
            points.push(m.manipulability(q, DEFAULT_EIGEN_FLOOR)?);
            labels.push(format!("{}/{k}", t.id));
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    SpdCloud::with_labels(points, labels)
}

/// On-disk dataset: a labeled cloud with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub model: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    pub points: Vec<SpdMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DatasetFile {
    pub fn new(model: impl Into<String>, seed: Option<u64>, protocol: Option<String>, cloud: &SpdCloud) -> Self {
        DatasetFile {
            model: model.into(),
            seed,
            protocol,
            points: cloud.points().to_vec(),
            labels: cloud.labels().map(<[String]>::to_vec),
            provenance: None,
        }
    }

    pub fn cloud(&self) -> Result<SpdCloud> {
        match &self.labels {
            Some(l) => SpdCloud::with_labels(self.points.clone(), l.clone()),
            None => SpdCloud::new(self.points.clone()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        file.cloud()?;
        Ok(file)
    }
}
