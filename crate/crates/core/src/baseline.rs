//! Nearest-neighbour transfer baseline and the dispersion-normalized RMSE.
//!
//! The baseline samples both arms, pairs every teacher sample with its
//! nearest student sample, and maps a new teacher point through its nearest
//! teacher sample. Search is exact. [`LogEigIndex`] prunes candidates with the
//! lower bound `d(A, B) ≥ ‖log λ↓(A) − log λ↓(B)‖₂`, which holds for the
//! affine-invariant metric, and breaks ties toward the lowest index exactly
//! as the linear scan does.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{sample_random_dataset, SerialManipulator};
use crate::metric::{dispersion, dist, dist_sq_whitened, geometric_mean, MeanOptions};
use crate::spd::{SpdCloud, SpdMatrix};

pub const NN_MAP_FORMAT_VERSION: u32 = 1;

/// Candidates whose bound is within this margin of the incumbent are always
/// evaluated, so rounding in the bound can never drop the true winner.
const PRUNE_MARGIN: f64 = 1e-9;

/// Dispersions at or below this are rounding noise of a single-point cloud.
pub const DEGENERATE_DISPERSION: f64 = 1e-12;

fn log_eigenvalues(m: &SpdMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.matrix().symmetric_eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn key_bound(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index of the nearest point, lowest index on ties, by linear scan.
pub fn nearest_brute_force(points: &[SpdMatrix], query: &SpdMatrix) -> usize {
    let w = query.inv_sqrt();
    let mut best = (f64::INFINITY, 0);
    for (i, p) in points.iter().enumerate() {
        let d = dist_sq_whitened(w.matrix(), p.matrix()).sqrt();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Sorted log-eigenvalue keys of a point set.
#[derive(Debug, Clone)]
pub struct LogEigIndex {
    keys: Vec<Vec<f64>>,
}

impl LogEigIndex {
    pub fn new(points: &[SpdMatrix]) -> Self {
        LogEigIndex {
            keys: points.iter().map(log_eigenvalues).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Same answer as [`nearest_brute_force`] over the indexed `points`.
    pub fn nearest(&self, points: &[SpdMatrix], query: &SpdMatrix) -> usize {
        assert_eq!(points.len(), self.keys.len(), "index built for a different point set");
        let qk = log_eigenvalues(query);
        let mut order: Vec<(f64, usize)> = self.keys.iter().map(|k| key_bound(&qk, k)).zip(0..).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let w = query.inv_sqrt();
        let mut best = (f64::INFINITY, usize::MAX);
        for (bound, i) in order {
            if bound > best.0 + PRUNE_MARGIN * (1.0 + best.0) {
                break;
            }
            let d = dist_sq_whitened(w.matrix(), points[i].matrix()).sqrt();
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone)]
pub struct NnTransferMap {
    teacher_samples: SpdCloud,
    student_samples: SpdCloud,
    pair_index: Vec<usize>,
    teacher_index: LogEigIndex,
}

impl NnTransferMap {
    /// Pairs every teacher sample with its nearest student sample.
    pub fn new(teacher_samples: SpdCloud, student_samples: SpdCloud) -> Result<Self> {
        teacher_samples.check_dim(student_samples.dim())?;
        let student_index = LogEigIndex::new(student_samples.points());
        let pair_index = teacher_samples
            .points()
            .par_iter()
            .map(|t| student_index.nearest(student_samples.points(), t))
            .collect();
        Self::from_parts(teacher_samples, student_samples, pair_index)
    }

    pub fn from_parts(teacher_samples: SpdCloud, student_samples: SpdCloud, pair_index: Vec<usize>) -> Result<Self> {
        teacher_samples.check_dim(student_samples.dim())?;
        if pair_index.len() != teacher_samples.len() {
            return Err(Error::LengthMismatch {
                left: teacher_samples.len(),
                right: pair_index.len(),
            });
        }
        if let Some(&bad) = pair_index.iter().find(|&&j| j >= student_samples.len()) {
            return Err(Error::InvalidInput(format!(
                "pair index {bad} out of range for {} student samples",
                student_samples.len()
            )));
        }
        let teacher_index = LogEigIndex::new(teacher_samples.points());
        Ok(NnTransferMap {
            teacher_samples,
            student_samples,
            pair_index,
            teacher_index,
        })
    }

    pub fn teacher_samples(&self) -> &SpdCloud {
        &self.teacher_samples
    }

    pub fn student_samples(&self) -> &SpdCloud {
        &self.student_samples
    }

    pub fn pair_index(&self) -> &[usize] {
        &self.pair_index
    }

    pub fn dim(&self) -> usize {
        self.teacher_samples.dim()
    }

    pub fn nearest_teacher(&self, query: &SpdMatrix) -> usize {
        self.teacher_index.nearest(self.teacher_samples.points(), query)
    }

    pub fn transfer_point(&self, query: &SpdMatrix) -> &SpdMatrix {
        self.student_samples.get(self.pair_index[self.nearest_teacher(query)])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NnMapRepr {
            version: NN_MAP_FORMAT_VERSION,
            teacher_samples: self.teacher_samples.clone(),
            student_samples: self.student_samples.clone(),
            pair_index: self.pair_index.clone(),
        })
        .expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: NnMapRepr = serde_json::from_str(text)?;
        if repr.version != NN_MAP_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(repr.version));
        }
        Self::from_parts(repr.teacher_samples, repr.student_samples, repr.pair_index)
    }
}

#[derive(Serialize, Deserialize)]
struct NnMapRepr {
    version: u32,
    teacher_samples: SpdCloud,
    student_samples: SpdCloud,
    pair_index: Vec<usize>,
}

/// Samples `n` manipulabilities from each arm with the same seed and pairs them.
pub fn build_nn_map(teacher: &SerialManipulator, student: &SerialManipulator, n: usize, seed: u64) -> Result<NnTransferMap> {
    let t = sample_random_dataset(teacher, n, seed)?;
    let s = sample_random_dataset(student, n, seed)?;
    NnTransferMap::new(t, s)
}

/// Maps each point through its nearest teacher sample; labels are kept.
pub fn baseline_transfer(map: &NnTransferMap, new_points: &SpdCloud) -> Result<SpdCloud> {
    new_points.check_dim(map.dim())?;
    let out: Vec<SpdMatrix> = new_points.points().par_iter().map(|q| map.transfer_point(q).clone()).collect();
    match new_points.labels() {
        Some(l) => SpdCloud::with_labels(out, l.to_vec()),
        None => SpdCloud::new(out),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `sqrt(mean d²) / dispersion_after`.
    pub rmse: f64,
    /// Dispersion of the predicted cloud about its geometric mean.
    pub dispersion_after: f64,
    pub per_point_distances: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Same error normalized by the reference cloud's dispersion instead.
    pub rmse_reference_normalized: Option<f64>,
    pub reference_dispersion: f64,
}

impl EvalReport {
    pub fn raw_rmse(&self) -> f64 {
        let n = self.per_point_distances.len() as f64;
        (self.per_point_distances.iter().map(|d| d * d).sum::<f64>() / n).sqrt()
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = Some(iterations);
        self
    }

    pub fn csv_row(&self, experiment: &str, variant: &str, samples: usize) -> EvalRow {
        EvalRow {
            experiment: experiment.to_string(),
            variant: variant.to_string(),
            samples,
            rmse: self.rmse,
            iterations: self.iterations,
        }
    }
}

/// One line of a result table. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub experiment: String,
    pub variant: String,
    pub samples: usize,
    pub rmse: f64,
    pub iterations: Option<usize>,
}

pub const EVAL_CSV_SCHEMA_VERSION: u32 = 1;

fn cloud_dispersion(cloud: &SpdCloud) -> Result<f64> {
    let mean = geometric_mean(cloud, MeanOptions::default())?;
    dispersion(cloud, &mean)
}

/// Dispersion-normalized Riemannian RMSE of index-paired clouds.
pub fn rmse(predicted: &SpdCloud, reference: &SpdCloud) -> Result<EvalReport> {
    if predicted.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: reference.len(),
        });
    }
    predicted.check_dim(reference.dim())?;
    let per_point_distances = predicted
        .iter()
        .zip(reference.iter())
        .map(|(p, r)| dist(p, r))
        .collect::<Result<Vec<_>>>()?;
    let dispersion_after = cloud_dispersion(predicted)?;
    if !(dispersion_after > DEGENERATE_DISPERSION) {
        return Err(Error::DegenerateNormalization(
            "predicted cloud has zero dispersion about its mean".into(),
        ));
    }
    let reference_dispersion = cloud_dispersion(reference)?;
    let n = per_point_distances.len() as f64;
    let raw = (per_point_distances.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    Ok(EvalReport {
        rmse: raw / dispersion_after,
        dispersion_after,
        per_point_distances,
        iterations: None,
        rmse_reference_normalized: (reference_dispersion > DEGENERATE_DISPERSION).then(|| raw / reference_dispersion),
        reference_dispersion,
    })
}

/// Index of the nearest point for every query, by linear scan.
pub fn brute_force_pairs(points: &[SpdMatrix], queries: &[SpdMatrix]) -> Vec<usize> {
    queries.iter().map(|q| nearest_brute_force(points, q)).collect()
}
