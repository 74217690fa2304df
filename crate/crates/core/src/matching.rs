//! Correspondence matching from intrinsic ellipsoid features.
//!
//! Each target ellipsoid is paired with the source ellipsoid maximizing
//!
//! ```text
//! w = |v_minᵗ·v_minˢ| + |v_maxᵗ·v_maxˢ| + exp(−|pᵗ − pˢ|) + exp(−|volᵗ − volˢ|)
//! ```
//!
//! where `p = λ_max / λ_min` and `vol` is the volume of the ellipsoid with
//! semi-axes `sqrt(λ_i)`. The stored weight is `w^k` for the configured
//! exponent `k`.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{SpdCloud, SpdMatrix};

/// Eigenvalue gap below which an extreme eigenvector is flagged ambiguous.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Upper bound of the raw pair weight.
pub const MAX_PAIR_WEIGHT: f64 = 4.0;

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} · 2π / d
    let (mut even, mut odd) = (1.0, 2.0);
    for d in 2..=dim {
        if d % 2 == 0 {
            even *= 2.0 * PI / d as f64;
        } else {
            odd *= 2.0 * PI / d as f64;
        }
    }
    if dim % 2 == 0 {
        even
    } else {
        odd
    }
}

#[derive(Debug, Clone)]
pub struct EllipsoidFeatures {
    pub v_min: DVector<f64>,
    pub v_max: DVector<f64>,
    /// Singularity index `λ_max / λ_min`.
    pub p: f64,
    pub vol: f64,
    /// Set when either extreme eigenvalue is repeated within [`DEGENERACY_GAP`].
    pub degenerate: bool,
}

pub fn features_of(m: &SpdMatrix) -> EllipsoidFeatures {
    let e = m.eig();
    let n = e.values.len();
    let (lo, hi) = (e.values[0], e.values[n - 1]);
    let degenerate = n > 1
        && ((e.values[1] - lo).abs() < DEGENERACY_GAP || (hi - e.values[n - 2]).abs() < DEGENERACY_GAP);
    let vol = unit_ball_volume(n) * e.values.iter().map(|l| l.sqrt()).product::<f64>();
    EllipsoidFeatures {
        v_min: e.vectors.column(0).normalize(),
        v_max: e.vectors.column(n - 1).normalize(),
        p: hi / lo,
        vol,
        degenerate,
    }
}

pub fn cloud_features(cloud: &SpdCloud) -> Vec<EllipsoidFeatures> {
    cloud.iter().map(features_of).collect()
}

/// Raw matching weight in `(0, 4]`; symmetric and sign-invariant.
pub fn pair_weight(t: &EllipsoidFeatures, s: &EllipsoidFeatures) -> f64 {
    // Unit-vector dots can exceed 1 by an ulp.
    t.v_min.dot(&s.v_min).abs().min(1.0)
        + t.v_max.dot(&s.v_max).abs().min(1.0)
        + (-(t.p - s.p).abs()).exp()
        + (-(t.vol - s.vol).abs()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Independent argmax per target; sources may repeat.
    #[default]
    ManyToOne,
    /// Maximum-total-weight assignment; needs `|targets| ≤ |sources|`.
    OneToOne,
}

/// Target→source index pairs with their exponentiated weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrespondenceRepr")]
pub struct CorrespondenceSet {
    pub exponent: u32,
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

#[derive(Deserialize)]
struct CorrespondenceRepr {
    exponent: u32,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl TryFrom<CorrespondenceRepr> for CorrespondenceSet {
    type Error = Error;

    fn try_from(r: CorrespondenceRepr) -> Result<Self> {
        let set = CorrespondenceSet {
            exponent: r.exponent,
            pairs: r.pairs,
            weights: r.weights,
        };
        set.validate()?;
        Ok(set)
    }
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(_, j)| j).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponent == 0 {
            return Err(Error::InvalidInput("weight exponent must be positive".into()));
        }
        if self.pairs.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                left: self.pairs.len(),
                right: self.weights.len(),
            });
        }
        let mut seen = vec![false; self.pairs.len()];
        for &(i, _) in &self.pairs {
            match seen.get_mut(i) {
                Some(flag) if !*flag => *flag = true,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "target index {i} missing, repeated or out of range"
                    )))
                }
            }
        }
        let cap = MAX_PAIR_WEIGHT.powi(self.exponent.min(1024) as i32);
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0 && **w <= cap)) {
            return Err(Error::InvalidInput(format!("weight {w} outside (0, 4^k]")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("correspondences serialize")
    }
}

/// Matches every target to its best source (many-to-one, ties to the lowest
/// source index).
pub fn match_clouds(targets: &SpdCloud, sources: &SpdCloud, exponent: u32) -> Result<CorrespondenceSet> {
    match_clouds_with(targets, sources, exponent, MatchMode::ManyToOne)
}

pub fn match_clouds_with(
    targets: &SpdCloud,
    sources: &SpdCloud,
    exponent: u32,
    mode: MatchMode,
) -> Result<CorrespondenceSet> {
    sources.check_dim(targets.dim())?;
    match_features(&cloud_features(targets), &cloud_features(sources), exponent, mode)
}

/// Matching on precomputed features.
pub fn match_features(
    targets: &[EllipsoidFeatures],
    sources: &[EllipsoidFeatures],
    exponent: u32,
    mode: MatchMode,
) -> Result<CorrespondenceSet> {
    if exponent == 0 {
        return Err(Error::InvalidInput("weight exponent must be positive".into()));
    }
    if targets.is_empty() || sources.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let assignment: Vec<(usize, f64)> = match mode {
        MatchMode::ManyToOne => targets
            .iter()
            .map(|t| {
                let mut best = (0, f64::NEG_INFINITY);
                for (j, s) in sources.iter().enumerate() {
                    let w = pair_weight(t, s);
                    if w > best.1 {
                        best = (j, w);
                    }
                }
                best
            })
            .collect(),
        MatchMode::OneToOne => {
            if targets.len() > sources.len() {
                return Err(Error::InvalidInput(format!(
                    "one-to-one matching needs at least as many sources ({}) as targets ({})",
                    sources.len(),
                    targets.len()
                )));
            }
            let w: Vec<Vec<f64>> = targets
                .iter()
                .map(|t| sources.iter().map(|s| pair_weight(t, s)).collect())
                .collect();
            max_weight_assignment(&w)
                .into_iter()
                .enumerate()
                .map(|(i, j)| (j, w[i][j]))
                .collect()
        }
    };
    let pairs = assignment.iter().enumerate().map(|(i, &(j, _))| (i, j)).collect();
    let weights = assignment.iter().map(|&(_, w)| w.powi(exponent as i32)).collect();
    Ok(CorrespondenceSet {
        exponent,
        pairs,
        weights,
    })
}

/// Hungarian algorithm (shortest augmenting paths with potentials) on a
/// rows ≤ cols weight matrix; returns the column assigned to each row.
fn max_weight_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    let m = w[0].len();
    let cost = |i: usize, j: usize| -w[i][j];
    // 1-based with a virtual column 0, following the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}
