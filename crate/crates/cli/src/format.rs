//! On-disk documents: correspondences, ground truth and solver results.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::Matrix3;
use pnl_acm::geometry::pixel_line_to_normal;
use pnl_acm::{AxisAngle, Correspondence, GroundTruth, SolveResult, UnitVec3};
use serde::{Deserialize, Serialize};

/// One record of a correspondence document. Exactly one of `n` and `abc`
/// is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRecord {
    pub v: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abc: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceFile {
    /// Row-major intrinsics, required when any record carries `abc`.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[[f64; 3]; 3]>,
    pub correspondences: Vec<CorrespondenceRecord>,
}

impl CorrespondenceFile {
    pub fn from_correspondences(data: &[Correspondence]) -> Self {
        Self {
            k: None,
            correspondences: data
                .iter()
                .map(|s| CorrespondenceRecord {
                    v: vec3(&s.v),
                    n: Some(vec3(&s.n)),
                    abc: None,
                })
                .collect(),
        }
    }

    pub fn to_correspondences(&self) -> Result<Vec<Correspondence>> {
        let k = self.k.map(|k| Matrix3::from_fn(|r, c| k[r][c]));
        self.correspondences
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let v = UnitVec3::new(rec.v[0], rec.v[1], rec.v[2])
                    .map_err(|e| anyhow!("correspondence {i}: v: {e}"))?;
                let n = match (rec.n, rec.abc) {
                    (Some(n), None) => UnitVec3::new(n[0], n[1], n[2])
                        .map_err(|e| anyhow!("correspondence {i}: n: {e}"))?,
                    (None, Some(abc)) => {
                        let k = k.ok_or_else(|| {
                            anyhow!("correspondence {i}: abc given but the file has no K")
                        })?;
                        pixel_line_to_normal(abc, &k)
                            .map_err(|e| anyhow!("correspondence {i}: abc: {e}"))?
                    }
                    (Some(_), Some(_)) => {
                        bail!("correspondence {i}: give either n or abc, not both")
                    }
                    (None, None) => bail!("correspondence {i}: missing n or abc"),
                };
                Ok(Correspondence::new(v, n))
            })
            .collect()
    }
}

/// Rotation as axis, angle and the matrix taking world directions into the
/// camera frame (`residual = n . (matrix v)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationDoc {
    pub axis: [f64; 3],
    pub theta: f64,
    pub matrix: [[f64; 3]; 3],
}

impl From<&AxisAngle> for RotationDoc {
    fn from(r: &AxisAngle) -> Self {
        let q = r.camera_from_world();
        Self {
            axis: vec3(&r.axis),
            theta: r.theta,
            matrix: [0, 1, 2].map(|i| [q[(i, 0)], q[(i, 1)], q[(i, 2)]]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub rotation: RotationDoc,
    /// Camera center in the world frame.
    pub translation: [f64; 3],
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
}

impl From<&GroundTruth> for GroundTruthFile {
    fn from(gt: &GroundTruth) -> Self {
        Self {
            rotation: (&gt.rotation).into(),
            translation: gt.translation,
            inlier_mask: gt.inlier_mask.clone(),
            inlier_count: gt.inlier_count(),
        }
    }
}

impl GroundTruthFile {
    pub fn rotation(&self) -> Result<AxisAngle> {
        let a = self.rotation.axis;
        let axis =
            UnitVec3::new(a[0], a[1], a[2]).map_err(|e| anyhow!("ground truth axis: {e}"))?;
        Ok(AxisAngle::new(axis, self.rotation.theta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub nodes: usize,
    pub lb_evals: usize,
    pub ub_evals: usize,
    pub leaf_refinements: usize,
    pub time_ms: f64,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub rotation: RotationDoc,
    pub consensus: usize,
    pub upper_bound: usize,
    pub gap: usize,
    pub inliers: Vec<usize>,
    pub stats: StatsDoc,
}

impl ResultFile {
    pub fn new(r: &SolveResult, timing: bool) -> Self {
        Self {
            rotation: (&r.rotation).into(),
            consensus: r.consensus,
            upper_bound: r.upper_bound_global,
            gap: r.gap,
            inliers: r.inlier_indices.clone(),
            stats: StatsDoc {
                nodes: r.stats.nodes_expanded,
                lb_evals: r.stats.lb_evals,
                ub_evals: r.stats.ub_evals,
                leaf_refinements: r.stats.leaf_refinements,
                time_ms: if timing {
                    r.stats.wall_time.as_secs_f64() * 1e3
                } else {
                    0.0
                },
                termination: format!("{:?}", r.stats.termination).to_lowercase(),
            },
        }
    }
}

fn vec3(u: &UnitVec3) -> [f64; 3] {
    [u.x(), u.y(), u.z()]
}

/// Reads a JSON document, reporting `path:line:column` on parse errors.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
