//! Synthetic line-correspondence scenes with known pose.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AxisAngle, Correspondence, UnitVec3, Vec3};

/// Half-width of the box holding the sampled line points.
const POINT_BOX: f64 = 5.0;
/// Half-width of the box holding a random camera position.
const TRANSLATION_BOX: f64 = 1.0;
const MAX_RESAMPLES: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid scene configuration: {0}")]
    InvalidConfig(String),
    #[error("could not sample a line that avoids the camera center")]
    DegenerateLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierModel {
    /// Normal replaced by a uniform random unit vector.
    #[default]
    Uniform,
    /// Normal taken from an unrelated random 3D line seen by the same camera.
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Rotation in the residual convention (`camera_from_world`).
    pub rotation: AxisAngle,
    /// Camera center in the world frame.
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub num_lines: usize,
    pub outlier_ratio: f64,
    /// Standard deviation of the normal perturbation angle, radians.
    pub noise_sigma: f64,
    pub seed: u64,
    pub pose: Option<Pose>,
    #[serde(default)]
    pub outlier_model: OutlierModel,
}

impl SceneConfig {
    pub fn new(num_lines: usize, outlier_ratio: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            num_lines,
            outlier_ratio,
            noise_sigma,
            seed,
            pose: None,
            outlier_model: OutlierModel::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidConfig(m.to_string()));
        if self.num_lines == 0 {
            return bad("num_lines must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.outlier_ratio) {
            return bad("outlier_ratio must be in [0, 1]");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0");
        }
        Ok(())
    }

    pub fn inlier_count(&self) -> usize {
        ((1.0 - self.outlier_ratio) * self.num_lines as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rotation: AxisAngle,
    pub translation: [f64; 3],
    pub inlier_mask: Vec<bool>,
}

impl GroundTruth {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

/// A generated 3D line with its observed normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneLine {
    /// A point on the line, world frame.
    pub p0: Vec3,
    pub v: UnitVec3,
    pub n: UnitVec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub lines: Vec<SceneLine>,
    pub ground_truth: GroundTruth,
}

impl Scene {
    pub fn correspondences(&self) -> Vec<Correspondence> {
        self.lines
            .iter()
            .map(|l| Correspondence::new(l.v, l.n))
            .collect()
    }
}

pub fn random_unit(rng: &mut impl Rng) -> UnitVec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    UnitVec3::new_unchecked(Vec3::new(r * phi.cos(), r * phi.sin(), z))
}

fn random_in_box(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-half..=half),
        rng.gen_range(-half..=half),
        rng.gen_range(-half..=half),
    )
}

/// Rotates `n` by an angle `|N(0, sigma^2)|` about a random axis orthogonal
/// to it.
pub fn perturb_normal(n: &UnitVec3, sigma: f64, rng: &mut impl Rng) -> UnitVec3 {
    if sigma == 0.0 {
        return *n;
    }
    let angle: f64 = Normal::new(0.0, sigma)
        .expect("sigma is finite and non-negative")
        .sample(rng)
        .abs();
    let nv = n.as_vec();
    let axis = loop {
        let w = random_unit(rng).into_vec();
        let t = w - nv * w.dot(nv);
        let norm = t.norm();
        if norm > 1e-6 {
            break t / norm;
        }
    };
    let out = nv * angle.cos() + axis.cross(nv) * angle.sin();
    UnitVec3::new_unchecked(out / out.norm())
}

/// Samples a line and returns it with its exact camera-frame normal.
fn sample_line(
    rng: &mut impl Rng,
    q: &nalgebra::Matrix3<f64>,
    t: &Vec3,
) -> Result<SceneLine, SceneError> {
    for _ in 0..MAX_RESAMPLES {
        let p0 = random_in_box(rng, POINT_BOX);
        let v = random_unit(rng);
        let cam_p = q * (p0 - t);
        let cam_v = q * v.as_vec();
        let cross = cam_p.cross(&cam_v);
        let norm = cross.norm();
        if norm >= 1e-12 {
            return Ok(SceneLine {
                p0,
                v,
                n: UnitVec3::new_unchecked(cross / norm),
            });
        }
    }
    Err(SceneError::DegenerateLine)
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SceneError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pose = match cfg.pose {
        Some(p) => p,
        None => {
            let axis = random_unit(&mut rng);
            let theta = rng.gen_range(0.0..=std::f64::consts::PI);
            let t = random_in_box(&mut rng, TRANSLATION_BOX);
            Pose {
                rotation: AxisAngle::new(axis, theta),
                translation: [t.x, t.y, t.z],
            }
        }
    };
    let q = pose.rotation.camera_from_world();
    let t = Vec3::from(pose.translation);

    let n_lines = cfg.num_lines;
    let n_in = cfg.inlier_count();
    let mut order: Vec<usize> = (0..n_lines).collect();
    order.shuffle(&mut rng);
    let mut inlier_mask = vec![true; n_lines];
    for &i in &order[..n_lines - n_in] {
        inlier_mask[i] = false;
    }

    let mut lines = Vec::with_capacity(n_lines);
    for &inlier in &inlier_mask {
        let mut line = sample_line(&mut rng, &q, &t)?;
        line.n = if inlier {
            perturb_normal(&line.n, cfg.noise_sigma, &mut rng)
        } else {
            match cfg.outlier_model {
                OutlierModel::Uniform => random_unit(&mut rng),
                OutlierModel::Mismatch => sample_line(&mut rng, &q, &t)?.n,
            }
        };
        lines.push(line);
    }
    Ok(Scene {
        lines,
        ground_truth: GroundTruth {
            rotation: pose.rotation,
            translation: pose.translation,
            inlier_mask,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::residual;

    #[test]
    fn noiseless_scene_is_exact() {
        for seed in 0..20 {
            let scene = generate_scene(&SceneConfig::new(50, 0.0, 0.0, seed)).unwrap();
            let gt = &scene.ground_truth;
            assert_eq!(gt.inlier_count(), 50);
            let r = gt.rotation.world_from_camera();
            let t = Vec3::from(gt.translation);
            for (line, s) in scene.lines.iter().zip(scene.correspondences()) {
                assert!(residual(&gt.rotation, &s).abs() <= 1e-12);
                let rn = r * line.n.as_vec();
                assert!(rn.dot(&(line.p0 - t)).abs() <= 1e-12 * (1.0 + (line.p0 - t).norm()));
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SceneConfig::new(40, 0.5, 0.01, 42);
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneConfig::new(40, 0.5, 0.01, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn inlier_count_is_rounded() {
        for (n, r, expected) in [(10, 0.25, 8), (100, 0.8, 20), (7, 1.0, 0), (3, 0.5, 2)] {
            let scene = generate_scene(&SceneConfig::new(n, r, 0.0, 1)).unwrap();
            assert_eq!(scene.ground_truth.inlier_count(), expected);
            assert_eq!(scene.ground_truth.inlier_mask.len(), n);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_scene(&SceneConfig::new(0, 0.1, 0.0, 1)).is_err());
        assert!(generate_scene(&SceneConfig::new(5, 1.5, 0.0, 1)).is_err());
        assert!(generate_scene(&SceneConfig::new(5, 0.1, -1.0, 1)).is_err());
    }

    #[test]
    fn perturbation_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = random_unit(&mut rng);
        assert_eq!(perturb_normal(&n, 0.0, &mut rng), n);
        let sigma = 0.01;
        let draws = 10_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let p = perturb_normal(&n, sigma, &mut rng);
            assert!((p.as_vec().norm() - 1.0).abs() < 1e-12);
            total += p.dot(&n).clamp(-1.0, 1.0).acos();
        }
        let mean = total / draws as f64;
        let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - expected).abs() < 0.1 * expected,
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn inlier_residual_grows_with_noise() {
        let mean_abs = |sigma: f64| {
            let scene = generate_scene(&SceneConfig::new(500, 0.0, sigma, 5)).unwrap();
            let gt = scene.ground_truth.rotation;
            let c = scene.correspondences();
            c.iter().map(|s| residual(&gt, s).abs()).sum::<f64>() / c.len() as f64
        };
        let (a, b, c) = (mean_abs(0.0), mean_abs(0.005), mean_abs(0.02));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn mismatch_outliers_are_unit_and_off_model() {
        let mut cfg = SceneConfig::new(60, 0.5, 0.0, 3);
        cfg.outlier_model = OutlierModel::Mismatch;
        let scene = generate_scene(&cfg).unwrap();
        let gt = scene.ground_truth.rotation;
        let c = scene.correspondences();
        let off = scene
            .ground_truth
            .inlier_mask
            .iter()
            .zip(&c)
            .filter(|(inl, s)| !**inl && residual(&gt, s).abs() > 1e-6)
            .count();
        assert!(off >= 25);
    }
}
