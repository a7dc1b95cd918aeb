//! Brute-force references for the bounding and search code.
//!
//! Everything here is recomputed from the raw vectors `v`, `n` with plain
//! dot and cross products on regular grids. Nothing calls into the bounding,
//! interval or search modules; only their data types are shared.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{AxisAngle, Correspondence, UnitVec3, Vec3};
use crate::hbounds::SphericalCube;
use crate::stabbing::{Interval, IntervalSet};

/// Sampled extremes of `h1` and `h2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HExtrema {
    pub h1_lo: f64,
    pub h1_hi: f64,
    pub h2_lo: f64,
    pub h2_hi: f64,
}

fn unit_from_polar(alpha: f64, phi: f64) -> Vec3 {
    let (sa, ca) = alpha.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(sa * cp, sa * sp, ca)
}

/// Extremes over a `grid x grid` tensor sampling of the cube, corners
/// included. Under-approximates the true range by at most about
/// `2 * edge / (grid - 1)`.
pub fn oracle_h_extrema(cube: &SphericalCube, s: &Correspondence, grid: usize) -> HExtrema {
    assert!(grid >= 2, "grid must be at least 2");
    let v = *s.v.as_vec();
    let n = *s.n.as_vec();
    let vxn = v.cross(&n);
    let a = n.dot(&v);
    let steps = (grid - 1) as f64;

    let azimuths: Vec<(f64, f64)> = (0..grid)
        .map(|j| (cube.phi_lo + cube.phi_width() * j as f64 / steps).sin_cos())
        .collect();
    let mut out = HExtrema {
        h1_lo: f64::INFINITY,
        h1_hi: f64::NEG_INFINITY,
        h2_lo: f64::INFINITY,
        h2_hi: f64::NEG_INFINITY,
    };
    for i in 0..grid {
        let (sa, ca) = (cube.alpha_lo + cube.alpha_width() * i as f64 / steps).sin_cos();
        // per row: u = sa (cp, sp, 0) + ca z, so every dot is affine in (cp, sp)
        let (c1x, c1y, c1z) = (sa * vxn.x, sa * vxn.y, ca * vxn.z);
        let (nx, ny, nz) = (sa * n.x, sa * n.y, ca * n.z);
        let (vx, vy, vz) = (sa * v.x, sa * v.y, ca * v.z);
        let (mut lo1, mut hi1, mut lo2, mut hi2) = (out.h1_lo, out.h1_hi, out.h2_lo, out.h2_hi);
        for &(sp, cp) in &azimuths {
            let g1 = c1x * cp + c1y * sp + c1z;
            let g2 = (nx * cp + ny * sp + nz) * (vx * cp + vy * sp + vz) - a;
            lo1 = lo1.min(g1);
            hi1 = hi1.max(g1);
            lo2 = lo2.min(g2);
            hi2 = hi2.max(g2);
        }
        out = HExtrema {
            h1_lo: lo1,
            h1_hi: hi1,
            h2_lo: lo2,
            h2_hi: hi2,
        };
    }
    out
}

/// Residual `n . Q v` built from an explicit Rodrigues matrix.
pub fn oracle_residual(u: &Vec3, theta: f64, s: &Correspondence) -> f64 {
    let (x, y, z) = (u.x, u.y, u.z);
    let (st, ct) = theta.sin_cos();
    let vc = 1.0 - ct;
    let v = s.v.as_vec();
    let n = s.n.as_vec();
    let qv = Vec3::new(
        (ct + x * x * vc) * v.x + (x * y * vc - z * st) * v.y + (x * z * vc + y * st) * v.z,
        (y * x * vc + z * st) * v.x + (ct + y * y * vc) * v.y + (y * z * vc - x * st) * v.z,
        (z * x * vc - y * st) * v.x + (z * y * vc + x * st) * v.y + (ct + z * z * vc) * v.z,
    );
    n.dot(&qv)
}

/// Feasible angles from `samples` uniform samples of `[0, pi]`, consecutive
/// feasible samples merged into intervals.
pub fn oracle_theta(s: &Correspondence, u: &UnitVec3, eps: f64, samples: usize) -> IntervalSet {
    assert!(samples >= 2, "need at least 2 samples");
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev = 0.0;
    for i in 0..samples {
        let t = PI * i as f64 / (samples - 1) as f64;
        let ok = oracle_residual(u.as_vec(), t, s).abs() <= eps;
        match (ok, open) {
            (true, None) => open = Some(t),
            (false, Some(lo)) => {
                out.push(Interval::new(lo, prev));
                open = None;
            }
            _ => {}
        }
        prev = t;
    }
    if let Some(lo) = open {
        out.push(Interval::new(lo, PI));
    }
    IntervalSet::from_raw(out)
}

/// Exhaustive grid search over `(alpha, phi, theta)` at spacing `res`.
/// Returns the best count and its rotation; a lower bound on the optimum.
pub fn oracle_consensus(data: &[Correspondence], eps: f64, res: f64) -> (usize, AxisAngle) {
    assert!(res > 0.0, "resolution must be positive");
    assert!(
        data.len() <= u16::MAX as usize,
        "too many correspondences for the grid oracle"
    );
    let n_alpha = (PI / res).ceil() as usize + 1;
    let n_phi = (TAU / res).ceil() as usize;
    let n_theta = (PI / res).ceil() as usize + 1;
    let thetas: Vec<f64> = (0..n_theta)
        .map(|i| PI * i as f64 / (n_theta - 1) as f64)
        .collect();
    let sin_t: Vec<f64> = thetas.iter().map(|t| t.sin()).collect();
    let vers_t: Vec<f64> = thetas.iter().map(|t| 1.0 - t.cos()).collect();

    // residual(u, theta) = n.v + sin(theta) n.(u x v) + (1 - cos(theta)) n.(u x (u x v))
    let row_best = |i: usize| -> (usize, usize, usize, usize) {
        let alpha = PI * i as f64 / (n_alpha - 1) as f64;
        let mut counts = vec![0u16; n_theta];
        let mut best = (0usize, i, 0usize, 0usize);
        let phis = if i == 0 || i == n_alpha - 1 { 1 } else { n_phi };
        for j in 0..phis {
            let u = unit_from_polar(alpha, TAU * j as f64 / n_phi as f64);
            counts.iter_mut().for_each(|c| *c = 0);
            for s in data {
                let v = s.v.as_vec();
                let n = s.n.as_vec();
                let uxv = u.cross(v);
                let a = n.dot(v);
                let g1 = n.dot(&uxv);
                let g2 = n.dot(&u.cross(&uxv));
                // at most data.len() <= u16::MAX increments, so wrapping never happens
                for ((c, &st), &vt) in counts.iter_mut().zip(&sin_t).zip(&vers_t) {
                    *c = c.wrapping_add(((a + st * g1 + vt * g2).abs() <= eps) as u16);
                }
            }
            for (k, &c) in counts.iter().enumerate() {
                if c as usize > best.0 {
                    best = (c as usize, i, j, k);
                }
            }
        }
        best
    };
    let rows: Vec<(usize, usize, usize, usize)> =
        (0..n_alpha).into_par_iter().map(row_best).collect();
    let best = rows
        .into_iter()
        .fold((0, 0, 0, 0), |acc, r| if r.0 > acc.0 { r } else { acc });
    let alpha = PI * best.1 as f64 / (n_alpha - 1) as f64;
    let phi = TAU * best.2 as f64 / n_phi as f64;
    let axis = UnitVec3::new_unchecked(unit_from_polar(alpha, phi));
    (best.0, AxisAngle::new(axis, thetas[best.3]))
}
