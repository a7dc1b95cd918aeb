//! Vectors, polar charts and the rotation convention shared by every module.
//!
//! The rotation convention is fixed by the residual expansion: for an
//! axis-angle pair `(u, theta)` the residual of a correspondence is
//! `n . Q v` with `Q = I + sin(theta) [u]x + (1 - cos(theta)) [u]x^2`.
//! `Q` maps world-frame directions into the camera frame, so the
//! camera-to-world rotation of the pose is `R = Q^T`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// `v x n` norms below this are treated as parallel lines.
pub const DEGENERATE_CROSS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("vector has zero length")]
    ZeroVector,
    #[error("pixel line coefficients are all zero")]
    ZeroLine,
    #[error("intrinsic matrix is not invertible")]
    SingularIntrinsics,
}

/// A unit-length 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        Self::from_vec(Vec3::new(x, y, z))
    }

    /// Normalizes `v`; fails when it is (numerically) zero or not finite.
    pub fn from_vec(v: Vec3) -> Result<Self, GeometryError> {
        let norm = v.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Self(v / norm))
    }

    /// Wraps `v` without normalizing. The caller guarantees `|v| = 1`.
    pub fn new_unchecked(v: Vec3) -> Self {
        Self(v)
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn to_polar(&self) -> PolarCoord {
        unit_to_polar(self)
    }

    /// Any unit vector orthogonal to `self`.
    pub fn any_orthogonal(&self) -> UnitVec3 {
        let v = &self.0;
        let helper = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
            Vec3::x()
        } else if v.y.abs() <= v.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let o = v.cross(&helper);
        UnitVec3(o / o.norm())
    }
}

impl std::ops::Neg for UnitVec3 {
    type Output = UnitVec3;

    fn neg(self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(u: UnitVec3) -> Self {
        [u.0.x, u.0.y, u.0.z]
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = GeometryError;

    fn try_from(a: [f64; 3]) -> Result<Self, Self::Error> {
        UnitVec3::new(a[0], a[1], a[2])
    }
}

/// Polar coordinates of a point on the unit sphere: `alpha` is the angle from
/// `+z`, `phi` the azimuth in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarCoord {
    pub alpha: f64,
    pub phi: f64,
}

impl PolarCoord {
    /// Clamps `alpha` into `[0, pi]` and wraps `phi` into `[0, 2pi)`. Poles get
    /// `phi = 0`.
    pub fn new(alpha: f64, phi: f64) -> Self {
        let alpha = alpha.clamp(0.0, PI);
        let phi = if alpha == 0.0 || alpha == PI {
            0.0
        } else {
            wrap_two_pi(phi)
        };
        Self { alpha, phi }
    }

    pub fn to_unit(&self) -> UnitVec3 {
        polar_to_unit(self)
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Unsigned angular distance between two azimuths, in `[0, pi]`.
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    let d = wrap_two_pi(a - b);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

pub fn polar_to_unit(p: &PolarCoord) -> UnitVec3 {
    let (sa, ca) = p.alpha.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    UnitVec3(Vec3::new(sa * cp, sa * sp, ca))
}

pub fn unit_to_polar(u: &UnitVec3) -> PolarCoord {
    let v = u.as_vec();
    let rho = v.x.hypot(v.y);
    // atan2 keeps accuracy near the poles where acos(z) does not
    let alpha = rho.atan2(v.z);
    if rho == 0.0 {
        return PolarCoord {
            alpha: if v.z > 0.0 { 0.0 } else { PI },
            phi: 0.0,
        };
    }
    PolarCoord {
        alpha,
        phi: wrap_two_pi(v.y.atan2(v.x)),
    }
}

/// Cross-product matrix `[u]x` with `[u]x w = u x w`.
pub fn skew(u: &Vec3) -> Mat3 {
    Mat3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// A rotation as axis and amplitude `theta` in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: UnitVec3,
    pub theta: f64,
}

impl AxisAngle {
    /// Any real `theta` is accepted and canonicalized into `[0, pi]`, flipping
    /// the axis when needed.
    pub fn new(axis: UnitVec3, theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        let mut axis = axis;
        if t > PI {
            t = TAU - t;
            axis = -axis;
        }
        Self { axis, theta: t }
    }

    pub fn identity() -> Self {
        Self {
            axis: UnitVec3(Vec3::z()),
            theta: 0.0,
        }
    }

    /// `Q = I + sin(theta) [u]x + (1 - cos(theta)) [u]x^2`; maps world
    /// directions into the camera frame.
    pub fn camera_from_world(&self) -> Mat3 {
        let k = skew(self.axis.as_vec());
        let (s, c) = self.theta.sin_cos();
        Mat3::identity() + k * s + k * k * (1.0 - c)
    }

    /// Camera-to-world rotation `R = Q^T` of the pose.
    pub fn world_from_camera(&self) -> Mat3 {
        self.camera_from_world().transpose()
    }

    /// Recovers the axis-angle pair whose `camera_from_world` matrix is `q`.
    pub fn from_camera_from_world(q: &Mat3) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*q);
        match rot.axis_angle() {
            Some((axis, angle)) => AxisAngle::new(UnitVec3(axis.into_inner()), angle),
            None => AxisAngle::identity(),
        }
    }

    /// Geodesic distance on SO(3) between two rotations, in `[0, pi]`.
    pub fn angle_to(&self, other: &AxisAngle) -> f64 {
        let d = self.camera_from_world().transpose() * other.camera_from_world();
        let cos = ((d.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        // sin from the skew part keeps precision for small angles
        let sin = Vec3::new(
            d[(2, 1)] - d[(1, 2)],
            d[(0, 2)] - d[(2, 0)],
            d[(1, 0)] - d[(0, 1)],
        )
        .norm()
            / 2.0;
        sin.atan2(cos)
    }
}

/// One 2D/3D line match with the derived frames used by the bounding code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// 3D line direction in the world frame.
    pub v: UnitVec3,
    /// Interpretation-plane normal in the normalized camera frame.
    pub n: UnitVec3,
    /// `n . v`
    pub a: f64,
    /// `|v x n|`
    pub w: f64,
    /// Normalized bisector `(v + n) / |v + n|`: the maximizer of `h2`.
    pub m: UnitVec3,
    /// Normalized difference `(v - n) / |v - n|`: the minimizer of `h2`.
    pub m_perp: UnitVec3,
    /// Normalized `v x n`: the maximizer of `h1`.
    pub c: UnitVec3,
    pub c_polar: PolarCoord,
}

impl Correspondence {
    pub fn new(v: UnitVec3, n: UnitVec3) -> Self {
        let vv = v.as_vec();
        let nv = n.as_vec();
        let a = vv.dot(nv);
        let cross = vv.cross(nv);
        let w = cross.norm();

        let sum = vv + nv;
        let diff = vv - nv;
        let (m, m_perp) = match (UnitVec3::from_vec(sum), UnitVec3::from_vec(diff)) {
            (Ok(m), Ok(mp)) if w >= DEGENERATE_CROSS => (m, mp),
            _ if a >= 0.0 => (v, v.any_orthogonal()),
            // n ~ -v: v - n ~ 2v is the minimizer, the bisector is any orthogonal
            _ => (v.any_orthogonal(), v),
        };
        let c = if w >= DEGENERATE_CROSS {
            UnitVec3(cross / w)
        } else {
            m_perp_any(&v, &m, &m_perp)
        };
        Self {
            v,
            n,
            a,
            w,
            m,
            m_perp,
            c,
            c_polar: unit_to_polar(&c),
        }
    }

    /// `v` and `n` (anti)parallel; `c` is then an arbitrary completion.
    pub fn is_degenerate(&self) -> bool {
        self.w < DEGENERATE_CROSS
    }
}

fn m_perp_any(v: &UnitVec3, m: &UnitVec3, m_perp: &UnitVec3) -> UnitVec3 {
    let c = m.as_vec().cross(m_perp.as_vec());
    UnitVec3::from_vec(c).unwrap_or_else(|_| v.any_orthogonal())
}

/// Residual `n . Q v` for the rotation `r`, expanded as
/// `n.v + sin(theta) n.(u x v) + (1 - cos(theta)) n.[u]x^2 v`.
pub fn residual(r: &AxisAngle, s: &Correspondence) -> f64 {
    let u = r.axis.as_vec();
    let v = s.v.as_vec();
    let n = s.n.as_vec();
    let uxv = u.cross(v);
    let uuxv = u.cross(&uxv);
    let (st, ct) = r.theta.sin_cos();
    s.a + st * n.dot(&uxv) + (1.0 - ct) * n.dot(&uuxv)
}

/// Converts pixel-line coefficients `A u + B v + C = 0` into the unit
/// interpretation-plane normal in the normalized camera frame:
/// `[A_c B_c C_c] = [A B C] K`, normalized.
pub fn pixel_line_to_normal(abc: [f64; 3], k: &Mat3) -> Result<UnitVec3, GeometryError> {
    let line = Vec3::new(abc[0], abc[1], abc[2]);
    if line.norm() < 1e-15 {
        return Err(GeometryError::ZeroLine);
    }
    if k.try_inverse().is_none() || k.determinant().abs() < 1e-300 {
        return Err(GeometryError::SingularIntrinsics);
    }
    let normalized = k.transpose() * line;
    UnitVec3::from_vec(normalized).map_err(|_| GeometryError::ZeroLine)
}
