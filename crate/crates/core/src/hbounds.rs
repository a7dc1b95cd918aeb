//! Certified extreme values of the residual coefficients `h1` and `h2` over a
//! polar rectangle of rotation axes.
//!
//! `h1(u) = u . (v x n)` is linear in `u` and peaks at `c = (v x n)/|v x n|`;
//! `h2(u) = n^T [u]x^2 v = (n.u)(u.v) - n.v` is a quadratic form whose
//! maximizers are `+-m` and minimizers `+-m_perp`. When those points are not
//! inside the rectangle the extremes lie on its boundary, where both functions
//! reduce to low-order trigonometric polynomials along each edge.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    azimuth_distance, unit_to_polar, wrap_two_pi, Correspondence, PolarCoord, UnitVec3,
};

/// Angles closer than this to a special value take the special-case branch.
const ANGLE_TOL: f64 = 1e-12;
/// Seeds per fixed-alpha edge for bracketing stationary points of `h2`.
const EDGE_SEEDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HBoundsError {
    #[error("alpha_k is pi/2; the alpha-derivative of h1 has no isolated zero")]
    DegenerateAlphaK,
}

/// Axis sub-cube `[alpha_lo, alpha_hi] x [phi_lo, phi_hi]` in polar
/// coordinates. The azimuth range is read modulo `2pi` and may wrap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCube {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
}

impl SphericalCube {
    pub fn new(alpha_lo: f64, alpha_hi: f64, phi_lo: f64, phi_hi: f64) -> Self {
        debug_assert!(0.0 <= alpha_lo && alpha_lo <= alpha_hi && alpha_hi <= PI);
        debug_assert!(phi_lo <= phi_hi && phi_hi - phi_lo <= TAU + 1e-12);
        Self {
            alpha_lo,
            alpha_hi,
            phi_lo,
            phi_hi,
        }
    }

    /// The whole sphere.
    pub fn full() -> Self {
        Self::new(0.0, PI, 0.0, TAU)
    }

    pub fn alpha_width(&self) -> f64 {
        self.alpha_hi - self.alpha_lo
    }

    pub fn phi_width(&self) -> f64 {
        self.phi_hi - self.phi_lo
    }

    /// Longest side, in radians of the chart.
    pub fn edge(&self) -> f64 {
        self.alpha_width().max(self.phi_width())
    }

    pub fn center(&self) -> PolarCoord {
        PolarCoord::new(
            0.5 * (self.alpha_lo + self.alpha_hi),
            0.5 * (self.phi_lo + self.phi_hi),
        )
    }

    pub fn corners(&self) -> [PolarCoord; 4] {
        [
            PolarCoord::new(self.alpha_lo, self.phi_lo),
            PolarCoord::new(self.alpha_lo, self.phi_hi),
            PolarCoord::new(self.alpha_hi, self.phi_lo),
            PolarCoord::new(self.alpha_hi, self.phi_hi),
        ]
    }

    pub fn covers_all_azimuths(&self) -> bool {
        self.phi_width() >= TAU
    }

    /// Whether the azimuth `phi` (any real) lies in the cube's range.
    pub fn contains_azimuth(&self, phi: f64) -> bool {
        self.covers_all_azimuths() || wrap_two_pi(phi - self.phi_lo) <= self.phi_width()
    }

    /// Image of the cube under `u -> -u`.
    pub fn antipodal(&self) -> Self {
        Self::new(
            PI - self.alpha_hi,
            PI - self.alpha_lo,
            self.phi_lo + PI,
            self.phi_hi + PI,
        )
    }

    /// Maps local coordinates `(s, t)` in `[0,1]^2` to a point of the cube.
    pub fn lerp(&self, s: f64, t: f64) -> PolarCoord {
        PolarCoord::new(
            self.alpha_lo + s * self.alpha_width(),
            self.phi_lo + t * self.phi_width(),
        )
    }
}

/// Bounds of `h1` and `h2` for one correspondence over one cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBounds {
    pub h1_lo: f64,
    pub h1_hi: f64,
    pub h2_lo: f64,
    pub h2_hi: f64,
}

impl HBounds {
    /// Degenerate bounds at a single axis.
    pub fn at_point(u: &UnitVec3, s: &Correspondence) -> Self {
        let (a, b) = (h1(u, s), h2(u, s));
        Self {
            h1_lo: a,
            h1_hi: a,
            h2_lo: b,
            h2_hi: b,
        }
    }
}

pub fn h1(u: &UnitVec3, s: &Correspondence) -> f64 {
    u.as_vec().dot(&s.v.as_vec().cross(s.n.as_vec()))
}

pub fn h2(u: &UnitVec3, s: &Correspondence) -> f64 {
    s.n.dot(u) * u.dot(&s.v) - s.a
}

/// Membership of an axis in the cube. At the poles every azimuth matches.
pub fn cube_contains(c: &SphericalCube, u: &UnitVec3) -> bool {
    let p = unit_to_polar(u);
    if p.alpha < c.alpha_lo || p.alpha > c.alpha_hi {
        return false;
    }
    p.alpha == 0.0 || p.alpha == PI || c.contains_azimuth(p.phi)
}

/// The zero in `[0, pi]` of `sin(a_k) cos(a) cos(dphi) - sin(a) cos(a_k)`,
/// i.e. the stationary polar angle of `h1` along a meridian at azimuth
/// distance `delta_phi` from `c`.
pub fn alpha_star(alpha_k: f64, delta_phi: f64) -> Result<f64, HBoundsError> {
    if (alpha_k - FRAC_PI_2).abs() < ANGLE_TOL {
        return Err(HBoundsError::DegenerateAlphaK);
    }
    Ok(stationary_alpha(alpha_k, delta_phi))
}

/// `atan(tan(a_k) cos(dphi))` lifted into `[0, pi]`.
fn stationary_alpha(alpha_k: f64, delta_phi: f64) -> f64 {
    let a = alpha_k.sin() * delta_phi.cos();
    let b = alpha_k.cos();
    let g = a.atan2(b);
    if g < 0.0 {
        g + PI
    } else {
        g
    }
}

fn nearest_in(lo: f64, hi: f64, target: f64) -> f64 {
    target.clamp(lo, hi)
}

fn farthest_in(lo: f64, hi: f64, target: f64) -> f64 {
    if (target - lo).abs() >= (hi - target).abs() {
        lo
    } else {
        hi
    }
}

/// Polar angle in `[lo, hi]` maximizing `h1` along the meridian at azimuth
/// distance `dphi` from `c = (alpha_k, phi_k)`.
pub(crate) fn alpha_maximizer(lo: f64, hi: f64, alpha_k: f64, dphi: f64) -> f64 {
    if alpha_k.sin() < ANGLE_TOL || (dphi - FRAC_PI_2).abs() < ANGLE_TOL {
        // h1 ~ cos(a_k) cos(a): monotone in alpha
        return if alpha_k <= FRAC_PI_2 { lo } else { hi };
    }
    if (alpha_k - FRAC_PI_2).abs() < ANGLE_TOL {
        // h1 ~ sin(a) cos(dphi)
        return if dphi < FRAC_PI_2 {
            nearest_in(lo, hi, FRAC_PI_2)
        } else {
            farthest_in(lo, hi, FRAC_PI_2)
        };
    }
    if dphi < ANGLE_TOL {
        return nearest_in(lo, hi, alpha_k);
    }
    if dphi > FRAC_PI_2 {
        return farthest_in(lo, hi, stationary_alpha(alpha_k, dphi));
    }
    if alpha_k < FRAC_PI_2 && lo >= alpha_k {
        return lo;
    }
    if alpha_k > FRAC_PI_2 && hi <= PI - alpha_k {
        return hi;
    }
    nearest_in(lo, hi, stationary_alpha(alpha_k, dphi))
}

/// Polar angle in `[lo, hi]` minimizing `h1` along the meridian at azimuth
/// distance `dphi` from `c`.
pub(crate) fn alpha_minimizer(lo: f64, hi: f64, alpha_k: f64, dphi: f64) -> f64 {
    if alpha_k.sin() < ANGLE_TOL || (dphi - FRAC_PI_2).abs() < ANGLE_TOL {
        return if alpha_k <= FRAC_PI_2 { hi } else { lo };
    }
    if (alpha_k - FRAC_PI_2).abs() < ANGLE_TOL {
        return if dphi < FRAC_PI_2 {
            farthest_in(lo, hi, FRAC_PI_2)
        } else {
            nearest_in(lo, hi, FRAC_PI_2)
        };
    }
    if dphi < FRAC_PI_2 {
        // the stationary point is the maximizer here, so go away from it
        return farthest_in(lo, hi, stationary_alpha(alpha_k, dphi));
    }
    if alpha_k < FRAC_PI_2 && hi <= PI - alpha_k {
        return hi;
    }
    if alpha_k > FRAC_PI_2 && lo >= PI - alpha_k {
        return lo;
    }
    nearest_in(lo, hi, stationary_alpha(alpha_k, dphi))
}

/// Azimuths in the cube nearest to and farthest from `phi_k`.
fn near_far_azimuths(c: &SphericalCube, phi_k: f64) -> (f64, f64) {
    let near = if c.contains_azimuth(phi_k) {
        phi_k
    } else if azimuth_distance(c.phi_lo, phi_k) <= azimuth_distance(c.phi_hi, phi_k) {
        c.phi_lo
    } else {
        c.phi_hi
    };
    let anti = phi_k + PI;
    let far = if c.contains_azimuth(anti) {
        anti
    } else if azimuth_distance(c.phi_lo, phi_k) >= azimuth_distance(c.phi_hi, phi_k) {
        c.phi_lo
    } else {
        c.phi_hi
    };
    (near, far)
}

/// Global minimum and maximum of `h1` over the cube.
pub fn h1_bounds(c: &SphericalCube, s: &Correspondence) -> (f64, f64) {
    if s.is_degenerate() {
        return (-s.w, s.w);
    }
    let (alpha_k, phi_k) = (s.c_polar.alpha, s.c_polar.phi);
    // h1 depends on phi only through cos(phi_k - phi) scaled by sin(alpha) >= 0,
    // so the extremes sit on the nearest and farthest meridians
    let (phi_near, phi_far) = near_far_azimuths(c, phi_k);
    let d_near = azimuth_distance(phi_near, phi_k);
    let d_far = azimuth_distance(phi_far, phi_k);

    let a_max = alpha_maximizer(c.alpha_lo, c.alpha_hi, alpha_k, d_near);
    let a_min = alpha_minimizer(c.alpha_lo, c.alpha_hi, alpha_k, d_far);
    let mut hi = h1(&PolarCoord::new(a_max, phi_near).to_unit(), s);
    let mut lo = h1(&PolarCoord::new(a_min, phi_far).to_unit(), s);

    if cube_contains(c, &s.c) {
        hi = s.w;
    }
    if cube_contains(c, &-s.c) {
        lo = -s.w;
    }
    for p in c.corners() {
        let val = h1(&p.to_unit(), s);
        hi = hi.max(val);
        lo = lo.min(val);
    }
    (lo.max(-s.w), hi.min(s.w))
}

/// Running min/max accumulator.
#[derive(Debug, Clone, Copy)]
struct Extremes {
    lo: f64,
    hi: f64,
}

impl Extremes {
    fn new() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

/// Global minimum and maximum of `h2` over the cube.
pub fn h2_bounds(c: &SphericalCube, s: &Correspondence) -> (f64, f64) {
    let max_global = 0.5 * (1.0 - s.a);
    let min_global = -0.5 * (1.0 + s.a);
    let mut ext = Extremes::new();

    if cube_contains(c, &s.m) || cube_contains(c, &-s.m) {
        ext.hi = max_global;
    }
    if cube_contains(c, &s.m_perp) || cube_contains(c, &-s.m_perp) {
        ext.lo = min_global;
    }
    for p in c.corners() {
        ext.push(h2(&p.to_unit(), s));
    }
    // a full azimuth range has a single seam; both copies are searched anyway
    meridian_extremes(c.alpha_lo, c.alpha_hi, c.phi_lo, s, &mut ext);
    meridian_extremes(c.alpha_lo, c.alpha_hi, c.phi_hi, s, &mut ext);
    for alpha in [c.alpha_lo, c.alpha_hi] {
        if alpha.sin() > 1e-15 {
            parallel_extremes(alpha, c.phi_lo, c.phi_hi, s, &mut ext);
        }
    }
    (ext.lo.max(min_global), ext.hi.min(max_global))
}

/// Both bounds at once.
pub fn h_bounds(c: &SphericalCube, s: &Correspondence) -> HBounds {
    let (h1_lo, h1_hi) = h1_bounds(c, s);
    let (h2_lo, h2_hi) = h2_bounds(c, s);
    HBounds {
        h1_lo,
        h1_hi,
        h2_lo,
        h2_hi,
    }
}

/// Along the meridian at `phi`, `h2(alpha) = c0 + c1 cos(2 alpha) + c2 sin(2 alpha)`.
fn meridian_extremes(lo: f64, hi: f64, phi: f64, s: &Correspondence, ext: &mut Extremes) {
    let (sp, cp) = phi.sin_cos();
    let (n, v) = (s.n.as_vec(), s.v.as_vec());
    let p = n.x * cp + n.y * sp;
    let q = n.z;
    let r = v.x * cp + v.y * sp;
    let t = v.z;
    let c1 = 0.5 * (q * t - p * r);
    let c2 = 0.5 * (p * t + q * r);
    if c1 == 0.0 && c2 == 0.0 {
        return;
    }
    // stationary points at alpha = g/2 + k pi/2
    let base = 0.5 * c2.atan2(c1);
    let quarter = FRAC_PI_2;
    let k_start = ((lo - base) / quarter).ceil() as i64;
    let k_end = ((hi - base) / quarter).floor() as i64;
    for k in k_start..=k_end {
        let alpha = base + k as f64 * quarter;
        if alpha >= lo && alpha <= hi {
            ext.push(h2(&PolarCoord::new(alpha, phi).to_unit(), s));
        }
    }
}

/// Along the parallel at polar angle `alpha`, `h2(phi)` is a first-plus-second
/// harmonic trigonometric polynomial. Its stationary points are collected from
/// a seeded sign-change bisection and from the roots of the half-angle quartic.
fn parallel_extremes(alpha: f64, phi_lo: f64, phi_hi: f64, s: &Correspondence, ext: &mut Extremes) {
    let (sa, ca) = alpha.sin_cos();
    let (n, v) = (s.n.as_vec(), s.v.as_vec());
    let big_p1 = sa * ca * (n.x * v.z + v.x * n.z);
    let big_q1 = sa * ca * (n.y * v.z + v.y * n.z);
    let big_p2 = 0.5 * sa * sa * (n.x * v.x - n.y * v.y);
    let big_q2 = 0.5 * sa * sa * (n.x * v.y + n.y * v.x);
    let harmonic = EdgeHarmonic {
        p1: big_q1,
        q1: -big_p1,
        p2: 2.0 * big_q2,
        q2: -2.0 * big_p2,
    };

    let eval = |phi: f64| h2(&PolarCoord::new(alpha, phi).to_unit(), s);
    let width = phi_hi - phi_lo;
    let in_edge = |phi: f64| width >= TAU || wrap_two_pi(phi - phi_lo) <= width;

    let step = width / EDGE_SEEDS as f64;
    let mut prev_phi = phi_lo;
    let mut prev_d = harmonic.derivative(prev_phi);
    for i in 1..=EDGE_SEEDS {
        let phi = if i == EDGE_SEEDS {
            phi_hi
        } else {
            phi_lo + i as f64 * step
        };
        let d = harmonic.derivative(phi);
        if d == 0.0 {
            ext.push(eval(phi));
        } else if prev_d != 0.0 && (d > 0.0) != (prev_d > 0.0) {
            ext.push(eval(harmonic.bisect(prev_phi, phi, prev_d)));
        }
        prev_phi = phi;
        prev_d = d;
    }

    for phi in harmonic.stationary_points() {
        if in_edge(phi) {
            ext.push(eval(phi));
        }
    }
    if in_edge(PI) {
        ext.push(eval(PI));
    }
}

/// `p1 cos(phi) + q1 sin(phi) + p2 cos(2 phi) + q2 sin(2 phi)`: the derivative
/// of `h2` along a parallel.
#[derive(Debug, Clone, Copy)]
struct EdgeHarmonic {
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
}

impl EdgeHarmonic {
    fn derivative(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let c2 = c * c - s * s;
        let s2 = 2.0 * s * c;
        self.p1 * c + self.q1 * s + self.p2 * c2 + self.q2 * s2
    }

    fn second_derivative(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let c2 = c * c - s * s;
        let s2 = 2.0 * s * c;
        -self.p1 * s + self.q1 * c - 2.0 * self.p2 * s2 + 2.0 * self.q2 * c2
    }

    /// Bisection on a sign change of the derivative down to `1e-12`.
    fn bisect(&self, mut a: f64, mut b: f64, da: f64) -> f64 {
        let positive_at_a = da > 0.0;
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            let dm = self.derivative(mid);
            if dm == 0.0 {
                return mid;
            }
            if (dm > 0.0) == positive_at_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Zeros of the derivative from `t = tan(phi/2)`:
    /// `(p2-p1) t^4 + (2q1-4q2) t^3 - 6 p2 t^2 + (2q1+4q2) t + (p1+p2) = 0`.
    /// `phi = pi` (t at infinity) is handled by the caller.
    fn stationary_points(&self) -> Vec<f64> {
        let coeffs = [
            self.p1 + self.p2,
            2.0 * self.q1 + 4.0 * self.q2,
            -6.0 * self.p2,
            2.0 * self.q1 - 4.0 * self.q2,
            self.p2 - self.p1,
        ];
        real_roots_quartic(&coeffs)
            .into_iter()
            .map(|t| {
                let mut phi = 2.0 * t.atan();
                for _ in 0..3 {
                    let dd = self.second_derivative(phi);
                    if dd.abs() < 1e-300 {
                        break;
                    }
                    let next = phi - self.derivative(phi) / dd;
                    if (next - phi).abs() > 1e-3 {
                        break;
                    }
                    phi = next;
                }
                phi
            })
            .collect()
    }
}

/// Approximately-real roots of `sum coeffs[i] t^i` (degree at most 4). Roots
/// with a small imaginary part are kept by their real part: near-double roots
/// split into complex pairs under rounding.
fn real_roots_quartic(coeffs: &[f64; 5]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut degree = 4;
    while degree > 0 && coeffs[degree].abs() <= 1e-14 * scale {
        degree -= 1;
    }
    match degree {
        0 => Vec::new(),
        1 => vec![-coeffs[0] / coeffs[1]],
        _ => {
            let lead = coeffs[degree];
            let mut m = Matrix4::<f64>::zeros();
            for i in 1..degree {
                m[(i, i - 1)] = 1.0;
            }
            for i in 0..degree {
                m[(i, degree - 1)] = -coeffs[i] / lead;
            }
            let sub = m.fixed_view::<4, 4>(0, 0).into_owned();
            let eig = if degree == 4 {
                sub.complex_eigenvalues()
                    .iter()
                    .copied()
                    .collect::<Vec<_>>()
            } else {
                let d = nalgebra::DMatrix::from_fn(degree, degree, |i, j| sub[(i, j)]);
                d.complex_eigenvalues().iter().copied().collect::<Vec<_>>()
            };
            eig.into_iter()
                .filter(|z| z.im.abs() <= 1e-4 * (1.0 + z.re.abs()))
                .map(|z| z.re)
                .collect()
        }
    }
}
