//! Feasible rotation-angle sets for one correspondence.
//!
//! For a fixed axis the residual is `a + h1 sin(theta) + h2 (1 - cos(theta))`,
//! which is the sinusoid `(a + h2) + R sin(theta + psi)` with
//! `R = hypot(h1, h2)` and `psi = atan2(-h2, h1)`. Over an axis cube `h1` and
//! `h2` only have interval bounds; since `sin(theta)` and `1 - cos(theta)` are
//! non-negative on `[0, pi]` the residual is sandwiched between the sinusoids
//! built from the lower and the upper bounds.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{Correspondence, UnitVec3};
use crate::hbounds::{h1, h2, HBounds};
use crate::stabbing::{Interval, IntervalSet};

/// Outward margin applied to relaxed sets.
pub const RELAXED_MARGIN: f64 = 1e-12;

/// `g(theta) = offset + amplitude * sin(theta + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidBand {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl SinusoidBand {
    pub fn new(offset: f64, amplitude: f64, phase: f64) -> Self {
        debug_assert!(amplitude >= 0.0);
        Self {
            offset,
            amplitude,
            phase,
        }
    }

    /// Canonical form of `a + h1 sin(theta) + h2 (1 - cos(theta))`.
    pub fn from_coefficients(a: f64, h1: f64, h2: f64) -> Self {
        Self::new(a + h2, h1.hypot(h2), (-h2).atan2(h1))
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.offset + self.amplitude * (theta + self.phase).sin()
    }
}

/// Exact `{theta in [0, pi] : lo <= g(theta) <= hi}`.
///
/// `theta + phase` sweeps an interval of length `pi`, so it crosses at most
/// one extremum of `sin`; the domain splits into at most two monotone pieces
/// and each piece contributes one interval obtained by inverting `asin`.
pub fn sinusoid_solve(g: &SinusoidBand, lo: f64, hi: f64) -> IntervalSet {
    debug_assert!(lo <= hi);
    if g.amplitude == 0.0 {
        return if lo <= g.offset && g.offset <= hi {
            IntervalSet::single(0.0, PI)
        } else {
            IntervalSet::empty()
        };
    }

    // extrema of sin(x) at x = pi/2 + k pi, with x = theta + phase
    let mut breaks = vec![0.0];
    let k0 = ((g.phase - FRAC_PI_2) / PI).ceil() as i64;
    let mut k = k0;
    loop {
        let theta = FRAC_PI_2 + k as f64 * PI - g.phase;
        if theta >= PI {
            break;
        }
        if theta > 0.0 {
            breaks.push(theta);
        }
        k += 1;
    }
    breaks.push(PI);

    let mut pieces = Vec::with_capacity(2);
    for w in breaks.windows(2) {
        if let Some(iv) = monotone_piece(g, w[0], w[1], lo, hi) {
            pieces.push(iv);
        }
    }
    IntervalSet::from_intervals(pieces)
}

/// Solution of `lo <= g <= hi` on `[t0, t1]` where `g` is monotone.
fn monotone_piece(g: &SinusoidBand, t0: f64, t1: f64, lo: f64, hi: f64) -> Option<Interval> {
    let mid = 0.5 * (t0 + t1);
    let increasing = (mid + g.phase).cos() > 0.0;
    let (g0, g1) = (g.eval(t0), g.eval(t1));
    let (gmin, gmax) = if increasing { (g0, g1) } else { (g1, g0) };
    if gmax < lo || gmin > hi {
        return None;
    }
    // branch of x = theta + phase holding the piece
    let x_mid = mid + g.phase;
    let turns = ((x_mid + FRAC_PI_2) / (2.0 * PI)).floor();
    let base = turns * 2.0 * PI;
    let inverse = |y: f64| -> f64 {
        let s = ((y - g.offset) / g.amplitude).clamp(-1.0, 1.0);
        let x = if increasing {
            base + s.asin()
        } else {
            base + PI - s.asin()
        };
        (x - g.phase).clamp(t0, t1)
    };
    let (a, b) = if increasing {
        let a = if g0 >= lo { t0 } else { inverse(lo) };
        let b = if g1 <= hi { t1 } else { inverse(hi) };
        (a, b)
    } else {
        let a = if g0 <= hi { t0 } else { inverse(hi) };
        let b = if g1 >= lo { t1 } else { inverse(lo) };
        (a, b)
    };
    if a <= b {
        Some(Interval::new(a, b))
    } else {
        None
    }
}

/// `{theta : |residual(u, theta)| <= eps}` for a fixed axis.
pub fn feasible_theta_exact(s: &Correspondence, u: &UnitVec3, eps: f64) -> IntervalSet {
    let g = SinusoidBand::from_coefficients(s.a, h1(u, s), h2(u, s));
    sinusoid_solve(&g, -eps, eps)
}

/// `{f_lo <= eps} ∩ {f_hi >= -eps}` where `f_lo`/`f_hi` are the residual
/// sinusoids at the lower/upper ends of `hb`. Contains the exact set of every
/// axis whose `h1`, `h2` lie within `hb`.
pub fn feasible_theta_relaxed(s: &Correspondence, hb: &HBounds, eps: f64) -> IntervalSet {
    let lower = SinusoidBand::from_coefficients(s.a, hb.h1_lo, hb.h2_lo);
    let upper = SinusoidBand::from_coefficients(s.a, hb.h1_hi, hb.h2_hi);
    let below = sinusoid_solve(&lower, f64::NEG_INFINITY, eps);
    if below.is_empty() {
        return below;
    }
    let above = sinusoid_solve(&upper, -eps, f64::INFINITY);
    below.intersect(&above).widened(RELAXED_MARGIN, 0.0, PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{residual, AxisAngle};
    use crate::hbounds::{h_bounds, SphericalCube};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn random_unit(rng: &mut impl Rng) -> UnitVec3 {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..TAU);
        let r = (1.0 - z * z).sqrt();
        UnitVec3::new(r * phi.cos(), r * phi.sin(), z).unwrap()
    }

    /// Sampled membership merged into intervals.
    fn sampled(pred: impl Fn(f64) -> bool, n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = None;
        let mut last = 0.0;
        for i in 0..n {
            let t = PI * i as f64 / (n - 1) as f64;
            match (pred(t), start) {
                (true, None) => start = Some(t),
                (false, Some(s)) => {
                    out.push((s, last));
                    start = None;
                }
                _ => {}
            }
            last = t;
        }
        if let Some(s) = start {
            out.push((s, PI));
        }
        out
    }

    #[test]
    fn sinusoid_examples() {
        let g = SinusoidBand::new(0.0, 1.0, 0.0);
        let s = sinusoid_solve(&g, -0.1, 0.1);
        assert_eq!(s.len(), 2);
        let iv = s.intervals();
        assert_eq!(iv[0].lo, 0.0);
        assert!((iv[0].hi - 0.1f64.asin()).abs() < 1e-12);
        assert!((iv[0].hi - 0.100167).abs() < 1e-6);
        assert!((iv[1].lo - 3.041425).abs() < 1e-6);
        assert_eq!(iv[1].hi, PI);
        // cross-check against dense sampling
        let dense = sampled(|t| g.eval(t).abs() <= 0.1, 1_000_000);
        assert_eq!(dense.len(), 2);
        assert!((dense[0].1 - iv[0].hi).abs() < 1e-5 && (dense[1].0 - iv[1].lo).abs() < 1e-5);

        assert!(sinusoid_solve(&SinusoidBand::new(0.5, 0.0, 0.0), -0.1, 0.1).is_empty());
        let full = sinusoid_solve(&SinusoidBand::new(1.0, 1.0, FRAC_PI_2), 0.0, 2.0);
        assert_eq!(full.intervals(), &[Interval::new(0.0, PI)]);
    }

    #[test]
    fn sinusoid_matches_sampling_for_random_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let g = SinusoidBand::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..1.5),
                rng.gen_range(-10.0..10.0),
            );
            let lo = rng.gen_range(-1.5..1.0);
            let hi = lo + rng.gen_range(0.0..1.0);
            let set = sinusoid_solve(&g, lo, hi);
            for t in set.intervals().iter().flat_map(|i| [i.lo, i.hi]) {
                let v = g.eval(t);
                // each endpoint is tight or on the domain boundary
                assert!(
                    t == 0.0 || t == PI || (v - lo).abs() < 1e-9 || (v - hi).abs() < 1e-9,
                    "{g:?} {lo} {hi} {t} {v}"
                );
            }
            for i in 0..2_000 {
                let t = PI * i as f64 / 1999.0;
                let v = g.eval(t);
                let inside = lo <= v && v <= hi;
                let clear = (v - lo).abs() > 1e-9 && (v - hi).abs() > 1e-9;
                if clear {
                    assert_eq!(set.contains(t), inside, "{g:?} [{lo},{hi}] t={t}");
                }
            }
        }
    }

    #[test]
    fn exact_set_examples() {
        let v = UnitVec3::new(1.0, 0.0, 0.0).unwrap();
        let n = UnitVec3::new(0.0, 1.0, 0.0).unwrap();
        let s = Correspondence::new(v, n);
        let set = feasible_theta_exact(&s, &s.c, 0.1);
        let iv = set.intervals();
        assert_eq!(iv.len(), 2);
        assert!((iv[0].hi - 0.100167).abs() < 1e-6 && (iv[1].lo - 3.041425).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let s = Correspondence::new(random_unit(&mut rng), random_unit(&mut rng));
            let u = random_unit(&mut rng);
            let set = feasible_theta_exact(&s, &u, 1.0 + s.a.abs());
            assert_eq!(set.intervals(), &[Interval::new(0.0, PI)]);
        }
    }

    #[test]
    fn exact_set_matches_residual_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let s = Correspondence::new(random_unit(&mut rng), random_unit(&mut rng));
            let u = random_unit(&mut rng);
            let eps = 10f64.powf(rng.gen_range(-4.0..-0.3));
            let set = feasible_theta_exact(&s, &u, eps);
            for i in 0..2_000 {
                let t = PI * i as f64 / 1999.0;
                let r = residual(&AxisAngle { axis: u, theta: t }, &s);
                if (r.abs() - eps).abs() > 1e-12 {
                    assert_eq!(set.contains(t), r.abs() <= eps);
                }
            }
        }
    }

    #[test]
    fn relaxed_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let s = Correspondence::new(random_unit(&mut rng), random_unit(&mut rng));
        let u = random_unit(&mut rng);
        let point = feasible_theta_relaxed(&s, &HBounds::at_point(&u, &s), 0.05);
        let exact = feasible_theta_exact(&s, &u, 0.05);
        assert_eq!(point.len(), exact.len());
        for (p, e) in point.intervals().iter().zip(exact.intervals()) {
            assert!((p.lo - e.lo).abs() < 1e-9 && (p.hi - e.hi).abs() < 1e-9);
        }

        let perp = Correspondence::new(
            UnitVec3::new(1.0, 0.0, 0.0).unwrap(),
            UnitVec3::new(0.0, 1.0, 0.0).unwrap(),
        );
        let wide = HBounds {
            h1_lo: -1.0,
            h1_hi: 1.0,
            h2_lo: -1.0,
            h2_hi: 1.0,
        };
        let set = feasible_theta_relaxed(&perp, &wide, 0.01);
        assert_eq!(set.intervals(), &[Interval::new(0.0, PI)]);
    }

    #[test]
    fn relaxed_contains_exact_over_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..200 {
            let s = Correspondence::new(random_unit(&mut rng), random_unit(&mut rng));
            let alo = rng.gen_range(0.0..3.0);
            let aw = rng.gen_range(0.0..(PI - alo));
            let plo = rng.gen_range(0.0..TAU);
            let pw = rng.gen_range(0.0..1.0);
            let cube = SphericalCube::new(alo, alo + aw * 0.3, plo, plo + pw);
            let eps = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let relaxed = feasible_theta_relaxed(&s, &h_bounds(&cube, &s), eps);
            for _ in 0..20 {
                let u = cube.lerp(rng.gen(), rng.gen()).to_unit();
                for iv in feasible_theta_exact(&s, &u, eps).intervals() {
                    let covered = relaxed
                        .intervals()
                        .iter()
                        .any(|r| r.lo <= iv.lo + 1e-9 && iv.hi <= r.hi + 1e-9);
                    assert!(covered, "{iv:?} not in {relaxed:?}");
                }
            }
        }
    }

    #[test]
    fn widening_bounds_never_shrinks_relaxed_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..300 {
            let s = Correspondence::new(random_unit(&mut rng), random_unit(&mut rng));
            let mut pick = || {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let b: f64 = rng.gen_range(-1.0..1.0);
                (a.min(b), a.max(b))
            };
            let (l1, u1) = pick();
            let (l2, u2) = pick();
            let narrow = HBounds {
                h1_lo: l1,
                h1_hi: u1,
                h2_lo: l2,
                h2_hi: u2,
            };
            let wide = HBounds {
                h1_lo: l1 - 0.1,
                h1_hi: u1 + 0.05,
                h2_lo: l2 - 0.02,
                h2_hi: u2 + 0.1,
            };
            let a = feasible_theta_relaxed(&s, &narrow, 0.01);
            let b = feasible_theta_relaxed(&s, &wide, 0.01);
            for i in 0..500 {
                let t = PI * i as f64 / 499.0;
                if a.contains(t) {
                    assert!(b.contains(t));
                }
            }
        }
    }
}
