//! Randomized comparison of the closed-form `h1`/`h2` bounds against the grid
//! oracle.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Correspondence, UnitVec3};
use crate::hbounds::{h_bounds, HBounds, SphericalCube};
use crate::oracle::{oracle_h_extrema, HExtrema};
use crate::scene::{perturb_normal, random_unit};

/// Allowed amount by which a bound may be inside the sampled range.
pub const SOUNDNESS_TOL: f64 = 1e-9;

/// A random correspondence and a random cube: mixed scales, wrapped azimuth
/// ranges, pole caps, the full sphere and nearly parallel line pairs.
pub fn random_trial(rng: &mut impl Rng) -> (Correspondence, SphericalCube) {
    let v = random_unit(rng);
    let n = match rng.gen_range(0..20) {
        0 => perturb_normal(&v, 1e-6, rng),
        1 => -perturb_normal(&v, 1e-6, rng),
        _ => random_unit(rng),
    };
    let cube = if rng.gen_bool(0.05) {
        SphericalCube::full()
    } else {
        let aw = PI * 10f64.powf(-rng.gen_range(0.0..3.0));
        let mut alo = rng.gen_range(0.0..=(PI - aw));
        match rng.gen_range(0..10) {
            0 => alo = 0.0,
            1 => alo = PI - aw,
            _ => {}
        }
        let pw = TAU * 10f64.powf(-rng.gen_range(0.0..3.0));
        let plo = rng.gen_range(0.0..TAU);
        SphericalCube::new(alo, (alo + aw).min(PI), plo, plo + pw)
    };
    (Correspondence::new(v, n), cube)
}

/// One side of one function, e.g. the upper bound of `h2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    /// Largest amount by which the oracle escaped the bound.
    pub max_violation: f64,
    /// Largest amount by which the bound exceeded the oracle.
    pub max_slack: f64,
    /// Trials whose slack is within twice the grid step.
    pub tight_trials: usize,
    pub worst: Option<Offender>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub trial: usize,
    pub cube: SphericalCube,
    pub v: UnitVec3,
    pub n: UnitVec3,
    pub bound: f64,
    pub oracle: f64,
    /// Signed `oracle - bound` for upper bounds, `bound - oracle` for lower.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub trials: usize,
    pub grid: usize,
    pub seed: u64,
    pub h1_lo: CaseReport,
    pub h1_hi: CaseReport,
    pub h2_lo: CaseReport,
    pub h2_hi: CaseReport,
    pub max_violation: f64,
    /// Fraction of trials in which all four bounds are within twice the grid
    /// step of the oracle.
    pub tight_fraction: f64,
    pub passed: bool,
}

impl CaseReport {
    /// `excess > 0` is a soundness violation, `excess < 0` is slack.
    fn record(&mut self, case: Offender, step: f64) -> bool {
        let slack = (-case.excess).max(0.0);
        let tight = slack <= 2.0 * step;
        if tight {
            self.tight_trials += 1;
        }
        self.max_slack = self.max_slack.max(slack);
        self.max_violation = self.max_violation.max(case.excess.max(0.0));
        if self.worst.as_ref().is_none_or(|w| case.excess > w.excess) {
            self.worst = Some(case);
        }
        tight
    }
}

/// Runs `trials` random comparisons at oracle resolution `grid x grid`.
pub fn verify_bounds(trials: usize, grid: usize, seed: u64) -> BoundsReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h1_lo = CaseReport::default();
    let mut h1_hi = CaseReport::default();
    let mut h2_lo = CaseReport::default();
    let mut h2_hi = CaseReport::default();
    let mut all_tight = 0;
    for trial in 0..trials {
        let (s, cube) = random_trial(&mut rng);
        let hb: HBounds = h_bounds(&cube, &s);
        let o: HExtrema = oracle_h_extrema(&cube, &s, grid);
        let step = cube.edge() / (grid - 1) as f64;
        let case = |bound: f64, oracle: f64, upper: bool| Offender {
            trial,
            cube,
            v: s.v,
            n: s.n,
            bound,
            oracle,
            excess: if upper {
                oracle - bound
            } else {
                bound - oracle
            },
        };
        let t = [
            h1_lo.record(case(hb.h1_lo, o.h1_lo, false), step),
            h1_hi.record(case(hb.h1_hi, o.h1_hi, true), step),
            h2_lo.record(case(hb.h2_lo, o.h2_lo, false), step),
            h2_hi.record(case(hb.h2_hi, o.h2_hi, true), step),
        ];
        if t.iter().all(|&b| b) {
            all_tight += 1;
        }
    }
    let max_violation = [&h1_lo, &h1_hi, &h2_lo, &h2_hi]
        .iter()
        .map(|c| c.max_violation)
        .fold(0.0, f64::max);
    BoundsReport {
        trials,
        grid,
        seed,
        h1_lo,
        h1_hi,
        h2_lo,
        h2_hi,
        max_violation,
        tight_fraction: if trials == 0 {
            1.0
        } else {
            all_tight as f64 / trials as f64
        },
        passed: max_violation <= SOUNDNESS_TOL,
    }
}
