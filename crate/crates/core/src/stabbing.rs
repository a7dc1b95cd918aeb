//! One-dimensional interval stabbing over closed intervals.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is inverted");
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Finite union of closed intervals. Sets produced by this crate are always
/// normalized: sorted by `lo` and pairwise disjoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        Self {
            intervals: vec![Interval::new(lo, hi)],
        }
    }

    /// Builds a normalized set from arbitrary intervals.
    pub fn from_intervals(intervals: Vec<Interval>) -> Self {
        normalize(Self { intervals })
    }

    /// Stores the intervals verbatim, without merging.
    pub fn from_raw(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Intersection of two normalized sets.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if lo <= hi {
                out.push(Interval::new(lo, hi));
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Widens every interval by `margin` on both sides, clipped to `[lo, hi]`.
    pub fn widened(&self, margin: f64, lo: f64, hi: f64) -> IntervalSet {
        IntervalSet::from_intervals(
            self.intervals
                .iter()
                .map(|i| Interval::new((i.lo - margin).max(lo), (i.hi + margin).min(hi)))
                .collect(),
        )
    }
}

/// Sorts and merges overlapping or touching intervals.
pub fn normalize(s: IntervalSet) -> IntervalSet {
    let mut items = s.intervals;
    items.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut out: Vec<Interval> = Vec::with_capacity(items.len());
    for it in items {
        match out.last_mut() {
            Some(last) if it.lo <= last.hi => last.hi = last.hi.max(it.hi),
            _ => out.push(it),
        }
    }
    IntervalSet { intervals: out }
}

/// Outcome of [`stab_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabResult {
    pub count: usize,
    /// Midpoint of `support`; `None` iff `count == 0`.
    pub witness: Option<f64>,
    /// The maximal region stabbed `count` times that contains `witness`.
    pub support: Option<Interval>,
}

/// Finds a point contained in the maximum number of `items`.
///
/// Endpoint sweep with `+1` at `lo` and `-1` at `hi`; at equal coordinates
/// openings come before closings so touching closed intervals both count.
/// Ties between maximal regions go to the leftmost one.
pub fn stab_max(items: &[Interval]) -> StabResult {
    let mut events: Vec<(f64, bool)> = Vec::with_capacity(items.len() * 2);
    for it in items {
        events.push((it.lo, false));
        events.push((it.hi, true));
    }
    stab_events(&mut events)
}

/// Same as [`stab_max`] over every interval of every set.
pub fn stab_sets<'a, I>(sets: I) -> StabResult
where
    I: IntoIterator<Item = &'a IntervalSet>,
{
    let mut events = Vec::new();
    for s in sets {
        for it in &s.intervals {
            events.push((it.lo, false));
            events.push((it.hi, true));
        }
    }
    stab_events(&mut events)
}

/// `events` holds `(coordinate, is_closing)`.
fn stab_events(events: &mut [(f64, bool)]) -> StabResult {
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut count = 0usize;
    let mut best = 0usize;
    let mut support = None;
    for (idx, &(x, closing)) in events.iter().enumerate() {
        if closing {
            count -= 1;
            continue;
        }
        count += 1;
        if count > best {
            best = count;
            // the next event must be a closing one or the count would rise again
            let end = events.get(idx + 1).map_or(x, |e| e.0);
            support = Some(Interval::new(x, end));
        }
    }
    StabResult {
        count: best,
        witness: support.map(|s| s.midpoint()),
        support,
    }
}
