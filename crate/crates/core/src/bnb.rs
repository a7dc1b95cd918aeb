//! Best-first branch-and-bound over axis cubes with the rotation angle
//! resolved by interval stabbing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{residual, AxisAngle, Correspondence};
use crate::hbounds::{h_bounds, SphericalCube};
use crate::stabbing::{stab_sets, IntervalSet};
use crate::theta::{feasible_theta_exact, feasible_theta_relaxed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no correspondences given")]
    EmptyData,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchOrder {
    /// Bisect the longer side.
    SplitLongest,
    /// Bisect both sides.
    Quadrisect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Inlier threshold on `|residual|`.
    pub epsilon: f64,
    /// Cubes at or below this edge length are not branched by the main search.
    pub min_edge: f64,
    /// Budget on node expansions, leaf refinement included.
    pub max_nodes: usize,
    pub branch_order: BranchOrder,
    /// Threads used for per-correspondence bound evaluation. Results do not
    /// depend on this value.
    pub workers: usize,
    /// Expansion budget of the local search run inside each minimum-size
    /// cube whose upper bound still beats the incumbent. 0 disables it.
    pub leaf_budget: usize,
    /// Edge length at which the local leaf search stops splitting.
    pub leaf_floor: f64,
    /// Keep a per-node log in the result.
    pub record_nodes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            min_edge: 1e-3,
            max_nodes: 1_000_000,
            branch_order: BranchOrder::SplitLongest,
            workers: 1,
            leaf_budget: 4_096,
            leaf_floor: 1e-10,
            record_nodes: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.to_string()));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if !(self.min_edge.is_finite() && self.min_edge > 0.0) {
            return bad("min_edge must be > 0");
        }
        if self.leaf_budget > 0 && !(self.leaf_floor > 0.0 && self.leaf_floor <= self.min_edge) {
            return bad("leaf_floor must be in (0, min_edge]");
        }
        if self.max_nodes == 0 {
            return bad("max_nodes must be > 0");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        Ok(())
    }
}

/// Queue entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnBNode {
    pub cube: SphericalCube,
    pub upper: usize,
    pub depth: u32,
    seq: u64,
}

impl Eq for BnBNode {}

impl Ord for BnBNode {
    // max upper bound first, then the larger cube, then insertion order
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .cmp(&other.upper)
            .then_with(|| self.cube.edge().total_cmp(&other.cube.edge()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for BnBNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// No open cube can beat the incumbent.
    Certified,
    /// Only cubes at the resolution limit remain above the incumbent.
    MinEdge,
    /// The node budget ran out.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes_expanded: usize,
    pub lb_evals: usize,
    pub ub_evals: usize,
    pub leaf_refinements: usize,
    pub wall_time: Duration,
    pub termination: Termination,
}

/// One evaluated cube, for the optional node log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: u64,
    pub depth: u32,
    pub cube: SphericalCube,
    pub lower: usize,
    pub upper: usize,
    pub t_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub rotation: AxisAngle,
    pub consensus: usize,
    pub upper_bound_global: usize,
    pub gap: usize,
    pub inlier_indices: Vec<usize>,
    pub stats: SolveStats,
    pub nodes: Vec<NodeRecord>,
}

/// Exact 1-D consensus at the cube center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub count: usize,
    pub rotation: AxisAngle,
}

fn collect_sets<F>(data: &[Correspondence], parallel: bool, f: F) -> Vec<IntervalSet>
where
    F: Fn(&Correspondence) -> IntervalSet + Sync + Send,
{
    if parallel {
        data.par_iter().map(f).collect()
    } else {
        data.iter().map(f).collect()
    }
}

fn lower_bound_impl(
    cube: &SphericalCube,
    data: &[Correspondence],
    eps: f64,
    parallel: bool,
) -> LowerBound {
    let axis = cube.center().to_unit();
    let sets = collect_sets(data, parallel, |s| feasible_theta_exact(s, &axis, eps));
    let stab = stab_sets(&sets);
    LowerBound {
        count: stab.count,
        rotation: AxisAngle::new(axis, stab.witness.unwrap_or(0.0)),
    }
}

fn upper_bound_impl(
    cube: &SphericalCube,
    data: &[Correspondence],
    eps: f64,
    parallel: bool,
) -> usize {
    let sets = collect_sets(data, parallel, |s| {
        feasible_theta_relaxed(s, &h_bounds(cube, s), eps)
    });
    stab_sets(&sets).count
}

/// Consensus of the best angle for the axis at the cube center. Valid as a
/// global lower bound for any cube.
pub fn lower_bound(cube: &SphericalCube, data: &[Correspondence], eps: f64) -> LowerBound {
    lower_bound_impl(cube, data, eps, false)
}

/// Stabbing count of the relaxed angle sets; at least the exact 1-D
/// consensus of every axis inside the cube.
pub fn upper_bound(cube: &SphericalCube, data: &[Correspondence], eps: f64) -> usize {
    upper_bound_impl(cube, data, eps, false)
}

/// Children of `cube`. Split-longest bisects the longer side (ties go to
/// azimuth); quadrisect bisects both.
pub fn branch(cube: &SphericalCube, order: BranchOrder) -> Vec<SphericalCube> {
    let am = 0.5 * (cube.alpha_lo + cube.alpha_hi);
    let pm = 0.5 * (cube.phi_lo + cube.phi_hi);
    let (c, a_lo, a_hi, p_lo, p_hi) =
        (cube, cube.alpha_lo, cube.alpha_hi, cube.phi_lo, cube.phi_hi);
    match order {
        BranchOrder::SplitLongest => {
            if c.alpha_width() > c.phi_width() {
                vec![
                    SphericalCube::new(a_lo, am, p_lo, p_hi),
                    SphericalCube::new(am, a_hi, p_lo, p_hi),
                ]
            } else {
                vec![
                    SphericalCube::new(a_lo, a_hi, p_lo, pm),
                    SphericalCube::new(a_lo, a_hi, pm, p_hi),
                ]
            }
        }
        BranchOrder::Quadrisect => vec![
            SphericalCube::new(a_lo, am, p_lo, pm),
            SphericalCube::new(a_lo, am, pm, p_hi),
            SphericalCube::new(am, a_hi, p_lo, pm),
            SphericalCube::new(am, a_hi, pm, p_hi),
        ],
    }
}

/// Indices of correspondences with `|residual| <= eps` at `r`.
pub fn inliers(r: &AxisAngle, data: &[Correspondence], eps: f64) -> Vec<usize> {
    data.iter()
        .enumerate()
        .filter(|(_, s)| residual(r, s).abs() <= eps)
        .map(|(i, _)| i)
        .collect()
}

struct Search<'a> {
    data: &'a [Correspondence],
    cfg: &'a SolverConfig,
    parallel: bool,
    start: Instant,
    seq: u64,
    incumbent: usize,
    best_rotation: AxisAngle,
    stats: SolveStats,
    nodes: Vec<NodeRecord>,
    unresolved: Vec<usize>,
}

impl<'a> Search<'a> {
    fn budget_left(&self) -> bool {
        self.stats.nodes_expanded < self.cfg.max_nodes
    }

    /// Evaluates both bounds of a child cube and updates the incumbent.
    fn evaluate(&mut self, cube: SphericalCube, depth: u32, parent_upper: usize) -> BnBNode {
        let eps = self.cfg.epsilon;
        let lb = lower_bound_impl(&cube, self.data, eps, self.parallel);
        self.stats.lb_evals += 1;
        if lb.count > self.incumbent {
            // recount directly so the incumbent never relies on interval rounding
            let verified = inliers(&lb.rotation, self.data, eps).len();
            if verified > self.incumbent {
                log::debug!(
                    "incumbent {} -> {} at depth {}",
                    self.incumbent,
                    verified,
                    depth
                );
                self.incumbent = verified;
                self.best_rotation = lb.rotation;
            }
        }
        let upper = upper_bound_impl(&cube, self.data, eps, self.parallel).min(parent_upper);
        self.stats.ub_evals += 1;
        self.seq += 1;
        if self.cfg.record_nodes {
            self.nodes.push(NodeRecord {
                node: self.seq,
                depth,
                cube,
                lower: lb.count,
                upper,
                t_ms: self.start.elapsed().as_secs_f64() * 1e3,
            });
        }
        BnBNode {
            cube,
            upper,
            depth,
            seq: self.seq,
        }
    }

    fn expand(&mut self, node: &BnBNode, queue: &mut BinaryHeap<BnBNode>) {
        self.stats.nodes_expanded += 1;
        for child in branch(&node.cube, self.cfg.branch_order) {
            let c = self.evaluate(child, node.depth + 1, node.upper);
            if c.upper > self.incumbent {
                queue.push(c);
            }
        }
    }

    /// Local best-first search inside a minimum-size cube. Returns the best
    /// upper bound left unresolved, if any.
    fn refine_leaf(&mut self, leaf: BnBNode) -> Option<usize> {
        self.stats.leaf_refinements += 1;
        let mut local = BinaryHeap::new();
        local.push(leaf);
        let mut spent = 0;
        let mut stuck: Option<usize> = None;
        while let Some(node) = local.pop() {
            if node.upper <= self.incumbent {
                break;
            }
            if node.cube.edge() <= self.cfg.leaf_floor {
                stuck = stuck.max(Some(node.upper));
                continue;
            }
            if spent >= self.cfg.leaf_budget || !self.budget_left() {
                stuck = stuck.max(Some(node.upper));
                break;
            }
            spent += 1;
            self.expand(&node, &mut local);
        }
        let stuck = stuck.filter(|&u| u > self.incumbent);
        if let Some(top) = local.peek() {
            if top.upper > self.incumbent && stuck.is_none_or(|s| top.upper > s) {
                return Some(top.upper);
            }
        }
        stuck
    }

    fn run(mut self) -> SolveResult {
        let root = SphericalCube::new(0.0, PI, 0.0, 2.0 * PI);
        let root_node = self.evaluate(root, 0, self.data.len());
        let mut queue = BinaryHeap::new();
        if root_node.upper > self.incumbent {
            queue.push(root_node);
        }

        let mut termination = Termination::Certified;
        while let Some(node) = queue.pop() {
            if node.upper <= self.incumbent {
                break;
            }
            if !self.budget_left() {
                queue.push(node);
                termination = Termination::NodeLimit;
                break;
            }
            if node.cube.edge() <= self.cfg.min_edge {
                let left = if self.cfg.leaf_budget > 0 {
                    self.refine_leaf(node)
                } else {
                    Some(node.upper)
                };
                if let Some(u) = left {
                    self.unresolved.push(u);
                }
                continue;
            }
            self.expand(&node, &mut queue);
        }

        let open_max = queue.peek().map_or(0, |n| n.upper);
        let unresolved_max = self.unresolved.iter().copied().max().unwrap_or(0);
        let upper_global = self.incumbent.max(open_max).max(unresolved_max);
        if termination == Termination::Certified && upper_global > self.incumbent {
            termination = if self.budget_left() {
                Termination::MinEdge
            } else {
                Termination::NodeLimit
            };
        }
        let inlier_indices = inliers(&self.best_rotation, self.data, self.cfg.epsilon);
        let consensus = inlier_indices.len();
        let upper_global = upper_global.max(consensus);
        self.stats.wall_time = self.start.elapsed();
        self.stats.termination = termination;
        log::info!(
            "consensus {} upper {} nodes {} ({:?})",
            consensus,
            upper_global,
            self.stats.nodes_expanded,
            termination
        );
        SolveResult {
            rotation: self.best_rotation,
            consensus,
            upper_bound_global: upper_global,
            gap: upper_global - consensus,
            inlier_indices,
            stats: self.stats,
            nodes: self.nodes,
        }
    }
}

/// Maximizes the number of correspondences with `|residual| <= epsilon` over
/// all rotations.
pub fn solve(data: &[Correspondence], cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    if data.is_empty() {
        return Err(SolveError::EmptyData);
    }
    cfg.validate()?;
    let search = Search {
        data,
        cfg,
        parallel: cfg.workers > 1,
        start: Instant::now(),
        seq: 0,
        incumbent: 0,
        best_rotation: AxisAngle::identity(),
        stats: SolveStats {
            nodes_expanded: 0,
            lb_evals: 0,
            ub_evals: 0,
            leaf_refinements: 0,
            wall_time: Duration::ZERO,
            termination: Termination::Certified,
        },
        nodes: Vec::new(),
        unresolved: Vec::new(),
    };
    if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| SolveError::InvalidConfig(e.to_string()))?;
        Ok(pool.install(|| search.run()))
    } else {
        Ok(search.run())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVec3;
    use crate::hbounds::cube_contains;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn unit(x: f64, y: f64, z: f64) -> UnitVec3 {
        UnitVec3::new(x, y, z).unwrap()
    }

    #[test]
    fn branch_examples() {
        let kids = branch(&SphericalCube::full(), BranchOrder::Quadrisect);
        assert_eq!(kids.len(), 4);
        for k in &kids {
            assert!((k.alpha_width() - PI / 2.0).abs() < 1e-15);
            assert!((k.phi_width() - PI).abs() < 1e-15);
        }
        let kids = branch(
            &SphericalCube::new(0.0, 0.2, 0.0, 1.0),
            BranchOrder::SplitLongest,
        );
        assert_eq!(
            kids,
            vec![
                SphericalCube::new(0.0, 0.2, 0.0, 0.5),
                SphericalCube::new(0.0, 0.2, 0.5, 1.0)
            ]
        );
    }

    #[test]
    fn children_partition_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for order in [BranchOrder::SplitLongest, BranchOrder::Quadrisect] {
            let parent = SphericalCube::new(0.3, 1.9, 5.0, 7.5);
            let kids = branch(&parent, order);
            for _ in 0..1_000 {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi: f64 = rng.gen_range(0.0..TAU);
                let r = (1.0 - z * z).sqrt();
                let u = unit(r * phi.cos(), r * phi.sin(), z);
                let in_parent = cube_contains(&parent, &u);
                let in_kids = kids.iter().any(|k| cube_contains(k, &u));
                assert_eq!(in_parent, in_kids);
            }
        }
    }

    #[test]
    fn single_correspondence_lower_bound_at_c() {
        let s = Correspondence::new(unit(1.0, 0.0, 0.0), unit(0.0, 1.0, 0.0));
        let p = s.c.to_polar();
        let cube = SphericalCube::new(p.alpha, p.alpha, p.phi, p.phi);
        let lb = lower_bound(&cube, &[s], 1e-6);
        assert_eq!(lb.count, 1);
    }

    #[test]
    fn point_cube_upper_equals_lower() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let data: Vec<_> = (0..30)
            .map(|_| {
                let mut r = || {
                    unit(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                };
                Correspondence::new(r(), r())
            })
            .collect();
        for _ in 0..50 {
            let a = rng.gen_range(0.1..3.0);
            let p = rng.gen_range(0.0..TAU);
            let cube = SphericalCube::new(a, a + 1e-10, p, p + 1e-10);
            let ub = upper_bound(&cube, &data, 0.05);
            let lb = lower_bound(&cube, &data, 0.05);
            assert!(ub >= lb.count);
            assert!(ub <= lb.count + 1, "{ub} vs {}", lb.count);
        }
    }

    #[test]
    fn solve_rejects_bad_input() {
        assert_eq!(
            solve(&[], &SolverConfig::default()).unwrap_err(),
            SolveError::EmptyData
        );
        let s = Correspondence::new(unit(1.0, 0.0, 0.0), unit(0.0, 1.0, 0.0));
        let cfg = SolverConfig {
            epsilon: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(&[s], &cfg),
            Err(SolveError::InvalidConfig(_))
        ));
    }

    #[test]
    fn solve_single_correspondence() {
        let s = Correspondence::new(unit(0.2, 0.5, 1.0), unit(0.9, -0.1, 0.3));
        let res = solve(
            &[s],
            &SolverConfig {
                epsilon: 1e-6,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(res.consensus, 1);
        assert_eq!(res.gap, 0);
        assert_eq!(res.stats.termination, Termination::Certified);
    }
}
