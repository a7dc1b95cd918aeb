//! Globally optimal robust rotation estimation from 2D/3D line
//! correspondences.
//!
//! The rotation is parameterized by an axis in polar coordinates and an angle
//! `theta` in `[0, pi]`. A best-first branch-and-bound splits the axis sphere
//! into polar rectangles; `theta` is never branched on. For each rectangle the
//! residual coefficients `h1`, `h2` are bounded in closed form, turned into
//! feasible `theta` intervals per correspondence, and the intervals are
//! stabbed to obtain consensus bounds.

pub mod bnb;
pub mod geometry;
pub mod hbounds;
pub mod oracle;
pub mod scene;
pub mod stabbing;
pub mod theta;
pub mod verify;

pub use bnb::{solve, BranchOrder, SolveError, SolveResult, SolverConfig};
pub use geometry::{AxisAngle, Correspondence, PolarCoord, UnitVec3};
pub use hbounds::{HBounds, SphericalCube};
pub use scene::{generate_scene, GroundTruth, Scene, SceneConfig};
pub use stabbing::{Interval, IntervalSet, StabResult};
