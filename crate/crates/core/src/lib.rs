//! Cross-embodiment demonstration retargeting.
//!
//! A demonstration recorded on one robot is replayed on another by matching
//! the two end effectors' functional representations (point/direction pairs on
//! their contact surfaces) frame by frame, then re-synthesizing observations
//! and actions for the target robot.

// Negated comparisons double as NaN rejection in argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod augment;
pub mod chamfer;
pub mod dataset;
pub mod error;
pub mod funcrep;
pub mod geom;
pub mod kinematics;
pub mod robot;
pub mod seed;
pub mod spatial;
pub mod synth;
pub mod synthetic;

pub use error::{Error, Result};
