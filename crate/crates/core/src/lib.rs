//! Numerics for weighted local Hardy spaces on a uniform grid: local
//! Muckenhoupt constants, local maximal operators, truncated Riesz
//! transforms, atoms, strongly singular operators and a reproducible
//! experiment runner.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atoms;
pub mod error;
pub mod grid;
pub mod harness;
pub mod maximal;
pub mod quadrature;
pub mod riesz;
pub mod singular;
pub mod tables;
pub mod weights;

pub use error::{Error, Result};
pub use harness::{run_config, ExperimentConfig, ExperimentId, ExperimentReport};
pub use grid::{make_grid, Cube, Grid, GridFunction, NodeBox};
pub use maximal::{h1_norm, local_hl_maximal, smooth_maximal, BumpSpec, ScaleLadder, SmoothMaximal};
pub use riesz::{riesz_transform, CutoffSpec, RieszTransform};
pub use weights::{ap_loc_constant, lp_norm, make_weight, weak_l1_norm, Weight, WeightFamily};
