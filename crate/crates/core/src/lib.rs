//! Reference-path following for redundant planar arms: a layered graph of
//! inverse-kinematics samples is crossed with the reference path, searched
//! for the minimum discrete Fréchet bottleneck, and densified anytime.

pub mod baselines;
pub mod bench;
pub mod densify;
pub mod error;
pub mod frechet;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod layered_graph;
pub mod product_search;
pub mod render;
pub mod rng;
pub mod scenario_gen;
pub mod world;

pub use error::{Error, Result};
