//! Community detection for spatial single-cell data.
//!
//! Cells with coordinates and annotated types are turned into neighborhood
//! composition rows (fixed-radius disks or k nearest neighbors), optionally
//! mapped off the simplex with a centered log-ratio, and clustered. The main
//! detector, [`pipelines::dcd_tmhc`], splits rows by successive 2-means gated
//! by a SigClust test, then re-merges the resulting groups with weighted Ward
//! agglomeration and cuts the tree top-down with the same test.
//!
//! Supporting modules cover synthetic tissue generation with ground truth
//! ([`simgen`]) and evaluation: adjusted Rand index, community profiles and
//! logistic regression of per-sample community fractions ([`eval`]).

pub mod cluster;
pub mod datamodel;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod neighborhood;
pub mod pipelines;
pub mod seed;
pub mod sigclust;
pub mod simgen;
pub mod transform;

pub use error::{Error, Result};
