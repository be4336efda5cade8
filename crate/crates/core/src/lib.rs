//! Spatial-econometrics workbench for neighborhood effects on social groups.
//!
//! The pipeline runs in stages, each a module:
//!
//! 1. [`geodata`] ingests GeoJSON geometry plus census and subgroup CSVs and
//!    joins them into a [`geodata::SpatialFrame`].
//! 2. [`groups`] turns subgroup counts into a per-unit behavior rate for one
//!    demographic group.
//! 3. [`weights`] builds the spatial weight matrix `W`.
//! 4. [`models`] fits OLS, the spatial Durbin model and its geographically
//!    weighted local variant.
//! 5. [`diagnostics`] screens variables and ranks groups by residual Moran's I.
//! 6. [`regionalize`] clusters local coefficients into contiguous regions.
//! 7. [`spillover`] bins local lag effects into 16 compass sectors.
//!
//! [`synthgen`] generates lattices and datasets with planted parameters, plus
//! brute-force oracles used by the test suite. [`service`] wires the stages
//! into sessions served over HTTP and a batch CLI.

pub mod diagnostics;
pub mod error;
pub mod geodata;
pub mod groups;
pub mod linalg;
pub mod models;
pub mod optimize;
pub mod regionalize;
pub mod service;
pub mod spillover;
pub mod synthgen;
pub mod weights;

pub use error::{Error, Result};
