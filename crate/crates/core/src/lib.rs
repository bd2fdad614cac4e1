//! Projection pursuit over orthonormal bases.
//!
//! This crate searches for low-dimensional projections of a dataset
//! that maximize an index of "interestingness". A projection is a
//! p x d column-orthonormal basis; the search walks the manifold of
//! such bases with derivative-free optimisers, records every step in a
//! trace, and ships diagnostics that summarize, embed, and render
//! those traces.
//!
//! Module map:
//!
//! * [`linalg`]: small dense matrices, Jacobi SVD and eigen-solver.
//! * [`rng`]: seeded random stream and normal deviates.
//! * [`manifold`]: bases, geodesic interpolation, orientation repair.
//! * [`indexes`]: projection indexes (holes, ECDF deviation).
//! * [`simdata`]: the simulated benchmark datasets.
//! * [`optimizers`]: random search, annealing, pseudo-derivative
//!   search, and the posterior polish stage.
//! * [`trace`]: the trace record format plus (de)serialization.
//! * [`diagnostics`]: per-iteration summaries, interpolation audits,
//!   PCA embedding of visited bases, grand tour of basis space.
//! * [`render`]: static and animated SVG output for the diagnostics.

pub mod diagnostics;
pub mod error;
pub mod indexes;
pub mod linalg;
pub mod manifold;
pub mod optimizers;
pub mod render;
pub mod rng;
pub mod simdata;
pub mod trace;

pub use error::{Error, Result};
pub use manifold::Basis;
