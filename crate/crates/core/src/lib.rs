//! Spectral analysis of polynomial graph filters for node classification.
//!
//! The crate answers, numerically and on real data, the question of when a
//! polynomial spectral filter is doomed on a given labeled graph:
//!
//! * [`graph`] — labeled graphs with forced self-loops, symmetric
//!   normalization, and a dense symmetric eigendecomposition of the
//!   normalized Laplacian.
//! * [`indicators`] — interaction probabilities, k-homophily degrees,
//!   frequency distributions of signals, response efficiency, and the moment
//!   identities tying the spatial and spectral views together.
//! * [`filters`] — the polynomial filter algebra: evaluation, family
//!   membership (range-in-[0,1] families and their first/second-order
//!   subfamilies), application through the eigenbasis, and transformed
//!   homophily in closed form.
//! * [`bounds`] — exact softmax prediction error plus the three lower
//!   bounds (clamp-based spatial-domain bound, spectral
//!   information-content bound, homophily bound) and their shared
//!   constants.
//! * [`validator`] — a randomized harness that re-checks every inequality
//!   and existence claim over seeded graph ensembles and reports verdicts.
//! * [`demuf`] — desk-scale disentangled multi-filter learners (parallel
//!   and tree variants) with learnable masks, learnable second-order
//!   filters, and a self-contained reverse-mode tape.
//! * [`synth`] — stochastic block model generation with controllable
//!   homophily regime and Gaussian class-mean features.
//! * [`report`] — JSON report assembly with content-hash provenance.

pub mod bounds;
pub mod demuf;
mod error;
pub mod filters;
pub mod graph;
pub mod indicators;
pub mod io;
pub mod linalg;
pub mod report;
pub mod synth;
pub mod validator;

pub use error::{Error, Result};

/// Tool version recorded in report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
