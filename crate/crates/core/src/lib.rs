//! Quasi-Bayesian estimation of sparse precision matrices with the graphical
//! horseshoe prior under a column-wise Gaussian pseudo-likelihood.
//!
//! The crate covers the full workflow: synthetic ground truths and data
//! ([`simgen`]), plug-in diagonal estimation ([`diagonal`]), the Gibbs sampler
//! ([`gibbs`]), symmetrization of the posterior mean ([`symmetrize`]),
//! and evaluation/diagnostics ([`metrics`]).

pub mod diagonal;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod prior;
pub mod quadrature;
pub mod rng;
pub mod simgen;
pub mod simplex;
pub mod symmetrize;

pub use error::{Error, Result};
pub use gibbs::{run_chain, GibbsConfig, PosteriorSummary, SampleStack};
pub use matrix::{gram, log_pseudo_likelihood, log_pseudo_likelihood_column, DenseMatrix, GramMatrix, PrecisionDraw};
pub use prior::{HorseshoeState, PriorConditionSpec};
pub use rng::RngStream;
