//! Hierarchical Bayesian uncertainty quantification and propagation for
//! linear structural dynamics.
//!
//! A long vibration record is split into statistically independent segments.
//! Each segment yields a maximum a posteriori estimate of the structural
//! parameters and its initial conditions under a marginalized Gaussian
//! prediction-error model, summarized by a Laplace (Gaussian) approximation
//! with the initial conditions marginalized out analytically. The per-segment
//! Gaussian summaries are then fused into the MAP estimate of a population
//! (hyper) distribution over the structural parameters, and that distribution
//! is propagated through the model to Student-t predictive moments and
//! credible bands for future response histories.
//!
//! Modules:
//!
//! * [`model`] — structural models, exact discrete-time simulation, response
//!   sensitivities;
//! * [`data`] — record I/O, the synthetic-experiment generator, segmentation;
//! * [`segment`] — per-segment MAP inference and Laplace summaries;
//! * [`hyper`] — hyper-parameter MAP estimation over segments;
//! * [`predict`] — predictive moments, densities, and credible bands;
//! * [`pipeline`] — configuration, orchestration, and report artifacts
//!   backing the `hbuq` command-line tool.

pub mod data;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod seeding;
pub mod segment;
