//! Numerical laboratory for diffeomorphisms of tori with a dominated
//! splitting: Lyapunov spectra, domination constants, weak* basins of
//! empirical measures, itinerary entropy, and Hadamard graph transforms.
//!
//! The catalog maps live in [`dynamics`]; [`cocycle`] estimates the
//! splitting `E ⊕ F` and `ψ = −log |det df|_F|`; [`measures`] holds the
//! metric `dist*` and basin sweeps; [`entropy`] the plug-in estimator and
//! the Pesin gap; [`graphs`] the graph transform. [`cli`] runs the same
//! experiments from flat config files and [`properties`] bundles the
//! invariant checks.
//!
//! Every capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example lyapunov_spectrum
//! ```
//!
//! - `lyapunov_spectrum`, `domination_fit`, `splitting_estimation`
//! - `weak_star_distance`, `basin_sweep`, `srb_like_score`
//! - `entropy_rate`, `pesin_gap`, `rate_bound`, `psi_oscillation`
//! - `graph_transform`, `rebase_graph`, `jacobian_ratio`
//! - `property_suite`, `run_scenario`

pub mod cli;
pub mod cocycle;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod graphs;
pub mod measures;
pub mod numeric;
pub mod properties;
pub mod rng;

pub use error::{DomlabError, Result};
