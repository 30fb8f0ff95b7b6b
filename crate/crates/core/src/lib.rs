//! Distribution-free detection of an elevated submatrix of unknown size.
//!
//! The building blocks:
//!
//! - [`model`]: standardised noise families, their exponential tilts and
//!   planted-block instances;
//! - [`stats`]: the sum and scan statistics, with an exhaustive scan and an
//!   alternating-maximisation heuristic;
//! - [`perm`]: row-wise and global permutations and the permutation p-values
//!   they calibrate;
//! - [`net`]: k-binary approximation nets over candidate sizes;
//! - [`detect`]: Bonferroni-combined tests over all sizes or over a net;
//! - [`theory`]: critical signal levels and concentration diagnostics;
//! - [`experiment`] and [`plot`]: the simulation harness, its CSV schema and
//!   an SVG renderer;
//! - [`cli`]: the `subscan` command line.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod model;
pub mod net;
pub mod perm;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod theory;

pub use detect::{
    bonferroni_full, bonferroni_net, single_size_test, upper_bound_single_pair, Correction,
    SweepOptions, TestOutcome,
};
pub use error::{Error, Result};
pub use model::{generate_instance, NoiseFamily, PlantedInstance, TiltedDistribution};
pub use net::{build_net, default_k, k_binary_approx, ApproxNet, NeighborMode};
pub use perm::{exact_pvalue_enum, mc_pvalue, permute, MCConfig, PValue, PermutationKind};
pub use stats::{
    scan_exact, scan_las, submatrix_sum, sum_stat, DataMatrix, ScanEngine, ScanResult,
    SubmatrixSupport,
};
pub use theory::{theta_crit, RegimeReport};
