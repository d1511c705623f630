//! Edit synchronization for erasure-coded distributed storage.
//!
//! Users hold data blocks over a prime field; storage nodes hold an MDS
//! encoding of those blocks after each block has been multiplied by a per-user
//! intermediary matrix. When a user edits its block, the protocols in
//! [`schemes`] update the nodes with a few symbols instead of re-sending the
//! edited span, while keeping every k-subset of nodes able to reconstruct the
//! data and every node repairable.
//!
//! Layout, bottom up:
//! - [`gf`]: prime-field arithmetic.
//! - [`matlib`]: structured matrices (identity, permutation, Vandermonde,
//!   Cauchy, block diagonal).
//! - [`dss`]: the base code contract and systematic MDS instances.
//! - [`intermediary`]: encoding through per-user matrices.
//! - [`schemes`]: the update protocols and their message ledger.
//! - [`vtsync`]: syndromes for recovering an unknown single deletion.
//! - [`analysis`]: closed-form expected costs and bounds.
//! - [`simnet`]: seeded simulation and Monte Carlo driver.
//! - [`demo`]: small reference transcripts.

pub mod analysis;
pub mod demo;
pub mod dss;
pub mod error;
pub mod gf;
pub mod intermediary;
pub mod matlib;
pub mod schemes;
pub mod simnet;
pub mod vtsync;

pub use dss::{CodeSpec, LinearDssCode, StorageTensor};
pub use error::{Error, Result};
pub use gf::{FieldElement, FieldSpec};
pub use intermediary::IntermediaryConfig;
pub use matlib::{MatrixKind, PermutationCompact, StructuredMatrix};

/// Edit model with double-precision parameters.
pub type EditModel = analysis::EditModel<f64>;
/// Cost estimate with double-precision components.
pub type CostEstimate = analysis::CostEstimate<f64>;
/// Limit of the span fraction with double-precision value.
pub type EtaLimit = analysis::EtaLimit<f64>;
