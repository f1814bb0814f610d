//! Diffusion-based reconstruction of ingredient pairing graphs.
//!
//! The pipeline this crate implements, end to end:
//!
//! 1. [`graph`] — build a heterogeneous food–compound graph from a recipe
//!    corpus (ingredient–ingredient edges scored by NPMI, rescaled into
//!    `[0,1]`) plus flavor/drug compound association tables.
//! 2. [`sampler`] — sample fixed-size subgraphs balanced between hub and
//!    non-hub ingredients; each subgraph carries a symmetric edge-score
//!    matrix that acts as the clean diffusion state.
//! 3. [`diffusion`] — linear noise schedules, the closed-form forward
//!    corruption, true-posterior parameters, the noise-prediction training
//!    objective, and deterministic DDIM reconstruction.
//! 4. [`model`] — an anisotropic GNN noise predictor with hand-derived
//!    exact parameter gradients, plus an optional chemical-structure
//!    prediction head ([`csp`]) supervised by 881-bit fingerprints.
//! 5. [`train`] — seeded minibatch training with adaptive moments and
//!    byte-exact checkpointing.
//! 6. [`eval`] — k-means/NMI clustering of learned embeddings and the
//!    cross-size generalization MSE matrix.
//!
//! [`corpus`] and [`synth`] parse and generate the text inputs; [`persist`]
//! owns all on-disk artifact formats.

pub mod corpus;
pub mod csp;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod graph;
pub mod mat;
pub mod model;
pub mod persist;
pub mod sampler;
pub mod seed;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use mat::SymMat;
