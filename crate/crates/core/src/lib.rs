//! Dictionary learning through overlapping clustering of a sample connection
//! graph.
//!
//! The pipeline draws samples `Y = A X (+ noise)` from an incoherent
//! dictionary, links samples whose inner products are large, recovers the
//! overlapping clusters `C_i = {j : i in supp X_j}`, estimates each column from
//! its cluster (by sign-consistent averaging or by the top eigenvector of the
//! cluster covariance) and finally refines the estimate by iterative
//! averaging.

pub mod cluster;
pub mod conngraph;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod model;
pub mod recover;
pub mod refine;
pub mod registry;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    gen_random_dictionary, generate_samples, incoherence, max_pairwise_support_overlap,
    sample_code, DictOptions, Dictionary, GenConfig, SampleSet, SparseCode, SupportDist, ValueDist,
};
