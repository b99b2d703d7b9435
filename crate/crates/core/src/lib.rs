//! Tree tensor network simulation of quantum circuits, with matrix product
//! state and dense statevector baselines.

pub mod bounds;
pub mod circuit;
pub mod dryrun;
pub mod error;
pub mod linalg;
pub mod mps;
pub mod reference;
pub mod tensor;
pub mod tree;
pub mod truncation;
pub mod ttn;

pub use error::{Result, SimError};
pub use truncation::TruncationPolicy;
