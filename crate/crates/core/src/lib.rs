//! Dunnett-type many-to-one comparisons with robust variance backends.

pub mod contrast;
pub mod dist;
pub mod error;
pub mod mlt;
pub mod mmm;
pub mod mvt;
pub mod nparm;
pub mod robust;
pub mod sample;
pub mod sim;
pub mod variance;

pub use contrast::{dunnett_contrasts, max_t_test, ContrastMatrix, MaxTResult, VarianceMethod};
pub use error::{Error, Result};
pub use mvt::{CorrelationMatrix, Tail};
pub use sample::{Group, GroupedSample};
