pub mod calibration;
pub mod error;
pub mod mc;
pub mod process;
pub mod quad;
pub mod report;
pub mod risk;
pub mod rng;
pub mod stable;
pub mod stats;

pub use calibration::{LimitLaw, SamplingScales};
pub use error::{Error, Result};
pub use mc::{MCConfig, MCEstimate};
pub use process::{GridPath, LfsmSpec, ProcessSpec, Sided};
pub use stable::{StableConstants, StableParams};
