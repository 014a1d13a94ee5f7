//! Token-unmasking schedulers for masked generative transformers.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation:
//!
//! * [`lds`]: radical inverses and the 2D Halton sequence (bases 2 and 3).
//! * [`gridmap`]: discretizing Halton points onto a token grid into a full
//!   permutation of the cells.
//! * [`schedulers`]: step-size plans and the Halton, random and confidence
//!   schedulers.
//! * [`toymodel`]: a distance-decaying Potts field with exact inference, used
//!   as a stand-in for a perfectly calibrated marginal predictor.
//! * [`infotheory`]: entropy, KL divergence and per-step / aggregate mutual
//!   information of a schedule.
//! * [`metrics`]: spatial spread statistics and exact star discrepancy.
//! * [`simulate`]: the iterative unmasking loop.
//!
//! File formats and the command-line front end live in the `haltonmask` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod gridmap;
pub mod infotheory;
pub mod lds;
pub mod metrics;
pub mod rng;
pub mod schedulers;
pub mod simulate;
pub mod toymodel;

pub use error::{Error, Result};
pub use gridmap::{halton_token_order, Coord, GridSpec, TokenOrder};
pub use lds::{halton_2d, radical_inverse, HaltonPoint2D, HaltonSequence2D, RadixBase};
pub use schedulers::{ConfidenceConfig, PlanShape, Schedule, StepSizePlan};
pub use simulate::{run_sampling, MarginalPredictor, SamplingTrace, SchedulerKind};
pub use toymodel::{MaskState, ToyJointModel};
