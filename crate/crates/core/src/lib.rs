//! Link-level simulation of OTFS over rapidly time-varying multipath
//! channels.
//!
//! The crate builds the delay-Doppler equivalent channel of an OTFS frame,
//! equalizes it with a frequency-domain single-tap stage followed by a
//! delay-Doppler interference-cancellation stage, and measures bit error
//! rates against OFDM baselines in a seeded Monte-Carlo harness.

pub mod channel;
pub mod equalizers;
pub mod error;
pub mod frame;
pub mod harness;
pub mod linalg;
pub mod seed;
pub mod transforms;

pub use error::{OtfsError, Result};
pub use frame::{BitStream, DelayDopplerGrid, FrameConfig, TimeFrequencyGrid, TimeSignal};
