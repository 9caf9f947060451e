//! Unequal-error-protection exponents for strictly positive discrete memoryless
//! channels, with the matching code constructions, exact type-class analysis and
//! seeded Monte-Carlo simulation.
//!
//! All logarithms are natural; every rate and exponent is in nats.

pub mod blockcodes;
pub mod channel;
pub mod exact;
pub mod exponents;
pub mod feedback;
pub mod ml;
pub mod probability;
pub mod rng;
pub mod simulation;

pub use channel::{load_channel, save_channel, ChannelError, ChannelFileError, Dmc};
pub use probability::{ConditionalDistribution, Distribution, ProbabilityError};
