//! Analysis toolkit for asynchronous OFDM networks whose active
//! transmitters form a Poisson point process.
//!
//! The crate is layered bottom-up:
//!
//! * [`ofdm_link`]: sample-exact modulation, misaligned receive windows and
//!   per-subcarrier received powers for integer timing offsets.
//! * [`abstraction`]: the first-order SINR model built on the useful-energy
//!   weight `g(d)` and the timing-error distributions.
//! * [`analytics`]: quadrature evaluation of the closed-form network
//!   statistics (mean decodable count, nearest-transmitter decoding
//!   probability, the truncated-Poisson dominating law, throughput).
//! * [`montecarlo`]: seeded, worker-count independent simulation of PPP
//!   snapshots used as the ground-truth oracle.
//! * [`cli`]: configuration loading and CSV emitters behind the binary.

pub mod abstraction;
pub mod analytics;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod ofdm_link;
pub mod units;

pub use error::{Error, Result};
