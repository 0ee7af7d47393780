//! Competitive-ratio and regret analysis of rateless codes over arbitrarily
//! varying channels.
//!
//! The library models a state-indexed family of discrete memoryless
//! channels, evaluates stopping times of piecewise-constant input policies
//! against adversarial state sequences in an exact fluid model, searches for
//! worst-case sequences and optimal policies, and Monte Carlo-validates a
//! random-coding scheme whose decoder has full state information.
//!
//! Modules:
//! - [`channel`]: distributions, channels, mutual information, capacity.
//! - [`policy`]: policies, state profiles, and their wire formats.
//! - [`stopping`]: fluid and integer stopping times, ratio, regret.
//! - [`adversary`]: worst-case sequence search and closed-form case bounds.
//! - [`competitive`]: policy optimization and the chain reproduction.
//! - [`sim`]: random codebooks and the typicality decoder.

pub mod adversary;
pub mod channel;
pub mod competitive;
pub mod error;
pub mod policy;
pub mod sim;
pub mod stopping;

pub use error::{Error, Result};
