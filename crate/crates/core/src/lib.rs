//! Universal sequential estimators for stationary ergodic processes over a
//! finite alphabet.
//!
//! * [`process`]: generative models, exact samplers and conditional oracles.
//! * [`pattern`]: recurrence search and windowed occurrence counting.
//! * [`backward`]: estimating `P(X_0 = 1 | past)` from a growing past.
//! * [`forward`]: estimating the next-symbol law at the current time.
//! * [`stoptime`]: prediction along self-selected stopping times.
//! * [`memory`]: memory-word tests, memory-length and order estimation.
//! * [`experiment`]: seeded replicate runs, CSV traces and summaries.

pub mod backward;
pub mod experiment;
pub mod forward;
pub mod memory;
pub mod pattern;
pub mod process;
pub mod schedule;
pub mod stoptime;

pub use process::{Alphabet, ModelConfig, ModelError, ProcessModel, SamplePath, Symbol};
