//! Component-level usability evaluation for exploratory model-building
//! systems.
//!
//! The pipeline is file-mediated:
//!
//! 1. [`taxonomy`] resolves a builder's configuration against the reference
//!    functionality table into a [`taxonomy::ComponentModel`].
//! 2. [`telemetry`] ingests line-delimited interaction logs into sessions and
//!    [`survey`] ingests per-component Likert ratings and SUS responses.
//! 3. [`metrics`] derives effort, transition matrices, linearity and
//!    descriptive statistics.
//! 4. [`cards`] exports every number into a canonical document and renders
//!    static evaluation cards from it.
//!
//! [`synth`] produces seeded synthetic inputs for all of the above.

pub mod cards;
pub mod exec;
pub mod json;
pub mod metrics;
pub mod survey;
pub mod synth;
pub mod taxonomy;
pub mod telemetry;

pub use exec::Execution;
pub use taxonomy::{ComponentModel, L1};
