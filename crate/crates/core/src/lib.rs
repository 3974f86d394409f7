//! Simulation of two interacting weighted term streams: a person-aligned
//! stream (PAS) modeling a flow of thoughts, and one or more object-aligned
//! streams (OAS) modeling the perceived properties of objects.
//!
//! Terms come from an n-gram inventory of a local text corpus; closeness,
//! relatedness and contradiction are answered by a PPMI co-occurrence index.
//! Runs are fully determined by their configuration and seed and are
//! recorded as JSON Lines traces.

pub mod aenet;
pub mod annotator;
pub mod biwheel;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod semantics;
pub mod stream;
pub mod term;
pub mod trace;

pub use crate::config::BiWheelConfig;
pub use crate::error::{Error, Result};
pub use crate::semantics::SemanticIndex;
pub use crate::stream::{Role, Stream, StreamKind, TermEvent};
pub use crate::term::Term;
pub use crate::trace::Trace;
