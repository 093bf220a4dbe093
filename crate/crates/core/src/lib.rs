//! Stable matching simulation toolkit.

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod market;
pub mod oracle;
pub mod prefgen;

pub use error::{Error, Result};
pub use market::{is_blocking_pair, is_stable, Instance, Matching, PersonId, PreferenceList, Side};
