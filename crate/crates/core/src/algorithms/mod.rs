//! Deferred acceptance, stable-husband enumeration and block decomposition.

pub mod blocks;
pub mod da;
pub mod husbands;

pub use blocks::{augment_virtual_women, Block, BlockReport, BlockStructure};
pub use da::{mpda, mpda_with_schedule, wpda, Answer, Proposal, ProposalTrace, Schedule, WomenRanks};
pub use husbands::{enumerate_stable_husbands, enumerate_stable_husbands_popularity, HusbandEnumeration, StableHusbands};
