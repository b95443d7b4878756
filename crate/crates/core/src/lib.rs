//! Core library: operator algebras, MR derivation, the SUT zoo, mutation,
//! the MR harness, a relational toy engine, and statistics.

pub mod algebra;
pub mod construct;
pub mod mutation;
pub mod reachability;
pub mod spec;
pub mod sut;
pub mod fixtures;
pub mod harness;
pub mod zoo;
pub mod relational;
pub mod stats;
pub mod equivariant;
pub mod experiment;
pub mod report;
pub mod checks;
