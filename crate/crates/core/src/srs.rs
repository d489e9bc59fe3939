//! Wideband sounding: Latin-square hopping plans, robust separation of the
//! resulting observations, and angular-subspace estimation per edge.

pub mod latin;
pub mod plan;
pub mod rpca;
pub mod subspace;
