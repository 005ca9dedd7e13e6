//! Norms of (modified) mixed Tsirelson spaces on finitely supported vectors,
//! with Schreier-family combinatorics and checkers for averaging constructions.

pub mod averages;
pub mod enclosure;
pub mod estimates;
pub mod error;
pub mod norm;
pub mod rational;
pub mod report;
pub mod schreier;
pub mod spreading;
pub mod suites;
pub mod space;
pub mod tree;
pub mod vector;

pub use enclosure::Enclosure;
pub use error::{Error, Result};
pub use rational::Q;
pub use space::{FamilyKind, SpaceSpec, ThetaGen};
pub use tree::NormingTree;
pub use vector::BlockVector;
