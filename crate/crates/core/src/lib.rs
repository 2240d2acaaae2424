//! Pair potentials, Stark maps and Zeeman maps for Rydberg atoms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod pair;
pub mod radial;
pub mod solver;
pub mod special;
pub mod species;
pub mod units;

pub use angular::HalfInteger;
pub use error::{Error, Result};
pub use fields::FieldConfig;
pub use pair::{BasisSpec, StateTwo};
pub use species::StateOne;
