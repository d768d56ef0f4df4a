//! Heat semigroups, couplings and Kato-class Schrödinger semigroups on model
//! spaces, with Monte Carlo and quadrature checks of gradient bounds.

pub mod bounds;
pub mod coupling;
pub mod duhamel;
pub mod error;
pub mod fk;
pub mod functions;
pub mod kato;
pub mod numerics;
pub mod path;
pub mod potential;
pub mod report;
pub mod rng;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
pub use rng::Substreams;
pub use space::{Point, SpaceKind, StateSpace};
