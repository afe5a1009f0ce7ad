//! Curve shortening flow of symmetric lens-shaped networks with two triple
//! junctions, the self-similarly shrinking lens and fish networks, and the
//! numeric checks around them.

pub mod blowup;
pub mod classify;
pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod quadrature;
pub mod roots;
pub mod shooting;

pub use error::{Error, Result};
pub use geometry::{GridProfile, NetworkSnapshot, Point};
