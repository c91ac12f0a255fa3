//! Exactly solvable one-dimensional Stark tunneling model.
//!
//! A particle starts in a bound state of a square well (or a contact
//! interaction) and a static field is switched on suddenly. The evolution is
//! written as a finite sum over outgoing resonance poles plus an integral
//! along a line below the real energy axis.

pub mod analysis;
pub mod evolve;
pub mod mpnum;
pub mod oracle;
pub mod model;
pub mod poles;
pub mod quad;
pub mod spectral;
