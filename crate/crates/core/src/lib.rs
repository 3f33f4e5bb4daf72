//! Matter-wave optics in ring-shaped time-averaged adiabatic potentials.
//!
//! The crate models atoms guided around a magnetic ring trap: the trapping
//! field itself ([`taap`]), the reduced one-dimensional description along the
//! ring, condensate dynamics ([`gpe`]), classical thermal clouds
//! ([`ensemble`]), experimental sequences ([`sequence`]) and the fits used to
//! turn expansion traces into kinetic energies ([`analysis`]).

pub mod analysis;
pub mod cli;
pub mod config;
pub mod constants;
pub mod ensemble;
pub mod gpe;
pub mod io;
pub mod minimize;
pub mod potential;
pub mod sequence;
pub mod taap;

pub use config::{MatterKind, RunConfig};
pub use constants::PhysicalConstants;
