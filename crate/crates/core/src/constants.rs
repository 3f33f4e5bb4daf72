//! Physical constants and unit helpers. Everything inside the crate is SI;
//! energies are additionally reported as E/k_B in nanokelvin.

use serde::{Deserialize, Serialize};

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Species and environment constants. Defaults describe ⁸⁷Rb in standard gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// kg
    pub atom_mass: f64,
    /// m/s²
    pub gravity: f64,
    /// J·s
    pub hbar: f64,
    /// J/K
    pub boltzmann: f64,
    /// s-wave scattering length, m
    pub scattering_length: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            atom_mass: 1.4432e-25,
            gravity: 9.81,
            hbar: 1.054_571_817e-34,
            boltzmann: 1.380_649e-23,
            scattering_length: 5.2e-9,
        }
    }
}

impl PhysicalConstants {
    /// Energy in joules expressed as E/k_B in nanokelvin.
    pub fn to_nanokelvin(&self, energy: f64) -> f64 {
        energy / self.boltzmann * 1e9
    }

    pub fn from_nanokelvin(&self, nanokelvin: f64) -> f64 {
        nanokelvin * 1e-9 * self.boltzmann
    }

    /// Effective temperature m·v²/k_B of an rms velocity.
    pub fn rms_temperature(&self, v_rms: f64) -> f64 {
        self.atom_mass * v_rms * v_rms / self.boltzmann
    }

    /// Inverse of [`rms_temperature`](Self::rms_temperature).
    pub fn rms_velocity(&self, temperature: f64) -> f64 {
        (temperature * self.boltzmann / self.atom_mass).sqrt()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = phi.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_pi(phi: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let w = wrap_angle(phi + pi) - pi;
    if w <= -pi {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn wrapping_ranges() {
        assert_eq!(wrap_angle(TAU), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((wrap_pi(PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(3.0 * TAU + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rms_temperature_of_thermal_velocity() {
        let c = PhysicalConstants::default();
        // 4.24 mm/s is the rms velocity of a 188 nK cloud of 87Rb
        let t = c.rms_temperature(4.24e-3);
        assert!((t * 1e9 - 188.0).abs() < 0.5, "{}", t * 1e9);
        assert!((c.rms_velocity(t) - 4.24e-3).abs() < 1e-15);
    }
}
