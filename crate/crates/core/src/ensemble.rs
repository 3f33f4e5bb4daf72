//! Classical phase-space model of a thermal cloud in the ring.
//!
//! Particles carry an unwrapped angle (continuous from the moment they are
//! sampled) and an angular velocity. Wrapped angles are derived on demand.

use crate::constants::{wrap_angle, wrap_pi, PhysicalConstants};
use crate::potential::AzimuthalPotential;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Circular variance 1 − |⟨e^{iφ}⟩| above which a cloud counts as wrapped
/// around the ring (a Gaussian with σ ≈ 1.18 rad).
pub const WRAP_CIRCULAR_VARIANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub angles: Vec<f64>,
    pub angular_velocities: Vec<f64>,
    pub ring_radius: f64,
}

/// Harmonic trap used for thermal sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTrap {
    /// rad/s
    pub frequency: f64,
    /// rad
    pub center: f64,
}

impl ParticleEnsemble {
    pub fn new(angles: Vec<f64>, angular_velocities: Vec<f64>, ring_radius: f64) -> Self {
        assert_eq!(angles.len(), angular_velocities.len());
        Self { angles, angular_velocities, ring_radius }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Angles folded into [0, 2π).
    pub fn wrapped_angles(&self) -> Vec<f64> {
        self.angles.iter().map(|&a| wrap_angle(a)).collect()
    }

    /// Mean kinetic energy per particle in the frame rotating at `frame_rate`.
    pub fn kinetic_energy(&self, mass: f64, frame_rate: f64) -> f64 {
        let r2 = self.ring_radius * self.ring_radius;
        0.5 * mass * r2 * self.angular_velocities.iter().map(|v| (v - frame_rate).powi(2)).sum::<f64>()
            / self.len() as f64
    }

    /// Standard deviation of the tangential velocity, m/s.
    pub fn velocity_spread(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.angular_velocities.iter().sum::<f64>() / n;
        let var = self.angular_velocities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        self.ring_radius * var.sqrt()
    }

    pub fn reversed(&self) -> Self {
        Self {
            angular_velocities: self.angular_velocities.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// Draws `n` particles from the Boltzmann distribution of a harmonic trap:
/// σ_φ = sqrt(k_B T/(m ω² R²)) and σ_φ̇ = sqrt(k_B T/(m R²)).
pub fn sample_thermal(
    temperature: f64,
    trap: &HarmonicTrap,
    n: usize,
    seed: u64,
    ring_radius: f64,
    constants: &PhysicalConstants,
) -> ParticleEnsemble {
    let sigma_v = (constants.boltzmann * temperature.max(0.0) / constants.atom_mass).sqrt() / ring_radius;
    let sigma_phi = sigma_v / trap.frequency;
    if sigma_v == 0.0 {
        return ParticleEnsemble::new(vec![trap.center; n], vec![0.0; n], ring_radius);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = Normal::new(trap.center, sigma_phi).expect("finite width");
    let vel = Normal::new(0.0, sigma_v).expect("finite width");
    let mut angles = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    for _ in 0..n {
        angles.push(pos.sample(&mut rng));
        velocities.push(vel.sample(&mut rng));
    }
    ParticleEnsemble::new(angles, velocities, ring_radius)
}

/// Velocity-Verlet propagation over `duration` from time `t0`, with the step
/// shortened so an integer number of steps fits. A flat potential is
/// integrated exactly in one drift.
pub fn step(
    ens: &mut ParticleEnsemble,
    potential: &dyn AzimuthalPotential,
    t0: f64,
    duration: f64,
    dt: f64,
    mass: f64,
) {
    assert!(dt > 0.0, "time step must be positive");
    if duration <= 0.0 {
        return;
    }
    if potential.is_flat() {
        for (a, v) in ens.angles.iter_mut().zip(&ens.angular_velocities) {
            *a += v * duration;
        }
        return;
    }
    let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let inertia = mass * ens.ring_radius * ens.ring_radius;
    for (a, v) in ens.angles.iter_mut().zip(ens.angular_velocities.iter_mut()) {
        let (mut phi, mut w) = (*a, *v);
        let mut acc = -potential.slope(phi, t0) / inertia;
        for k in 0..steps {
            w += 0.5 * h * acc;
            phi += h * w;
            acc = -potential.slope(phi, t0 + (k + 1) as f64 * h) / inertia;
            w += 0.5 * h * acc;
        }
        *a = phi;
        *v = w;
    }
}

/// Exact phase-space rotation of a harmonic kick of frequency `omega` lasting
/// `duration`, about the centre `center`.
pub fn thin_kick(ens: &mut ParticleEnsemble, omega: f64, duration: f64, center: f64) {
    assert!(omega >= 0.0, "lens frequency must be non-negative");
    let theta = omega * duration;
    let (s, c) = theta.sin_cos();
    for (a, v) in ens.angles.iter_mut().zip(ens.angular_velocities.iter_mut()) {
        let offset = wrap_pi(*a - center);
        let (new_offset, new_v) = if omega == 0.0 {
            (offset + *v * duration, *v)
        } else {
            (offset * c + *v / omega * s, -omega * offset * s + *v * c)
        };
        *a += new_offset - offset;
        *v = new_v;
    }
}

/// Size statistics of a cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudSize {
    /// 1/e radius √2·σ, m.
    pub r_1e: f64,
    /// Arc-length standard deviation, m.
    pub sigma: f64,
    /// Circular mean angle in [0, 2π).
    pub com: f64,
    /// Mean angular velocity, rad/s.
    pub com_rate: f64,
    pub wrapped: bool,
}

/// Arc-length size of the cloud from unwrapped angles, centre of mass from the
/// circular mean of the wrapped ones.
pub fn cloud_size(ens: &ParticleEnsemble) -> CloudSize {
    let n = ens.len() as f64;
    let (mut c, mut s) = (0.0, 0.0);
    for &a in &ens.angles {
        c += a.cos();
        s += a.sin();
    }
    let resultant = (c * c + s * s).sqrt() / n;
    let com = wrap_angle(s.atan2(c));
    let shift = ens.angles.first().copied().unwrap_or(0.0);
    let mean = ens.angles.iter().map(|a| a - shift).sum::<f64>() / n;
    let var = ens.angles.iter().map(|a| (a - shift - mean).powi(2)).sum::<f64>() / n;
    let sigma = ens.ring_radius * var.sqrt();
    CloudSize {
        r_1e: std::f64::consts::SQRT_2 * sigma,
        sigma,
        com,
        com_rate: ens.angular_velocities.iter().sum::<f64>() / n,
        wrapped: 1.0 - resultant > WRAP_CIRCULAR_VARIANCE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Flat, Harmonic};
    use std::f64::consts::{PI, TAU};

    const R: f64 = 485e-6;

    #[test]
    fn zero_temperature_is_a_point() {
        let c = PhysicalConstants::default();
        let e = sample_thermal(0.0, &HarmonicTrap { frequency: 40.0, center: 1.2 }, 1000, 1, R, &c);
        assert!(e.angles.iter().all(|&a| a == 1.2));
        assert!(e.angular_velocities.iter().all(|&v| v == 0.0));
        assert_eq!(cloud_size(&e).r_1e, 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = PhysicalConstants::default();
        let trap = HarmonicTrap { frequency: 40.0, center: 0.0 };
        let a = sample_thermal(1e-7, &trap, 2000, 42, R, &c);
        let b = sample_thermal(1e-7, &trap, 2000, 42, R, &c);
        assert_eq!(a, b);
        assert_ne!(a, sample_thermal(1e-7, &trap, 2000, 43, R, &c));
    }

    #[test]
    fn free_motion_is_exact() {
        let mut e = ParticleEnsemble::new(vec![0.1, 6.0], vec![3.0, -50.0], R);
        step(&mut e, &Flat, 0.0, 0.37, 1e-5, 1.0);
        assert_eq!(e.angles, vec![0.1 + 3.0 * 0.37, 6.0 - 50.0 * 0.37]);
    }

    #[test]
    fn quarter_turn_kick_collimates_point_source() {
        let mut e = ParticleEnsemble::new(vec![2.0; 3], vec![-1.0, 0.5, 2.0], R);
        let omega = 40.0;
        thin_kick(&mut e, omega, PI / 2.0 / omega, 2.0);
        for (a, v0) in e.angles.iter().zip([-1.0, 0.5, 2.0]) {
            assert!((a - 2.0 - v0 / omega).abs() < 1e-12);
        }
        assert!(e.angular_velocities.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_length_kick_is_identity() {
        let mut e = ParticleEnsemble::new(vec![0.3, 4.0], vec![1.0, -2.0], R);
        let before = e.clone();
        thin_kick(&mut e, 37.6, 0.0, 0.3);
        assert_eq!(e, before);
    }

    #[test]
    fn uniform_ring_is_wrapped() {
        let n = 10_000;
        let e = ParticleEnsemble::new((0..n).map(|i| TAU * i as f64 / n as f64).collect(), vec![0.0; n], R);
        assert!(cloud_size(&e).wrapped);
    }

    #[test]
    fn reversibility_in_static_trap() {
        let c = PhysicalConstants::default();
        let pot = Harmonic::new(c.atom_mass, 40.0, R, 0.0);
        let e0 = sample_thermal(1e-7, &HarmonicTrap { frequency: 40.0, center: 0.0 }, 1000, 3, R, &c);
        let mut e = e0.clone();
        step(&mut e, &pot, 0.0, 0.2, 1e-5, c.atom_mass);
        let mut back = e.reversed();
        step(&mut back, &pot, 0.0, 0.2, 1e-5, c.atom_mass);
        for (a, b) in back.angles.iter().zip(&e0.angles) {
            assert!((a - b).abs() < 1e-8);
        }
        for (a, b) in back.angular_velocities.iter().zip(&e0.angular_velocities) {
            assert!((a + b).abs() < 1e-8);
        }
    }
}
