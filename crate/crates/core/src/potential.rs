//! Azimuthal potentials V(φ, t) on the ring, shared by the mean-field and
//! the classical solvers.

use crate::constants::{wrap_angle, wrap_pi};
use std::f64::consts::TAU;

/// A potential energy (J) as a function of ring angle and time.
pub trait AzimuthalPotential: Send + Sync {
    fn value(&self, phi: f64, t: f64) -> f64;

    /// ∂V/∂φ in J/rad.
    fn slope(&self, phi: f64, t: f64) -> f64;

    /// True when the potential does not depend on time.
    fn is_static(&self) -> bool {
        false
    }

    /// True when V is constant in φ at all times (no azimuthal force).
    fn is_flat(&self) -> bool {
        false
    }
}

/// V ≡ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl AzimuthalPotential for Flat {
    fn value(&self, _phi: f64, _t: f64) -> f64 {
        0.0
    }
    fn slope(&self, _phi: f64, _t: f64) -> f64 {
        0.0
    }
    fn is_static(&self) -> bool {
        true
    }
    fn is_flat(&self) -> bool {
        true
    }
}

/// Angular trajectory with a constant acceleration phase followed by uniform
/// rotation: φ(t) = φ₀ + ω₀τ + ½ατ² for τ = t − t₀ ≤ T_acc, linear afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub start_time: f64,
    pub angle: f64,
    pub rate: f64,
    pub acceleration: f64,
    pub acceleration_duration: f64,
}

impl Trajectory {
    pub fn fixed(angle: f64) -> Self {
        Self::uniform(0.0, angle, 0.0)
    }

    pub fn uniform(start_time: f64, angle: f64, rate: f64) -> Self {
        Self { start_time, angle, rate, acceleration: 0.0, acceleration_duration: 0.0 }
    }

    pub fn angle_at(&self, t: f64) -> f64 {
        let tau = t - self.start_time;
        let ta = tau.clamp(0.0, self.acceleration_duration);
        let coast = tau - ta;
        self.angle + self.rate * tau + 0.5 * self.acceleration * ta * ta + self.acceleration * ta * coast
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let ta = (t - self.start_time).clamp(0.0, self.acceleration_duration);
        self.rate + self.acceleration * ta
    }

    pub fn acceleration_at(&self, t: f64) -> f64 {
        let tau = t - self.start_time;
        if tau >= 0.0 && tau < self.acceleration_duration {
            self.acceleration
        } else {
            0.0
        }
    }

    fn is_stationary(&self) -> bool {
        self.rate == 0.0 && (self.acceleration == 0.0 || self.acceleration_duration == 0.0)
    }
}

/// The gravito-magnetic lens of a tilted ring, −depth·cos(φ − φ_c(t)),
/// with depth = m g R sin δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineLens {
    pub depth: f64,
    pub center: Trajectory,
}

impl AzimuthalPotential for CosineLens {
    fn value(&self, phi: f64, t: f64) -> f64 {
        -self.depth * (phi - self.center.angle_at(t)).cos()
    }
    fn slope(&self, phi: f64, t: f64) -> f64 {
        self.depth * (phi - self.center.angle_at(t)).sin()
    }
    fn is_static(&self) -> bool {
        self.center.is_stationary()
    }
    fn is_flat(&self) -> bool {
        self.depth == 0.0
    }
}

/// Periodically wrapped parabola ½·k·wrap(φ − φ_c)², with k = m ω² R².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub stiffness: f64,
    pub center: f64,
}

impl Harmonic {
    pub fn new(mass: f64, frequency: f64, radius: f64, center: f64) -> Self {
        Self { stiffness: mass * frequency * frequency * radius * radius, center }
    }
}

impl AzimuthalPotential for Harmonic {
    fn value(&self, phi: f64, _t: f64) -> f64 {
        let d = wrap_pi(phi - self.center);
        0.5 * self.stiffness * d * d
    }
    fn slope(&self, phi: f64, _t: f64) -> f64 {
        self.stiffness * wrap_pi(phi - self.center)
    }
    fn is_static(&self) -> bool {
        true
    }
    fn is_flat(&self) -> bool {
        self.stiffness == 0.0
    }
}

/// Uniformly sampled periodic potential, interpolated with a periodic
/// Catmull-Rom cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    values: Vec<f64>,
    flat: bool,
}

impl Sampled {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(values.len() >= 4, "need at least four samples");
        let first = values[0];
        let flat = values.iter().all(|&v| v == first);
        Self { values, flat }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, phi: f64) -> (usize, f64) {
        let n = self.values.len();
        let x = wrap_angle(phi) / TAU * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        (i, x - i as f64)
    }

    fn neighbours(&self, i: usize) -> [f64; 4] {
        let n = self.values.len();
        [self.values[(i + n - 1) % n], self.values[i], self.values[(i + 1) % n], self.values[(i + 2) % n]]
    }
}

impl AzimuthalPotential for Sampled {
    fn value(&self, phi: f64, _t: f64) -> f64 {
        let (i, s) = self.locate(phi);
        let [p0, p1, p2, p3] = self.neighbours(i);
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        ((a * s + b) * s + c) * s + p1
    }
    fn slope(&self, phi: f64, _t: f64) -> f64 {
        let (i, s) = self.locate(phi);
        let [p0, p1, p2, p3] = self.neighbours(i);
        let a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
        let b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
        let c = -0.5 * p0 + 0.5 * p2;
        let per_cell = (3.0 * a * s + 2.0 * b) * s + c;
        per_cell * self.values.len() as f64 / TAU
    }
    fn is_static(&self) -> bool {
        true
    }
    fn is_flat(&self) -> bool {
        self.flat
    }
}

/// Sum of potentials.
#[derive(Default)]
pub struct Sum<'a> {
    terms: Vec<Box<dyn AzimuthalPotential + 'a>>,
}

impl<'a> Sum<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, term: impl AzimuthalPotential + 'a) -> Self {
        self.terms.push(Box::new(term));
        self
    }

    pub fn push(&mut self, term: Box<dyn AzimuthalPotential + 'a>) {
        self.terms.push(term);
    }
}

impl AzimuthalPotential for Sum<'_> {
    fn value(&self, phi: f64, t: f64) -> f64 {
        self.terms.iter().map(|p| p.value(phi, t)).sum()
    }
    fn slope(&self, phi: f64, t: f64) -> f64 {
        self.terms.iter().map(|p| p.slope(phi, t)).sum()
    }
    fn is_static(&self) -> bool {
        self.terms.iter().all(|p| p.is_static())
    }
    fn is_flat(&self) -> bool {
        self.terms.iter().all(|p| p.is_flat())
    }
}

impl<P: AzimuthalPotential + ?Sized> AzimuthalPotential for &P {
    fn value(&self, phi: f64, t: f64) -> f64 {
        (**self).value(phi, t)
    }
    fn slope(&self, phi: f64, t: f64) -> f64 {
        (**self).slope(phi, t)
    }
    fn is_static(&self) -> bool {
        (**self).is_static()
    }
    fn is_flat(&self) -> bool {
        (**self).is_flat()
    }
}

impl<P: AzimuthalPotential + ?Sized> AzimuthalPotential for Box<P> {
    fn value(&self, phi: f64, t: f64) -> f64 {
        (**self).value(phi, t)
    }
    fn slope(&self, phi: f64, t: f64) -> f64 {
        (**self).slope(phi, t)
    }
    fn is_static(&self) -> bool {
        (**self).is_static()
    }
    fn is_flat(&self) -> bool {
        (**self).is_flat()
    }
}
