//! Time-averaged adiabatic potential (TAAP) ring waveguide.
//!
//! Atoms in a quadrupole field B = b'(x, y, −2z) are dressed by a homogeneous
//! RF field and the resulting shell is swept up and down by a vertical audio
//! bias B_m·sin(θ)·ẑ. Averaging the dressed energy over one audio period gives
//! a ring-shaped minimum whose radius is fixed by the RF detuning and the
//! audio amplitude. Tilting gravity by δ towards azimuth φ_c turns the flat
//! ring into the gravito-magnetic lens −m g R sin δ cos(φ − φ_c).

use crate::constants::{PhysicalConstants, BOHR_MAGNETON};
use crate::minimize::{brent_minimize, brent_root, SearchError};
use crate::potential::Sampled;
use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::sync::Arc;
use thiserror::Error;

/// Audio-period quadrature nodes.
pub const AUDIO_NODES: usize = 256;

/// Lower and upper audio amplitude, in units of the resonant field ħω_rf/μ,
/// between which the time-averaged ring is well formed.
const AUDIO_RATIO_RANGE: (f64, f64) = (0.45, 1.2);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaapError {
    #[error("|B| = 0 at ({x:e}, {y:e}, {z:e}) m: the adiabatic potential is undefined there")]
    DegenerateField { x: f64, y: f64, z: f64 },
    #[error("no ring-shaped minimum found: {0}")]
    NoRing(String),
    #[error("ring calibration did not converge: {0}")]
    NoConvergence(String),
    #[error("invalid target radius {0} m")]
    InvalidTarget(f64),
    #[error(transparent)]
    Search(#[from] SearchError),
}

pub type Result<T> = std::result::Result<T, TaapError>;

/// Field and tilt parameters of the ring trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaapConfig {
    /// Radial quadrupole gradient b', T/m.
    pub quadrupole_gradient: f64,
    /// ω_rf, rad/s.
    pub rf_frequency: f64,
    /// Ω₀, rad/s.
    pub rabi_frequency: f64,
    /// B_m, T.
    pub audio_amplitude: f64,
    /// ω_m, rad/s.
    pub audio_frequency: f64,
    /// μ_eff = m̃_F g_F μ_B, J/T.
    pub dressed_moment: f64,
    /// Tilt δ, rad.
    pub tilt: f64,
    /// Azimuth φ_c of the lowest point of the tilted ring, rad.
    pub tilt_azimuth: f64,
    /// Ring radius the calibration aims for, m. `None` uses the fields as given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_radius: Option<f64>,
}

impl Default for TaapConfig {
    fn default() -> Self {
        let rf_frequency = TAU * 1.2e6;
        let dressed_moment = 0.5 * BOHR_MAGNETON;
        let hbar = PhysicalConstants::default().hbar;
        Self {
            quadrupole_gradient: 0.9,
            rf_frequency,
            rabi_frequency: TAU * 50e3,
            audio_amplitude: 0.6 * hbar * rf_frequency / dressed_moment,
            audio_frequency: TAU * 5e3,
            dressed_moment,
            tilt: 0.0,
            tilt_azimuth: 0.0,
            target_radius: Some(485e-6),
        }
    }
}

impl TaapConfig {
    /// Field magnitude at which the RF is resonant, ħω_rf/μ_eff.
    pub fn resonant_field(&self, constants: &PhysicalConstants) -> f64 {
        constants.hbar * self.rf_frequency / self.dressed_moment
    }

    /// Radius of the resonant shell in the z = 0 plane without audio bias.
    pub fn resonant_radius(&self, constants: &PhysicalConstants) -> f64 {
        self.resonant_field(constants) / self.quadrupole_gradient
    }

    pub fn untilted(&self) -> Self {
        Self { tilt: 0.0, ..*self }
    }

    /// Invariant violations as (field, message) pairs.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let positive = [
            ("taap.quadrupole_gradient", self.quadrupole_gradient),
            ("taap.rf_frequency", self.rf_frequency),
            ("taap.rabi_frequency", self.rabi_frequency),
            ("taap.audio_frequency", self.audio_frequency),
            ("taap.dressed_moment", self.dressed_moment),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name.to_string(), format!("must be > 0, got {v}")));
            }
        }
        if !(self.audio_amplitude >= 0.0 && self.audio_amplitude.is_finite()) {
            out.push(("taap.audio_amplitude".into(), format!("must be >= 0, got {}", self.audio_amplitude)));
        }
        if !(self.tilt.abs() < FRAC_PI_4) {
            out.push(("taap.tilt".into(), format!("|tilt| must be < π/4, got {}", self.tilt)));
        }
        if !self.tilt_azimuth.is_finite() {
            out.push(("taap.tilt_azimuth".into(), "must be finite".into()));
        }
        if let Some(r) = self.target_radius {
            if !(r > 0.0 && r.is_finite()) {
                out.push(("taap.target_radius".into(), format!("must be > 0, got {r}")));
            }
        }
        out
    }
}

/// Quadrupole field b'·(x, y, −2z), T.
pub fn quadrupole_field(point: &Vector3<f64>, gradient: f64) -> Vector3<f64> {
    Vector3::new(gradient * point.x, gradient * point.y, -2.0 * gradient * point.z)
}

/// Position dependence of the RF coupling.
pub trait RfCoupling: Send + Sync {
    /// Ω(r) in rad/s given the local static field.
    fn rabi_frequency(&self, taap: &TaapConfig, point: &Vector3<f64>, field: &Vector3<f64>) -> f64;
}

/// Ω(r) = Ω₀ everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformCoupling;

impl RfCoupling for UniformCoupling {
    fn rabi_frequency(&self, taap: &TaapConfig, _point: &Vector3<f64>, _field: &Vector3<f64>) -> f64 {
        taap.rabi_frequency
    }
}

/// Position of the ring minimum in the untilted trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingLocation {
    pub radius: f64,
    pub height: f64,
    pub value: f64,
}

/// Evaluates the dressed and time-averaged potentials for one configuration.
#[derive(Clone)]
pub struct TaapModel {
    pub config: TaapConfig,
    pub constants: PhysicalConstants,
    pub nodes: usize,
    coupling: Arc<dyn RfCoupling>,
}

impl std::fmt::Debug for TaapModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaapModel")
            .field("config", &self.config)
            .field("constants", &self.constants)
            .field("nodes", &self.nodes)
            .finish_non_exhaustive()
    }
}

impl TaapModel {
    pub fn new(config: TaapConfig, constants: PhysicalConstants) -> Self {
        Self { config, constants, nodes: AUDIO_NODES, coupling: Arc::new(UniformCoupling) }
    }

    pub fn with_coupling(mut self, coupling: Arc<dyn RfCoupling>) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes.max(1);
        self
    }

    fn gravity_energy(&self, p: &Vector3<f64>) -> f64 {
        let c = &self.config;
        let horizontal = p.x * c.tilt_azimuth.cos() + p.y * c.tilt_azimuth.sin();
        self.constants.atom_mass * self.constants.gravity * (p.z * c.tilt.cos() - c.tilt.sin() * horizontal)
    }

    fn dressed_energy(&self, p: &Vector3<f64>, audio_phase: f64) -> Result<f64> {
        let c = &self.config;
        let mut field = quadrupole_field(p, c.quadrupole_gradient);
        field.z += c.audio_amplitude * audio_phase.sin();
        let b = field.norm();
        if b == 0.0 {
            return Err(TaapError::DegenerateField { x: p.x, y: p.y, z: p.z });
        }
        let detuning = c.dressed_moment * b / self.constants.hbar - c.rf_frequency;
        let rabi = self.coupling.rabi_frequency(c, p, &field);
        Ok(self.constants.hbar * detuning.hypot(rabi))
    }

    /// ħ·sqrt(Δ² + Ω²) + gravity at one instant of the audio cycle.
    pub fn dressed(&self, p: &Vector3<f64>, audio_phase: f64) -> Result<f64> {
        Ok(self.dressed_energy(p, audio_phase)? + self.gravity_energy(p))
    }

    /// Audio-period average of the dressed energy (trapezoid rule) plus gravity.
    pub fn averaged(&self, p: &Vector3<f64>) -> Result<f64> {
        let m = self.nodes;
        let mut acc = 0.0;
        for j in 0..m {
            acc += self.dressed_energy(p, TAU * j as f64 / m as f64)?;
        }
        Ok(acc / m as f64 + self.gravity_energy(p))
    }

    fn at(&self, rho: f64, z: f64, phi: f64) -> Result<f64> {
        self.averaged(&Vector3::new(rho * phi.cos(), rho * phi.sin(), z))
    }

    /// Minimum over height at a fixed radius and azimuth.
    fn vertical_minimum(&self, rho: f64, phi: f64) -> Result<(f64, f64)> {
        let scale = self.config.resonant_radius(&self.constants);
        let (lo, hi) = (-1.2 * scale, 0.6 * scale);
        let (z, v) = coarse_then_brent(|z| self.at(rho, z, phi), lo, hi, 48, 1e-10)?;
        Ok((z, v))
    }

    /// Locates the ring minimum at azimuth `phi` by nested 1D minimization:
    /// height at fixed radius, then radius.
    pub fn locate_ring_at(&self, phi: f64) -> Result<RingLocation> {
        let scale = self.config.resonant_radius(&self.constants);
        let (lo, hi) = (0.25 * scale, 1.2 * scale);
        let n = 40;
        let step = (hi - lo) / n as f64;
        let mut best = (0, f64::INFINITY);
        for i in 0..=n {
            let v = self.vertical_minimum(lo + step * i as f64, phi)?.1;
            if v < best.1 {
                best = (i, v);
            }
        }
        if best.0 == 0 || best.0 == n {
            return Err(TaapError::NoRing(format!(
                "minimum over radius lies on the search boundary ({:.3e} m)",
                lo + step * best.0 as f64
            )));
        }
        let a = lo + step * (best.0 - 1) as f64;
        let b = lo + step * (best.0 + 1) as f64;
        let m = brent_minimize(|rho| self.vertical_minimum(rho, phi).map(|r| r.1), a, b, 1e-10, 200)?;
        let (height, value) = self.vertical_minimum(m.x, phi)?;
        Ok(RingLocation { radius: m.x, height, value })
    }

    /// Ring location of the untilted trap.
    pub fn locate_ring(&self) -> Result<RingLocation> {
        let flat = Self { config: self.config.untilted(), ..self.clone() };
        flat.locate_ring_at(0.0)
    }

    /// Principal transverse trap frequencies (rad/s) at a ring location, from
    /// the finite-difference Hessian in the (ρ, z) plane.
    pub fn transverse_frequencies(&self, ring: &RingLocation) -> Result<[f64; 2]> {
        let h = 2e-7;
        let (r, z) = (ring.radius, ring.height);
        let f = |dr: f64, dz: f64| self.at(r + dr, z + dz, 0.0);
        let v0 = f(0.0, 0.0)?;
        let vrr = (f(h, 0.0)? - 2.0 * v0 + f(-h, 0.0)?) / (h * h);
        let vzz = (f(0.0, h)? - 2.0 * v0 + f(0.0, -h)?) / (h * h);
        let vrz = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
        let eig = Matrix2::new(vrr, vrz, vrz, vzz).symmetric_eigenvalues();
        let (mut a, mut b) = (eig[0], eig[1]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if a <= 0.0 {
            return Err(TaapError::NoRing(format!("transverse curvature not positive ({a:e} J/m²)")));
        }
        let m = self.constants.atom_mass;
        Ok([(a / m).sqrt(), (b / m).sqrt()])
    }
}

/// Coarse scan followed by Brent refinement around the best grid point.
fn coarse_then_brent<F>(mut f: F, lo: f64, hi: f64, n: usize, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let step = (hi - lo) / n as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=n {
        let v = f(lo + step * i as f64)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let a = lo + step * best.0.saturating_sub(1) as f64;
    let b = lo + step * (best.0 + 1).min(n) as f64;
    let m = brent_minimize(&mut f, a, b, xtol, 200)?;
    Ok((m.x, m.value))
}

/// Dressed potential at one audio phase using the default (uniform) coupling.
pub fn dressed_potential(
    point: &Vector3<f64>,
    taap: &TaapConfig,
    constants: &PhysicalConstants,
    audio_phase: f64,
) -> Result<f64> {
    TaapModel::new(*taap, *constants).dressed(point, audio_phase)
}

/// Time-averaged adiabatic potential with the default quadrature.
pub fn taap_potential(point: &Vector3<f64>, taap: &TaapConfig, constants: &PhysicalConstants) -> Result<f64> {
    TaapModel::new(*taap, *constants).averaged(point)
}

/// Lens potential of a ring of radius `radius` tilted by `tilt` towards `center`.
pub fn lens_potential(phi: f64, tilt: f64, center: f64, radius: f64, constants: &PhysicalConstants) -> f64 {
    -lens_depth(tilt, radius, constants) * (phi - center).cos()
}

/// m g R sin δ.
pub fn lens_depth(tilt: f64, radius: f64, constants: &PhysicalConstants) -> f64 {
    constants.atom_mass * constants.gravity * radius * tilt.sin()
}

/// Small-oscillation frequency sqrt(g sin δ / R) of the lens.
pub fn lens_frequency(tilt: f64, radius: f64, constants: &PhysicalConstants) -> f64 {
    (constants.gravity * tilt.sin() / radius).sqrt()
}

/// Tilt that makes the lens oscillate at `frequency`.
pub fn tilt_for_frequency(frequency: f64, radius: f64, constants: &PhysicalConstants) -> Option<f64> {
    let s = frequency * frequency * radius / constants.gravity;
    (s <= 1.0).then(|| s.asin())
}

/// Adjusts the audio amplitude (and the RF frequency when the target lies
/// outside the reachable range) so that the untilted ring sits at `target`.
pub fn calibrate_ring(target: f64, taap: &TaapConfig, constants: &PhysicalConstants) -> Result<TaapConfig> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(TaapError::InvalidTarget(target));
    }
    let (ratio_lo, ratio_hi) = AUDIO_RATIO_RANGE;
    let mut cfg = taap.untilted();
    for _ in 0..8 {
        let b_res = cfg.resonant_field(constants);
        let radius_for = |ratio: f64| -> Result<f64> {
            let trial = TaapConfig { audio_amplitude: ratio * b_res, ..cfg };
            Ok(TaapModel::new(trial, *constants).locate_ring()?.radius)
        };
        let r_max = radius_for(ratio_lo)?;
        let r_min = radius_for(ratio_hi)?;
        if target <= r_max && target >= r_min {
            let ratio = brent_root(|x| radius_for(x).map(|r| r - target), ratio_lo, ratio_hi, 1e-10, 200)?;
            return Ok(TaapConfig {
                audio_amplitude: ratio * b_res,
                tilt: taap.tilt,
                target_radius: Some(target),
                ..cfg
            });
        }
        // Out of reach with the audio field alone: rescale the RF so the ring
        // geometry (which scales with the resonant radius) lands near target.
        let ratio = (cfg.audio_amplitude / b_res).clamp(ratio_lo + 0.05, ratio_hi - 0.05);
        let current = radius_for(ratio)?;
        cfg.rf_frequency *= target / current;
        cfg.audio_amplitude = ratio * cfg.resonant_field(constants);
    }
    Err(TaapError::NoConvergence(format!("target radius {target:e} m not reached")))
}

/// Reduced azimuthal description of the ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingGuide1D {
    /// m
    pub radius: f64,
    /// Height z₀ of the ring plane, m.
    pub height: f64,
    /// Geometric mean of the two transverse frequencies, rad/s.
    pub transverse_frequency: f64,
    pub transverse_frequencies: [f64; 2],
    /// V(φ_j) at φ_j = 2πj/N, J.
    pub potential: Vec<f64>,
}

impl RingGuide1D {
    /// A guide with a flat azimuthal potential, for use without the field model.
    pub fn ideal(radius: f64, transverse_frequency: f64, samples: usize) -> Self {
        Self {
            radius,
            height: 0.0,
            transverse_frequency,
            transverse_frequencies: [transverse_frequency; 2],
            potential: vec![0.0; samples],
        }
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.potential.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.potential.iter().sum::<f64>() / self.potential.len() as f64
    }

    /// max |V − mean(V)|.
    pub fn flatness(&self) -> f64 {
        let mean = self.mean();
        self.potential.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
    }

    /// True when the azimuthal variation is below 10⁻³·m g R.
    pub fn is_flat(&self, constants: &PhysicalConstants) -> bool {
        self.flatness() < 1e-3 * constants.atom_mass * constants.gravity * self.radius
    }

    /// V − mean(V) as an interpolated potential.
    pub fn ripple(&self) -> Sampled {
        let mean = self.mean();
        Sampled::new(self.potential.iter().map(|v| v - mean).collect())
    }

    /// Index of the lowest sample.
    pub fn argmin(&self) -> usize {
        self.potential
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
            .0
    }

    /// sqrt(V''/(m R²)) from a centred difference over `stride` samples at index `j`.
    pub fn azimuthal_frequency(&self, j: usize, stride: usize, constants: &PhysicalConstants) -> f64 {
        let n = self.potential.len();
        let h = TAU * stride as f64 / n as f64;
        let v = |k: isize| self.potential[(j as isize + k).rem_euclid(n as isize) as usize];
        let s = stride as isize;
        let curvature = (v(s) - 2.0 * v(0) + v(-s)) / (h * h);
        (curvature / (constants.atom_mass * self.radius * self.radius)).sqrt()
    }
}

/// Samples the time-averaged potential along the ring, including tilt.
///
/// The ring is located in the untilted trap and sampled at that radius and
/// height; the tilt enters through the gravity term.
pub fn reduce_to_guide(taap: &TaapConfig, constants: &PhysicalConstants, samples: usize) -> Result<RingGuide1D> {
    let calibrated = match taap.target_radius {
        Some(target) => calibrate_ring(target, taap, constants)?,
        None => *taap,
    };
    let model = TaapModel::new(calibrated, *constants);
    let ring = model.locate_ring()?;
    let freqs = model.transverse_frequencies(&ring)?;
    let potential = (0..samples)
        .map(|j| model.at(ring.radius, ring.height, TAU * j as f64 / samples as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(RingGuide1D {
        radius: ring.radius,
        height: ring.height,
        transverse_frequency: (freqs[0] * freqs[1]).sqrt(),
        transverse_frequencies: freqs,
        potential,
    })
}

/// Position of the lens maximum, φ_c + π.
pub fn lens_maximum(center: f64) -> f64 {
    crate::constants::wrap_angle(center + PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn quadrupole_examples() {
        assert_eq!(quadrupole_field(&Vector3::zeros(), 1.0), Vector3::zeros());
        let b = quadrupole_field(&Vector3::new(1e-4, 0.0, 0.0), 1.0);
        assert!((b - Vector3::new(1e-4, 0.0, 0.0)).norm() < 1e-18);
        let b = quadrupole_field(&Vector3::new(0.0, 0.0, -3e-5), 0.9);
        assert!((b.norm() - 2.0 * 0.9 * 3e-5).abs() < 1e-18);
    }

    #[test]
    fn resonant_point_gives_rabi_splitting() {
        let c = consts();
        let cfg = TaapConfig { audio_amplitude: 0.0, ..TaapConfig::default() };
        let r = cfg.resonant_radius(&c);
        let z = 0.0;
        let v = dressed_potential(&Vector3::new(r, 0.0, z), &cfg, &c, 0.3).unwrap();
        let expected = c.hbar * cfg.rabi_frequency + c.atom_mass * c.gravity * z;
        assert!((v - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn weak_coupling_limit_is_detuning() {
        let c = consts();
        let cfg = TaapConfig { rabi_frequency: 1e-9, ..TaapConfig::default() };
        let p = Vector3::new(3e-4, 1e-4, -2e-5);
        let mut field = quadrupole_field(&p, cfg.quadrupole_gradient);
        field.z += cfg.audio_amplitude * 0.7f64.sin();
        let detuning = cfg.dressed_moment * field.norm() / c.hbar - cfg.rf_frequency;
        let expected = c.hbar * detuning.abs() + c.atom_mass * c.gravity * p.z;
        let v = dressed_potential(&p, &cfg, &c, 0.7).unwrap();
        assert!((v - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn zero_field_is_an_error() {
        let c = consts();
        let cfg = TaapConfig { audio_amplitude: 0.0, ..TaapConfig::default() };
        let err = dressed_potential(&Vector3::zeros(), &cfg, &c, 0.0).unwrap_err();
        assert!(matches!(err, TaapError::DegenerateField { .. }));
        // the bias moves the zero to z = B_m sin(θ)/(2b')
        let cfg = TaapConfig::default();
        let z = cfg.audio_amplitude / (2.0 * cfg.quadrupole_gradient);
        assert!(taap_potential(&Vector3::new(0.0, 0.0, z), &cfg, &c).is_err());
    }

    #[test]
    fn no_audio_means_no_averaging() {
        let c = consts();
        let cfg = TaapConfig { audio_amplitude: 0.0, ..TaapConfig::default() };
        let p = Vector3::new(1.7e-4, -4e-5, -1e-5);
        let avg = taap_potential(&p, &cfg, &c).unwrap();
        let inst = dressed_potential(&p, &cfg, &c, 1.234).unwrap();
        assert!((avg - inst).abs() < 1e-14 * avg.abs());
    }

    #[test]
    fn lens_closed_form() {
        let c = consts();
        assert_eq!(lens_potential(1.0, 0.0, 0.3, 485e-6, &c), 0.0);
        let r = 485e-6;
        let max = (0..1000)
            .map(|i| TAU * i as f64 / 1000.0)
            .max_by(|a, b| {
                lens_potential(*a, 0.07, 0.5, r, &c).partial_cmp(&lens_potential(*b, 0.07, 0.5, r, &c)).unwrap()
            })
            .unwrap();
        assert!((max - lens_maximum(0.5)).abs() < TAU / 1000.0);
        assert!((lens_frequency(0.089, r, &c) - 42.4).abs() < 0.01 * 42.4);
        assert!((lens_frequency(0.070, r, &c) - 37.6).abs() < 0.01 * 37.6);
        let w = lens_frequency(0.07, r, &c);
        assert!((tilt_for_frequency(w, r, &c).unwrap() - 0.07).abs() < 1e-12);
    }
}
