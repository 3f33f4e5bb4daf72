//! One-dimensional Gross-Pitaevskii solver on the ring.
//!
//! The order parameter ψ(φ) lives on N uniform grid points over [0, 2π) and
//! is normalized to the atom number as a line density: R·Σ|ψ_j|²·Δφ = N_a.
//! Kinetic energy is diagonal in the angular-momentum basis with eigenvalues
//! ħ²k²/(2mR²), so periodic boundaries are exact.

use crate::config::SolverParams;
use crate::constants::{wrap_angle, wrap_pi, PhysicalConstants};
use crate::potential::{AzimuthalPotential, CosineLens, Sum, Trajectory};
use crate::taap::{lens_depth, RingGuide1D};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpeError {
    #[error("grid size {0} is not a power of two >= 4")]
    BadGrid(usize),
    #[error("imaginary-time propagation did not converge in {steps} steps (last relative change {change:e})")]
    NoConvergence { steps: usize, change: f64 },
    #[error("trap has no positive curvature; the initial state is unbound")]
    UnboundTrap,
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GpeError>;

/// Steps between energy evaluations during imaginary-time propagation.
const ENERGY_CHECK_INTERVAL: usize = 20;

/// Fraction of the density mass used by the Thomas-Fermi fit.
const TF_WINDOW_MASS: f64 = 0.8;

/// g₁D = 2ħω⊥a_s.
pub fn effective_g1d(transverse_frequency: f64, constants: &PhysicalConstants) -> f64 {
    2.0 * constants.hbar * transverse_frequency * constants.scattering_length
}

/// Condensate order parameter on the ring grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub amplitudes: Vec<Complex64>,
    pub atom_number: f64,
    pub ring_radius: f64,
}

impl WaveFunction {
    /// Wraps `amplitudes` and rescales them to `atom_number`.
    pub fn new(amplitudes: Vec<Complex64>, atom_number: f64, ring_radius: f64) -> Result<Self> {
        check_grid(amplitudes.len())?;
        if !(atom_number > 0.0 && ring_radius > 0.0) {
            return Err(GpeError::InvalidInput("atom number and radius must be positive".into()));
        }
        let mut psi = Self { amplitudes, atom_number, ring_radius };
        psi.normalize();
        Ok(psi)
    }

    /// ψ ∝ exp(−s²/(2a²))·e^{iℓφ} with s the arc distance from `center`.
    pub fn gaussian(
        n: usize,
        atom_number: f64,
        ring_radius: f64,
        center: f64,
        width: f64,
        winding: i64,
    ) -> Result<Self> {
        let amps = (0..n)
            .map(|j| {
                let phi = TAU * j as f64 / n as f64;
                let s = ring_radius * wrap_pi(phi - center);
                Complex64::from_polar((-s * s / (2.0 * width * width)).exp(), winding as f64 * phi)
            })
            .collect();
        Self::new(amps, atom_number, ring_radius)
    }

    /// Real, non-negative amplitudes with the given line-density shape.
    pub fn from_density(density: &[f64], atom_number: f64, ring_radius: f64) -> Result<Self> {
        let amps = density.iter().map(|&d| Complex64::new(d.max(0.0).sqrt(), 0.0)).collect();
        Self::new(amps, atom_number, ring_radius)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn dphi(&self) -> f64 {
        TAU / self.len() as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.len() as f64
    }

    /// |ψ|², atoms per metre of arc.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// R·Σ|ψ|²·Δφ.
    pub fn norm(&self) -> f64 {
        self.ring_radius * self.dphi() * self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            let scale = (self.atom_number / norm).sqrt();
            self.amplitudes.iter_mut().for_each(|a| *a *= scale);
        }
    }

    /// Imprints e^{iℓφ}, a boost by ℓħ/(mR²) in angular velocity.
    pub fn boosted(&self, winding: i64) -> Self {
        let mut out = self.clone();
        for (j, a) in out.amplitudes.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, winding as f64 * self.angle(j));
        }
        out
    }

    pub fn conjugated(&self) -> Self {
        let mut out = self.clone();
        out.amplitudes.iter_mut().for_each(|a| *a = a.conj());
        out
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n >= 4 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(GpeError::BadGrid(n))
    }
}

/// Condensate observables. Energies are totals over all atoms, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub com_angle: f64,
    pub com_velocity: f64,
    /// Thomas-Fermi half-length in arc length; `None` when the fit fails.
    pub tf_radius: Option<f64>,
    pub rms_width: f64,
    pub energy_total: f64,
    pub energy_kinetic: f64,
    pub energy_potential: f64,
    pub energy_interaction: f64,
}

impl Observables {
    pub fn tf_fit_failed(&self) -> bool {
        self.tf_radius.is_none()
    }
}

/// Split-step spectral propagator for one grid size and interaction strength.
#[derive(Clone)]
pub struct GpeSolver {
    pub constants: PhysicalConstants,
    /// g₁D, J·m.
    pub interaction: f64,
    pub ring_radius: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// ħ²k²/(2mR²) for each FFT index, J.
    kinetic: Vec<f64>,
}

impl std::fmt::Debug for GpeSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GpeSolver")
            .field("n", &self.n)
            .field("interaction", &self.interaction)
            .field("ring_radius", &self.ring_radius)
            .finish_non_exhaustive()
    }
}

/// Signed angular-momentum quantum number of FFT bin `j`.
fn wavenumber(j: usize, n: usize) -> f64 {
    if j < n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

impl GpeSolver {
    pub fn new(n: usize, ring_radius: f64, interaction: f64, constants: PhysicalConstants) -> Result<Self> {
        check_grid(n)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scale = constants.hbar * constants.hbar / (2.0 * constants.atom_mass * ring_radius * ring_radius);
        let kinetic = (0..n).map(|j| scale * wavenumber(j, n).powi(2)).collect();
        Ok(Self { constants, interaction, ring_radius, n, forward, inverse, kinetic })
    }

    pub fn grid_len(&self) -> usize {
        self.n
    }

    fn grid_values(&self, potential: &dyn AzimuthalPotential, t: f64, out: &mut [f64]) {
        for (j, v) in out.iter_mut().enumerate() {
            *v = potential.value(TAU * j as f64 / self.n as f64, t);
        }
    }

    fn check(&self, psi: &WaveFunction) -> Result<()> {
        if psi.len() != self.n {
            return Err(GpeError::InvalidInput(format!("wavefunction has {} points, solver {}", psi.len(), self.n)));
        }
        Ok(())
    }

    /// Kinetic, potential and interaction energies plus ⟨k⟩.
    fn energies(&self, psi: &WaveFunction, v: &[f64]) -> (f64, f64, f64, f64) {
        let mut spec = psi.amplitudes.clone();
        self.forward.process(&mut spec);
        let weight = psi.ring_radius * psi.dphi();
        let n = self.n as f64;
        let mut kin = 0.0;
        let mut k_mean = 0.0;
        let mut total = 0.0;
        for (j, c) in spec.iter().enumerate() {
            let p = c.norm_sqr();
            kin += self.kinetic[j] * p;
            k_mean += wavenumber(j, self.n) * p;
            total += p;
        }
        let kinetic = weight * kin / n;
        let mut pot = 0.0;
        let mut int = 0.0;
        for (a, &vj) in psi.amplitudes.iter().zip(v) {
            let d = a.norm_sqr();
            pot += vj * d;
            int += d * d;
        }
        let k_avg = if total > 0.0 { k_mean / total } else { 0.0 };
        (kinetic, weight * pot, 0.5 * self.interaction * weight * int, k_avg)
    }

    /// Ground state in `potential` (evaluated at t = 0) by imaginary-time
    /// propagation, renormalizing every step, until the relative energy change
    /// per step falls below `tolerance`.
    pub fn ground_state(
        &self,
        potential: &dyn AzimuthalPotential,
        atom_number: f64,
        dtau: f64,
        tolerance: f64,
        max_steps: usize,
    ) -> Result<WaveFunction> {
        if !(dtau > 0.0) {
            return Err(GpeError::InvalidInput("imaginary time step must be positive".into()));
        }
        let n = self.n;
        let mut v = vec![0.0; n];
        self.grid_values(potential, 0.0, &mut v);
        let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
        v.iter_mut().for_each(|x| *x -= vmin);

        let mut psi = self.initial_guess(&v, atom_number)?;
        let hbar = self.constants.hbar;
        let kin_decay: Vec<f64> = self.kinetic.iter().map(|&e| (-e * dtau / hbar).exp() / n as f64).collect();
        let half = 0.5 * dtau / hbar;
        let g = self.interaction;

        let energy = |psi: &WaveFunction| {
            let (k, p, i, _) = self.energies(psi, &v);
            k + p + i
        };
        let mut e_prev = energy(&psi);
        let mut change = f64::INFINITY;
        for step in 1..=max_steps {
            for (a, &vj) in psi.amplitudes.iter_mut().zip(&v) {
                *a *= (-(vj + g * a.norm_sqr()) * half).exp();
            }
            self.forward.process(&mut psi.amplitudes);
            psi.amplitudes.iter_mut().zip(&kin_decay).for_each(|(a, &f)| *a *= f);
            self.inverse.process(&mut psi.amplitudes);
            // the interaction half-step must see the normalized density
            psi.normalize();
            for (a, &vj) in psi.amplitudes.iter_mut().zip(&v) {
                *a *= (-(vj + g * a.norm_sqr()) * half).exp();
            }
            psi.normalize();
            if step % ENERGY_CHECK_INTERVAL == 0 {
                let e = energy(&psi);
                change = (e - e_prev).abs() / (ENERGY_CHECK_INTERVAL as f64 * e.abs());
                e_prev = e;
                if change < tolerance {
                    return Ok(psi);
                }
            }
        }
        Err(GpeError::NoConvergence { steps: max_steps, change })
    }

    fn initial_guess(&self, v: &[f64], atom_number: f64) -> Result<WaveFunction> {
        let n = self.n;
        let r = self.ring_radius;
        let dphi = TAU / n as f64;
        let m = self.constants.atom_mass;
        let jmin = v.iter().enumerate().fold((0, f64::INFINITY), |a, (j, &x)| if x < a.1 { (j, x) } else { a }).0;
        let at = |k: isize| v[(jmin as isize + k).rem_euclid(n as isize) as usize];
        let stride = (n / 256).max(1) as isize;
        let h = stride as f64 * dphi;
        let curvature = (at(stride) - 2.0 * at(0) + at(-stride)) / (h * h);
        if !(curvature > 0.0) {
            return Err(GpeError::UnboundTrap);
        }
        let omega = (curvature / (m * r * r)).sqrt();
        let center = TAU * jmin as f64 / n as f64;
        let width = (self.constants.hbar / (m * omega)).sqrt();

        let g = self.interaction;
        if g > 0.0 {
            let atoms = |mu: f64| r * dphi * v.iter().map(|&x| (mu - x).max(0.0)).sum::<f64>() / g;
            let vmax = v.iter().cloned().fold(0.0, f64::max);
            if atoms(vmax) <= atom_number {
                return WaveFunction::new(vec![Complex64::new(1.0, 0.0); n], atom_number, r);
            }
            let (mut lo, mut hi) = (0.0, vmax);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if atoms(mid) < atom_number {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mu = 0.5 * (lo + hi);
            if mu > 5.0 * self.constants.hbar * omega {
                let density: Vec<f64> = v.iter().map(|&x| (mu - x).max(0.0) / g).collect();
                return WaveFunction::from_density(&density, atom_number, r);
            }
        }
        WaveFunction::gaussian(n, atom_number, r, center, width, 0)
    }

    /// Real-time Strang-split propagation over `duration` starting at `t0`,
    /// with the step shortened so that an integer number of steps fits.
    pub fn evolve(
        &self,
        psi: &mut WaveFunction,
        potential: &dyn AzimuthalPotential,
        t0: f64,
        duration: f64,
        dt: f64,
    ) -> Result<()> {
        self.check(psi)?;
        if duration < 0.0 || !(dt > 0.0) {
            return Err(GpeError::InvalidInput(format!("duration {duration} and dt {dt} must be >= 0 and > 0")));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let n = self.n;
        let hbar = self.constants.hbar;
        let inv_n = 1.0 / n as f64;
        let kin_phase: Vec<Complex64> =
            self.kinetic.iter().map(|&e| Complex64::from_polar(inv_n, -e * h / hbar)).collect();
        let half = 0.5 * h / hbar;
        let g = self.interaction;

        let is_static = potential.is_static();
        let mut v_now = vec![0.0; n];
        let mut v_next = vec![0.0; n];
        self.grid_values(potential, t0, &mut v_now);
        if is_static {
            v_next.copy_from_slice(&v_now);
        }
        for step in 0..steps {
            for (a, &vj) in psi.amplitudes.iter_mut().zip(&v_now) {
                *a *= Complex64::from_polar(1.0, -(vj + g * a.norm_sqr()) * half);
            }
            self.forward.process(&mut psi.amplitudes);
            psi.amplitudes.iter_mut().zip(&kin_phase).for_each(|(a, f)| *a *= f);
            self.inverse.process(&mut psi.amplitudes);
            if !is_static {
                self.grid_values(potential, t0 + (step + 1) as f64 * h, &mut v_next);
            }
            for (a, &vj) in psi.amplitudes.iter_mut().zip(&v_next) {
                *a *= Complex64::from_polar(1.0, -(vj + g * a.norm_sqr()) * half);
            }
            if !is_static {
                std::mem::swap(&mut v_now, &mut v_next);
            }
        }
        Ok(())
    }

    /// Observables of `psi` in `potential` at time `t`.
    pub fn observe(&self, psi: &WaveFunction, potential: &dyn AzimuthalPotential, t: f64) -> Observables {
        let mut v = vec![0.0; self.n];
        self.grid_values(potential, t, &mut v);
        let (kinetic, pot, int, k_avg) = self.energies(psi, &v);
        let density = psi.density();
        let (com, rms) = circular_moments(&density, psi.ring_radius);
        let m = self.constants.atom_mass;
        Observables {
            com_angle: com,
            com_velocity: self.constants.hbar * k_avg / (m * psi.ring_radius * psi.ring_radius),
            tf_radius: fit_thomas_fermi(&density, psi.ring_radius, com),
            rms_width: rms,
            energy_total: kinetic + pot + int,
            energy_kinetic: kinetic,
            energy_potential: pot,
            energy_interaction: int,
        }
    }
}

/// Circular mean angle and arc-length rms width about it.
pub fn circular_moments(density: &[f64], radius: f64) -> (f64, f64) {
    let n = density.len();
    let (mut c, mut s, mut total) = (0.0, 0.0, 0.0);
    for (j, &d) in density.iter().enumerate() {
        let phi = TAU * j as f64 / n as f64;
        c += d * phi.cos();
        s += d * phi.sin();
        total += d;
    }
    let com = wrap_angle(s.atan2(c));
    let var = density
        .iter()
        .enumerate()
        .map(|(j, &d)| d * wrap_pi(TAU * j as f64 / n as f64 - com).powi(2))
        .sum::<f64>()
        / total;
    (com, radius * var.sqrt())
}

/// Least-squares inverted-parabola fit of the line density over the central
/// 80% of its mass. Returns the Thomas-Fermi half-length in arc length, or
/// `None` when the density is not a single compact peak.
pub fn fit_thomas_fermi(density: &[f64], radius: f64, com: f64) -> Option<f64> {
    let n = density.len();
    let total: f64 = density.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    // walk the grid starting opposite the centre of mass so arc positions increase
    let start = ((wrap_angle(com + PI) / TAU) * n as f64).round() as usize % n;
    let points: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let j = (start + k) % n;
            (radius * wrap_pi(TAU * j as f64 / n as f64 - com), density[j])
        })
        .collect();
    let tail = 0.5 * (1.0 - TF_WINDOW_MASS) * total;
    let mut cum = 0.0;
    let mut window = Vec::new();
    for &(s, d) in &points {
        let before = cum;
        cum += d;
        if before >= tail && cum <= total - tail {
            window.push((s, d));
        }
    }
    if window.len() < 5 {
        return None;
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(s, d) in &window {
        let row = Vector3::new(1.0, s, s * s);
        ata += row * row.transpose();
        atb += row * d;
    }
    let c = ata.lu().solve(&atb)?;
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    if !(c2 < 0.0) {
        return None;
    }
    let peak = c0 - c1 * c1 / (4.0 * c2);
    if !(peak > 0.0) {
        return None;
    }
    let r_tf = (-peak / c2).sqrt();
    if !(r_tf.is_finite() && r_tf < PI * radius) {
        return None;
    }
    let rss: f64 = window.iter().map(|&(s, d)| (c0 + c1 * s + c2 * s * s - d).powi(2)).sum();
    let scale: f64 = window.iter().map(|&(_, d)| d * d).sum();
    if rss / scale > 0.04 {
        return None;
    }
    Some(r_tf)
}

/// Harmonic lens trap used to prepare initial states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensTrap {
    pub tilt: f64,
    pub center: f64,
}

/// Ground state of `atom_number` atoms in the guide plus a lens trap.
pub fn ground_state(
    guide: &RingGuide1D,
    trap: &LensTrap,
    atom_number: f64,
    params: &SolverParams,
    constants: &PhysicalConstants,
    interaction: f64,
) -> Result<WaveFunction> {
    if !(trap.tilt > 0.0) {
        return Err(GpeError::UnboundTrap);
    }
    let solver = GpeSolver::new(params.grid_points, guide.radius, interaction, *constants)?;
    let mut potential = Sum::new().with(CosineLens {
        depth: lens_depth(trap.tilt, guide.radius, constants),
        center: Trajectory::fixed(trap.center),
    });
    if !guide.is_flat(constants) {
        potential.push(Box::new(guide.ripple()));
    }
    solver.ground_state(&potential, atom_number, params.time_step, params.imaginary_time_tolerance, params.max_imaginary_steps())
}
