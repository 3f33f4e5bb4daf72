//! Expansion fits, kinetic energies, lens scans and tilt optimization.

use crate::config::MatterKind;
use crate::constants::PhysicalConstants;
use crate::minimize::{brent_root, golden_section, SearchError};
use crate::sequence::{SequenceError, SequencePlan, SequenceState, Simulator, Trace};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Fewest samples accepted by [`fit_expansion`].
pub const MIN_FIT_SAMPLES: usize = 5;

/// Relative size change below which a fit is flagged as poorly constrained.
pub const MIN_DYNAMIC_RANGE: f64 = 0.2;

/// Gradient norm, in normalized units, at which the fit counts as converged.
const FIT_GRADIENT_TOL: f64 = 1e-12;

const FIT_MAX_ITER: usize = 500;

/// Earliest allowed t₀, in units of the sampled span before the first sample.
const T0_LOOKBACK: f64 = 10.0;

/// Points in the unimodality pre-scan of [`optimize_tilt`].
pub const PRESCAN_POINTS: usize = 9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_FIT_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("trace contains non-finite or negative values")]
    BadData,
    #[error("fit did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("fit covariance is singular")]
    Singular,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("plan has no lens pulse")]
    NoLens,
    #[error("lens tilt bounds [{0}, {1}] are invalid")]
    InvalidBounds(f64, f64),
    #[error("energy is not unimodal in the tilt on the search interval: {0:?}")]
    NotUnimodal(Vec<(f64, f64)>),
}

/// Result of fitting size(t) = R·sqrt(Δφ₀² + Δφ̇²(t − t₀)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    /// rad
    pub delta_phi0: f64,
    /// rad/s
    pub delta_phi_rate: f64,
    /// s
    pub t0: f64,
    /// rms residual, m
    pub residual: f64,
    /// Covariance of (Δφ₀, Δφ̇, t₀).
    pub covariance: [[f64; 3]; 3],
    pub samples: usize,
    pub iterations: usize,
    /// Sizes change by less than [`MIN_DYNAMIC_RANGE`] over the trace.
    pub insufficient_dynamic_range: bool,
    /// Samples further than 5 residuals from the model.
    pub outliers: usize,
}

impl ExpansionFit {
    pub fn size_at(&self, t: f64, radius: f64) -> f64 {
        radius * (self.delta_phi0.powi(2) + (self.delta_phi_rate * (t - self.t0)).powi(2)).sqrt()
    }

    /// One-sigma uncertainty of Δφ̇.
    pub fn rate_error(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }
}

/// Normalized model y = sqrt(a² + b²(x − c)²) and its gradient.
fn model(p: &Vector3<f64>, x: f64) -> (f64, Vector3<f64>) {
    let (a, b, c) = (p[0], p[1], p[2]);
    let d = x - c;
    let y = (a * a + b * b * d * d).sqrt().max(1e-300);
    (y, Vector3::new(a / y, b * d * d / y, -b * b * d / y))
}

/// Least-squares normal equations: (JᵀJ, Jᵀr, ½Σr²).
fn normal_equations(p: &Vector3<f64>, x: &[f64], y: &[f64]) -> (Matrix3<f64>, Vector3<f64>, f64) {
    let mut jtj = Matrix3::zeros();
    let mut g = Vector3::zeros();
    let mut cost = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let (f, j) = model(p, xi);
        let r = f - yi;
        jtj += j * j.transpose();
        g += j * r;
        cost += 0.5 * r * r;
    }
    (jtj, g, cost)
}

fn cost_of(p: &Vector3<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| 0.5 * (model(p, xi).0 - yi).powi(2)).sum()
}

/// Starting points: one from the first and last samples, and one with the
/// waist at the smallest sample, which catches traces that pass through a focus.
fn initial_guesses(x: &[f64], y: &[f64]) -> [Vector3<f64>; 2] {
    let n = x.len();
    let slope = (y[n - 1] - y[0]).abs() / (x[n - 1] - x[0]);
    let k = (0..n).fold(0, |best, i| if y[i] < y[best] { i } else { best });
    let far = if x[k] - x[0] > x[n - 1] - x[k] { 0 } else { n - 1 };
    let rise = (y[far] * y[far] - y[k] * y[k]).max(0.0).sqrt() / (x[far] - x[k]).abs().max(1e-12);
    [Vector3::new(y[0], slope, x[0]), Vector3::new(y[k], rise, x[k])]
}

/// Damped Gauss-Newton iteration from `start`; returns the parameters and the
/// iteration count.
fn levenberg_marquardt(start: Vector3<f64>, x: &[f64], y: &[f64]) -> Result<(Vector3<f64>, usize), FitError> {
    let clamp = |p: &mut Vector3<f64>| p[2] = p[2].clamp(-T0_LOOKBACK, 1.0);
    let mut p = start;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITER {
        iterations += 1;
        let (jtj, g, cost) = normal_equations(&p, x, y);
        if g.amax() < FIT_GRADIENT_TOL {
            return Ok((p, iterations));
        }
        let mut improved = false;
        let mut converged = false;
        while lambda < 1e20 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + step;
            clamp(&mut trial);
            let trial_cost = cost_of(&trial, x, y);
            if trial_cost < cost {
                let small_step = (trial - p).amax() <= 1e-15 * (1.0 + p.amax());
                p = trial;
                lambda = (lambda * 0.1).max(1e-15);
                improved = true;
                converged = small_step || cost - trial_cost <= 1e-30;
                break;
            }
            lambda *= 10.0;
        }
        // without a downhill step at machine precision p is stationary
        if converged || !improved {
            return Ok((p, iterations));
        }
    }
    Err(FitError::NoConvergence(iterations))
}

/// Levenberg-Marquardt fit of the ballistic expansion model.
///
/// Times and sizes are normalized by the sampled span and the largest size
/// before fitting; t₀ is confined to [t_first − 10·span, t_last].
pub fn fit_expansion(times: &[f64], sizes: &[f64], radius: f64) -> Result<ExpansionFit, FitError> {
    let n = times.len();
    if n != sizes.len() || n < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples(n.min(sizes.len())));
    }
    if times.iter().chain(sizes).any(|v| !v.is_finite()) || sizes.iter().any(|&s| s < 0.0) || !(radius > 0.0) {
        return Err(FitError::BadData);
    }
    let t_first = times.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_last = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = t_last - t_first;
    let s_max = sizes.iter().cloned().fold(0.0, f64::max);
    let s_min = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0 && s_max > 0.0) {
        return Err(FitError::BadData);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let x: Vec<f64> = order.iter().map(|&i| (times[i] - t_first) / span).collect();
    let y: Vec<f64> = order.iter().map(|&i| sizes[i] / s_max).collect();

    let mut best: Option<(Vector3<f64>, usize, f64)> = None;
    let mut failure = None;
    for start in initial_guesses(&x, &y) {
        match levenberg_marquardt(start, &x, &y) {
            Ok((p, iterations)) => {
                let cost = cost_of(&p, &x, &y);
                if best.is_none_or(|b| cost < b.2) {
                    best = Some((p, iterations, cost));
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    let Some((p, iterations, _)) = best else {
        return Err(failure.unwrap_or(FitError::NoConvergence(0)));
    };

    let (jtj, _, cost) = normal_equations(&p, &x, &y);
    let dof = (n - 3) as f64;
    // A flat trace leaves Δφ̇ and t₀ unconstrained; the pseudo-inverse zeroes
    // those directions instead of failing.
    let inverse = match jtj.try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
        _ => jtj.pseudo_inverse(1e-12 * jtj.amax()).map_err(|_| FitError::Singular)?,
    };
    let cov_scaled = inverse * (2.0 * cost / dof);
    let scale = Vector3::new(s_max / radius, s_max / (radius * span), span);
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = cov_scaled[(i, j)] * scale[i] * scale[j];
        }
    }
    let rms = (2.0 * cost / n as f64).sqrt();
    let outliers = x
        .iter()
        .zip(&y)
        .filter(|(&xi, &yi)| (model(&p, xi).0 - yi).abs() > 5.0 * rms + 1e-12)
        .count();
    Ok(ExpansionFit {
        delta_phi0: p[0].abs() * scale[0],
        delta_phi_rate: p[1].abs() * scale[1],
        t0: t_first + p[2] * span,
        residual: rms * s_max,
        covariance,
        samples: n,
        iterations,
        insufficient_dynamic_range: (s_max - s_min) < MIN_DYNAMIC_RANGE * s_min,
        outliers,
    })
}

/// Kinetic energy per atom derived from an expansion fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kind: MatterKind,
    /// J
    pub energy: f64,
    /// E/k_B, nK
    pub energy_nk: f64,
    /// m(RΔφ̇)²/k_B, K
    pub t_rms: f64,
    /// E(reference)/E; 1 without a reference.
    pub cooling_factor: f64,
}

impl EnergyReport {
    /// Sets the cooling factor relative to `reference`.
    pub fn relative_to(mut self, reference: &EnergyReport) -> Self {
        self.cooling_factor = cooling_factor(reference, &self);
        self
    }
}

/// Thermal: E = ½m(RΔφ̇)². Condensate: E = (1/7)m(RΔφ̇)².
pub fn kinetic_energy(
    fit: &ExpansionFit,
    radius: f64,
    kind: MatterKind,
    constants: &PhysicalConstants,
) -> EnergyReport {
    let v2 = (radius * fit.delta_phi_rate).powi(2);
    let m = constants.atom_mass;
    let energy = match kind {
        MatterKind::Thermal => 0.5 * m * v2,
        MatterKind::Bec => m * v2 / 7.0,
    };
    EnergyReport {
        kind,
        energy,
        energy_nk: constants.to_nanokelvin(energy),
        t_rms: m * v2 / constants.boltzmann,
        cooling_factor: 1.0,
    }
}

/// E(reference)/E(lensed).
pub fn cooling_factor(reference: &EnergyReport, lensed: &EnergyReport) -> f64 {
    if lensed.energy > 0.0 {
        reference.energy / lensed.energy
    } else {
        f64::INFINITY
    }
}

/// Tilt δ at which a point source expanded for `tau0` is collimated by a lens
/// of duration `tau_lens`: tan(ω_L τ_L) = 1/(ω_L τ₀) with ω_L = sqrt(g sin δ/R).
pub fn collimating_tilt(tau0: f64, tau_lens: f64, radius: f64, constants: &PhysicalConstants) -> Option<f64> {
    if !(tau0 > 0.0 && tau_lens > 0.0) {
        return None;
    }
    let residual = |w: f64| -> Result<f64, SearchError> { Ok((w * tau_lens).tan() * w * tau0 - 1.0) };
    let hi = FRAC_PI_2 / tau_lens * (1.0 - 1e-12);
    let omega = brent_root(residual, 1e-9 / tau_lens, hi, 1e-14, 200).ok()?;
    let s = omega * omega * radius / constants.gravity;
    (s <= 1.0).then(|| s.asin())
}

/// Outcome of one lensed run.
#[derive(Debug, Clone)]
pub struct LensOutcome {
    pub tilt: f64,
    pub fit: ExpansionFit,
    pub energy: EnergyReport,
    pub trace: Trace,
}

/// A sequence whose lens tilt is varied. Stages before the lens are run once
/// and their final state is reused for every tilt.
#[derive(Debug, Clone)]
pub struct LensExperiment {
    pub simulator: Simulator,
    pub plan: SequencePlan,
    lens_index: usize,
    prefix_state: SequenceState,
    prefix_trace: Trace,
}

impl LensExperiment {
    pub fn new(simulator: Simulator, initial: SequenceState, plan: SequencePlan) -> Result<Self, AnalysisError> {
        let lens_index = plan.lens_index().ok_or(AnalysisError::NoLens)?;
        let problems = plan.violations();
        if !problems.is_empty() {
            return Err(SequenceError::InvalidPlan(problems.into_iter().map(|(f, m)| format!("{f}: {m}")).collect()).into());
        }
        let mut prefix_state = initial;
        let mut prefix_trace = Trace::new(prefix_state.matter.kind());
        simulator.run_stages(&mut prefix_state, &plan.stages[..lens_index], 0, &mut prefix_trace)?;
        Ok(Self { simulator, plan, lens_index, prefix_state, prefix_trace })
    }

    pub fn kind(&self) -> MatterKind {
        self.prefix_trace.kind
    }

    /// Full trace of the sequence with the lens set to `tilt`.
    pub fn run(&self, tilt: f64) -> Result<Trace, AnalysisError> {
        let plan = self.plan.with_lens_tilt(tilt);
        let problems = plan.violations();
        if !problems.is_empty() {
            return Err(SequenceError::InvalidPlan(problems.into_iter().map(|(f, m)| format!("{f}: {m}")).collect()).into());
        }
        let mut state = self.prefix_state.clone();
        let mut trace = self.prefix_trace.clone();
        self.simulator.run_stages(&mut state, &plan.stages[self.lens_index..], self.lens_index, &mut trace)?;
        self.simulator.finish(&state, plan.stages.len(), &mut trace);
        Ok(trace)
    }

    /// Runs with `tilt` and fits the post-lens expansion.
    pub fn evaluate(&self, tilt: f64) -> Result<LensOutcome, AnalysisError> {
        let trace = self.run(tilt)?;
        let (t, size) = trace.post_lens_series();
        let fit = fit_expansion(&t, &size, self.simulator.radius)?;
        let energy = kinetic_energy(&fit, self.simulator.radius, self.kind(), &self.simulator.constants);
        Ok(LensOutcome { tilt, fit, energy, trace })
    }

    pub fn energy(&self, tilt: f64) -> Result<f64, AnalysisError> {
        Ok(self.evaluate(tilt)?.energy.energy)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub tilt: f64,
    pub energy: Option<EnergyReport>,
    pub fit: Option<ExpansionFit>,
    pub error: Option<String>,
}

impl ScanPoint {
    pub fn fit_ok(&self) -> bool {
        self.fit.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LensScan {
    pub points: Vec<ScanPoint>,
}

impl LensScan {
    /// Tilt and energy of the lowest successful point; ties go to the
    /// smaller tilt.
    pub fn argmin(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.energy.map(|e| (p.tilt, e.energy)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
    }

    /// Energy at the zero-tilt point, if scanned.
    pub fn reference(&self) -> Option<EnergyReport> {
        self.points.iter().find(|p| p.tilt == 0.0).and_then(|p| p.energy)
    }
}

/// Evaluates `tilts` independently and in parallel. Points are returned in
/// input order; failures are recorded per point.
pub fn scan_lens(experiment: &LensExperiment, tilts: &[f64]) -> LensScan {
    let points = tilts
        .par_iter()
        .map(|&tilt| match experiment.evaluate(tilt) {
            Ok(o) => ScanPoint { tilt, energy: Some(o.energy), fit: Some(o.fit), error: None },
            Err(e) => ScanPoint { tilt, energy: None, fit: None, error: Some(e.to_string()) },
        })
        .collect();
    LensScan { points }
}

/// Minimum of a scalar objective found by golden-section search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltOptimum {
    pub tilt: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section minimization on `[lo, hi]` after a coarse pre-scan of
/// [`PRESCAN_POINTS`] points confirms that `f` falls then rises.
pub fn minimize_unimodal<F>(f: F, lo: f64, hi: f64, tolerance: f64) -> Result<TiltOptimum, AnalysisError>
where
    F: Fn(f64) -> Result<f64, AnalysisError> + Sync,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi && tolerance > 0.0) {
        return Err(AnalysisError::InvalidBounds(lo, hi));
    }
    let grid: Vec<f64> =
        (0..PRESCAN_POINTS).map(|i| lo + (hi - lo) * i as f64 / (PRESCAN_POINTS - 1) as f64).collect();
    let values = grid.par_iter().map(|&x| f(x)).collect::<Result<Vec<f64>, _>>()?;
    let best = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let falls = values[..=best].windows(2).all(|w| w[1] <= w[0]);
    let rises = values[best..].windows(2).all(|w| w[1] >= w[0]);
    if !(falls && rises) {
        return Err(AnalysisError::NotUnimodal(grid.into_iter().zip(values).collect()));
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(PRESCAN_POINTS - 1)];
    let m = golden_section(&f, a, b, tolerance, 200)?;
    let (tilt, value) = if values[best] < m.value { (grid[best], values[best]) } else { (m.x, m.value) };
    Ok(TiltOptimum { tilt, value, evaluations: m.evaluations + PRESCAN_POINTS })
}

/// Lens tilt in `[lo, hi]` minimizing the post-lens kinetic energy.
pub fn optimize_tilt(
    experiment: &LensExperiment,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<(TiltOptimum, LensOutcome), AnalysisError> {
    let opt = minimize_unimodal(|d| experiment.energy(d), lo, hi, tolerance)?;
    let outcome = experiment.evaluate(opt.tilt)?;
    Ok((opt, outcome))
}
