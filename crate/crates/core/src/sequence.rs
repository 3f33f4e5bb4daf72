//! Experimental sequences: hold, bang-bang launch, free expansion, lens pulse
//! and time-of-flight release, applied to either a condensate or a thermal
//! ensemble.
//!
//! The thermal ensemble is propagated in the lab frame. The condensate is
//! propagated in the frame co-moving with the programmed trap trajectory, with
//! the frame reference at grid angle π; during acceleration that frame adds the
//! inertial potential m R² α·(φ' − π).

use crate::config::{MatterConfig, MatterKind, RunConfig, SolverParams};
use crate::constants::{wrap_angle, wrap_pi, PhysicalConstants};
use crate::ensemble::{cloud_size, sample_thermal, step, HarmonicTrap, ParticleEnsemble};
use crate::gpe::{effective_g1d, GpeError, GpeSolver, WaveFunction};
use crate::potential::{AzimuthalPotential, CosineLens, Sampled, Sum, Trajectory};
use crate::taap::{lens_depth, tilt_for_frequency, RingGuide1D, TaapError};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use thiserror::Error;

/// Largest steady-state lag α/ω² of the cloud behind an accelerating trap.
/// Keeps the launch in the harmonic part of the trap.
pub const MAX_TRAP_LAG: f64 = 0.06;

/// Upper bound on the number of trap periods spent accelerating.
pub const MAX_LAUNCH_PERIODS: u32 = 64;

/// Grid angle of the co-moving frame's reference point.
pub const FRAME_ORIGIN: f64 = PI;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("invalid sequence: {}", .0.join("; "))]
    InvalidPlan(Vec<String>),
    #[error("launch to {target_rate:.4} rad/s is unachievable: {reason}")]
    Unachievable { target_rate: f64, reason: String },
    #[error("launch profile failed verification: residual rate error {rate_error:e}, lag {lag_error:e} rad")]
    VerificationFailed { rate_error: f64, lag_error: f64 },
    #[error("launch requires a trap but none is active")]
    NoTrap,
    #[error("trap frequency {0} rad/s cannot be produced by tilting the ring")]
    TrapTooStrong(f64),
    #[error(transparent)]
    Gpe(#[from] GpeError),
    #[error(transparent)]
    Taap(#[from] TaapError),
}

pub type Result<T> = std::result::Result<T, SequenceError>;

/// One step of an experimental sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stage {
    /// Hold in a lens trap of the given frequency (rad/s) for `duration` s.
    Hold { trap_frequency: f64, duration: f64 },
    /// Bang-bang acceleration of the active trap to `velocity` (m/s), then
    /// sudden removal of the trap. `max_tilt` bounds the usable force.
    Launch { velocity: f64, max_tilt: f64 },
    /// Free propagation in the guide.
    Expand { duration: f64 },
    /// Lens pulse from tilting the ring by `tilt` (rad) for `duration` s.
    LensPulse { tilt: f64, duration: f64 },
    /// Time-of-flight imaging after release; no further propagation.
    Release { tof: f64 },
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Hold { .. } => "hold",
            Stage::Launch { .. } => "launch",
            Stage::Expand { .. } => "expand",
            Stage::LensPulse { .. } => "lens",
            Stage::Release { .. } => "release",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequencePlan {
    /// Spacing of trace samples within a stage, s.
    pub sample_interval: f64,
    /// Initial trap centre, rad.
    pub start_angle: f64,
    pub stages: Vec<Stage>,
}

impl Default for SequencePlan {
    fn default() -> Self {
        Self {
            sample_interval: 0.01,
            start_angle: 0.0,
            stages: vec![
                Stage::Launch { velocity: 0.031, max_tilt: 0.15 },
                Stage::Expand { duration: 0.066 },
                Stage::LensPulse { tilt: 0.089, duration: 0.017 },
                Stage::Expand { duration: 0.2 },
                Stage::Release { tof: 0.0053 },
            ],
        }
    }
}

impl SequencePlan {
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            out.push(("sequence.sample_interval".into(), "must be > 0".into()));
        }
        if !self.start_angle.is_finite() {
            out.push(("sequence.start_angle".into(), "must be finite".into()));
        }
        let launches = self.stages.iter().filter(|s| matches!(s, Stage::Launch { .. })).count();
        if launches != 1 {
            out.push(("sequence.stages".into(), format!("must contain exactly one launch, found {launches}")));
        }
        let mut expanded = false;
        for (i, stage) in self.stages.iter().enumerate() {
            let field = |name: &str| format!("sequence.stages.{i}.{name}");
            let non_negative = |v: f64| v >= 0.0 && v.is_finite();
            match *stage {
                Stage::Hold { trap_frequency, duration } => {
                    if !(trap_frequency > 0.0 && trap_frequency.is_finite()) {
                        out.push((field("trap_frequency"), "must be > 0".into()));
                    }
                    if !non_negative(duration) {
                        out.push((field("duration"), "must be >= 0".into()));
                    }
                }
                Stage::Launch { velocity, max_tilt } => {
                    if !velocity.is_finite() {
                        out.push((field("velocity"), "must be finite".into()));
                    }
                    if !(max_tilt > 0.0 && max_tilt < PI / 2.0) {
                        out.push((field("max_tilt"), "must lie in (0, π/2)".into()));
                    }
                }
                Stage::Expand { duration } => {
                    if !non_negative(duration) {
                        out.push((field("duration"), "must be >= 0".into()));
                    }
                    expanded = true;
                }
                Stage::LensPulse { tilt, duration } => {
                    if !(tilt >= 0.0 && tilt < FRAC_PI_4) {
                        out.push((field("tilt"), "must lie in [0, π/4)".into()));
                    }
                    if !non_negative(duration) {
                        out.push((field("duration"), "must be >= 0".into()));
                    }
                    if !expanded {
                        out.push((field("kind"), "a lens pulse must follow an expansion".into()));
                    }
                }
                Stage::Release { tof } => {
                    if !non_negative(tof) {
                        out.push((field("tof"), "must be >= 0".into()));
                    }
                }
            }
        }
        out
    }

    /// Index of the last lens pulse.
    pub fn lens_index(&self) -> Option<usize> {
        self.stages.iter().rposition(|s| matches!(s, Stage::LensPulse { .. }))
    }

    pub fn lens_tilt(&self) -> Option<f64> {
        self.lens_index().map(|i| match self.stages[i] {
            Stage::LensPulse { tilt, .. } => tilt,
            _ => unreachable!(),
        })
    }

    /// Copy of the plan with the last lens pulse set to `tilt`.
    pub fn with_lens_tilt(&self, tilt: f64) -> Self {
        let mut plan = self.clone();
        if let Some(i) = plan.lens_index() {
            if let Stage::LensPulse { tilt: t, .. } = &mut plan.stages[i] {
                *t = tilt;
            }
        }
        plan
    }
}

/// Constant-acceleration launch lasting an integer number of trap periods,
/// which leaves no sloshing in a harmonic trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangBangProfile {
    /// rad/s
    pub target_rate: f64,
    /// rad/s
    pub trap_frequency: f64,
    pub periods: u32,
    /// Switch-on at t = 0, switch-off at `duration`, s.
    pub duration: f64,
    /// rad/s²
    pub angular_acceleration: f64,
}

impl BangBangProfile {
    pub fn is_empty(&self) -> bool {
        self.periods == 0
    }

    /// Trap-centre trajectory starting at `start_time` from `angle` and `rate`.
    pub fn trajectory(&self, start_time: f64, angle: f64, rate: f64) -> Trajectory {
        Trajectory {
            start_time,
            angle,
            rate,
            acceleration: self.angular_acceleration,
            acceleration_duration: self.duration,
        }
    }
}

/// Plans the launch of a cloud at rest in a trap of `trap_frequency` to the
/// angular rate `target_rate`. The number of periods is the smallest one that
/// keeps the lag α/ω² below [`MAX_TRAP_LAG`] and the tangential acceleration
/// α R below g sin(`max_tilt`). The profile is checked by integrating the
/// trapped motion.
pub fn plan_bang_bang(
    target_rate: f64,
    trap_frequency: f64,
    max_tilt: f64,
    radius: f64,
    constants: &PhysicalConstants,
) -> Result<BangBangProfile> {
    let empty = BangBangProfile {
        target_rate,
        trap_frequency,
        periods: 0,
        duration: 0.0,
        angular_acceleration: 0.0,
    };
    if target_rate == 0.0 {
        return Ok(empty);
    }
    let unachievable = |reason: String| SequenceError::Unachievable { target_rate, reason };
    if !(trap_frequency > 0.0) {
        return Err(unachievable(format!("trap frequency {trap_frequency} must be positive")));
    }
    let force_limit = constants.gravity * max_tilt.sin() / radius;
    let period = TAU / trap_frequency;
    let periods = (1..=MAX_LAUNCH_PERIODS)
        .find(|&n| {
            let alpha = target_rate.abs() / (n as f64 * period);
            alpha / (trap_frequency * trap_frequency) <= MAX_TRAP_LAG && alpha <= force_limit
        })
        .ok_or_else(|| {
            let alpha = target_rate.abs() / (MAX_LAUNCH_PERIODS as f64 * period);
            unachievable(format!(
                "needs {:.3e} m/s² over {MAX_LAUNCH_PERIODS} periods, limit g·sin(max_tilt) = {:.3e} m/s² and lag {:.3} rad",
                alpha * radius,
                force_limit * radius,
                alpha / (trap_frequency * trap_frequency)
            ))
        })?;
    let duration = periods as f64 * period;
    let profile = BangBangProfile {
        target_rate,
        trap_frequency,
        periods,
        duration,
        angular_acceleration: target_rate / duration,
    };
    verify_launch(&profile)?;
    Ok(profile)
}

/// Integrates x'' = −ω²(x − c(t)) through the launch with RK4 and checks that
/// the cloud ends at rest relative to the trap.
fn verify_launch(profile: &BangBangProfile) -> Result<()> {
    let w2 = profile.trap_frequency * profile.trap_frequency;
    let a = profile.angular_acceleration;
    let steps = 2000 * profile.periods as usize;
    let h = profile.duration / steps as f64;
    let center = |t: f64| 0.5 * a * t * t;
    let deriv = |t: f64, x: f64, v: f64| (v, -w2 * (x - center(t)));
    let (mut x, mut v) = (0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * h;
        let (k1x, k1v) = deriv(t, x, v);
        let (k2x, k2v) = deriv(t + 0.5 * h, x + 0.5 * h * k1x, v + 0.5 * h * k1v);
        let (k3x, k3v) = deriv(t + 0.5 * h, x + 0.5 * h * k2x, v + 0.5 * h * k2v);
        let (k4x, k4v) = deriv(t + h, x + h * k3x, v + h * k3v);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    let rate_error = (v - profile.target_rate).abs() / profile.target_rate.abs();
    let lag_error = (x - center(profile.duration)).abs();
    if rate_error > 1e-6 || lag_error * profile.trap_frequency > 1e-6 * profile.target_rate.abs() {
        return Err(SequenceError::VerificationFailed { rate_error, lag_error });
    }
    Ok(())
}

/// Residual sloshing energy ½ m R² (δφ̇² + ω² δφ²) of a centre-of-mass offset.
pub fn sloshing_energy(offset: f64, rate_offset: f64, frequency: f64, radius: f64, mass: f64) -> f64 {
    0.5 * mass * radius * radius * (rate_offset * rate_offset + frequency * frequency * offset * offset)
}

/// Size after a ballistic time of flight: sqrt(size² + (v_rms·tof)²).
pub fn emulate_tof(size: f64, velocity_spread: f64, tof: f64) -> f64 {
    (size * size + (velocity_spread * tof).powi(2)).sqrt()
}

/// The ripple of the guide seen from the co-moving frame.
struct RippleInFrame<'a> {
    ripple: &'a Sampled,
    frame: Trajectory,
}

impl AzimuthalPotential for RippleInFrame<'_> {
    fn value(&self, phi: f64, t: f64) -> f64 {
        self.ripple.value(phi - FRAME_ORIGIN + self.frame.angle_at(t), t)
    }
    fn slope(&self, phi: f64, t: f64) -> f64 {
        self.ripple.slope(phi - FRAME_ORIGIN + self.frame.angle_at(t), t)
    }
}

/// Inertial potential m R² α·wrap(φ − π) of a uniformly accelerating frame.
struct FrameInertia {
    torque: f64,
}

impl AzimuthalPotential for FrameInertia {
    fn value(&self, phi: f64, _t: f64) -> f64 {
        self.torque * wrap_pi(phi - FRAME_ORIGIN)
    }
    fn slope(&self, _phi: f64, _t: f64) -> f64 {
        self.torque
    }
    fn is_static(&self) -> bool {
        true
    }
    fn is_flat(&self) -> bool {
        self.torque == 0.0
    }
}

/// Condensate order parameter in the co-moving frame and its propagator.
#[derive(Debug, Clone)]
pub struct Condensate {
    pub psi: WaveFunction,
    pub solver: GpeSolver,
}

#[derive(Debug, Clone)]
pub enum Matter {
    Thermal(ParticleEnsemble),
    Condensate(Condensate),
}

impl Matter {
    pub fn kind(&self) -> MatterKind {
        match self {
            Matter::Thermal(_) => MatterKind::Thermal,
            Matter::Condensate(_) => MatterKind::Bec,
        }
    }
}

/// Matter plus the programmed frame (nominal cloud-centre trajectory).
#[derive(Debug, Clone)]
pub struct SequenceState {
    pub time: f64,
    pub frame_angle: f64,
    pub frame_rate: f64,
    /// Frequency of the active trap, if any.
    pub trap: Option<f64>,
    pub matter: Matter,
}

/// One point of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub stage: usize,
    pub label: String,
    /// Thermal: 1/e radius. Condensate: Thomas-Fermi half-length (NaN when
    /// the fit fails). Metres of arc.
    pub size: f64,
    /// Arc-length standard deviation, m.
    pub rms: f64,
    /// Centre of mass in [0, 2π), lab frame.
    pub com: f64,
    /// Centre-of-mass angular velocity, lab frame, rad/s.
    pub com_rate: f64,
    /// Energy per atom in the co-moving frame, J.
    pub energy: f64,
    /// False when the cloud has wrapped or the size fit failed.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub kind: MatterKind,
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn new(kind: MatterKind) -> Self {
        Self { kind, samples: Vec::new() }
    }

    /// Valid expansion samples after the last lens pulse.
    pub fn post_lens(&self) -> Vec<&TraceSample> {
        let lens = self.samples.iter().rposition(|s| s.label == "lens");
        let Some(last_lens) = lens else { return Vec::new() };
        let lens_stage = self.samples[last_lens].stage;
        self.samples
            .iter()
            .filter(|s| s.stage > lens_stage && s.label == "expand" && s.valid)
            .collect()
    }

    /// Times and the size measure used for energy fits: the rms width for a
    /// thermal cloud, the Thomas-Fermi half-length for a condensate.
    pub fn fit_series(samples: &[&TraceSample], kind: MatterKind) -> (Vec<f64>, Vec<f64>) {
        samples
            .iter()
            .map(|s| (s.t, if kind == MatterKind::Thermal { s.rms } else { s.size }))
            .unzip()
    }

    /// Post-lens fit series.
    pub fn post_lens_series(&self) -> (Vec<f64>, Vec<f64>) {
        Self::fit_series(&self.post_lens(), self.kind)
    }
}

/// Runs sequences for one ring and set of solver parameters.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub constants: PhysicalConstants,
    pub radius: f64,
    pub transverse_frequency: f64,
    pub ripple: Option<Sampled>,
    pub solver: SolverParams,
    pub sample_interval: f64,
}

impl Simulator {
    pub fn new(config: &RunConfig, guide: &RingGuide1D) -> Self {
        let ripple = (!guide.is_flat(&config.constants)).then(|| guide.ripple());
        Self {
            constants: config.constants,
            radius: guide.radius,
            transverse_frequency: guide.transverse_frequency,
            ripple,
            solver: config.solver,
            sample_interval: config.sequence.sample_interval,
        }
    }

    fn trap_tilt(&self, frequency: f64) -> Result<f64> {
        tilt_for_frequency(frequency, self.radius, &self.constants).ok_or(SequenceError::TrapTooStrong(frequency))
    }

    /// Prepares the configured matter at rest in its trap at `start_angle`.
    pub fn prepare(&self, matter: &MatterConfig, seed: u64, start_angle: f64) -> Result<SequenceState> {
        match matter.kind {
            MatterKind::Thermal => {
                let spec = &matter.thermal;
                self.trap_tilt(spec.trap_frequency)?;
                let trap = HarmonicTrap { frequency: spec.trap_frequency, center: start_angle };
                let ens = sample_thermal(
                    spec.temperature,
                    &trap,
                    self.solver.ensemble_size,
                    seed,
                    self.radius,
                    &self.constants,
                );
                Ok(self.state(Matter::Thermal(ens), start_angle, spec.trap_frequency))
            }
            MatterKind::Bec => {
                let spec = &matter.bec;
                let tilt = self.trap_tilt(spec.trap_frequency)?;
                let g1d = effective_g1d(spec.transverse_frequency.unwrap_or(self.transverse_frequency), &self.constants);
                let solver = GpeSolver::new(self.solver.grid_points, self.radius, g1d, self.constants)?;
                let frame = Trajectory::fixed(start_angle);
                let potential = self.frame_potential(lens_depth(tilt, self.radius, &self.constants), 0.0, frame);
                let psi = solver.ground_state(
                    &potential,
                    spec.atoms,
                    self.solver.time_step,
                    self.solver.imaginary_time_tolerance,
                    self.solver.max_imaginary_steps(),
                )?;
                Ok(self.state(Matter::Condensate(Condensate { psi, solver }), start_angle, spec.trap_frequency))
            }
        }
    }

    /// Wraps prepared matter into a state at t = 0.
    pub fn state(&self, matter: Matter, start_angle: f64, trap_frequency: f64) -> SequenceState {
        SequenceState { time: 0.0, frame_angle: start_angle, frame_rate: 0.0, trap: Some(trap_frequency), matter }
    }

    fn lab_potential(&self, depth: f64, frame: Trajectory) -> Sum<'_> {
        let mut sum = Sum::new();
        if depth != 0.0 {
            sum.push(Box::new(CosineLens { depth, center: frame }));
        }
        if let Some(r) = &self.ripple {
            sum.push(Box::new(r.clone()));
        }
        sum
    }

    fn frame_potential(&self, depth: f64, acceleration: f64, frame: Trajectory) -> Sum<'_> {
        let mut sum = Sum::new();
        if depth != 0.0 {
            sum.push(Box::new(CosineLens { depth, center: Trajectory::fixed(FRAME_ORIGIN) }));
        }
        if acceleration != 0.0 {
            let torque = self.constants.atom_mass * self.radius * self.radius * acceleration;
            sum.push(Box::new(FrameInertia { torque }));
        }
        if let Some(r) = &self.ripple {
            sum.push(Box::new(RippleInFrame { ripple: r, frame }));
        }
        sum
    }

    /// Observation of the current state.
    pub fn observe(&self, state: &SequenceState, stage: usize, label: &str) -> TraceSample {
        match &state.matter {
            Matter::Thermal(ens) => {
                let cs = cloud_size(ens);
                TraceSample {
                    t: state.time,
                    stage,
                    label: label.to_string(),
                    size: cs.r_1e,
                    rms: cs.sigma,
                    com: cs.com,
                    com_rate: cs.com_rate,
                    energy: ens.kinetic_energy(self.constants.atom_mass, cs.com_rate),
                    valid: !cs.wrapped,
                }
            }
            Matter::Condensate(c) => {
                let frame = Trajectory::uniform(state.time, state.frame_angle, state.frame_rate);
                let obs = c.solver.observe(&c.psi, &self.frame_potential(0.0, 0.0, frame), state.time);
                TraceSample {
                    t: state.time,
                    stage,
                    label: label.to_string(),
                    size: obs.tf_radius.unwrap_or(f64::NAN),
                    rms: obs.rms_width,
                    com: wrap_angle(state.frame_angle + obs.com_angle - FRAME_ORIGIN),
                    com_rate: state.frame_rate + obs.com_velocity,
                    energy: obs.energy_total / c.psi.atom_number,
                    valid: obs.tf_radius.is_some(),
                }
            }
        }
    }

    /// rms tangential velocity in the co-moving frame, m/s.
    fn velocity_spread(&self, state: &SequenceState) -> f64 {
        match &state.matter {
            Matter::Thermal(ens) => ens.velocity_spread(),
            Matter::Condensate(c) => {
                let frame = Trajectory::uniform(state.time, state.frame_angle, state.frame_rate);
                let obs = c.solver.observe(&c.psi, &self.frame_potential(0.0, 0.0, frame), state.time);
                (2.0 * obs.energy_kinetic / (c.psi.atom_number * self.constants.atom_mass)).sqrt()
            }
        }
    }

    /// Propagates through one segment with the lens `depth` centred on the
    /// programmed `frame`, sampling every `sample_interval`.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        state: &mut SequenceState,
        frame: Trajectory,
        depth: f64,
        duration: f64,
        stage: usize,
        label: &str,
        trace: &mut Trace,
    ) -> Result<()> {
        let dt = self.solver.time_step;
        let mut elapsed = 0.0;
        let mut next = self.sample_interval;
        loop {
            let end = if next < duration - 1e-12 { next } else { duration };
            let t0 = frame.start_time + elapsed;
            let span = end - elapsed;
            match &mut state.matter {
                Matter::Thermal(ens) => {
                    let pot = self.lab_potential(depth, frame);
                    step(ens, &pot, t0, span, dt, self.constants.atom_mass);
                }
                Matter::Condensate(c) => {
                    let pot = self.frame_potential(depth, frame.acceleration, frame);
                    c.solver.evolve(&mut c.psi, &pot, t0, span, dt)?;
                }
            }
            state.time = frame.start_time + end;
            state.frame_angle = frame.angle_at(state.time);
            state.frame_rate = frame.rate_at(state.time);
            if end >= duration {
                break;
            }
            trace.samples.push(self.observe(state, stage, label));
            elapsed = end;
            next += self.sample_interval;
        }
        Ok(())
    }

    /// Runs `stages`, numbering them from `first_index`. A sample is taken at
    /// the start of every stage and every `sample_interval` within it.
    pub fn run_stages(
        &self,
        state: &mut SequenceState,
        stages: &[Stage],
        first_index: usize,
        trace: &mut Trace,
    ) -> Result<()> {
        for (k, stage) in stages.iter().enumerate() {
            let index = first_index + k;
            let label = stage.label();
            let coasting = Trajectory::uniform(state.time, state.frame_angle, state.frame_rate);
            match *stage {
                Stage::Hold { trap_frequency, duration } => {
                    trace.samples.push(self.observe(state, index, label));
                    let depth = lens_depth(self.trap_tilt(trap_frequency)?, self.radius, &self.constants);
                    state.trap = Some(trap_frequency);
                    self.advance(state, coasting, depth, duration, index, label, trace)?;
                }
                Stage::Launch { velocity, max_tilt } => {
                    trace.samples.push(self.observe(state, index, label));
                    let trap_frequency = state.trap.ok_or(SequenceError::NoTrap)?;
                    let depth = lens_depth(self.trap_tilt(trap_frequency)?, self.radius, &self.constants);
                    let profile =
                        plan_bang_bang(velocity / self.radius, trap_frequency, max_tilt, self.radius, &self.constants)?;
                    let frame = profile.trajectory(state.time, state.frame_angle, state.frame_rate);
                    self.advance(state, frame, depth, profile.duration, index, label, trace)?;
                    state.trap = None;
                }
                Stage::Expand { duration } => {
                    trace.samples.push(self.observe(state, index, label));
                    state.trap = None;
                    self.advance(state, coasting, 0.0, duration, index, label, trace)?;
                }
                Stage::LensPulse { tilt, duration } => {
                    trace.samples.push(self.observe(state, index, label));
                    let depth = lens_depth(tilt, self.radius, &self.constants);
                    self.advance(state, coasting, depth, duration, index, label, trace)?;
                }
                Stage::Release { tof } => {
                    let mut sample = self.observe(state, index, label);
                    let v = self.velocity_spread(state);
                    sample.size = emulate_tof(sample.size, std::f64::consts::SQRT_2 * v, tof);
                    sample.rms = emulate_tof(sample.rms, v, tof);
                    trace.samples.push(sample);
                }
            }
        }
        Ok(())
    }

    /// Runs a complete plan and appends a final sample.
    pub fn run(&self, mut state: SequenceState, plan: &SequencePlan) -> Result<(SequenceState, Trace)> {
        let problems = plan.violations();
        if !problems.is_empty() {
            return Err(SequenceError::InvalidPlan(problems.into_iter().map(|(f, m)| format!("{f}: {m}")).collect()));
        }
        let mut trace = Trace::new(state.matter.kind());
        self.run_stages(&mut state, &plan.stages, 0, &mut trace)?;
        self.finish(&state, plan.stages.len(), &mut trace);
        Ok((state, trace))
    }

    /// Appends the end-of-sequence sample.
    pub fn finish(&self, state: &SequenceState, stage_count: usize, trace: &mut Trace) {
        let last = stage_count.saturating_sub(1);
        if trace.samples.last().is_some_and(|s| s.label == "release") {
            return;
        }
        trace.samples.push(self.observe(state, last, "end"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = 485e-6;

    #[test]
    fn zero_velocity_gives_empty_profile() {
        let c = PhysicalConstants::default();
        let p = plan_bang_bang(0.0, 94.0, 0.1, R, &c).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.duration, 0.0);
    }

    #[test]
    fn launch_lasts_whole_periods() {
        let c = PhysicalConstants::default();
        let omega = TAU * 15.0;
        let p = plan_bang_bang(0.031 / R, omega, 0.15, R, &c).unwrap();
        assert_eq!(p.periods, 2);
        assert!((p.duration - 2.0 * TAU / omega).abs() < 1e-15);
        assert!((p.angular_acceleration * p.duration - 0.031 / R).abs() < 1e-9);
        assert!(p.angular_acceleration / (omega * omega) <= MAX_TRAP_LAG);
    }

    #[test]
    fn excessive_velocity_is_unachievable() {
        let c = PhysicalConstants::default();
        let err = plan_bang_bang(50.0 / R, 94.0, 0.01, R, &c).unwrap_err();
        assert!(matches!(err, SequenceError::Unachievable { .. }));
    }

    #[test]
    fn tof_broadening() {
        assert!((emulate_tof(50e-6, 4.24e-3, 5.3e-3) - 54.8e-6).abs() < 0.1e-6);
        assert_eq!(emulate_tof(3e-5, 1.0, 0.0), 3e-5);
    }

    #[test]
    fn plan_invariants() {
        let plan = SequencePlan::default();
        assert!(plan.violations().is_empty());
        let mut bad = plan.clone();
        bad.stages.swap(1, 2);
        assert!(!bad.violations().is_empty());
        let mut bad = plan.clone();
        bad.stages.remove(0);
        assert!(!bad.violations().is_empty());
        assert!(!plan.with_lens_tilt(1.0).violations().is_empty());
        assert_eq!(plan.with_lens_tilt(0.05).lens_tilt(), Some(0.05));
    }

    #[test]
    fn stages_round_trip_through_toml() {
        let plan = SequencePlan::default();
        let text = toml::to_string(&plan).unwrap();
        let back: SequencePlan = toml::from_str(&text).unwrap();
        assert_eq!(plan, back);
        let bad = text.replace("tof = ", "tof_ms = ");
        assert!(toml::from_str::<SequencePlan>(&bad).is_err());
    }

    #[test]
    fn sloshing_energy_of_a_still_centred_cloud_is_zero() {
        assert_eq!(sloshing_energy(0.0, 0.0, 94.0, R, 1e-25), 0.0);
    }
}
