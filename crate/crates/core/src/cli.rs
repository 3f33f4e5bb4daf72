//! Command-line driver. Every subcommand except `validate` writes its outputs
//! and a `<command>.manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

use crate::analysis::{
    collimating_tilt, fit_expansion, kinetic_energy, optimize_tilt, scan_lens, EnergyReport, ExpansionFit,
    LensExperiment, LensScan,
};
use crate::config::{validate, MatterKind, RunConfig};
use crate::io::{write_json, CsvTable, RunManifest};
use crate::sequence::{SequencePlan, Simulator, Stage, Trace};
use crate::taap::{calibrate_ring, reduce_to_guide, RingGuide1D, TaapModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Azimuthal samples of the reduced guide.
pub const GUIDE_SAMPLES: usize = 512;

/// Lens tilts of the standard scan: 0 to 150 mrad in 10 mrad steps.
pub fn default_tilts() -> Vec<f64> {
    (0..=15).map(|i| i as f64 * 0.01).collect()
}

#[derive(Debug, Parser)]
#[command(name = "ringlens", version, about = "Matter-wave lensing in ring waveguides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel scans.
    #[arg(long)]
    threads: Option<usize>,
    /// Dot-path override, e.g. `solver.grid_points=4096`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MapKind {
    /// V(φ) along the ring.
    Guide,
    /// V(x, 0, z) in the vertical plane through φ = 0.
    Plane,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Thermal,
    Bec,
}

impl From<KindArg> for MatterKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Thermal => MatterKind::Thermal,
            KindArg::Bec => MatterKind::Bec,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the trapping potential.
    PotentialMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "guide")]
        kind: MapKind,
        /// Points per axis (plane) or around the ring (guide).
        #[arg(long, default_value_t = GUIDE_SAMPLES)]
        samples: usize,
    },
    /// Condensate ground state in the configured hold trap.
    Groundstate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured sequence.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Free expansion of a thermal ensemble released from its trap.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// s
        #[arg(long, default_value_t = 0.2)]
        duration: f64,
    },
    /// Free evolution of a condensate released from its trap.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// s
        #[arg(long, default_value_t = 0.1)]
        duration: f64,
    },
    /// Fit the expansion model to a trace CSV.
    Fit {
        trace: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Ring radius, m.
        #[arg(long, default_value_t = 485e-6)]
        radius: f64,
        #[arg(long, value_enum, default_value = "thermal")]
        kind: KindArg,
        /// Size column; defaults to `rms_m` for thermal and `size_m` for bec traces.
        #[arg(long)]
        column: Option<String>,
        /// Ignore samples before this time, s.
        #[arg(long)]
        from: Option<f64>,
        /// Ignore samples after this time, s.
        #[arg(long)]
        to: Option<f64>,
        /// Restrict to rows with this `stage_label`.
        #[arg(long)]
        stage: Option<String>,
    },
    /// Kinetic energy as a function of lens tilt.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated tilts in rad; default 0 to 0.15 in 0.01 steps.
        #[arg(long, value_delimiter = ',')]
        tilts: Vec<f64>,
    },
    /// Golden-section search for the best lens tilt.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 0.15)]
        hi: f64,
        /// rad
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Lensed and unlensed expansion of a condensate and a thermal cloud.
    ReproFig3 {
        #[command(flatten)]
        common: Common,
    },
    /// Thermal-cloud kinetic energy versus lens tilt from 0 to 150 mrad.
    ReproFig4 {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Invalid(m) => eprintln!("invalid configuration:\n{m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::load(path).map_err(|e| Failure::Invalid(e.to_string()))?;
    for o in overrides {
        config = config.with_override(o).map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let violations = validate(&config);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(Failure::Invalid(lines.join("\n")));
    }
    Ok(config)
}

/// Output bookkeeping for one command.
struct Run {
    command: &'static str,
    out: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn start(command: &'static str, common: &Common) -> Result<(Self, RunConfig), Failure> {
        let config = load_config(&common.config, &common.overrides, common.seed)?;
        if let Some(n) = common.threads {
            if n == 0 {
                return Err(Failure::Usage("--threads must be positive".into()));
            }
            // The global pool can only be configured once per process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        let manifest = RunManifest::new(command, config.canonical_hash(), config.seed);
        Ok((Self { command, out: common.out.clone(), manifest, started: Instant::now() }, config))
    }

    fn log(&self, message: &str) {
        eprintln!("[{}] {message}", self.command);
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.manifest.outputs.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, table: &CsvTable) -> Result<(), Failure> {
        let p = self.path(name);
        table.write(&p).map_err(runtime)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let p = self.path(name);
        write_json(&p, value).map_err(runtime)
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.manifest.wall_time = self.started.elapsed().as_secs_f64();
        let p = self.out.join(format!("{}.manifest.json", self.command));
        write_json(&p, &self.manifest).map_err(runtime)?;
        self.log(&format!("done in {:.1} s", self.manifest.wall_time));
        Ok(())
    }
}

fn guide_for(config: &RunConfig) -> Result<RingGuide1D, Failure> {
    reduce_to_guide(&config.taap, &config.constants, GUIDE_SAMPLES).map_err(runtime)
}

fn experiment(config: &RunConfig, guide: &RingGuide1D, kind: MatterKind) -> Result<LensExperiment, Failure> {
    let sim = Simulator::new(config, guide);
    let mut matter = config.matter;
    matter.kind = kind;
    let state = sim.prepare(&matter, config.seed, config.sequence.start_angle).map_err(runtime)?;
    LensExperiment::new(sim, state, config.sequence.clone()).map_err(runtime)
}

/// Release-and-expand plan used by `ensemble` and `evolve`.
fn release_plan(config: &RunConfig, duration: f64) -> SequencePlan {
    SequencePlan {
        sample_interval: config.sequence.sample_interval,
        start_angle: config.sequence.start_angle,
        stages: vec![Stage::Launch { velocity: 0.0, max_tilt: 0.15 }, Stage::Expand { duration }],
    }
}

fn trace_table(trace: &Trace) -> CsvTable {
    let mut t = CsvTable::new(&["t_s", "size_m", "com_rad", "com_rad_per_s", "stage_label", "rms_m", "valid_flag"]);
    for s in &trace.samples {
        t.push(vec![
            s.t.into(),
            s.size.into(),
            s.com.into(),
            s.com_rate.into(),
            s.label.as_str().into(),
            s.rms.into(),
            s.valid.into(),
        ]);
    }
    t
}

#[derive(Serialize)]
struct FitSummary {
    kind: MatterKind,
    lens_tilt: Option<f64>,
    fit: Option<ExpansionFit>,
    energy: Option<EnergyReport>,
    error: Option<String>,
    final_com_rate: Option<f64>,
}

fn summarize(trace: &Trace, radius: f64, config: &RunConfig) -> FitSummary {
    let (t, size) = trace.post_lens_series();
    let result = fit_expansion(&t, &size, radius);
    let (fit, error) = match result {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    FitSummary {
        kind: trace.kind,
        lens_tilt: config.sequence.lens_tilt(),
        fit,
        energy: fit.map(|f| kinetic_energy(&f, radius, trace.kind, &config.constants)),
        error,
        final_com_rate: trace.samples.last().map(|s| s.com_rate),
    }
}

#[derive(Serialize)]
struct ScanReport<'a> {
    kind: MatterKind,
    best_tilt: Option<f64>,
    best_energy_nk: Option<f64>,
    cooling_factor: Option<f64>,
    scan: &'a LensScan,
}

fn scan_report<'a>(scan: &'a LensScan, kind: MatterKind, constants: &crate::PhysicalConstants) -> ScanReport<'a> {
    let best = scan.argmin();
    let reference = scan.reference();
    ScanReport {
        kind,
        best_tilt: best.map(|b| b.0),
        best_energy_nk: best.map(|b| constants.to_nanokelvin(b.1)),
        cooling_factor: best.zip(reference).map(|(b, r)| if b.1 > 0.0 { r.energy / b.1 } else { f64::INFINITY }),
        scan,
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config, overrides } => {
            load_config(&config, &overrides, None)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::PotentialMap { common, kind, samples } => {
            let (mut run, config) = Run::start("potential-map", &common)?;
            match kind {
                MapKind::Guide => {
                    if samples < 4 {
                        return Err(Failure::Usage("--samples must be at least 4".into()));
                    }
                    let guide = reduce_to_guide(&config.taap, &config.constants, samples).map_err(runtime)?;
                    run.log(&format!("ring radius {:.3e} m, height {:.3e} m", guide.radius, guide.height));
                    let mut t = CsvTable::new(&["phi_rad", "V_J"]);
                    for (j, v) in guide.potential.iter().enumerate() {
                        t.push(vec![guide.angle(j).into(), (*v).into()]);
                    }
                    run.csv("potential_map.csv", &t)?;
                }
                MapKind::Plane => {
                    if samples < 2 {
                        return Err(Failure::Usage("--samples must be at least 2".into()));
                    }
                    let taap = match config.taap.target_radius {
                        Some(r) => calibrate_ring(r, &config.taap, &config.constants).map_err(runtime)?,
                        None => config.taap,
                    };
                    let model = TaapModel::new(taap, config.constants);
                    let ring = model.locate_ring().map_err(runtime)?;
                    let half = 0.5 * ring.radius;
                    let n = samples.min(401);
                    let mut t = CsvTable::new(&["x_m", "y_m", "z_m", "V_J"]);
                    for i in 0..n {
                        for k in 0..n {
                            let x = ring.radius - half + 2.0 * half * i as f64 / (n - 1) as f64;
                            let z = ring.height - half + 2.0 * half * k as f64 / (n - 1) as f64;
                            let v = model.averaged(&Vector3::new(x, 0.0, z)).map_err(runtime)?;
                            t.push(vec![x.into(), 0.0.into(), z.into(), v.into()]);
                        }
                    }
                    run.csv("potential_map.csv", &t)?;
                }
            }
            run.finish()
        }
        Command::Groundstate { common } => {
            let (mut run, config) = Run::start("groundstate", &common)?;
            let guide = guide_for(&config)?;
            let sim = Simulator::new(&config, &guide);
            let mut matter = config.matter;
            matter.kind = MatterKind::Bec;
            let state = sim.prepare(&matter, config.seed, config.sequence.start_angle).map_err(runtime)?;
            let crate::sequence::Matter::Condensate(c) = &state.matter else { unreachable!() };
            let density = c.psi.density();
            let shift = config.sequence.start_angle - crate::sequence::FRAME_ORIGIN;
            let mut t = CsvTable::new(&["phi_rad", "density_per_m"]);
            let n = density.len();
            let offset = (shift / c.psi.dphi()).round() as isize;
            for j in 0..n {
                let src = (j as isize - offset).rem_euclid(n as isize) as usize;
                t.push(vec![c.psi.angle(j).into(), density[src].into()]);
            }
            run.csv("groundstate.csv", &t)?;
            let obs = sim.observe(&state, 0, "ground");
            #[derive(Serialize)]
            struct Ground {
                atoms: f64,
                interaction_j_m: f64,
                tf_radius_m: f64,
                rms_m: f64,
                com_rad: f64,
                energy_per_atom_j: f64,
            }
            run.json(
                "groundstate.json",
                &Ground {
                    atoms: c.psi.atom_number,
                    interaction_j_m: c.solver.interaction,
                    tf_radius_m: obs.size,
                    rms_m: obs.rms,
                    com_rad: obs.com,
                    energy_per_atom_j: obs.energy,
                },
            )?;
            run.finish()
        }
        Command::Simulate { common } => {
            let (mut run, config) = Run::start("simulate", &common)?;
            let guide = guide_for(&config)?;
            let sim = Simulator::new(&config, &guide);
            run.log(&format!("preparing {} matter", config.matter.kind.label()));
            let state = sim.prepare(&config.matter, config.seed, config.sequence.start_angle).map_err(runtime)?;
            run.log("running sequence");
            let (_, trace) = sim.run(state, &config.sequence).map_err(runtime)?;
            run.csv("trace.csv", &trace_table(&trace))?;
            run.json("summary.json", &summarize(&trace, guide.radius, &config))?;
            run.finish()
        }
        Command::Ensemble { common, duration } => {
            let (mut run, config) = Run::start("ensemble", &common)?;
            let guide = guide_for(&config)?;
            let sim = Simulator::new(&config, &guide);
            let mut matter = config.matter;
            matter.kind = MatterKind::Thermal;
            let state = sim.prepare(&matter, config.seed, config.sequence.start_angle).map_err(runtime)?;
            let (_, trace) = sim.run(state, &release_plan(&config, duration)).map_err(runtime)?;
            let mut t = CsvTable::new(&["t_s", "com_rad", "R_1e_m", "sigma_m", "wrapped_flag"]);
            for s in &trace.samples {
                t.push(vec![s.t.into(), s.com.into(), s.size.into(), s.rms.into(), (!s.valid).into()]);
            }
            run.csv("ensemble.csv", &t)?;
            run.finish()
        }
        Command::Evolve { common, duration } => {
            let (mut run, config) = Run::start("evolve", &common)?;
            let guide = guide_for(&config)?;
            let sim = Simulator::new(&config, &guide);
            let mut matter = config.matter;
            matter.kind = MatterKind::Bec;
            let state = sim.prepare(&matter, config.seed, config.sequence.start_angle).map_err(runtime)?;
            let (_, trace) = sim.run(state, &release_plan(&config, duration)).map_err(runtime)?;
            let mut t = CsvTable::new(&["t_s", "com_rad", "com_rad_per_s", "R_TF_m", "rms_m", "E_J"]);
            for s in &trace.samples {
                t.push(vec![s.t.into(), s.com.into(), s.com_rate.into(), s.size.into(), s.rms.into(), s.energy.into()]);
            }
            run.csv("evolve.csv", &t)?;
            run.finish()
        }
        Command::Fit { trace, out, radius, kind, column, from, to, stage } => {
            let started = Instant::now();
            let kind: MatterKind = kind.into();
            let (header, cols) = CsvTable::read_numeric(&trace).map_err(runtime)?;
            let column = column.unwrap_or_else(|| {
                if kind == MatterKind::Thermal && header.iter().any(|h| h == "rms_m") { "rms_m" } else { "size_m" }.into()
            });
            let find = |name: &str| {
                header.iter().position(|h| h == name).ok_or_else(|| Failure::Usage(format!("trace has no column `{name}`")))
            };
            let ti = find("t_s")?;
            let si = find(&column)?;
            let labels: Option<Vec<String>> = match (&stage, header.iter().position(|h| h == "stage_label")) {
                (Some(_), Some(li)) => {
                    let text = std::fs::read_to_string(&trace).map_err(runtime)?;
                    Some(text.lines().skip(1).filter(|l| !l.trim().is_empty()).map(|l| {
                        l.split(',').nth(li).unwrap_or("").trim().to_string()
                    }).collect())
                }
                (Some(_), None) => return Err(Failure::Usage("trace has no `stage_label` column".into())),
                _ => None,
            };
            let mut t = Vec::new();
            let mut s = Vec::new();
            for (row, (&time, &size)) in cols[ti].iter().zip(&cols[si]).enumerate() {
                let in_window = from.is_none_or(|f| time >= f) && to.is_none_or(|e| time <= e);
                let in_stage = match (&labels, &stage) {
                    (Some(l), Some(want)) => &l[row] == want,
                    _ => true,
                };
                if in_window && in_stage && size.is_finite() {
                    t.push(time);
                    s.push(size);
                }
            }
            let fit = fit_expansion(&t, &s, radius).map_err(runtime)?;
            let constants = crate::PhysicalConstants::default();
            #[derive(Serialize)]
            struct FitReport {
                column: String,
                radius_m: f64,
                fit: ExpansionFit,
                energy: EnergyReport,
            }
            let report = FitReport { column, radius_m: radius, energy: kinetic_energy(&fit, radius, kind, &constants), fit };
            let mut manifest = RunManifest::new("fit", hex_of_file(&trace)?, 0);
            let path = out.join("fit.json");
            write_json(&path, &report).map_err(runtime)?;
            manifest.outputs.push(path);
            manifest.wall_time = started.elapsed().as_secs_f64();
            write_json(&out.join("fit.manifest.json"), &manifest).map_err(runtime)
        }
        Command::Scan { common, tilts } => {
            let (mut run, config) = Run::start("scan", &common)?;
            let tilts = if tilts.is_empty() { default_tilts() } else { tilts };
            let guide = guide_for(&config)?;
            let kind = config.matter.kind;
            run.log(&format!("running sequence up to the lens for {} matter", kind.label()));
            let exp = experiment(&config, &guide, kind)?;
            run.log(&format!("scanning {} tilts", tilts.len()));
            let scan = scan_lens(&exp, &tilts);
            let mut t = CsvTable::new(&["delta_rad", "E_J", "E_nK", "fit_ok"]);
            for p in &scan.points {
                let (e, nk) = p.energy.map(|e| (e.energy, e.energy_nk)).unwrap_or((f64::NAN, f64::NAN));
                t.push(vec![p.tilt.into(), e.into(), nk.into(), p.fit_ok().into()]);
            }
            run.csv("scan.csv", &t)?;
            run.json("scan.json", &scan_report(&scan, kind, &config.constants))?;
            run.finish()
        }
        Command::Optimize { common, lo, hi, tolerance } => {
            let (mut run, config) = Run::start("optimize", &common)?;
            let guide = guide_for(&config)?;
            let kind = config.matter.kind;
            let exp = experiment(&config, &guide, kind)?;
            run.log("evaluating the unlensed reference");
            let reference = exp.evaluate(0.0).map_err(runtime)?;
            run.log(&format!("searching [{lo}, {hi}] to {tolerance} rad"));
            let (opt, outcome) = optimize_tilt(&exp, lo, hi, tolerance).map_err(runtime)?;
            let lens = exp.plan.lens_index().expect("experiment has a lens");
            let tau0: f64 = exp.plan.stages[..lens]
                .iter()
                .rev()
                .take_while(|s| matches!(s, Stage::Expand { .. }))
                .map(|s| if let Stage::Expand { duration } = s { *duration } else { 0.0 })
                .sum();
            let tau_lens = match exp.plan.stages[lens] {
                Stage::LensPulse { duration, .. } => duration,
                _ => unreachable!(),
            };
            #[derive(Serialize)]
            struct OptimizeReport {
                kind: MatterKind,
                best_tilt: f64,
                tolerance: f64,
                evaluations: usize,
                energy: EnergyReport,
                reference: EnergyReport,
                fit: ExpansionFit,
                point_source_tilt: Option<f64>,
            }
            run.json(
                "optimize.json",
                &OptimizeReport {
                    kind,
                    best_tilt: opt.tilt,
                    tolerance,
                    evaluations: opt.evaluations,
                    energy: outcome.energy.relative_to(&reference.energy),
                    reference: reference.energy,
                    fit: outcome.fit,
                    point_source_tilt: collimating_tilt(tau0, tau_lens, guide.radius, &config.constants),
                },
            )?;
            run.finish()
        }
        Command::ReproFig3 { common } => {
            let (mut run, config) = Run::start("repro-fig3", &common)?;
            let guide = guide_for(&config)?;
            let tilt = config.sequence.lens_tilt().ok_or_else(|| Failure::Invalid("sequence has no lens pulse".into()))?;
            let mut table =
                CsvTable::new(&["series_label", "t_s", "size_m", "rms_m", "com_rad", "stage_label", "valid_flag"]);
            #[derive(Serialize)]
            struct Pair {
                kind: MatterKind,
                lens_tilt: f64,
                lensed: EnergyReport,
                free: EnergyReport,
                lensed_fit: ExpansionFit,
                free_fit: ExpansionFit,
            }
            let mut pairs = Vec::new();
            for kind in [MatterKind::Bec, MatterKind::Thermal] {
                run.log(&format!("{} cloud", kind.label()));
                let exp = experiment(&config, &guide, kind)?;
                let free = exp.evaluate(0.0).map_err(runtime)?;
                let lensed = exp.evaluate(tilt).map_err(runtime)?;
                for (name, outcome) in [("free", &free), ("lens", &lensed)] {
                    let series = format!("{}_{name}", kind.label());
                    for s in &outcome.trace.samples {
                        table.push(vec![
                            series.as_str().into(),
                            s.t.into(),
                            s.size.into(),
                            s.rms.into(),
                            s.com.into(),
                            s.label.as_str().into(),
                            s.valid.into(),
                        ]);
                    }
                }
                pairs.push(Pair {
                    kind,
                    lens_tilt: tilt,
                    lensed: lensed.energy.relative_to(&free.energy),
                    free: free.energy,
                    lensed_fit: lensed.fit,
                    free_fit: free.fit,
                });
            }
            run.csv("fig3.csv", &table)?;
            run.json("fig3.json", &pairs)?;
            run.finish()
        }
        Command::ReproFig4 { common } => {
            let (mut run, config) = Run::start("repro-fig4", &common)?;
            let guide = guide_for(&config)?;
            let exp = experiment(&config, &guide, MatterKind::Thermal)?;
            run.log("scanning 16 tilts");
            let scan = scan_lens(&exp, &default_tilts());
            let mut t = CsvTable::new(&["delta_rad", "E_nK"]);
            for p in &scan.points {
                t.push(vec![p.tilt.into(), p.energy.map_or(f64::NAN, |e| e.energy_nk).into()]);
            }
            run.csv("fig4.csv", &t)?;
            run.json("fig4.json", &scan_report(&scan, MatterKind::Thermal, &config.constants))?;
            run.finish()
        }
    }
}

fn hex_of_file(path: &Path) -> Result<String, Failure> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(runtime)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
