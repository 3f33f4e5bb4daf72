//! Condensate ground state in the azimuthal lens trap and its Thomas-Fermi
//! radius compared with the closed form for a harmonic trap.
//!
//! cargo run --release --example ground_state

use ringlens::config::SolverParams;
use ringlens::gpe::{effective_g1d, ground_state, GpeSolver, LensTrap};
use ringlens::potential::{CosineLens, Trajectory};
use ringlens::taap::{lens_depth, tilt_for_frequency, RingGuide1D};
use ringlens::PhysicalConstants;
use std::f64::consts::{PI, TAU};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let trap_frequency = TAU * 15.0;
    let atoms = 1e4;
    let g1d = effective_g1d(5000.0, &constants);
    let params = SolverParams { grid_points: 8192, time_step: 2e-5, ..SolverParams::default() };

    let tilt = tilt_for_frequency(trap_frequency, radius, &constants).ok_or("trap too stiff")?;
    let guide = RingGuide1D::ideal(radius, 5000.0, 256);
    let psi = ground_state(&guide, &LensTrap { tilt, center: PI }, atoms, &params, &constants, g1d)?;

    let solver = GpeSolver::new(params.grid_points, radius, g1d, constants)?;
    let lens = CosineLens { depth: lens_depth(tilt, radius, &constants), center: Trajectory::fixed(PI) };
    let obs = solver.observe(&psi, &lens, 0.0);

    let m = constants.atom_mass;
    let mu = (0.75 * g1d * atoms * trap_frequency * (m / 2.0).sqrt()).powf(2.0 / 3.0);
    let r_tf = (2.0 * mu / m).sqrt() / trap_frequency;
    println!("chemical potential (TF)  {:.2} nK", constants.to_nanokelvin(mu));
    println!("TF half-length fitted    {:.2} um", obs.tf_radius.unwrap_or(f64::NAN) * 1e6);
    println!("TF half-length predicted {:.2} um", r_tf * 1e6);
    println!("rms width                {:.2} um", obs.rms_width * 1e6);
    let above_bottom = obs.energy_total / atoms + lens_depth(tilt, radius, &constants);
    println!("energy per atom          {:.2} nK above the trap bottom", constants.to_nanokelvin(above_bottom));
    Ok(())
}
