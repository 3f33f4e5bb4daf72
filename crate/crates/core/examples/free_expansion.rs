//! Dispersion of a non-interacting Gaussian wave packet on the ring, compared
//! with the analytic width sigma(t) = sigma0 sqrt(1 + (hbar t / (2 m sigma0^2))^2).
//!
//! cargo run --release --example free_expansion

use ringlens::gpe::{GpeSolver, WaveFunction};
use ringlens::potential::Flat;
use ringlens::PhysicalConstants;
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let sigma0 = 5e-6;
    let solver = GpeSolver::new(8192, radius, 0.0, constants)?;
    // amplitude width sqrt(2) sigma0 gives a density of rms width sigma0
    let mut psi = WaveFunction::gaussian(8192, 1.0, radius, PI, std::f64::consts::SQRT_2 * sigma0, 0)?;
    let tau = 2.0 * constants.atom_mass * sigma0 * sigma0 / constants.hbar;
    println!("{:>8} {:>14} {:>14}", "t (ms)", "rms (um)", "analytic (um)");
    let mut t = 0.0;
    for _ in 0..6 {
        let obs = solver.observe(&psi, &Flat, t);
        let analytic = sigma0 * (1.0 + (t / tau).powi(2)).sqrt();
        println!("{:>8.1} {:>14.4} {:>14.4}", t * 1e3, obs.rms_width * 1e6, analytic * 1e6);
        solver.evolve(&mut psi, &Flat, t, 0.01, 1e-5)?;
        t += 0.01;
    }
    Ok(())
}
