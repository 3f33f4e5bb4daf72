//! Samples a thermal cloud, lets it expand freely, fits the expansion and
//! recovers the temperature from the fitted velocity spread.
//!
//! cargo run --release --example thermal_ensemble

use ringlens::analysis::{fit_expansion, kinetic_energy};
use ringlens::ensemble::{cloud_size, sample_thermal, step, HarmonicTrap};
use ringlens::potential::Flat;
use ringlens::{MatterKind, PhysicalConstants};
use std::f64::consts::TAU;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let temperature = 116e-9;
    let trap = HarmonicTrap { frequency: TAU * 15.0, center: 0.0 };
    let mut ens = sample_thermal(temperature, &trap, 100_000, 7, radius, &constants);

    let mut times = Vec::new();
    let mut sizes = Vec::new();
    let mut t = 0.0;
    for _ in 0..21 {
        let size = cloud_size(&ens);
        times.push(t);
        sizes.push(size.sigma);
        step(&mut ens, &Flat, t, 0.01, 1e-5, constants.atom_mass);
        t += 0.01;
    }
    let fit = fit_expansion(&times, &sizes, radius)?;
    let energy = kinetic_energy(&fit, radius, MatterKind::Thermal, &constants);
    println!("initial rms size   {:.2} um", sizes[0] * 1e6);
    println!("final rms size     {:.2} um", sizes[sizes.len() - 1] * 1e6);
    println!("fitted rate        {:.4} rad/s", fit.delta_phi_rate);
    println!("kinetic energy     {:.2} nK", energy.energy_nk);
    println!("T_rms              {:.2} nK (sampled at {:.2} nK)", energy.t_rms * 1e9, temperature * 1e9);
    Ok(())
}
