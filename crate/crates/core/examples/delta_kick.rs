//! Delta-kick collimation of a point source: the exact harmonic kick against
//! integration through the cosine lens, at the tilt given by
//! tan(w tau_L) = 1/(w tau_0).
//!
//! cargo run --release --example delta_kick

use ringlens::analysis::collimating_tilt;
use ringlens::ensemble::{step, thin_kick, ParticleEnsemble};
use ringlens::potential::{CosineLens, Flat, Trajectory};
use ringlens::taap::{lens_depth, lens_frequency};
use ringlens::PhysicalConstants;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let (tau0, tau_lens) = (0.066, 0.017);
    let tilt = collimating_tilt(tau0, tau_lens, radius, &constants).ok_or("no collimating tilt")?;
    let omega = lens_frequency(tilt, radius, &constants);
    println!("collimating tilt {:.2} mrad, lens frequency {:.2} rad/s", tilt * 1e3, omega);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let v = Normal::new(0.0, 0.5)?;
    let velocities: Vec<f64> = (0..5000).map(|_| v.sample(&mut rng)).collect();
    let mut ens = ParticleEnsemble::new(vec![0.0; velocities.len()], velocities, radius);
    let spread0 = ens.velocity_spread();
    step(&mut ens, &Flat, 0.0, tau0, 1e-5, constants.atom_mass);

    let mut kicked = ens.clone();
    thin_kick(&mut kicked, omega, tau_lens, 0.0);
    let lens = CosineLens { depth: lens_depth(tilt, radius, &constants), center: Trajectory::fixed(0.0) };
    step(&mut ens, &lens, tau0, tau_lens, 1e-5, constants.atom_mass);

    let worst = ens
        .angles
        .iter()
        .zip(&kicked.angles)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("velocity spread before {:.3e} m/s", spread0);
    println!("after harmonic kick    {:.3e} m/s", kicked.velocity_spread());
    println!("after cosine lens      {:.3e} m/s", ens.velocity_spread());
    println!("largest angle difference kick vs lens {:.2e} rad", worst);
    Ok(())
}
