//! Plans a bang-bang launch to 31 mm/s and runs it on a thermal cloud,
//! reporting the final velocity and the residual sloshing energy.
//!
//! cargo run --release --example bang_bang_launch

use ringlens::config::RunConfig;
use ringlens::sequence::{plan_bang_bang, sloshing_energy, SequencePlan, Simulator, Stage};
use ringlens::taap::RingGuide1D;
use ringlens::PhysicalConstants;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let mut config = RunConfig::default();
    config.solver.ensemble_size = 20_000;
    let trap = config.matter.thermal.trap_frequency;
    let target = 0.031 / radius;

    let profile = plan_bang_bang(target, trap, 0.15, radius, &constants)?;
    println!(
        "{} trap periods, {:.2} ms at {:.1} rad/s^2",
        profile.periods,
        profile.duration * 1e3,
        profile.angular_acceleration
    );

    let guide = RingGuide1D::ideal(radius, 3000.0, 256);
    let sim = Simulator::new(&config, &guide);
    let state = sim.prepare(&config.matter, config.seed, 0.0)?;
    let plan = SequencePlan {
        sample_interval: 0.01,
        start_angle: 0.0,
        stages: vec![Stage::Launch { velocity: 0.031, max_tilt: 0.15 }],
    };
    let (end, trace) = sim.run(state, &plan)?;
    let last = trace.samples.last().expect("trace has a final sample");
    let offset = ringlens::constants::wrap_pi(last.com - end.frame_angle);
    let slosh = sloshing_energy(offset, last.com_rate - target, trap, radius, constants.atom_mass);
    println!("final velocity   {:.3} mm/s (target 31 mm/s)", last.com_rate * radius * 1e3);
    println!("sloshing energy  {:.4} nK", constants.to_nanokelvin(slosh));
    Ok(())
}
