//! Kinetic energy of a 116 nK thermal cloud after the launch, expansion and
//! lens sequence, as a function of the lens tilt, followed by a golden-section
//! refinement of the best tilt.
//!
//! cargo run --release --example lens_scan

use ringlens::analysis::{optimize_tilt, scan_lens, LensExperiment};
use ringlens::config::RunConfig;
use ringlens::sequence::Simulator;
use ringlens::taap::reduce_to_guide;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = RunConfig::default();
    config.solver.ensemble_size = 20_000;
    config.solver.time_step = 2e-5;
    let guide = reduce_to_guide(&config.taap, &config.constants, 256)?;
    let sim = Simulator::new(&config, &guide);
    let state = sim.prepare(&config.matter, config.seed, 0.0)?;
    let experiment = LensExperiment::new(sim, state, config.sequence.clone())?;

    let tilts: Vec<f64> = (0..=15).map(|i| i as f64 * 0.01).collect();
    let scan = scan_lens(&experiment, &tilts);
    let reference = scan.reference().ok_or("no unlensed point")?;
    println!("{:>10} {:>10} {:>8}", "tilt mrad", "E nK", "cooling");
    for p in &scan.points {
        if let Some(e) = p.energy {
            println!("{:>10.0} {:>10.2} {:>8.2}", p.tilt * 1e3, e.energy_nk, reference.energy / e.energy);
        }
    }
    let (opt, outcome) = optimize_tilt(&experiment, 0.0, 0.15, 5e-4)?;
    println!(
        "optimum {:.1} mrad: {:.2} nK, cooling factor {:.1}",
        opt.tilt * 1e3,
        outcome.energy.energy_nk,
        reference.energy / outcome.energy.energy
    );
    Ok(())
}
