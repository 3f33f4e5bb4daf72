//! A condensate launched around the ring and collimated by a lens pulse,
//! compared with the same sequence without the lens.
//!
//! cargo run --release --example condensate_lens

use ringlens::analysis::LensExperiment;
use ringlens::config::{MatterKind, RunConfig};
use ringlens::sequence::Simulator;
use ringlens::taap::RingGuide1D;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = RunConfig::default();
    config.matter.kind = MatterKind::Bec;
    config.matter.bec.transverse_frequency = Some(5000.0);
    config.solver.grid_points = 16384;
    config.solver.time_step = 2e-5;
    let guide = RingGuide1D::ideal(485e-6, 5000.0, 256);
    let sim = Simulator::new(&config, &guide);
    let state = sim.prepare(&config.matter, config.seed, 0.0)?;
    let experiment = LensExperiment::new(sim, state, config.sequence.clone())?;

    let free = experiment.evaluate(0.0)?;
    println!("no lens: {:.2} nK", free.energy.energy_nk);
    for tilt in [0.03, 0.04, 0.05, 0.07] {
        let lensed = experiment.evaluate(tilt)?;
        println!(
            "{:.0} mrad: {:.2} nK, cooling factor {:.1}",
            tilt * 1e3,
            lensed.energy.energy_nk,
            free.energy.energy / lensed.energy.energy
        );
    }
    Ok(())
}
