//! Calibrates the ring to a 485 um radius, reports the transverse trap
//! frequencies and shows the azimuthal lens that appears when the ring is
//! tilted.
//!
//! cargo run --release --example potential_map

use ringlens::taap::{calibrate_ring, lens_frequency, reduce_to_guide, TaapConfig, TaapModel};
use ringlens::PhysicalConstants;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let taap = TaapConfig::default();
    let calibrated = calibrate_ring(485e-6, &taap, &constants)?;
    let model = TaapModel::new(calibrated, constants);
    let ring = model.locate_ring()?;
    let [w1, w2] = model.transverse_frequencies(&ring)?;
    println!("ring radius      {:.3} um", ring.radius * 1e6);
    println!("ring height      {:.3} um", ring.height * 1e6);
    println!("rf frequency     {:.4} MHz", calibrated.rf_frequency / std::f64::consts::TAU / 1e6);
    println!("transverse trap  {:.1} Hz, {:.1} Hz", w1 / std::f64::consts::TAU, w2 / std::f64::consts::TAU);

    let flat = reduce_to_guide(&calibrated, &constants, 64)?;
    println!("untilted ripple  {:.3e} J (m g R = {:.3e} J)", flat.flatness(), constants.atom_mass * constants.gravity * flat.radius);

    for tilt in [0.07, 0.089] {
        let tilted = reduce_to_guide(&TaapConfig { tilt, ..calibrated }, &constants, 256)?;
        let j = tilted.argmin();
        println!(
            "tilt {:.0} mrad: minimum at {:.3} rad, lens frequency {:.2} rad/s (closed form {:.2})",
            tilt * 1e3,
            tilted.angle(j),
            tilted.azimuthal_frequency(j, 2, &constants),
            lens_frequency(tilt, tilted.radius, &constants)
        );
    }
    Ok(())
}
