//! Fits the ballistic expansion model to a noisy synthetic trace, writes the
//! trace as CSV and reports the energies for both matter kinds.
//!
//! cargo run --release --example fit_trace [OUT_DIR]

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use ringlens::analysis::{fit_expansion, kinetic_energy};
use ringlens::io::CsvTable;
use ringlens::{MatterKind, PhysicalConstants};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let constants = PhysicalConstants::default();
    let radius = 485e-6;
    let (phi0, rate, t0) = (0.02, 0.5, 0.01);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(1.0, 0.01)?;
    let times: Vec<f64> = (0..25).map(|i| 0.02 + 0.01 * i as f64).collect();
    let sizes: Vec<f64> = times
        .iter()
        .map(|t| radius * (phi0 * phi0 + (rate * (t - t0)).powi(2)).sqrt() * noise.sample(&mut rng))
        .collect();

    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    let mut table = CsvTable::new(&["t_s", "size_m"]);
    for (t, s) in times.iter().zip(&sizes) {
        table.push(vec![(*t).into(), (*s).into()]);
    }
    let path = std::path::Path::new(&out).join("synthetic_trace.csv");
    table.write(&path)?;

    let fit = fit_expansion(&times, &sizes, radius)?;
    println!("wrote {}", path.display());
    println!("delta_phi0 {:.5} rad (true {phi0})", fit.delta_phi0);
    println!("rate       {:.5} rad/s (true {rate}) +- {:.5}", fit.delta_phi_rate, fit.rate_error());
    println!("t0         {:.5} s (true {t0})", fit.t0);
    println!("residual   {:.3e} m", fit.residual);
    for kind in [MatterKind::Thermal, MatterKind::Bec] {
        let e = kinetic_energy(&fit, radius, kind, &constants);
        println!("{:>8}: {:.3} nK, T_rms {:.3} nK", kind.label(), e.energy_nk, e.t_rms * 1e9);
    }
    Ok(())
}
