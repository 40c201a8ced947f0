//! Flexoelectric cantilever: sweep of the normalised thickness a' for the
//! pure flexoelectric and flexo-piezoelectric beams, against the analytic
//! approximations sqrt(12/a'^2) and sqrt(1 + 12/a'^2).
//!
//! Run with `cargo run --release --example cantilever`.

use c0ipm::post::CircuitMode;
use c0ipm::presets::{cantilever_run, BeamCase, BeamVariant};

fn main() -> c0ipm::Result<()> {
    println!(
        "{:>6} {:>14} {:>10} {:>10} {:>8}",
        "a'", "variant", "e'", "analytic", "dev %"
    );
    for &ap in &[1.76, 2.0, 4.0, 8.0, 16.0] {
        for (variant, name) in [
            (BeamVariant::Flexo, "flexo"),
            (BeamVariant::FlexoPiezo, "flexo-piezo"),
        ] {
            let out = cantilever_run(&BeamCase::new(ap, variant, CircuitMode::Open))?;
            let analytic = match variant {
                BeamVariant::Flexo => (12.0 / (ap * ap)).sqrt(),
                _ => (1.0 + 12.0 / (ap * ap)).sqrt(),
            };
            println!(
                "{:>6} {:>14} {:>10.4} {:>10.4} {:>8.2}",
                ap,
                name,
                out.report.e_prime,
                analytic,
                100.0 * (out.report.e_prime - analytic).abs() / analytic
            );
        }
    }
    Ok(())
}
