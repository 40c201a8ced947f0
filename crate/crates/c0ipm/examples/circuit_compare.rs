//! Open vs closed circuit on the flexo-piezoelectric cantilever: the closed
//! circuit grounds the top side and ties the bottom-side potentials to one
//! free value through Lagrange multipliers.
//!
//! Run with `cargo run --release --example circuit_compare`.

use c0ipm::post::CircuitMode;
use c0ipm::presets::{beam_material_circuit, cantilever_run, BeamCase, BeamVariant};

fn main() -> c0ipm::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>14}", "a'", "open", "closed", "electrode dev");
    for &ap in &[1.0, 2.0, 4.0, 8.0] {
        let mut values = Vec::new();
        let mut dev = 0.0;
        for circuit in [CircuitMode::Open, CircuitMode::Closed] {
            let out = cantilever_run(&BeamCase {
                material: beam_material_circuit(),
                ..BeamCase::new(ap, BeamVariant::FlexoPiezo, circuit)
            })?;
            if let Some(d) = out.electrode_deviation {
                dev = d;
            }
            values.push(out.report.e_prime);
        }
        println!("{:>6} {:>10.4} {:>10.4} {:>14.2e}", ap, values[0], values[1], dev);
    }
    Ok(())
}
