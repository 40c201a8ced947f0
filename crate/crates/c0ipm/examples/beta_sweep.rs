//! Robustness with respect to the stabilization parameter: final-mesh
//! errors of the coupled problem for alpha spanning four orders of
//! magnitude, on the checkerboard-split triangle mesh.
//!
//! Run with `cargo run --release --example beta_sweep`.

use c0ipm::assembly::BetaRule;
use c0ipm::config::{default_material, Coupling};
use c0ipm::mesh::TriangleSplit;
use c0ipm::post::{l2_error, ErrorField, ExactField};
use c0ipm::presets::{solve_manufactured, ManufacturedCase};
use c0ipm::refelem::ElemShape;

fn main() -> c0ipm::Result<()> {
    println!("{:>4} {:>8} {:>12} {:>12}", "p", "alpha", "err_u", "err_phi");
    for p in [3usize, 4] {
        for alpha in [1.0, 10.0, 100.0, 1e3, 1e4] {
            let exact = ExactField::sinusoid_2d();
            let result = solve_manufactured(&ManufacturedCase {
                shape: ElemShape::Triangle,
                degree: p,
                lo: [0.0; 3],
                hi: [1.0, 1.0, 0.0],
                divisions: [16, 16, 0],
                periodic_x: false,
                material: Coupling::Full.apply(&default_material()),
                beta: BetaRule::Formula { alpha },
                exact: exact.clone(),
                split: TriangleSplit::Alternating,
            });
            match result {
                Ok(out) => {
                    let (eu, _) =
                        l2_error(&out.mesh, &out.re, &out.sol, &exact, ErrorField::Displacement)?;
                    let (ep, _) =
                        l2_error(&out.mesh, &out.re, &out.sol, &exact, ErrorField::Potential)?;
                    println!("{:>4} {:>8.0e} {:>12.4e} {:>12.4e}", p, alpha, eu, ep);
                }
                Err(e) => println!("{:>4} {:>8.0e} solve failed: {e}", p, alpha),
            }
        }
    }
    Ok(())
}
