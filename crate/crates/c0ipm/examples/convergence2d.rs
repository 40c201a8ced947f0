//! Nested-refinement convergence of the uncoupled problem (strain gradient
//! elasticity plus an electric potential equation) on the unit square, with
//! the sinusoidal manufactured solution and beta = 100 E l^2 / h.
//!
//! Run with `cargo run --release --example convergence2d`.

use c0ipm::assembly::BetaRule;
use c0ipm::config::{default_material, Coupling};
use c0ipm::mesh::TriangleSplit;
use c0ipm::post::ExactField;
use c0ipm::presets::{convergence_study, StudyOptions};
use c0ipm::refelem::ElemShape;

fn main() -> c0ipm::Result<()> {
    for p in [2usize, 3, 4] {
        let study = convergence_study(&StudyOptions {
            shape: ElemShape::Triangle,
            degree: p,
            levels: 4,
            base_divisions: 4,
            lo: [0.0; 3],
            hi: [1.0, 1.0, 0.0],
            material: Coupling::Uncoupled.apply(&default_material()),
            beta: BetaRule::Formula { alpha: 100.0 },
            periodic_x: false,
            exact: ExactField::sinusoid_2d(),
            split: TriangleSplit::Consistent,
        })?;
        println!("p = {p}");
        println!(
            "{:>6} {:>10} {:>8} {:>12} {:>12} {:>7} {:>7}",
            "level", "h", "ndof", "err_u", "err_phi", "rate_u", "rate_p"
        );
        for row in &study.rows {
            println!(
                "{:>6} {:>10.4e} {:>8} {:>12.4e} {:>12.4e} {:>7} {:>7}",
                row.level,
                row.h,
                row.ndof,
                row.err_u,
                row.err_phi,
                row.rate_u.map(|r| format!("{r:.2}")).unwrap_or_default(),
                row.rate_phi.map(|r| format!("{r:.2}")).unwrap_or_default(),
            );
        }
        println!();
    }
    Ok(())
}
