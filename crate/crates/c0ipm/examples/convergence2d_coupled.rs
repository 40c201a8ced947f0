//! Convergence of the fully coupled flexoelectric problem on the unit
//! square. The coupling costs about one order in the potential rate while
//! the displacement keeps its high-order convergence.
//!
//! Run with `cargo run --release --example convergence2d_coupled`.

use c0ipm::assembly::BetaRule;
use c0ipm::config::{default_material, Coupling};
use c0ipm::mesh::TriangleSplit;
use c0ipm::post::ExactField;
use c0ipm::presets::{convergence_study, StudyOptions};
use c0ipm::refelem::ElemShape;

fn main() -> c0ipm::Result<()> {
    for p in [3usize, 4] {
        let study = convergence_study(&StudyOptions {
            shape: ElemShape::Triangle,
            degree: p,
            levels: 4,
            base_divisions: 4,
            lo: [0.0; 3],
            hi: [1.0, 1.0, 0.0],
            material: Coupling::Full.apply(&default_material()),
            beta: BetaRule::Formula { alpha: 100.0 },
            periodic_x: false,
            exact: ExactField::sinusoid_2d(),
            split: TriangleSplit::Consistent,
        })?;
        println!(
            "p = {p}: last-segment rates: u = {:.2}, phi = {:.2}",
            study.last_rate_u(),
            study.last_rate_phi()
        );
        for row in &study.rows {
            println!(
                "  level {} h = {:.4e}  err_u = {:.4e}  err_phi = {:.4e}",
                row.level, row.h, row.err_u, row.err_phi
            );
        }
    }
    Ok(())
}
