//! 3D convergence on a cube of hexahedra with the coupled flexoelectric
//! equations and a sinusoidal manufactured solution.
//!
//! Run with `cargo run --release --example convergence3d`.

use c0ipm::assembly::BetaRule;
use c0ipm::config::{default_material, Coupling};
use c0ipm::mesh::TriangleSplit;
use c0ipm::post::ExactField;
use c0ipm::presets::{convergence_study, StudyOptions};
use c0ipm::refelem::ElemShape;

fn main() -> c0ipm::Result<()> {
    for (p, base) in [(2usize, 2usize), (3, 1)] {
        let study = convergence_study(&StudyOptions {
            shape: ElemShape::Hex,
            degree: p,
            levels: 3,
            base_divisions: base,
            lo: [0.0; 3],
            hi: [0.5, 0.5, 0.5],
            material: Coupling::Full.apply(&default_material()),
            beta: BetaRule::Formula { alpha: 100.0 },
            periodic_x: false,
            exact: ExactField::sinusoid_3d(),
            split: TriangleSplit::Consistent,
        })?;
        println!("p = {p}");
        for row in &study.rows {
            println!(
                "  level {} h = {:.4e} ndof = {:>6} err_u = {:.4e} err_phi = {:.4e}",
                row.level, row.h, row.ndof, row.err_u, row.err_phi
            );
        }
        println!(
            "  last-segment rates: u = {:.2}, phi = {:.2}",
            study.last_rate_u(),
            study.last_rate_phi()
        );
    }
    Ok(())
}
