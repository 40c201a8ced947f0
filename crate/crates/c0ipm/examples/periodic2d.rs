//! Periodicity in the x direction: the paired boundary faces become
//! interior faces (weak C1 continuity across the seam) and the boundary
//! nodal values are identified. The convergence behaviour matches the full
//! Dirichlet problem.
//!
//! Run with `cargo run --release --example periodic2d`.

use c0ipm::assembly::BetaRule;
use c0ipm::config::{default_material, Coupling};
use c0ipm::mesh::TriangleSplit;
use c0ipm::post::ExactField;
use c0ipm::presets::{convergence_study, StudyOptions};
use c0ipm::refelem::ElemShape;

fn main() -> c0ipm::Result<()> {
    for (label, periodic) in [("periodic in x", true), ("full Dirichlet", false)] {
        let study = convergence_study(&StudyOptions {
            shape: ElemShape::Triangle,
            degree: 3,
            levels: 4,
            base_divisions: 4,
            lo: [0.0; 3],
            hi: [1.0, 1.0, 0.0],
            material: Coupling::Full.apply(&default_material()),
            beta: BetaRule::Formula { alpha: 100.0 },
            periodic_x: periodic,
            exact: ExactField::sinusoid_2d(),
            split: TriangleSplit::Consistent,
        })?;
        println!(
            "{label}: last-segment rates u = {:.2}, phi = {:.2}",
            study.last_rate_u(),
            study.last_rate_phi()
        );
    }
    Ok(())
}
