//! Eigenvalue estimate of the stabilization parameter: the largest
//! generalized eigenvalue of the face/volume pencil bounds the double
//! traction by the strain-gradient energy, and any beta above it makes the
//! mechanical form coercive. The equivalent alpha shows how the closed-form
//! rule beta = alpha E l^2 / h relates to the bound.
//!
//! Run with `cargo run --release --example beta_estimate`.

use c0ipm::config::{default_material, Coupling};
use c0ipm::material::build_material_tensors;
use c0ipm::mesh::{build_connectivity, structured_mesh};
use c0ipm::penalty::{assemble_penalty_forms, estimate_penalty};
use c0ipm::refelem::{ElemShape, ReferenceElement};

fn main() -> c0ipm::Result<()> {
    println!(
        "{:>4} {:>4} {:>12} {:>12} {:>12}",
        "n", "p", "lambda_max", "alpha_eq", "beta_rec"
    );
    for p in [2usize, 3] {
        for n in [2usize, 4, 8] {
            let mesh =
                structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[n, n, 0], ElemShape::Triangle, p)?;
            let re = ReferenceElement::new(ElemShape::Triangle, p)?;
            let conn = build_connectivity(&mesh, &re)?;
            let mat =
                build_material_tensors(&Coupling::Uncoupled.apply(&default_material()), 2)?;
            let forms = assemble_penalty_forms(&mesh, &re, &conn, &mat, false)?;
            let est = estimate_penalty(&forms)?;
            println!(
                "{:>4} {:>4} {:>12.4e} {:>12.4} {:>12.4e}",
                n, p, est.lambda_max, est.alpha_equivalent, est.recommended_beta
            );
        }
    }
    Ok(())
}
