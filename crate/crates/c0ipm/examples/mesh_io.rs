//! Mesh file round trip: generate a structured mesh, write it in the plain
//! text format, read it back and print a summary.
//!
//! Run with `cargo run --release --example mesh_io`.

use c0ipm::mesh::{build_connectivity, read_mesh, structured_mesh, write_mesh};
use c0ipm::refelem::{ElemShape, ReferenceElement};

fn main() -> c0ipm::Result<()> {
    let mesh = structured_mesh(&[0.0; 3], &[2.0, 1.0, 0.0], &[4, 2, 0], ElemShape::Triangle, 3)?;
    let path = std::env::temp_dir().join("c0ipm_example_mesh.txt");
    write_mesh(&mesh, &path)?;
    println!("wrote {}", path.display());

    let back = read_mesh(&path)?;
    let re = ReferenceElement::new(back.shape, back.degree)?;
    let conn = build_connectivity(&back, &re)?;
    println!(
        "read back: {} nodes, {} elements, {} interior + {} boundary faces",
        back.n_nodes(),
        back.n_elems(),
        conn.n_interior(),
        conn.n_boundary()
    );
    assert_eq!(back.n_nodes(), mesh.n_nodes());
    Ok(())
}
