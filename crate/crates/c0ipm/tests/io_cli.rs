//! Integration checks of the external interfaces: mesh file determinism,
//! config-driven runs, CLI exit codes and byte-identical outputs.

use c0ipm::assembly::{assemble, BetaRule, ProblemInputs, VolumeSources};
use c0ipm::material::{build_material_tensors, MaterialParameters};
use c0ipm::mesh::{
    apply_boundary_spec, build_connectivity, read_mesh, structured_mesh, write_mesh, zero_vector,
    BoundarySpec, Mech1Bc,
};
use c0ipm::refelem::{ElemShape, ReferenceElement};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_c0ipm"))
}

fn assemble_square(mesh: &c0ipm::mesh::Mesh) -> Vec<(usize, usize, f64)> {
    let re = ReferenceElement::new(mesh.shape, mesh.degree).unwrap();
    let conn = build_connectivity(mesh, &re).unwrap();
    let spec = BoundarySpec::everywhere(Some(Mech1Bc::Displacement(zero_vector())), None, None);
    let (conn, tags) = apply_boundary_spec(mesh, &re, conn, &spec).unwrap();
    let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
    let sources = VolumeSources::default();
    let system = assemble(&ProblemInputs {
        mesh,
        re: &re,
        conn: &conn,
        tags: &tags,
        spec: &spec,
        mat: &mat,
        sources: &sources,
        beta: BetaRule::Formula { alpha: 100.0 },
        beta_d: None,
    })
    .unwrap();
    system.triplets
}

#[test]
fn mesh_roundtrip_reproduces_system_matrix() {
    let mesh = structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 2).unwrap();
    let path = std::env::temp_dir().join("c0ipm_roundtrip_system.txt");
    write_mesh(&mesh, &path).unwrap();
    let back = read_mesh(&path).unwrap();

    let t1 = assemble_square(&mesh);
    let t2 = assemble_square(&back);
    assert_eq!(t1.len(), t2.len());
    for (a, b) in t1.iter().zip(&t2) {
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2.to_bits(), b.2.to_bits(), "matrix entries must match bitwise");
    }
}

#[test]
fn cli_exit_codes() {
    let out_dir = std::env::temp_dir().join("c0ipm_cli_test");
    std::fs::create_dir_all(&out_dir).unwrap();

    // successful preset
    let ok = bin()
        .args(["preset", "patch-test", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    // unknown preset -> usage error
    let bad = bin().args(["preset", "no-such-thing"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));

    // conflicting config -> usage error
    let cfg = out_dir.join("conflict.cfg");
    std::fs::write(&cfg, "preset = patch-test\nbeta_mode = formula\nbeta = 5\n").unwrap();
    let conflict = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(conflict.status.code(), Some(1));

    // failing acceptance gate -> exit 3 (p = 3 at only two levels is still
    // pre-asymptotic and misses the rate gate)
    let gate = bin()
        .args(["preset", "convergence2d", "--p", "3", "--levels", "2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        gate.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&gate.stdout)
    );

    // mesh-info on a written mesh
    let mesh =
        structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Triangle, 2).unwrap();
    let mesh_path = out_dir.join("info.mesh");
    write_mesh(&mesh, &mesh_path).unwrap();
    let info = bin().arg("mesh-info").arg(&mesh_path).output().unwrap();
    assert_eq!(info.status.code(), Some(0));
    let text = String::from_utf8_lossy(&info.stdout);
    assert!(text.contains("elements:       8"), "{text}");

    // beta-estimate prints the three-column line
    let cfg2 = out_dir.join("estimate.cfg");
    std::fs::write(&cfg2, "divisions = 2\ndegree = 2\ncoupling = uncoupled\n").unwrap();
    let est = bin().args(["beta-estimate", "--config"]).arg(&cfg2).output().unwrap();
    assert_eq!(est.status.code(), Some(0));
    let line = String::from_utf8_lossy(&est.stdout);
    assert_eq!(line.trim().split(',').count(), 3, "{line}");

    // the p = 1 ladder reports the expected non-convergence flag and exits 0
    let p1 = bin()
        .args(["preset", "convergence2d", "--p", "1", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(p1.status.code(), Some(0), "{}", String::from_utf8_lossy(&p1.stdout));
    let p1_text = String::from_utf8_lossy(&p1.stdout);
    assert!(p1_text.contains("non-convergence flag: PASS"), "{p1_text}");
}

#[test]
fn preset_outputs_are_deterministic() {
    let dir_a = std::env::temp_dir().join("c0ipm_det_a");
    let dir_b = std::env::temp_dir().join("c0ipm_det_b");
    for dir in [&dir_a, &dir_b] {
        std::fs::create_dir_all(dir).unwrap();
        let out = bin()
            .args([
                "preset",
                "convergence2d",
                "--p",
                "2",
                "--levels",
                "3",
                "--deterministic",
                "--out",
            ])
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let a = std::fs::read(dir_a.join("convergence2d_p2.csv")).unwrap();
    let b = std::fs::read(dir_b.join("convergence2d_p2.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "deterministic runs must produce byte-identical CSVs");
}
