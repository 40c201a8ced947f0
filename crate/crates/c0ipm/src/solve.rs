//! Direct solution of the assembled symmetric indefinite system: symmetric
//! diagonal equilibration, sparse LU with partial pivoting, iterative
//! refinement and a residual gate, then reconstruction of the nodal fields.

use crate::assembly::GlobalSystem;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::refelem::ReferenceElement;
use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Nodal solution: displacement and potential per mesh node plus the
/// Lagrange multiplier values of the electrode constraints.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub dim: usize,
    pub u: Vec<[f64; 3]>,
    pub phi: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Full raw dof vector (u, phi, lambda) with prescribed values embedded.
    pub x_raw: Vec<f64>,
}

fn mat_inf_norm(k: &SparseColMat<usize, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..k.ncols() {
        for v in k.val_of_col(j) {
            m = m.max(v.abs());
        }
    }
    m
}

/// Residual r = f - K x with FMA-compensated accumulation. The refinement
/// loop needs residuals evaluated below the plain f64 cancellation floor,
/// otherwise ill-scaled problems stall at eps * |K| * |x|.
fn residual_compensated(k: &SparseColMat<usize, f64>, x: &[f64], f: &[f64], r: &mut [f64]) {
    let n = k.ncols();
    let mut comp = vec![0.0f64; n];
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = *fi;
    }
    for j in 0..n {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (i, v) in k.row_idx_of_col(j).zip(k.val_of_col(j)) {
            let p = -v * xj;
            let err = (-v).mul_add(xj, -p);
            let s = r[i] + p;
            let c = if r[i].abs() >= p.abs() {
                (r[i] - s) + p
            } else {
                (p - s) + r[i]
            };
            r[i] = s;
            comp[i] += c + err;
        }
    }
    for (ri, ci) in r.iter_mut().zip(&comp) {
        *ri += ci;
    }
}

fn likely_causes(system: &GlobalSystem) -> String {
    let mut causes = Vec::new();
    if !system.has_u_dirichlet {
        causes.push("no displacement Dirichlet boundary (rigid modes are unconstrained)");
    }
    if !system.has_phi_constraint && system.dof_map.n_lambda == 0 && system.dof_map.n_phi > 0 {
        causes.push("potential has no Dirichlet value or electrode reference (floating field)");
    }
    causes.push("stabilization parameter beta may be too small for coercivity");
    format!("likely causes: {}", causes.join("; "))
}

/// Solves the reduced system and reconstructs the nodal fields. The relative
/// residual must come out below 1e-10.
pub fn solve(system: &GlobalSystem) -> Result<SolutionField> {
    let n = system.dof_map.n_reduced;
    let mut x_red = vec![0.0; n];

    if n > 0 {
        let k = &system.k;
        // symmetric diagonal equilibration from column max-norms
        let mut scale = vec![0.0f64; n];
        for j in 0..n {
            let mut m = 0.0f64;
            for v in k.val_of_col(j) {
                m = m.max(v.abs());
            }
            scale[j] = m;
        }
        if let Some(j) = scale.iter().position(|&m| m == 0.0) {
            return Err(Error::Numerical(format!(
                "structurally singular system: reduced dof {j} has an empty column; {}",
                likely_causes(system)
            )));
        }
        let s: Vec<f64> = scale.iter().map(|&m| 1.0 / m.sqrt()).collect();

        let mut scaled_triplets = Vec::new();
        for j in 0..n {
            for (i, v) in k.row_idx_of_col(j).zip(k.val_of_col(j)) {
                scaled_triplets.push(Triplet::new(i, j, v * s[i] * s[j]));
            }
        }
        let ks = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &scaled_triplets)
            .map_err(|e| Error::Numerical(format!("scaled matrix assembly failed: {e:?}")))?;

        let symbolic = SymbolicLu::try_new(ks.symbolic())
            .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, ks.as_ref()).map_err(|e| {
            Error::Numerical(format!(
                "sparse LU factorization failed: {e:?}; {}",
                likely_causes(system)
            ))
        })?;

        let f = &system.f;
        let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let knorm = mat_inf_norm(k);

        // initial solve on the equilibrated system
        let fs = Mat::from_fn(n, 1, |i, _| f[i] * s[i]);
        let ys = lu.solve(&fs);
        for i in 0..n {
            x_red[i] = ys[(i, 0)] * s[i];
        }

        // iterative refinement with compensated residuals
        let mut resid = vec![0.0; n];
        for _ in 0..8 {
            residual_compensated(k, &x_red, f, &mut resid);
            let rnorm = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rnorm <= 1e-15 * fnorm {
                break;
            }
            let rs = Mat::from_fn(n, 1, |i, _| resid[i] * s[i]);
            let ds = lu.solve(&rs);
            for i in 0..n {
                x_red[i] += ds[(i, 0)] * s[i];
            }
        }

        // Residual and growth gates. A numerically singular factorization
        // shows up as unbounded solution growth; a healthy solve must reach
        // 1e-10 relative to the load, up to the f64 floor of evaluating the
        // residual itself (eps * |K| * |x| per row).
        residual_compensated(k, &x_red, f, &mut resid);
        let rnorm = resid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let xnorm = x_red.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if fnorm > 0.0 {
            let growth = knorm * xnorm / fnorm;
            if growth > 1e12 {
                return Err(Error::Numerical(format!(
                    "solution grew by {growth:.3e} relative to the load (numerically singular system); {}",
                    likely_causes(system)
                )));
            }
            let eval_floor = 256.0 * f64::EPSILON * knorm * xnorm;
            if rnorm > (1e-10 * fnorm).max(eval_floor) {
                return Err(Error::Numerical(format!(
                    "solver residual {:.3e} exceeds 1e-10 relative to the load; {}",
                    rnorm / fnorm,
                    likely_causes(system)
                )));
            }
        }
    }

    // reconstruct raw vector: free dofs, prescribed values, periodic slaves
    let map = &system.dof_map;
    let mut x_raw = vec![0.0; map.n_raw()];
    for raw in 0..map.n_raw() {
        if let Some(red) = map.reduced[raw] {
            x_raw[raw] = x_red[red];
        } else if map.is_dirichlet[raw] {
            x_raw[raw] = map.prescribed[raw];
        }
    }
    for node in 0..map.n_nodes {
        let master = map.node_master[node];
        if master != node {
            for c in 0..map.dim {
                x_raw[map.u_raw(node, c)] = x_raw[map.u_raw(master, c)];
            }
            x_raw[map.phi_raw(node)] = x_raw[map.phi_raw(master)];
        }
    }

    let mut u = vec![[0.0; 3]; map.n_nodes];
    let mut phi = vec![0.0; map.n_nodes];
    for node in 0..map.n_nodes {
        for c in 0..map.dim {
            u[node][c] = x_raw[map.u_raw(node, c)];
        }
        phi[node] = x_raw[map.phi_raw(node)];
    }
    let multipliers = (0..map.n_lambda)
        .map(|k| x_raw[map.lambda_raw(k)])
        .collect();

    Ok(SolutionField {
        dim: map.dim,
        u,
        phi,
        multipliers,
        x_raw,
    })
}

impl SolutionField {
    /// Evaluates (u, phi) at a reference point of element `e`.
    pub fn eval_in_element(
        &self,
        mesh: &Mesh,
        re: &ReferenceElement,
        e: usize,
        ref_point: [f64; 3],
    ) -> Result<([f64; 3], f64)> {
        let tab = re.tabulate(&[ref_point], 0)?;
        let en = mesh.elem_nodes(e);
        let mut u = [0.0; 3];
        let mut phi = 0.0;
        for (a, &n) in en.iter().enumerate() {
            let na = tab.value(0, a);
            for c in 0..self.dim {
                u[c] += na * self.u[n][c];
            }
            phi += na * self.phi[n];
        }
        Ok((u, phi))
    }

    /// Evaluates at an arbitrary physical point by locating the containing
    /// element (Newton inverse of the isoparametric map with a bounding-box
    /// prefilter).
    pub fn eval_at_point(
        &self,
        mesh: &Mesh,
        re: &ReferenceElement,
        x: [f64; 3],
    ) -> Result<([f64; 3], f64)> {
        let (e, ref_pt) = locate_point(mesh, re, x)?;
        self.eval_in_element(mesh, re, e, ref_pt)
    }
}

/// Finds the element containing `x` and the reference coordinates inside it.
pub fn locate_point(mesh: &Mesh, re: &ReferenceElement, x: [f64; 3]) -> Result<(usize, [f64; 3])> {
    let dim = mesh.dim;
    for e in 0..mesh.n_elems() {
        let coords = mesh.elem_coords(e);
        // bounding box prefilter with a margin
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &coords {
            for k in 0..dim {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let margin = 1e-8
            * (0..dim)
                .map(|k| hi[k] - lo[k])
                .fold(0.0f64, f64::max)
                .max(1e-300);
        if (0..dim).any(|k| x[k] < lo[k] - margin || x[k] > hi[k] + margin) {
            continue;
        }
        if let Some(ref_pt) = invert_map(mesh, re, &coords, x) {
            return Ok((e, ref_pt));
        }
    }
    Err(Error::Domain(format!(
        "point ({}, {}, {}) not found in any element",
        x[0], x[1], x[2]
    )))
}

fn invert_map(
    mesh: &Mesh,
    re: &ReferenceElement,
    coords: &[[f64; 3]],
    x: [f64; 3],
) -> Option<[f64; 3]> {
    let dim = mesh.dim;
    let mut xi = match re.shape {
        crate::refelem::ElemShape::Triangle => [1.0 / 3.0, 1.0 / 3.0, 0.0],
        _ => [0.0, 0.0, 0.0],
    };
    for _ in 0..30 {
        let tab = re.tabulate(&[clamp_ref(re, xi)], 1).ok()?;
        let mut r = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        for a in 0..coords.len() {
            let na = tab.value(0, a);
            for k in 0..dim {
                r[k] += na * coords[a][k];
                for d in 0..dim {
                    jac[k][d] += tab.grad(0, a, d) * coords[a][k];
                }
            }
        }
        for k in 0..dim {
            r[k] = x[k] - r[k];
        }
        let rn = (0..dim).map(|k| r[k] * r[k]).sum::<f64>().sqrt();
        if rn < 1e-12 {
            return re.tabulate(&[xi], 0).ok().map(|_| xi);
        }
        let dxi = solve_small(&jac, &r, dim)?;
        for d in 0..dim {
            xi[d] += dxi[d];
        }
        if xi.iter().take(dim).any(|v| v.abs() > 10.0) {
            return None;
        }
    }
    None
}

fn clamp_ref(re: &ReferenceElement, xi: [f64; 3]) -> [f64; 3] {
    let mut out = xi;
    match re.shape {
        crate::refelem::ElemShape::Triangle => {
            out[0] = out[0].clamp(0.0, 1.0);
            out[1] = out[1].clamp(0.0, 1.0);
            if out[0] + out[1] > 1.0 {
                let excess = (out[0] + out[1] - 1.0) / 2.0;
                out[0] -= excess;
                out[1] -= excess;
            }
        }
        _ => {
            for v in out.iter_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
    }
    out
}

fn solve_small(a: &[[f64; 3]; 3], b: &[f64; 3], dim: usize) -> Option<[f64; 3]> {
    match dim {
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                return None;
            }
            Some([
                (b[0] * a[1][1] - b[1] * a[0][1]) / det,
                (a[0][0] * b[1] - a[1][0] * b[0]) / det,
                0.0,
            ])
        }
        3 => {
            let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
            if det.abs() < 1e-300 {
                return None;
            }
            let mut out = [0.0; 3];
            for k in 0..3 {
                let mut m = *a;
                for row in 0..3 {
                    m[row][k] = b[row];
                }
                let dk = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                out[k] = dk / det;
            }
            Some(out)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, BetaRule, ProblemInputs, VolumeSources};
    use crate::material::{build_material_tensors, MaterialParameters};
    use crate::mesh::{
        apply_boundary_spec, build_connectivity, structured_mesh, zero_vector, BoundarySpec,
        Mech1Bc,
    };
    use crate::refelem::{ElemShape, ReferenceElement};

    #[test]
    fn zero_load_gives_zero_solution() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let spec = BoundarySpec::everywhere(Some(Mech1Bc::Displacement(zero_vector())), None, None);
        let (conn, tags) = apply_boundary_spec(&mesh, &re, conn, &spec).unwrap();
        let sources = VolumeSources::default();
        let system = assemble(&ProblemInputs {
            mesh: &mesh,
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
        let sol = solve(&system).unwrap();
        for n in 0..mesh.n_nodes() {
            assert!(sol.u[n][0].abs() < 1e-14);
            assert!(sol.u[n][1].abs() < 1e-14);
        }
    }

    #[test]
    fn missing_dirichlet_reports_cause() {
        // pure Neumann elasticity: singular, must error with a hint
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 1).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 1).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.0), 2).unwrap();
        let spec = BoundarySpec::everywhere(None, None, None);
        let (conn, tags) = apply_boundary_spec(&mesh, &re, conn, &spec).unwrap();
        // a net body force makes the pure-Neumann problem unsolvable
        let sources = VolumeSources {
            body_force: Some(std::sync::Arc::new(|_| [0.0, -1.0, 0.0])),
            charge: None,
        };
        let system = assemble(&ProblemInputs {
            mesh: &mesh,
            re: &re,
            conn: &conn,
            tags: &tags,
            spec: &spec,
            mat: &mat,
            sources: &sources,
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        })
        .unwrap();
        match solve(&system) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("likely causes"), "{msg}"),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn point_location_roundtrip() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[3, 3, 0], ElemShape::Triangle, 3).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 3).unwrap();
        let x = [0.63, 0.29, 0.0];
        let (e, xi) = locate_point(&mesh, &re, x).unwrap();
        let coords = mesh.elem_coords(e);
        let tab = re.tabulate(&[xi], 0).unwrap();
        let mut mapped = [0.0; 3];
        for a in 0..coords.len() {
            for k in 0..2 {
                mapped[k] += tab.value(0, a) * coords[a][k];
            }
        }
        assert!((mapped[0] - x[0]).abs() < 1e-10);
        assert!((mapped[1] - x[1]).abs() < 1e-10);
    }
}
