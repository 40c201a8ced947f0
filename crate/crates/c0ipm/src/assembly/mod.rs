//! Global system assembly: volume terms, interior-face consistency and
//! penalty integrals, boundary loads, strong first-Dirichlet elimination,
//! weak second-Dirichlet terms, electrode multipliers and periodic
//! identification.

mod local;

pub use local::{
    dirichlet2_face, element_matrices, element_rhs, face_matrices, FaceSide, FaceTerms,
    KernelTerms,
};

use crate::error::{Error, Result};
use crate::material::MaterialTensors;
use crate::mesh::{
    BoundarySpec, Connectivity, ElecBc, ElecTag, Face, Mech1Bc, Mech1Tag, Mech2Bc,
    Mech2Tag, Mesh, ScalarFn, TaggedBoundary, VectorFn,
};
use crate::refelem::{flip_permutation, GeometryFactors, ReferenceElement};
use faer::sparse::{SparseColMat, Triplet};
use std::collections::HashMap;

/// Volume source terms.
#[derive(Default)]
pub struct VolumeSources {
    pub body_force: Option<VectorFn>,
    pub charge: Option<ScalarFn>,
}

/// How the interior penalty parameter is chosen.
#[derive(Debug, Clone, Copy)]
pub enum BetaRule {
    /// One fixed value for every face.
    Explicit(f64),
    /// beta_F = alpha E l^2 / h_F with the local face size h_F.
    Formula { alpha: f64 },
}

impl BetaRule {
    pub fn face_value(&self, young: f64, l2: f64, h_f: f64) -> f64 {
        match self {
            BetaRule::Explicit(b) => *b,
            BetaRule::Formula { alpha } => alpha * young * l2 / h_f,
        }
    }
}

/// Degree-of-freedom bookkeeping. Raw layout: displacement dofs
/// (node-major), then potentials, then multiplier rows; the reduced
/// numbering skips eliminated (Dirichlet) and periodic-slave dofs and keeps
/// the block order.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub dim: usize,
    pub n_nodes: usize,
    pub n_u: usize,
    pub n_phi: usize,
    pub n_lambda: usize,
    pub node_master: Vec<usize>,
    pub is_dirichlet: Vec<bool>,
    pub prescribed: Vec<f64>,
    pub reduced: Vec<Option<usize>>,
    pub n_reduced: usize,
    pub n_u_reduced: usize,
}

impl DofMap {
    #[inline]
    pub fn u_raw(&self, node: usize, comp: usize) -> usize {
        node * self.dim + comp
    }

    #[inline]
    pub fn phi_raw(&self, node: usize) -> usize {
        self.n_u + node
    }

    #[inline]
    pub fn lambda_raw(&self, k: usize) -> usize {
        self.n_u + self.n_phi + k
    }

    /// Raw dof after periodic identification.
    #[inline]
    pub fn master_u(&self, node: usize, comp: usize) -> usize {
        self.u_raw(self.node_master[node], comp)
    }

    #[inline]
    pub fn master_phi(&self, node: usize) -> usize {
        self.phi_raw(self.node_master[node])
    }

    pub fn n_raw(&self) -> usize {
        self.n_u + self.n_phi + self.n_lambda
    }

    /// Master-mapped raw dofs of an element, in local kernel order.
    pub fn element_dofs(&self, mesh: &Mesh, e: usize) -> Vec<usize> {
        let en = mesh.elem_nodes(e);
        let mut out = Vec::with_capacity(en.len() * (self.dim + 1));
        for &n in en {
            for c in 0..self.dim {
                out.push(self.master_u(n, c));
            }
        }
        for &n in en {
            out.push(self.master_phi(n));
        }
        out
    }
}

/// Everything assembly needs, borrowed from the caller.
pub struct ProblemInputs<'a> {
    pub mesh: &'a Mesh,
    pub re: &'a ReferenceElement,
    pub conn: &'a Connectivity,
    pub tags: &'a TaggedBoundary,
    pub spec: &'a BoundarySpec,
    pub mat: &'a MaterialTensors,
    pub sources: &'a VolumeSources,
    pub beta: BetaRule,
    /// Defaults to the face rule when `None`.
    pub beta_d: Option<BetaRule>,
}

/// Assembled system: raw (pre-elimination) triplets for diagnostics and the
/// reduced sparse matrix + load vector for the solver.
pub struct GlobalSystem {
    pub dof_map: DofMap,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs_full: Vec<f64>,
    pub k: SparseColMat<usize, f64>,
    pub f: Vec<f64>,
    pub beta_used: f64,
    pub beta_d_used: f64,
    pub has_u_dirichlet: bool,
    pub has_phi_constraint: bool,
}

impl GlobalSystem {
    /// max |K - K^T| / max |K| over the raw assembled matrix.
    pub fn symmetry_error(&self) -> f64 {
        let mut map: HashMap<(usize, usize), f64> = HashMap::new();
        for &(r, c, v) in &self.triplets {
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        let mut max = 0.0f64;
        let mut asym = 0.0f64;
        for (&(r, c), &v) in &map {
            max = max.max(v.abs());
            let vt = map.get(&(c, r)).copied().unwrap_or(0.0);
            asym = asym.max((v - vt).abs());
        }
        if max == 0.0 {
            0.0
        } else {
            asym / max
        }
    }

    /// K_full * x in raw numbering.
    pub fn apply_full(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dof_map.n_raw()];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        y
    }

    /// Residual forces K x - f at raw dofs (reactions at constrained dofs).
    /// Uses FMA-compensated accumulation: reaction sums cancel terms that are
    /// orders of magnitude larger than the result, and plain f64 dot products
    /// would lose the equilibrium balance.
    pub fn reactions(&self, x_raw: &[f64]) -> Vec<f64> {
        let n = self.dof_map.n_raw();
        let mut sum = vec![0.0f64; n];
        let mut comp = vec![0.0f64; n];
        let add = |row: usize, term: f64, sum: &mut [f64], comp: &mut [f64]| {
            // Neumaier two-sum
            let s = sum[row] + term;
            let c = if sum[row].abs() >= term.abs() {
                (sum[row] - s) + term
            } else {
                (term - s) + sum[row]
            };
            sum[row] = s;
            comp[row] += c;
        };
        for &(r, c, v) in &self.triplets {
            let x = x_raw[c];
            if x == 0.0 {
                continue;
            }
            let p = v * x;
            let err = v.mul_add(x, -p);
            add(r, p, &mut sum, &mut comp);
            comp[r] += err;
        }
        for (row, fi) in self.rhs_full.iter().enumerate() {
            add(row, -fi, &mut sum, &mut comp);
        }
        (0..n).map(|i| sum[i] + comp[i]).collect()
    }

    /// Dense copy of the reduced mechanical (u-u) block.
    pub fn reduced_mechanical_block(&self) -> faer::Mat<f64> {
        let n = self.dof_map.n_u_reduced;
        let mut m = faer::Mat::<f64>::zeros(n, n);
        for &(r, c, v) in &self.triplets {
            if let (Some(rr), Some(cc)) = (
                self.dof_map.reduced[r].filter(|&i| i < n),
                self.dof_map.reduced[c].filter(|&i| i < n),
            ) {
                m[(rr, cc)] += v;
            }
        }
        m
    }

    /// Dumps the reduced matrix as `i j value` rows (debug format).
    pub fn dump_matrix(&self, path: &std::path::Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::new();
        for j in 0..self.k.ncols() {
            for (i, v) in self
                .k
                .row_idx_of_col(j)
                .zip(self.k.val_of_col(j).iter())
            {
                let _ = writeln!(s, "{i} {j} {v:.17e}");
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Geometry of both sides of an interior face with the permutation mapping
/// left quadrature indices to right ones.
pub fn face_pair_geometry(
    mesh: &Mesh,
    re: &ReferenceElement,
    face: &Face,
) -> Result<(GeometryFactors, GeometryFactors, Vec<usize>)> {
    let right = face
        .right
        .ok_or_else(|| Error::Connectivity("face_pair_geometry needs an interior face".into()))?;
    let geom_l = re.face_geometry(&mesh.elem_coords(face.left), face.left_local)?;
    let geom_r = re.face_geometry(&mesh.elem_coords(right), face.right_local)?;
    if geom_l.n_pts != geom_r.n_pts {
        return Err(Error::Connectivity(
            "mismatched face quadrature counts".into(),
        ));
    }
    // sigma maps right index -> left index; assembly wants left -> right
    let sigma = flip_permutation(re.shape.face_shape(), geom_l.n_pts, face.rotation)?;
    let mut left_to_right = vec![0usize; sigma.len()];
    for (right_idx, &left_idx) in sigma.iter().enumerate() {
        left_to_right[left_idx] = right_idx;
    }
    Ok((geom_l, geom_r, left_to_right))
}

/// Verifies that flipped face quadrature points coincide geometrically from
/// both sides of every interior face and that the two outward normals are
/// opposite. Returns (max point mismatch scaled by the face's element size,
/// max |n_L + n_R|). Periodic faces are excluded from the point check (the
/// sides differ by the periodicity translation).
pub fn check_flip_consistency(
    mesh: &Mesh,
    re: &ReferenceElement,
    conn: &Connectivity,
) -> Result<(f64, f64)> {
    let mut max_dx = 0.0f64;
    let mut max_dn = 0.0f64;
    for (_fi, face) in conn.interior_faces() {
        let (geom_l, geom_r, perm) = face_pair_geometry(mesh, re, face)?;
        let h = mesh
            .elem_diameter(re, face.left)
            .min(mesh.elem_diameter(re, face.right.unwrap()));
        let right_corners = face_corner_set(mesh, re, face.right.unwrap(), face.right_local);
        let shared = face.corners.iter().any(|c| right_corners.contains(c));
        for q in 0..geom_l.n_pts {
            let qr = perm[q];
            if shared {
                let mut dx = 0.0f64;
                for k in 0..mesh.dim {
                    dx = dx.max((geom_l.points[q][k] - geom_r.points[qr][k]).abs());
                }
                max_dx = max_dx.max(dx / h);
            }
            let mut dn = 0.0f64;
            for k in 0..mesh.dim {
                dn = dn.max((geom_l.normals[q][k] + geom_r.normals[qr][k]).abs());
            }
            max_dn = max_dn.max(dn);
        }
    }
    Ok((max_dx, max_dn))
}

fn face_corner_set(mesh: &Mesh, re: &ReferenceElement, e: usize, lf: usize) -> Vec<usize> {
    let en = mesh.elem_nodes(e);
    re.faces[lf].corners.iter().map(|&ln| en[ln]).collect()
}

fn region_g1(spec: &BoundarySpec, ri: usize) -> &VectorFn {
    match &spec.regions[ri].mech1 {
        Some(Mech1Bc::Displacement(f)) => f,
        _ => unreachable!("tag points at a Dirichlet displacement region"),
    }
}

fn region_tn(spec: &BoundarySpec, ri: usize) -> &VectorFn {
    match &spec.regions[ri].mech1 {
        Some(Mech1Bc::Traction(f)) => f,
        _ => unreachable!("tag points at a traction region"),
    }
}

fn region_g2(spec: &BoundarySpec, ri: usize) -> &VectorFn {
    match &spec.regions[ri].mech2 {
        Some(Mech2Bc::NormalDerivative(f)) => f,
        _ => unreachable!("tag points at a normal-derivative region"),
    }
}

fn region_rn(spec: &BoundarySpec, ri: usize) -> &VectorFn {
    match &spec.regions[ri].mech2 {
        Some(Mech2Bc::DoubleTraction(f)) => f,
        _ => unreachable!("tag points at a double-traction region"),
    }
}

fn region_g3(spec: &BoundarySpec, ri: usize) -> &ScalarFn {
    match &spec.regions[ri].elec {
        Some(ElecBc::Potential(f)) => f,
        _ => unreachable!("tag points at a potential region"),
    }
}

fn region_wn(spec: &BoundarySpec, ri: usize) -> &ScalarFn {
    match &spec.regions[ri].elec {
        Some(ElecBc::SurfaceCharge(f)) => f,
        _ => unreachable!("tag points at a surface-charge region"),
    }
}

/// Builds the dof map: periodic identification, strong Dirichlet values,
/// electrode multiplier rows, reduced numbering.
fn build_dof_map(inputs: &ProblemInputs) -> Result<(DofMap, Vec<Vec<usize>>)> {
    let mesh = inputs.mesh;
    let re = inputs.re;
    let dim = mesh.dim;
    let n_nodes = mesh.n_nodes();
    let n_u = n_nodes * dim;
    let n_phi = n_nodes;
    let node_master = inputs.tags.periodic.node_master.clone();

    // electrode groups after periodic identification
    let mut electrode_groups: Vec<Vec<usize>> = Vec::new();
    for group in &inputs.tags.electrodes {
        let mut g: Vec<usize> = group.iter().map(|&n| node_master[n]).collect();
        g.sort_unstable();
        g.dedup();
        electrode_groups.push(g);
    }
    let n_lambda: usize = electrode_groups.iter().map(|g| g.len() - 1).sum();

    let mut map = DofMap {
        dim,
        n_nodes,
        n_u,
        n_phi,
        n_lambda,
        node_master,
        is_dirichlet: vec![false; n_u + n_phi + n_lambda],
        prescribed: vec![0.0; n_u + n_phi + n_lambda],
        reduced: Vec::new(),
        n_reduced: 0,
        n_u_reduced: 0,
    };

    // strong Dirichlet from tagged faces
    for (fi, face) in inputs.conn.faces.iter().enumerate() {
        let Some(tags) = &inputs.tags.face_tags[fi] else {
            continue;
        };
        let en = mesh.elem_nodes(face.left);
        let face_nodes: Vec<usize> = re.faces[face.left_local].nodes.iter().map(|&ln| en[ln]).collect();
        if let Mech1Tag::Dirichlet(ri) = tags.mech1 {
            let g1 = region_g1(inputs.spec, ri);
            for &n in &face_nodes {
                let val = g1(mesh.coords[n]);
                for c in 0..dim {
                    let raw = map.master_u(n, c);
                    if !map.is_dirichlet[raw] {
                        map.is_dirichlet[raw] = true;
                        map.prescribed[raw] = val[c];
                    }
                }
            }
        }
        if let ElecTag::Dirichlet(ri) = tags.elec {
            let g3 = region_g3(inputs.spec, ri);
            for &n in &face_nodes {
                let raw = map.master_phi(n);
                if !map.is_dirichlet[raw] {
                    map.is_dirichlet[raw] = true;
                    map.prescribed[raw] = g3(mesh.coords[n]);
                }
            }
        }
    }

    // electrode nodes must stay free
    for group in &electrode_groups {
        for &n in group {
            if map.is_dirichlet[map.phi_raw(n)] {
                return Err(Error::Specification(format!(
                    "node {n} is both on an electrode and potential-Dirichlet"
                )));
            }
        }
    }

    // reduced numbering, keeping the u / phi / lambda block order
    let mut reduced = vec![None; map.n_raw()];
    let mut next = 0usize;
    for node in 0..n_nodes {
        if map.node_master[node] != node {
            continue;
        }
        for c in 0..dim {
            let raw = map.u_raw(node, c);
            if !map.is_dirichlet[raw] {
                reduced[raw] = Some(next);
                next += 1;
            }
        }
    }
    map.n_u_reduced = next;
    for node in 0..n_nodes {
        if map.node_master[node] != node {
            continue;
        }
        let raw = map.phi_raw(node);
        if !map.is_dirichlet[raw] {
            reduced[raw] = Some(next);
            next += 1;
        }
    }
    for k in 0..n_lambda {
        reduced[map.lambda_raw(k)] = Some(next);
        next += 1;
    }
    map.reduced = reduced;
    map.n_reduced = next;
    Ok((map, electrode_groups))
}

/// Boundary and volume load functional (everything except the g2 lift of
/// weak second-Dirichlet faces, which is accumulated with its matrix block).
pub fn assemble_rhs(inputs: &ProblemInputs, dof_map: &DofMap) -> Result<Vec<f64>> {
    let mesh = inputs.mesh;
    let re = inputs.re;
    let dim = mesh.dim;
    let mut rhs = vec![0.0; dof_map.n_raw()];

    // volume sources
    if inputs.sources.body_force.is_some() || inputs.sources.charge.is_some() {
        for e in 0..mesh.n_elems() {
            let geom = re.volume_geometry(&mesh.elem_coords(e))?;
            let local = element_rhs(
                &geom,
                inputs.sources.body_force.as_ref().map(|f| f.as_ref() as &dyn Fn([f64; 3]) -> [f64; 3]),
                inputs.sources.charge.as_ref().map(|f| f.as_ref() as &dyn Fn([f64; 3]) -> f64),
            );
            for (ld, &raw) in dof_map.element_dofs(mesh, e).iter().enumerate() {
                rhs[raw] += local[ld];
            }
        }
    }

    // boundary faces: tractions, double tractions, surface charge
    for (fi, face) in inputs.conn.faces.iter().enumerate() {
        let Some(tags) = &inputs.tags.face_tags[fi] else {
            continue;
        };
        let needs = matches!(tags.mech1, Mech1Tag::Neumann(Some(_)))
            || matches!(tags.mech2, Mech2Tag::Neumann(Some(_)))
            || matches!(tags.elec, ElecTag::Neumann(Some(_)));
        if !needs {
            continue;
        }
        let en = mesh.elem_nodes(face.left);
        let geom = re.face_geometry(&mesh.elem_coords(face.left), face.left_local)?;
        let n_en = geom.n_nodes;
        for q in 0..geom.n_pts {
            let w = geom.weights[q];
            let x = geom.points[q];
            let n = geom.normals[q];
            if let Mech1Tag::Neumann(Some(ri)) = tags.mech1 {
                let t = region_tn(inputs.spec, ri)(x);
                for a in 0..n_en {
                    let na = geom.value(q, a);
                    for c in 0..dim {
                        rhs[dof_map.master_u(en[a], c)] += w * na * t[c];
                    }
                }
            }
            if let Mech2Tag::Neumann(Some(ri)) = tags.mech2 {
                let r = region_rn(inputs.spec, ri)(x);
                for a in 0..n_en {
                    let mut gn = 0.0;
                    for d in 0..dim {
                        gn += geom.grad(q, a, d) * n[d];
                    }
                    for c in 0..dim {
                        rhs[dof_map.master_u(en[a], c)] += w * gn * r[c];
                    }
                }
            }
            if let ElecTag::Neumann(Some(ri)) = tags.elec {
                let wv = region_wn(inputs.spec, ri)(x);
                for a in 0..n_en {
                    rhs[dof_map.master_phi(en[a])] -= w * geom.value(q, a) * wv;
                }
            }
        }
    }

    // corner point loads (2D)
    for &(node, force) in &inputs.tags.corner_loads {
        for c in 0..dim {
            rhs[dof_map.master_u(node, c)] += force[c];
        }
    }

    // edge line loads (3D)
    if !inputs.tags.edge_loads.is_empty() {
        let (pts1d, wts1d) = crate::refelem::gauss_legendre(re.degree + 2)?;
        let corners = re.shape.corner_coords();
        for &(e, le, ref force) in &inputs.tags.edge_loads {
            let pair = re.shape.edge_corners()[le];
            let (ca, cb) = (corners[pair[0]], corners[pair[1]]);
            let ref_pts: Vec<[f64; 3]> = pts1d
                .iter()
                .map(|&s| {
                    let t = 0.5 * (s + 1.0);
                    [
                        ca[0] + t * (cb[0] - ca[0]),
                        ca[1] + t * (cb[1] - ca[1]),
                        ca[2] + t * (cb[2] - ca[2]),
                    ]
                })
                .collect();
            let tab = re.tabulate(&ref_pts, 1)?;
            let coords = mesh.elem_coords(e);
            let en = mesh.elem_nodes(e);
            for (q, wq) in wts1d.iter().enumerate() {
                let mut tan = [0.0; 3];
                let tref = [
                    (cb[0] - ca[0]) / 2.0,
                    (cb[1] - ca[1]) / 2.0,
                    (cb[2] - ca[2]) / 2.0,
                ];
                // dx/ds = sum_a X_a (grad_ref N_a . tref)
                for k in 0..dim {
                    let mut s = 0.0;
                    for a in 0..coords.len() {
                        let mut gdt = 0.0;
                        for d in 0..dim {
                            gdt += tab.grad(q, a, d) * tref[d];
                        }
                        s += coords[a][k] * gdt;
                    }
                    tan[k] = s;
                }
                let dl = (tan[0] * tan[0] + tan[1] * tan[1] + tan[2] * tan[2]).sqrt();
                let mut x = [0.0; 3];
                for a in 0..coords.len() {
                    for k in 0..dim {
                        x[k] += tab.value(q, a) * coords[a][k];
                    }
                }
                let f = force(x);
                for a in 0..coords.len() {
                    let na = tab.value(q, a);
                    for c in 0..dim {
                        rhs[dof_map.master_u(en[a], c)] += wq * dl * na * f[c];
                    }
                }
            }
        }
    }

    Ok(rhs)
}

/// Assembles the full system and applies the constraints.
pub fn assemble(inputs: &ProblemInputs) -> Result<GlobalSystem> {
    let mesh = inputs.mesh;
    let re = inputs.re;
    let (dof_map, electrode_groups) = build_dof_map(inputs)?;

    let with_flexo = inputs
        .mat
        .mu
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .any(|&v| v != 0.0);

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let scatter = |dofs: &[usize], k: &faer::Mat<f64>, triplets: &mut Vec<(usize, usize, f64)>| {
        for (la, &ra) in dofs.iter().enumerate() {
            for (lb, &rb) in dofs.iter().enumerate() {
                let v = k[(la, lb)];
                if v != 0.0 {
                    triplets.push((ra, rb, v));
                }
            }
        }
    };

    // volume terms
    for e in 0..mesh.n_elems() {
        let geom = re.volume_geometry(&mesh.elem_coords(e))?;
        let k_local = element_matrices(&geom, inputs.mat, KernelTerms::all());
        let dofs = dof_map.element_dofs(mesh, e);
        scatter(&dofs, &k_local, &mut triplets);
    }

    // interior faces
    let mut beta_used = 0.0f64;
    for (_fi, face) in inputs.conn.interior_faces() {
        let (geom_l, geom_r, perm) = face_pair_geometry(mesh, re, face)?;
        let h_f = mesh
            .elem_diameter(re, face.left)
            .min(mesh.elem_diameter(re, face.right.unwrap()));
        let beta = inputs.beta.face_value(inputs.mat.young, inputs.mat.l2, h_f);
        beta_used = beta_used.max(beta);
        let left = FaceSide {
            geom: &geom_l,
            perm: None,
            jump_sign: 1.0,
        };
        let right = FaceSide {
            geom: &geom_r,
            perm: Some(&perm),
            jump_sign: -1.0,
        };
        let k_face = face_matrices(&left, &right, inputs.mat, beta, with_flexo, FaceTerms::Stabilized);
        let mut dofs = dof_map.element_dofs(mesh, face.left);
        dofs.extend(dof_map.element_dofs(mesh, face.right.unwrap()));
        scatter(&dofs, &k_face, &mut triplets);
    }

    // load vector (volume + boundary Neumann + point/edge loads)
    let mut rhs_full = assemble_rhs(inputs, &dof_map)?;

    // weak second-Dirichlet boundary faces
    let mut beta_d_used = 0.0f64;
    for (fi, face) in inputs.conn.boundary_faces() {
        let Some(tags) = &inputs.tags.face_tags[fi] else {
            continue;
        };
        let Mech2Tag::Dirichlet(ri) = tags.mech2 else {
            continue;
        };
        let geom = re.face_geometry(&mesh.elem_coords(face.left), face.left_local)?;
        let h_f = mesh.elem_diameter(re, face.left);
        let rule = inputs.beta_d.unwrap_or(inputs.beta);
        let beta_d = rule.face_value(inputs.mat.young, inputs.mat.l2, h_f);
        beta_d_used = beta_d_used.max(beta_d);
        let side = FaceSide {
            geom: &geom,
            perm: None,
            jump_sign: 1.0,
        };
        let g2 = region_g2(inputs.spec, ri);
        let (k_face, rhs_face) = dirichlet2_face(&side, inputs.mat, beta_d, with_flexo, g2.as_ref());
        let dofs = dof_map.element_dofs(mesh, face.left);
        scatter(&dofs, &k_face, &mut triplets);
        for (ld, &raw) in dofs.iter().enumerate() {
            rhs_full[raw] += rhs_face[ld];
        }
    }

    // electrode multiplier rows: phi_i - phi_ref = 0
    let mut lam = 0usize;
    for group in &electrode_groups {
        let ref_raw = dof_map.phi_raw(group[0]);
        for &n in &group[1..] {
            let row = dof_map.lambda_raw(lam);
            let phi_raw = dof_map.phi_raw(n);
            triplets.push((row, phi_raw, 1.0));
            triplets.push((phi_raw, row, 1.0));
            triplets.push((row, ref_raw, -1.0));
            triplets.push((ref_raw, row, -1.0));
            lam += 1;
        }
    }

    let has_u_dirichlet = (0..dof_map.n_u).any(|r| dof_map.is_dirichlet[r]);
    let has_phi_constraint =
        (dof_map.n_u..dof_map.n_u + dof_map.n_phi).any(|r| dof_map.is_dirichlet[r]);

    let (k, f) = apply_constraints(&dof_map, &triplets, &rhs_full)?;

    Ok(GlobalSystem {
        dof_map,
        triplets,
        rhs_full,
        k,
        f,
        beta_used,
        beta_d_used,
        has_u_dirichlet,
        has_phi_constraint,
    })
}

/// Symmetric elimination of prescribed dofs: drops their rows/columns and
/// lifts the prescribed values into the load vector.
pub fn apply_constraints(
    dof_map: &DofMap,
    triplets: &[(usize, usize, f64)],
    rhs_full: &[f64],
) -> Result<(SparseColMat<usize, f64>, Vec<f64>)> {
    let n = dof_map.n_reduced;
    let mut reduced_triplets: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(triplets.len());
    let mut f = vec![0.0; n];
    for (raw, red) in dof_map.reduced.iter().enumerate() {
        if let Some(r) = red {
            f[*r] = rhs_full[raw];
        }
    }
    for &(r, c, v) in triplets {
        match (dof_map.reduced[r], dof_map.reduced[c]) {
            (Some(rr), Some(cc)) => reduced_triplets.push(Triplet::new(rr, cc, v)),
            (Some(rr), None) if dof_map.is_dirichlet[c] => {
                f[rr] -= v * dof_map.prescribed[c];
            }
            _ => {}
        }
    }
    let k = SparseColMat::try_new_from_triplets(n, n, &reduced_triplets)
        .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))?;
    Ok((k, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material_tensors, MaterialParameters};
    use crate::mesh::{
        apply_boundary_spec, build_connectivity, structured_mesh, zero_scalar, zero_vector,
        BoundarySpec, Mech2Bc,
    };
    use crate::refelem::{ElemShape, ReferenceElement};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn two_triangle_problem() -> (Mesh, ReferenceElement, Connectivity) {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[1, 1, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        (mesh, re, conn)
    }

    #[test]
    fn face_terms_vanish_for_smooth_linear_field() {
        let (mesh, re, conn) = two_triangle_problem();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let face = conn.faces.iter().find(|f| f.is_interior()).unwrap();
        let (geom_l, geom_r, perm) = face_pair_geometry(&mesh, &re, face).unwrap();
        let left = FaceSide {
            geom: &geom_l,
            perm: None,
            jump_sign: 1.0,
        };
        let right = FaceSide {
            geom: &geom_r,
            perm: Some(&perm),
            jump_sign: -1.0,
        };
        let k = face_matrices(&left, &right, &mat, 13.7, false, FaceTerms::Stabilized);
        // nodal values of u = (2x + 3y, -x) on both elements, phi = 0
        let mut vals = Vec::new();
        for e in [face.left, face.right.unwrap()] {
            for &n in mesh.elem_nodes(e) {
                let x = mesh.coords[n];
                vals.push(2.0 * x[0] + 3.0 * x[1]);
                vals.push(-x[0]);
            }
            vals.extend(std::iter::repeat_n(0.0, mesh.elem_nodes(e).len()));
        }
        let mut scale = 0.0f64;
        for a in 0..k.nrows() {
            for b in 0..k.ncols() {
                scale = scale.max(k[(a, b)].abs());
            }
        }
        for a in 0..k.nrows() {
            let mut s = 0.0;
            for b in 0..k.ncols() {
                s += k[(a, b)] * vals[b];
            }
            assert!(s.abs() < 1e-12 * scale.max(1.0), "row {a}: residual {s}");
        }
    }

    #[test]
    fn doubling_beta_doubles_penalty_only() {
        let (mesh, re, conn) = two_triangle_problem();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let face = conn.faces.iter().find(|f| f.is_interior()).unwrap();
        let (geom_l, geom_r, perm) = face_pair_geometry(&mesh, &re, face).unwrap();
        let left = FaceSide {
            geom: &geom_l,
            perm: None,
            jump_sign: 1.0,
        };
        let right = FaceSide {
            geom: &geom_r,
            perm: Some(&perm),
            jump_sign: -1.0,
        };
        let beta = 7.0;
        let k1 = face_matrices(&left, &right, &mat, beta, false, FaceTerms::Stabilized);
        let k2 = face_matrices(&left, &right, &mat, 2.0 * beta, false, FaceTerms::Stabilized);
        let pen = face_matrices(&left, &right, &mat, beta, false, FaceTerms::PenaltyOnly);
        for a in 0..k1.nrows() {
            for b in 0..k1.ncols() {
                assert_relative_eq!(k2[(a, b)] - k1[(a, b)], pen[(a, b)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn penalty_energy_matches_1d_quadrature_oracle() {
        // two unit quads [0,1]^2 and [1,2]x[0,1], p=2; u_x kinked across x=1
        let mesh =
            structured_mesh(&[0.0; 3], &[2.0, 1.0, 0.0], &[2, 1, 0], ElemShape::Quad, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.0, 1.0), 2).unwrap();
        let face = conn.faces.iter().find(|f| f.is_interior()).unwrap();
        let (geom_l, geom_r, perm) = face_pair_geometry(&mesh, &re, face).unwrap();
        let left = FaceSide {
            geom: &geom_l,
            perm: None,
            jump_sign: 1.0,
        };
        let right = FaceSide {
            geom: &geom_r,
            perm: Some(&perm),
            jump_sign: -1.0,
        };
        let beta = 3.25;
        let pen = face_matrices(&left, &right, &mat, beta, false, FaceTerms::PenaltyOnly);

        // u_x = (x^2 - x) y on the left, (-(x-1) + 3 (x-1)^2) y on the right:
        // continuous at x = 1, normal slope jumps by 2y
        let fl = |x: f64, y: f64| (x * x - x) * y;
        let fr = |x: f64, y: f64| (-(x - 1.0) + 3.0 * (x - 1.0) * (x - 1.0)) * y;
        let mut vals = Vec::new();
        let (el, er) = if face.left == 0 {
            (fl as fn(f64, f64) -> f64, fr as fn(f64, f64) -> f64)
        } else {
            (fr as fn(f64, f64) -> f64, fl as fn(f64, f64) -> f64)
        };
        for (e, f) in [(face.left, el), (face.right.unwrap(), er)] {
            for &n in mesh.elem_nodes(e) {
                let x = mesh.coords[n];
                vals.push(f(x[0], x[1]));
                vals.push(0.0);
            }
            vals.extend(std::iter::repeat_n(0.0, mesh.elem_nodes(e).len()));
        }
        let mut energy = 0.0;
        for a in 0..pen.nrows() {
            for b in 0..pen.ncols() {
                energy += vals[a] * pen[(a, b)] * vals[b];
            }
        }
        // oracle: beta * int_0^1 (2y)^2 dy by independent 1D Gauss quadrature
        let (pts, wts) = crate::refelem::gauss_legendre(6).unwrap();
        let mut oracle = 0.0;
        for (s, w) in pts.iter().zip(&wts) {
            let y = 0.5 * (s + 1.0);
            oracle += 0.5 * w * (2.0 * y) * (2.0 * y);
        }
        oracle *= beta;
        assert_relative_eq!(energy, oracle, max_relative = 1e-12);
    }

    #[test]
    fn assembled_system_is_symmetric_and_kills_rigid_modes() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[3, 3, 0], ElemShape::Triangle, 3).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 3).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let params = MaterialParameters {
            young: 2.5,
            nu: 0.25,
            l: 1.1,
            kappa: [1.21; 3],
            e_l: 7.2,
            e_t: 1.33,
            e_s: 1.73,
            mu_l: 1.5,
            mu_t: 1.34,
            mu_s: 5.47,
            piezo_axis: 0,
            plane: Default::default(),
        };
        let mat = build_material_tensors(&params, 2).unwrap();
        let spec = BoundarySpec::everywhere(None, None, None);
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

        assert!(system.symmetry_error() < 1e-12, "{}", system.symmetry_error());

        // rigid modes: translations and in-plane rotation, phi = 0
        let n_raw = system.dof_map.n_raw();
        let mut knorm = 0.0f64;
        for &(_, _, v) in &system.triplets {
            knorm = knorm.max(v.abs());
        }
        for mode in 0..3 {
            let mut x = vec![0.0; n_raw];
            for node in 0..mesh.n_nodes() {
                let p = mesh.coords[node];
                let (ux, uy) = match mode {
                    0 => (1.0, 0.0),
                    1 => (0.0, 1.0),
                    _ => (-p[1], p[0]),
                };
                x[system.dof_map.u_raw(node, 0)] = ux;
                x[system.dof_map.u_raw(node, 1)] = uy;
            }
            let y = system.apply_full(&x);
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (r, v) in y.iter().enumerate() {
                assert!(
                    v.abs() < 1e-10 * knorm * xmax.max(1.0),
                    "mode {mode} row {r}: {v}"
                );
            }
        }
    }

    #[test]
    fn full_dirichlet_dof_counting() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.5), 2).unwrap();
        let spec = BoundarySpec::everywhere(
            Some(Mech1Bc::Displacement(zero_vector())),
            Some(Mech2Bc::DoubleTraction(zero_vector())),
            None,
        );
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
            beta: BetaRule::Formula { alpha: 10.0 },
            beta_d: None,
        })
        .unwrap();
        // 5x5 nodes, boundary ring has 16 -> 9 interior nodes
        let n_nodes = mesh.n_nodes();
        assert_eq!(n_nodes, 25);
        assert_eq!(system.dof_map.n_u_reduced, 9 * 2);
        // all phi free (no potential dirichlet)
        assert_eq!(system.dof_map.n_reduced, 9 * 2 + 25);
    }

    #[test]
    fn electrode_constraint_counts_and_conflicts() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.5), 2).unwrap();
        let spec = BoundarySpec {
            regions: vec![crate::mesh::BoundaryRegion {
                name: "clamp".into(),
                selector: Arc::new(|_| true),
                mech1: Some(Mech1Bc::Displacement(zero_vector())),
                mech2: None,
                elec: None,
            }],
            electrodes: vec![Arc::new(|c: [f64; 3]| c[1] < 1e-9)],
            ..Default::default()
        };
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
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        })
        .unwrap();
        // bottom side has 5 nodes -> 4 multipliers
        assert_eq!(system.dof_map.n_lambda, 4);

        // conflicting: electrode nodes also potential-Dirichlet
        let conn2 = build_connectivity(&mesh, &re).unwrap();
        let spec2 = BoundarySpec {
            regions: vec![crate::mesh::BoundaryRegion {
                name: "ground".into(),
                selector: Arc::new(|_| true),
                mech1: None,
                mech2: None,
                elec: Some(crate::mesh::ElecBc::Potential(zero_scalar())),
            }],
            electrodes: vec![Arc::new(|c: [f64; 3]| c[1] < 1e-9)],
            ..Default::default()
        };
        let (conn2, tags2) = apply_boundary_spec(&mesh, &re, conn2, &spec2).unwrap();
        let err = assemble(&ProblemInputs {
            mesh: &mesh,
            re: &re,
            conn: &conn2,
            tags: &tags2,
            spec: &spec2,
            mat: &mat,
            sources: &sources,
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        });
        assert!(err.is_err());
    }

    #[test]
    fn face_terms_grow_the_sparsity_pattern() {
        // the face integrals couple all dofs of the two adjacent elements,
        // so the stencil is strictly larger than the element-only pattern
        let (mesh, re, conn) = two_triangle_problem();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let spec = BoundarySpec::everywhere(None, None, None);
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
            beta: BetaRule::Explicit(10.0),
            beta_d: None,
        })
        .unwrap();
        use std::collections::HashSet;
        let pattern: HashSet<(usize, usize)> = system.triplets.iter().map(|t| (t.0, t.1)).collect();

        // pairs of dofs whose nodes share an element (the classical stencil)
        let mut elem_pattern = HashSet::new();
        for e in 0..mesh.n_elems() {
            let dofs = system.dof_map.element_dofs(&mesh, e);
            for &a in &dofs {
                for &b in &dofs {
                    elem_pattern.insert((a, b));
                }
            }
        }
        let cross: Vec<(usize, usize)> = pattern
            .iter()
            .filter(|p| !elem_pattern.contains(p))
            .copied()
            .collect();
        assert!(!cross.is_empty(), "face terms must extend the stencil");
        // in particular, nodes private to each of the two face-adjacent
        // elements are coupled
        let face = conn.faces.iter().find(|f| f.is_interior()).unwrap();
        let left_nodes = mesh.elem_nodes(face.left);
        let right_nodes = mesh.elem_nodes(face.right.unwrap());
        let lonely_left = left_nodes.iter().find(|n| !right_nodes.contains(n)).unwrap();
        let lonely_right = right_nodes.iter().find(|n| !left_nodes.contains(n)).unwrap();
        let coupled = (0..2).any(|c1| {
            (0..2).any(|c2| {
                pattern.contains(&(
                    system.dof_map.u_raw(*lonely_left, c1),
                    system.dof_map.u_raw(*lonely_right, c2),
                ))
            })
        });
        assert!(coupled);
    }

    #[test]
    fn matrix_dump_has_coordinate_format() {
        let (mesh, re, conn) = two_triangle_problem();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.5), 2).unwrap();
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
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        })
        .unwrap();
        let path = std::env::temp_dir().join("c0ipm_matrix_dump.txt");
        system.dump_matrix(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        let toks: Vec<&str> = first.split_whitespace().collect();
        assert_eq!(toks.len(), 3);
        toks[0].parse::<usize>().unwrap();
        toks[1].parse::<usize>().unwrap();
        toks[2].parse::<f64>().unwrap();
    }

    #[test]
    fn homogeneous_neumann_zero_rhs() {
        let (mesh, re, conn) = two_triangle_problem();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.5), 2).unwrap();
        let spec = BoundarySpec::everywhere(None, None, None);
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
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        })
        .unwrap();
        assert!(system.f.iter().all(|&v| v == 0.0));
        assert!(system.rhs_full.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn corner_load_hits_single_dof() {
        let mesh =
            structured_mesh(&[0.0; 3], &[2.0, 1.0, 0.0], &[4, 2, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let spec = BoundarySpec {
            corner_loads: vec![crate::mesh::CornerLoad {
                location: [2.0, 1.0, 0.0],
                force: [0.0, -3.5, 0.0],
            }],
            ..Default::default()
        };
        let (conn, tags) = apply_boundary_spec(&mesh, &re, conn, &spec).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.3, 0.0), 2).unwrap();
        let sources = VolumeSources::default();
        let inputs = ProblemInputs {
            mesh: &mesh,
            re: &re,
            conn: &conn,
            tags: &tags,
            spec: &spec,
            mat: &mat,
            sources: &sources,
            beta: BetaRule::Explicit(1.0),
            beta_d: None,
        };
        let (dof_map, _) = build_dof_map(&inputs).unwrap();
        let rhs = assemble_rhs(&inputs, &dof_map).unwrap();
        let nz: Vec<(usize, f64)> = rhs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        assert_eq!(nz.len(), 1);
        let (dof, v) = nz[0];
        assert_relative_eq!(v, -3.5);
        // the dof belongs to the corner vertex at (2, 1)
        let node = dof / 2;
        assert_relative_eq!(mesh.coords[node][0], 2.0);
        assert_relative_eq!(mesh.coords[node][1], 1.0);
    }
}
