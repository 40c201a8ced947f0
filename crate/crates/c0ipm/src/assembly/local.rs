//! Local (element and face) matrix kernels.
//!
//! Local dof layout: all displacement dofs first (node-major, `a*dim + c`),
//! then the potential dofs. Face kernels operate on the concatenation
//! [uL, phiL, uR, phiR].

use crate::material::MaterialTensors;
use crate::refelem::GeometryFactors;
use faer::Mat;

/// Which physical terms a kernel includes; the penalty estimator reuses the
/// kernels with only the strain-gradient part switched on.
#[derive(Debug, Clone, Copy)]
pub struct KernelTerms {
    pub elasticity: bool,
    pub strain_gradient: bool,
    pub coupling: bool,
    pub dielectric: bool,
}

impl KernelTerms {
    pub fn all() -> Self {
        KernelTerms {
            elasticity: true,
            strain_gradient: true,
            coupling: true,
            dielectric: true,
        }
    }

    /// Purely mechanical strain-gradient form (the `a` form of the penalty
    /// eigenproblem).
    pub fn strain_gradient_only() -> Self {
        KernelTerms {
            elasticity: false,
            strain_gradient: true,
            coupling: false,
            dielectric: false,
        }
    }

    /// Mechanical block: elasticity + strain gradient.
    pub fn mechanical() -> Self {
        KernelTerms {
            elasticity: true,
            strain_gradient: true,
            coupling: false,
            dielectric: false,
        }
    }
}

pub fn n_local(dim: usize, n_en: usize) -> usize {
    n_en * (dim + 1)
}

/// Scratch space for the strain operators of one element side at one
/// quadrature point.
struct StrainOps {
    dim: usize,
    n_u: usize,
    /// eps[(A, i, j)]: strain of u-dof A.
    eps: Vec<f64>,
    /// deps[(A, i, j, k)]: strain gradient of u-dof A.
    deps: Vec<f64>,
}

impl StrainOps {
    fn new(dim: usize, n_en: usize) -> Self {
        let n_u = n_en * dim;
        StrainOps {
            dim,
            n_u,
            eps: vec![0.0; n_u * 9],
            deps: vec![0.0; n_u * 27],
        }
    }

    #[inline]
    fn eps_at(&self, a: usize, i: usize, j: usize) -> f64 {
        self.eps[(a * 3 + i) * 3 + j]
    }

    #[inline]
    fn deps_at(&self, a: usize, i: usize, j: usize, k: usize) -> f64 {
        self.deps[((a * 3 + i) * 3 + j) * 3 + k]
    }

    /// Fills the strain and strain-gradient operators from the physical
    /// gradients/Hessians at quadrature point `q`.
    fn fill(&mut self, geom: &GeometryFactors, q: usize, with_hessian: bool) {
        let dim = self.dim;
        self.eps.iter_mut().for_each(|v| *v = 0.0);
        self.deps.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..geom.n_nodes {
            for c in 0..dim {
                let dof = a * dim + c;
                for j in 0..dim {
                    let g = 0.5 * geom.grad(q, a, j);
                    self.eps[(dof * 3 + c) * 3 + j] += g;
                    self.eps[(dof * 3 + j) * 3 + c] += g;
                    if with_hessian {
                        for k in 0..dim {
                            let h = 0.5 * geom.hess(q, a, j, k);
                            self.deps[((dof * 3 + c) * 3 + j) * 3 + k] += h;
                            self.deps[((dof * 3 + j) * 3 + c) * 3 + k] += h;
                        }
                    }
                }
            }
        }
        let _ = self.n_u;
    }
}

/// Volume contribution of one element. Returns the (n_local x n_local)
/// symmetric block over [u, phi].
pub fn element_matrices(
    geom: &GeometryFactors,
    mat: &MaterialTensors,
    terms: KernelTerms,
) -> Mat<f64> {
    let dim = geom.dim;
    let n_en = geom.n_nodes;
    let n_u = n_en * dim;
    let n_loc = n_local(dim, n_en);
    let mut k = Mat::<f64>::zeros(n_loc, n_loc);

    let mut ops = StrainOps::new(dim, n_en);
    // per-dof contractions: s = C:eps, t_k = C:(d_k eps), cv = coupling vector
    let mut s_buf = vec![0.0; n_u * 9];
    let mut t_buf = vec![0.0; n_u * 27];
    let mut cv_buf = vec![0.0; n_u * 3];

    let needs_hessian = terms.strain_gradient || terms.coupling;
    for q in 0..geom.n_pts {
        let w = geom.weights[q];
        ops.fill(geom, q, needs_hessian);

        s_buf.iter_mut().for_each(|v| *v = 0.0);
        t_buf.iter_mut().for_each(|v| *v = 0.0);
        cv_buf.iter_mut().for_each(|v| *v = 0.0);
        for dof in 0..n_u {
            for i in 0..dim {
                for j in 0..dim {
                    let mut s = 0.0;
                    for l in 0..dim {
                        for m in 0..dim {
                            s += mat.c[i][j][l][m] * ops.eps_at(dof, l, m);
                        }
                    }
                    s_buf[(dof * 3 + i) * 3 + j] = s;
                    if terms.strain_gradient {
                        for kk in 0..dim {
                            let mut t = 0.0;
                            for l in 0..dim {
                                for m in 0..dim {
                                    t += mat.c[i][j][l][m] * ops.deps_at(dof, l, m, kk);
                                }
                            }
                            t_buf[((dof * 3 + i) * 3 + j) * 3 + kk] = t;
                        }
                    }
                }
            }
            if terms.coupling {
                for l in 0..dim {
                    let mut cv = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            cv += mat.e[l][i][j] * ops.eps_at(dof, i, j);
                            for kk in 0..dim {
                                cv += mat.mu[l][i][j][kk] * ops.deps_at(dof, i, j, kk);
                            }
                        }
                    }
                    cv_buf[dof * 3 + l] = cv;
                }
            }
        }

        // u-u block
        for a in 0..n_u {
            for b in a..n_u {
                let mut v = 0.0;
                if terms.elasticity {
                    for i in 0..dim {
                        for j in 0..dim {
                            v += ops.eps_at(a, i, j) * s_buf[(b * 3 + i) * 3 + j];
                        }
                    }
                }
                if terms.strain_gradient {
                    let mut sg = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            for kk in 0..dim {
                                sg += ops.deps_at(a, i, j, kk) * t_buf[((b * 3 + i) * 3 + j) * 3 + kk];
                            }
                        }
                    }
                    v += mat.l2 * sg;
                }
                if v != 0.0 {
                    let wv = w * v;
                    k[(a, b)] += wv;
                    if a != b {
                        k[(b, a)] += wv;
                    }
                }
            }
        }

        // u-phi coupling and phi-phi dielectric
        if terms.coupling {
            for a in 0..n_u {
                for b in 0..n_en {
                    let col = n_u + b;
                    let mut v = 0.0;
                    for l in 0..dim {
                        v += cv_buf[a * 3 + l] * geom.grad(q, b, l);
                    }
                    let wv = w * v;
                    k[(a, col)] += wv;
                    k[(col, a)] += wv;
                }
            }
        }
        if terms.dielectric {
            for a in 0..n_en {
                for b in a..n_en {
                    let mut v = 0.0;
                    for l in 0..dim {
                        v += mat.kappa[l] * geom.grad(q, a, l) * geom.grad(q, b, l);
                    }
                    let wv = -w * v;
                    k[(n_u + a, n_u + b)] += wv;
                    if a != b {
                        k[(n_u + b, n_u + a)] += wv;
                    }
                }
            }
        }
    }
    k
}

/// Volume right-hand side of one element: body force and free charge.
pub fn element_rhs(
    geom: &GeometryFactors,
    body_force: Option<&dyn Fn([f64; 3]) -> [f64; 3]>,
    charge: Option<&dyn Fn([f64; 3]) -> f64>,
) -> Vec<f64> {
    let dim = geom.dim;
    let n_en = geom.n_nodes;
    let n_u = n_en * dim;
    let mut rhs = vec![0.0; n_local(dim, n_en)];
    for q in 0..geom.n_pts {
        let w = geom.weights[q];
        let x = geom.points[q];
        if let Some(b) = body_force {
            let bv = b(x);
            for a in 0..n_en {
                let na = geom.value(q, a);
                for c in 0..dim {
                    rhs[a * dim + c] += w * na * bv[c];
                }
            }
        }
        if let Some(qf) = charge {
            let qv = qf(x);
            for a in 0..n_en {
                rhs[n_u + a] -= w * geom.value(q, a) * qv;
            }
        }
    }
    rhs
}

/// One side of an interior face as seen by the kernel: geometry factors at
/// the side's own face quadrature, plus the mapping from left quadrature
/// index to this side's index.
pub struct FaceSide<'a> {
    pub geom: &'a GeometryFactors,
    /// qp_this_side = perm[qp_left]; identity for the left side.
    pub perm: Option<&'a [usize]>,
    /// sign of the side in the jump operator: +1 left, -1 right.
    pub jump_sign: f64,
}

impl FaceSide<'_> {
    #[inline]
    fn qp(&self, left_q: usize) -> usize {
        match self.perm {
            Some(p) => p[left_q],
            None => left_q,
        }
    }
}

/// Computes, for every dof of one side, the jump row (normal-derivative
/// operator) and the double-traction row at one quadrature point.
#[allow(clippy::too_many_arguments)]
fn side_rows(
    side: &FaceSide,
    left_q: usize,
    normal: &[f64; 3],
    mat: &MaterialTensors,
    mean_factor: f64,
    with_flexo: bool,
    jump_out: &mut [f64],
    mean_out: &mut [f64],
) {
    let geom = side.geom;
    let dim = geom.dim;
    let n_en = geom.n_nodes;
    let n_u = n_en * dim;
    let q = side.qp(left_q);

    // m[l][i] = sum_jk mu[l][i][j][k] n_j n_k
    let mut mnn = [[0.0; 3]; 3];
    if with_flexo {
        for l in 0..dim {
            for i in 0..dim {
                let mut s = 0.0;
                for j in 0..dim {
                    for kk in 0..dim {
                        s += mat.mu[l][i][j][kk] * normal[j] * normal[kk];
                    }
                }
                mnn[l][i] = s;
            }
        }
    }

    for a in 0..n_en {
        // gradient dot normal (same for every component of the node)
        let mut gn = 0.0;
        for d in 0..dim {
            gn += geom.grad(q, a, d) * normal[d];
        }
        for c in 0..dim {
            let dof = a * dim + c;
            jump_out[dof * 3 + c] = side.jump_sign * gn;

            // r^sg_i = l^2 sum_k n_k [ (C : d_k eps) n ]_i
            for i in 0..dim {
                let mut r = 0.0;
                for kk in 0..dim {
                    // (C : d_k eps)_{ij} n_j, with d_k eps of dof (a, c)
                    let mut cn = 0.0;
                    for j in 0..dim {
                        // contraction C_{ijlm} deps_{lm,k}: by minor symmetry
                        // equals C_{ijcm} H_a[m][k] (strain from one nodal
                        // component)
                        let mut s = 0.0;
                        for m in 0..dim {
                            s += mat.c[i][j][c][m] * geom.hess(q, a, m, kk);
                        }
                        cn += s * normal[j];
                    }
                    r += normal[kk] * cn;
                }
                mean_out[dof * 3 + i] = mean_factor * mat.l2 * r;
            }
        }
        // flexoelectric double traction of the phi dof
        if with_flexo {
            let dof = n_u + a;
            for i in 0..dim {
                let mut r = 0.0;
                for l in 0..dim {
                    r += mnn[l][i] * geom.grad(q, a, l);
                }
                mean_out[dof * 3 + i] = mean_factor * r;
            }
        }
    }
}

/// Interior-face contribution: consistency terms and the beta penalty for
/// the pair of elements. Returns the block over [uL, phiL, uR, phiR].
pub fn face_matrices(
    left: &FaceSide,
    right: &FaceSide,
    mat: &MaterialTensors,
    beta: f64,
    with_flexo: bool,
    terms: FaceTerms,
) -> Mat<f64> {
    let dim = left.geom.dim;
    let (n_l, n_r) = (left.geom.n_nodes, right.geom.n_nodes);
    let loc_l = n_local(dim, n_l);
    let loc_r = n_local(dim, n_r);
    let n_loc = loc_l + loc_r;
    let mut k = Mat::<f64>::zeros(n_loc, n_loc);

    let mut jump = vec![0.0; n_loc * 3];
    let mut mean = vec![0.0; n_loc * 3];

    for q in 0..left.geom.n_pts {
        let w = left.geom.weights[q];
        let n = left.geom.normals[q];
        jump.iter_mut().for_each(|v| *v = 0.0);
        mean.iter_mut().for_each(|v| *v = 0.0);
        side_rows(left, q, &n, mat, 0.5, with_flexo, &mut jump[..loc_l * 3], &mut mean[..loc_l * 3]);
        side_rows(
            right,
            q,
            &n,
            mat,
            0.5,
            with_flexo,
            &mut jump[loc_l * 3..],
            &mut mean[loc_l * 3..],
        );
        accumulate_face(&mut k, &jump, &mean, w, beta, dim, terms);
    }
    k
}

/// Which face terms to accumulate (the penalty estimator uses the plain
/// mean-mean product instead of the stabilized form).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTerms {
    /// -J^T R - R^T J + beta J^T J (the stabilized weak form).
    Stabilized,
    /// R^T R (the `b` form of the penalty eigenproblem).
    MeanMean,
    /// J^T J only (diagnostics).
    PenaltyOnly,
}

fn accumulate_face(
    k: &mut Mat<f64>,
    jump: &[f64],
    mean: &[f64],
    w: f64,
    beta: f64,
    dim: usize,
    terms: FaceTerms,
) {
    let n_loc = k.nrows();
    match terms {
        FaceTerms::Stabilized => {
            for a in 0..n_loc {
                let ja = &jump[a * 3..a * 3 + 3];
                let ra = &mean[a * 3..a * 3 + 3];
                let a_has_jump = ja.iter().any(|&v| v != 0.0);
                let a_has_mean = ra.iter().any(|&v| v != 0.0);
                if !a_has_jump && !a_has_mean {
                    continue;
                }
                for b in 0..n_loc {
                    let jb = &jump[b * 3..b * 3 + 3];
                    let rb = &mean[b * 3..b * 3 + 3];
                    let mut v = 0.0;
                    for i in 0..dim {
                        v -= ja[i] * rb[i]; // -J^T R
                        v -= ra[i] * jb[i]; // -R^T J
                        v += beta * ja[i] * jb[i];
                    }
                    if v != 0.0 {
                        k[(a, b)] += w * v;
                    }
                }
            }
        }
        FaceTerms::MeanMean => {
            for a in 0..n_loc {
                let ra = &mean[a * 3..a * 3 + 3];
                if ra.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for b in 0..n_loc {
                    let rb = &mean[b * 3..b * 3 + 3];
                    let mut v = 0.0;
                    for i in 0..dim {
                        v += ra[i] * rb[i];
                    }
                    if v != 0.0 {
                        k[(a, b)] += w * v;
                    }
                }
            }
        }
        FaceTerms::PenaltyOnly => {
            for a in 0..n_loc {
                let ja = &jump[a * 3..a * 3 + 3];
                if ja.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for b in 0..n_loc {
                    let jb = &jump[b * 3..b * 3 + 3];
                    let mut v = 0.0;
                    for i in 0..dim {
                        v += beta * ja[i] * jb[i];
                    }
                    if v != 0.0 {
                        k[(a, b)] += w * v;
                    }
                }
            }
        }
    }
}

/// Weak second-Dirichlet terms on a boundary face (Nitsche-type): the LHS
/// block and the g2-dependent load. The mean factor is 1 on the boundary.
pub fn dirichlet2_face(
    side: &FaceSide,
    mat: &MaterialTensors,
    beta_d: f64,
    with_flexo: bool,
    g2: &dyn Fn([f64; 3]) -> [f64; 3],
) -> (Mat<f64>, Vec<f64>) {
    let dim = side.geom.dim;
    let n_en = side.geom.n_nodes;
    let n_loc = n_local(dim, n_en);
    let mut k = Mat::<f64>::zeros(n_loc, n_loc);
    let mut rhs = vec![0.0; n_loc];

    let mut jump = vec![0.0; n_loc * 3];
    let mut mean = vec![0.0; n_loc * 3];
    for q in 0..side.geom.n_pts {
        let w = side.geom.weights[q];
        let n = side.geom.normals[q];
        jump.iter_mut().for_each(|v| *v = 0.0);
        mean.iter_mut().for_each(|v| *v = 0.0);
        side_rows(side, q, &n, mat, 1.0, with_flexo, &mut jump, &mut mean);
        accumulate_face(&mut k, &jump, &mean, w, beta_d, dim, FaceTerms::Stabilized);
        let g = g2(side.geom.points[q]);
        for b in 0..n_loc {
            let mut v = 0.0;
            for i in 0..dim {
                v += (-mean[b * 3 + i] + beta_d * jump[b * 3 + i]) * g[i];
            }
            rhs[b] += w * v;
        }
    }
    (k, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material_tensors, MaterialParameters};
    use crate::refelem::{ElemShape, ReferenceElement};
    use approx::assert_relative_eq;

    fn unit_triangle_geom(re: &ReferenceElement) -> GeometryFactors {
        let coords = re.nodes.clone();
        re.volume_geometry(&coords).unwrap()
    }

    #[test]
    fn rigid_translation_in_kernel() {
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let geom = unit_triangle_geom(&re);
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let k = element_matrices(&geom, &mat, KernelTerms::mechanical());
        let n_en = re.n_nodes();
        // u = constant translation in x: zero strain -> K u = 0
        let mut u = vec![0.0; n_local(2, n_en)];
        for a in 0..n_en {
            u[a * 2] = 1.0;
        }
        for row in 0..k.nrows() {
            let mut s = 0.0;
            for col in 0..k.ncols() {
                s += k[(row, col)] * u[col];
            }
            assert!(s.abs() < 1e-12, "row {row}: {s}");
        }
    }

    #[test]
    fn zero_length_scale_reduces_to_elasticity() {
        let re = ReferenceElement::new(ElemShape::Triangle, 3).unwrap();
        let geom = unit_triangle_geom(&re);
        let with_l =
            build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 0.0), 2).unwrap();
        let k_sg = element_matrices(&geom, &with_l, KernelTerms::mechanical());
        let k_el = element_matrices(&geom, &with_l, KernelTerms {
            strain_gradient: false,
            ..KernelTerms::mechanical()
        });
        for a in 0..k_sg.nrows() {
            for b in 0..k_sg.ncols() {
                assert_relative_eq!(k_sg[(a, b)], k_el[(a, b)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cst_stiffness_oracle() {
        // p=1 triangle, E=1, nu=0: closed-form constant-strain stiffness.
        let re = ReferenceElement::new(ElemShape::Triangle, 1).unwrap();
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let geom = re.volume_geometry(&coords).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(1.0, 0.0, 0.0), 2).unwrap();
        let k = element_matrices(&geom, &mat, KernelTerms::mechanical());

        // Independent CST oracle: K = A B^T D B with B the strain-displacement
        // matrix for the unit right triangle, D = diag-ish plane-strain matrix.
        // For E=1, nu=0: D = [[1,0,0],[0,1,0],[0,0,0.5]] (Voigt, gamma_xy).
        let area = 0.5;
        // shape gradients: N0 = 1-x-y, N1 = x, N2 = y
        let dn = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut b = [[0.0; 6]; 3];
        for a in 0..3 {
            b[0][a * 2] = dn[a][0];
            b[1][a * 2 + 1] = dn[a][1];
            b[2][a * 2] = dn[a][1];
            b[2][a * 2 + 1] = dn[a][0];
        }
        let d = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]];
        for i in 0..6 {
            for j in 0..6 {
                let mut v = 0.0;
                for r in 0..3 {
                    for c in 0..3 {
                        v += b[r][i] * d[r][c] * b[c][j];
                    }
                }
                v *= area;
                assert_relative_eq!(k[(i, j)], v, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn element_kernel_is_symmetric_with_coupling() {
        let re = ReferenceElement::new(ElemShape::Triangle, 3).unwrap();
        let geom = unit_triangle_geom(&re);
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
        let k = element_matrices(&geom, &mat, KernelTerms::all());
        let mut max = 0.0f64;
        let mut asym = 0.0f64;
        for a in 0..k.nrows() {
            for b in 0..k.ncols() {
                max = max.max(k[(a, b)].abs());
                asym = asym.max((k[(a, b)] - k[(b, a)]).abs());
            }
        }
        assert!(asym < 1e-12 * max);
    }

    #[test]
    fn constant_body_force_p1_load() {
        let re = ReferenceElement::new(ElemShape::Triangle, 1).unwrap();
        let coords = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let geom = re.volume_geometry(&coords).unwrap();
        let b = |_x: [f64; 3]| [3.0, -6.0, 0.0];
        let rhs = element_rhs(&geom, Some(&b), None);
        // exact for linear basis: each vertex gets b * area / 3
        let area = 0.5;
        for a in 0..3 {
            assert_relative_eq!(rhs[a * 2], 3.0 * area / 3.0, epsilon = 1e-14);
            assert_relative_eq!(rhs[a * 2 + 1], -6.0 * area / 3.0, epsilon = 1e-14);
        }
    }
}
