//! Stabilization parameter estimation.
//!
//! The mean double-traction norm on interior faces is bounded by the volume
//! strain-gradient energy through the largest eigenvalue of the generalized
//! problem B x = lambda A x, where A discretizes the strain-gradient form
//! and B the face mean-traction product, both restricted to displacement
//! dofs. Any beta above that eigenvalue makes the stabilized mechanical
//! bilinear form coercive; the closed-form scaling beta = alpha E l^2 / h
//! covers fine meshes once alpha is calibrated on a coarse one.

use crate::assembly::{element_matrices, face_matrices, face_pair_geometry, FaceSide, FaceTerms, KernelTerms};
use crate::error::{Error, Result};
use crate::material::MaterialTensors;
use crate::mesh::{Connectivity, Mesh};
use crate::refelem::ReferenceElement;
use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Discrete forms of the penalty eigenproblem, on raw displacement dofs.
pub struct PenaltyForms {
    pub n: usize,
    pub a_triplets: Vec<(usize, usize, f64)>,
    pub b_triplets: Vec<(usize, usize, f64)>,
    /// Affine displacement fields (translations + linear maps): the known
    /// kernel of the strain-gradient form, dim*(dim+1) vectors.
    pub kernel: Vec<Vec<f64>>,
    /// Characteristic element size (largest diameter).
    pub h_char: f64,
    pub young: f64,
    pub l2: f64,
}

/// Result of the eigenvalue estimate.
#[derive(Debug, Clone)]
pub struct PenaltyEstimate {
    /// Largest generalized eigenvalue (same units as beta).
    pub lambda_max: f64,
    /// lambda_max * h / (E l^2).
    pub alpha_equivalent: f64,
    /// 2 * lambda_max, or the alpha=100 formula when the face form vanishes.
    pub recommended_beta: f64,
    /// Eigenvector achieving the bound (raw u dofs), when available.
    pub eigenvector: Option<Vec<f64>>,
    pub used_dense_path: bool,
}

/// Options of the eigen-solve.
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Use the dense spectral path up to this many dofs.
    pub dense_limit: usize,
    /// Include the elasticity term in the volume form (sharper bound).
    pub include_elasticity: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            dense_limit: 2000,
            include_elasticity: false,
        }
    }
}

/// beta = alpha E l^2 / h.
pub fn beta_from_formula(alpha: f64, young: f64, l: f64, h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Parameter(format!("element size must be positive, got {h}")));
    }
    if young <= 0.0 {
        return Err(Error::Parameter(format!("Young modulus must be positive, got {young}")));
    }
    if alpha < 0.0 || l < 0.0 {
        return Err(Error::Parameter("alpha and l must be non-negative".into()));
    }
    Ok(alpha * young * l * l / h)
}

/// Assembles the volume strain-gradient form A and the face mean-traction
/// form B on the displacement dofs.
pub fn assemble_penalty_forms(
    mesh: &Mesh,
    re: &ReferenceElement,
    conn: &Connectivity,
    mat: &MaterialTensors,
    include_elasticity: bool,
) -> Result<PenaltyForms> {
    if mat.l2 == 0.0 {
        return Err(Error::Numerical(
            "degenerate penalty forms: l = 0 makes the strain-gradient form vanish (any positive beta works)".into(),
        ));
    }
    let dim = mesh.dim;
    let n_en = re.n_nodes();
    let n = mesh.n_nodes() * dim;
    let n_u_local = n_en * dim;

    let terms = if include_elasticity {
        KernelTerms::mechanical()
    } else {
        KernelTerms::strain_gradient_only()
    };

    let u_dofs = |e: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(n_u_local);
        for &node in mesh.elem_nodes(e) {
            for c in 0..dim {
                out.push(node * dim + c);
            }
        }
        out
    };

    let mut a_triplets = Vec::new();
    for e in 0..mesh.n_elems() {
        let geom = re.volume_geometry(&mesh.elem_coords(e))?;
        let k_local = element_matrices(&geom, mat, terms);
        let dofs = u_dofs(e);
        for (la, &ra) in dofs.iter().enumerate() {
            for (lb, &rb) in dofs.iter().enumerate() {
                let v = k_local[(la, lb)];
                if v != 0.0 {
                    a_triplets.push((ra, rb, v));
                }
            }
        }
    }

    let mut b_triplets = Vec::new();
    for (_fi, face) in conn.interior_faces() {
        let (geom_l, geom_r, perm) = face_pair_geometry(mesh, re, face)?;
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
        let k_face = face_matrices(&left, &right, mat, 0.0, false, FaceTerms::MeanMean);
        let mut dofs = u_dofs(face.left);
        dofs.extend(u_dofs(face.right.unwrap()));
        let loc_l = n_en * (dim + 1);
        // local layout of face blocks is [uL, phiL, uR, phiR]; keep u rows only
        let local_u: Vec<usize> = (0..n_u_local)
            .chain(loc_l..loc_l + n_u_local)
            .collect();
        for (ia, &la) in local_u.iter().enumerate() {
            for (ib, &lb) in local_u.iter().enumerate() {
                let v = k_face[(la, lb)];
                if v != 0.0 {
                    b_triplets.push((dofs[ia], dofs[ib], v));
                }
            }
        }
    }

    // affine kernel basis
    let mut kernel = Vec::new();
    for c in 0..dim {
        let mut v = vec![0.0; n];
        for node in 0..mesh.n_nodes() {
            v[node * dim + c] = 1.0;
        }
        kernel.push(v);
    }
    for r in 0..dim {
        for s in 0..dim {
            let mut v = vec![0.0; n];
            for node in 0..mesh.n_nodes() {
                v[node * dim + r] = mesh.coords[node][s];
            }
            kernel.push(v);
        }
    }

    Ok(PenaltyForms {
        n,
        a_triplets,
        b_triplets,
        kernel,
        h_char: mesh.mesh_size(re),
        young: mat.young,
        l2: mat.l2,
    })
}

fn dense_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    for &(r, c, v) in triplets {
        m[(r, c)] += v;
    }
    m
}

fn csc_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
}

/// Largest eigenvalue of B x = lambda A x on the orthogonal complement of
/// ker(A), by full spectral deflation of A. Returns (lambda, eigenvector).
fn pencil_max_eig_dense(a: &Mat<f64>, b: &Mat<f64>) -> Result<(f64, Vec<f64>)> {
    let n = a.nrows();
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition of A failed: {e:?}")))?;
    let amax = (0..n).map(|i| evd.S()[i].abs()).fold(0.0f64, f64::max);
    if amax == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let cutoff = 1e-10 * amax;
    let keep: Vec<usize> = (0..n).filter(|&i| evd.S()[i] > cutoff).collect();
    if keep.is_empty() {
        return Ok((0.0, vec![0.0; n]));
    }
    let m = keep.len();
    // W = Q_r S_r^{-1/2}
    let mut w = Mat::<f64>::zeros(n, m);
    for (jj, &j) in keep.iter().enumerate() {
        let s = evd.S()[j].sqrt();
        for i in 0..n {
            w[(i, jj)] = evd.U()[(i, j)] / s;
        }
    }
    let reduced = w.transpose() * b * &w;
    let evd_b = reduced
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition of the reduced pencil failed: {e:?}")))?;
    let mut best = 0usize;
    for i in 0..m {
        if evd_b.S()[i] > evd_b.S()[best] {
            best = i;
        }
    }
    let lambda = evd_b.S()[best].max(0.0);
    let mut vec_out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for jj in 0..m {
            s += w[(i, jj)] * evd_b.U()[(jj, best)];
        }
        vec_out[i] = s;
    }
    Ok((lambda, vec_out))
}

/// Block power iteration on (A + eps I)^{-1} B with Rayleigh-Ritz extraction,
/// for meshes past the dense limit.
fn pencil_max_eig_iterative(forms: &PenaltyForms) -> Result<(f64, Vec<f64>)> {
    let n = forms.n;
    let a = csc_from_triplets(n, &forms.a_triplets)?;
    let b = csc_from_triplets(n, &forms.b_triplets)?;

    let mut b_max = 0.0f64;
    for j in 0..n {
        for v in b.val_of_col(j) {
            b_max = b_max.max(v.abs());
        }
    }
    if b_max == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let mut a_max = 0.0f64;
    for j in 0..n {
        for v in a.val_of_col(j) {
            a_max = a_max.max(v.abs());
        }
    }
    let eps = 1e-10 * a_max;
    let shifted: Vec<(usize, usize, f64)> = forms
        .a_triplets
        .iter()
        .copied()
        .chain((0..n).map(|i| (i, i, eps)))
        .collect();
    let a_shift = csc_from_triplets(n, &shifted)?;
    let symbolic = SymbolicLu::try_new(a_shift.symbolic())
        .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, a_shift.as_ref())
        .map_err(|e| Error::Numerical(format!("factorization of A + eps I failed: {e:?}")))?;

    let spmv = |m: &SparseColMat<usize, f64>, x: &Mat<f64>| -> Mat<f64> {
        let mut y = Mat::<f64>::zeros(n, x.ncols());
        for col in 0..x.ncols() {
            for j in 0..n {
                let xj = x[(j, col)];
                if xj == 0.0 {
                    continue;
                }
                for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                    y[(i, col)] += v * xj;
                }
            }
        }
        y
    };

    let block = 6usize.min(n);
    // deterministic pseudo-random start
    let mut state = 0x2545f4914f6cdd1du64;
    let mut rand01 = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = Mat::<f64>::from_fn(n, block, |_, _| rand01());

    let deflate = |v: &mut Mat<f64>, kernel: &[Vec<f64>]| {
        for k in kernel {
            let knorm2: f64 = k.iter().map(|x| x * x).sum();
            if knorm2 == 0.0 {
                continue;
            }
            for col in 0..v.ncols() {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += v[(i, col)] * k[i];
                }
                let f = dot / knorm2;
                for i in 0..n {
                    v[(i, col)] -= f * k[i];
                }
            }
        }
    };
    let orthonormalize = |v: &mut Mat<f64>| {
        for col in 0..v.ncols() {
            for prev in 0..col {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += v[(i, col)] * v[(i, prev)];
                }
                for i in 0..n {
                    let sub = dot * v[(i, prev)];
                    v[(i, col)] -= sub;
                }
            }
            let mut nrm = 0.0;
            for i in 0..n {
                nrm += v[(i, col)] * v[(i, col)];
            }
            let nrm = nrm.sqrt().max(1e-300);
            for i in 0..n {
                v[(i, col)] /= nrm;
            }
        }
    };

    let mut lambda_prev = f64::NAN;
    for iter in 0..500 {
        deflate(&mut v, &forms.kernel);
        orthonormalize(&mut v);
        let bv = spmv(&b, &v);
        let mut x = lu.solve(&bv);
        deflate(&mut x, &forms.kernel);

        // Rayleigh-Ritz on the pencil in span(x)
        let mut basis = x.clone();
        orthonormalize(&mut basis);
        let a_s = basis.transpose() * spmv(&a, &basis);
        let b_s = basis.transpose() * spmv(&b, &basis);
        let (lambda, y) = pencil_max_eig_dense(&a_s, &b_s)?;
        if lambda > 0.0 && ((lambda - lambda_prev).abs() <= 1e-10 * lambda) {
            let mut vec_out = vec![0.0; n];
            for i in 0..n {
                let mut s = 0.0;
                for (jj, yj) in y.iter().enumerate() {
                    s += basis[(i, jj)] * yj;
                }
                vec_out[i] = s;
            }
            return Ok((lambda, vec_out));
        }
        lambda_prev = lambda;
        v = x;
        if iter == 499 {
            return Err(Error::Numerical(format!(
                "penalty eigen-iteration did not converge in 500 iterations (last lambda = {lambda:.6e})"
            )));
        }
    }
    unreachable!()
}

/// Largest generalized eigenvalue of the pencil with kernel deflation, plus
/// the recommended stabilization parameter (safety factor 2).
pub fn estimate_penalty(forms: &PenaltyForms) -> Result<PenaltyEstimate> {
    estimate_penalty_with(forms, EstimateOptions::default())
}

pub fn estimate_penalty_with(forms: &PenaltyForms, opts: EstimateOptions) -> Result<PenaltyEstimate> {
    let dense = forms.n <= opts.dense_limit;
    let (lambda_max, eigvec) = if dense {
        let a = dense_from_triplets(forms.n, &forms.a_triplets);
        let b = dense_from_triplets(forms.n, &forms.b_triplets);
        pencil_max_eig_dense(&a, &b)?
    } else {
        pencil_max_eig_iterative(forms)?
    };
    let el2 = forms.young * forms.l2;
    let alpha_equivalent = if el2 > 0.0 {
        lambda_max * forms.h_char / el2
    } else {
        0.0
    };
    let recommended_beta = if lambda_max > 0.0 {
        2.0 * lambda_max
    } else {
        // no interior faces: fall back to the closed-form default
        beta_from_formula(100.0, forms.young, forms.l2.sqrt(), forms.h_char)?
    };
    Ok(PenaltyEstimate {
        lambda_max,
        alpha_equivalent,
        recommended_beta,
        eigenvector: Some(eigvec),
        used_dense_path: dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material_tensors, MaterialParameters};
    use crate::mesh::{build_connectivity, structured_mesh};
    use crate::refelem::{ElemShape, ReferenceElement};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn forms_for(l: f64, n: usize, p: usize) -> PenaltyForms {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[n, n, 0], ElemShape::Triangle, p).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, p).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, l), 2).unwrap();
        assemble_penalty_forms(&mesh, &re, &conn, &mat, false).unwrap()
    }

    fn apply(n: usize, triplets: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for &(r, c, v) in triplets {
            y[r] += v * x[c];
        }
        y
    }

    #[test]
    fn formula_values() {
        assert_relative_eq!(beta_from_formula(100.0, 2.5, 1.1, 0.5).unwrap(), 605.0, max_relative = 1e-14);
        assert_eq!(beta_from_formula(0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let b1 = beta_from_formula(10.0, 2.5, 1.1, 0.25).unwrap();
        let b2 = beta_from_formula(20.0, 2.5, 1.1, 0.25).unwrap();
        assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-15);
        assert!(beta_from_formula(100.0, 2.5, 1.1, 0.0).is_err());
        assert!(beta_from_formula(100.0, 2.5, 1.1, -1.0).is_err());
    }

    #[test]
    fn affine_fields_annihilate_both_forms() {
        let forms = forms_for(1.1, 3, 2);
        let a_norm: f64 = forms.a_triplets.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        let b_norm: f64 = forms.b_triplets.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        for k in &forms.kernel {
            let ak = apply(forms.n, &forms.a_triplets, k);
            let bk = apply(forms.n, &forms.b_triplets, k);
            let kmax = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for v in &ak {
                assert!(v.abs() <= 1e-10 * a_norm * kmax, "A kernel residual {v}");
            }
            for v in &bk {
                assert!(v.abs() <= 1e-10 * b_norm.max(a_norm) * kmax, "B kernel residual {v}");
            }
        }
        assert_eq!(forms.kernel.len(), 2 * 3);
    }

    #[test]
    fn forms_scale_as_l2_and_l4() {
        let f1 = forms_for(1.1, 2, 2);
        let f2 = forms_for(2.2, 2, 2);
        let a1 = dense_from_triplets(f1.n, &f1.a_triplets);
        let a2 = dense_from_triplets(f2.n, &f2.a_triplets);
        let b1 = dense_from_triplets(f1.n, &f1.b_triplets);
        let b2 = dense_from_triplets(f2.n, &f2.b_triplets);
        for i in 0..f1.n {
            for j in 0..f1.n {
                if a1[(i, j)].abs() > 1e-12 {
                    assert_relative_eq!(a2[(i, j)], 4.0 * a1[(i, j)], max_relative = 1e-12);
                }
                if b1[(i, j)].abs() > 1e-12 {
                    assert_relative_eq!(b2[(i, j)], 16.0 * b1[(i, j)], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_length_scale_is_degenerate() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 0.0), 2).unwrap();
        assert!(assemble_penalty_forms(&mesh, &re, &conn, &mat, false).is_err());
    }

    #[test]
    fn single_element_has_zero_lambda_and_formula_fallback() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[1, 1, 0], ElemShape::Quad, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let forms = assemble_penalty_forms(&mesh, &re, &conn, &mat, false).unwrap();
        assert!(forms.b_triplets.is_empty());
        let est = estimate_penalty(&forms).unwrap();
        assert_eq!(est.lambda_max, 0.0);
        let expect = beta_from_formula(100.0, 2.5, 1.1, forms.h_char).unwrap();
        assert_relative_eq!(est.recommended_beta, expect, max_relative = 1e-14);
    }

    #[test]
    fn lambda_scales_with_l_squared() {
        let e1 = estimate_penalty(&forms_for(1.1, 2, 2)).unwrap();
        let e2 = estimate_penalty(&forms_for(2.2, 2, 2)).unwrap();
        assert!(e1.lambda_max > 0.0);
        assert_relative_eq!(e2.lambda_max, 4.0 * e1.lambda_max, max_relative = 1e-8);
    }

    #[test]
    fn lambda_scales_roughly_inverse_h() {
        let coarse = estimate_penalty(&forms_for(1.1, 2, 2)).unwrap();
        let fine = estimate_penalty(&forms_for(1.1, 4, 2)).unwrap();
        let ratio = fine.lambda_max / coarse.lambda_max;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn bound_property_random_fields() {
        let forms = forms_for(1.1, 3, 2);
        let est = estimate_penalty(&forms).unwrap();
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..100 {
            let x: Vec<f64> = (0..forms.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = apply(forms.n, &forms.a_triplets, &x);
            let bx = apply(forms.n, &forms.b_triplets, &x);
            let a_quad: f64 = x.iter().zip(&ax).map(|(xi, yi)| xi * yi).sum();
            let b_quad: f64 = x.iter().zip(&bx).map(|(xi, yi)| xi * yi).sum();
            assert!(
                b_quad <= est.lambda_max * a_quad * (1.0 + 1e-8) + 1e-12,
                "b = {b_quad}, lambda a = {}",
                est.lambda_max * a_quad
            );
        }
    }

    #[test]
    fn eigenvector_is_a_orthogonal_to_kernel() {
        let forms = forms_for(1.1, 3, 2);
        let est = estimate_penalty(&forms).unwrap();
        let v = est.eigenvector.unwrap();
        let av = apply(forms.n, &forms.a_triplets, &v);
        let a_norm: f64 = forms.a_triplets.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in &forms.kernel {
            let dot: f64 = k.iter().zip(&av).map(|(ki, ai)| ki * ai).sum();
            let kmax = k.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(
                dot.abs() <= 1e-8 * a_norm * vmax * kmax * forms.n as f64,
                "kernel A-orthogonality violated: {dot}"
            );
        }
    }

    #[test]
    fn alpha_equivalent_invariant_under_young_scaling() {
        let base = MaterialParameters::elastic(2.5, 0.25, 1.1);
        let mut scaled = base.clone();
        scaled.young = 25.0;
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let m1 = build_material_tensors(&base, 2).unwrap();
        let m2 = build_material_tensors(&scaled, 2).unwrap();
        let e1 = estimate_penalty(&assemble_penalty_forms(&mesh, &re, &conn, &m1, false).unwrap()).unwrap();
        let e2 = estimate_penalty(&assemble_penalty_forms(&mesh, &re, &conn, &m2, false).unwrap()).unwrap();
        assert_relative_eq!(e1.alpha_equivalent, e2.alpha_equivalent, max_relative = 1e-10);
    }

    #[test]
    fn iterative_path_matches_dense() {
        let forms = forms_for(1.1, 3, 2);
        let dense = estimate_penalty(&forms).unwrap();
        let iterative = estimate_penalty_with(
            &forms,
            EstimateOptions {
                dense_limit: 1,
                include_elasticity: false,
            },
        )
        .unwrap();
        assert!(!iterative.used_dense_path);
        assert_relative_eq!(iterative.lambda_max, dense.lambda_max, max_relative = 1e-6);
    }

    #[test]
    fn sharper_bound_is_smaller() {
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[3, 3, 0], ElemShape::Triangle, 2).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let conn = build_connectivity(&mesh, &re).unwrap();
        let mat = build_material_tensors(&MaterialParameters::elastic(2.5, 0.25, 1.1), 2).unwrap();
        let plain = estimate_penalty(&assemble_penalty_forms(&mesh, &re, &conn, &mat, false).unwrap()).unwrap();
        let sharp = estimate_penalty(&assemble_penalty_forms(&mesh, &re, &conn, &mat, true).unwrap()).unwrap();
        assert!(sharp.lambda_max < plain.lambda_max);
    }
}
