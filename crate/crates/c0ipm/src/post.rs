//! Postprocessing and verification: exact solution fields with analytic
//! derivatives, manufactured volume sources from the strong operators, L2
//! errors and convergence rates, effective piezoelectric constants of the
//! beam benchmarks, and the CSV/field-dump writers.

use crate::error::{Error, Result};
use crate::material::{
    double_traction, evaluate_constitutive, MaterialTensors, PointKinematics, PointStresses,
};
use crate::mesh::{Mesh, ScalarFn, VectorFn};
use crate::refelem::{ElemShape, ReferenceElement};
use crate::solve::SolutionField;
use std::path::Path;
use std::sync::Arc;

type VecDerivFn = Arc<dyn Fn([f64; 3], &[usize]) -> [f64; 3] + Send + Sync>;
type ScalDerivFn = Arc<dyn Fn([f64; 3], &[usize]) -> f64 + Send + Sync>;

/// Analytic solution with derivatives up to fourth order (needed by the
/// manufactured body force).
#[derive(Clone)]
pub struct ExactField {
    pub dim: usize,
    u: VecDerivFn,
    phi: ScalDerivFn,
}

impl ExactField {
    pub fn new(dim: usize, u: VecDerivFn, phi: ScalDerivFn) -> Self {
        ExactField { dim, u, phi }
    }

    pub fn u(&self, x: [f64; 3]) -> [f64; 3] {
        (self.u)(x, &[])
    }

    /// Derivative of u taken along the listed directions (up to 4).
    pub fn u_deriv(&self, x: [f64; 3], dirs: &[usize]) -> [f64; 3] {
        (self.u)(x, dirs)
    }

    pub fn phi(&self, x: [f64; 3]) -> f64 {
        (self.phi)(x, &[])
    }

    pub fn phi_deriv(&self, x: [f64; 3], dirs: &[usize]) -> f64 {
        (self.phi)(x, dirs)
    }

    /// Plane-wave family: component i of u is amp_i sin(k.x + phase_i), and
    /// phi analogous; every derivative shifts the phase by pi/2 and scales
    /// by the wave-vector components.
    pub fn plane_wave(
        dim: usize,
        wave: [f64; 3],
        u_amp_phase: Vec<(f64, f64)>,
        phi_amp_phase: Vec<(f64, f64)>,
    ) -> Self {
        let wave_u = wave;
        let u_terms = u_amp_phase;
        let u = Arc::new(move |x: [f64; 3], dirs: &[usize]| {
            let s: f64 = (0..3).map(|k| wave_u[k] * x[k]).sum();
            let factor: f64 = dirs.iter().map(|&d| wave_u[d]).product();
            let shift = dirs.len() as f64 * std::f64::consts::FRAC_PI_2;
            let mut out = [0.0; 3];
            for (i, &(amp, phase)) in u_terms.iter().enumerate() {
                out[i] = amp * factor * (s + phase + shift).sin();
            }
            out
        });
        let phi_terms = phi_amp_phase;
        let phi = Arc::new(move |x: [f64; 3], dirs: &[usize]| {
            let s: f64 = (0..3).map(|k| wave[k] * x[k]).sum();
            let factor: f64 = dirs.iter().map(|&d| wave[d]).product();
            let shift = dirs.len() as f64 * std::f64::consts::FRAC_PI_2;
            phi_terms
                .iter()
                .map(|&(amp, phase)| amp * factor * (s + phase + shift).sin())
                .sum()
        });
        ExactField { dim, u, phi }
    }

    /// The 2D verification solution: u = (sin, cos) of 2 pi (x + y), and
    /// phi = sin + cos of the same argument.
    pub fn sinusoid_2d() -> Self {
        let tp = 2.0 * std::f64::consts::PI;
        Self::plane_wave(
            2,
            [tp, tp, 0.0],
            vec![(1.0, 0.0), (1.0, std::f64::consts::FRAC_PI_2)],
            vec![(1.0, 0.0), (1.0, std::f64::consts::FRAC_PI_2)],
        )
    }

    /// The 3D verification solution on the cube: u = (cos, sin, cos) of
    /// 2 pi (x + 2y - z), phi = sin of the same argument.
    pub fn sinusoid_3d() -> Self {
        let tp = 2.0 * std::f64::consts::PI;
        let h = std::f64::consts::FRAC_PI_2;
        Self::plane_wave(
            3,
            [tp, 2.0 * tp, -tp],
            vec![(1.0, h), (1.0, 0.0), (1.0, h)],
            vec![(1.0, 0.0)],
        )
    }

    /// Random polynomial of total degree <= deg per field, from a small
    /// deterministic seed; exact derivatives by monomial calculus.
    pub fn polynomial(dim: usize, deg: usize, seed: u64) -> Self {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut exps = Vec::new();
        for a in 0..=deg {
            for b in 0..=(deg - a) {
                if dim == 2 {
                    exps.push([a, b, 0]);
                } else {
                    for c in 0..=(deg - a - b) {
                        exps.push([a, b, c]);
                    }
                }
            }
        }
        let comps: Vec<Vec<([usize; 3], f64)>> = (0..dim)
            .map(|_| exps.iter().map(|&e| (e, next())).collect())
            .collect();
        let phi_terms: Vec<([usize; 3], f64)> = exps.iter().map(|&e| (e, next())).collect();

        let eval_poly = |terms: &[([usize; 3], f64)], x: [f64; 3], dirs: &[usize]| -> f64 {
            let mut total = 0.0;
            'term: for &(e, c) in terms {
                let mut ex = e;
                let mut factor = c;
                for &d in dirs {
                    if ex[d] == 0 {
                        continue 'term;
                    }
                    factor *= ex[d] as f64;
                    ex[d] -= 1;
                }
                let mut v = factor;
                for k in 0..3 {
                    for _ in 0..ex[k] {
                        v *= x[k];
                    }
                }
                total += v;
            }
            total
        };

        let comps_u = comps;
        let u = Arc::new(move |x: [f64; 3], dirs: &[usize]| {
            let mut out = [0.0; 3];
            for (i, terms) in comps_u.iter().enumerate() {
                out[i] = eval_poly(terms, x, dirs);
            }
            out
        });
        let phi = Arc::new(move |x: [f64; 3], dirs: &[usize]| eval_poly(&phi_terms, x, dirs));
        ExactField { dim, u, phi }
    }

    /// Kinematic state (strain, strain gradient, electric field) at a point.
    pub fn kinematics(&self, x: [f64; 3]) -> PointKinematics {
        let dim = self.dim;
        let mut kin = PointKinematics::zero();
        for j in 0..dim {
            let dj = self.u_deriv(x, &[j]);
            for i in 0..dim {
                kin.eps[i][j] += 0.5 * dj[i];
                kin.eps[j][i] += 0.5 * dj[i];
            }
            kin.e_field[j] = -self.phi_deriv(x, &[j]);
            for k in 0..dim {
                let djk = self.u_deriv(x, &[j, k]);
                for i in 0..dim {
                    kin.grad_eps[i][j][k] += 0.5 * djk[i];
                    kin.grad_eps[j][i][k] += 0.5 * djk[i];
                }
            }
        }
        kin
    }

    /// Stresses of the exact solution at a point.
    pub fn stresses(&self, x: [f64; 3], mat: &MaterialTensors) -> PointStresses {
        evaluate_constitutive(&self.kinematics(x), mat)
    }

    /// Spot-checks the derivative closures against central finite
    /// differences at random points.
    pub fn check_derivative_consistency(
        &self,
        lo: [f64; 3],
        hi: [f64; 3],
        n_pts: usize,
    ) -> Result<()> {
        let mut state = 0xc0ffee123456789u64;
        let mut next01 = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let h = 1e-5
            * (0..self.dim)
                .map(|k| hi[k] - lo[k])
                .fold(0.0f64, f64::max);
        for _ in 0..n_pts {
            let mut x = [0.0; 3];
            for k in 0..self.dim {
                x[k] = lo[k] + (hi[k] - lo[k]) * (0.1 + 0.8 * next01());
            }
            for dirs in [vec![0], vec![self.dim - 1], vec![0, 0], vec![0, self.dim - 1]] {
                let (&d, rest) = dirs.split_last().unwrap();
                let mut xp = x;
                xp[d] += h;
                let mut xm = x;
                xm[d] -= h;
                let up = self.u_deriv(xp, rest);
                let um = self.u_deriv(xm, rest);
                let ua = self.u_deriv(x, &dirs);
                for i in 0..self.dim {
                    let fd = (up[i] - um[i]) / (2.0 * h);
                    let scale = ua[i].abs().max(fd.abs()).max(1.0);
                    if (ua[i] - fd).abs() > 1e-6 * scale * 100.0 {
                        return Err(Error::Numerical(format!(
                            "u derivative closure inconsistent at {x:?} dirs {dirs:?}: {} vs fd {fd}",
                            ua[i]
                        )));
                    }
                }
                let pp = self.phi_deriv(xp, rest);
                let pm = self.phi_deriv(xm, rest);
                let pa = self.phi_deriv(x, &dirs);
                let fd = (pp - pm) / (2.0 * h);
                let scale = pa.abs().max(fd.abs()).max(1.0);
                if (pa - fd).abs() > 1e-6 * scale * 100.0 {
                    return Err(Error::Numerical(format!(
                        "phi derivative closure inconsistent at {x:?} dirs {dirs:?}: {pa} vs fd {fd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Body force and free charge that make the exact field solve the strong
/// equations: b = -div(sigma_hat - div sigma_tilde), q = div D_hat.
pub fn manufactured_source(exact: &ExactField, mat: &MaterialTensors) -> (VectorFn, ScalarFn) {
    let dim = exact.dim;
    let ex_b = exact.clone();
    let mat_b = mat.clone();
    let body = Arc::new(move |x: [f64; 3]| -> [f64; 3] {
        let mut b = [0.0; 3];
        for i in 0..dim {
            let mut v = 0.0;
            // - C_ijkl u_k,lj - e_lij phi_,lj
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        if mat_b.c[i][j][k][l] != 0.0 {
                            v -= mat_b.c[i][j][k][l] * ex_b.u_deriv(x, &[l, j])[k];
                        }
                    }
                }
                for l in 0..dim {
                    if mat_b.e[l][i][j] != 0.0 {
                        v -= mat_b.e[l][i][j] * ex_b.phi_deriv(x, &[l, j]);
                    }
                }
            }
            // + l^2 C_ijlm u_l,mkkj + mu_lijk phi_,lkj
            for j in 0..dim {
                for l in 0..dim {
                    for m in 0..dim {
                        if mat_b.c[i][j][l][m] != 0.0 {
                            for k in 0..dim {
                                v += mat_b.l2
                                    * mat_b.c[i][j][l][m]
                                    * ex_b.u_deriv(x, &[m, k, k, j])[l];
                            }
                        }
                    }
                }
                for k in 0..dim {
                    for l in 0..dim {
                        if mat_b.mu[l][i][j][k] != 0.0 {
                            v += mat_b.mu[l][i][j][k] * ex_b.phi_deriv(x, &[l, k, j]);
                        }
                    }
                }
            }
            b[i] = v;
        }
        b
    });

    let ex_q = exact.clone();
    let mat_q = mat.clone();
    let charge = Arc::new(move |x: [f64; 3]| -> f64 {
        let mut q = 0.0;
        for l in 0..dim {
            q -= mat_q.kappa[l] * ex_q.phi_deriv(x, &[l, l]);
            for i in 0..dim {
                for j in 0..dim {
                    if mat_q.e[l][i][j] != 0.0 {
                        q += mat_q.e[l][i][j] * ex_q.u_deriv(x, &[j, l])[i];
                    }
                    for k in 0..dim {
                        if mat_q.mu[l][i][j][k] != 0.0 {
                            q += mat_q.mu[l][i][j][k] * ex_q.u_deriv(x, &[j, k, l])[i];
                        }
                    }
                }
            }
        }
        q
    });

    (body, charge)
}

/// Boundary double-traction data r_n = sigma_tilde(x) : n x n for a box
/// domain (the outward normal is inferred from the nearest box face).
pub fn manufactured_rn(
    exact: &ExactField,
    mat: &MaterialTensors,
    lo: [f64; 3],
    hi: [f64; 3],
) -> VectorFn {
    let dim = exact.dim;
    let ex = exact.clone();
    let mat = mat.clone();
    Arc::new(move |x: [f64; 3]| -> [f64; 3] {
        let mut best = (f64::INFINITY, 0usize, -1.0);
        for k in 0..dim {
            let dlo = (x[k] - lo[k]).abs();
            let dhi = (x[k] - hi[k]).abs();
            if dlo < best.0 {
                best = (dlo, k, -1.0);
            }
            if dhi < best.0 {
                best = (dhi, k, 1.0);
            }
        }
        let mut n = [0.0; 3];
        n[best.1] = best.2;
        let st = ex.stresses(x, &mat);
        double_traction(&st.sigma_tilde, &n, dim).expect("unit box normal")
    })
}

/// Which field an error norm refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorField {
    Displacement,
    Potential,
}

/// L2 norm of (solution - exact) by element quadrature of order 2p + 2.
/// Returns (absolute, relative) where relative divides by the exact norm.
pub fn l2_error(
    mesh: &Mesh,
    re: &ReferenceElement,
    sol: &SolutionField,
    exact: &ExactField,
    which: ErrorField,
) -> Result<(f64, f64)> {
    let p = re.degree;
    let (points, weights) = error_rule(re.shape, 2 * p + 2)?;
    let tab = re.tabulate(&points, 2)?;
    let dim = mesh.dim;
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    for e in 0..mesh.n_elems() {
        let coords = mesh.elem_coords(e);
        let geom = re.volume_geometry_with_table(&coords, &tab, &weights)?;
        let en = mesh.elem_nodes(e);
        for q in 0..geom.n_pts {
            let w = geom.weights[q];
            let x = geom.points[q];
            match which {
                ErrorField::Displacement => {
                    let ue = exact.u(x);
                    let mut uh = [0.0; 3];
                    for (a, &n) in en.iter().enumerate() {
                        let na = geom.value(q, a);
                        for c in 0..dim {
                            uh[c] += na * sol.u[n][c];
                        }
                    }
                    for c in 0..dim {
                        err2 += w * (uh[c] - ue[c]) * (uh[c] - ue[c]);
                        norm2 += w * ue[c] * ue[c];
                    }
                }
                ErrorField::Potential => {
                    let pe = exact.phi(x);
                    let mut ph = 0.0;
                    for (a, &n) in en.iter().enumerate() {
                        ph += geom.value(q, a) * sol.phi[n];
                    }
                    err2 += w * (ph - pe) * (ph - pe);
                    norm2 += w * pe * pe;
                }
            }
        }
    }
    let abs = err2.sqrt();
    let rel = if norm2 > 0.0 { abs / norm2.sqrt() } else { abs };
    Ok((abs, rel))
}

fn error_rule(shape: ElemShape, degree: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    match shape {
        ElemShape::Triangle => crate::refelem::triangle_rule(degree),
        ElemShape::Quad => crate::refelem::tensor_rule(2, degree / 2 + 1),
        ElemShape::Hex => crate::refelem::tensor_rule(3, degree / 2 + 1),
    }
}

/// Per-segment convergence slopes log(e_k/e_{k+1}) / log(h_k/h_{k+1}).
pub fn convergence_rates(errors: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != h.len() || errors.len() < 2 {
        return Err(Error::Parameter(
            "convergence_rates needs matching lists of length >= 2".into(),
        ));
    }
    for w in h.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Parameter("h must be strictly decreasing".into()));
        }
    }
    if errors.iter().any(|&e| e <= 0.0) {
        return Err(Error::Parameter("errors must be positive".into()));
    }
    Ok(errors
        .windows(2)
        .zip(h.windows(2))
        .map(|(e, hh)| (e[0] / e[1]).ln() / (hh[0] / hh[1]).ln())
        .collect())
}

/// Electrode circuit of a beam experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitMode {
    Open,
    Closed,
}

impl std::fmt::Display for CircuitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CircuitMode::Open => write!(f, "open"),
            CircuitMode::Closed => write!(f, "closed"),
        }
    }
}

/// Effective piezoelectric constant report of a beam solve.
#[derive(Debug, Clone)]
pub struct BeamReport {
    pub a_prime: f64,
    pub k_eff: f64,
    pub e_prime: f64,
    pub circuit: CircuitMode,
}

/// Dielectric-to-elastic energy ratio k_eff = sqrt(int E.kappa.E / int
/// eps.C.eps) of one solution.
pub fn k_effective(
    mesh: &Mesh,
    re: &ReferenceElement,
    sol: &SolutionField,
    mat: &MaterialTensors,
) -> Result<f64> {
    let dim = mesh.dim;
    let mut e_diel = 0.0;
    let mut e_elas = 0.0;
    for e in 0..mesh.n_elems() {
        let coords = mesh.elem_coords(e);
        let geom = re.volume_geometry(&coords)?;
        let en = mesh.elem_nodes(e);
        for q in 0..geom.n_pts {
            let w = geom.weights[q];
            let mut grad_phi = [0.0; 3];
            let mut grad_u = [[0.0; 3]; 3];
            for (a, &n) in en.iter().enumerate() {
                for k in 0..dim {
                    let g = geom.grad(q, a, k);
                    grad_phi[k] += g * sol.phi[n];
                    for c in 0..dim {
                        grad_u[c][k] += g * sol.u[n][c];
                    }
                }
            }
            let mut eps = [[0.0; 3]; 3];
            for i in 0..dim {
                for j in 0..dim {
                    eps[i][j] = 0.5 * (grad_u[i][j] + grad_u[j][i]);
                }
            }
            for l in 0..dim {
                e_diel += w * mat.kappa[l] * grad_phi[l] * grad_phi[l];
            }
            let s = mat.c_contract(&eps);
            for i in 0..dim {
                for j in 0..dim {
                    e_elas += w * eps[i][j] * s[i][j];
                }
            }
        }
    }
    if e_elas <= 0.0 {
        return Err(Error::Numerical(
            "degenerate beam state: zero strain energy".into(),
        ));
    }
    Ok((e_diel / e_elas).sqrt())
}

/// Normalised effective piezoelectric constant: k_eff of the solve divided
/// by k_eff of the companion solve without flexoelectric coupling.
/// `nominal_e_t` / `nominal_mu_t` are the unzeroed material coefficients
/// that define the normalised thickness a' = -a e_T / mu_T.
#[allow(clippy::too_many_arguments)]
pub fn effective_piezo(
    mesh: &Mesh,
    re: &ReferenceElement,
    sol: &SolutionField,
    mat: &MaterialTensors,
    companion_sol: &SolutionField,
    companion_mat: &MaterialTensors,
    nominal_e_t: f64,
    nominal_mu_t: f64,
    circuit: CircuitMode,
) -> Result<BeamReport> {
    let k_eff = k_effective(mesh, re, sol, mat)?;
    let k_ref = k_effective(mesh, re, companion_sol, companion_mat)?;
    if k_ref == 0.0 {
        return Err(Error::Numerical(
            "degenerate normalisation: companion solve has zero k_eff".into(),
        ));
    }
    let (lo, hi) = mesh.bbox();
    let thickness = hi[1] - lo[1];
    let a_prime = -thickness * nominal_e_t / nominal_mu_t;
    Ok(BeamReport {
        a_prime,
        k_eff,
        e_prime: k_eff / k_ref,
        circuit,
    })
}

/// One line of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_u: f64,
    pub err_phi: f64,
    pub rate_u: Option<f64>,
    pub rate_phi: Option<f64>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// `level,h,ndof,err_u,err_phi,rate_u,rate_phi` with LF endings.
pub fn export_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut s = String::from("level,h,ndof,err_u,err_phi,rate_u,rate_phi\n");
    for r in rows {
        let fmt_rate = |o: Option<f64>| o.map(|v| format!("{v:.6}")).unwrap_or_default();
        s.push_str(&format!(
            "{},{:.12e},{},{:.12e},{:.12e},{},{}\n",
            r.level,
            r.h,
            r.ndof,
            r.err_u,
            r.err_phi,
            fmt_rate(r.rate_u),
            fmt_rate(r.rate_phi)
        ));
    }
    write_text(path, &s)
}

/// `a_prime,e_prime,circuit`.
pub fn export_beam_csv(path: &Path, rows: &[BeamReport]) -> Result<()> {
    let mut s = String::from("a_prime,e_prime,circuit\n");
    for r in rows {
        s.push_str(&format!(
            "{:.12e},{:.12e},{}\n",
            r.a_prime, r.e_prime, r.circuit
        ));
    }
    write_text(path, &s)
}

/// `lambda_max,alpha_equivalent,beta_recommended`.
pub fn export_penalty_csv(path: &Path, est: &crate::penalty::PenaltyEstimate) -> Result<()> {
    let s = format!(
        "lambda_max,alpha_equivalent,beta_recommended\n{:.12e},{:.12e},{:.12e}\n",
        est.lambda_max, est.alpha_equivalent, est.recommended_beta
    );
    write_text(path, &s)
}

/// Nodal field dump: rows `x [y z] u1 u2 [u3] phi`.
pub fn export_field_dump(path: &Path, mesh: &Mesh, sol: &SolutionField) -> Result<()> {
    let mut s = String::new();
    let dim = mesh.dim;
    for n in 0..mesh.n_nodes() {
        for k in 0..dim {
            s.push_str(&format!("{:.12e} ", mesh.coords[n][k]));
        }
        for c in 0..dim {
            s.push_str(&format!("{:.12e} ", sol.u[n][c]));
        }
        s.push_str(&format!("{:.12e}\n", sol.phi[n]));
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material_tensors, MaterialParameters, PlaneKind};
    use approx::assert_relative_eq;

    fn coupled_params() -> MaterialParameters {
        MaterialParameters {
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
            plane: PlaneKind::PlaneStrain,
        }
    }

    #[test]
    fn derivative_closures_consistent() {
        ExactField::sinusoid_2d()
            .check_derivative_consistency([0.0; 3], [1.0, 1.0, 0.0], 5)
            .unwrap();
        ExactField::sinusoid_3d()
            .check_derivative_consistency([0.0; 3], [0.5, 0.5, 0.5], 5)
            .unwrap();
        ExactField::polynomial(2, 3, 42)
            .check_derivative_consistency([0.0; 3], [1.0, 1.0, 0.0], 5)
            .unwrap();
    }

    #[test]
    fn linear_field_has_zero_sources() {
        // u linear, phi constant, uncoupled -> b = 0 and q = 0
        let u = Arc::new(|x: [f64; 3], dirs: &[usize]| -> [f64; 3] {
            match dirs.len() {
                0 => [2.0 * x[0] - x[1], 0.5 * x[1], 0.0],
                1 => match dirs[0] {
                    0 => [2.0, 0.0, 0.0],
                    _ => [-1.0, 0.5, 0.0],
                },
                _ => [0.0; 3],
            }
        });
        let phi =
            Arc::new(|_x: [f64; 3], dirs: &[usize]| if dirs.is_empty() { 7.5 } else { 0.0 });
        let exact = ExactField::new(2, u, phi);
        let mat =
            build_material_tensors(&coupled_params().without_piezo().without_flexo(), 2).unwrap();
        let (b, q) = manufactured_source(&exact, &mat);
        for x in [[0.1, 0.2, 0.0], [0.8, 0.4, 0.0]] {
            let bv = b(x);
            assert!(bv[0].abs() < 1e-14 && bv[1].abs() < 1e-14);
            assert!(q(x).abs() < 1e-14);
        }
    }

    #[test]
    fn uncoupled_charge_value_at_origin() {
        // q = -kappa * laplacian(phi) with kappa = 1.21 and the sinusoid:
        // q(0,0) = 8 pi^2 * 1.21
        let exact = ExactField::sinusoid_2d();
        let mat =
            build_material_tensors(&coupled_params().without_piezo().without_flexo(), 2).unwrap();
        let (_b, q) = manufactured_source(&exact, &mat);
        let expect = 8.0 * std::f64::consts::PI.powi(2) * 1.21;
        assert_relative_eq!(q([0.0; 3]), expect, max_relative = 1e-12);
        assert_relative_eq!(expect, 95.55, max_relative = 1e-3);
    }

    #[test]
    fn manufactured_source_matches_fd_operator_oracle() {
        // independent route: apply the strong operator to the constitutive
        // closures by nested 4th-order central differences
        let exact = ExactField::sinusoid_2d();
        let mat = build_material_tensors(&coupled_params(), 2).unwrap();
        let (b, q) = manufactured_source(&exact, &mat);

        let h = 4e-3;
        let fd4 = |f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], d: usize| -> f64 {
            let mut xs = [x; 4];
            xs[0][d] += 2.0 * h;
            xs[1][d] += h;
            xs[2][d] -= h;
            xs[3][d] -= 2.0 * h;
            (-f(xs[0]) + 8.0 * f(xs[1]) - 8.0 * f(xs[2]) + f(xs[3])) / (12.0 * h)
        };

        let mut state = 12345u64;
        let mut rand01 = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10 {
            let x = [rand01(), rand01(), 0.0];
            // b_fd_i = -d_j (sigma_hat_ij - d_k sigma_tilde_ijk)
            let mut b_fd = [0.0; 2];
            for i in 0..2 {
                let mut v = 0.0;
                for j in 0..2 {
                    let tj = |y: [f64; 3]| -> f64 {
                        let sh = exact.stresses(y, &mat);
                        let mut t = sh.sigma_hat[i][j];
                        for k in 0..2 {
                            let st_k = |z: [f64; 3]| exact.stresses(z, &mat).sigma_tilde[i][j][k];
                            t -= fd4(&st_k, y, k);
                        }
                        t
                    };
                    v -= fd4(&tj, x, j);
                }
                b_fd[i] = v;
            }
            let bv = b(x);
            for i in 0..2 {
                assert_relative_eq!(bv[i], b_fd[i], max_relative = 1e-5);
            }
            // q_fd = d_l D_l
            let mut q_fd = 0.0;
            for l in 0..2 {
                let dl = |y: [f64; 3]| exact.stresses(y, &mat).d_hat[l];
                q_fd += fd4(&dl, x, l);
            }
            assert_relative_eq!(q(x), q_fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn convergence_rate_arithmetic() {
        let r = convergence_rates(&[1e-2, 1.25e-3], &[1.0, 0.5]).unwrap();
        assert_relative_eq!(r[0], 3.0, max_relative = 1e-12);
        let r = convergence_rates(&[1e-2, 1e-2], &[1.0, 0.5]).unwrap();
        assert_relative_eq!(r[0], 0.0, epsilon = 1e-12);
        let r = convergence_rates(&[1e-2, 1e-3], &[1.0, 0.5]).unwrap();
        assert_relative_eq!(r[0], 10f64.log2(), max_relative = 1e-12);
        assert!(convergence_rates(&[1.0], &[1.0]).is_err());
        assert!(convergence_rates(&[1.0, -1.0], &[1.0, 0.5]).is_err());
        assert!(convergence_rates(&[1.0, 0.5], &[0.5, 1.0]).is_err());
    }

    #[test]
    fn l2_error_of_interpolant_is_tiny() {
        use crate::mesh::structured_mesh;
        use crate::refelem::ReferenceElement;
        let mesh =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[3, 3, 0], ElemShape::Triangle, 3)
                .unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 3).unwrap();
        let exact = ExactField::polynomial(2, 3, 7);
        // interpolant of the exact polynomial
        let sol = SolutionField {
            dim: 2,
            u: mesh.coords.iter().map(|&x| exact.u(x)).collect(),
            phi: mesh.coords.iter().map(|&x| exact.phi(x)).collect(),
            multipliers: vec![],
            x_raw: vec![],
        };
        let (abs_u, _) = l2_error(&mesh, &re, &sol, &exact, ErrorField::Displacement).unwrap();
        let (abs_p, _) = l2_error(&mesh, &re, &sol, &exact, ErrorField::Potential).unwrap();
        assert!(abs_u < 1e-12, "{abs_u}");
        assert!(abs_p < 1e-12, "{abs_p}");

        // exact = 0 gives the discrete norm; doubling doubles the error
        let zero = ExactField::new(2, Arc::new(|_, _| [0.0; 3]), Arc::new(|_, _| 0.0));
        let (norm_u, _) = l2_error(&mesh, &re, &sol, &zero, ErrorField::Displacement).unwrap();
        let sol2 = SolutionField {
            dim: 2,
            u: sol.u.iter().map(|u| [2.0 * u[0], 2.0 * u[1], 0.0]).collect(),
            phi: sol.phi.iter().map(|p| 2.0 * p).collect(),
            multipliers: vec![],
            x_raw: vec![],
        };
        let (norm_u2, _) = l2_error(&mesh, &re, &sol2, &zero, ErrorField::Displacement).unwrap();
        assert_relative_eq!(norm_u2, 2.0 * norm_u, max_relative = 1e-12);
    }

    #[test]
    fn csv_exports_are_deterministic() {
        let dir = std::env::temp_dir().join("c0ipm_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let rows = vec![
            ConvergenceRow {
                level: 0,
                h: 0.5,
                ndof: 100,
                err_u: 1e-3,
                err_phi: 2e-4,
                rate_u: None,
                rate_phi: None,
            },
            ConvergenceRow {
                level: 1,
                h: 0.25,
                ndof: 400,
                err_u: 1e-4,
                err_phi: 2e-5,
                rate_u: Some(3.32),
                rate_phi: Some(3.32),
            },
        ];
        let p1 = dir.join("conv1.csv");
        let p2 = dir.join("conv2.csv");
        export_convergence_csv(&p1, &rows).unwrap();
        export_convergence_csv(&p2, &rows).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("level,h,ndof,err_u,err_phi,rate_u,rate_phi\n"));
        assert!(!text.contains('\r'));
    }
}
