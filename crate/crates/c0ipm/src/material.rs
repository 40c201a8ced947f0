//! Constitutive model: elasticity, strain-gradient, piezoelectric,
//! flexoelectric and dielectric tensors built from scalar parameters,
//! plus the pointwise stress evaluation.
//!
//! Tensors are stored as fixed 3×3×... arrays with the active spatial
//! dimension recorded separately; entries beyond `dim` stay zero. The
//! rank-6 strain-gradient tensor `h` is never stored: it factors as
//! `h[i][j][k][l][m][n] = l² C[i][j][l][m] δ[k][n]`, so the double stress
//! is applied as `σ̃_sg[i][j][k] = l² (C : ∂ε/∂x_k)[i][j]`.

use crate::error::{Error, Result};

pub type Vector = [f64; 3];
pub type Tensor2 = [[f64; 3]; 3];
pub type Tensor3 = [[[f64; 3]; 3]; 3];
pub type Tensor4 = [[[[f64; 3]; 3]; 3]; 3];

/// Convention used to reduce the 3D elastic law to 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlaneKind {
    #[default]
    PlaneStrain,
    PlaneStress,
}

/// Scalar material parameters, in SI units.
#[derive(Debug, Clone)]
pub struct MaterialParameters {
    /// Young modulus [Pa].
    pub young: f64,
    /// Poisson ratio [-].
    pub nu: f64,
    /// Internal length scale [m].
    pub l: f64,
    /// Per-axis dielectric constants [J/V²/m]; length `dim`.
    pub kappa: Vector,
    /// Piezoelectric coefficients [J/V/m²].
    pub e_l: f64,
    pub e_t: f64,
    pub e_s: f64,
    /// Flexoelectric coefficients [J/V/m].
    pub mu_l: f64,
    pub mu_t: f64,
    pub mu_s: f64,
    /// Principal piezoelectric direction, in 0..dim.
    pub piezo_axis: usize,
    /// 2D reduction of the elastic law (ignored in 3D).
    pub plane: PlaneKind,
}

impl MaterialParameters {
    /// Elastic-only parameters with all couplings and permittivities zeroed
    /// except a unit dielectric (handy in purely mechanical tests).
    pub fn elastic(young: f64, nu: f64, l: f64) -> Self {
        MaterialParameters {
            young,
            nu,
            l,
            kappa: [1.0; 3],
            e_l: 0.0,
            e_t: 0.0,
            e_s: 0.0,
            mu_l: 0.0,
            mu_t: 0.0,
            mu_s: 0.0,
            piezo_axis: 0,
            plane: PlaneKind::PlaneStrain,
        }
    }

    /// Copy with piezoelectric coupling removed.
    pub fn without_piezo(&self) -> Self {
        let mut p = self.clone();
        p.e_l = 0.0;
        p.e_t = 0.0;
        p.e_s = 0.0;
        p
    }

    /// Copy with flexoelectric coupling removed.
    pub fn without_flexo(&self) -> Self {
        let mut p = self.clone();
        p.mu_l = 0.0;
        p.mu_t = 0.0;
        p.mu_s = 0.0;
        p
    }
}

/// Assembled constitutive tensors.
#[derive(Debug, Clone)]
pub struct MaterialTensors {
    pub dim: usize,
    /// Rank-4 elasticity tensor with minor and major symmetries.
    pub c: Tensor4,
    /// Rank-3 piezoelectric tensor, e[l][i][j], symmetric in (i,j).
    pub e: Tensor3,
    /// Rank-4 flexoelectric tensor, mu[l][i][j][k], symmetric in (i,j).
    pub mu: Tensor4,
    /// Diagonal dielectric tensor.
    pub kappa: Vector,
    /// Internal length scale squared [m²].
    pub l2: f64,
    /// Young modulus kept for penalty scaling formulas [Pa].
    pub young: f64,
}

/// Kinematic state at a material point.
#[derive(Debug, Clone)]
pub struct PointKinematics {
    /// Symmetric strain.
    pub eps: Tensor2,
    /// Strain gradient, grad_eps[i][j][k] = ∂ε_ij/∂x_k, symmetric in (i,j).
    pub grad_eps: Tensor3,
    /// Electric field E = −∇φ [V/m].
    pub e_field: Vector,
}

impl PointKinematics {
    pub fn zero() -> Self {
        PointKinematics {
            eps: [[0.0; 3]; 3],
            grad_eps: [[[0.0; 3]; 3]; 3],
            e_field: [0.0; 3],
        }
    }
}

/// Stress state at a material point.
#[derive(Debug, Clone)]
pub struct PointStresses {
    /// Local (Cauchy-like) stress [Pa].
    pub sigma_hat: Tensor2,
    /// Double stress, symmetric in first two indices [Pa·m].
    pub sigma_tilde: Tensor3,
    /// Electric displacement [C/m²].
    pub d_hat: Vector,
}

/// Builds the constitutive tensors from scalar parameters.
///
/// In 2D the elasticity tensor follows the plane convention in `params`
/// (plane strain keeps the 3D Lamé constants). The piezoelectric tensor
/// places `e_l` on the longitudinal slot of `piezo_axis`, `e_t` on the
/// transverse normal slots and `e_s` on shear slots. The flexoelectric
/// tensor is the three-constant cubic form
/// `mu[l][i][j][k] = mu_t δ_lk δ_ij + mu_s (δ_li δ_jk + δ_lj δ_ik)
///  + (mu_l − mu_t − 2 mu_s) [l=i=j=k]`.
pub fn build_material_tensors(params: &MaterialParameters, dim: usize) -> Result<MaterialTensors> {
    if dim != 2 && dim != 3 {
        return Err(Error::Parameter(format!("dim must be 2 or 3, got {dim}")));
    }
    if params.young.is_nan() || params.young <= 0.0 {
        return Err(Error::Parameter(format!(
            "Young modulus must be positive, got {}",
            params.young
        )));
    }
    if params.nu <= -1.0 || params.nu >= 0.5 {
        return Err(Error::Parameter(format!(
            "Poisson ratio must lie in (-1, 0.5), got {}",
            params.nu
        )));
    }
    if params.l < 0.0 {
        return Err(Error::Parameter(format!(
            "internal length scale must be non-negative, got {}",
            params.l
        )));
    }
    let electric_active = params.kappa[..dim].iter().any(|&k| k != 0.0)
        || [params.e_l, params.e_t, params.e_s, params.mu_l, params.mu_t, params.mu_s]
            .iter()
            .any(|&v| v != 0.0);
    if electric_active && params.kappa[..dim].iter().any(|&k| k <= 0.0) {
        return Err(Error::Parameter(
            "dielectric constants must be positive when the electric problem is active".into(),
        ));
    }
    if params.piezo_axis >= dim {
        return Err(Error::Parameter(format!(
            "piezo_axis {} out of range for dim {}",
            params.piezo_axis, dim
        )));
    }

    let g = params.young / (2.0 * (1.0 + params.nu));
    let lambda_3d = params.young * params.nu / ((1.0 + params.nu) * (1.0 - 2.0 * params.nu));
    let lambda = if dim == 2 && params.plane == PlaneKind::PlaneStress {
        2.0 * lambda_3d * g / (lambda_3d + 2.0 * g)
    } else {
        lambda_3d
    };

    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut c = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    c[i][j][k][l] = lambda * d(i, j) * d(k, l) + g * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                }
            }
        }
    }

    let ax = params.piezo_axis;
    let mut e = [[[0.0; 3]; 3]; 3];
    for i in 0..dim {
        if i == ax {
            e[ax][i][i] = params.e_l;
        } else {
            e[ax][i][i] = params.e_t;
            e[i][i][ax] = params.e_s;
            e[i][ax][i] = params.e_s;
        }
    }

    let mu_corr = params.mu_l - params.mu_t - 2.0 * params.mu_s;
    let mut mu = [[[[0.0; 3]; 3]; 3]; 3];
    for l in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let mut v = params.mu_t * d(l, k) * d(i, j)
                        + params.mu_s * (d(l, i) * d(j, k) + d(l, j) * d(i, k));
                    if l == i && i == j && j == k {
                        v += mu_corr;
                    }
                    mu[l][i][j][k] = v;
                }
            }
        }
    }

    let mut kappa = [0.0; 3];
    kappa[..dim].copy_from_slice(&params.kappa[..dim]);

    Ok(MaterialTensors {
        dim,
        c,
        e,
        mu,
        kappa,
        l2: params.l * params.l,
        young: params.young,
    })
}

impl MaterialTensors {
    /// Contraction (C : t)[i][j] = C[i][j][k][l] t[k][l].
    pub fn c_contract(&self, t: &Tensor2) -> Tensor2 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    for l in 0..self.dim {
                        s += self.c[i][j][k][l] * t[k][l];
                    }
                }
                out[i][j] = s;
            }
        }
        out
    }

    /// Purely mechanical double stress σ̃_sg[i][j][k] = l² (C : ∂ε/∂x_k)[i][j].
    pub fn sigma_tilde_sg(&self, grad_eps: &Tensor3) -> Tensor3 {
        let mut out = [[[0.0; 3]; 3]; 3];
        for k in 0..self.dim {
            let mut slice = [[0.0; 3]; 3];
            for i in 0..self.dim {
                for j in 0..self.dim {
                    slice[i][j] = grad_eps[i][j][k];
                }
            }
            let contracted = self.c_contract(&slice);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out[i][j][k] = self.l2 * contracted[i][j];
                }
            }
        }
        out
    }
}

/// Evaluates σ̂ = C:ε − E·e, σ̃ = h⋮∇ε − E·μ and D̂ = κ·E + e:ε + μ⋮∇ε.
pub fn evaluate_constitutive(kin: &PointKinematics, mat: &MaterialTensors) -> PointStresses {
    let dim = mat.dim;

    let mut sigma_hat = mat.c_contract(&kin.eps);
    for i in 0..dim {
        for j in 0..dim {
            for l in 0..dim {
                sigma_hat[i][j] -= kin.e_field[l] * mat.e[l][i][j];
            }
        }
    }

    let mut sigma_tilde = mat.sigma_tilde_sg(&kin.grad_eps);
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    sigma_tilde[i][j][k] -= kin.e_field[l] * mat.mu[l][i][j][k];
                }
            }
        }
    }

    let mut d_hat = [0.0; 3];
    for l in 0..dim {
        let mut s = mat.kappa[l] * kin.e_field[l];
        for i in 0..dim {
            for j in 0..dim {
                s += mat.e[l][i][j] * kin.eps[i][j];
                for k in 0..dim {
                    s += mat.mu[l][i][j][k] * kin.grad_eps[i][j][k];
                }
            }
        }
        d_hat[l] = s;
    }

    PointStresses {
        sigma_hat,
        sigma_tilde,
        d_hat,
    }
}

/// Double traction r_i = σ̃_ijk n_j n_k for a unit normal n.
pub fn double_traction(sigma_tilde: &Tensor3, n: &Vector, dim: usize) -> Result<Vector> {
    let norm2: f64 = n[..dim].iter().map(|v| v * v).sum();
    if (norm2.sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::Geometry(format!(
            "double_traction requires a unit normal, |n| = {}",
            norm2.sqrt()
        )));
    }
    let mut r = [0.0; 3];
    for i in 0..dim {
        let mut s = 0.0;
        for j in 0..dim {
            for k in 0..dim {
                s += sigma_tilde[i][j][k] * n[j] * n[k];
            }
        }
        r[i] = s;
    }
    Ok(r)
}
