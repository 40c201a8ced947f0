//! Gauss quadrature rules: 1D Gauss-Jacobi via Golub-Welsch, tensor rules
//! on quads/hexes and a collapsed (Duffy with Jacobi weight) rule on the
//! unit triangle.

use crate::error::{Error, Result};
use faer::Mat;

/// n-point Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^alpha (1+x)^beta.
/// Exact for polynomials of degree 2n-1 against that weight.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Parameter("quadrature rule needs n >= 1".into()));
    }
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        diag[k] = (beta * beta - alpha * alpha) / denom;
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den = (2.0 * kf + ab).powi(2) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0);
        off[k - 1] = (num / den).sqrt();
    }
    // mu0 = 2^(a+b+1) * Gamma(a+1) Gamma(b+1) / Gamma(a+b+2); here alpha and
    // beta are small non-negative integers.
    let gamma_int = |v: f64| -> f64 {
        let mut g = 1.0;
        let mut x = v - 1.0;
        while x > 0.5 {
            g *= x;
            x -= 1.0;
        }
        g
    };
    let mu0 = 2f64.powf(ab + 1.0) * gamma_int(alpha + 1.0) * gamma_int(beta + 1.0) / gamma_int(ab + 2.0);

    let jm = Mat::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if j + 1 == i || i + 1 == j {
            off[i.min(j)]
        } else {
            0.0
        }
    });
    let evd = jm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("quadrature eigensolve failed: {e:?}")))?;
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (evd.S()[i], mu0 * evd.U()[(0, i)] * evd.U()[(0, i)]))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pairs.into_iter().unzip())
}

/// n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule on the unit triangle {x,y >= 0, x+y <= 1} exact for total degree
/// `degree`, via the collapsed map x = xi, y = eta (1 - xi).
pub fn triangle_rule(degree: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let n = degree / 2 + 1;
    let (tj, wj) = gauss_jacobi(n, 1.0, 0.0)?;
    let (tl, wl) = gauss_legendre(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        let xi = 0.5 * (tj[i] + 1.0);
        for j in 0..n {
            let eta = 0.5 * (tl[j] + 1.0);
            points.push([xi, eta * (1.0 - xi), 0.0]);
            weights.push(0.25 * wj[i] * 0.5 * wl[j]);
        }
    }
    Ok((points, weights))
}

/// Tensor Gauss-Legendre rule on [-1,1]^dim exact for degree 2n-1 per axis.
pub fn tensor_rule(dim: usize, n: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let (t, w) = gauss_legendre(n)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                points.push([t[i], 0.0, 0.0]);
                weights.push(w[i]);
            }
        }
        2 => {
            for j in 0..n {
                for i in 0..n {
                    points.push([t[i], t[j], 0.0]);
                    weights.push(w[i] * w[j]);
                }
            }
        }
        3 => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        points.push([t[i], t[j], t[k]]);
                        weights.push(w[i] * w[j] * w[k]);
                    }
                }
            }
        }
        _ => return Err(Error::Parameter(format!("tensor rule dim {dim}"))),
    }
    Ok((points, weights))
}
