//! Legendre polynomials with derivatives and the modal polynomial basis
//! backing the nodal shape functions.

/// Evaluates P_0..P_n, first and second derivatives at x (on [-1, 1]).
pub fn legendre_all(n: usize, x: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(n + 1);
    out.push((1.0, 0.0, 0.0));
    if n == 0 {
        return out;
    }
    out.push((x, 1.0, 0.0));
    for k in 1..n {
        let (pk, dk, ddk) = out[k];
        let (pm, dm, ddm) = out[k - 1];
        let a = (2 * k + 1) as f64;
        let b = k as f64;
        let c = (k + 1) as f64;
        let p = (a * x * pk - b * pm) / c;
        let dp = (a * (pk + x * dk) - b * dm) / c;
        let ddp = (a * (2.0 * dk + x * ddk) - b * ddm) / c;
        out.push((p, dp, ddp));
    }
    out
}

/// Coordinate convention of the modal basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalDomain {
    /// Shifted Legendre on [0, 1] per axis (simplex reference).
    Unit,
    /// Plain Legendre on [-1, 1] per axis (tensor-product reference).
    Biunit,
}

/// Tensor-product Legendre basis restricted to an exponent set.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub dim: usize,
    pub domain: ModalDomain,
    pub exponents: Vec<[usize; 3]>,
    max_degree: usize,
}

impl ModalBasis {
    /// Total-degree basis, |a| <= p (simplex).
    pub fn simplex(dim: usize, p: usize) -> Self {
        let mut exponents = Vec::new();
        match dim {
            2 => {
                for total in 0..=p {
                    for a in 0..=total {
                        exponents.push([total - a, a, 0]);
                    }
                }
            }
            _ => unreachable!("simplex basis only used in 2D"),
        }
        ModalBasis {
            dim,
            domain: ModalDomain::Unit,
            exponents,
            max_degree: p,
        }
    }

    /// Per-axis degree basis, a_d <= p (quad/hex).
    pub fn tensor(dim: usize, p: usize) -> Self {
        let mut exponents = Vec::new();
        match dim {
            2 => {
                for b in 0..=p {
                    for a in 0..=p {
                        exponents.push([a, b, 0]);
                    }
                }
            }
            3 => {
                for c in 0..=p {
                    for b in 0..=p {
                        for a in 0..=p {
                            exponents.push([a, b, c]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        ModalBasis {
            dim,
            domain: ModalDomain::Biunit,
            exponents,
            max_degree: p,
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    /// Evaluates every modal function (value, gradient, hessian) at `x`,
    /// given in the element reference frame.
    pub fn eval(&self, x: &[f64; 3]) -> Vec<(f64, [f64; 3], [[f64; 3]; 3])> {
        // 1D tables per axis, with chain rule for the [0,1] shift.
        let mut tables: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(self.dim);
        for d in 0..self.dim {
            let (t, scale) = match self.domain {
                ModalDomain::Unit => (2.0 * x[d] - 1.0, 2.0),
                ModalDomain::Biunit => (x[d], 1.0),
            };
            let raw = legendre_all(self.max_degree, t);
            tables.push(
                raw.into_iter()
                    .map(|(p, dp, ddp)| (p, dp * scale, ddp * scale * scale))
                    .collect(),
            );
        }
        self.exponents
            .iter()
            .map(|exp| {
                let mut v = 1.0;
                for d in 0..self.dim {
                    v *= tables[d][exp[d]].0;
                }
                let mut grad = [0.0; 3];
                let mut hess = [[0.0; 3]; 3];
                for a in 0..self.dim {
                    let mut g = tables[a][exp[a]].1;
                    for d in 0..self.dim {
                        if d != a {
                            g *= tables[d][exp[d]].0;
                        }
                    }
                    grad[a] = g;
                    for b in a..self.dim {
                        let mut h = if a == b {
                            tables[a][exp[a]].2
                        } else {
                            tables[a][exp[a]].1 * tables[b][exp[b]].1
                        };
                        for d in 0..self.dim {
                            if d != a && d != b {
                                h *= tables[d][exp[d]].0;
                            }
                        }
                        hess[a][b] = h;
                        hess[b][a] = h;
                    }
                }
                (v, grad, hess)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_values_and_derivatives() {
        let x = 0.37;
        let t = legendre_all(4, x);
        assert_relative_eq!(t[2].0, 0.5 * (3.0 * x * x - 1.0), max_relative = 1e-14);
        assert_relative_eq!(t[3].0, 0.5 * (5.0 * x * x * x - 3.0 * x), max_relative = 1e-14);
        assert_relative_eq!(t[3].1, 0.5 * (15.0 * x * x - 3.0), max_relative = 1e-14);
        assert_relative_eq!(t[3].2, 15.0 * x, max_relative = 1e-14);
        assert_relative_eq!(
            t[4].0,
            0.125 * (35.0 * x.powi(4) - 30.0 * x * x + 3.0),
            max_relative = 1e-13
        );
    }

    #[test]
    fn modal_gradient_matches_finite_difference() {
        let basis = ModalBasis::simplex(2, 3);
        let x = [0.21, 0.34, 0.0];
        let h = 1e-6;
        let vals = basis.eval(&x);
        for d in 0..2 {
            let mut xp = x;
            xp[d] += h;
            let mut xm = x;
            xm[d] -= h;
            let vp = basis.eval(&xp);
            let vm = basis.eval(&xm);
            for (m, v) in vals.iter().enumerate() {
                let fd = (vp[m].0 - vm[m].0) / (2.0 * h);
                assert_relative_eq!(v.1[d], fd, epsilon = 1e-7, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn modal_hessian_matches_finite_difference() {
        let basis = ModalBasis::tensor(3, 2);
        let x = [0.11, -0.42, 0.68];
        let h = 1e-5;
        let vals = basis.eval(&x);
        for d in 0..3 {
            let mut xp = x;
            xp[d] += h;
            let mut xm = x;
            xm[d] -= h;
            let vp = basis.eval(&xp);
            let vm = basis.eval(&xm);
            for (m, v) in vals.iter().enumerate() {
                for e in 0..3 {
                    let fd = (vp[m].1[e] - vm[m].1[e]) / (2.0 * h);
                    assert_relative_eq!(v.2[d][e], fd, epsilon = 1e-8, max_relative = 1e-6);
                }
            }
        }
    }
}
