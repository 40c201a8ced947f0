//! Nodal point sets: Gauss-Lobatto lines for tensor elements and
//! warp-and-blend (Fekete-like) points on the triangle.

use super::poly::legendre_all;
use crate::error::{Error, Result};
use faer::prelude::Solve;
use faer::Mat;

/// Where a reference node sits on the element; used to share nodes between
/// elements when generating meshes and to build face node lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Corner vertex (local corner index).
    Vertex(usize),
    /// On an element edge: (local edge index, slot 1..p-1 along the edge).
    Edge(usize, usize),
    /// On an element face interior, 3D only: (local face, a-slot, b-slot).
    Face(usize, usize, usize),
    /// Strictly interior node.
    Interior,
}

/// Gauss-Lobatto nodes on [-1, 1] for p = 1..=4 (p+1 points, ascending).
pub fn lobatto(p: usize) -> Result<Vec<f64>> {
    let s5 = 1.0 / 5f64.sqrt();
    let s37 = (3.0 / 7.0f64).sqrt();
    Ok(match p {
        1 => vec![-1.0, 1.0],
        2 => vec![-1.0, 0.0, 1.0],
        3 => vec![-1.0, -s5, s5, 1.0],
        4 => vec![-1.0, -s37, 0.0, s37, 1.0],
        _ => {
            return Err(Error::Capability(format!(
                "nodal degree {p} not supported (tabulated range is 1..=4)"
            )))
        }
    })
}

/// Gauss-Lobatto fractions on [0, 1].
pub fn lobatto_unit(p: usize) -> Result<Vec<f64>> {
    Ok(lobatto(p)?.into_iter().map(|t| 0.5 * (t + 1.0)).collect())
}

/// 1D warp displacement from equispaced to Gauss-Lobatto, evaluated at
/// arbitrary coordinates via the equispaced Lagrange basis.
fn warp_factor(p: usize, r_out: &[f64]) -> Result<Vec<f64>> {
    let n = p + 1;
    let lgl = lobatto(p)?;
    let req: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();

    // V_eq[i][j] = P_j(req_i); L(r) = V_eq^{-T} P(r).
    let veq = Mat::from_fn(n, n, |i, j| legendre_all(p, req[i])[j].0);
    let lu = veq.transpose().to_owned().partial_piv_lu();

    let mut out = Vec::with_capacity(r_out.len());
    for &r in r_out {
        let pvec = Mat::from_fn(n, 1, |i, _| legendre_all(p, r)[i].0);
        let lag = lu.solve(&pvec);
        let mut w = 0.0;
        for i in 0..n {
            w += lag[(i, 0)] * (lgl[i] - req[i]);
        }
        let interior = r.abs() < 1.0 - 1e-10;
        if interior {
            w /= 1.0 - r * r;
        } else {
            w = 0.0;
        }
        out.push(w);
    }
    Ok(out)
}

/// Warp-and-blend nodes on the unit triangle (0,0)-(1,0)-(0,1), row-major
/// over the (i, j) lattice with i + j <= p, together with their location
/// class. Edge nodes land exactly on the Gauss-Lobatto fractions.
pub fn triangle_nodes(p: usize) -> Result<(Vec<[f64; 3]>, Vec<NodeClass>)> {
    const ALP_OPT: [f64; 5] = [0.0, 0.0, 0.0, 1.4152, 0.1001];
    if p == 0 || p > 4 {
        return Err(Error::Capability(format!(
            "triangle degree {p} not supported (tabulated range is 1..=4)"
        )));
    }
    let alpha = ALP_OPT[p];
    let pf = p as f64;

    let mut lattice = Vec::new();
    let mut class = Vec::new();
    for j in 0..=p {
        for i in 0..=(p - j) {
            lattice.push((i, j));
            class.push(match (i, j) {
                (0, 0) => NodeClass::Vertex(0),
                (i, 0) if i == p => NodeClass::Vertex(1),
                (0, j) if j == p => NodeClass::Vertex(2),
                (i, 0) => NodeClass::Edge(0, i),
                (i, j) if i + j == p => NodeClass::Edge(1, j),
                (0, j) => NodeClass::Edge(2, p - j),
                _ => NodeClass::Interior,
            });
        }
    }

    // Barycentric coordinates of the equispaced lattice: l1 is the weight of
    // the top vertex, l2 of the bottom-left, l3 of the bottom-right.
    let n_nodes = lattice.len();
    let mut l1 = vec![0.0; n_nodes];
    let mut l2 = vec![0.0; n_nodes];
    let mut l3 = vec![0.0; n_nodes];
    for (s, &(i, j)) in lattice.iter().enumerate() {
        l1[s] = j as f64 / pf;
        l3[s] = i as f64 / pf;
        l2[s] = 1.0 - l1[s] - l3[s];
    }

    let mut x: Vec<f64> = (0..n_nodes).map(|s| -l2[s] + l3[s]).collect();
    let mut y: Vec<f64> = (0..n_nodes)
        .map(|s| (-l2[s] - l3[s] + 2.0 * l1[s]) / 3f64.sqrt())
        .collect();

    let arg1: Vec<f64> = (0..n_nodes).map(|s| l3[s] - l2[s]).collect();
    let arg2: Vec<f64> = (0..n_nodes).map(|s| l1[s] - l3[s]).collect();
    let arg3: Vec<f64> = (0..n_nodes).map(|s| l2[s] - l1[s]).collect();
    let w1 = warp_factor(p, &arg1)?;
    let w2 = warp_factor(p, &arg2)?;
    let w3 = warp_factor(p, &arg3)?;

    for s in 0..n_nodes {
        let blend1 = 4.0 * l2[s] * l3[s];
        let blend2 = 4.0 * l1[s] * l3[s];
        let blend3 = 4.0 * l1[s] * l2[s];
        let warp1 = blend1 * w1[s] * (1.0 + (alpha * l1[s]).powi(2));
        let warp2 = blend2 * w2[s] * (1.0 + (alpha * l2[s]).powi(2));
        let warp3 = blend3 * w3[s] * (1.0 + (alpha * l3[s]).powi(2));
        let (c1, s1) = (1.0, 0.0);
        let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
        let (c3, s3) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
        x[s] += c1 * warp1 + c2 * warp2 + c3 * warp3;
        y[s] += s1 * warp1 + s2 * warp2 + s3 * warp3;
    }

    // Equilateral back to barycentric, then to the unit right triangle with
    // vertices v0=(0,0) (l2), v1=(1,0) (l3), v2=(0,1) (l1).
    let mut nodes = Vec::with_capacity(n_nodes);
    for s in 0..n_nodes {
        let b1 = (3f64.sqrt() * y[s] + 1.0) / 3.0;
        let b3 = (3.0 * x[s] - 3f64.sqrt() * y[s] + 2.0) / 6.0;
        nodes.push([b3, b1, 0.0]);
    }
    Ok((nodes, class))
}

/// Tensor Gauss-Lobatto nodes for quads (dim 2) and hexes (dim 3), row-major
/// lattice with the first axis fastest, plus node classes.
pub fn tensor_nodes(dim: usize, p: usize) -> Result<(Vec<[f64; 3]>, Vec<NodeClass>)> {
    let line = lobatto(p)?;
    let n = p + 1;
    let mut nodes = Vec::new();
    let mut class = Vec::new();
    let edge_slot = |a: usize, rev: bool| if rev { p - a } else { a };
    match dim {
        2 => {
            for j in 0..n {
                for i in 0..n {
                    nodes.push([line[i], line[j], 0.0]);
                    let on_i = i == 0 || i == p;
                    let on_j = j == 0 || j == p;
                    class.push(match (on_i, on_j) {
                        (true, true) => NodeClass::Vertex(match (i == p, j == p) {
                            (false, false) => 0,
                            (true, false) => 1,
                            (true, true) => 2,
                            (false, true) => 3,
                        }),
                        // edges: e0 bottom (v0->v1), e1 right (v1->v2),
                        // e2 top (v2->v3), e3 left (v3->v0)
                        (false, true) => {
                            if j == 0 {
                                NodeClass::Edge(0, edge_slot(i, false))
                            } else {
                                NodeClass::Edge(2, edge_slot(i, true))
                            }
                        }
                        (true, false) => {
                            if i == p {
                                NodeClass::Edge(1, edge_slot(j, false))
                            } else {
                                NodeClass::Edge(3, edge_slot(j, true))
                            }
                        }
                        (false, false) => NodeClass::Interior,
                    });
                }
            }
        }
        3 => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        nodes.push([line[i], line[j], line[k]]);
                        // Full 3D classification is only needed for face node
                        // lists, which are derived geometrically; mark
                        // vertices and leave the rest coarse.
                        let onb = [i == 0 || i == p, j == 0 || j == p, k == 0 || k == p];
                        let n_on = onb.iter().filter(|&&b| b).count();
                        class.push(if n_on == 3 {
                            let vi = (i == p) as usize;
                            let vj = (j == p) as usize;
                            let vk = (k == p) as usize;
                            let idx = match (vi, vj, vk) {
                                (0, 0, 0) => 0,
                                (1, 0, 0) => 1,
                                (1, 1, 0) => 2,
                                (0, 1, 0) => 3,
                                (0, 0, 1) => 4,
                                (1, 0, 1) => 5,
                                (1, 1, 1) => 6,
                                _ => 7,
                            };
                            NodeClass::Vertex(idx)
                        } else {
                            NodeClass::Interior
                        });
                    }
                }
            }
        }
        _ => return Err(Error::Capability(format!("tensor nodes dim {dim}"))),
    }
    Ok((nodes, class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triangle_node_counts() {
        for p in 1..=4 {
            let (nodes, _) = triangle_nodes(p).unwrap();
            assert_eq!(nodes.len(), (p + 1) * (p + 2) / 2);
        }
    }

    #[test]
    fn triangle_edge_nodes_on_lobatto_fractions() {
        for p in 2..=4 {
            let (nodes, class) = triangle_nodes(p).unwrap();
            let fr = lobatto_unit(p).unwrap();
            for (n, c) in nodes.iter().zip(&class) {
                if let NodeClass::Edge(0, slot) = c {
                    // bottom edge: y = 0, x at the Lobatto fraction
                    assert_relative_eq!(n[1], 0.0, epsilon = 1e-13);
                    assert_relative_eq!(n[0], fr[*slot], epsilon = 1e-12);
                }
                if let NodeClass::Edge(1, slot) = c {
                    // hypotenuse, parameterized from v1=(1,0) to v2=(0,1)
                    assert_relative_eq!(n[0] + n[1], 1.0, epsilon = 1e-12);
                    assert_relative_eq!(n[1], fr[*slot], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn triangle_vertices_exact() {
        let (nodes, class) = triangle_nodes(4).unwrap();
        for (n, c) in nodes.iter().zip(&class) {
            match c {
                NodeClass::Vertex(0) => {
                    assert_relative_eq!(n[0], 0.0, epsilon = 1e-14);
                    assert_relative_eq!(n[1], 0.0, epsilon = 1e-14);
                }
                NodeClass::Vertex(1) => {
                    assert_relative_eq!(n[0], 1.0, epsilon = 1e-14);
                    assert_relative_eq!(n[1], 0.0, epsilon = 1e-14);
                }
                NodeClass::Vertex(2) => {
                    assert_relative_eq!(n[0], 0.0, epsilon = 1e-14);
                    assert_relative_eq!(n[1], 1.0, epsilon = 1e-14);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn unsupported_degree_errors() {
        assert!(lobatto(5).is_err());
        assert!(triangle_nodes(7).is_err());
    }
}
