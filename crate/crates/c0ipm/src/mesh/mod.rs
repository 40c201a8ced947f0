//! High-order meshes: structured generators for the verification presets,
//! plain-text file I/O, the interior/boundary face table with rotation
//! codes, mesh edges, and boundary classification with periodic pairing.

mod boundary;
mod connectivity;
mod io;

pub use boundary::{
    zero_scalar, zero_vector,
    apply_boundary_spec, BoundarySpec, BoundaryRegion, CornerLoad, ElecBc, FaceSelector, FaceTags,
    Mech1Bc, Mech1Tag, Mech2Bc, Mech2Tag, ElecTag, PeriodicMap, PeriodicSpec, ScalarFn,
    TaggedBoundary, VectorFn,
};
pub use connectivity::{build_connectivity, Connectivity, EdgeClass, EdgeKey, Face, MeshEdge};
pub use io::{read_mesh, write_mesh};

use crate::error::{Error, Result};
use crate::refelem::{ElemShape, NodeClass, ReferenceElement};

/// A high-order (possibly curved) mesh of a single element shape.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub degree: usize,
    pub shape: ElemShape,
    pub coords: Vec<[f64; 3]>,
    conn: Vec<usize>,
    n_en: usize,
    /// Optional boundary face tags from the mesh file: (elem, local face, tag).
    pub bface_tags: Vec<(usize, usize, i64)>,
}

impl Mesh {
    pub fn new(
        dim: usize,
        degree: usize,
        shape: ElemShape,
        coords: Vec<[f64; 3]>,
        conn: Vec<usize>,
    ) -> Result<Self> {
        let n_en = shape.n_nodes(degree);
        if !conn.len().is_multiple_of(n_en) {
            return Err(Error::Connectivity(format!(
                "connectivity length {} is not a multiple of {} nodes per element",
                conn.len(),
                n_en
            )));
        }
        if let Some(&bad) = conn.iter().find(|&&id| id >= coords.len()) {
            return Err(Error::Connectivity(format!(
                "node id {bad} out of range ({} nodes)",
                coords.len()
            )));
        }
        Ok(Mesh {
            dim,
            degree,
            shape,
            coords,
            conn,
            n_en,
            bface_tags: Vec::new(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elems(&self) -> usize {
        self.conn.len() / self.n_en
    }

    pub fn n_en(&self) -> usize {
        self.n_en
    }

    pub fn elem_nodes(&self, e: usize) -> &[usize] {
        &self.conn[e * self.n_en..(e + 1) * self.n_en]
    }

    pub fn elem_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.elem_nodes(e).iter().map(|&n| self.coords[n]).collect()
    }

    /// Element diameter: largest corner-to-corner distance.
    pub fn elem_diameter(&self, re: &ReferenceElement, e: usize) -> f64 {
        let corners: Vec<[f64; 3]> = re
            .node_class
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, NodeClass::Vertex(_)))
            .map(|(i, _)| self.coords[self.elem_nodes(e)[i]])
            .collect();
        let mut d = 0.0f64;
        for i in 0..corners.len() {
            for j in (i + 1)..corners.len() {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += (corners[i][k] - corners[j][k]).powi(2);
                }
                d = d.max(s.sqrt());
            }
        }
        d
    }

    /// Largest element diameter (the characteristic mesh size on uniform
    /// meshes).
    pub fn mesh_size(&self, re: &ReferenceElement) -> f64 {
        (0..self.n_elems())
            .map(|e| self.elem_diameter(re, e))
            .fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in &self.coords {
            for k in 0..3 {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        (lo, hi)
    }
}

/// Description of a structured axis-aligned mesh; `refined(k)` doubles the
/// division count k times, which produces nested meshes.
#[derive(Debug, Clone)]
pub struct StructuredSpec {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub divisions: [usize; 3],
    pub shape: ElemShape,
    pub degree: usize,
}

impl StructuredSpec {
    pub fn square(side: f64, n: usize, shape: ElemShape, degree: usize) -> Self {
        StructuredSpec {
            lo: [0.0; 3],
            hi: [side, side, 0.0],
            divisions: [n, n, 0],
            shape,
            degree,
        }
    }

    pub fn cube(side: f64, n: usize, degree: usize) -> Self {
        StructuredSpec {
            lo: [0.0; 3],
            hi: [side, side, side],
            divisions: [n, n, n],
            shape: ElemShape::Hex,
            degree,
        }
    }

    pub fn refined(&self, levels: usize) -> Self {
        let mut s = self.clone();
        for d in 0..3 {
            s.divisions[d] <<= levels;
        }
        s
    }

    pub fn mesh(&self) -> Result<Mesh> {
        structured_mesh(
            &self.lo,
            &self.hi,
            &self.divisions,
            self.shape,
            self.degree,
        )
    }
}

/// Diagonal pattern used when splitting quad cells into triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleSplit {
    /// Every cell split along the lower-left-to-upper-right diagonal.
    #[default]
    Consistent,
    /// Checkerboard pattern of alternating diagonals.
    Alternating,
}

/// Builds a structured mesh of an axis-aligned box. Quads/hexes come from
/// the tensor lattice; triangles split each quad cell along the
/// lower-left-to-upper-right diagonal, consistently over the mesh.
pub fn structured_mesh(
    lo: &[f64; 3],
    hi: &[f64; 3],
    divisions: &[usize; 3],
    shape: ElemShape,
    degree: usize,
) -> Result<Mesh> {
    structured_mesh_split(lo, hi, divisions, shape, degree, TriangleSplit::Consistent)
}

/// Same with an explicit triangle splitting pattern.
pub fn structured_mesh_split(
    lo: &[f64; 3],
    hi: &[f64; 3],
    divisions: &[usize; 3],
    shape: ElemShape,
    degree: usize,
    split: TriangleSplit,
) -> Result<Mesh> {
    let dim = shape.dim();
    for d in 0..dim {
        if divisions[d] == 0 {
            return Err(Error::Parameter(format!(
                "divisions along axis {d} must be >= 1"
            )));
        }
        if hi[d] <= lo[d] {
            return Err(Error::Parameter(format!("empty domain along axis {d}")));
        }
    }
    let re = ReferenceElement::new(shape, degree)?;
    let p = degree;
    let frac = crate::refelem::gauss_lobatto_fractions(p)?;

    // 1D node coordinates along an axis: divisions cells, p segments each.
    let axis_coords = |axis: usize| -> Vec<f64> {
        let n = divisions[axis];
        let dx = (hi[axis] - lo[axis]) / n as f64;
        let mut out = Vec::with_capacity(n * p + 1);
        for c in 0..n {
            for f in frac.iter().take(p) {
                out.push(lo[axis] + (c as f64 + f) * dx);
            }
        }
        out.push(hi[axis]);
        out
    };

    match shape {
        ElemShape::Quad | ElemShape::Hex => {
            let nd = if dim == 2 { 2 } else { 3 };
            let lines: Vec<Vec<f64>> = (0..nd).map(axis_coords).collect();
            let sizes: Vec<usize> = lines.iter().map(|l| l.len()).collect();
            let mut coords = Vec::new();
            if dim == 2 {
                for j in 0..sizes[1] {
                    for i in 0..sizes[0] {
                        coords.push([lines[0][i], lines[1][j], 0.0]);
                    }
                }
            } else {
                for k in 0..sizes[2] {
                    for j in 0..sizes[1] {
                        for i in 0..sizes[0] {
                            coords.push([lines[0][i], lines[1][j], lines[2][k]]);
                        }
                    }
                }
            }
            let mut conn = Vec::new();
            if dim == 2 {
                for cy in 0..divisions[1] {
                    for cx in 0..divisions[0] {
                        for j in 0..=p {
                            for i in 0..=p {
                                conn.push((cy * p + j) * sizes[0] + cx * p + i);
                            }
                        }
                    }
                }
            } else {
                for cz in 0..divisions[2] {
                    for cy in 0..divisions[1] {
                        for cx in 0..divisions[0] {
                            for k in 0..=p {
                                for j in 0..=p {
                                    for i in 0..=p {
                                        conn.push(
                                            ((cz * p + k) * sizes[1] + cy * p + j) * sizes[0]
                                                + cx * p
                                                + i,
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Mesh::new(dim, degree, shape, coords, conn)
        }
        ElemShape::Triangle => {
            let (nx, ny) = (divisions[0], divisions[1]);
            let dx = (hi[0] - lo[0]) / nx as f64;
            let dy = (hi[1] - lo[1]) / ny as f64;
            let vid = |ix: usize, iy: usize| iy * (nx + 1) + ix;
            let mut coords: Vec<[f64; 3]> = Vec::new();
            for iy in 0..=ny {
                for ix in 0..=nx {
                    let x = if ix == nx { hi[0] } else { lo[0] + ix as f64 * dx };
                    let y = if iy == ny { hi[1] } else { lo[1] + iy as f64 * dy };
                    coords.push([x, y, 0.0]);
                }
            }
            let n_vertices = coords.len();

            // canonical mesh edges keyed by (min vertex, max vertex)
            use std::collections::HashMap;
            let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
            let mut edge_list: Vec<(usize, usize)> = Vec::new();
            let add_edge = |a: usize, b: usize, list: &mut Vec<(usize, usize)>, map: &mut HashMap<(usize, usize), usize>| {
                let key = (a.min(b), a.max(b));
                map.entry(key).or_insert_with(|| {
                    list.push(key);
                    list.len() - 1
                });
            };
            let mut tris: Vec<[usize; 3]> = Vec::new();
            for cy in 0..ny {
                for cx in 0..nx {
                    let v00 = vid(cx, cy);
                    let v10 = vid(cx + 1, cy);
                    let v11 = vid(cx + 1, cy + 1);
                    let v01 = vid(cx, cy + 1);
                    let flip = split == TriangleSplit::Alternating && (cx + cy) % 2 == 1;
                    if flip {
                        tris.push([v00, v10, v01]);
                        tris.push([v10, v11, v01]);
                    } else {
                        tris.push([v00, v10, v11]);
                        tris.push([v00, v11, v01]);
                    }
                }
            }
            for t in &tris {
                for e in 0..3 {
                    add_edge(t[e], t[(e + 1) % 3], &mut edge_list, &mut edge_ids);
                }
            }

            // edge node coordinates, computed once per canonical edge
            let edge_base = n_vertices;
            for &(a, b) in &edge_list {
                for slot in 1..p {
                    let f = frac[slot];
                    coords.push([
                        coords[a][0] + f * (coords[b][0] - coords[a][0]),
                        coords[a][1] + f * (coords[b][1] - coords[a][1]),
                        0.0,
                    ]);
                }
            }
            let per_edge = p.saturating_sub(1);
            let interior_base = coords.len();
            let n_int = re
                .node_class
                .iter()
                .filter(|c| matches!(c, NodeClass::Interior))
                .count();

            let mut conn = Vec::new();
            for (ti, t) in tris.iter().enumerate() {
                let vcoords = [coords[t[0]], coords[t[1]], coords[t[2]]];
                let mut int_counter = 0usize;
                for (ln, class) in re.node_class.iter().enumerate() {
                    match class {
                        NodeClass::Vertex(c) => conn.push(t[*c]),
                        NodeClass::Edge(e, slot) => {
                            let (la, lb) = match e {
                                0 => (t[0], t[1]),
                                1 => (t[1], t[2]),
                                _ => (t[2], t[0]),
                            };
                            let key = (la.min(lb), la.max(lb));
                            let eid = edge_ids[&key];
                            let canon_slot = if la < lb { *slot } else { p - *slot };
                            conn.push(edge_base + eid * per_edge + canon_slot - 1);
                        }
                        NodeClass::Interior => {
                            let gid = interior_base + ti * n_int + int_counter;
                            if gid == coords.len() {
                                let r = re.nodes[ln];
                                coords.push([
                                    vcoords[0][0]
                                        + r[0] * (vcoords[1][0] - vcoords[0][0])
                                        + r[1] * (vcoords[2][0] - vcoords[0][0]),
                                    vcoords[0][1]
                                        + r[0] * (vcoords[1][1] - vcoords[0][1])
                                        + r[1] * (vcoords[2][1] - vcoords[0][1]),
                                    0.0,
                                ]);
                            }
                            conn.push(gid);
                            int_counter += 1;
                        }
                        NodeClass::Face(..) => unreachable!("triangles have no face nodes"),
                    }
                }
            }
            Mesh::new(2, degree, ElemShape::Triangle, coords, conn)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn structured_quad_counts() {
        let m = structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 1).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elems(), 4);
    }

    #[test]
    fn structured_triangle_counts() {
        let m =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Triangle, 1).unwrap();
        assert_eq!(m.n_elems(), 8);
        assert_eq!(m.n_nodes(), 9);
    }

    #[test]
    fn structured_hex_node_count_oracle() {
        let m = structured_mesh(&[0.0; 3], &[1.0; 3], &[2, 2, 2], ElemShape::Hex, 2).unwrap();
        // counting oracle over generated connectivity: unique node ids
        let mut seen = vec![false; m.n_nodes()];
        for e in 0..m.n_elems() {
            for &n in m.elem_nodes(e) {
                seen[n] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(m.n_nodes(), 125); // (2*2+1)^3
        assert_eq!(m.n_elems(), 8);
    }

    #[test]
    fn high_order_triangle_nodes_shared_exactly() {
        let m =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[3, 2, 0], ElemShape::Triangle, 4).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 4).unwrap();
        // every element must be non-inverted and all its node coords must be
        // consistent with the affine map of its corners
        for e in 0..m.n_elems() {
            let coords = m.elem_coords(e);
            let geom = re.volume_geometry(&coords).unwrap();
            assert!(geom.det_j.iter().all(|&d| d > 0.0));
            let v0 = coords[0];
            let v1 = coords[re.node_class.iter().position(|c| *c == NodeClass::Vertex(1)).unwrap()];
            let v2 = coords[re.node_class.iter().position(|c| *c == NodeClass::Vertex(2)).unwrap()];
            for (ln, r) in re.nodes.iter().enumerate() {
                let expect = [
                    v0[0] + r[0] * (v1[0] - v0[0]) + r[1] * (v2[0] - v0[0]),
                    v0[1] + r[0] * (v1[1] - v0[1]) + r[1] * (v2[1] - v0[1]),
                ];
                assert_relative_eq!(coords[ln][0], expect[0], epsilon = 1e-12);
                assert_relative_eq!(coords[ln][1], expect[1], epsilon = 1e-12);
            }
        }
        // expected node count: vertices + edges*(p-1) + tris*interior
        let (nx, ny, p) = (3, 2, 4);
        let n_vert = (nx + 1) * (ny + 1);
        let n_edges = nx * (ny + 1) + ny * (nx + 1) + nx * ny;
        let n_tri = 2 * nx * ny;
        let n_int = (p - 1) * (p - 2) / 2;
        assert_eq!(m.n_nodes(), n_vert + n_edges * (p - 1) + n_tri * n_int);
    }

    #[test]
    fn refined_spec_is_nested() {
        let spec = StructuredSpec::square(1.0, 2, ElemShape::Quad, 2);
        let fine = spec.refined(1);
        assert_eq!(fine.divisions[0], 4);
        let m0 = spec.mesh().unwrap();
        let m1 = fine.mesh().unwrap();
        // every coarse node appears in the fine mesh
        for c in &m0.coords {
            assert!(m1
                .coords
                .iter()
                .any(|f| (f[0] - c[0]).abs() < 1e-14 && (f[1] - c[1]).abs() < 1e-14));
        }
    }
}
