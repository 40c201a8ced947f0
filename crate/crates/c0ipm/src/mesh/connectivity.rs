//! Face and edge connectivity: for every mesh face, the sharing elements,
//! local face numbers and the rotation applied to the second element, plus
//! the mesh edge sets entering the edge-force bookkeeping.

use super::Mesh;
use crate::error::{Error, Result};
use crate::refelem::{NodeClass, ReferenceElement, RotationCode};
use std::collections::HashMap;

/// One mesh face. Interior faces carry both elements (left id < right id);
/// boundary faces only the left one.
#[derive(Debug, Clone)]
pub struct Face {
    pub left: usize,
    pub left_local: usize,
    pub right: Option<usize>,
    pub right_local: usize,
    pub rotation: RotationCode,
    /// Global corner vertex ids in the left element's traversal order.
    pub corners: Vec<usize>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }
}

/// Identifier of a mesh "edge" in the sense of the interior edge forces:
/// a vertex in 2D, a corner-vertex pair in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKey {
    Vertex(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    Interior,
    BoundarySmooth,
    BoundarySharp,
}

#[derive(Debug, Clone)]
pub struct MeshEdge {
    pub key: EdgeKey,
    /// Elements sharing the edge.
    pub elements: Vec<usize>,
    pub class: EdgeClass,
}

/// Face table plus edge sets of a mesh.
#[derive(Debug, Clone)]
pub struct Connectivity {
    pub faces: Vec<Face>,
    pub edges: Vec<MeshEdge>,
    /// Index into `edges` by key.
    pub edge_index: HashMap<EdgeKey, usize>,
}

impl Connectivity {
    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| f.is_interior())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(|(_, f)| !f.is_interior())
    }

    pub fn n_interior(&self) -> usize {
        self.faces.iter().filter(|f| f.is_interior()).count()
    }

    pub fn n_boundary(&self) -> usize {
        self.faces.len() - self.n_interior()
    }
}

/// Global corner vertex ids of local face `lf` of element `e`, in the face
/// traversal order of the reference element.
pub fn face_corner_ids(mesh: &Mesh, re: &ReferenceElement, e: usize, lf: usize) -> Vec<usize> {
    let en = mesh.elem_nodes(e);
    re.faces[lf].corners.iter().map(|&ln| en[ln]).collect()
}

/// Builds the face table and the edge sets.
pub fn build_connectivity(mesh: &Mesh, re: &ReferenceElement) -> Result<Connectivity> {
    let n_faces_per_elem = re.shape.n_faces();
    let mut table: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();

    for e in 0..mesh.n_elems() {
        for lf in 0..n_faces_per_elem {
            let corners = face_corner_ids(mesh, re, e, lf);
            let mut key = corners.clone();
            key.sort_unstable();
            match table.get(&key) {
                None => {
                    table.insert(key, faces.len());
                    faces.push(Face {
                        left: e,
                        left_local: lf,
                        right: None,
                        right_local: usize::MAX,
                        rotation: RotationCode::identity(re.shape.face_shape()),
                        corners,
                    });
                }
                Some(&fi) => {
                    let face = &mut faces[fi];
                    if let Some(right) = face.right {
                        return Err(Error::Connectivity(format!(
                            "face shared by more than two elements (elements {}, {}, {})",
                            face.left, right, e
                        )));
                    }
                    face.right = Some(e);
                    face.right_local = lf;
                    face.rotation = RotationCode::from_corners(&face.corners, &corners)?;
                }
            }
        }
    }

    let edges = build_edges(mesh, re, &faces)?;
    let edge_index = edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.key, i))
        .collect();
    Ok(Connectivity {
        faces,
        edges,
        edge_index,
    })
}

fn build_edges(mesh: &Mesh, re: &ReferenceElement, faces: &[Face]) -> Result<Vec<MeshEdge>> {
    let corner_locals: Vec<usize> = re
        .node_class
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, NodeClass::Vertex(_)))
        .map(|(i, _)| i)
        .collect();

    let mut map: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    if mesh.dim == 2 {
        for e in 0..mesh.n_elems() {
            let en = mesh.elem_nodes(e);
            for &ln in &corner_locals {
                map.entry(EdgeKey::Vertex(en[ln])).or_default().push(e);
            }
        }
    } else {
        let edge_corners = re.shape.edge_corners();
        // corner number -> local node id
        let corner_node: Vec<usize> = (0..re.shape.n_corners())
            .map(|c| {
                re.node_class
                    .iter()
                    .position(|k| *k == NodeClass::Vertex(c))
                    .unwrap()
            })
            .collect();
        for e in 0..mesh.n_elems() {
            let en = mesh.elem_nodes(e);
            for pair in &edge_corners {
                let a = en[corner_node[pair[0]]];
                let b = en[corner_node[pair[1]]];
                let key = EdgeKey::Pair(a.min(b), a.max(b));
                let entry = map.entry(key).or_default();
                if !entry.contains(&e) {
                    entry.push(e);
                }
            }
        }
    }

    // boundary-face normals at face centers, per boundary face, for the
    // smooth/sharp split
    let mut bface_info: Vec<(usize, Vec<usize>, [f64; 3])> = Vec::new();
    for f in faces.iter().filter(|f| !f.is_interior()) {
        let coords = mesh.elem_coords(f.left);
        let geom = re.face_geometry(&coords, f.left_local)?;
        let mut n = [0.0; 3];
        for q in 0..geom.n_pts {
            for k in 0..3 {
                n[k] += geom.normals[q][k];
            }
        }
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        for v in n.iter_mut() {
            *v /= len;
        }
        bface_info.push((f.left, f.corners.clone(), n));
    }

    let touches = |key: &EdgeKey, corners: &[usize]| -> bool {
        match key {
            EdgeKey::Vertex(v) => corners.contains(v),
            EdgeKey::Pair(a, b) => corners.contains(a) && corners.contains(b),
        }
    };

    let mut out = Vec::with_capacity(map.len());
    let mut keys: Vec<EdgeKey> = map.keys().copied().collect();
    keys.sort_by_key(|k| match k {
        EdgeKey::Vertex(v) => (*v, 0),
        EdgeKey::Pair(a, b) => (*a, *b + 1),
    });
    for key in keys {
        let elements = map.remove(&key).unwrap();
        let normals: Vec<[f64; 3]> = bface_info
            .iter()
            .filter(|(_, corners, _)| touches(&key, corners))
            .map(|(_, _, n)| *n)
            .collect();
        let class = if normals.is_empty() {
            EdgeClass::Interior
        } else {
            let mut sharp = false;
            for i in 0..normals.len() {
                for j in (i + 1)..normals.len() {
                    let dot: f64 = (0..3).map(|k| normals[i][k] * normals[j][k]).sum();
                    if dot < 1.0 - 1e-8 {
                        sharp = true;
                    }
                }
            }
            if sharp {
                EdgeClass::BoundarySharp
            } else {
                EdgeClass::BoundarySmooth
            }
        };
        out.push(MeshEdge {
            key,
            elements,
            class,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_mesh;
    use crate::refelem::ElemShape;

    #[test]
    fn quad_mesh_face_counts() {
        let m = structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 1).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 1).unwrap();
        let conn = build_connectivity(&m, &re).unwrap();
        assert_eq!(conn.n_interior(), 4);
        assert_eq!(conn.n_boundary(), 8);
        // completeness: sum of faces per element = 2 interior + boundary
        assert_eq!(4 * m.n_elems(), 2 * conn.n_interior() + conn.n_boundary());
        for (_, f) in conn.interior_faces() {
            assert!(f.left < f.right.unwrap());
        }
    }

    #[test]
    fn hex_mesh_face_counts() {
        let m = structured_mesh(&[0.0; 3], &[1.0; 3], &[2, 2, 2], ElemShape::Hex, 1).unwrap();
        let re = ReferenceElement::new(ElemShape::Hex, 1).unwrap();
        let conn = build_connectivity(&m, &re).unwrap();
        // counting oracle: 3 directions * 2*2 faces * 1 interior plane = 12
        assert_eq!(conn.n_interior(), 12);
        assert_eq!(conn.n_boundary(), 24);
        assert_eq!(6 * m.n_elems(), 2 * conn.n_interior() + conn.n_boundary());
    }

    #[test]
    fn interior_vertex_sharing_counts() {
        let mq = structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[4, 4, 0], ElemShape::Quad, 2).unwrap();
        let req = ReferenceElement::new(ElemShape::Quad, 2).unwrap();
        let cq = build_connectivity(&mq, &req).unwrap();
        // interior vertex of a quad grid is shared by 4 elements
        let interior: Vec<&MeshEdge> = cq
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::Interior)
            .collect();
        assert!(!interior.is_empty());
        assert!(interior.iter().all(|e| e.elements.len() == 4));

        let mt =
            structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[4, 4, 0], ElemShape::Triangle, 2).unwrap();
        let ret = ReferenceElement::new(ElemShape::Triangle, 2).unwrap();
        let ct = build_connectivity(&mt, &ret).unwrap();
        let interior_t: Vec<&MeshEdge> = ct
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::Interior)
            .collect();
        assert!(interior_t.iter().all(|e| e.elements.len() == 6));
    }

    #[test]
    fn box_corners_are_sharp() {
        let m = structured_mesh(&[0.0; 3], &[1.0, 1.0, 0.0], &[2, 2, 0], ElemShape::Quad, 1).unwrap();
        let re = ReferenceElement::new(ElemShape::Quad, 1).unwrap();
        let conn = build_connectivity(&m, &re).unwrap();
        let sharp = conn
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::BoundarySharp)
            .count();
        assert_eq!(sharp, 4);
        let smooth = conn
            .edges
            .iter()
            .filter(|e| e.class == EdgeClass::BoundarySmooth)
            .count();
        assert_eq!(smooth, 4); // mid-side boundary vertices
    }

    #[test]
    fn non_manifold_rejected() {
        // three triangles sharing one edge
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        // all share edge (0,1) -- geometrically nonsense but connectivity-level
        let conn = vec![0, 1, 2, 0, 1, 3, 0, 1, 4];
        let m = Mesh::new(2, 1, ElemShape::Triangle, coords, conn).unwrap();
        let re = ReferenceElement::new(ElemShape::Triangle, 1).unwrap();
        assert!(build_connectivity(&m, &re).is_err());
    }
}
