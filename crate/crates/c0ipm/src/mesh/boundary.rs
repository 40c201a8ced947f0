//! Boundary specification: Dirichlet/Neumann splits for the two mechanical
//! condition families and the electric one, corner/edge loads, electrode
//! groups and periodic identification.

use super::connectivity::{Connectivity, EdgeClass, EdgeKey, Face};
use super::Mesh;
use crate::error::{Error, Result};
use crate::refelem::{NodeClass, ReferenceElement, RotationCode};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn([f64; 3]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 3]) -> [f64; 3] + Send + Sync>;
/// Predicate on a face centroid (or edge midpoint for edge loads).
pub type FaceSelector = Arc<dyn Fn([f64; 3]) -> bool + Send + Sync>;

pub fn zero_vector() -> VectorFn {
    Arc::new(|_| [0.0; 3])
}

pub fn zero_scalar() -> ScalarFn {
    Arc::new(|_| 0.0)
}

/// First mechanical condition on a boundary region.
pub enum Mech1Bc {
    /// u = g1 (strong).
    Displacement(VectorFn),
    /// t(u, phi) = t_n.
    Traction(VectorFn),
}

/// Second mechanical condition.
pub enum Mech2Bc {
    /// du/dn = g2 (imposed weakly, Nitsche style).
    NormalDerivative(VectorFn),
    /// r(u, phi) = r_n.
    DoubleTraction(VectorFn),
}

/// Electric condition.
pub enum ElecBc {
    /// phi = g3 (strong).
    Potential(ScalarFn),
    /// w(u, phi) = w_n.
    SurfaceCharge(ScalarFn),
}

/// A named boundary region with its conditions; families left `None` default
/// to homogeneous Neumann.
pub struct BoundaryRegion {
    pub name: String,
    pub selector: FaceSelector,
    pub mech1: Option<Mech1Bc>,
    pub mech2: Option<Mech2Bc>,
    pub elec: Option<ElecBc>,
}

/// Point force at a mesh vertex (2D corner loads).
#[derive(Clone)]
pub struct CornerLoad {
    pub location: [f64; 3],
    pub force: [f64; 3],
}

/// Line force along mesh edges selected by their midpoint (3D).
pub struct EdgeChainLoad {
    pub selector: FaceSelector,
    pub force: VectorFn,
}

/// Periodic identification along a coordinate axis of a box-shaped domain.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicSpec {
    pub axis: usize,
}

/// Full boundary/source specification of a problem.
#[derive(Default)]
pub struct BoundarySpec {
    pub regions: Vec<BoundaryRegion>,
    pub corner_loads: Vec<CornerLoad>,
    pub edge_loads: Vec<EdgeChainLoad>,
    pub electrodes: Vec<FaceSelector>,
    pub periodic: Vec<PeriodicSpec>,
    /// When true, a boundary face matched by no region is an error instead
    /// of defaulting to homogeneous Neumann conditions.
    pub strict: bool,
}

impl BoundarySpec {
    /// Single region covering the whole boundary.
    pub fn everywhere(mech1: Option<Mech1Bc>, mech2: Option<Mech2Bc>, elec: Option<ElecBc>) -> Self {
        BoundarySpec {
            regions: vec![BoundaryRegion {
                name: "all".into(),
                selector: Arc::new(|_| true),
                mech1,
                mech2,
                elec,
            }],
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mech1Tag {
    Dirichlet(usize),
    /// Neumann with optional data region (None = homogeneous).
    Neumann(Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mech2Tag {
    Dirichlet(usize),
    Neumann(Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElecTag {
    Dirichlet(usize),
    Neumann(Option<usize>),
}

#[derive(Debug, Clone, Copy)]
pub struct FaceTags {
    pub mech1: Mech1Tag,
    pub mech2: Mech2Tag,
    pub elec: ElecTag,
    pub electrode: Option<usize>,
}

/// Node identification produced by periodic pairing.
#[derive(Debug, Clone)]
pub struct PeriodicMap {
    /// node id -> master node id (identity when not a slave).
    pub node_master: Vec<usize>,
    pub n_pairs: usize,
}

impl PeriodicMap {
    pub fn identity(n_nodes: usize) -> Self {
        PeriodicMap {
            node_master: (0..n_nodes).collect(),
            n_pairs: 0,
        }
    }
}

/// Result of applying a boundary specification.
pub struct TaggedBoundary {
    /// Aligned with the (possibly periodic-merged) face table; `None` on
    /// interior faces.
    pub face_tags: Vec<Option<FaceTags>>,
    pub periodic: PeriodicMap,
    /// Electrode node groups (sorted global node ids).
    pub electrodes: Vec<Vec<usize>>,
    /// Resolved corner loads: (vertex node id, force).
    pub corner_loads: Vec<(usize, [f64; 3])>,
    /// Resolved edge loads: (element, local edge, force fn).
    pub edge_loads: Vec<(usize, usize, VectorFn)>,
    /// Sharp boundary edges whose adjacent boundary faces all carry first
    /// Neumann conditions (the support of external edge forces).
    pub neumann_sharp_edges: Vec<usize>,
}

fn face_centroid(mesh: &Mesh, face: &Face) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &v in &face.corners {
        for k in 0..3 {
            c[k] += mesh.coords[v][k];
        }
    }
    for k in c.iter_mut() {
        *k /= face.corners.len() as f64;
    }
    c
}

/// Applies the boundary specification: classifies every boundary face,
/// merges periodic pairs into interior faces (with node identification) and
/// resolves electrode groups and point/edge loads.
pub fn apply_boundary_spec(
    mesh: &Mesh,
    re: &ReferenceElement,
    conn: Connectivity,
    spec: &BoundarySpec,
) -> Result<(Connectivity, TaggedBoundary)> {
    let mut conn = conn;
    let mut periodic = PeriodicMap::identity(mesh.n_nodes());
    let hmax = mesh.mesh_size(re);
    let tol = 1e-10 * hmax.max(1e-300);

    for pspec in &spec.periodic {
        merge_periodic(mesh, re, &mut conn, pspec.axis, tol, &mut periodic)?;
    }

    // tag remaining boundary faces
    let mut face_tags: Vec<Option<FaceTags>> = vec![None; conn.faces.len()];
    for fi in 0..conn.faces.len() {
        if conn.faces[fi].is_interior() {
            continue;
        }
        let c = face_centroid(mesh, &conn.faces[fi]);
        let mut m1: Option<Mech1Tag> = None;
        let mut m2: Option<Mech2Tag> = None;
        let mut el: Option<ElecTag> = None;
        for (ri, region) in spec.regions.iter().enumerate() {
            if !(region.selector)(c) {
                continue;
            }
            if let Some(bc) = &region.mech1 {
                let tag = match bc {
                    Mech1Bc::Displacement(_) => Mech1Tag::Dirichlet(ri),
                    Mech1Bc::Traction(_) => Mech1Tag::Neumann(Some(ri)),
                };
                if m1.is_some() {
                    return Err(Error::Specification(format!(
                        "boundary face at ({:.3}, {:.3}, {:.3}) matched by two regions for the first mechanical condition",
                        c[0], c[1], c[2]
                    )));
                }
                m1 = Some(tag);
            }
            if let Some(bc) = &region.mech2 {
                let tag = match bc {
                    Mech2Bc::NormalDerivative(_) => Mech2Tag::Dirichlet(ri),
                    Mech2Bc::DoubleTraction(_) => Mech2Tag::Neumann(Some(ri)),
                };
                if m2.is_some() {
                    return Err(Error::Specification(
                        "boundary face matched by two regions for the second mechanical condition".into(),
                    ));
                }
                m2 = Some(tag);
            }
            if let Some(bc) = &region.elec {
                let tag = match bc {
                    ElecBc::Potential(_) => ElecTag::Dirichlet(ri),
                    ElecBc::SurfaceCharge(_) => ElecTag::Neumann(Some(ri)),
                };
                if el.is_some() {
                    return Err(Error::Specification(
                        "boundary face matched by two regions for the electric condition".into(),
                    ));
                }
                el = Some(tag);
            }
        }
        if spec.strict && (m1.is_none() || m2.is_none() || el.is_none()) {
            return Err(Error::Specification(format!(
                "unclassified boundary face at ({:.4}, {:.4}, {:.4})",
                c[0], c[1], c[2]
            )));
        }
        let mut tags = FaceTags {
            mech1: m1.unwrap_or(Mech1Tag::Neumann(None)),
            mech2: m2.unwrap_or(Mech2Tag::Neumann(None)),
            elec: el.unwrap_or(ElecTag::Neumann(None)),
            electrode: None,
        };
        for (gi, sel) in spec.electrodes.iter().enumerate() {
            if sel(c) {
                if tags.electrode.is_some() {
                    return Err(Error::Specification(
                        "boundary face under two electrode groups".into(),
                    ));
                }
                tags.electrode = Some(gi);
            }
        }
        face_tags[fi] = Some(tags);
    }

    // electrode node groups
    let mut electrodes: Vec<Vec<usize>> = vec![Vec::new(); spec.electrodes.len()];
    for (fi, face) in conn.faces.iter().enumerate() {
        if let Some(tags) = &face_tags[fi] {
            if let Some(gi) = tags.electrode {
                let en = mesh.elem_nodes(face.left);
                for &ln in &re.faces[face.left_local].nodes {
                    electrodes[gi].push(en[ln]);
                }
            }
        }
    }
    for (gi, group) in electrodes.iter_mut().enumerate() {
        group.sort_unstable();
        group.dedup();
        if group.is_empty() {
            return Err(Error::Specification(format!(
                "electrode group {gi} selects no boundary faces"
            )));
        }
    }

    // corner loads: must land on a mesh vertex
    let mut corner_loads = Vec::new();
    for load in &spec.corner_loads {
        let mut found = None;
        for edge in &conn.edges {
            if let EdgeKey::Vertex(v) = edge.key {
                let x = mesh.coords[v];
                let d2: f64 = (0..mesh.dim).map(|k| (x[k] - load.location[k]).powi(2)).sum();
                if d2.sqrt() < tol.max(1e-12) {
                    found = Some(v);
                    break;
                }
            }
        }
        match found {
            Some(v) => corner_loads.push((v, load.force)),
            None => {
                return Err(Error::Specification(format!(
                    "corner load at ({}, {}) does not coincide with a mesh vertex",
                    load.location[0], load.location[1]
                )))
            }
        }
    }

    // edge loads (3D): resolve to (elem, local edge)
    let mut edge_loads: Vec<(usize, usize, VectorFn)> = Vec::new();
    if !spec.edge_loads.is_empty() {
        let corner_node: Vec<usize> = (0..re.shape.n_corners())
            .map(|c| {
                re.node_class
                    .iter()
                    .position(|k| *k == NodeClass::Vertex(c))
                    .unwrap()
            })
            .collect();
        let edge_corners = re.shape.edge_corners();
        for load in &spec.edge_loads {
            let mut hit = false;
            for edge in &conn.edges {
                let (a, b) = match edge.key {
                    EdgeKey::Pair(a, b) => (a, b),
                    EdgeKey::Vertex(_) => continue,
                };
                if edge.class == EdgeClass::Interior {
                    continue;
                }
                let mid = [
                    0.5 * (mesh.coords[a][0] + mesh.coords[b][0]),
                    0.5 * (mesh.coords[a][1] + mesh.coords[b][1]),
                    0.5 * (mesh.coords[a][2] + mesh.coords[b][2]),
                ];
                if !(load.selector)(mid) {
                    continue;
                }
                let e = edge.elements[0];
                let en = mesh.elem_nodes(e);
                let mut local = None;
                for (le, pair) in edge_corners.iter().enumerate() {
                    let ga = en[corner_node[pair[0]]];
                    let gb = en[corner_node[pair[1]]];
                    if (ga == a && gb == b) || (ga == b && gb == a) {
                        local = Some(le);
                        break;
                    }
                }
                if let Some(le) = local {
                    edge_loads.push((e, le, load.force.clone()));
                    hit = true;
                }
            }
            if !hit {
                return Err(Error::Specification(
                    "edge load selector matches no boundary mesh edge".into(),
                ));
            }
        }
    }

    // sharp boundary edges fully surrounded by first-Neumann faces
    let mut neumann_sharp_edges = Vec::new();
    for (ei, edge) in conn.edges.iter().enumerate() {
        if edge.class != EdgeClass::BoundarySharp {
            continue;
        }
        let touches = |corners: &[usize]| match edge.key {
            EdgeKey::Vertex(v) => corners.contains(&v),
            EdgeKey::Pair(a, b) => corners.contains(&a) && corners.contains(&b),
        };
        let mut all_neumann = true;
        let mut any = false;
        for (fi, face) in conn.faces.iter().enumerate() {
            if face.is_interior() || !touches(&face.corners) {
                continue;
            }
            any = true;
            match &face_tags[fi] {
                Some(tags) => {
                    if !matches!(tags.mech1, Mech1Tag::Neumann(_)) {
                        all_neumann = false;
                    }
                }
                None => all_neumann = false,
            }
        }
        if any && all_neumann {
            neumann_sharp_edges.push(ei);
        }
    }

    Ok((
        conn,
        TaggedBoundary {
            face_tags,
            periodic,
            electrodes,
            corner_loads,
            edge_loads,
            neumann_sharp_edges,
        },
    ))
}

/// Pairs the two boundary planes orthogonal to `axis`, replaces each face
/// pair by one interior face, and maps the nodes of the high side onto the
/// low side.
fn merge_periodic(
    mesh: &Mesh,
    re: &ReferenceElement,
    conn: &mut Connectivity,
    axis: usize,
    tol: f64,
    periodic: &mut PeriodicMap,
) -> Result<()> {
    if axis >= mesh.dim {
        return Err(Error::Specification(format!(
            "periodic axis {axis} out of range"
        )));
    }
    let (lo, hi) = mesh.bbox();
    let shift = hi[axis] - lo[axis];

    let mut low_faces = Vec::new();
    let mut high_faces = Vec::new();
    for (fi, face) in conn.faces.iter().enumerate() {
        if face.is_interior() {
            continue;
        }
        let c = face_centroid(mesh, face);
        if (c[axis] - lo[axis]).abs() < tol {
            low_faces.push(fi);
        } else if (c[axis] - hi[axis]).abs() < tol {
            high_faces.push(fi);
        }
    }
    if low_faces.len() != high_faces.len() || low_faces.is_empty() {
        return Err(Error::Geometry(format!(
            "periodic axis {axis}: {} low faces vs {} high faces",
            low_faces.len(),
            high_faces.len()
        )));
    }

    let matches = |a: &[f64; 3], b: &[f64; 3]| -> bool {
        let mut d2 = 0.0;
        for k in 0..mesh.dim {
            let target = if k == axis { a[k] + shift } else { a[k] };
            d2 += (target - b[k]).powi(2);
        }
        d2.sqrt() < tol
    };

    let mut merged: Vec<(usize, usize, RotationCode)> = Vec::new();
    for &lf in &low_faces {
        let lcorn = conn.faces[lf].corners.clone();
        let mut partner = None;
        'outer: for &hf in &high_faces {
            let hcorn = &conn.faces[hf].corners;
            // geometric correspondence: each low corner + shift must equal a
            // high corner
            let mut relabel = vec![usize::MAX; hcorn.len()];
            for (j, &hv) in hcorn.iter().enumerate() {
                let mut found = false;
                for &lv in &lcorn {
                    if matches(&mesh.coords[lv], &mesh.coords[hv]) {
                        relabel[j] = lv;
                        found = true;
                        break;
                    }
                }
                if !found {
                    continue 'outer;
                }
            }
            partner = Some((hf, relabel));
            break;
        }
        let (hf, relabel) = partner.ok_or_else(|| {
            Error::Geometry(format!(
                "periodic axis {axis}: no matching face for a low-side face"
            ))
        })?;
        let rotation = RotationCode::from_corners(&lcorn, &relabel)?;
        merged.push((lf, hf, rotation));

        // node identification on the full high-order face node sets
        let low_face = &conn.faces[lf];
        let high_face = &conn.faces[hf];
        let len_low = mesh.elem_nodes(low_face.left);
        let len_high = mesh.elem_nodes(high_face.left);
        let low_nodes: Vec<usize> = re.faces[low_face.left_local]
            .nodes
            .iter()
            .map(|&ln| len_low[ln])
            .collect();
        for &lnh in &re.faces[high_face.left_local].nodes {
            let hv = len_high[lnh];
            let mut found = false;
            for &lv in &low_nodes {
                if matches(&mesh.coords[lv], &mesh.coords[hv]) {
                    periodic.node_master[hv] = lv;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::Geometry(format!(
                    "periodic axis {axis}: high-side node {hv} has no low-side image"
                )));
            }
        }
    }

    // rebuild the face list: drop the paired boundary faces, add interior ones
    let mut drop: Vec<bool> = vec![false; conn.faces.len()];
    for &(lf, hf, _) in &merged {
        drop[lf] = true;
        drop[hf] = true;
    }
    let mut new_faces = Vec::with_capacity(conn.faces.len() - merged.len());
    for (fi, face) in conn.faces.iter().enumerate() {
        if !drop[fi] {
            new_faces.push(face.clone());
        }
    }
    for &(lf, hf, rotation) in &merged {
        let low = &conn.faces[lf];
        let high = &conn.faces[hf];
        new_faces.push(Face {
            left: low.left,
            left_local: low.left_local,
            right: Some(high.left),
            right_local: high.left_local,
            rotation,
            corners: low.corners.clone(),
        });
    }
    conn.faces = new_faces;
    periodic.n_pairs += merged.len();
    Ok(())
}
