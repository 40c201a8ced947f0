//! High-order nodal reference elements: node sets, quadrature, tabulated
//! basis values/gradients/Hessians at volume and face integration points,
//! face flipping permutations and isoparametric geometry factors.

mod nodes;
mod poly;
mod quadrature;

pub use nodes::NodeClass;
pub use quadrature::{gauss_legendre, tensor_rule, triangle_rule};

/// Gauss-Lobatto fractions on [0, 1] used by the nodal lattices (p+1 values).
pub fn gauss_lobatto_fractions(p: usize) -> Result<Vec<f64>> {
    nodes::lobatto_unit(p)
}

use crate::error::{Error, Result};
use faer::prelude::Solve;
use faer::Mat;
use poly::ModalBasis;

/// Supported element shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemShape {
    Triangle,
    Quad,
    Hex,
}

/// Shape of an element face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceShape {
    Segment,
    Quadrilateral,
}

impl ElemShape {
    pub fn dim(&self) -> usize {
        match self {
            ElemShape::Triangle | ElemShape::Quad => 2,
            ElemShape::Hex => 3,
        }
    }

    pub fn n_corners(&self) -> usize {
        match self {
            ElemShape::Triangle => 3,
            ElemShape::Quad => 4,
            ElemShape::Hex => 8,
        }
    }

    pub fn n_faces(&self) -> usize {
        match self {
            ElemShape::Triangle => 3,
            ElemShape::Quad => 4,
            ElemShape::Hex => 6,
        }
    }

    pub fn face_shape(&self) -> FaceShape {
        match self {
            ElemShape::Hex => FaceShape::Quadrilateral,
            _ => FaceShape::Segment,
        }
    }

    pub fn n_nodes(&self, p: usize) -> usize {
        match self {
            ElemShape::Triangle => (p + 1) * (p + 2) / 2,
            ElemShape::Quad => (p + 1) * (p + 1),
            ElemShape::Hex => (p + 1) * (p + 1) * (p + 1),
        }
    }

    pub fn corner_coords(&self) -> Vec<[f64; 3]> {
        match self {
            ElemShape::Triangle => vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            ElemShape::Quad => vec![
                [-1.0, -1.0, 0.0],
                [1.0, -1.0, 0.0],
                [1.0, 1.0, 0.0],
                [-1.0, 1.0, 0.0],
            ],
            ElemShape::Hex => vec![
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [1.0, 1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
                [1.0, -1.0, 1.0],
                [1.0, 1.0, 1.0],
                [-1.0, 1.0, 1.0],
            ],
        }
    }

    /// Corner numbers of each local face, ordered so the face tangents give
    /// the outward normal.
    pub fn face_corners(&self) -> Vec<Vec<usize>> {
        match self {
            ElemShape::Triangle => vec![vec![0, 1], vec![1, 2], vec![2, 0]],
            ElemShape::Quad => vec![vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 0]],
            ElemShape::Hex => vec![
                vec![0, 3, 2, 1],
                vec![4, 5, 6, 7],
                vec![0, 1, 5, 4],
                vec![2, 3, 7, 6],
                vec![0, 4, 7, 3],
                vec![1, 2, 6, 5],
            ],
        }
    }

    /// Corner pairs of element edges (3D only; in 2D the "edges" of the
    /// analysis are the mesh vertices).
    pub fn edge_corners(&self) -> Vec<[usize; 2]> {
        match self {
            ElemShape::Hex => vec![
                [0, 1],
                [1, 2],
                [2, 3],
                [3, 0],
                [4, 5],
                [5, 6],
                [6, 7],
                [7, 4],
                [0, 4],
                [1, 5],
                [2, 6],
                [3, 7],
            ],
            _ => Vec::new(),
        }
    }
}

/// Orientation of the right element's face relative to the left one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationCode {
    Segment { reversed: bool },
    Quad { swap: bool, neg_a: bool, neg_b: bool },
}

impl RotationCode {
    pub fn identity(face_shape: FaceShape) -> Self {
        match face_shape {
            FaceShape::Segment => RotationCode::Segment { reversed: false },
            FaceShape::Quadrilateral => RotationCode::Quad {
                swap: false,
                neg_a: false,
                neg_b: false,
            },
        }
    }

    /// Standard interior-face code in 2D: the right element traverses the
    /// shared side backwards.
    pub fn segment_reversed() -> Self {
        RotationCode::Segment { reversed: true }
    }

    /// Derives the code from corner vertex ids of the face as listed by the
    /// left and right elements.
    pub fn from_corners(left: &[usize], right: &[usize]) -> Result<Self> {
        match (left.len(), right.len()) {
            (2, 2) => {
                if right[0] == left[1] && right[1] == left[0] {
                    Ok(RotationCode::Segment { reversed: true })
                } else if right == left {
                    Ok(RotationCode::Segment { reversed: false })
                } else {
                    Err(Error::Connectivity(
                        "segment faces do not share corner vertices".into(),
                    ))
                }
            }
            (4, 4) => {
                let pos = [
                    [-1.0, -1.0],
                    [1.0, -1.0],
                    [1.0, 1.0],
                    [-1.0, 1.0],
                ];
                for &swap in &[false, true] {
                    for &neg_a in &[false, true] {
                        for &neg_b in &[false, true] {
                            let code = RotationCode::Quad { swap, neg_a, neg_b };
                            let ok = (0..4).all(|m| {
                                let (ap, bp) = (pos[m][0], pos[m][1]);
                                let (a, b) = apply_quad_map(swap, neg_a, neg_b, ap, bp);
                                match left.iter().position(|&v| v == right[m]) {
                                    Some(lm) => {
                                        (pos[lm][0] - a).abs() < 1e-12 && (pos[lm][1] - b).abs() < 1e-12
                                    }
                                    None => false,
                                }
                            });
                            if ok {
                                return Ok(code);
                            }
                        }
                    }
                }
                Err(Error::Connectivity(
                    "quad faces do not share corner vertices under any rotation".into(),
                ))
            }
            _ => Err(Error::Connectivity("invalid face corner count".into())),
        }
    }
}

fn apply_quad_map(swap: bool, neg_a: bool, neg_b: bool, ap: f64, bp: f64) -> (f64, f64) {
    let (mut a, mut b) = if swap { (bp, ap) } else { (ap, bp) };
    if neg_a {
        a = -a;
    }
    if neg_b {
        b = -b;
    }
    (a, b)
}

/// Permutation mapping the right element's face quadrature index k to the
/// left element's index of the geometrically identical point.
pub fn flip_permutation(face_shape: FaceShape, n_qp: usize, code: RotationCode) -> Result<Vec<usize>> {
    match (face_shape, code) {
        (FaceShape::Segment, RotationCode::Segment { reversed }) => Ok(if reversed {
            (0..n_qp).rev().collect()
        } else {
            (0..n_qp).collect()
        }),
        (FaceShape::Quadrilateral, RotationCode::Quad { swap, neg_a, neg_b }) => {
            let n = (n_qp as f64).sqrt().round() as usize;
            if n * n != n_qp {
                return Err(Error::Connectivity(format!(
                    "quad face quadrature count {n_qp} is not a square"
                )));
            }
            let flip = |idx: usize, neg: bool| if neg { n - 1 - idx } else { idx };
            let mut perm = vec![0usize; n_qp];
            for j in 0..n {
                for i in 0..n {
                    // right-point (i, j) in right params maps to left params
                    let (ia, jb) = if swap { (j, i) } else { (i, j) };
                    let li = flip(ia, neg_a);
                    let lj = flip(jb, neg_b);
                    perm[j * n + i] = lj * n + li;
                }
            }
            Ok(perm)
        }
        _ => Err(Error::Connectivity(
            "rotation code does not match face shape".into(),
        )),
    }
}

/// Basis values and derivatives tabulated at a set of points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub n_pts: usize,
    pub n_nodes: usize,
    pub order: usize,
    values: Vec<f64>,
    grads: Vec<f64>,
    hess: Vec<f64>,
}

impl BasisTable {
    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.n_nodes + a]
    }
    #[inline]
    pub fn grad(&self, q: usize, a: usize, d: usize) -> f64 {
        self.grads[(q * self.n_nodes + a) * 3 + d]
    }
    #[inline]
    pub fn hess(&self, q: usize, a: usize, d1: usize, d2: usize) -> f64 {
        self.hess[(q * self.n_nodes + a) * 9 + d1 * 3 + d2]
    }
}

/// One local face: corner/node lists, quadrature and element-basis traces.
#[derive(Debug, Clone)]
pub struct FaceData {
    /// Local node ids of the face corners, in face traversal order.
    pub corners: Vec<usize>,
    /// All local node ids on the face, ordered along the face grid.
    pub nodes: Vec<usize>,
    /// Quadrature points in the face parameter frame.
    pub param_points: Vec<[f64; 2]>,
    /// Face parameter weights.
    pub weights: Vec<f64>,
    /// Quadrature points in the element reference frame.
    pub points: Vec<[f64; 3]>,
    /// Constant reference tangents dx_ref/dparam.
    pub tangents: [[f64; 3]; 2],
    /// Outward unit normal in the reference frame.
    pub ref_normal: [f64; 3],
    /// Element basis traces at the face quadrature points.
    pub tab: BasisTable,
}

/// Geometry factors of a physical element at volume or face quadrature
/// points: Jacobians, measure-scaled weights, physical basis gradients and
/// Hessians, and outward unit normals on faces.
#[derive(Debug, Clone)]
pub struct GeometryFactors {
    pub dim: usize,
    pub n_pts: usize,
    pub n_nodes: usize,
    pub points: Vec<[f64; 3]>,
    /// Quadrature weights scaled by |det J| (volume) or the surface measure
    /// (faces); summing them integrates 1 over the physical domain.
    pub weights: Vec<f64>,
    pub det_j: Vec<f64>,
    pub jac: Vec<[[f64; 3]; 3]>,
    pub inv_jac: Vec<[[f64; 3]; 3]>,
    /// Basis values (copied from the reference tabulation).
    values: Vec<f64>,
    /// Physical gradients [q][a][k].
    grads: Vec<f64>,
    /// Physical Hessians [q][a][k1][k2].
    hess: Vec<f64>,
    /// Outward unit normals (faces only, empty for volume).
    pub normals: Vec<[f64; 3]>,
}

impl GeometryFactors {
    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.n_nodes + a]
    }
    #[inline]
    pub fn grad(&self, q: usize, a: usize, k: usize) -> f64 {
        self.grads[(q * self.n_nodes + a) * 3 + k]
    }
    #[inline]
    pub fn hess(&self, q: usize, a: usize, k1: usize, k2: usize) -> f64 {
        self.hess[(q * self.n_nodes + a) * 9 + k1 * 3 + k2]
    }
}

/// Target of a geometry computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeomTarget {
    Volume,
    Face(usize),
}

/// High-order nodal reference element with all tabulations needed by the
/// assembly loops.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub shape: ElemShape,
    pub degree: usize,
    pub nodes: Vec<[f64; 3]>,
    pub node_class: Vec<NodeClass>,
    pub volume_points: Vec<[f64; 3]>,
    pub volume_weights: Vec<f64>,
    pub volume_tab: BasisTable,
    pub faces: Vec<FaceData>,
    modal: ModalBasis,
    /// Inverse generalized Vandermonde: N_a(x) = sum_m vinv[m][a] psi_m(x).
    vinv: Mat<f64>,
}

pub fn build_reference_element(shape: ElemShape, degree: usize) -> Result<ReferenceElement> {
    ReferenceElement::new(shape, degree)
}

impl ReferenceElement {
    pub fn new(shape: ElemShape, degree: usize) -> Result<Self> {
        if degree == 0 || degree > 4 {
            return Err(Error::Capability(format!(
                "degree {degree} outside the supported range 1..=4"
            )));
        }
        let dim = shape.dim();
        let (ref_nodes, node_class) = match shape {
            ElemShape::Triangle => nodes::triangle_nodes(degree)?,
            ElemShape::Quad => nodes::tensor_nodes(2, degree)?,
            ElemShape::Hex => nodes::tensor_nodes(3, degree)?,
        };
        let modal = match shape {
            ElemShape::Triangle => ModalBasis::simplex(2, degree),
            ElemShape::Quad => ModalBasis::tensor(2, degree),
            ElemShape::Hex => ModalBasis::tensor(3, degree),
        };
        let n = ref_nodes.len();
        debug_assert_eq!(modal.len(), n);

        // Generalized Vandermonde and its polished inverse.
        let mut v = Mat::<f64>::zeros(n, n);
        for (a, x) in ref_nodes.iter().enumerate() {
            for (m, (val, _, _)) in modal.eval(x).into_iter().enumerate() {
                v[(a, m)] = val;
            }
        }
        let lu = v.partial_piv_lu();
        let mut vinv = lu.solve(Mat::<f64>::identity(n, n));
        // one Newton polish step: X <- X (2I - V X)
        let r = Mat::<f64>::identity(n, n) - &v * &vinv;
        let corr = &vinv * &r;
        vinv += corr;

        let (volume_points, volume_weights) = match shape {
            ElemShape::Triangle => triangle_rule(2 * degree)?,
            ElemShape::Quad => tensor_rule(2, degree + 1)?,
            ElemShape::Hex => tensor_rule(3, degree + 1)?,
        };

        let mut re = ReferenceElement {
            shape,
            degree,
            nodes: ref_nodes,
            node_class,
            volume_points: volume_points.clone(),
            volume_weights,
            volume_tab: BasisTable {
                n_pts: 0,
                n_nodes: 0,
                order: 2,
                values: vec![],
                grads: vec![],
                hess: vec![],
            },
            faces: Vec::new(),
            modal,
            vinv,
        };
        re.volume_tab = re.tabulate(&volume_points, 2)?;
        re.build_faces(dim)?;
        Ok(re)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn build_faces(&mut self, dim: usize) -> Result<()> {
        let corners = self.shape.corner_coords();
        let face_corner_ids = self.shape.face_corners();
        let p = self.degree;
        let n_qp_1d = p + 2;
        let (seg_pts, seg_wts) = gauss_legendre(n_qp_1d)?;

        // map corner number -> local node id
        let corner_node: Vec<usize> = (0..self.shape.n_corners())
            .map(|c| {
                self.node_class
                    .iter()
                    .position(|k| *k == NodeClass::Vertex(c))
                    .expect("corner node present")
            })
            .collect();

        let mut faces = Vec::new();
        for fc in &face_corner_ids {
            let corner_nodes: Vec<usize> = fc.iter().map(|&c| corner_node[c]).collect();
            let c0 = corners[fc[0]];
            if dim == 2 {
                let c1 = corners[fc[1]];
                let tangent = [(c1[0] - c0[0]) / 2.0, (c1[1] - c0[1]) / 2.0, 0.0];
                let mut normal = [tangent[1], -tangent[0], 0.0];
                let nn = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
                normal = [normal[0] / nn, normal[1] / nn, 0.0];

                let param_points: Vec<[f64; 2]> = seg_pts.iter().map(|&s| [s, 0.0]).collect();
                let points: Vec<[f64; 3]> = seg_pts
                    .iter()
                    .map(|&s| {
                        let t = 0.5 * (s + 1.0);
                        [
                            c0[0] + t * (c1[0] - c0[0]),
                            c0[1] + t * (c1[1] - c0[1]),
                            0.0,
                        ]
                    })
                    .collect();
                let tab = self.tabulate(&points, 2)?;

                // face node list: corner, edge slots ascending, corner
                let mut node_list = vec![corner_nodes[0]];
                let local_edge = faces.len();
                for slot in 1..p {
                    let id = self
                        .node_class
                        .iter()
                        .position(|k| *k == NodeClass::Edge(local_edge, slot))
                        .expect("edge node present");
                    node_list.push(id);
                }
                node_list.push(corner_nodes[1]);

                faces.push(FaceData {
                    corners: corner_nodes,
                    nodes: node_list,
                    param_points,
                    weights: seg_wts.clone(),
                    points,
                    tangents: [tangent, [0.0; 3]],
                    ref_normal: normal,
                    tab,
                });
            } else {
                let c1 = corners[fc[1]];
                let c3 = corners[fc[3]];
                let ta = [
                    (c1[0] - c0[0]) / 2.0,
                    (c1[1] - c0[1]) / 2.0,
                    (c1[2] - c0[2]) / 2.0,
                ];
                let tb = [
                    (c3[0] - c0[0]) / 2.0,
                    (c3[1] - c0[1]) / 2.0,
                    (c3[2] - c0[2]) / 2.0,
                ];
                let cr = cross(&ta, &tb);
                let nn = norm(&cr);
                let normal = [cr[0] / nn, cr[1] / nn, cr[2] / nn];

                let mut param_points = Vec::with_capacity(n_qp_1d * n_qp_1d);
                let mut weights = Vec::with_capacity(n_qp_1d * n_qp_1d);
                let mut points = Vec::with_capacity(n_qp_1d * n_qp_1d);
                for j in 0..n_qp_1d {
                    for i in 0..n_qp_1d {
                        let (a, b) = (seg_pts[i], seg_pts[j]);
                        param_points.push([a, b]);
                        weights.push(seg_wts[i] * seg_wts[j]);
                        let fa = 0.5 * (a + 1.0);
                        let fb = 0.5 * (b + 1.0);
                        points.push([
                            c0[0] + fa * (c1[0] - c0[0]) + fb * (c3[0] - c0[0]),
                            c0[1] + fa * (c1[1] - c0[1]) + fb * (c3[1] - c0[1]),
                            c0[2] + fa * (c1[2] - c0[2]) + fb * (c3[2] - c0[2]),
                        ]);
                    }
                }
                let tab = self.tabulate(&points, 2)?;

                // face node list by coordinate matching on the lobatto grid
                let fr = nodes::lobatto_unit(p)?;
                let mut node_list = Vec::with_capacity((p + 1) * (p + 1));
                for jb in 0..=p {
                    for ia in 0..=p {
                        let expect = [
                            c0[0] + fr[ia] * (c1[0] - c0[0]) + fr[jb] * (c3[0] - c0[0]),
                            c0[1] + fr[ia] * (c1[1] - c0[1]) + fr[jb] * (c3[1] - c0[1]),
                            c0[2] + fr[ia] * (c1[2] - c0[2]) + fr[jb] * (c3[2] - c0[2]),
                        ];
                        let id = self
                            .nodes
                            .iter()
                            .position(|x| {
                                (x[0] - expect[0]).abs() < 1e-9
                                    && (x[1] - expect[1]).abs() < 1e-9
                                    && (x[2] - expect[2]).abs() < 1e-9
                            })
                            .expect("face grid node present");
                        node_list.push(id);
                    }
                }

                faces.push(FaceData {
                    corners: corner_nodes,
                    nodes: node_list,
                    param_points,
                    weights,
                    points,
                    tangents: [ta, tb],
                    ref_normal: normal,
                    tab,
                });
            }
        }
        self.faces = faces;
        Ok(())
    }

    fn check_inside(&self, x: &[f64; 3]) -> Result<()> {
        let tol = 1e-10;
        let ok = match self.shape {
            ElemShape::Triangle => {
                x[0] >= -tol && x[1] >= -tol && x[0] + x[1] <= 1.0 + tol
            }
            ElemShape::Quad => x[0].abs() <= 1.0 + tol && x[1].abs() <= 1.0 + tol,
            ElemShape::Hex => {
                x[0].abs() <= 1.0 + tol && x[1].abs() <= 1.0 + tol && x[2].abs() <= 1.0 + tol
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "point ({}, {}, {}) outside the reference element",
                x[0], x[1], x[2]
            )))
        }
    }

    /// Tabulates nodal basis values (and derivatives up to `order` <= 2) at
    /// the given reference points.
    pub fn tabulate(&self, points: &[[f64; 3]], order: usize) -> Result<BasisTable> {
        let n = self.n_nodes();
        let n_pts = points.len();
        let mut values = vec![0.0; n_pts * n];
        let mut grads = vec![0.0; if order >= 1 { n_pts * n * 3 } else { 0 }];
        let mut hess = vec![0.0; if order >= 2 { n_pts * n * 9 } else { 0 }];
        for (q, x) in points.iter().enumerate() {
            self.check_inside(x)?;
            let modal = self.modal.eval(x);
            for a in 0..n {
                let mut v = 0.0;
                let mut g = [0.0; 3];
                let mut h = [[0.0; 3]; 3];
                for (m, (mv, mg, mh)) in modal.iter().enumerate() {
                    let c = self.vinv[(m, a)];
                    v += c * mv;
                    if order >= 1 {
                        for d in 0..3 {
                            g[d] += c * mg[d];
                        }
                    }
                    if order >= 2 {
                        for d1 in 0..3 {
                            for d2 in 0..3 {
                                h[d1][d2] += c * mh[d1][d2];
                            }
                        }
                    }
                }
                values[q * n + a] = v;
                if order >= 1 {
                    for d in 0..3 {
                        grads[(q * n + a) * 3 + d] = g[d];
                    }
                }
                if order >= 2 {
                    for d1 in 0..3 {
                        for d2 in 0..3 {
                            hess[(q * n + a) * 9 + d1 * 3 + d2] = h[d1][d2];
                        }
                    }
                }
            }
        }
        Ok(BasisTable {
            n_pts,
            n_nodes: n,
            order,
            values,
            grads,
            hess,
        })
    }

    /// Geometry factors at the built-in volume quadrature.
    pub fn volume_geometry(&self, elem_coords: &[[f64; 3]]) -> Result<GeometryFactors> {
        self.build_geometry(elem_coords, &self.volume_tab, &self.volume_weights, None)
    }

    /// Geometry factors at the built-in quadrature of local face `f`.
    pub fn face_geometry(&self, elem_coords: &[[f64; 3]], f: usize) -> Result<GeometryFactors> {
        let face = &self.faces[f];
        self.build_geometry(elem_coords, &face.tab, &face.weights, Some(face))
    }

    /// Geometry factors at a caller-provided volume rule (used e.g. by the
    /// error integration which runs a finer rule than assembly).
    pub fn custom_volume_geometry(
        &self,
        elem_coords: &[[f64; 3]],
        points: &[[f64; 3]],
        weights: &[f64],
    ) -> Result<GeometryFactors> {
        let tab = self.tabulate(points, 2)?;
        self.build_geometry(elem_coords, &tab, weights, None)
    }

    /// Same with a pre-tabulated basis table, so callers looping over many
    /// elements tabulate the reference data once.
    pub fn volume_geometry_with_table(
        &self,
        elem_coords: &[[f64; 3]],
        tab: &BasisTable,
        weights: &[f64],
    ) -> Result<GeometryFactors> {
        self.build_geometry(elem_coords, tab, weights, None)
    }

    fn build_geometry(
        &self,
        elem_coords: &[[f64; 3]],
        tab: &BasisTable,
        ref_weights: &[f64],
        face: Option<&FaceData>,
    ) -> Result<GeometryFactors> {
        let dim = self.dim();
        let n = self.n_nodes();
        if elem_coords.len() != n {
            return Err(Error::Connectivity(format!(
                "element has {} coordinates, reference element expects {}",
                elem_coords.len(),
                n
            )));
        }
        let n_pts = tab.n_pts;
        let mut points = vec![[0.0; 3]; n_pts];
        let mut weights = vec![0.0; n_pts];
        let mut det_j = vec![0.0; n_pts];
        let mut jac = vec![[[0.0; 3]; 3]; n_pts];
        let mut inv_jac = vec![[[0.0; 3]; 3]; n_pts];
        let mut grads = vec![0.0; n_pts * n * 3];
        let mut hess = vec![0.0; n_pts * n * 9];
        let mut normals = Vec::new();

        for q in 0..n_pts {
            let mut x = [0.0; 3];
            let mut j = [[0.0; 3]; 3];
            let mut hm = [[[0.0; 3]; 3]; 3]; // map second derivative [k][c][d]
            for a in 0..n {
                let na = tab.value(q, a);
                for k in 0..dim {
                    x[k] += na * elem_coords[a][k];
                    for d in 0..dim {
                        j[k][d] += tab.grad(q, a, d) * elem_coords[a][k];
                    }
                    for c in 0..dim {
                        for d in 0..dim {
                            hm[k][c][d] += tab.hess(q, a, c, d) * elem_coords[a][k];
                        }
                    }
                }
            }
            let det = det_dim(&j, dim);
            if det <= 0.0 {
                return Err(Error::Geometry(format!(
                    "inverted element: det J = {det} at quadrature point {q}"
                )));
            }
            let jinv = inv_dim(&j, det, dim);

            // physical gradients: grad_x N = J^{-T} grad_ref N
            for a in 0..n {
                let mut gx = [0.0; 3];
                for k in 0..dim {
                    let mut s = 0.0;
                    for d in 0..dim {
                        s += jinv[d][k] * tab.grad(q, a, d);
                    }
                    gx[k] = s;
                }
                for k in 0..dim {
                    grads[(q * n + a) * 3 + k] = gx[k];
                }
                // physical Hessian: J^{-T} (H_ref - sum_k gx_k Hm_k) J^{-1}
                let mut t = [[0.0; 3]; 3];
                for c in 0..dim {
                    for d in 0..dim {
                        let mut s = tab.hess(q, a, c, d);
                        for k in 0..dim {
                            s -= gx[k] * hm[k][c][d];
                        }
                        t[c][d] = s;
                    }
                }
                for e in 0..dim {
                    for f2 in 0..dim {
                        let mut s = 0.0;
                        for c in 0..dim {
                            for d in 0..dim {
                                s += jinv[c][e] * t[c][d] * jinv[d][f2];
                            }
                        }
                        hess[(q * n + a) * 9 + e * 3 + f2] = s;
                    }
                }
            }

            points[q] = x;
            det_j[q] = det;
            jac[q] = j;
            inv_jac[q] = jinv;

            match face {
                None => {
                    weights[q] = ref_weights[q] * det;
                }
                Some(fd) => {
                    // physical tangents and surface measure
                    let mut ta = [0.0; 3];
                    let mut tb = [0.0; 3];
                    for k in 0..dim {
                        for d in 0..dim {
                            ta[k] += j[k][d] * fd.tangents[0][d];
                            tb[k] += j[k][d] * fd.tangents[1][d];
                        }
                    }
                    let (mut normal, measure) = if dim == 2 {
                        let m = (ta[0] * ta[0] + ta[1] * ta[1]).sqrt();
                        ([ta[1] / m, -ta[0] / m, 0.0], m)
                    } else {
                        let c = cross(&ta, &tb);
                        let m = norm(&c);
                        ([c[0] / m, c[1] / m, c[2] / m], m)
                    };
                    // orient outward: align with J^{-T} n_ref
                    let mut check = 0.0;
                    for k in 0..dim {
                        let mut s = 0.0;
                        for d in 0..dim {
                            s += jinv[d][k] * fd.ref_normal[d];
                        }
                        check += s * normal[k];
                    }
                    if check < 0.0 {
                        for v in normal.iter_mut() {
                            *v = -*v;
                        }
                    }
                    weights[q] = ref_weights[q] * measure;
                    normals.push(normal);
                }
            }
        }

        Ok(GeometryFactors {
            dim,
            n_pts,
            n_nodes: n,
            points,
            weights,
            det_j,
            jac,
            inv_jac,
            values: tab.values.clone(),
            grads,
            hess,
            normals,
        })
    }
}

/// Spec-level convenience wrapper over the volume/face geometry builders.
pub fn physical_geometry(
    re: &ReferenceElement,
    elem_coords: &[[f64; 3]],
    which: GeomTarget,
) -> Result<GeometryFactors> {
    match which {
        GeomTarget::Volume => re.volume_geometry(elem_coords),
        GeomTarget::Face(f) => re.face_geometry(elem_coords, f),
    }
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn det_dim(j: &[[f64; 3]; 3], dim: usize) -> f64 {
    match dim {
        2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
        3 => {
            j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
        }
        _ => unreachable!(),
    }
}

fn inv_dim(j: &[[f64; 3]; 3], det: f64, dim: usize) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    match dim {
        2 => {
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        }
        3 => {
            inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
        }
        _ => unreachable!(),
    }
    inv
}
