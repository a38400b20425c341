//! Tetrahedral simplicial complexes: subsimplex enumeration, affine reference maps,
//! uniform red refinement and variable-order maps.
//!
//! Every tetrahedron stores its vertices in ascending global order. Local face `i` is the
//! face opposite local vertex `i`; local edges follow [`LOCAL_EDGES`]. Faces and edges are
//! oriented by ascending global vertex ids, so a face `(a, b, c)` carries the normal
//! `(b − a) × (c − a)`.

mod io;
mod order;

pub use io::{read_mesh, write_mesh, MESH_HEADER};
pub use order::{validate_order_map, OrderMap, OrderReport, OrderSignature, OrderViolation};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::tensor_ops::{cross, dot3, norm3, sub3, Mat3, Vec3};

/// Local vertex triples of the four faces; face `i` omits vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
/// Local vertex pairs of the six edges.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local edge index of the pair `(a, b)` with `a < b`.
pub fn local_edge_index(a: usize, b: usize) -> usize {
    LOCAL_EDGES.iter().position(|e| *e == [a, b]).expect("valid local edge")
}

/// Local edges of local face `f`, ordered `(a,b), (a,c), (b,c)` for face vertices `a < b < c`.
pub fn local_face_edges(f: usize) -> [usize; 3] {
    let [a, b, c] = LOCAL_FACES[f];
    [local_edge_index(a, b), local_edge_index(a, c), local_edge_index(b, c)]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("tet {tet} is degenerate (volume {volume:e})")]
    DegenerateTet { tet: usize, volume: f64 },
    #[error("face {face:?} is shared by more than two tets")]
    NonManifoldFace { face: [usize; 3] },
    #[error("tet {tet} references vertex {vertex}, but only {count} vertices exist")]
    InvalidVertex { tet: usize, vertex: usize, count: usize },
    #[error("tet {tet} repeats a vertex")]
    RepeatedVertex { tet: usize },
    #[error("mesh file: {0}")]
    Parse(String),
    #[error("order map: {0}")]
    Order(String),
}

/// Tetrahedral complex with derived incidence tables.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplicialMesh {
    pub vertices: Vec<Vec3>,
    /// Vertex ids of each tet, ascending.
    pub tets: Vec<[usize; 4]>,
    /// Edge vertex pairs, ascending, in lexicographic order.
    pub edges: Vec<[usize; 2]>,
    /// Face vertex triples, ascending, in lexicographic order.
    pub faces: Vec<[usize; 3]>,
    pub tet_faces: Vec<[usize; 4]>,
    pub tet_edges: Vec<[usize; 6]>,
    pub face_edges: Vec<[usize; 3]>,
    /// `+1` if the face's canonical normal points out of the tet, `−1` otherwise.
    pub tet_face_signs: Vec<[i8; 4]>,
    /// Incident tets of each face (one for boundary faces).
    pub face_tets: Vec<Vec<usize>>,
    pub vertex_tets: Vec<Vec<usize>>,
}

/// Affine map `x = A x̂ + b` from the reference tet onto a physical tet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub a: Mat3,
    pub b: Vec3,
    pub det: f64,
    pub a_inv: Mat3,
    /// Longest edge.
    pub h: f64,
    /// Inradius.
    pub rho: f64,
}

impl AffineMap {
    pub fn to_physical(&self, xh: Vec3) -> Vec3 {
        let v = self.a.mul_vec(xh);
        [v[0] + self.b[0], v[1] + self.b[1], v[2] + self.b[2]]
    }

    pub fn to_reference(&self, x: Vec3) -> Vec3 {
        self.a_inv.mul_vec(sub3(x, self.b))
    }

    pub fn volume(&self) -> f64 {
        self.det.abs() / 6.0
    }

    pub fn shape_ratio(&self) -> f64 {
        self.h / self.rho
    }
}

impl SimplicialMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_tets[f].len() == 1
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_faces()).filter(|&f| !self.is_boundary_face(f))
    }

    pub fn tet_vertices(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn affine_of(&self, t: usize) -> AffineMap {
        affine_from_vertices(self.tet_vertices(t))
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.affine_of(t).volume()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.volume(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let v = self.tet_vertices(t);
        std::array::from_fn(|i| 0.25 * (v[0][i] + v[1][i] + v[2][i] + v[3][i]))
    }

    /// Largest edge length over all tets.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.affine_of(t).h).fold(0.0, f64::max)
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.affine_of(t).shape_ratio()).fold(0.0, f64::max)
    }

    /// `V − E + F − T`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64 - self.num_tets() as i64
    }

    /// Local index of global face `f` within tet `t`.
    pub fn local_face_of(&self, t: usize, f: usize) -> Option<usize> {
        self.tet_faces[t].iter().position(|&g| g == f)
    }

    /// Tets sharing at least one vertex with tet `t` (including `t`), ascending.
    pub fn tet_neighbourhood(&self, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.tets[t].iter().flat_map(|&v| self.vertex_tets[v].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn affine_from_vertices(v: [Vec3; 4]) -> AffineMap {
    let a = Mat3::from_columns(sub3(v[1], v[0]), sub3(v[2], v[0]), sub3(v[3], v[0]));
    let det = a.det();
    let a_inv = a.inverse().unwrap_or(Mat3::ZERO);
    let mut h: f64 = 0.0;
    for [i, j] in LOCAL_EDGES {
        h = h.max(norm3(sub3(v[j], v[i])));
    }
    let area: f64 = LOCAL_FACES
        .iter()
        .map(|&[i, j, k]| 0.5 * norm3(cross(sub3(v[j], v[i]), sub3(v[k], v[i]))))
        .sum();
    let rho = 3.0 * (det.abs() / 6.0) / area;
    AffineMap {
        a,
        b: v[0],
        det,
        a_inv,
        h,
        rho,
    }
}

/// Builds the complex from vertex coordinates and tet vertex lists (any vertex order).
pub fn build_complex(vertices: Vec<Vec3>, tets: &[[usize; 4]]) -> Result<SimplicialMesh, MeshError> {
    let nv = vertices.len();
    let mut sorted_tets = Vec::with_capacity(tets.len());
    for (t, tet) in tets.iter().enumerate() {
        for &v in tet {
            if v >= nv {
                return Err(MeshError::InvalidVertex { tet: t, vertex: v, count: nv });
            }
        }
        let mut s = *tet;
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(MeshError::RepeatedVertex { tet: t });
        }
        let map = affine_from_vertices(s.map(|i| vertices[i]));
        let volume = map.volume();
        if !(volume > 1e-14 * map.h.powi(3)) {
            return Err(MeshError::DegenerateTet { tet: t, volume });
        }
        sorted_tets.push(s);
    }

    let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    let mut face_ids: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    for s in &sorted_tets {
        for [i, j] in LOCAL_EDGES {
            edge_ids.insert([s[i], s[j]], 0);
        }
        for [i, j, k] in LOCAL_FACES {
            face_ids.insert([s[i], s[j], s[k]], 0);
        }
    }
    let edges: Vec<[usize; 2]> = edge_ids.keys().copied().collect();
    for (id, v) in edge_ids.values_mut().enumerate() {
        *v = id;
    }
    let faces: Vec<[usize; 3]> = face_ids.keys().copied().collect();
    for (id, v) in face_ids.values_mut().enumerate() {
        *v = id;
    }

    let mut tet_faces = Vec::with_capacity(sorted_tets.len());
    let mut tet_edges = Vec::with_capacity(sorted_tets.len());
    let mut tet_face_signs = Vec::with_capacity(sorted_tets.len());
    let mut face_tets = vec![Vec::new(); faces.len()];
    let mut vertex_tets = vec![Vec::new(); nv];
    for (t, s) in sorted_tets.iter().enumerate() {
        let te: [usize; 6] = LOCAL_EDGES.map(|[i, j]| edge_ids[&[s[i], s[j]]]);
        let tf: [usize; 4] = LOCAL_FACES.map(|[i, j, k]| face_ids[&[s[i], s[j], s[k]]]);
        let mut signs = [0i8; 4];
        for (lf, &[i, j, k]) in LOCAL_FACES.iter().enumerate() {
            let (a, b, c) = (vertices[s[i]], vertices[s[j]], vertices[s[k]]);
            let nu = cross(sub3(b, a), sub3(c, a));
            let out = dot3(nu, sub3(a, vertices[s[lf]]));
            signs[lf] = if out > 0.0 { 1 } else { -1 };
            face_tets[tf[lf]].push(t);
        }
        for &v in s {
            vertex_tets[v].push(t);
        }
        tet_edges.push(te);
        tet_faces.push(tf);
        tet_face_signs.push(signs);
    }
    for (f, ts) in face_tets.iter().enumerate() {
        if ts.len() > 2 {
            return Err(MeshError::NonManifoldFace { face: faces[f] });
        }
    }
    let face_edges = faces
        .iter()
        .map(|&[a, b, c]| [edge_ids[&[a, b]], edge_ids[&[a, c]], edge_ids[&[b, c]]])
        .collect();
    Ok(SimplicialMesh {
        vertices,
        tets: sorted_tets,
        edges,
        faces,
        tet_faces,
        tet_edges,
        face_edges,
        tet_face_signs,
        face_tets,
        vertex_tets,
    })
}

/// The reference tetrahedron as a one-element mesh.
pub fn reference_tet_mesh() -> SimplicialMesh {
    build_complex(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        &[[0, 1, 2, 3]],
    )
    .expect("reference tet is valid")
}

/// Unit cube with `n³` subcubes, each split into the six Kuhn tetrahedra.
pub fn unit_cube_mesh(n: usize) -> SimplicialMesh {
    assert!(n >= 1, "unit_cube_mesh needs n >= 1");
    let m = n + 1;
    let id = |i: usize, j: usize, k: usize| i + m * (j + m * k);
    let mut vertices = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]), 0, 0, 0];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    build_complex(vertices, &tets).expect("Kuhn tets are valid")
}

/// Red refinement: every tet splits into 4 corner tets and 4 tets around the shortest
/// interior diagonal. New vertex `V + e` is the midpoint of edge `e`.
pub fn refine_uniform(m: &SimplicialMesh) -> SimplicialMesh {
    refine_uniform_with_parents(m).0
}

/// [`refine_uniform`] plus the parent tet of every child.
pub fn refine_uniform_with_parents(m: &SimplicialMesh) -> (SimplicialMesh, Vec<usize>) {
    let nv = m.num_vertices();
    let mut vertices = m.vertices.clone();
    for &[a, b] in &m.edges {
        let (pa, pb) = (m.vertices[a], m.vertices[b]);
        vertices.push(std::array::from_fn(|i| 0.5 * (pa[i] + pb[i])));
    }
    let mut tets = Vec::with_capacity(8 * m.num_tets());
    let mut parents = Vec::with_capacity(8 * m.num_tets());
    for t in 0..m.num_tets() {
        let v = m.tets[t];
        let mid = |a: usize, b: usize| nv + m.tet_edges[t][local_edge_index(a, b)];
        let (m01, m02, m03, m12, m13, m23) = (mid(0, 1), mid(0, 2), mid(0, 3), mid(1, 2), mid(1, 3), mid(2, 3));
        tets.push([v[0], m01, m02, m03]);
        tets.push([m01, v[1], m12, m13]);
        tets.push([m02, m12, v[2], m23]);
        tets.push([m03, m13, m23, v[3]]);
        // Diagonal candidates with their equator cycles.
        let options = [
            ((m01, m23), [m02, m03, m13, m12]),
            ((m02, m13), [m01, m03, m23, m12]),
            ((m03, m12), [m01, m02, m23, m13]),
        ];
        let len = |(a, b): (usize, usize)| norm3(sub3(vertices[a], vertices[b]));
        let shortest = options.iter().map(|o| len(o.0)).fold(f64::INFINITY, f64::min);
        let ((a, b), ring) = *options
            .iter()
            .find(|o| len(o.0) <= shortest * (1.0 + 1e-12))
            .expect("some diagonal is shortest");
        for i in 0..4 {
            tets.push([a, b, ring[i], ring[(i + 1) % 4]]);
        }
        parents.extend(std::iter::repeat_n(t, 8));
    }
    let mesh = build_complex(vertices, &tets).expect("red refinement preserves validity");
    (mesh, parents)
}
