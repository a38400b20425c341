use serde::{Deserialize, Serialize};

use super::{local_face_edges, MeshError, SimplicialMesh};
use crate::config::R_MAX;

/// Polynomial order of every edge, face and tet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderMap {
    pub tet: Vec<u32>,
    pub face: Vec<u32>,
    pub edge: Vec<u32>,
}

/// Orders of one tet and its subsimplexes in local numbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderSignature {
    pub tet: u32,
    pub faces: [u32; 4],
    pub edges: [u32; 6],
}

impl OrderSignature {
    pub fn uniform(r: u32) -> Self {
        Self {
            tet: r,
            faces: [r; 4],
            edges: [r; 6],
        }
    }

    /// Checks `edge ≤ face ≤ tet` for every incidence.
    pub fn is_monotone(&self) -> bool {
        if self.faces.iter().any(|&f| f > self.tet) {
            return false;
        }
        (0..4).all(|f| local_face_edges(f).iter().all(|&e| self.edges[e] <= self.faces[f]))
    }

    /// Same signature with every order shifted by `delta`.
    pub fn shifted(&self, delta: u32) -> Self {
        Self {
            tet: self.tet + delta,
            faces: self.faces.map(|f| f + delta),
            edges: self.edges.map(|e| e + delta),
        }
    }
}

/// A monotonicity or cap violation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderViolation {
    FaceAboveTet { face: usize, tet: usize },
    EdgeAboveFace { edge: usize, face: usize },
    AboveCap { tet: usize, order: u32 },
    WrongLength { what: String, expected: usize, found: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderReport {
    pub violations: Vec<OrderViolation>,
}

impl OrderReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl OrderMap {
    pub fn uniform(m: &SimplicialMesh, r: u32) -> Self {
        Self {
            tet: vec![r; m.num_tets()],
            face: vec![r; m.num_faces()],
            edge: vec![r; m.num_edges()],
        }
    }

    /// Face and edge orders from the minimum over incident tets.
    pub fn from_tet_orders(m: &SimplicialMesh, tet_orders: &[u32]) -> Result<Self, MeshError> {
        if tet_orders.len() != m.num_tets() {
            return Err(MeshError::Order(format!(
                "expected {} tet orders, found {}",
                m.num_tets(),
                tet_orders.len()
            )));
        }
        if let Some((t, &r)) = tet_orders.iter().enumerate().find(|(_, &r)| r > R_MAX) {
            return Err(MeshError::Order(format!("tet {t}: order {r} exceeds the cap {R_MAX}")));
        }
        let mut face = vec![u32::MAX; m.num_faces()];
        let mut edge = vec![u32::MAX; m.num_edges()];
        for (t, &r) in tet_orders.iter().enumerate() {
            for &f in &m.tet_faces[t] {
                face[f] = face[f].min(r);
            }
            for &e in &m.tet_edges[t] {
                edge[e] = edge[e].min(r);
            }
        }
        Ok(Self {
            tet: tet_orders.to_vec(),
            face,
            edge,
        })
    }

    pub fn max_order(&self) -> u32 {
        self.tet.iter().copied().max().unwrap_or(0)
    }

    pub fn signature(&self, m: &SimplicialMesh, t: usize) -> OrderSignature {
        OrderSignature {
            tet: self.tet[t],
            faces: m.tet_faces[t].map(|f| self.face[f]),
            edges: m.tet_edges[t].map(|e| self.edge[e]),
        }
    }

    /// Orders of a refined mesh: children inherit the parent tet order.
    pub fn refine(&self, child_mesh: &SimplicialMesh, parents: &[usize]) -> Self {
        let tet: Vec<u32> = parents.iter().map(|&p| self.tet[p]).collect();
        Self::from_tet_orders(child_mesh, &tet).expect("parent orders are admissible")
    }
}

/// Lists every monotonicity violation; an empty report means the map is admissible.
pub fn validate_order_map(m: &SimplicialMesh, r: &OrderMap) -> OrderReport {
    let mut violations = Vec::new();
    for (what, expected, found) in [
        ("tet", m.num_tets(), r.tet.len()),
        ("face", m.num_faces(), r.face.len()),
        ("edge", m.num_edges(), r.edge.len()),
    ] {
        if expected != found {
            violations.push(OrderViolation::WrongLength {
                what: what.to_string(),
                expected,
                found,
            });
        }
    }
    if !violations.is_empty() {
        return OrderReport { violations };
    }
    for t in 0..m.num_tets() {
        if r.tet[t] > R_MAX {
            violations.push(OrderViolation::AboveCap { tet: t, order: r.tet[t] });
        }
        for &f in &m.tet_faces[t] {
            if r.face[f] > r.tet[t] {
                violations.push(OrderViolation::FaceAboveTet { face: f, tet: t });
            }
        }
    }
    for (f, edges) in m.face_edges.iter().enumerate() {
        for &e in edges {
            if r.edge[e] > r.face[f] {
                violations.push(OrderViolation::EdgeAboveFace { edge: e, face: f });
            }
        }
    }
    OrderReport { violations }
}
