use serde::{Deserialize, Serialize};

use super::AssemblyError;
use crate::interp::StressElement;
use crate::mesh::{validate_order_map, OrderMap, SimplicialMesh};
use crate::polyspace::{dim_p2, dim_p3};

/// Global numbering of the three unknown fields.
///
/// Stress is stored as three row copies of one vector-valued space with `n_scalar`
/// functions: face functions first (grouped by global face), then per-tet bubbles. The
/// global id of row `c` of scalar function `s` is `c · n_scalar + s`. Displacement and
/// rotation are elementwise with identical layouts: tet `t`, component `c`, basis index `i`
/// lives at `elem_offset[t] + c · poly_dim[t] + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    pub orders: OrderMap,
    pub n_scalar: usize,
    pub face_offset: Vec<usize>,
    pub face_count: Vec<usize>,
    pub bubble_offset: Vec<usize>,
    pub bubble_count: Vec<usize>,
    /// Local stress function `k` of tet `t` maps to `(scalar id, sign)`.
    pub tet_stress: Vec<Vec<(usize, f64)>>,
    pub poly_dim: Vec<usize>,
    pub elem_offset: Vec<usize>,
    pub n_elem: usize,
}

impl DofMap {
    pub fn n_stress(&self) -> usize {
        3 * self.n_scalar
    }

    pub fn n_disp(&self) -> usize {
        self.n_elem
    }

    pub fn n_rot(&self) -> usize {
        self.n_elem
    }

    pub fn n_total(&self) -> usize {
        self.n_stress() + 2 * self.n_elem
    }

    pub fn stress_id(&self, row: usize, scalar: usize) -> usize {
        row * self.n_scalar + scalar
    }

    pub fn elem_id(&self, t: usize, comp: usize, i: usize) -> usize {
        self.elem_offset[t] + comp * self.poly_dim[t] + i
    }
}

/// Numbers every dof. Tets keep ascending vertex order, so a shared face is parametrised
/// identically from both sides and every orientation sign is `+1`.
pub fn build_dof_map(mesh: &SimplicialMesh, orders: &OrderMap) -> Result<DofMap, AssemblyError> {
    let report = validate_order_map(mesh, orders);
    if !report.is_ok() {
        return Err(AssemblyError::NonMonotoneOrder(format!("{:?}", report.violations)));
    }
    let mut next = 0;
    let mut face_offset = Vec::with_capacity(mesh.num_faces());
    let mut face_count = Vec::with_capacity(mesh.num_faces());
    for f in 0..mesh.num_faces() {
        let n = dim_p2(orders.face[f] as i64 + 1);
        face_offset.push(next);
        face_count.push(n);
        next += n;
    }
    let mut bubble_offset = Vec::with_capacity(mesh.num_tets());
    let mut bubble_count = Vec::with_capacity(mesh.num_tets());
    let mut tet_stress = Vec::with_capacity(mesh.num_tets());
    for t in 0..mesh.num_tets() {
        let el = StressElement::get(orders.tet[t] + 1)?;
        let nb = el.bubbles.dim();
        bubble_offset.push(next);
        bubble_count.push(nb);
        let mut local = Vec::new();
        for &gf in &mesh.tet_faces[t] {
            local.extend((0..face_count[gf]).map(|j| (face_offset[gf] + j, 1.0)));
        }
        local.extend((0..nb).map(|j| (next + j, 1.0)));
        next += nb;
        tet_stress.push(local);
    }
    let poly_dim: Vec<usize> = orders.tet.iter().map(|&r| dim_p3(r as i64)).collect();
    let mut elem_offset = Vec::with_capacity(mesh.num_tets());
    let mut n_elem = 0;
    for &d in &poly_dim {
        elem_offset.push(n_elem);
        n_elem += 3 * d;
    }
    Ok(DofMap {
        orders: orders.clone(),
        n_scalar: next,
        face_offset,
        face_count,
        bubble_offset,
        bubble_count,
        tet_stress,
        poly_dim,
        elem_offset,
        n_elem,
    })
}
