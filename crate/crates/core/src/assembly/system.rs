use std::collections::HashMap;
use std::sync::Arc;

use super::dofmap::{build_dof_map, DofMap};
use super::AssemblyError;
use crate::config::Tolerances;
use crate::interp::{DiscreteField, Field, FieldKind, StressElement, StressLocal};
use crate::linalg::{sparse_solve, DenseMatrix, SparseMatrix};
use crate::mesh::{AffineMap, OrderMap, SimplicialMesh};
use crate::polyspace::{reference_face, scalar_orthonormal, PolyBasis, PolyField};
use crate::quadrature::{rule_for, QuadRule, MAX_DEGREE};
use crate::tensor_ops::{dot3, s2, Mat3, Material, Vec3};

/// Assembled three-field system
/// `[A B1ᵀ B2ᵀ; B1 0 0; B2 0 0] (σ, u, p) = (g, f, 0)` together with the Gram matrices the
/// stability studies need.
#[derive(Clone, Debug)]
pub struct BlockSaddleSystem {
    pub dofs: DofMap,
    pub material: Material,
    /// `⟨Aσ, τ⟩`.
    pub a: SparseMatrix,
    /// `⟨div τ, v⟩`, rows displacement.
    pub b1: SparseMatrix,
    /// `−⟨S2 τ, q⟩`, rows rotation.
    pub b2: SparseMatrix,
    /// `L²` Gram matrix of the stress space.
    pub stress_gram: SparseMatrix,
    /// `⟨div σ, div τ⟩`.
    pub div_gram: SparseMatrix,
    /// `L²` Gram matrix of the elementwise displacement (and rotation) space; diagonal.
    pub elem_gram: SparseMatrix,
    /// Boundary displacement term `∫_∂Ω (τν)·g`.
    pub rhs_stress: Vec<f64>,
    /// `⟨f, v⟩`.
    pub rhs_disp: Vec<f64>,
}

/// Discrete solution: coefficient vectors and the matching piecewise polynomial fields.
#[derive(Clone, Debug)]
pub struct Solution {
    pub stress_coeffs: Vec<f64>,
    pub disp_coeffs: Vec<f64>,
    pub rot_coeffs: Vec<f64>,
    pub stress: DiscreteField,
    pub displacement: DiscreteField,
    pub rotation: DiscreteField,
    pub residual: f64,
}

/// Reference tables of one local stress basis.
struct Tables {
    local: StressLocal,
    /// Values at volume points, `(k, 3p + i)`.
    vals: DenseMatrix,
    /// Reference divergence, `(k, p)`.
    divs: DenseMatrix,
    psi: DenseMatrix,
    /// `φ̂_k · ν̂_f` at face points, per local face.
    flux: Vec<DenseMatrix>,
}

/// Quadrature degree used for assembly: exact for every polynomial product, with slack for
/// smooth loads.
pub fn assembly_degree(r_max: u32) -> u32 {
    (2 * r_max + 6).min(MAX_DEGREE)
}

struct TableCache {
    vol: Arc<QuadRule>,
    tri: Arc<QuadRule>,
    face_points: [Vec<Vec3>; 4],
    map: HashMap<(u32, [u32; 4]), Arc<Tables>>,
}

impl TableCache {
    fn new(degree: u32) -> Result<Self, AssemblyError> {
        let vol = rule_for(3, degree)?;
        let tri = rule_for(2, degree)?;
        let face_points = std::array::from_fn(|f| {
            let p = reference_face(f);
            tri.points.iter().map(|x| p.point(x[0], x[1])).collect()
        });
        Ok(Self {
            vol,
            tri,
            face_points,
            map: HashMap::new(),
        })
    }

    fn get(&mut self, r: u32, faces: [u32; 4]) -> Result<Arc<Tables>, AssemblyError> {
        if let Some(t) = self.map.get(&(r, faces)) {
            return Ok(Arc::clone(t));
        }
        let el = StressElement::get(r + 1)?;
        let local = el.local(faces.map(|q| q + 1));
        let vals = local.basis.tabulate(&self.vol.points);
        let divs = local.basis.map(local.basis.tag.clone(), |f| f.div()).tabulate(&self.vol.points);
        let psi = scalar_orthonormal(r)?.tabulate(&self.vol.points);
        let flux = (0..4)
            .map(|f| {
                let nu = reference_face(f).nu;
                let v = local.basis.tabulate(&self.face_points[f]);
                DenseMatrix::from_fn(local.dim(), self.tri.len(), |k, p| {
                    dot3([v[(k, 3 * p)], v[(k, 3 * p + 1)], v[(k, 3 * p + 2)]], nu)
                })
            })
            .collect();
        let t = Arc::new(Tables {
            local,
            vals,
            divs,
            psi,
            flux,
        });
        self.map.insert((r, faces), Arc::clone(&t));
        Ok(t)
    }
}

/// Builds the saddle-point system for load `load` and optional boundary displacement.
pub fn assemble(
    mesh: &SimplicialMesh,
    orders: &OrderMap,
    material: Material,
    load: &dyn Field,
    boundary: Option<&dyn Field>,
) -> Result<BlockSaddleSystem, AssemblyError> {
    let dofs = build_dof_map(mesh, orders)?;
    let mut cache = TableCache::new(assembly_degree(orders.max_order()))?;
    let (ns, ne) = (dofs.n_stress(), dofs.n_elem);
    let inv2mu = 1.0 / (2.0 * material.lame_mu);
    let kappa = material.lame_lambda / (2.0 * material.lame_mu * (2.0 * material.lame_mu + 3.0 * material.lame_lambda));
    let mut ta = Vec::new();
    let mut tm = Vec::new();
    let mut td = Vec::new();
    let mut tb1 = Vec::new();
    let mut tb2 = Vec::new();
    let mut te = Vec::new();
    let mut rhs_stress = vec![0.0; ns];
    let mut rhs_disp = vec![0.0; ne];

    for t in 0..mesh.num_tets() {
        let sig = orders.signature(mesh, t);
        let tb = cache.get(sig.tet, sig.faces)?;
        let map = mesh.affine_of(t);
        let vol = &cache.vol;
        let np = vol.len();
        let nk = tb.local.dim();
        let nd = dofs.poly_dim[t];
        let w: Vec<f64> = vol.weights.iter().map(|w| w * map.det.abs()).collect();
        // Physical values A φ̂ / det and divergences div̂ φ̂ / det.
        let phi: Vec<Vec<Vec3>> = (0..nk)
            .map(|k| {
                (0..np)
                    .map(|p| {
                        let v = map.a.mul_vec([tb.vals[(k, 3 * p)], tb.vals[(k, 3 * p + 1)], tb.vals[(k, 3 * p + 2)]]);
                        v.map(|x| x / map.det)
                    })
                    .collect()
            })
            .collect();
        let div: Vec<Vec<f64>> = (0..nk).map(|k| (0..np).map(|p| tb.divs[(k, p)] / map.det).collect()).collect();
        let gid = |c: usize, k: usize| {
            let (s, sign) = dofs.tet_stress[t][k];
            (dofs.stress_id(c, s), sign)
        };

        for k in 0..nk {
            for l in 0..nk {
                let mut m = 0.0;
                let mut outer = [[0.0; 3]; 3];
                let mut dd = 0.0;
                for p in 0..np {
                    m += w[p] * dot3(phi[k][p], phi[l][p]);
                    for c in 0..3 {
                        for d in 0..3 {
                            outer[c][d] += w[p] * phi[k][p][c] * phi[l][p][d];
                        }
                    }
                    dd += w[p] * div[k][p] * div[l][p];
                }
                for c in 0..3 {
                    let (i, si) = gid(c, k);
                    for d in 0..3 {
                        let (j, sj) = gid(d, l);
                        let diag = if c == d { inv2mu * m } else { 0.0 };
                        ta.push((i, j, si * sj * (diag - kappa * outer[c][d])));
                    }
                    let (j, sj) = gid(c, l);
                    tm.push((i, j, si * sj * m));
                    td.push((i, j, si * sj * dd));
                }
            }
        }

        for k in 0..nk {
            for i in 0..nd {
                let bdiv: f64 = (0..np).map(|p| w[p] * div[k][p] * tb.psi[(i, p)]).sum();
                let mut bs2 = [[0.0; 3]; 3];
                for p in 0..np {
                    for c in 0..3 {
                        let mut tau = Mat3::default();
                        for j in 0..3 {
                            tau[(c, j)] = phi[k][p][j];
                        }
                        let s = s2(&tau);
                        for d in 0..3 {
                            bs2[c][d] -= w[p] * s[d] * tb.psi[(i, p)];
                        }
                    }
                }
                for c in 0..3 {
                    let (j, sj) = gid(c, k);
                    tb1.push((dofs.elem_id(t, c, i), j, sj * bdiv));
                    for d in 0..3 {
                        if bs2[c][d] != 0.0 {
                            tb2.push((dofs.elem_id(t, d, i), j, sj * bs2[c][d]));
                        }
                    }
                }
            }
        }

        for c in 0..3 {
            for i in 0..nd {
                let id = dofs.elem_id(t, c, i);
                te.push((id, id, map.det.abs()));
            }
        }
        for p in 0..np {
            let f = load.value(map.to_physical(vol.points[p]), Some(t));
            for c in 0..3 {
                for i in 0..nd {
                    rhs_disp[dofs.elem_id(t, c, i)] += w[p] * f[c] * tb.psi[(i, p)];
                }
            }
        }

        if let Some(g) = boundary {
            for (f, &gf) in mesh.tet_faces[t].iter().enumerate() {
                if !mesh.is_boundary_face(gf) {
                    continue;
                }
                let outward = mesh.tet_face_signs[t][f] as f64;
                for (p, &xh) in cache.face_points[f].iter().enumerate() {
                    let gv = g.value(map.to_physical(xh), Some(t));
                    let wp = cache.tri.weights[p] * outward;
                    for k in 0..nk {
                        let fl = tb.flux[f][(k, p)];
                        if fl == 0.0 {
                            continue;
                        }
                        for c in 0..3 {
                            let (i, si) = gid(c, k);
                            rhs_stress[i] += si * wp * fl * gv[c];
                        }
                    }
                }
            }
        }
    }

    Ok(BlockSaddleSystem {
        a: SparseMatrix::from_triplets(ns, ns, &ta)?,
        b1: SparseMatrix::from_triplets(ne, ns, &tb1)?,
        b2: SparseMatrix::from_triplets(ne, ns, &tb2)?,
        stress_gram: SparseMatrix::from_triplets(ns, ns, &tm)?,
        div_gram: SparseMatrix::from_triplets(ns, ns, &td)?,
        elem_gram: SparseMatrix::from_triplets(ne, ne, &te)?,
        rhs_stress,
        rhs_disp,
        dofs,
        material,
    })
}

impl BlockSaddleSystem {
    /// Full symmetric indefinite matrix in `(σ, u, p)` ordering.
    pub fn matrix(&self) -> SparseMatrix {
        let (ns, ne) = (self.dofs.n_stress(), self.dofs.n_elem);
        let n = ns + 2 * ne;
        let b1t = self.b1.transpose();
        let b2t = self.b2.transpose();
        SparseMatrix::from_blocks(
            n,
            n,
            &[
                (0, 0, &self.a),
                (0, ns, &b1t),
                (0, ns + ne, &b2t),
                (ns, 0, &self.b1),
                (ns + ne, 0, &self.b2),
            ],
        )
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut b = self.rhs_stress.clone();
        b.extend(&self.rhs_disp);
        b.extend(std::iter::repeat_n(0.0, self.dofs.n_elem));
        b
    }

    /// `H(div)` Gram matrix of the stress space.
    pub fn hdiv_gram(&self) -> SparseMatrix {
        self.stress_gram.linear_combination(1.0, &self.div_gram, 1.0)
    }
}

/// Direct sparse solve of the assembled system.
pub fn solve_saddle(mesh: &SimplicialMesh, sys: &BlockSaddleSystem) -> Result<Solution, AssemblyError> {
    solve_saddle_with(mesh, sys, &Tolerances::default())
}

pub fn solve_saddle_with(mesh: &SimplicialMesh, sys: &BlockSaddleSystem, tol: &Tolerances) -> Result<Solution, AssemblyError> {
    let k = sys.matrix();
    let b = sys.rhs();
    let x = sparse_solve(&k, &b, tol.solve_residual).map_err(|e| AssemblyError::FactorizationBreakdown(e.to_string()))?;
    let r = k.matvec(&x);
    let num = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if den > 0.0 { num / den } else { num };
    let (ns, ne) = (sys.dofs.n_stress(), sys.dofs.n_elem);
    let stress_coeffs = x[..ns].to_vec();
    let disp_coeffs = x[ns..ns + ne].to_vec();
    let rot_coeffs = x[ns + ne..].to_vec();
    Ok(Solution {
        stress: stress_field(mesh, &sys.dofs, &stress_coeffs)?,
        displacement: elem_field(mesh, &sys.dofs, &disp_coeffs)?,
        rotation: elem_field(mesh, &sys.dofs, &rot_coeffs)?,
        stress_coeffs,
        disp_coeffs,
        rot_coeffs,
        residual,
    })
}

/// Stress field of a global coefficient vector; rows are `A σ̂_c / det` per tet.
pub fn stress_field(mesh: &SimplicialMesh, dofs: &DofMap, coeffs: &[f64]) -> Result<DiscreteField, AssemblyError> {
    let mut elements = Vec::with_capacity(mesh.num_tets());
    for t in 0..mesh.num_tets() {
        let sig = dofs.orders.signature(mesh, t);
        let local = StressElement::get(sig.tet + 1)?.local(sig.faces.map(|q| q + 1));
        let map = mesh.affine_of(t);
        let rows: Vec<PolyField> = (0..3)
            .map(|c| {
                let cf: Vec<f64> = dofs.tet_stress[t]
                    .iter()
                    .map(|&(s, sign)| sign * coeffs[dofs.stress_id(c, s)])
                    .collect();
                local.basis.combine(&cf)
            })
            .collect();
        elements.push(PolyField::stack(&rows).map_components(&row_piola(&map)));
    }
    let mut f = DiscreteField::new(FieldKind::NormalContinuous, mesh, elements);
    f.coefficients = Some(coeffs.to_vec());
    f.orders = Some(dofs.orders.clone());
    Ok(f)
}

/// Component map sending each reference row `v̂` to `A v̂ / det`.
pub fn row_piola(map: &AffineMap) -> DenseMatrix {
    DenseMatrix::from_fn(9, 9, |o, i| if o / 3 == i / 3 { map.a[(o % 3, i % 3)] / map.det } else { 0.0 })
}

/// Elementwise vector field of a displacement or rotation coefficient vector.
pub fn elem_field(mesh: &SimplicialMesh, dofs: &DofMap, coeffs: &[f64]) -> Result<DiscreteField, AssemblyError> {
    let mut elements = Vec::with_capacity(mesh.num_tets());
    for t in 0..mesh.num_tets() {
        let psi: Arc<PolyBasis> = scalar_orthonormal(dofs.orders.tet[t])?;
        let comps: Vec<PolyField> = (0..3)
            .map(|c| {
                let cf: Vec<f64> = (0..dofs.poly_dim[t]).map(|i| coeffs[dofs.elem_id(t, c, i)]).collect();
                psi.combine(&cf)
            })
            .collect();
        elements.push(PolyField::stack(&comps));
    }
    let mut f = DiscreteField::new(FieldKind::Broken, mesh, elements);
    f.coefficients = Some(coeffs.to_vec());
    f.orders = Some(dofs.orders.clone());
    Ok(f)
}

/// `∫ F : τ_i + ∫ G · div τ_i` for every global stress function `τ_i`; `G` optional.
pub fn stress_moments(
    mesh: &SimplicialMesh,
    dofs: &DofMap,
    field: &dyn Field,
    div_field: Option<&dyn Field>,
) -> Result<Vec<f64>, AssemblyError> {
    let mut cache = TableCache::new(assembly_degree(dofs.orders.max_order()))?;
    let mut out = vec![0.0; dofs.n_stress()];
    for t in 0..mesh.num_tets() {
        let sig = dofs.orders.signature(mesh, t);
        let tb = cache.get(sig.tet, sig.faces)?;
        let map = mesh.affine_of(t);
        let vol = &cache.vol;
        for p in 0..vol.len() {
            let x = map.to_physical(vol.points[p]);
            let w = vol.weights[p] * map.det.abs();
            let f = field.value(x, Some(t));
            let g = div_field.map(|d| d.value(x, Some(t)));
            for k in 0..tb.local.dim() {
                let v = map.a.mul_vec([tb.vals[(k, 3 * p)], tb.vals[(k, 3 * p + 1)], tb.vals[(k, 3 * p + 2)]]);
                let dv = tb.divs[(k, p)] / map.det;
                let (s, sign) = dofs.tet_stress[t][k];
                for c in 0..3 {
                    let mut acc = (0..3).map(|j| f[3 * c + j] * v[j] / map.det).sum::<f64>();
                    if let Some(g) = &g {
                        acc += g[c] * dv;
                    }
                    out[dofs.stress_id(c, s)] += sign * w * acc;
                }
            }
        }
    }
    Ok(out)
}

/// `∫ F · v_i` for every elementwise basis function `v_i` of the displacement layout.
pub fn elem_moments(mesh: &SimplicialMesh, dofs: &DofMap, field: &dyn Field) -> Result<Vec<f64>, AssemblyError> {
    let rule = rule_for(3, assembly_degree(dofs.orders.max_order()))?;
    let mut out = vec![0.0; dofs.n_elem];
    for t in 0..mesh.num_tets() {
        let map = mesh.affine_of(t);
        let psi = scalar_orthonormal(dofs.orders.tet[t])?.tabulate(&rule.points);
        for (p, (xh, w)) in rule.iter().enumerate() {
            let f = field.value(map.to_physical(xh), Some(t));
            for c in 0..3 {
                for i in 0..dofs.poly_dim[t] {
                    out[dofs.elem_id(t, c, i)] += w * map.det.abs() * f[c] * psi[(i, p)];
                }
            }
        }
    }
    Ok(out)
}

impl Solution {
    /// Wraps coefficient vectors, e.g. of projections, as a solution.
    pub fn from_coeffs(
        mesh: &SimplicialMesh,
        dofs: &DofMap,
        stress: Vec<f64>,
        disp: Vec<f64>,
        rot: Vec<f64>,
    ) -> Result<Self, AssemblyError> {
        Ok(Self {
            stress: stress_field(mesh, dofs, &stress)?,
            displacement: elem_field(mesh, dofs, &disp)?,
            rotation: elem_field(mesh, dofs, &rot)?,
            stress_coeffs: stress,
            disp_coeffs: disp,
            rot_coeffs: rot,
            residual: 0.0,
        })
    }
}
