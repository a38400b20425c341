use crate::linalg::{lu_solve, null_space, DenseMatrix};
use crate::mesh::{AffineMap, OrderMap, OrderSignature, SimplicialMesh, LOCAL_FACES};
use crate::polyspace::poly::monomial_exponents;
use crate::polyspace::{
    complement_g_basis, curl_image_basis, dim_p2, matrix_sandwich, scalar_orthonormal,
    FaceFrame, FaceMomentBasis, FaceParam, PolyBasis, PolyField,
};
use crate::quadrature::rule_for;
use crate::tensor_ops::{dot3, norm3, s1, sub3, Mat3, Vec3};

use super::field::{DiscreteField, Difference, Field, FieldKind};
use super::moments::{moment_system, select_t, target_space, Projector, RefQuadrature, RefSamples, MOMENT_QUAD_DEGREE};
use super::stress::StressElement;
use super::InterpError;

/// Reference polynomial of tet `map` read as a field in physical coordinates.
pub struct OnTet<'a> {
    pub poly: &'a PolyField,
    pub map: &'a AffineMap,
}

/// `∂f/∂x = ∂f/∂x̂ · A⁻¹` for a row-major `ncomp × 3` Jacobian.
pub(crate) fn chain(jh: &[f64], a_inv: &Mat3) -> Vec<f64> {
    let mut out = vec![0.0; jh.len()];
    for (c, row) in jh.chunks(3).enumerate() {
        for j in 0..3 {
            out[3 * c + j] = (0..3).map(|k| row[k] * a_inv[(k, j)]).sum();
        }
    }
    out
}

impl Field for OnTet<'_> {
    fn ncomp(&self) -> usize {
        self.poly.ncomp
    }

    fn value(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        self.poly.eval(self.map.to_reference(x))
    }

    fn jacobian(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        chain(&self.poly.jacobian(self.map.to_reference(x)), &self.map.a_inv)
    }
}

fn mat(v: &[f64]) -> Mat3 {
    Mat3::from_slice(&v[..9])
}

/// Row-wise divergence `Σ_j ∂_j U_ij` from a 9 × 3 Jacobian.
fn div_rows(jac: &[f64]) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|j| jac[3 * (3 * i + j) + j]).sum())
}

/// `div S1W = Σ_j ∂_j W_ji − ∇ tr W`.
fn div_s1(jac: &[f64]) -> Vec3 {
    std::array::from_fn(|i| {
        let a: f64 = (0..3).map(|j| jac[3 * (3 * j + i) + j]).sum();
        let b: f64 = (0..3).map(|k| jac[3 * (3 * k + k) + i]).sum();
        a - b
    })
}

/// Samples of the reference pullback of a matrix field on one tet, as consumed by the
/// moment system of `p`.
pub fn pull_back(p: Projector, map: &AffineMap, field: &dyn Field, cell: Option<usize>) -> RefSamples {
    let q = RefQuadrature::get();
    let a = map.a;
    let at = a.transpose();
    let ai = map.a_inv;
    let ait = ai.transpose();
    let face_hat = |w: Mat3| match p {
        Projector::TwoMinus => at * w * ait,
        Projector::OneMinus => ai * w * a,
    };
    let face = std::array::from_fn(|f| {
        q.face_points[f]
            .iter()
            .map(|&xh| face_hat(mat(&field.value(map.to_physical(xh), cell))).to_array())
            .collect()
    });
    let mut vol = Vec::with_capacity(q.tet.len());
    let mut vol_div = Vec::with_capacity(q.tet.len());
    for &xh in &q.tet.points {
        let x = map.to_physical(xh);
        let w = mat(&field.value(x, cell));
        let jac = field.jacobian(x, cell);
        let (v, d) = match p {
            Projector::TwoMinus => (w, div_rows(&jac)),
            Projector::OneMinus => (s1(&w), div_s1(&jac)),
        };
        vol.push((at * v * ait).to_array());
        vol_div.push(at.mul_vec(d));
    }
    RefSamples { face, vol, vol_div }
}

fn element(p: Projector, map: &AffineMap, sig: OrderSignature, field: &dyn Field, cell: Option<usize>) -> Result<PolyField, InterpError> {
    let sys = moment_system(p, sig)?;
    let hat = sys.project(&pull_back(p, map, field, cell))?;
    let back = match p {
        Projector::TwoMinus => matrix_sandwich(&map.a_inv.transpose(), &map.a.transpose()),
        Projector::OneMinus => matrix_sandwich(&map.a, &map.a_inv),
    };
    Ok(hat.map_components(&back))
}

/// Λ² trimmed projection on one tet; the result is a matrix polynomial in the tet's reference
/// coordinates whose values are the physical values.
pub fn interp_p2minus_element(map: &AffineMap, sig: OrderSignature, field: &dyn Field, cell: Option<usize>) -> Result<PolyField, InterpError> {
    element(Projector::TwoMinus, map, sig, field, cell)
}

/// Λ¹ trimmed projection on one tet, zero tangential traces on every edge.
pub fn interp_p1minus_element(map: &AffineMap, sig: OrderSignature, field: &dyn Field, cell: Option<usize>) -> Result<PolyField, InterpError> {
    element(Projector::OneMinus, map, sig, field, cell)
}

fn global(p: Projector, kind: FieldKind, mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    let elements = (0..mesh.num_tets())
        .map(|t| element(p, &mesh.affine_of(t), orders.signature(mesh, t), field, Some(t)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = DiscreteField::new(kind, mesh, elements);
    out.orders = Some(orders.clone());
    Ok(out)
}

pub fn interp_p2minus(mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    global(Projector::TwoMinus, FieldKind::NormalContinuous, mesh, orders, field)
}

pub fn interp_p1minus(mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    global(Projector::OneMinus, FieldKind::TangentialContinuous, mesh, orders, field)
}

/// Same projection as [`interp_p2minus_element`] / [`interp_p1minus_element`], but assembled
/// from moments taken directly on the physical tet with physically scaled test functions.
pub fn interp_physical(p: Projector, map: &AffineMap, vertices: [Vec3; 4], sig: OrderSignature, field: &dyn Field) -> Result<PolyField, InterpError> {
    let t = select_t(sig.tet)?;
    let target = target_space(p, sig)?;
    let to_phys = match p {
        Projector::TwoMinus => matrix_sandwich(&Mat3::IDENTITY, &map.a.transpose().scale(1.0 / map.det)),
        Projector::OneMinus => matrix_sandwich(&Mat3::IDENTITY, &map.a_inv),
    };
    let basis: Vec<PolyField> = target.functions().iter().map(|f| f.map_components(&to_phys)).collect();
    let probe = PhysicalProbe::new(p, map, vertices, sig, t)?;
    let cols: Vec<Vec<f64>> = basis.iter().map(|b| probe.rows(&OnTet { poly: b, map })).collect();
    let n = basis.len();
    if cols.iter().any(|c| c.len() != n) {
        return Err(InterpError::DimensionMismatch {
            rows: cols.first().map_or(0, |c| c.len()),
            cols: n,
        });
    }
    let c = DenseMatrix::from_fn(n, n, |i, k| cols[k][i]);
    let x = lu_solve(&c, &probe.rows(field))?;
    let mut out = PolyField::zero(9, target.degree);
    for (b, xi) in basis.iter().zip(x) {
        out.add_scaled(xi, b);
    }
    Ok(out)
}

/// Moment functionals of a trimmed projection written on the physical tet.
struct PhysicalProbe {
    p: Projector,
    /// Per face: param, frame, face diameter, test count.
    faces: Vec<(FaceParam, FaceFrame, f64, usize)>,
    centroid: Vec3,
    h: f64,
    r: u32,
    tet_points: Vec<(Vec3, f64)>,
    /// `A ĥ_m A⁻¹` at each tet point for `f̂` and `ĝ`, blended at `t`.
    aux: Vec<Vec<Mat3>>,
}

impl PhysicalProbe {
    fn new(p: Projector, map: &AffineMap, v: [Vec3; 4], sig: OrderSignature, t: f64) -> Result<Self, InterpError> {
        let q = RefQuadrature::get();
        let faces = (0..4)
            .map(|f| {
                let [a, b, c] = LOCAL_FACES[f].map(|i| v[i]);
                let h = norm3(sub3(b, a)).max(norm3(sub3(c, a))).max(norm3(sub3(c, b)));
                (FaceParam::from_vertices(a, b, c), FaceFrame::new(f, a, b, c), h, dim_p2(sig.faces[f] as i64))
            })
            .collect();
        let tet_points: Vec<(Vec3, f64)> = q.tet.iter().map(|(xh, w)| (map.to_physical(xh), w * map.det.abs())).collect();
        let fh = curl_image_basis(sig.tet)?.tabulate(&q.tet.points);
        let gh = complement_g_basis(sig.tet)?.tabulate(&q.tet.points);
        let aux = (0..fh.rows())
            .map(|m| {
                (0..q.tet.len())
                    .map(|pt| {
                        let h = Mat3::from_fn(|i, j| (1.0 - t) * fh[(m, 9 * pt + 3 * i + j)] + t * gh[(m, 9 * pt + 3 * i + j)]);
                        map.a * h * map.a_inv
                    })
                    .collect()
            })
            .collect();
        let centroid = std::array::from_fn(|i| v.iter().map(|x| x[i]).sum::<f64>() / 4.0);
        Ok(Self {
            p,
            faces,
            centroid,
            h: map.h,
            r: sig.tet,
            tet_points,
            aux,
        })
    }

    fn rows(&self, field: &dyn Field) -> Vec<f64> {
        let q = RefQuadrature::get();
        let mut out = Vec::new();
        for (param, frame, h, n) in &self.faces {
            let vecs = match self.p {
                Projector::TwoMinus => vec![param.nu],
                Projector::OneMinus => vec![param.ds, param.dt],
            };
            let samples: Vec<(Mat3, Vec<f64>, f64)> = q
                .tri
                .iter()
                .map(|(st, w)| {
                    let x = param.point(st[0], st[1]);
                    let y = frame.coords(x);
                    let mono = face_monomials(*n, [y[0] / h, y[1] / h]);
                    (mat(&field.value(x, None)), mono, w)
                })
                .collect();
            for c in 0..3 {
                for v in &vecs {
                    for j in 0..*n {
                        out.push(samples.iter().map(|(m, mono, w)| w * mono[j] * dot3(m.row(c), *v)).sum());
                    }
                }
            }
        }
        let exps = &monomial_exponents(self.r)[1..];
        let vals: Vec<(Mat3, Vec3, Vec<f64>, f64)> = self
            .tet_points
            .iter()
            .map(|&(x, w)| {
                let m = mat(&field.value(x, None));
                let jac = field.jacobian(x, None);
                let (v, d) = match self.p {
                    Projector::TwoMinus => (m, div_rows(&jac)),
                    Projector::OneMinus => (s1(&m), div_s1(&jac)),
                };
                let y = sub3(x, self.centroid).map(|c| c / self.h);
                let mono = exps
                    .iter()
                    .map(|e| y[0].powi(e[0] as i32) * y[1].powi(e[1] as i32) * y[2].powi(e[2] as i32))
                    .collect();
                (v, d, mono, w)
            })
            .collect();
        for c in 0..3 {
            for k in 0..exps.len() {
                out.push(vals.iter().map(|(_, d, mono, w)| w * d[c] * mono[k]).sum());
            }
        }
        for hm in &self.aux {
            out.push(vals.iter().zip(hm).map(|((v, _, _, w), h)| w * v.frob(h)).sum());
        }
        out
    }
}

fn face_monomials(n: usize, y: [f64; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut d = 0;
    while out.len() < n {
        for a in (0..=d).rev() {
            if out.len() < n {
                out.push(y[0].powi(a) * y[1].powi(d - a));
            }
        }
        d += 1;
    }
    out
}

/// Elementwise `L²` projection onto `P_{r(T)}`, any number of components.
pub fn project_l2_p3(mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    let rule = rule_for(3, MOMENT_QUAD_DEGREE)?;
    let nc = field.ncomp();
    let mut elements = Vec::with_capacity(mesh.num_tets());
    for t in 0..mesh.num_tets() {
        let map = mesh.affine_of(t);
        let psi = scalar_orthonormal(orders.tet[t])?;
        let tab = psi.tabulate(&rule.points);
        let vals: Vec<Vec<f64>> = rule.points.iter().map(|&xh| field.value(map.to_physical(xh), Some(t))).collect();
        let comps: Vec<PolyField> = (0..nc)
            .map(|c| {
                let coeffs: Vec<f64> = (0..psi.dim())
                    .map(|i| (0..rule.len()).map(|p| rule.weights[p] * tab[(i, p)] * vals[p][c]).sum())
                    .collect();
                psi.combine(&coeffs)
            })
            .collect();
        elements.push(PolyField::stack(&comps));
    }
    let mut out = DiscreteField::new(FieldKind::Broken, mesh, elements);
    out.orders = Some(orders.clone());
    Ok(out)
}

/// Commuting interpolant onto row-wise `P_{r+1}` stress fields: face fluxes are the `L²`
/// projections of the normal traces onto `P_{r(F)+1}`, bubbles match the divergence against
/// `P_{r(T)}` and are `L²`-orthogonal to divergence-free bubbles.
pub fn interp_p2(mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    let elements = (0..mesh.num_tets())
        .map(|t| interp_p2_element(mesh, t, orders.signature(mesh, t), field))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = DiscreteField::new(FieldKind::NormalContinuous, mesh, elements);
    out.orders = Some(orders.clone());
    Ok(out)
}

fn interp_p2_element(mesh: &SimplicialMesh, t: usize, sig: OrderSignature, field: &dyn Field) -> Result<PolyField, InterpError> {
    let map = mesh.affine_of(t);
    let v = mesh.tet_vertices(t);
    let el = StressElement::get(sig.tet + 1)?;
    let local = el.local(sig.faces.map(|q| q + 1));
    let q = RefQuadrature::get();
    let mu = FaceMomentBasis::get();
    let nfaces: usize = local.face_counts.iter().sum();

    // Face coefficients, three rows at a time.
    let mut face_coef = vec![vec![0.0; nfaces]; 3];
    for f in 0..4 {
        let [a, b, c] = LOCAL_FACES[f].map(|i| v[i]);
        let param = FaceParam::from_vertices(a, b, c);
        let off = local.face_offset(f);
        for (pt, (st, w)) in q.tri.iter().enumerate() {
            let x = map.to_physical(q.face_points[f][pt]);
            let m = mat(&field.value(x, Some(t)));
            let mv = mu.eval(sig.faces[f] + 1, st[0], st[1]);
            for (row, coef) in face_coef.iter_mut().enumerate() {
                let flux = dot3(m.row(row), param.nu);
                for j in 0..local.face_counts[f] {
                    coef[off + j] += w * mv[j] * flux;
                }
            }
        }
    }

    let faces = PolyBasis {
        ncomp: 3,
        degree: local.basis.degree,
        coeffs: local.basis.coeffs.select_rows(&(0..nfaces).collect::<Vec<_>>()),
        tag: local.basis.tag.clone(),
    };
    let bubbles = &el.bubbles;
    let nb = bubbles.dim();
    let psi = scalar_orthonormal(sig.tet)?;
    let np = q.tet.len();
    let psi_tab = psi.tabulate(&q.tet.points);
    let div_b = bubbles.map(bubbles.tag.clone(), |f| f.div()).tabulate(&q.tet.points);
    let div_f = faces.map(faces.tag.clone(), |f| f.div()).tabulate(&q.tet.points);
    let b_tab = bubbles.tabulate(&q.tet.points);
    let f_tab = faces.tabulate(&q.tet.points);
    let g = map.a.transpose() * map.a;
    let nd = psi.dim() - 1;

    // D̂_ik = ∫ div̂ b̂_k ψ_i,  M̂_kl = ∫ b̂_kᵀ G b̂_l.
    let w = &q.tet.weights;
    let d_hat = DenseMatrix::from_fn(nd, nb, |i, k| (0..np).map(|p| w[p] * div_b[(k, p)] * psi_tab[(i + 1, p)]).sum());
    let gdot = |ta: &DenseMatrix, a: usize, tb: &DenseMatrix, b: usize, p: usize| -> f64 {
        let x: Vec3 = std::array::from_fn(|i| ta[(a, 3 * p + i)]);
        let y: Vec3 = std::array::from_fn(|i| tb[(b, 3 * p + i)]);
        dot3(x, g.mul_vec(y))
    };
    let m_hat = DenseMatrix::from_fn(nb, nb, |k, l| (0..np).map(|p| w[p] * gdot(&b_tab, k, &b_tab, l, p)).sum());
    let z = null_space(&d_hat, 1e-10);
    let zm = z.t_matmul(&m_hat);
    let lhs = d_hat.vstack(&zm);

    let data: Vec<(Mat3, Vec3)> = q
        .tet
        .points
        .iter()
        .map(|&xh| {
            let x = map.to_physical(xh);
            (mat(&field.value(x, Some(t))), div_rows(&field.jacobian(x, Some(t))))
        })
        .collect();

    let mut rows = Vec::with_capacity(3);
    for (row, fc) in face_coef.iter().enumerate() {
        // Face part σ̂_F = Σ fc_j φ̂_j at quadrature points.
        let rhs_d: Vec<f64> = (0..nd)
            .map(|i| {
                (0..np)
                    .map(|p| {
                        let div_face: f64 = (0..nfaces).map(|j| fc[j] * div_f[(j, p)]).sum();
                        w[p] * psi_tab[(i + 1, p)] * (map.det * data[p].1[row] - div_face)
                    })
                    .sum()
            })
            .collect();
        let m_rhs: Vec<f64> = (0..nb)
            .map(|k| {
                (0..np)
                    .map(|p| {
                        let atv = map.a.t_mul_vec(data[p].0.row(row));
                        let bk: Vec3 = std::array::from_fn(|i| b_tab[(k, 3 * p + i)]);
                        let face: Vec3 = std::array::from_fn(|i| (0..nfaces).map(|j| fc[j] * f_tab[(j, 3 * p + i)]).sum());
                        w[p] * (map.det * dot3(atv, bk) - dot3(face, g.mul_vec(bk)))
                    })
                    .sum()
            })
            .collect();
        let mut rhs = rhs_d;
        rhs.extend(z.t_matvec(&m_rhs));
        let x = lu_solve(&lhs, &rhs)?;
        let mut coef = fc.clone();
        coef.extend(x);
        rows.push(local.basis.combine(&coef));
    }
    // Row c of the physical value is A σ̂_c / det.
    let piola = DenseMatrix::from_fn(9, 9, |o, i| {
        if o / 3 == i / 3 {
            map.a[(o % 3, i % 3)] / map.det
        } else {
            0.0
        }
    });
    Ok(PolyField::stack(&rows).map_components(&piola))
}

/// Clément quasi-interpolant: patch averages at vertices, interpolated linearly.
pub fn clement(mesh: &SimplicialMesh, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    let rule = rule_for(3, MOMENT_QUAD_DEGREE)?;
    let nc = field.ncomp();
    let integrals: Vec<Vec<f64>> = (0..mesh.num_tets())
        .map(|t| {
            let map = mesh.affine_of(t);
            let mut acc = vec![0.0; nc];
            for (xh, w) in rule.iter() {
                for (a, v) in acc.iter_mut().zip(field.value(map.to_physical(xh), Some(t))) {
                    *a += w * map.det.abs() * v;
                }
            }
            acc
        })
        .collect();
    let vertex: Vec<Vec<f64>> = (0..mesh.num_vertices())
        .map(|v| {
            let patch = &mesh.vertex_tets[v];
            let vol: f64 = patch.iter().map(|&t| mesh.volume(t)).sum();
            (0..nc).map(|c| patch.iter().map(|&t| integrals[t][c]).sum::<f64>() / vol).collect()
        })
        .collect();
    let lambdas = barycentric_polys();
    let elements = mesh
        .tets
        .iter()
        .map(|tet| {
            let comps: Vec<PolyField> = (0..nc)
                .map(|c| {
                    let mut p = PolyField::zero(1, 1);
                    for (l, &v) in lambdas.iter().zip(tet) {
                        p.add_scaled(vertex[v][c], l);
                    }
                    p
                })
                .collect();
            PolyField::stack(&comps)
        })
        .collect();
    Ok(DiscreteField::new(FieldKind::Continuous, mesh, elements))
}

fn barycentric_polys() -> [PolyField; 4] {
    let x = [PolyField::coordinate(0), PolyField::coordinate(1), PolyField::coordinate(2)];
    let l0 = PolyField::constant(&[1.0]).with_degree(1).sub(&x[0]).sub(&x[1]).sub(&x[2]);
    let [a, b, c] = x;
    [l0, a, b, c]
}

/// `Π^{1,−}(W − R_h W) + R_h W`.
pub fn interp_p1minus_stabilized(mesh: &SimplicialMesh, orders: &OrderMap, field: &dyn Field) -> Result<DiscreteField, InterpError> {
    let rh = clement(mesh, field)?;
    let residual = Difference(field, &rh);
    let mut out = interp_p1minus(mesh, orders, &residual)?;
    for (e, r) in out.elements.iter_mut().zip(&rh.elements) {
        *e = e.add(r);
    }
    Ok(out)
}

/// Largest interface trace jump of `field` over interior faces, as `(face, jump)`, relative to
/// the largest trace magnitude seen on that face.
pub fn conformity_defect(mesh: &SimplicialMesh, field: &DiscreteField) -> Option<(usize, f64)> {
    if field.kind == FieldKind::Broken {
        return None;
    }
    let q = RefQuadrature::get();
    let mut worst: Option<(usize, f64)> = None;
    for fid in mesh.interior_faces() {
        let [a, b, c] = mesh.faces[fid].map(|v| mesh.vertices[v]);
        let param = FaceParam::from_vertices(a, b, c);
        let (t0, t1) = (mesh.face_tets[fid][0], mesh.face_tets[fid][1]);
        let (mut jump, mut scale) = (0.0f64, 0.0f64);
        for st in &q.tri.points {
            let x = param.point(st[0], st[1]);
            let u = traces(field, field.value(x, Some(t0)), &param);
            let v = traces(field, field.value(x, Some(t1)), &param);
            for (p, q) in u.iter().zip(&v) {
                jump = jump.max((p - q).abs());
                scale = scale.max(p.abs()).max(q.abs());
            }
        }
        let rel = if scale > 0.0 { jump / scale } else { 0.0 };
        if worst.is_none_or(|(_, w)| rel > w) {
            worst = Some((fid, rel));
        }
    }
    worst
}

fn traces(field: &DiscreteField, v: Vec<f64>, param: &FaceParam) -> Vec<f64> {
    let rows = |d: Vec3| -> Vec<f64> { (0..field.ncomp / 3).map(|c| dot3([v[3 * c], v[3 * c + 1], v[3 * c + 2]], d)).collect() };
    match field.kind {
        FieldKind::NormalContinuous => rows(param.nu),
        FieldKind::TangentialContinuous => {
            let mut out = rows(param.ds);
            out.extend(rows(param.dt));
            out
        }
        _ => v,
    }
}

/// Accepts an elementwise-assembled field as a global conforming one after checking that
/// its interface traces agree to `tol`.
pub fn elementwise_to_global(mesh: &SimplicialMesh, field: DiscreteField, tol: f64) -> Result<DiscreteField, InterpError> {
    match conformity_defect(mesh, &field) {
        Some((face, jump)) if jump > tol => Err(InterpError::ConformityViolation { face, jump }),
        _ => Ok(field),
    }
}
