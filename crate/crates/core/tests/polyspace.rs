use afw3d::linalg::{numerical_rank, DenseMatrix};
use afw3d::mesh::{unit_cube_mesh, OrderMap, OrderSignature, LOCAL_EDGES};
use afw3d::polyspace::*;
use afw3d::quadrature::build_rule;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p3(r: i64) -> usize {
    if r < 0 {
        0
    } else {
        let r = r as usize;
        (r + 1) * (r + 2) * (r + 3) / 6
    }
}

fn p2(r: i64) -> usize {
    if r < 0 {
        0
    } else {
        let r = r as usize;
        (r + 1) * (r + 2) / 2
    }
}

/// Degrees of freedom of a variable Nédélec space counted by subsimplex.
fn nedelec_dofs(sig: &OrderSignature) -> usize {
    let s = sig.tet as i64;
    let edges: i64 = sig.edges.iter().map(|&q| q as i64).sum();
    let faces: i64 = sig.faces.iter().map(|&q| (q as i64) * (q as i64 - 1).max(0)).sum();
    (edges + faces + (s * (s - 1) * (s - 2) / 2).max(0)) as usize
}

fn rt_dofs(sig: &OrderSignature) -> usize {
    let s = sig.tet as i64;
    let faces: usize = sig.faces.iter().map(|&q| p2(q as i64 - 1)).sum();
    faces + ((s - 1) * s * (s + 1) / 2).max(0) as usize
}

fn bdm_dofs(sig: &OrderSignature) -> usize {
    let s = sig.tet as i64;
    let faces: usize = sig.faces.iter().map(|&q| p2(q as i64)).sum();
    faces + 3 * p3(s) - 4 * p2(s)
}

fn random_field(rng: &mut ChaCha8Rng, ncomp: usize, deg: u32) -> PolyField {
    let n = ncomp * num_monomials(deg);
    PolyField::from_coeffs(ncomp, deg, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn assert_orthonormal(b: &PolyBasis, tol: f64) {
    let g = b.gram();
    let e = g.sub(&DenseMatrix::identity(b.dim())).max_abs();
    assert!(e < tol, "gram defect {e:e} for {:?}", b.tag);
}

#[test]
fn full_space_dimensions() {
    for r in 0..=6 {
        assert_eq!(basis_full(SpaceKind::L2, r).unwrap().dim(), p3(r as i64));
        assert_eq!(basis_full(SpaceKind::HDivFull, r).unwrap().dim(), 3 * p3(r as i64));
    }
    assert_eq!(basis_full(SpaceKind::L2, 2).unwrap().dim(), 10);
    assert_eq!(basis_full(SpaceKind::HCurlTrimmed, 1).unwrap().dim(), 6);
    assert_eq!(basis_full(SpaceKind::HDivTrimmed, 2).unwrap().dim(), 15);
    for s in 0..=6u32 {
        let su = s as usize;
        assert_eq!(basis_full(SpaceKind::HCurlTrimmed, s).unwrap().dim(), su * (su + 2) * (su + 3) / 2);
        assert_eq!(basis_full(SpaceKind::HDivTrimmed, s).unwrap().dim(), su * (su + 1) * (su + 3) / 2);
    }
}

#[test]
fn bases_are_orthonormal() {
    for r in 0..=6 {
        assert_orthonormal(&basis_full(SpaceKind::L2, r).unwrap(), 1e-11);
        assert_orthonormal(&basis_full(SpaceKind::HCurlTrimmed, r).unwrap(), 1e-11);
        assert_orthonormal(&basis_full(SpaceKind::HDivTrimmed, r).unwrap(), 1e-11);
    }
    assert_orthonormal(&basis_ring(SpaceKind::HDivFull, 3).unwrap(), 1e-11);
}

#[test]
fn scalar_basis_is_hierarchical() {
    let b6 = scalar_orthonormal(6).unwrap();
    for r in 0..6 {
        let br = scalar_orthonormal(r).unwrap();
        for i in 0..br.dim() {
            let d = br.function(i).with_degree(6).sub(&b6.function(i)).max_abs_coeff();
            assert!(d < 1e-9, "r={r} i={i} {d:e}");
        }
    }
}

#[test]
fn ring_spaces() {
    assert_eq!(basis_ring(SpaceKind::H1, 1).unwrap().dim(), 0);
    assert_eq!(basis_ring(SpaceKind::H1, 4).unwrap().dim(), 1);
    for r in 1..=4u32 {
        let ring = basis_ring(SpaceKind::HDivFull, r).unwrap();
        assert_eq!(ring.dim(), 3 * p3(r as i64) - 4 * p2(r as i64));
        let rt = basis_ring(SpaceKind::HDivTrimmed, r).unwrap();
        let ru = r as usize;
        assert_eq!(rt.dim(), (ru - 1) * ru * (ru + 1) / 2);
        for f in ring.functions() {
            for face in 0..4 {
                let t = trace(&f, SubSimplex::Face(face), TraceKind::Normal);
                assert!(t.max_abs_coeff() < 1e-11);
            }
        }
    }
    // Normal trace at face quadrature points directly.
    let ring = basis_ring(SpaceKind::HDivTrimmed, 3).unwrap();
    let rule = build_rule(2, 6).unwrap();
    for f in ring.functions() {
        for face in 0..4 {
            let p = reference_face(face);
            for q in &rule.points {
                let v = f.eval(p.point(q[0], q[1]));
                let n: f64 = (0..3).map(|i| v[i] * p.nu[i]).sum();
                assert!(n.abs() < 1e-12, "{n:e}");
            }
        }
    }
    let ned = basis_ring(SpaceKind::HCurlTrimmed, 3).unwrap();
    assert_eq!(ned.dim(), 3);
    for f in ned.functions() {
        for face in 0..4 {
            let t = trace(&f, SubSimplex::Face(face), TraceKind::TangentialFace);
            assert!(t.max_abs_coeff() < 1e-11);
        }
    }
}

#[test]
fn curl_image_and_complement_counts() {
    for (r, k) in [(0u32, 0usize), (1, 0), (2, 9), (3, 33)] {
        assert_eq!(curl_image_basis(r).unwrap().dim(), k, "r={r}");
        assert_eq!(complement_g_basis(r).unwrap().dim(), k, "r={r}");
        assert_eq!(aux_count(r), k);
    }
    for r in 4..=5u32 {
        let ru = r as usize;
        assert_eq!(curl_image_basis(r).unwrap().dim(), (2 * ru + 5) * ru * (ru - 1) / 2);
    }
    // ĝ is orthogonal to gradients and completes them.
    for r in 1..=3u32 {
        let g = complement_g_rows(r).unwrap();
        let s = scalar_orthonormal(r).unwrap();
        let grads: Vec<PolyField> = s.functions().iter().map(|f| f.grad().with_degree(r - 1)).collect();
        let gb = PolyBasis::from_fields(&grads, 3, SpaceTag::Custom("grads".into()));
        if g.dim() > 0 {
            let c = coordinates_in(&g, &gb);
            assert!(c.max_abs() < 1e-12, "r={r} {:e}", c.max_abs());
        }
        let mut all = gb.functions();
        all.extend(g.functions());
        let union = PolyBasis::from_fields(&all, 3, SpaceTag::Custom("union".into()));
        assert_eq!(union.orthonormalized(SpaceTag::Custom("u".into())).dim(), 3 * p3(r as i64 - 1));
    }
}

#[test]
fn differentiation_identities() {
    let x = PolyField::stack(&[PolyField::coordinate(0), PolyField::coordinate(1), PolyField::coordinate(2)]);
    let d = differentiate(&x, DiffOp::Div).unwrap();
    assert!((d.eval([0.3, 0.1, 0.2])[0] - 3.0).abs() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let p = random_field(&mut rng, 1, 3);
        let cg = p.grad().curl();
        assert!(cg.max_abs_coeff() < 1e-12);
        let w = random_field(&mut rng, 9, 3);
        assert!(w.curl().div().max_abs_coeff() < 1e-12);
    }
    assert!(differentiate(&PolyField::zero(2, 1), DiffOp::Div).is_err());
}

#[test]
fn partial_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_field(&mut rng, 2, 4);
    let x = [0.2, 0.3, 0.1];
    let jac = p.jacobian(x);
    for j in 0..3 {
        let h = 1e-6;
        let mut xp = x;
        let mut xm = x;
        xp[j] += h;
        xm[j] -= h;
        let fd: Vec<f64> = p.eval(xp).iter().zip(p.eval(xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let pj = p.partial(j).eval(x);
        for c in 0..2 {
            assert!((fd[c] - pj[c]).abs() < 1e-7);
            assert!((jac[3 * c + j] - pj[c]).abs() < 1e-12);
        }
    }
    let xp = p.mul_coordinate(1);
    let v = p.eval(x);
    let w = xp.eval(x);
    assert!((w[0] - x[1] * v[0]).abs() < 1e-13);
}

#[test]
fn exact_sequence_ranks() {
    for r in 0..=3u32 {
        let rt = basis_full(SpaceKind::HDivTrimmed, r + 1).unwrap();
        let divs = rt.map(SpaceTag::Custom("div".into()), |f| f.div());
        assert_eq!(divs.orthonormalized(SpaceTag::Custom("d".into())).dim(), p3(r as i64));
        let ned = basis_full(SpaceKind::HCurlTrimmed, r + 2).unwrap();
        let curls = ned.map(SpaceTag::Custom("curl".into()), |f| f.curl().with_degree(r + 1));
        let bdm = basis_full(SpaceKind::HDivFull, r + 1).unwrap();
        let mut all = bdm.functions();
        all.extend(curls.functions());
        let union = PolyBasis::from_fields(&all, 3, SpaceTag::Custom("u".into()));
        assert_eq!(union.orthonormalized(SpaceTag::Custom("u".into())).dim(), bdm.dim(), "r={r}");
        // ... and into the trimmed space one order up.
        let rt2 = basis_full(SpaceKind::HDivTrimmed, r + 2).unwrap();
        let curls2 = ned.map(SpaceTag::Custom("curl".into()), |f| f.curl());
        let mut all = rt2.functions();
        all.extend(curls2.functions());
        let union = PolyBasis::from_fields(&all, 3, SpaceTag::Custom("u".into()));
        assert_eq!(union.orthonormalized(SpaceTag::Custom("u".into())).dim(), rt2.dim(), "r={r}");
    }
}

#[test]
fn trimmed_normal_trace_degree() {
    for r in 1..=4u32 {
        let rt = basis_full(SpaceKind::HDivTrimmed, r).unwrap();
        for f in rt.functions() {
            for face in 0..4 {
                let t = trace(&f, SubSimplex::Face(face), TraceKind::Normal);
                assert!(t.fit_residual < 1e-11);
                if let Some(d) = t.effective_degree(1e-9) {
                    assert!(d < r, "r={r} degree {d}");
                }
            }
        }
    }
    let c = PolyField::constant(&[1.0, 2.0, 3.0]);
    for face in 0..4 {
        let t = trace(&c, SubSimplex::Face(face), TraceKind::Normal);
        let n = FaceFrame::reference(face).normal;
        let expect = n[0] + 2.0 * n[1] + 3.0 * n[2];
        assert!((t.eval([0.1, 0.05])[0] - expect).abs() < 1e-13);
    }
}

#[test]
fn face_frame_is_right_handed() {
    for f in 0..4 {
        let fr = FaceFrame::reference(f);
        let [t1, t2] = fr.tangents;
        let n = fr.normal;
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        assert!(dot(t1, n).abs() < 1e-15 && dot(t2, n).abs() < 1e-15 && dot(t1, t2).abs() < 1e-15);
        let c = [t1[1] * t2[2] - t1[2] * t2[1], t1[2] * t2[0] - t1[0] * t2[2], t1[0] * t2[1] - t1[1] * t2[0]];
        assert!((dot(c, n) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn variable_spaces() {
    let uni = OrderSignature::uniform(2);
    assert_eq!(
        basis_variable(SpaceKind::HDivFull, uni).unwrap().dim(),
        basis_full(SpaceKind::HDivFull, 2).unwrap().dim()
    );
    let sig = OrderSignature {
        tet: 2,
        faces: [1; 4],
        edges: [1; 6],
    };
    let b = basis_variable(SpaceKind::HDivFull, sig).unwrap();
    assert_eq!(b.dim(), 30 - 12);
    for f in b.functions() {
        for face in 0..4 {
            let t = trace(&f, SubSimplex::Face(face), TraceKind::Normal);
            assert!(t.effective_degree(1e-9).unwrap_or(0) <= 1);
        }
    }
    let zero_edges = OrderSignature {
        tet: 3,
        faces: [1; 4],
        edges: [0; 6],
    };
    let n = basis_variable(SpaceKind::HCurlTrimmed, zero_edges).unwrap();
    assert_eq!(n.dim(), nedelec_dofs(&zero_edges));
    for f in n.functions() {
        for e in 0..6 {
            let t = trace(&f, SubSimplex::Edge(e), TraceKind::TangentialEdge);
            assert!(t.max_abs_coeff() < 1e-10, "edge {:?}", LOCAL_EDGES[e]);
        }
    }
    let bad = OrderSignature {
        tet: 1,
        faces: [2, 1, 1, 1],
        edges: [1; 6],
    };
    assert!(matches!(
        basis_variable(SpaceKind::HDivFull, bad),
        Err(PolySpaceError::NonMonotoneOrder(_))
    ));
}

#[test]
fn face_moment_basis_is_orthonormal() {
    let rule = build_rule(2, 2 * FACE_MAX_DEGREE).unwrap();
    let mu = FaceMomentBasis::get();
    let n = dim_p2(FACE_MAX_DEGREE as i64);
    let mut g = DenseMatrix::zeros(n, n);
    for (x, w) in rule.iter() {
        let m = mu.eval(FACE_MAX_DEGREE, x[0], x[1]);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += w * m[i] * m[j];
            }
        }
    }
    let defect = g.sub(&DenseMatrix::identity(n)).max_abs();
    assert!(defect < 1e-11, "{defect:e}");
    let e = build_rule(1, 20).unwrap();
    let mut ge = DenseMatrix::zeros(8, 8);
    for (x, w) in e.iter() {
        let l = edge_moment_basis(7, x[0]);
        for i in 0..8 {
            for j in 0..8 {
                ge[(i, j)] += w * l[i] * l[j];
            }
        }
    }
    assert!(ge.sub(&DenseMatrix::identity(8)).max_abs() < 1e-13);
}

fn random_signature(seed: u64, max: u32) -> OrderSignature {
    let m = unit_cube_mesh(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<u32> = (0..m.num_tets()).map(|_| rng.gen_range(0..=max)).collect();
    let om = OrderMap::from_tet_orders(&m, &orders).unwrap();
    om.signature(&m, rng.gen_range(0..m.num_tets()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]
    #[test]
    fn variable_dimensions_match_dof_counts(seed in 0u64..10_000) {
        let sig = random_signature(seed, 3);
        prop_assert_eq!(basis_variable(SpaceKind::HCurlTrimmed, sig).unwrap().dim(), nedelec_dofs(&sig));
        prop_assert_eq!(basis_variable(SpaceKind::HDivTrimmed, sig).unwrap().dim(), rt_dofs(&sig));
        prop_assert_eq!(basis_variable(SpaceKind::HDivFull, sig).unwrap().dim(), bdm_dofs(&sig));
        let b = basis_variable(SpaceKind::HDivFull, sig).unwrap();
        let rank = numerical_rank(&b.coeffs, 1e-10);
        prop_assert_eq!(rank, b.dim());
        for f in b.functions() {
            for face in 0..4 {
                let t = trace(&f, SubSimplex::Face(face), TraceKind::Normal);
                prop_assert!(t.effective_degree(1e-9).unwrap_or(0) <= sig.faces[face]);
            }
        }
    }

    #[test]
    fn curl_grad_vanishes(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_field(&mut rng, 3, 4);
        prop_assert!(p.grad().curl().max_abs_coeff() < 1e-11);
    }
}
