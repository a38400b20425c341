use afw3d::mesh::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn single_reference_tet_counts() {
    let m = reference_tet_mesh();
    assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces(), m.num_tets()), (4, 6, 4, 1));
    let a = m.affine_of(0);
    assert_eq!(a.a, afw3d::tensor_ops::Mat3::IDENTITY);
    assert_eq!(a.b, [0.0; 3]);
}

#[test]
fn scaled_tet_affine_map() {
    let m = build_complex(
        vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
        &[[0, 1, 2, 3]],
    )
    .unwrap();
    let a = m.affine_of(0);
    assert_eq!(a.a, afw3d::tensor_ops::Mat3::IDENTITY.scale(2.0));
    assert_eq!(a.det, 8.0);
}

#[test]
fn random_tet_maps_reference_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let refv = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..20 {
        let v: Vec<[f64; 3]> = (0..4).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let Ok(m) = build_complex(v.clone(), &[[0, 1, 2, 3]]) else { continue };
        let a = m.affine_of(0);
        for (k, r) in refv.iter().enumerate() {
            let x = a.to_physical(*r);
            for i in 0..3 {
                assert!((x[i] - v[k][i]).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn kuhn_cube_counts() {
    let m = unit_cube_mesh(1);
    assert_eq!((m.num_vertices(), m.num_edges(), m.num_faces(), m.num_tets()), (8, 19, 18, 6));
    assert_eq!(m.euler_characteristic(), 1);
    let m2 = unit_cube_mesh(2);
    assert_eq!(m2.num_tets(), 48);
    assert!((0..48).all(|t| m2.volume(t) > 0.0));
    assert!((m2.total_volume() - 1.0).abs() < 1e-14);
    assert_eq!(m2.euler_characteristic(), 1);
}

#[test]
fn shared_face_and_orientation() {
    let m = build_complex(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
        &[[0, 1, 2, 3], [1, 2, 3, 4]],
    )
    .unwrap();
    assert_eq!(m.interior_faces().count(), 1);
    let m = unit_cube_mesh(2);
    for f in m.interior_faces() {
        let ts = &m.face_tets[f];
        let s0 = m.tet_face_signs[ts[0]][m.local_face_of(ts[0], f).unwrap()];
        let s1 = m.tet_face_signs[ts[1]][m.local_face_of(ts[1], f).unwrap()];
        assert_eq!(s0, -s1);
    }
    for f in 0..m.num_faces() {
        assert!(matches!(m.face_tets[f].len(), 1 | 2));
    }
}

#[test]
fn build_errors() {
    let flat = build_complex(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        &[[0, 1, 2, 3]],
    );
    assert!(matches!(flat, Err(MeshError::DegenerateTet { .. })));
    let v = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 1.0, 1.0],
    ];
    let nm = build_complex(v, &[[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]]);
    assert!(matches!(nm, Err(MeshError::NonManifoldFace { .. })));
}

#[test]
fn refinement_preserves_volume_and_counts() {
    let m = reference_tet_mesh();
    let (r, parents) = refine_uniform_with_parents(&m);
    assert_eq!(r.num_tets(), 8);
    assert!(parents.iter().all(|&p| p == 0));
    assert!((r.total_volume() - m.total_volume()).abs() < 1e-13 * m.total_volume());
    let c = refine_uniform(&unit_cube_mesh(1));
    assert_eq!(c.num_tets(), 48);
    assert_eq!(c.euler_characteristic(), 1);
    let (c2, parents) = refine_uniform_with_parents(&c);
    for t in 0..c.num_tets() {
        let vol: f64 = (0..c2.num_tets()).filter(|&k| parents[k] == t).map(|k| c2.volume(k)).sum();
        assert!((vol - c.volume(t)).abs() < 1e-13 * c.volume(t));
    }
    assert_eq!(refine_uniform(&c), c2);
}

#[test]
fn refinement_shape_ratio_settles() {
    let mut m = reference_tet_mesh();
    let mut ratios = Vec::new();
    for _ in 0..3 {
        m = refine_uniform(&m);
        ratios.push(m.max_shape_ratio());
    }
    for w in ratios.windows(2) {
        assert!((w[1] - w[0]).abs() < 1e-9 * w[0], "{ratios:?}");
    }
}

#[test]
fn mesh_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = unit_cube_mesh(2);
    for v in m.vertices.iter_mut() {
        for c in v.iter_mut() {
            *c += rng.gen_range(-0.01..0.01);
        }
    }
    let m = build_complex(m.vertices.clone(), &m.tets).unwrap();
    let orders: Vec<u32> = (0..m.num_tets()).map(|t| (t % 3) as u32).collect();
    let text = write_mesh(&m, Some(&orders));
    let (back, o) = read_mesh(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(o.unwrap(), orders);
    assert_eq!(write_mesh(&back, Some(&orders)), text);
    assert!(read_mesh("nonsense").is_err());
    assert!(read_mesh(&text.replace("tets 48", "tets 49")).is_err());
}

#[test]
fn order_map_validation() {
    let m = unit_cube_mesh(1);
    assert!(validate_order_map(&m, &OrderMap::uniform(&m, 2)).is_ok());
    let mut bad = OrderMap::uniform(&m, 1);
    bad.face[m.tet_faces[0][0]] = 2;
    let rep = validate_order_map(&m, &bad);
    assert!(rep
        .violations
        .iter()
        .any(|v| matches!(v, OrderViolation::FaceAboveTet { tet: 0, .. })));
    assert!(OrderMap::from_tet_orders(&m, &[0, 1]).is_err());
    assert!(OrderMap::from_tet_orders(&m, &[9, 0, 0, 0, 0, 0]).is_err());
}

proptest! {
    #[test]
    fn min_rule_is_monotone(seed in 0u64..500) {
        let m = unit_cube_mesh(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orders: Vec<u32> = (0..m.num_tets()).map(|_| rng.gen_range(0..=4)).collect();
        let om = OrderMap::from_tet_orders(&m, &orders).unwrap();
        prop_assert!(validate_order_map(&m, &om).is_ok());
        for t in 0..m.num_tets() {
            prop_assert!(om.signature(&m, t).is_monotone());
        }
    }
}
