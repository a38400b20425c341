//! Acceptance suite: one PASS/FAIL line per criterion, details indented below it.
//! Runs without the libtest harness so the report is always printed; exits 1 on any FAIL.

use std::time::Instant;

use afw3d::assembly::{build_dof_map, error_norms, solve_case, ManufacturedCase};
use afw3d::interp::{
    interp_p1minus_element, interp_p2minus_element, interp_physical, moment_system, select_t, target_space, FnField, OnTet,
    Projector,
};
use afw3d::linalg::{null_space, numerical_rank, DenseMatrix, QrFactor};
use afw3d::mesh::{build_complex, local_face_edges, refine_uniform, unit_cube_mesh, OrderMap, OrderSignature, SimplicialMesh};
use afw3d::polyspace::{
    curl_image_basis, matrix_sandwich, num_monomials, reference_face, trace, FaceFrame, PolyField, SubSimplex, TraceKind,
};
use afw3d::quadrature::rule_for;
use afw3d::stability_lab::{
    commuting_diagram_suite, convergence_study, drift, infsup_constant, kernel_coercivity, stability_study, OrderPolicy,
    StudyOptions,
};
use afw3d::tensor_ops::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    /// Records one sub-check; the criterion fails if any sub-check does.
    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("info {line}"));
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("algebraic identities", algebraic_identities),
        ("div S1 W + S2 curl W = 0", differential_identity),
        ("normal trace of S1 W", normal_trace_identity),
        ("curl image dimensions", curl_image_dimensions),
        ("moment systems", moment_systems),
        ("commuting diagrams", commuting_diagrams),
        ("physical route vs pullback", pullback_consistency),
        ("discrete stability", discrete_stability),
        ("convergence", convergence),
        ("patch test", patch_test),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {:>2}  {name:<28} {}  ({secs:.1} s)", i + 1, if v.pass { "PASS" } else { "FAIL" });
        for l in &v.lines {
            println!("    {l}");
        }
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_mat(rng: &mut ChaCha8Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

fn random_poly(rng: &mut ChaCha8Rng, ncomp: usize, deg: u32) -> PolyField {
    let n = ncomp * num_monomials(deg);
    PolyField::from_coeffs(ncomp, deg, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn algebraic_identities() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200;
    let (mut inv, mut adj, mut vec) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let (w, q) = (random_mat(&mut rng), random_mat(&mut rng));
        inv = inv.max((s1_inv(&s1(&w)) - w).max_abs());
        adj = adj.max((s1(&w).frob(&q) - w.frob(&s1(&q))).abs());
        let skew = vec_of_antisym(&(w.transpose() - w)).unwrap();
        vec = vec.max(norm3(sub3(s2(&w), skew)));
    }
    v.check(inv <= 1e-13, format!("s1_inv(s1 W) = W on {n} matrices: max error {inv:.2e}"));
    v.check(adj <= 1e-13, format!("S1 W : Q = W : S1 Q on {n} pairs: max error {adj:.2e}"));
    v.check(vec <= 1e-13, format!("S2 U = vec(Uᵀ − U) on {n} matrices: max error {vec:.2e}"));
    v
}

fn differential_identity() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let w = random_poly(&mut rng, 9, k % 4);
        let sum = w.s1().div().add(&w.curl().s2());
        worst = worst.max(sum.max_abs_coeff());
    }
    v.check(worst <= 1e-12, format!("20 matrix fields of degree 0..3: max coefficient {worst:.2e}"));
    v
}

/// Barycentric coordinate of reference vertex `f`, which vanishes on face `f`, times `q`.
fn times_barycentric(q: &PolyField, f: usize) -> PolyField {
    if f == 0 {
        let mut out = q.with_degree(q.degree + 1);
        for j in 0..3 {
            out = out.sub(&q.mul_coordinate(j));
        }
        out
    } else {
        q.mul_coordinate(f - 1)
    }
}

fn normal_trace_identity() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut tang, mut normal) = (0.0f64, 0.0f64);
    for case in 0..10 {
        let f = case % 4;
        let n = FaceFrame::reference(f).normal;
        // Rows parallel to n on face f; arbitrary elsewhere.
        let a = random_poly(&mut rng, 3, 2).with_degree(3);
        let outer = DenseMatrix::from_fn(9, 3, |ij, c| if ij / 3 == c { n[ij % 3] } else { 0.0 });
        let w = a.map_components(&outer).add(&times_barycentric(&random_poly(&mut rng, 9, 2), f));
        for i in 0..3 {
            let row = PolyField::stack(&[w.component(3 * i), w.component(3 * i + 1), w.component(3 * i + 2)]);
            tang = tang.max(trace(&row, SubSimplex::Face(f), TraceKind::TangentialFace).max_abs_coeff());
        }
        let s = w.s1();
        let param = reference_face(f);
        let jac = norm3(cross(param.ds, param.dt));
        let mut norm2 = 0.0;
        for (y, wt) in rule_for(2, 8).unwrap().iter() {
            let sn = Mat3::from_slice(&s.eval(param.point(y[0], y[1]))).mul_vec(n);
            norm2 += wt * jac * dot3(sn, sn);
        }
        normal = normal.max(norm2.sqrt());
    }
    v.check(tang <= 1e-12, format!("tangential traces of the 10 test fields vanish: {tang:.2e}"));
    v.check(normal <= 1e-11, format!("max ‖S1 W·n‖ on the face: {normal:.2e}"));
    v
}

/// `dim curl` of the trimmed Nédélec fields of degree `r + 1` with vanishing tangential
/// trace, by brute force: span from monomials, constrain at face points, rank of the curls.
fn brute_force_curl_rank(r: u32) -> usize {
    let s = r + 1;
    let mut span = Vec::new();
    for m in 0..num_monomials(s - 1) {
        let mut c = vec![0.0; num_monomials(s - 1)];
        c[m] = 1.0;
        let mono = PolyField::from_coeffs(1, s - 1, c);
        let zero = PolyField::zero(1, s - 1);
        for k in 0..3 {
            let mut parts = vec![zero.clone(), zero.clone(), zero.clone()];
            parts[k] = mono.clone();
            let p = PolyField::stack(&parts);
            let (a, b, c) = (p.component(0), p.component(1), p.component(2));
            let xp = PolyField::stack(&[
                b.mul_coordinate(2).sub(&c.mul_coordinate(1)),
                c.mul_coordinate(0).sub(&a.mul_coordinate(2)),
                a.mul_coordinate(1).sub(&b.mul_coordinate(0)),
            ]);
            span.push(p.with_degree(s));
            span.push(xp);
        }
    }
    let mut rows = Vec::new();
    for f in 0..4 {
        let (param, frame) = (reference_face(f), FaceFrame::reference(f));
        for (y, _) in rule_for(2, 2 * s).unwrap().iter() {
            let x = param.point(y[0], y[1]);
            for t in frame.tangents {
                rows.push(span.iter().map(|p| dot3(t, p.eval(x)[..3].try_into().unwrap())).collect::<Vec<f64>>());
            }
        }
    }
    let constraints = DenseMatrix::from_rows(&rows).unwrap();
    let z = null_space(&constraints, 1e-10);
    let curls: Vec<Vec<f64>> = span.iter().map(|p| p.curl().with_degree(s).coeffs).collect();
    let k = DenseMatrix::from_fn(curls[0].len(), span.len(), |i, j| curls[j][i]);
    // Pivots are judged against the scale of the curl itself: with an empty ring space
    // K·Z is pure round-off, which a self-relative rank would count as full.
    let kz = k.matmul(&z);
    QrFactor::new(&kz, true).r_diag().iter().filter(|d| d.abs() > 1e-10 * k.max_abs()).count()
}

fn curl_image_dimensions() -> Verdict {
    let mut v = Verdict::new();
    for r in 1..=4u32 {
        let ru = r as usize;
        let formula = (2 * ru + 5) * ru * (ru - 1) / 2;
        let brute = 3 * brute_force_curl_rank(r);
        let built = curl_image_basis(r).map(|b| b.dim()).unwrap_or(usize::MAX);
        v.check(
            brute == formula && built == formula,
            format!("r={r}: formula {formula}, brute-force rank {brute}, library basis {built}"),
        );
    }
    v
}

fn random_signature(rng: &mut ChaCha8Rng, r: u32) -> OrderSignature {
    let faces: [u32; 4] = std::array::from_fn(|_| rng.gen_range(0..=r));
    let mut edges = [u32::MAX; 6];
    for (f, &q) in faces.iter().enumerate() {
        for e in local_face_edges(f) {
            edges[e] = edges[e].min(q);
        }
    }
    for e in &mut edges {
        *e = rng.gen_range(0..=*e);
    }
    OrderSignature { tet: r, faces, edges }
}

fn random_tet(rng: &mut ChaCha8Rng) -> SimplicialMesh {
    loop {
        let v: Vec<Vec3> = (0..4).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        if let Ok(m) = build_complex(v, &[[0, 1, 2, 3]]) {
            if m.affine_of(0).shape_ratio() < 12.0 {
                return m;
            }
        }
    }
}

fn max_diff(a: &PolyField, b: &PolyField) -> f64 {
    let d = a.degree.max(b.degree);
    a.with_degree(d).sub(&b.with_degree(d)).max_abs_coeff()
}

fn moment_systems() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for r in 0..=3u32 {
        let t = match select_t(r) {
            Ok(t) => t,
            Err(e) => {
                v.check(false, format!("r={r}: no admissible t ({e})"));
                continue;
            }
        };
        let mut min_rank_gap = usize::MAX;
        let mut singular = 0;
        let mut worst = [0.0f64; 2];
        let mut members = [0usize; 2];
        for _ in 0..5 {
            let sig = random_signature(&mut rng, r);
            let mesh = random_tet(&mut rng);
            let map = mesh.affine_of(0);
            for (k, p) in [Projector::TwoMinus, Projector::OneMinus].into_iter().enumerate() {
                let Ok(sys) = moment_system(p, sig) else {
                    singular += 1;
                    continue;
                };
                let n = sys.matrix.rows();
                let rank = numerical_rank(&sys.matrix, 1e-12);
                min_rank_gap = min_rank_gap.min(n - rank);
                if rank < n || sys.t != t {
                    singular += 1;
                }
                let target = target_space(p, sig).unwrap();
                let fwd = match p {
                    Projector::TwoMinus => matrix_sandwich(&map.a_inv.transpose(), &map.a.transpose()),
                    Projector::OneMinus => matrix_sandwich(&map.a, &map.a_inv),
                };
                for _ in 0..2 {
                    let c: Vec<f64> = (0..target.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let phys = target.combine(&c).map_components(&fwd);
                    let on = OnTet { poly: &phys, map: &map };
                    let out = match p {
                        Projector::TwoMinus => interp_p2minus_element(&map, sig, &on, None),
                        Projector::OneMinus => interp_p1minus_element(&map, sig, &on, None),
                    };
                    let err = out.map_or(f64::INFINITY, |o| max_diff(&o, &phys) / phys.max_abs_coeff().max(1e-300));
                    worst[k] = worst[k].max(err);
                    members[k] += 1;
                }
            }
        }
        v.check(singular == 0, format!("r={r}: t = {t}, 5 signatures x 2 projectors, {singular} singular systems"));
        v.check(
            worst[0] <= 1e-10 && worst[1] <= 1e-10,
            format!(
                "r={r}: reproduction of {}+{} members, max relative error {:.2e} (2-) {:.2e} (1-)",
                members[0], members[1], worst[0], worst[1]
            ),
        );
    }
    v
}

fn commuting_diagrams() -> Verdict {
    let mut v = Verdict::new();
    let mesh = unit_cube_mesh(2);
    let policy = OrderPolicy::Random { lo: 0, hi: 2, seed: 42 };
    let orders = policy.orders_for(&mesh).unwrap();
    match commuting_diagram_suite(&mesh, &orders, 7, 42) {
        Ok(d) => {
            v.note(format!("{} tets, orders {}, {} fields", mesh.num_tets(), policy.label(), d.fields));
            v.check(d.fields == 10, format!("sampled fields: {}", d.fields));
            v.check(d.div_full <= 1e-8, format!("div of the full-order interpolant: {:.2e}", d.div_full));
            v.check(d.div_trimmed <= 1e-8, format!("div of the trimmed projection: {:.2e}", d.div_trimmed));
            v.check(d.s1_stabilized <= 1e-8, format!("S1 with the stabilised projection: {:.2e}", d.s1_stabilized));
        }
        Err(e) => v.check(false, format!("diagram suite failed: {e}")),
    }
    v
}

/// `U_k(x) = a_k sin(b_k · x + c_k) + d_k`, with its exact Jacobian.
fn smooth_field(rng: &mut ChaCha8Rng, ncomp: usize) -> FnField {
    let params: Vec<(f64, Vec3, f64, f64)> = (0..ncomp)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
                rng.gen_range(0.0..3.0),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let p2 = params.clone();
    FnField::new(
        ncomp,
        move |x| params.iter().map(|(a, b, c, d)| a * (dot3(*b, x) + c).sin() + d).collect(),
        move |x| {
            p2.iter()
                .flat_map(|(a, b, c, _)| {
                    let g = a * (dot3(*b, x) + c).cos();
                    [g * b[0], g * b[1], g * b[2]]
                })
                .collect()
        },
    )
}

fn pullback_consistency() -> Verdict {
    let mut v = Verdict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 2];
    for _ in 0..10 {
        let r = rng.gen_range(0..=2);
        let mesh = random_tet(&mut rng);
        let map = mesh.affine_of(0);
        let sig = random_signature(&mut rng, r);
        let u = smooth_field(&mut rng, 9);
        for (k, p) in [Projector::TwoMinus, Projector::OneMinus].into_iter().enumerate() {
            let a = match p {
                Projector::TwoMinus => interp_p2minus_element(&map, sig, &u, None),
                Projector::OneMinus => interp_p1minus_element(&map, sig, &u, None),
            };
            let b = interp_physical(p, &map, mesh.tet_vertices(0), sig, &u);
            let err = match (a, b) {
                (Ok(a), Ok(b)) => max_diff(&a, &b) / a.max_abs_coeff().max(1.0),
                _ => f64::INFINITY,
            };
            worst[k] = worst[k].max(err);
        }
    }
    v.check(worst[0] <= 1e-10, format!("10 random tets, 2- projection: max relative difference {:.2e}", worst[0]));
    v.check(worst[1] <= 1e-10, format!("10 random tets, 1- projection: max relative difference {:.2e}", worst[1]));
    v
}

fn discrete_stability() -> Verdict {
    let mut v = Verdict::new();
    let meshes = [unit_cube_mesh(1), unit_cube_mesh(2)];
    for policy in [OrderPolicy::Uniform(0), OrderPolicy::Uniform(1), OrderPolicy::Mixed] {
        let mut betas = Vec::new();
        for mesh in &meshes {
            let orders = policy.orders_for(mesh).unwrap();
            match infsup_constant(mesh, &orders) {
                Ok(b) => betas.push(b.beta),
                Err(e) => v.check(false, format!("{}: inf-sup failed: {e}", policy.label())),
            }
            for lambda in [1.0, 1e4] {
                // The kernel is computed densely; larger systems would exceed the time budget.
                let ns = build_dof_map(mesh, &orders).unwrap().n_stress();
                if ns > 3000 {
                    v.note(format!("{} {} tets λ/μ={lambda:e}: kernel skipped ({ns} stress dofs)", policy.label(), mesh.num_tets()));
                    continue;
                }
                let material = Material { lame_lambda: lambda, lame_mu: 1.0 };
                match kernel_coercivity(mesh, &orders, material) {
                    Ok(k) => v.check(
                        k.ratio >= k.compliance_bound * (1.0 - 1e-9),
                        format!(
                            "{} {} tets λ/μ={lambda:e}: kernel ratio {:.6e} vs bound {:.6e} (kernel dim {})",
                            policy.label(),
                            mesh.num_tets(),
                            k.ratio,
                            k.compliance_bound,
                            k.kernel_dim
                        ),
                    ),
                    Err(e) => v.check(false, format!("{} λ/μ={lambda:e}: kernel failed: {e}", policy.label())),
                }
            }
        }
        if betas.len() == 2 {
            let d = drift(&betas);
            v.check(
                betas.iter().all(|&b| b > 1e-6) && d <= 0.2,
                format!("{}: β n=1 {:.6}, n=2 {:.6}, drift {d:.4} (limit 0.2)", policy.label(), betas[0], betas[1]),
            );
        }
    }
    v
}

fn convergence() -> Verdict {
    let mut v = Verdict::new();
    let case = ManufacturedCase::sine(Material { lame_lambda: 1.0, lame_mu: 1.0 });
    let base = unit_cube_mesh(1);
    for r in [0u32, 1] {
        let rep = match convergence_study(&case, &base, &OrderPolicy::Uniform(r), 3) {
            Ok(rep) => rep,
            Err(e) => {
                v.check(false, format!("r={r}: study failed: {e}"));
                continue;
            }
        };
        for row in &rep.rows {
            v.note(format!(
                "r={r} {:>4} tets: total {:.4e} disp {:.4e} rate_total {} rate_disp {} quasi-opt {:.4}",
                row.tets,
                row.total,
                row.disp_l2,
                row.rate_total.map_or("-".into(), |x| format!("{x:.4}")),
                row.rate_disp.map_or("-".into(), |x| format!("{x:.4}")),
                row.quasi_optimality
            ));
        }
        let last = rep.rows.last().unwrap();
        if r == 0 {
            let rate = last.rate_total.unwrap_or(f64::NAN);
            v.check(rate >= 0.9, format!("r=0 total-error rate on the finest step {rate:.4} (limit 0.9)"));
        } else {
            let rate = last.rate_disp.unwrap_or(f64::NAN);
            v.check(rate >= 1.9, format!("r=1 displacement rate on the finest step {rate:.4} (limit 1.9)"));
        }
        let d = rep.quasi_optimality_drift();
        v.check(d <= 0.3, format!("r={r} quasi-optimality drift {d:.4} (limit 0.3)"));
    }
    // The structured n-subdivided cube family for comparison; not part of the verdict.
    let totals: Vec<f64> = [2, 4]
        .map(|n| {
            let mesh = unit_cube_mesh(n);
            let (_, sol) = solve_case(&mesh, &OrderMap::uniform(&mesh, 0), &case).unwrap();
            error_norms(&mesh, &sol, &case).unwrap().total()
        })
        .into();
    v.note(format!("r=0 on the structured n=2,4 cubes: total-error rate {:.4}", (totals[0] / totals[1]).log2()));
    v
}

fn patch_test() -> Verdict {
    let mut v = Verdict::new();
    let g = Mat3([[0.2, 0.1, 0.0], [0.1, -0.3, 0.05], [0.0, 0.05, 0.4]]);
    let cube2 = unit_cube_mesh(2);
    let red = refine_uniform(&unit_cube_mesh(1));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let tet = random_tet(&mut rng);
    let cases: Vec<(String, SimplicialMesh, OrderPolicy)> = vec![
        ("cube n=1".into(), unit_cube_mesh(1), OrderPolicy::Uniform(0)),
        ("cube n=1".into(), unit_cube_mesh(1), OrderPolicy::Uniform(1)),
        ("cube n=1".into(), unit_cube_mesh(1), OrderPolicy::Uniform(2)),
        ("cube n=2".into(), cube2.clone(), OrderPolicy::Mixed),
        ("cube n=2".into(), cube2, OrderPolicy::Random { lo: 0, hi: 2, seed: 4 }),
        ("red-refined cube".into(), red, OrderPolicy::Random { lo: 0, hi: 1, seed: 5 }),
        ("random tet".into(), tet, OrderPolicy::Uniform(1)),
    ];
    for (name, mesh, policy) in &cases {
        let orders = policy.orders_for(mesh).unwrap();
        let volume: f64 = (0..mesh.num_tets()).map(|t| mesh.volume(t)).sum();
        for lambda in [1.0, 1e4] {
            let case = ManufacturedCase::affine(Material { lame_lambda: lambda, lame_mu: 1.0 }, g);
            let sigma = Mat3::from_fn(|i, j| g[(i, j)] + g[(j, i)] + if i == j { lambda * g.trace() } else { 0.0 });
            let scale = sigma.frob(&sigma).sqrt() * volume.sqrt();
            let err = solve_case(mesh, &orders, &case)
                .and_then(|(_, sol)| error_norms(mesh, &sol, &case))
                .map_or(f64::INFINITY, |e| e.stress_hdiv / scale);
            v.check(err <= 1e-10, format!("{name} {} λ/μ={lambda:e}: relative stress error {err:.2e}", policy.label()));
        }
    }
    v
}

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let run = || -> String {
        let policy = OrderPolicy::Random { lo: 0, hi: 1, seed: 9 };
        let mesh = unit_cube_mesh(1);
        let levels = vec![(mesh.clone(), policy.orders_for(&mesh).unwrap())];
        let opts = StudyOptions {
            diagram_samples: Some(2),
            seed: 9,
            ..Default::default()
        };
        let material = Material { lame_lambda: 1.0, lame_mu: 1.0 };
        let stab = stability_study(&levels, &policy, material, &opts).unwrap();
        let conv = convergence_study(&ManufacturedCase::sine(material), &mesh, &policy, 2).unwrap();
        [stab.to_csv(), stab.to_json(), conv.to_csv(), conv.to_json()].concat()
    };
    let (a, b) = (run(), run());
    v.check(a == b, format!("two runs with seed 9: {} bytes each, identical: {}", a.len(), a == b));
    v
}
