use std::f64::consts::PI;

use crate::interp::FnField;
use crate::tensor_ops::{Mat3, Material, Vec3};

/// Exact solution of the three-field problem: displacement, stress `2με(u) + λ tr ε(u) I`,
/// rotation `vec(skw ∇u)`, load `div σ`, and whether the displacement has a nonzero trace
/// (in which case it enters as boundary data).
pub struct ManufacturedCase {
    pub name: String,
    pub material: Material,
    pub displacement: FnField,
    pub stress: FnField,
    pub rotation: FnField,
    pub load: FnField,
    pub boundary_data: bool,
}

/// `∂^α Π_i sin(π x_i)`.
fn sine_derivative(x: Vec3, alpha: [u32; 3]) -> f64 {
    (0..3)
        .map(|i| PI.powi(alpha[i] as i32) * (PI * x[i] + alpha[i] as f64 * PI / 2.0).sin())
        .product()
}

fn unit(i: usize) -> [u32; 3] {
    let mut a = [0; 3];
    a[i] += 1;
    a
}

fn add(a: [u32; 3], i: usize) -> [u32; 3] {
    let mut a = a;
    a[i] += 1;
    a
}

fn grad(x: Vec3) -> Vec3 {
    std::array::from_fn(|i| sine_derivative(x, unit(i)))
}

fn hess(x: Vec3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| sine_derivative(x, add(unit(i), j))))
}

fn third(x: Vec3, i: usize, j: usize, k: usize) -> f64 {
    sine_derivative(x, add(add(unit(i), j), k))
}

/// `vec` of an antisymmetric matrix, matching `antisym_of_vec`.
fn vec_of(w: &Mat3) -> Vec3 {
    [w[(2, 1)], w[(0, 2)], w[(1, 0)]]
}

impl ManufacturedCase {
    /// `u = sin(πx) sin(πy) sin(πz) (1, 1, 1)` on the unit cube; vanishes on the boundary.
    pub fn sine(material: Material) -> Self {
        let (lam, mu) = (material.lame_lambda, material.lame_mu);
        let displacement = FnField::new(
            3,
            |x| vec![sine_derivative(x, [0; 3]); 3],
            |x| {
                let g = grad(x);
                (0..3).flat_map(|_| g).collect()
            },
        );
        let stress = FnField::new(
            9,
            move |x| {
                let g = grad(x);
                let tr: f64 = g.iter().sum();
                let m = Mat3::from_fn(|i, j| mu * (g[i] + g[j]) + if i == j { lam * tr } else { 0.0 });
                m.to_array().to_vec()
            },
            move |x| {
                let h = hess(x);
                let mut out = Vec::with_capacity(27);
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            let tr: f64 = (0..3).map(|l| h[l][k]).sum();
                            out.push(mu * (h[j][k] + h[i][k]) + if i == j { lam * tr } else { 0.0 });
                        }
                    }
                }
                out
            },
        );
        let rotation = FnField::new(
            3,
            |x| {
                let g = grad(x);
                vec_of(&Mat3::from_fn(|i, j| 0.5 * (g[j] - g[i]))).to_vec()
            },
            |x| {
                let h = hess(x);
                let mut out = Vec::with_capacity(9);
                for c in 0..3 {
                    for k in 0..3 {
                        let w = Mat3::from_fn(|i, j| 0.5 * (h[j][k] - h[i][k]));
                        out.push(vec_of(&w)[c]);
                    }
                }
                out
            },
        );
        let load = FnField::new(
            3,
            move |x| {
                let h = hess(x);
                let lap = h[0][0] + h[1][1] + h[2][2];
                (0..3).map(|i| mu * lap + (mu + lam) * h[i].iter().sum::<f64>()).collect()
            },
            move |x| {
                let mut out = Vec::with_capacity(9);
                for i in 0..3 {
                    for k in 0..3 {
                        let lap: f64 = (0..3).map(|j| third(x, j, j, k)).sum();
                        let row: f64 = (0..3).map(|j| third(x, i, j, k)).sum();
                        out.push(mu * lap + (mu + lam) * row);
                    }
                }
                out
            },
        );
        Self {
            name: "sine".into(),
            material,
            displacement,
            stress,
            rotation,
            load,
            boundary_data: false,
        }
    }

    /// Affine displacement `u = G x` with constant stress and zero load; the displacement
    /// enters as boundary data. With `G` symmetric the stress is a constant symmetric field.
    pub fn affine(material: Material, g: Mat3) -> Self {
        let (lam, mu) = (material.lame_lambda, material.lame_mu);
        let sigma = Mat3::from_fn(|i, j| mu * (g[(i, j)] + g[(j, i)]) + if i == j { lam * g.trace() } else { 0.0 });
        let rot = vec_of(&g.skw());
        Self {
            name: "affine".into(),
            material,
            displacement: FnField::new(3, move |x| g.mul_vec(x).to_vec(), move |_| g.to_array().to_vec()),
            stress: FnField::new(9, move |_| sigma.to_array().to_vec(), |_| vec![0.0; 27]),
            rotation: FnField::new(3, move |_| rot.to_vec(), |_| vec![0.0; 9]),
            load: FnField::new(3, |_| vec![0.0; 3], |_| vec![0.0; 9]),
            boundary_data: true,
        }
    }
}
