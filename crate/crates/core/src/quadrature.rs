//! Gauss rules on the reference edge `[0,1]`, triangle `{x,y ≥ 0, x+y ≤ 1}` and
//! tetrahedron `{x,y,z ≥ 0, x+y+z ≤ 1}`, built by collapsing tensor Gauss–Legendre rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::config::R_MAX;

/// Largest exactness degree served by [`rule_for`].
pub const MAX_DEGREE: u32 = 2 * R_MAX + 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("requested degree {requested} exceeds the supported maximum {max}")]
    DegreeTooHigh { requested: u32, max: u32 },
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
}

/// Quadrature rule; unused trailing coordinates of `points` are zero.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Legendre nodes and weights on `[0,1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d.is_finite() { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        // Map from [-1,1] to [0,1].
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn points_for(exact: u32) -> usize {
    (exact as usize + 2) / 2
}

/// Builds a rule without the degree cap.
pub fn build_rule(dim: usize, degree: u32) -> Result<QuadRule, QuadratureError> {
    let d = degree;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (x, w) = gauss_legendre(points_for(d));
            for (xi, wi) in x.into_iter().zip(w) {
                points.push([xi, 0.0, 0.0]);
                weights.push(wi);
            }
        }
        2 => {
            let (x1, w1) = gauss_legendre(points_for(d + 1));
            let (x2, w2) = gauss_legendre(points_for(d));
            for (&a, &wa) in x1.iter().zip(&w1) {
                for (&b, &wb) in x2.iter().zip(&w2) {
                    points.push([a, (1.0 - a) * b, 0.0]);
                    weights.push(wa * wb * (1.0 - a));
                }
            }
        }
        3 => {
            let (x1, w1) = gauss_legendre(points_for(d + 2));
            let (x2, w2) = gauss_legendre(points_for(d + 1));
            let (x3, w3) = gauss_legendre(points_for(d));
            for (&a, &wa) in x1.iter().zip(&w1) {
                for (&b, &wb) in x2.iter().zip(&w2) {
                    for (&c, &wc) in x3.iter().zip(&w3) {
                        points.push([a, (1.0 - a) * b, (1.0 - a) * (1.0 - b) * c]);
                        weights.push(wa * wb * wc * (1.0 - a) * (1.0 - a) * (1.0 - b));
                    }
                }
            }
        }
        _ => return Err(QuadratureError::BadDimension(dim)),
    }
    Ok(QuadRule {
        dim,
        points,
        weights,
        degree,
    })
}

type RuleCache = Mutex<HashMap<(usize, u32), Arc<QuadRule>>>;

/// Cached rule on the reference simplex of dimension `dim` with exactness `≥ degree`.
pub fn rule_for(dim: usize, degree: u32) -> Result<Arc<QuadRule>, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::DegreeTooHigh {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&(dim, degree)) {
        return Ok(Arc::clone(r));
    }
    let rule = Arc::new(build_rule(dim, degree)?);
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .entry((dim, degree))
        .or_insert_with(|| Arc::clone(&rule));
    Ok(rule)
}
