//! Mixed finite elements for three-dimensional linear elasticity with weakly imposed
//! stress symmetry on tetrahedral meshes with variable polynomial order.
//!
//! The crate is layered bottom-up: [`linalg`] and [`quadrature`] are plumbing,
//! [`tensor_ops`] holds the 3×3 matrix algebra, [`mesh`] and [`polyspace`] describe
//! geometry and reference-element spaces, [`interp`] provides the projection and
//! interpolation operators, [`assembly`] builds and solves the three-field system and
//! [`stability_lab`] runs the numerical stability and convergence studies.

pub mod assembly;
pub mod config;
pub mod interp;
pub mod linalg;
pub mod mesh;
pub mod polyspace;
pub mod quadrature;
pub mod stability_lab;
pub mod tensor_ops;
