//! Numerical laboratory for the KdV equation with fractional dissipation,
//! `u_t + u_xxx + u u_x + |D_x|^{2α} u = 0`.

pub mod data;
pub mod grid;
pub mod norms;
pub mod symbols;
pub mod solver;
pub mod multiplier;
pub mod quadrature;
pub mod illposedness;
pub mod io;
