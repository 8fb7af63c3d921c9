//! Shared numerical machinery: finite differences, quadratures and a tiny
//! simplex solver.

pub mod fd;
pub mod quad;
pub mod simplex;
