//! Weakly-compressible SPH engine for fluid-structure interaction in
//! thin-walled channels and vessels.
//!
//! The crate couples a Riemann-solver WCSPH fluid with two structural wall
//! representations: a total-Lagrangian volume solid and a reduced-dimension
//! Mindlin shell carried by a single particle layer. In/outlet machinery
//! (bidirectional buffers, waveform inlets, resistance and Windkessel outlet
//! circuits) and hemodynamics diagnostics (WSS, TAWSS, OSI) sit on top.
//!
//! Everything is dimension-generic over `const D: usize` (2 or 3); scenario
//! code dispatches once at the entry point.

pub mod conductor;
pub mod correction;
pub mod coupling;
pub mod error;
pub mod fluid;
pub mod forge;
pub mod gates;
pub mod gauges;
pub mod kernel;
pub mod mesh;
pub mod neighbor;
pub mod output;
pub mod scenario;
pub mod shell;
pub mod solid;

pub use error::Error;

/// Shorthands used across every solver module.
pub mod types {
    pub type Vect<const D: usize> = nalgebra::SVector<f64, D>;
    pub type Mat<const D: usize> = nalgebra::SMatrix<f64, D, D>;

    /// Determinant for the 2x2 / 3x3 matrices used throughout; nalgebra's
    /// generic determinant is unavailable for generic const dimensions.
    pub fn det<const D: usize>(m: &Mat<D>) -> f64 {
        match D {
            2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
            3 => {
                m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                    - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                    + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
            }
            _ => unreachable!("only 2D and 3D are supported"),
        }
    }
}
