//! Fifth-order Wendland smoothing kernels, in full-dimensional and
//! reduced-dimensional (manifold) normalization.
//!
//! ```text
//! W(q, h) = alpha * (1 + 2q) * (1 - q/2)^4,   q = r/h in [0, 2]
//! ```
//!
//! The polynomial shape is shared; only the normalization constant differs:
//!
//! | variant    | 2D           | 3D             |
//! |------------|--------------|----------------|
//! | full       | 7/(4 pi h^2) | 21/(16 pi h^3) |
//! | reduced    | 3/(4 h)      | 7/(4 pi h^2)   |
//!
//! The reduced kernel normalizes the unit integral on the manifold the shell
//! particles live on (a line in 2D problems, a surface in 3D), so discrete
//! "volumes" fed to it are lengths and areas respectively.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::Vect;

/// Wendland C2 kernel with smoothing length `h` and support radius `2h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingKernel {
    h: f64,
    dim: usize,
    reduced: bool,
    alpha: f64,
}

impl SmoothingKernel {
    /// Full-dimensional kernel for bulk (volume-measure) discretizations.
    pub fn full(dim: usize, h: f64) -> Result<Self> {
        Self::new(dim, h, false)
    }

    /// Reduced-dimensional kernel for shell (manifold-measure) discretizations.
    pub fn reduced(dim: usize, h: f64) -> Result<Self> {
        Self::new(dim, h, true)
    }

    fn new(dim: usize, h: f64, reduced: bool) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "smoothing length must be positive and finite, got {h}"
            )));
        }
        let alpha = match (dim, reduced) {
            (2, false) => 7.0 / (4.0 * PI * h * h),
            (3, false) => 21.0 / (16.0 * PI * h * h * h),
            (2, true) => 3.0 / (4.0 * h),
            (3, true) => 7.0 / (4.0 * PI * h * h),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unsupported spatial dimension {dim} (expected 2 or 3)"
                )))
            }
        };
        Ok(Self {
            h,
            dim,
            reduced,
            alpha,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    /// Normalization constant; equals `W(0)`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn support_radius(&self) -> f64 {
        2.0 * self.h
    }

    /// Kernel value at separation `r >= 0`. Zero outside the support.
    pub fn value(&self, r: f64) -> f64 {
        debug_assert!(r.is_finite() && r >= 0.0);
        let q = r / self.h;
        if q >= 2.0 {
            return 0.0;
        }
        let t = 1.0 - 0.5 * q;
        let t2 = t * t;
        self.alpha * (1.0 + 2.0 * q) * t2 * t2
    }

    /// Checked variant of [`value`](Self::value); rejects non-finite input.
    pub fn try_value(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel distance must be finite and non-negative, got {r}"
            )));
        }
        Ok(self.value(r))
    }

    /// Radial derivative dW/dr at separation `r`; non-positive everywhere.
    pub fn grad(&self, r: f64) -> f64 {
        debug_assert!(r.is_finite() && r >= 0.0);
        let q = r / self.h;
        if q >= 2.0 {
            return 0.0;
        }
        let t = 1.0 - 0.5 * q;
        self.alpha / self.h * (-5.0 * q) * t * t * t
    }

    /// Kernel gradient with respect to particle i for `r_ij = r_i - r_j`:
    /// `(dW/dr)(|r_ij|) * e_ij`. Antisymmetric under i <-> j; zero for a
    /// coincident pair (the self-pair is excluded by construction upstream).
    pub fn gradient<const D: usize>(&self, r_ij: Vect<D>) -> Vect<D> {
        let r = r_ij.norm();
        if r == 0.0 {
            return Vect::zeros();
        }
        r_ij * (self.grad(r) / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn value_at_zero_is_alpha() {
        let k = SmoothingKernel::full(2, 0.013).unwrap();
        assert_relative_eq!(k.value(0.0), 7.0 / (4.0 * PI * 0.013 * 0.013));
        let k3 = SmoothingKernel::full(3, 0.5).unwrap();
        assert_relative_eq!(k3.value(0.0), 21.0 / (16.0 * PI * 0.125));
    }

    #[test]
    fn reduced_constants() {
        let h = 0.23;
        assert_relative_eq!(
            SmoothingKernel::reduced(2, h).unwrap().alpha(),
            3.0 / (4.0 * h)
        );
        assert_relative_eq!(
            SmoothingKernel::reduced(3, h).unwrap().alpha(),
            7.0 / (4.0 * PI * h * h)
        );
    }

    #[test]
    fn support_boundary_vanishes() {
        let k = SmoothingKernel::full(2, 1.0).unwrap();
        assert_eq!(k.value(2.0), 0.0);
        assert_eq!(k.value(2.5), 0.0);
        assert_eq!(k.grad(2.0), 0.0);
        // C1 at the boundary: value and derivative go to zero smoothly.
        assert!(k.value(2.0 - 1e-8) < 1e-6 * k.alpha());
        assert!(k.grad(2.0 - 1e-8).abs() < 1e-6 * k.alpha());
    }

    #[test]
    fn value_at_q_one() {
        // W(h) = alpha * 3 * (1/2)^4 = 3 alpha / 16
        let k = SmoothingKernel::full(3, 0.7).unwrap();
        assert_relative_eq!(k.value(0.7), 3.0 * k.alpha() / 16.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SmoothingKernel::full(2, 0.0).is_err());
        assert!(SmoothingKernel::full(4, 1.0).is_err());
        let k = SmoothingKernel::full(2, 1.0).unwrap();
        assert!(k.try_value(f64::NAN).is_err());
        assert!(k.try_value(-1.0).is_err());
        assert!(k.try_value(1.0).is_ok());
    }

    #[test]
    fn gradient_matches_finite_difference_at_q_one() {
        for kern in [
            SmoothingKernel::full(2, 0.31).unwrap(),
            SmoothingKernel::full(3, 0.31).unwrap(),
            SmoothingKernel::reduced(2, 0.31).unwrap(),
            SmoothingKernel::reduced(3, 0.31).unwrap(),
        ] {
            let r = kern.h();
            let dr = 1e-6 * kern.h();
            let fd = (kern.value(r + dr) - kern.value(r - dr)) / (2.0 * dr);
            assert_relative_eq!(kern.grad(r), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn gradient_vector_antisymmetric_and_compact() {
        let k = SmoothingKernel::full(2, 1.0).unwrap();
        let r_ij = nalgebra::SVector::<f64, 2>::new(0.3, -0.4);
        let g = k.gradient(r_ij);
        let g_rev = k.gradient(-r_ij);
        assert_abs_diff_eq!((g + g_rev).norm(), 0.0);
        // points along -e_ij since dW/dr < 0 inside the support
        assert!(g.dot(&r_ij) < 0.0);
        let far = nalgebra::SVector::<f64, 2>::new(2.1, 0.0);
        assert_eq!(k.gradient(far), nalgebra::SVector::<f64, 2>::zeros());
        assert_eq!(
            k.gradient(nalgebra::SVector::<f64, 2>::zeros()),
            nalgebra::SVector::<f64, 2>::zeros()
        );
    }

    /// Quadrature check that alpha really normalizes the kernel integral
    /// in every variant (radial quadrature with the right measure).
    #[test]
    fn unit_integral_all_variants() {
        let h = 1.0;
        let n = 200_000;
        let dq = 2.0 / n as f64;
        let cases = [
            (SmoothingKernel::full(2, h).unwrap(), 1usize),
            (SmoothingKernel::full(3, h).unwrap(), 2usize),
            (SmoothingKernel::reduced(2, h).unwrap(), 0usize),
            (SmoothingKernel::reduced(3, h).unwrap(), 1usize),
        ];
        for (k, pow) in cases {
            let mut integral = 0.0;
            for i in 0..n {
                let q = (i as f64 + 0.5) * dq;
                let r = q * h;
                let measure = match pow {
                    0 => 2.0,                      // line (both sides)
                    1 => 2.0 * PI * r,             // circle
                    _ => 4.0 * PI * r * r,         // sphere
                };
                integral += k.value(r) * measure * (dq * h);
            }
            assert_relative_eq!(integral, 1.0, max_relative = 1e-6);
        }
    }
}
