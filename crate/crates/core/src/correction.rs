//! Kernel-gradient correction matrices.
//!
//! For particle i with neighbors j, the moment matrix
//!
//! ```text
//! M_i = -sum_j r_ij (x) grad_i W_ij V_j
//! ```
//!
//! is close to identity on a well-sampled interior neighborhood; its inverse
//! `B_i = M_i^-1` restores first-order consistency of corrected gradients
//! (`sum_j (x_j - x_i) (x) B_i grad_i W_ij V_j = I` exactly for full-rank
//! neighborhoods). The same construction serves the reverse kernel gradient
//! correction in the fluid momentum equation and the frozen
//! reference-configuration correction of the total-Lagrangian solids.

use crate::error::{Error, Result};
use crate::neighbor::PairEntry;
use crate::types::Mat;

/// Condition-number threshold beyond which a neighborhood is treated as
/// degenerate (free surfaces, isolated particles, collinear stencils).
pub const CONDITION_LIMIT: f64 = 1e6;

/// Moment sum `-sum_j r_ij (x) grad_i W_ij V_j` over the given pair entries.
/// `volume(j)` supplies the measure of neighbor j (volume, area or length
/// depending on the kernel in use).
pub fn moment_matrix<const D: usize>(
    pairs: &[PairEntry<D>],
    mut volume: impl FnMut(u32) -> f64,
) -> Mat<D> {
    let mut m = Mat::<D>::zeros();
    for p in pairs {
        // r_ij (x) grad W = r dwdr (e (x) e); dwdr <= 0 makes -sum positive.
        let scale = -p.r * p.dwdr * volume(p.j);
        m += (p.e_ij * p.e_ij.transpose()) * scale;
    }
    m
}

/// Inverts a moment matrix into a correction matrix, rejecting degenerate
/// neighborhoods (condition number above [`CONDITION_LIMIT`] or vanishing
/// moment sum).
pub fn correction_matrix<const D: usize>(moment: &Mat<D>, particle: usize) -> Result<Mat<D>> {
    let norm_m = inf_norm(moment);
    if norm_m == 0.0 {
        return Err(Error::DegenerateNeighborhood {
            particle,
            reason: "no neighbors contribute to the moment sum".into(),
        });
    }
    let inv = moment
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::DegenerateNeighborhood {
            particle,
            reason: "singular moment matrix".into(),
        })?;
    let cond = norm_m * inf_norm(&inv);
    if cond > CONDITION_LIMIT {
        return Err(Error::DegenerateNeighborhood {
            particle,
            reason: format!("ill-conditioned moment matrix (condition number {cond:.3e})"),
        });
    }
    Ok(inv)
}

/// Infinity norm (max absolute row sum).
fn inf_norm<const D: usize>(m: &Mat<D>) -> f64 {
    let mut best = 0.0f64;
    for r in 0..D {
        let mut row = 0.0;
        for c in 0..D {
            row += m[(r, c)].abs();
        }
        best = best.max(row);
    }
    best
}

/// Correction matrix straight from pair entries and a volume lookup.
pub fn correction_from_pairs<const D: usize>(
    pairs: &[PairEntry<D>],
    particle: usize,
    volume: impl FnMut(u32) -> f64,
) -> Result<Mat<D>> {
    correction_matrix(&moment_matrix(pairs, volume), particle)
}

/// `sum_j (x_j - x_i) (x) (B grad_i W_ij) V_j`; identity when the corrected
/// gradient reproduces linear fields exactly.
pub fn linear_reproduction<const D: usize>(
    pairs: &[PairEntry<D>],
    b: &Mat<D>,
    mut volume: impl FnMut(u32) -> f64,
) -> Mat<D> {
    let mut s = Mat::<D>::zeros();
    for p in pairs {
        let grad = b * (p.e_ij * p.dwdr);
        let x_ji = -p.e_ij * p.r;
        s += (x_ji * grad.transpose()) * volume(p.j);
    }
    s
}

/// Max absolute entry of `A - I`; convenience for lattice-quality checks.
pub fn deviation_from_identity<const D: usize>(a: &Mat<D>) -> f64 {
    let mut dev = 0.0f64;
    for r in 0..D {
        for c in 0..D {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((a[(r, c)] - target).abs());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SmoothingKernel;
    use crate::neighbor::NeighborList;
    use crate::types::Vect;
    use approx::assert_abs_diff_eq;

    fn lattice_2d(n: i32, dp: f64) -> Vec<Vect<2>> {
        let mut pos = Vec::new();
        for ix in -n..=n {
            for iy in -n..=n {
                pos.push(Vect::<2>::new(ix as f64 * dp, iy as f64 * dp));
            }
        }
        pos
    }

    #[test]
    fn interior_lattice_correction_near_identity() {
        let dp = 0.01;
        let k = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let pos = lattice_2d(5, dp);
        let nl = NeighborList::build(&pos, k.support_radius(), &k).unwrap();
        let center = pos
            .iter()
            .position(|p| p.norm() < 1e-12)
            .unwrap();
        let b = correction_from_pairs(nl.neighbors(center), center, |_| dp * dp).unwrap();
        assert!(
            deviation_from_identity(&b) <= 0.05,
            "B deviates from identity by {}",
            deviation_from_identity(&b)
        );
    }

    #[test]
    fn b_times_moment_is_identity() {
        let dp = 0.2;
        let k = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        // intentionally anisotropic cloud (still full rank)
        let pos = vec![
            Vect::<2>::new(0.0, 0.0),
            Vect::<2>::new(dp, 0.02),
            Vect::<2>::new(-0.8 * dp, 0.1 * dp),
            Vect::<2>::new(0.2 * dp, dp),
            Vect::<2>::new(-0.1 * dp, -1.2 * dp),
        ];
        let nl = NeighborList::build(&pos, k.support_radius(), &k).unwrap();
        let m = moment_matrix(nl.neighbors(0), |_| dp * dp);
        let b = correction_matrix(&m, 0).unwrap();
        assert_abs_diff_eq!(b * m, Mat::<2>::identity(), epsilon = 1e-10);
    }

    #[test]
    fn corrected_gradient_reproduces_linear_fields() {
        let dp = 0.05;
        let k = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let pos = lattice_2d(6, dp);
        let nl = NeighborList::build(&pos, k.support_radius(), &k).unwrap();
        for (i, p) in pos.iter().enumerate() {
            if p.amax() > 2.5 * dp {
                continue; // interior particles only
            }
            let b = correction_from_pairs(nl.neighbors(i), i, |_| dp * dp).unwrap();
            let rep = linear_reproduction(nl.neighbors(i), &b, |_| dp * dp);
            assert_abs_diff_eq!(rep, Mat::<2>::identity(), epsilon = 1e-10);
        }
    }

    #[test]
    fn isolated_particle_is_degenerate() {
        let m = Mat::<2>::zeros();
        match correction_matrix(&m, 42) {
            Err(Error::DegenerateNeighborhood { particle, .. }) => assert_eq!(particle, 42),
            other => panic!("expected degenerate-neighborhood error, got {other:?}"),
        }
    }

    #[test]
    fn collinear_neighbors_are_degenerate_in_2d() {
        let dp = 0.1;
        let k = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let pos = vec![
            Vect::<2>::new(0.0, 0.0),
            Vect::<2>::new(dp, 0.0),
            Vect::<2>::new(-dp, 0.0),
            Vect::<2>::new(2.0 * dp, 0.0),
        ];
        let nl = NeighborList::build(&pos, k.support_radius(), &k).unwrap();
        assert!(correction_from_pairs(nl.neighbors(0), 0, |_| dp * dp).is_err());
    }

    #[test]
    fn partition_of_unity_on_interior_lattice() {
        // full kernel at h = 1.3 dp with volume measure
        let dp = 0.01;
        let k = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let pos = lattice_2d(5, dp);
        let nl = NeighborList::build(&pos, k.support_radius(), &k).unwrap();
        let center = pos.iter().position(|p| p.norm() < 1e-12).unwrap();
        let mut sum = k.value(0.0) * dp * dp;
        for p in nl.neighbors(center) {
            sum += p.w * dp * dp;
        }
        assert!((0.98..=1.02).contains(&sum), "partition of unity = {sum}");

        // reduced kernel at h = 1.15 dp with length measure on a line
        let kr = SmoothingKernel::reduced(2, 1.15 * dp).unwrap();
        let line: Vec<Vect<2>> = (-5..=5)
            .map(|i| Vect::<2>::new(i as f64 * dp, 0.0))
            .collect();
        let nlr = NeighborList::build(&line, kr.support_radius(), &kr).unwrap();
        let mut sum_r = kr.value(0.0) * dp;
        for p in nlr.neighbors(5) {
            sum_r += p.w * dp;
        }
        assert!(
            (0.98..=1.02).contains(&sum_r),
            "reduced partition of unity = {sum_r}"
        );
    }
}
