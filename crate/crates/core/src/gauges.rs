//! Diagnostics and validation metrics: wall shear stress and its TAWSS/OSI
//! indices, kernel-interpolated point probes, profile RMSE, wall force
//! totals, and the analytic plane-Poiseuille reference solution.

use crate::error::{Error, Result};
use crate::fluid::FluidField;
use crate::kernel::SmoothingKernel;
use crate::neighbor::NeighborList;
use crate::types::Vect;

/// Tangential wall shear vector from the accumulated viscous reaction force
/// on a wall particle: the normal component is projected out and the rest is
/// divided by the particle's wall area.
pub fn wall_shear_stress<const D: usize>(
    viscous_force: &Vect<D>,
    normal: &Vect<D>,
    area: f64,
) -> Result<Vect<D>> {
    if !(area > 0.0) {
        return Err(Error::Diagnostic(format!(
            "wall shear needs a positive particle area, got {area}"
        )));
    }
    let traction = viscous_force / area;
    Ok(traction - normal * traction.dot(normal))
}

fn check_cycle_coverage(ts: &[f64], period: f64) -> Result<()> {
    if ts.len() < 2 {
        return Err(Error::Coverage(
            "wall-shear series needs at least two samples".into(),
        ));
    }
    let span = ts[ts.len() - 1] - ts[0];
    if span + 1e-9 * period < period {
        return Err(Error::Coverage(format!(
            "series spans {span:.6} s but one full cycle of {period:.6} s is required"
        )));
    }
    Ok(())
}

/// Time-averaged wall shear stress `(1/T) int |tau| dt` over the last full
/// cycle of the series, by the trapezoidal rule.
pub fn tawss<const D: usize>(ts: &[f64], tau: &[Vect<D>], period: f64) -> Result<f64> {
    check_cycle_coverage(ts, period)?;
    let t_end = ts[ts.len() - 1];
    let t_start = t_end - period;
    let mut integral = 0.0;
    for k in 1..ts.len() {
        let (t0, t1) = (ts[k - 1].max(t_start), ts[k].max(t_start));
        if t1 <= t0 {
            continue;
        }
        // linear interpolation of the magnitude onto the clipped interval
        let f = |t: f64| {
            let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            (tau[k - 1] * (1.0 - w) + tau[k] * w).norm()
        };
        integral += 0.5 * (f(t0) + f(t1)) * (t1 - t0);
    }
    Ok(integral / period)
}

/// Oscillatory shear index `(1 - |int tau dt| / int |tau| dt) / 2` over the
/// last full cycle; zero shear throughout is defined as OSI = 0.
pub fn osi<const D: usize>(ts: &[f64], tau: &[Vect<D>], period: f64) -> Result<f64> {
    check_cycle_coverage(ts, period)?;
    let t_end = ts[ts.len() - 1];
    let t_start = t_end - period;
    let mut vec_integral = Vect::<D>::zeros();
    let mut mag_integral = 0.0;
    for k in 1..ts.len() {
        let (t0, t1) = (ts[k - 1].max(t_start), ts[k].max(t_start));
        if t1 <= t0 {
            continue;
        }
        let sample = |t: f64| {
            let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            tau[k - 1] * (1.0 - w) + tau[k] * w
        };
        let (s0, s1) = (sample(t0), sample(t1));
        vec_integral += (s0 + s1) * (0.5 * (t1 - t0));
        mag_integral += 0.5 * (s0.norm() + s1.norm()) * (t1 - t0);
    }
    if mag_integral == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * (1.0 - (vec_integral.norm() / mag_integral).min(1.0)))
}

/// Relative root-mean-square error of a sampled profile against a reference,
/// normalized by the reference maximum magnitude.
pub fn rmse_profile(samples: &[f64], reference: &[f64]) -> Result<f64> {
    if samples.is_empty() || samples.len() != reference.len() {
        return Err(Error::Coverage(format!(
            "profile RMSE needs matched non-empty samples (got {} vs {})",
            samples.len(),
            reference.len()
        )));
    }
    let mut sq = 0.0;
    let mut ref_max = 0.0f64;
    for (s, r) in samples.iter().zip(reference.iter()) {
        sq += (s - r) * (s - r);
        ref_max = ref_max.max(r.abs());
    }
    if ref_max == 0.0 {
        return Err(Error::Coverage(
            "reference profile is identically zero".into(),
        ));
    }
    Ok((sq / samples.len() as f64).sqrt() / ref_max)
}

/// Plane Poiseuille startup parameters: gap `d`, pressure difference
/// `delta_p` over length `length`, viscosity `eta`, density `rho`.
#[derive(Debug, Clone, Copy)]
pub struct PoiseuilleParams {
    pub d: f64,
    pub delta_p: f64,
    pub length: f64,
    pub eta: f64,
    pub rho: f64,
}

impl PoiseuilleParams {
    pub fn v_max(&self) -> f64 {
        self.d * self.d * self.delta_p / (8.0 * self.eta * self.length)
    }
}

/// Time-dependent axial velocity of plane Poiseuille startup at height
/// `y in (0, d)`:
///
/// ```text
/// v(y, t) = dP/(2 eta L) y (d - y)
///         - sum_n 4 dP d^2 / (eta L pi^3 (2n+1)^3)
///             sin((2n+1) pi y / d) exp(-(2n+1)^2 pi^2 eta t / (rho d^2))
/// ```
///
/// The sign convention makes the flow positive along the pressure drop; the
/// series cancels the steady part at `t = 0`. Terms are truncated below
/// 1e-12 of the steady maximum (residual tail ~ 5e-9 of the maximum at
/// `t = 0`, decaying exponentially for `t > 0`).
pub fn poiseuille_reference(y: f64, t: f64, p: &PoiseuilleParams) -> f64 {
    let pi = std::f64::consts::PI;
    let steady = p.delta_p / (2.0 * p.eta * p.length) * y * (p.d - y);
    let v_scale = p.v_max();
    let mut series = 0.0;
    let coeff = 4.0 * p.delta_p * p.d * p.d / (p.eta * p.length * pi.powi(3));
    for n in 0..200_000u32 {
        let m = (2 * n + 1) as f64;
        let amplitude = coeff / (m * m * m);
        if amplitude < 1e-12 * v_scale {
            break;
        }
        let decay = (-m * m * pi * pi * p.eta * t / (p.rho * p.d * p.d)).exp();
        series += amplitude * (m * pi * y / p.d).sin() * decay;
        if decay < 1e-300 {
            break;
        }
    }
    steady - series
}

/// Shepard-normalized kernel interpolation of per-particle values at probe
/// locations; `probe_pairs` is a cross neighbor list from probe points to
/// fluid particles. Locations with no support return `None`.
pub fn probe_values<const D: usize, T, F>(
    probe_pairs: &NeighborList<D>,
    fluid: &FluidField<D>,
    zero: T,
    value: F,
) -> Vec<Option<T>>
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
    F: Fn(&FluidField<D>, usize) -> T,
{
    (0..probe_pairs.len())
        .map(|p| {
            let mut weight_sum = 0.0;
            let mut acc = zero;
            for pair in probe_pairs.neighbors(p) {
                let j = pair.j as usize;
                let w = pair.w * fluid.vol[j];
                weight_sum += w;
                acc = acc + value(fluid, j) * w;
            }
            if weight_sum > 0.0 {
                Some(acc * (1.0 / weight_sum))
            } else {
                None
            }
        })
        .collect()
}

/// Builds the probe-to-fluid neighbor list with the standard 2h support.
pub fn probe_pairs<const D: usize>(
    locations: &[Vect<D>],
    fluid: &FluidField<D>,
    kernel: &SmoothingKernel,
) -> Result<NeighborList<D>> {
    NeighborList::build_cross(locations, &fluid.pos, kernel.support_radius(), kernel)
}
