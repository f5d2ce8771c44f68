//! Two-way fluid-structure coupling: no-slip imaginary wall states, one-sided
//! Riemann wall forces for volume walls, curvature-aware virtual-layer
//! projection for shells, and equal-and-opposite reactions on the structures.
//!
//! Shells are presented to the fluid as a stack of virtual particles behind
//! the mid-surface (on the side away from the fluid), each carrying the
//! projected area `A^k = A (1 + k chi_1 dp_s)(1 + k chi_2 dp_s)` and the
//! layer volume `A^k dp_s`, which makes a flat shell bitwise-equivalent to a
//! volume-wall half space.

use crate::error::{Error, Result};
use crate::fluid::{FluidField, FluidMaterial};
use crate::neighbor::NeighborList;
use crate::types::{Mat, Vect};

/// Volume-wall particles as seen by the coupling pass (rigid walls carry
/// zero velocity and acceleration).
pub struct WallGeom<'a, const D: usize> {
    pub pos: &'a [Vect<D>],
    pub vel: &'a [Vect<D>],
    /// Previous-substep acceleration, used in the imaginary pressure.
    pub acc_prev: &'a [Vect<D>],
    pub vol: &'a [f64],
}

/// Shell particles plus the virtual-layer projection parameters.
pub struct ShellGeom<'a, const D: usize> {
    pub pos: &'a [Vect<D>],
    pub vel: &'a [Vect<D>],
    pub acc_prev: &'a [Vect<D>],
    /// Unit pseudo-normal oriented toward the fluid side.
    pub normal_into_fluid: &'a [Vect<D>],
    /// Reduced measure (area in 3D, length in 2D).
    pub area: &'a [f64],
    /// Principal curvatures of the outward (away-from-fluid) normal field;
    /// the second entry is zero in 2D.
    pub curvature: &'a [[f64; 2]],
    pub layer_spacing: f64,
    pub layer_count: usize,
}

/// Imaginary pressure, velocity and density of a structure particle under
/// the no-slip condition:
///
/// ```text
/// p_a^d   = p_i + rho_i r_ia max(0, (g - dv_a/dt) . e_ai)
/// v_a^d   = 2 v_a - v_i
/// rho_a^d = EoS^-1(p_a^d)
/// ```
///
/// `e_ia` points from the structure particle toward the fluid particle, so
/// a wall below a fluid column under gravity sees the hydrostatic increase.
pub fn imaginary_wall_state<const D: usize>(
    p_i: f64,
    rho_i: f64,
    v_i: &Vect<D>,
    v_a: &Vect<D>,
    acc_a: &Vect<D>,
    e_ia: &Vect<D>,
    r_ia: f64,
    gravity: &Vect<D>,
    mat: &FluidMaterial,
) -> (f64, Vect<D>, f64) {
    let drive = (gravity - acc_a).dot(&-e_ia).max(0.0);
    let p_d = p_i + rho_i * r_ia * drive;
    let v_d = *v_a * 2.0 - *v_i;
    let rho_d = mat.density_from_pressure(p_d).max(0.1 * mat.rho0);
    (p_d, v_d, rho_d)
}

/// One-sided Riemann interface pressure for fluid-structure pairs.
pub fn one_sided_pressure(rho_i: f64, p_i: f64, rho_d: f64, p_d: f64) -> f64 {
    (rho_i * p_d + rho_d * p_i) / (rho_i + rho_d)
}

/// Equivalent projected area of virtual layer `k` behind a shell particle.
/// Errors when the layer would extend past a center of curvature.
pub fn projected_layer_area(
    area: f64,
    curvature: &[f64; 2],
    k: usize,
    dp_s: f64,
    particle: usize,
) -> Result<f64> {
    let mut a = area;
    for &chi in curvature {
        let factor = 1.0 + k as f64 * chi * dp_s;
        if factor <= 0.0 {
            return Err(Error::CurvatureOverrun {
                particle,
                layer: k,
                factor,
            });
        }
        a *= factor;
    }
    Ok(a)
}

/// Projection-corrected kernel quantities of one fluid-shell pair, as
/// printed: value normalized by the particle volume `A0 d0`, gradient by the
/// area, and the gradient-weighted average direction of the virtual layers.
#[derive(Debug, Clone, Copy)]
pub struct ShellKernelTerms<const D: usize> {
    pub w_bar: f64,
    pub dwdr_bar: f64,
    /// `None` when no layer overlaps the kernel support.
    pub e_bar: Option<Vect<D>>,
}

/// Raw virtual-layer sums feeding forces, continuity and stencil
/// corrections; volumes are the per-layer `A^k dp_s`.
#[derive(Debug, Clone, Copy)]
struct ShellPairSums<const D: usize> {
    /// `sum_k W(r^k) A^k dp_s`
    w_vol: f64,
    /// `sum_k dW/dr(r^k) e^k A^k dp_s`
    grad_vec: Vect<D>,
    /// `sum_k dW/dr(r^k) / (r^k + 0.01 h) A^k dp_s`
    visc: f64,
    /// `-sum_k r^k (x) grad W A^k dp_s`
    moment: Mat<D>,
    /// un-volumed sums for the printed normalizations
    w_plain: f64,
    dwdr_plain: f64,
    grad_plain: Vect<D>,
}

fn shell_pair_sums<const D: usize>(
    fluid_pos: &Vect<D>,
    shell: &ShellGeom<'_, D>,
    a: usize,
    kernel_h: f64,
    kernel: &crate::kernel::SmoothingKernel,
) -> Result<ShellPairSums<D>> {
    let mut sums = ShellPairSums {
        w_vol: 0.0,
        grad_vec: Vect::zeros(),
        visc: 0.0,
        moment: Mat::zeros(),
        w_plain: 0.0,
        dwdr_plain: 0.0,
        grad_plain: Vect::zeros(),
    };
    let outward = -shell.normal_into_fluid[a];
    for k in 0..shell.layer_count {
        let a_k = projected_layer_area(
            shell.area[a],
            &shell.curvature[a],
            k,
            shell.layer_spacing,
            a,
        )?;
        let layer_pos = shell.pos[a] + outward * (k as f64 * shell.layer_spacing);
        let r_vec = fluid_pos - layer_pos;
        let r = r_vec.norm();
        if r <= 0.0 || r >= kernel.support_radius() {
            continue;
        }
        let e = r_vec / r;
        let w = kernel.value(r);
        let dwdr = kernel.grad(r);
        let vol_k = a_k * shell.layer_spacing;
        sums.w_vol += w * vol_k;
        sums.grad_vec += e * (dwdr * vol_k);
        sums.visc += dwdr / (r + 0.01 * kernel_h) * vol_k;
        sums.moment += (r_vec * (e * dwdr).transpose()) * (-vol_k);
        sums.w_plain += w * a_k * shell.layer_spacing;
        sums.dwdr_plain += dwdr * a_k;
        sums.grad_plain += e * (dwdr * a_k);
    }
    Ok(sums)
}

/// Printed-normalization kernel terms for one fluid-shell pair.
pub fn corrected_shell_kernel<const D: usize>(
    fluid_pos: &Vect<D>,
    shell: &ShellGeom<'_, D>,
    a: usize,
    thickness0: f64,
    kernel: &crate::kernel::SmoothingKernel,
) -> Result<ShellKernelTerms<D>> {
    let sums = shell_pair_sums(fluid_pos, shell, a, kernel.h(), kernel)?;
    let e_bar = if sums.dwdr_plain.abs() > 0.0 {
        Some(sums.grad_plain / sums.dwdr_plain)
    } else {
        None
    };
    Ok(ShellKernelTerms {
        w_bar: sums.w_plain / (shell.area[a] * thickness0),
        dwdr_bar: sums.dwdr_plain / shell.area[a],
        e_bar,
    })
}

/// Geometry-only structure contributions to the fluid stencils, refreshed
/// once per advection step: number density for re-initialization, moment
/// sums for the correction matrices, and plain gradient sums for the
/// transport correction and prescribed-pressure terms.
pub struct WallStencilContrib<const D: usize> {
    pub number_density: Vec<f64>,
    pub moment: Vec<Mat<D>>,
    pub grad_sum: Vec<Vect<D>>,
}

pub fn wall_stencil_contributions<const D: usize>(
    fluid: &FluidField<D>,
    wall: Option<(&WallGeom<'_, D>, &NeighborList<D>)>,
    shell: Option<(&ShellGeom<'_, D>, &NeighborList<D>)>,
    kernel: &crate::kernel::SmoothingKernel,
) -> Result<WallStencilContrib<D>> {
    let n = fluid.len();
    let mut out = WallStencilContrib {
        number_density: vec![0.0; n],
        moment: vec![Mat::zeros(); n],
        grad_sum: vec![Vect::zeros(); n],
    };
    if let Some((wall, pairs)) = wall {
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let grad = pair.e_ij * pair.dwdr;
                // walls are discretized at the fluid spacing in the shipped
                // scenarios, so the plain kernel sum is the number density
                out.number_density[i] += pair.w * wall.vol[a] / fluid.vol[i];
                out.moment[i] += (pair.e_ij * pair.r) * grad.transpose() * (-wall.vol[a]);
                out.grad_sum[i] += grad * wall.vol[a];
            }
        }
    }
    if let Some((shell, pairs)) = shell {
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let sums = shell_pair_sums(&fluid.pos[i], shell, a, kernel.h(), kernel)?;
                out.number_density[i] += sums.w_vol / fluid.vol[i];
                out.moment[i] += sums.moment;
                out.grad_sum[i] += sums.grad_vec;
            }
        }
    }
    Ok(out)
}

/// Forces of one coupling pass: accelerations and continuity contributions
/// on the fluid, equal-and-opposite force ledgers on the structures
/// (pressure and viscous parts kept separate for the wall-shear and
/// force-history diagnostics).
pub struct CouplingForces<const D: usize> {
    pub fluid_acc: Vec<Vect<D>>,
    pub fluid_drho: Vec<f64>,
    pub wall_pressure_force: Vec<Vect<D>>,
    pub wall_viscous_force: Vec<Vect<D>>,
    pub shell_pressure_force: Vec<Vect<D>>,
    pub shell_viscous_force: Vec<Vect<D>>,
}

impl<const D: usize> CouplingForces<D> {
    pub fn wall_force(&self, a: usize) -> Vect<D> {
        self.wall_pressure_force[a] + self.wall_viscous_force[a]
    }

    pub fn shell_force(&self, a: usize) -> Vect<D> {
        self.shell_pressure_force[a] + self.shell_viscous_force[a]
    }
}

/// Continuity contribution of a structure pair: the one-sided intermediate
/// velocity `v* = U* e + (vbar - Ubar e)` built from the imaginary state.
fn one_sided_v_star<const D: usize>(
    v_i: &Vect<D>,
    rho_i: f64,
    p_i: f64,
    v_d: &Vect<D>,
    rho_d: f64,
    p_d: f64,
    e_ia: &Vect<D>,
    c_f: f64,
) -> Vect<D> {
    let pair = crate::fluid::RiemannPair {
        rho_l: rho_i,
        u_l: v_i.dot(e_ia),
        p_l: p_i,
        rho_r: rho_d,
        u_r: v_d.dot(e_ia),
        p_r: p_d,
    };
    let (u_star, _) = crate::fluid::riemann_interface(&pair, c_f);
    let u_bar = 0.5 * (pair.u_l + pair.u_r);
    let v_bar = (*v_i * rho_i + *v_d * rho_d) / (rho_i + rho_d);
    *e_ia * u_star + (v_bar - *e_ia * u_bar)
}

/// Assembles the full coupling pass. Single-threaded by design: reaction
/// accumulation scatters into the structure arrays, and coupling pairs are a
/// boundary band rather than the bulk.
#[allow(clippy::too_many_arguments)]
pub fn coupling_forces<const D: usize>(
    fluid: &FluidField<D>,
    mat: &FluidMaterial,
    gravity: &Vect<D>,
    kernel: &crate::kernel::SmoothingKernel,
    wall: Option<(&WallGeom<'_, D>, &NeighborList<D>)>,
    shell: Option<(&ShellGeom<'_, D>, &NeighborList<D>)>,
) -> Result<CouplingForces<D>> {
    let n = fluid.len();
    let h = kernel.h();
    let mut out = CouplingForces {
        fluid_acc: vec![Vect::zeros(); n],
        fluid_drho: vec![0.0; n],
        wall_pressure_force: Vec::new(),
        wall_viscous_force: Vec::new(),
        shell_pressure_force: Vec::new(),
        shell_viscous_force: Vec::new(),
    };

    if let Some((wall, pairs)) = wall {
        out.wall_pressure_force = vec![Vect::zeros(); wall.pos.len()];
        out.wall_viscous_force = vec![Vect::zeros(); wall.pos.len()];
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let (p_d, v_d, rho_d) = imaginary_wall_state(
                    fluid.p[i],
                    fluid.rho[i],
                    &fluid.vel[i],
                    &wall.vel[a],
                    &wall.acc_prev[a],
                    &pair.e_ij,
                    pair.r,
                    gravity,
                    mat,
                );
                let p_star = one_sided_pressure(fluid.rho[i], fluid.p[i], rho_d, p_d);
                let grad = pair.e_ij * pair.dwdr;
                let acc_p = grad * (-2.0 * p_star / fluid.rho[i] * wall.vol[a]);
                let mut acc_v = Vect::zeros();
                if mat.eta > 0.0 {
                    acc_v = (fluid.vel[i] - v_d)
                        * (2.0 * mat.eta / fluid.rho[i] * pair.dwdr * wall.vol[a]
                            / (pair.r + 0.01 * h));
                }
                out.fluid_acc[i] += acc_p + acc_v;
                out.wall_pressure_force[a] -= acc_p * fluid.mass[i];
                out.wall_viscous_force[a] -= acc_v * fluid.mass[i];

                let v_star = one_sided_v_star(
                    &fluid.vel[i],
                    fluid.rho[i],
                    fluid.p[i],
                    &v_d,
                    rho_d,
                    p_d,
                    &pair.e_ij,
                    mat.c_f,
                );
                out.fluid_drho[i] +=
                    2.0 * fluid.rho[i] * (fluid.vel[i] - v_star).dot(&grad) * wall.vol[a];
            }
        }
    }

    if let Some((shell, pairs)) = shell {
        out.shell_pressure_force = vec![Vect::zeros(); shell.pos.len()];
        out.shell_viscous_force = vec![Vect::zeros(); shell.pos.len()];
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let sums = shell_pair_sums(&fluid.pos[i], shell, a, h, kernel)?;
                if sums.w_vol == 0.0 && sums.grad_vec.norm() == 0.0 && sums.visc == 0.0 {
                    continue;
                }
                let (p_d, v_d, rho_d) = imaginary_wall_state(
                    fluid.p[i],
                    fluid.rho[i],
                    &fluid.vel[i],
                    &shell.vel[a],
                    &shell.acc_prev[a],
                    &pair.e_ij,
                    pair.r,
                    gravity,
                    mat,
                );
                let p_star = one_sided_pressure(fluid.rho[i], fluid.p[i], rho_d, p_d);
                let acc_p = sums.grad_vec * (-2.0 * p_star / fluid.rho[i]);
                let mut acc_v = Vect::zeros();
                if mat.eta > 0.0 {
                    acc_v = (fluid.vel[i] - v_d) * (2.0 * mat.eta / fluid.rho[i] * sums.visc);
                }
                out.fluid_acc[i] += acc_p + acc_v;
                out.shell_pressure_force[a] -= acc_p * fluid.mass[i];
                out.shell_viscous_force[a] -= acc_v * fluid.mass[i];

                let v_star = one_sided_v_star(
                    &fluid.vel[i],
                    fluid.rho[i],
                    fluid.p[i],
                    &v_d,
                    rho_d,
                    p_d,
                    &pair.e_ij,
                    mat.c_f,
                );
                out.fluid_drho[i] += 2.0 * fluid.rho[i] * (fluid.vel[i] - v_star).dot(&sums.grad_vec);
            }
        }
    }
    Ok(out)
}

/// Structure contribution to the continuity equation, evaluated separately
/// so the conductor can use the end-of-step state for the density update.
#[allow(clippy::too_many_arguments)]
pub fn coupling_density_rate<const D: usize>(
    fluid: &FluidField<D>,
    mat: &FluidMaterial,
    gravity: &Vect<D>,
    kernel: &crate::kernel::SmoothingKernel,
    wall: Option<(&WallGeom<'_, D>, &NeighborList<D>)>,
    shell: Option<(&ShellGeom<'_, D>, &NeighborList<D>)>,
) -> Result<Vec<f64>> {
    let n = fluid.len();
    let mut drho = vec![0.0; n];
    if let Some((wall, pairs)) = wall {
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let (p_d, v_d, rho_d) = imaginary_wall_state(
                    fluid.p[i],
                    fluid.rho[i],
                    &fluid.vel[i],
                    &wall.vel[a],
                    &wall.acc_prev[a],
                    &pair.e_ij,
                    pair.r,
                    gravity,
                    mat,
                );
                let v_star = one_sided_v_star(
                    &fluid.vel[i],
                    fluid.rho[i],
                    fluid.p[i],
                    &v_d,
                    rho_d,
                    p_d,
                    &pair.e_ij,
                    mat.c_f,
                );
                let grad = pair.e_ij * pair.dwdr;
                drho[i] += 2.0 * fluid.rho[i] * (fluid.vel[i] - v_star).dot(&grad) * wall.vol[a];
            }
        }
    }
    if let Some((shell, pairs)) = shell {
        for i in 0..n {
            for pair in pairs.neighbors(i) {
                let a = pair.j as usize;
                let sums = shell_pair_sums(&fluid.pos[i], shell, a, kernel.h(), kernel)?;
                if sums.grad_vec.norm() == 0.0 {
                    continue;
                }
                let (p_d, v_d, rho_d) = imaginary_wall_state(
                    fluid.p[i],
                    fluid.rho[i],
                    &fluid.vel[i],
                    &shell.vel[a],
                    &shell.acc_prev[a],
                    &pair.e_ij,
                    pair.r,
                    gravity,
                    mat,
                );
                let v_star = one_sided_v_star(
                    &fluid.vel[i],
                    fluid.rho[i],
                    fluid.p[i],
                    &v_d,
                    rho_d,
                    p_d,
                    &pair.e_ij,
                    mat.c_f,
                );
                drho[i] += 2.0 * fluid.rho[i] * (fluid.vel[i] - v_star).dot(&sums.grad_vec);
            }
        }
    }
    Ok(drho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SmoothingKernel;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn imaginary_state_basics() {
        let mat = FluidMaterial::new(1000.0, 1e-3, 10.0).unwrap();
        let zero = Vect::<2>::zeros();

        // at rest without gravity: pressure mirrored, velocity zero
        let (p_d, v_d, _) = imaginary_wall_state(
            7.5,
            1000.0,
            &zero,
            &zero,
            &zero,
            &Vect::<2>::new(0.0, 1.0),
            0.01,
            &zero,
            &mat,
        );
        assert_eq!(p_d, 7.5);
        assert_abs_diff_eq!(v_d, zero);

        // no-slip mirror about a static wall
        let v_i = Vect::<2>::new(0.3, 0.0);
        let (_, v_d, _) = imaginary_wall_state(
            0.0,
            1000.0,
            &v_i,
            &zero,
            &zero,
            &Vect::<2>::new(0.0, 1.0),
            0.01,
            &zero,
            &mat,
        );
        assert_abs_diff_eq!(v_d, -v_i);

        // hydrostatic drive: fluid above a static wall under gravity
        let g = Vect::<2>::new(0.0, -9.81);
        let dy = 0.013;
        let (p_d, _, _) = imaginary_wall_state(
            5.0,
            1000.0,
            &zero,
            &zero,
            &zero,
            &Vect::<2>::new(0.0, 1.0), // e_ia points up, from wall to fluid
            dy,
            &g,
            &mat,
        );
        assert_relative_eq!(p_d - 5.0, 1000.0 * 9.81 * dy, max_relative = 1e-12);

        // gravity pointing away from the wall clamps to zero
        let (p_d, _, _) = imaginary_wall_state(
            5.0,
            1000.0,
            &zero,
            &zero,
            &zero,
            &Vect::<2>::new(0.0, -1.0),
            dy,
            &g,
            &mat,
        );
        assert_eq!(p_d, 5.0);
    }

    #[test]
    fn projected_areas_exact_for_circles_and_spheres() {
        // 2D circle, layers toward the outside: arc-length ratio
        let r_circle = 0.03;
        let area = 1.7e-3;
        let dp = 1e-3;
        for k in 0..4 {
            let a_k = projected_layer_area(area, &[1.0 / r_circle, 0.0], k, dp, 0).unwrap();
            let exact = area * (r_circle + k as f64 * dp) / r_circle;
            assert_relative_eq!(a_k, exact, epsilon = 1e-12 * area);
        }

        // sphere: spherical-shell area ratio
        let r_s = 0.02;
        for k in 0..4 {
            let a_k =
                projected_layer_area(area, &[1.0 / r_s, 1.0 / r_s], k, dp, 0).unwrap();
            let exact = area * ((r_s + k as f64 * dp) / r_s).powi(2);
            assert_relative_eq!(a_k, exact, epsilon = 1e-12 * area);
        }

        // flat shell: all layers carry the particle area
        for k in 0..4 {
            assert_eq!(
                projected_layer_area(area, &[0.0, 0.0], k, dp, 0).unwrap(),
                area
            );
        }

        // layer past the center of curvature is rejected
        assert!(projected_layer_area(area, &[-1.0 / (2.0 * dp), 0.0], 3, dp, 9).is_err());
    }

    fn flat_shell_wall_2d(dp: f64, n_half: i32) -> (Vec<Vect<2>>, Vec<Vect<2>>, Vec<f64>) {
        // shell mid-surface half a spacing below y = 0, fluid above
        let mut pos = Vec::new();
        for ix in -n_half..=n_half {
            pos.push(Vect::<2>::new(ix as f64 * dp, -0.5 * dp));
        }
        let n = pos.len();
        (pos, vec![Vect::<2>::new(0.0, 1.0); n], vec![dp; n])
    }

    /// The projected shell kernel sum over a flat wall reproduces the
    /// half-space number density of an equivalent volume-wall discretization.
    #[test]
    fn flat_shell_matches_volume_wall_number_density() {
        let dp = 0.01;
        let kernel = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let (shell_pos, normals, areas) = flat_shell_wall_2d(dp, 12);
        let n_shell = shell_pos.len();
        let curv = vec![[0.0, 0.0]; n_shell];
        let zero = vec![Vect::<2>::zeros(); n_shell];
        let layer_count = (kernel.support_radius() / dp).ceil() as usize;
        let shell = ShellGeom {
            pos: &shell_pos,
            vel: &zero,
            acc_prev: &zero,
            normal_into_fluid: &normals,
            area: &areas,
            curvature: &curv,
            layer_spacing: dp,
            layer_count,
        };

        // equivalent volume wall: layers at -0.5 dp, -1.5 dp, ...
        let mut wall_pos = Vec::new();
        for k in 0..layer_count {
            for ix in -12..=12 {
                wall_pos.push(Vect::<2>::new(
                    ix as f64 * dp,
                    -(k as f64 + 0.5) * dp,
                ));
            }
        }

        // fluid probe points at several heights above the wall
        for row in 0..3 {
            let probe = Vect::<2>::new(0.0, (row as f64 + 0.5) * dp);
            let mut shell_sum = 0.0;
            for a in 0..n_shell {
                let sums =
                    shell_pair_sums(&probe, &shell, a, kernel.h(), &kernel).unwrap();
                shell_sum += sums.w_vol / (dp * dp);
            }
            let mut wall_sum = 0.0;
            for w in &wall_pos {
                let r = (probe - w).norm();
                wall_sum += kernel.value(r);
            }
            if wall_sum == 0.0 {
                continue;
            }
            assert_relative_eq!(shell_sum, wall_sum, max_relative = 1e-10);
        }
    }

    #[test]
    fn shell_direction_on_normal_line_and_empty_overlap() {
        let dp = 0.01;
        let kernel = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let (shell_pos, normals, areas) = flat_shell_wall_2d(dp, 6);
        let n_shell = shell_pos.len();
        let curv = vec![[0.0, 0.0]; n_shell];
        let zero = vec![Vect::<2>::zeros(); n_shell];
        let shell = ShellGeom {
            pos: &shell_pos,
            vel: &zero,
            acc_prev: &zero,
            normal_into_fluid: &normals,
            area: &areas,
            curvature: &curv,
            layer_spacing: dp,
            layer_count: 3,
        };
        let center = n_shell / 2;

        // probe on the normal line of the center particle
        let probe = Vect::<2>::new(0.0, 0.5 * dp);
        let terms = corrected_shell_kernel(&probe, &shell, center, dp, &kernel).unwrap();
        let e = terms.e_bar.expect("direction defined inside support");
        assert_abs_diff_eq!(e, Vect::<2>::new(0.0, 1.0), epsilon = 1e-10);
        assert!(terms.w_bar > 0.0 && terms.dwdr_bar < 0.0);

        // far probe: zero value, zero gradient, undefined direction
        let far = Vect::<2>::new(0.0, 10.0 * dp);
        let terms = corrected_shell_kernel(&far, &shell, center, dp, &kernel).unwrap();
        assert_eq!(terms.w_bar, 0.0);
        assert_eq!(terms.dwdr_bar, 0.0);
        assert!(terms.e_bar.is_none());
    }

    /// A quiescent matched-pressure state produces no coupling forces, and
    /// whatever forces arise in a moving state obey action-reaction exactly.
    #[test]
    fn action_reaction_and_quiescent_state() {
        let dp = 0.01;
        let kernel = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let mat = FluidMaterial::new(1000.0, 1e-3, 10.0).unwrap();

        // fluid block above a flat shell wall
        let mut fluid_pos = Vec::new();
        for ix in -6i32..=6 {
            for iy in 0..5 {
                fluid_pos.push(Vect::<2>::new(
                    ix as f64 * dp,
                    (iy as f64 + 0.5) * dp,
                ));
            }
        }
        let mut fluid = FluidField::with_lattice(fluid_pos, dp, 1000.0);
        let (shell_pos, normals, areas) = flat_shell_wall_2d(dp, 9);
        let n_shell = shell_pos.len();
        let curv = vec![[0.0, 0.0]; n_shell];
        let zero = vec![Vect::<2>::zeros(); n_shell];
        let shell = ShellGeom {
            pos: &shell_pos,
            vel: &zero,
            acc_prev: &zero,
            normal_into_fluid: &normals,
            area: &areas,
            curvature: &curv,
            layer_spacing: dp,
            layer_count: 3,
        };
        let pairs = NeighborList::build_cross(
            &fluid.pos,
            &shell_pos,
            kernel.support_radius() + 3.0 * dp,
            &kernel,
        )
        .unwrap();

        // quiescent, matched pressures: no forces at all
        fluid.update_pressure_and_volume(&mat);
        let forces = coupling_forces(
            &fluid,
            &mat,
            &Vect::zeros(),
            &kernel,
            None,
            Some((&shell, &pairs)),
        )
        .unwrap();
        for i in 0..fluid.len() {
            assert_abs_diff_eq!(forces.fluid_acc[i].norm(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(forces.fluid_drho[i], 0.0, epsilon = 1e-9);
        }

        // moving, pressurized state: total fluid force + total reaction = 0
        for i in 0..fluid.len() {
            fluid.vel[i] = Vect::<2>::new(0.2 * (i as f64 * 0.37).sin(), -0.1);
            fluid.rho[i] = 1000.0 * (1.0 + 0.005 * (i as f64 * 0.23).cos());
        }
        fluid.update_pressure_and_volume(&mat);
        let forces = coupling_forces(
            &fluid,
            &mat,
            &Vect::zeros(),
            &kernel,
            None,
            Some((&shell, &pairs)),
        )
        .unwrap();
        let mut total = Vect::<2>::zeros();
        let mut scale = 0.0f64;
        for i in 0..fluid.len() {
            total += forces.fluid_acc[i] * fluid.mass[i];
            scale += (forces.fluid_acc[i] * fluid.mass[i]).norm();
        }
        for a in 0..n_shell {
            total += forces.shell_force(a);
        }
        assert!(scale > 0.0, "moving state must generate coupling forces");
        assert!(
            total.norm() <= 1e-10 * scale,
            "action-reaction drift {} vs scale {scale}",
            total.norm()
        );

        // repulsion: pressurized quiescent fluid is pushed away from the wall
        for i in 0..fluid.len() {
            fluid.vel[i] = Vect::zeros();
            fluid.rho[i] = mat.density_from_pressure(50.0);
        }
        fluid.update_pressure_and_volume(&mat);
        let forces = coupling_forces(
            &fluid,
            &mat,
            &Vect::zeros(),
            &kernel,
            None,
            Some((&shell, &pairs)),
        )
        .unwrap();
        let near = fluid
            .pos
            .iter()
            .position(|p| p[0].abs() < 1e-12 && (p[1] - 0.5 * dp).abs() < 1e-12)
            .unwrap();
        assert!(
            forces.fluid_acc[near][1] > 0.0,
            "pressure must push the fluid off the wall"
        );
    }

    /// Viscous wall force opposes the relative slip velocity, for both the
    /// volume-wall and shell paths.
    #[test]
    fn viscous_force_opposes_slip() {
        let dp = 0.01;
        let kernel = SmoothingKernel::full(2, 1.3 * dp).unwrap();
        let mat = FluidMaterial::new(1000.0, 0.01, 10.0).unwrap();
        let mut fluid = FluidField::with_lattice(
            vec![Vect::<2>::new(0.0, 0.5 * dp)],
            dp,
            1000.0,
        );
        fluid.vel[0] = Vect::<2>::new(0.3, 0.0);
        fluid.update_pressure_and_volume(&mat);

        // single volume-wall particle below
        let wall_pos = vec![Vect::<2>::new(0.0, -0.5 * dp)];
        let zero = vec![Vect::<2>::zeros(); 1];
        let vol = vec![dp * dp];
        let wall = WallGeom {
            pos: &wall_pos,
            vel: &zero,
            acc_prev: &zero,
            vol: &vol,
        };
        let pairs =
            NeighborList::build_cross(&fluid.pos, &wall_pos, kernel.support_radius(), &kernel)
                .unwrap();
        let forces = coupling_forces(
            &fluid,
            &mat,
            &Vect::zeros(),
            &kernel,
            Some((&wall, &pairs)),
            None,
        )
        .unwrap();
        assert!(
            forces.fluid_acc[0][0] < 0.0,
            "drag must oppose the slip, got {}",
            forces.fluid_acc[0][0]
        );
        assert!(forces.wall_viscous_force[0][0] > 0.0);
    }
}
