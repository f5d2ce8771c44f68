//! Reduced-dimension shell solid on Uflyand-Mindlin kinematics: a single
//! particle layer carries mid-surface translations plus pseudo-normal
//! rotations (one angle in 2D, two in 3D), with through-thickness behavior
//! recovered by quadrature of the corrected local Cauchy stress.
//!
//! Local quantities live in each particle's *initial* local frame (tangent
//! axes plus pseudo-normal); `Q0` maps global to initial-local and the
//! current frame `Q` is rebuilt from the evolving pseudo-normal.

use rayon::prelude::*;

use crate::correction;
use crate::error::{Error, Result};
use crate::neighbor::NeighborList;
use crate::solid::LinearElasticMaterial;
use crate::types::{det, Mat, Vect};

/// Transverse-shear correction factor of Mindlin plate theory.
pub const SHEAR_CORRECTION: f64 = 5.0 / 6.0;

/// Orthogonal frame with the last row equal to `normal`; tangent axes are
/// chosen deterministically by crossing the normal with the global axis of
/// smallest magnitude component. Rows are the local basis, so `Q * v_global`
/// is the local representation.
pub fn frame_from_normal<const D: usize>(normal: &Vect<D>) -> Result<Mat<D>> {
    let n = normal.norm();
    if !(n > 1e-6) || !n.is_finite() {
        return Err(Error::Frame(format!(
            "cannot build a local frame from near-zero normal (|n| = {n})"
        )));
    }
    let n_hat = normal / n;
    let mut q = Mat::<D>::zeros();
    match D {
        2 => {
            // tangent = normal rotated by -90 degrees: det Q = +1
            q[(0, 0)] = n_hat[1];
            q[(0, 1)] = -n_hat[0];
            q[(1, 0)] = n_hat[0];
            q[(1, 1)] = n_hat[1];
        }
        3 => {
            let mut smallest = 0;
            for d in 1..3 {
                if n_hat[d].abs() < n_hat[smallest].abs() {
                    smallest = d;
                }
            }
            let mut axis = Vect::<D>::zeros();
            axis[smallest] = 1.0;
            let t1 = (axis - n_hat * n_hat[smallest]).normalize();
            // t2 = n x t1 so that t1 x t2 = n (right-handed)
            let t2 = Vect::<D>::from_fn(|r, _| {
                let (a, b) = (n_hat, t1);
                match r {
                    0 => a[1] * b[2] - a[2] * b[1],
                    1 => a[2] * b[0] - a[0] * b[2],
                    _ => a[0] * b[1] - a[1] * b[0],
                }
            });
            for c in 0..3 {
                q[(0, c)] = t1[c];
                q[(1, c)] = t2[c];
                q[(2, c)] = n_hat[c];
            }
        }
        _ => unreachable!(),
    }
    Ok(q)
}

/// Pseudo-normal in the initial local frame as a function of the rotation
/// angles: `(sin a, cos a)` in 2D, `Ry(b) Rx(a) e_z` in 3D.
pub fn normal_from_angles<const D: usize>(angles: &[f64; 2]) -> Vect<D> {
    let mut n = Vect::<D>::zeros();
    match D {
        2 => {
            n[0] = angles[0].sin();
            n[1] = angles[0].cos();
        }
        3 => {
            let (sa, ca) = angles[0].sin_cos();
            let (sb, cb) = angles[1].sin_cos();
            n[0] = ca * sb;
            n[1] = -sa;
            n[2] = ca * cb;
        }
        _ => unreachable!(),
    }
    n
}

/// Rate of the local pseudo-normal for given angles and angle rates.
pub fn normal_rate_from_angles<const D: usize>(angles: &[f64; 2], rates: &[f64; 2]) -> Vect<D> {
    let mut dn = Vect::<D>::zeros();
    match D {
        2 => {
            let (s, c) = angles[0].sin_cos();
            dn[0] = c * rates[0];
            dn[1] = -s * rates[0];
        }
        3 => {
            let (sa, ca) = angles[0].sin_cos();
            let (sb, cb) = angles[1].sin_cos();
            // d n / d alpha, d n / d beta
            dn[0] = -sa * sb * rates[0] + ca * cb * rates[1];
            dn[1] = -ca * rates[0];
            dn[2] = -sa * cb * rates[0] - ca * sb * rates[1];
        }
        _ => unreachable!(),
    }
    dn
}

/// Angle accelerations from the local pseudo-normal acceleration, removing
/// the rate-quadratic curvature terms of the parametrization. The angle
/// tangent vectors are orthogonal, which gives the closed-form projection.
pub fn angle_accel_from_normal_accel<const D: usize>(
    angles: &[f64; 2],
    rates: &[f64; 2],
    n_acc_local: &Vect<D>,
) -> [f64; 2] {
    match D {
        2 => {
            let (s, c) = angles[0].sin_cos();
            let n_phi = [c, -s];
            // c = n_acc + n * phidot^2; the projection onto n_phi drops the
            // quadratic part because n_phi . n = 0
            [n_phi[0] * n_acc_local[0] + n_phi[1] * n_acc_local[1], 0.0]
        }
        3 => {
            let (sa, ca) = angles[0].sin_cos();
            let (sb, cb) = angles[1].sin_cos();
            let n_a = Vect::<D>::from_fn(|r, _| match r {
                0 => -sa * sb,
                1 => -ca,
                _ => -sa * cb,
            });
            let n_b = Vect::<D>::from_fn(|r, _| match r {
                0 => ca * cb,
                1 => 0.0,
                _ => -ca * sb,
            });
            let n = normal_from_angles::<D>(angles);
            let n_aa = -n;
            let n_bb = Vect::<D>::from_fn(|r, _| match r {
                0 => -ca * sb,
                1 => 0.0,
                _ => -ca * cb,
            });
            let n_ab = Vect::<D>::from_fn(|r, _| match r {
                0 => -sa * cb,
                1 => 0.0,
                _ => sa * sb,
            });
            let c = n_acc_local
                - n_aa * (rates[0] * rates[0])
                - n_ab * (2.0 * rates[0] * rates[1])
                - n_bb * (rates[1] * rates[1]);
            let cos2 = (ca * ca).max(1e-10);
            [n_a.dot(&c), n_b.dot(&c) / cos2]
        }
        _ => unreachable!(),
    }
}

/// Eulerian Almansi strain `(I - F^-T F^-1) / 2`.
pub fn almansi_strain<const D: usize>(f_local: &Mat<D>, particle: usize) -> Result<Mat<D>> {
    let f_inv = f_local
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or(Error::InvertedShell(particle))?;
    Ok((Mat::<D>::identity() - f_inv.transpose() * f_inv) * 0.5)
}

/// Plane-stress correction: the thickness-direction strain entry is replaced
/// by `-nu (eps_xx + eps_yy) / (1 - nu)` (the in-plane trace in 2D is just
/// the tangential entry).
pub fn plane_stress_correct<const D: usize>(strain: &Mat<D>, poisson: f64) -> Mat<D> {
    let mut e = *strain;
    let z = D - 1;
    let mut in_plane_trace = 0.0;
    for d in 0..z {
        in_plane_trace += e[(d, d)];
    }
    e[(z, z)] = -poisson * in_plane_trace / (1.0 - poisson);
    e
}

/// Cauchy stress from the corrected local strain with transverse-shear
/// scaling; the thickness-normal component vanishes identically once the
/// plane-stress correction is in the strain.
pub fn corrected_stress<const D: usize>(
    corrected_strain: &Mat<D>,
    mat: &LinearElasticMaterial,
) -> Mat<D> {
    let mut s = mat.pk2_stress(corrected_strain);
    let z = D - 1;
    for d in 0..z {
        s[(d, z)] *= SHEAR_CORRECTION;
        s[(z, d)] *= SHEAR_CORRECTION;
    }
    s
}

/// Single-layer shell particle state. Deformation gradients are stored in
/// each particle's initial local frame, split into the mid-surface part and
/// the bending (director-gradient) part: `F(chi) = F_mid + chi F_bend`.
#[derive(Debug, Clone)]
pub struct ShellField<const D: usize> {
    pub pos0: Vec<Vect<D>>,
    pub pos: Vec<Vect<D>>,
    pub vel: Vec<Vect<D>>,
    pub acc: Vec<Vect<D>>,
    /// Current global pseudo-normal (unit).
    pub normal: Vec<Vect<D>>,
    pub normal0: Vec<Vect<D>>,
    /// Local pseudo-normal, its rate and the rotation description.
    pub n_local: Vec<Vect<D>>,
    pub n_rate_local: Vec<Vect<D>>,
    pub angles: Vec<[f64; 2]>,
    pub angle_rates: Vec<[f64; 2]>,
    pub angle_acc: Vec<[f64; 2]>,
    pub q0: Vec<Mat<D>>,
    /// Reference correction matrix (global coordinates), shared by the
    /// position and pseudo-normal gradient corrections.
    pub b0: Vec<Mat<D>>,
    pub f_mid: Vec<Mat<D>>,
    pub f_bend: Vec<Mat<D>>,
    pub f_mid_rate: Vec<Mat<D>>,
    pub f_bend_rate: Vec<Mat<D>>,
    /// Reduced measure: area in 3D, length in 2D.
    pub area0: Vec<f64>,
    pub thickness: f64,
    pub rho0: f64,
    pub rho: Vec<f64>,
    pub clamped: Vec<bool>,
    /// Translation pinned, rotations free (simply-supported edges).
    pub pinned: Vec<bool>,
    /// Count of pseudo-normal renormalizations (drift beyond 1e-6).
    pub renormalizations: usize,
}

impl<const D: usize> ShellField<D> {
    /// Builds frames and reference correction matrices from mid-surface
    /// positions and unit pseudo-normals. Returns the field plus the count
    /// of degenerate stencils that fell back to the identity correction.
    pub fn new(
        pos0: Vec<Vect<D>>,
        normals: Vec<Vect<D>>,
        area0: Vec<f64>,
        thickness: f64,
        rho0: f64,
        reference: &NeighborList<D>,
    ) -> Result<(Self, usize)> {
        let n = pos0.len();
        let mut q0 = Vec::with_capacity(n);
        for (i, nrm) in normals.iter().enumerate() {
            if (nrm.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::DegenerateNormal(i));
            }
            q0.push(frame_from_normal(nrm)?);
        }
        let mut fallbacks = 0;
        let mut b0 = Vec::with_capacity(n);
        for i in 0..n {
            let m_global = correction::moment_matrix(reference.neighbors(i), |j| {
                area0[j as usize]
            });
            let m_local = q0[i] * m_global * q0[i].transpose();
            b0.push(match invert_in_plane(&m_local, i) {
                Ok(b_local) => q0[i].transpose() * b_local * q0[i],
                Err(_) => {
                    fallbacks += 1;
                    Mat::<D>::identity()
                }
            });
        }
        let mut n_local0 = Vect::<D>::zeros();
        n_local0[D - 1] = 1.0;
        Ok((
            Self {
                pos: pos0.clone(),
                vel: vec![Vect::zeros(); n],
                acc: vec![Vect::zeros(); n],
                normal: normals.clone(),
                normal0: normals,
                n_local: vec![n_local0; n],
                n_rate_local: vec![Vect::zeros(); n],
                angles: vec![[0.0; 2]; n],
                angle_rates: vec![[0.0; 2]; n],
                angle_acc: vec![[0.0; 2]; n],
                q0,
                b0,
                f_mid: vec![Mat::identity(); n],
                f_bend: vec![Mat::zeros(); n],
                f_mid_rate: vec![Mat::zeros(); n],
                f_bend_rate: vec![Mat::zeros(); n],
                area0,
                thickness,
                rho0,
                rho: vec![rho0; n],
                clamped: vec![false; n],
                pinned: vec![false; n],
                renormalizations: 0,
                pos0,
            },
            fallbacks,
        ))
    }

    pub fn len(&self) -> usize {
        self.pos0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos0.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.rho0 * self.area0[i] * self.thickness
    }

    /// Particle volume `A * d`.
    pub fn volume0(&self, i: usize) -> f64 {
        self.area0[i] * self.thickness
    }

    pub fn max_speed(&self) -> f64 {
        self.vel.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_acceleration(&self) -> f64 {
        self.acc.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    pub fn max_angle_rate(&self) -> f64 {
        self.angle_rates
            .iter()
            .fold(0.0f64, |m, r| m.max(r[0].abs()).max(r[1].abs()))
    }

    pub fn max_angle_acc(&self) -> f64 {
        self.angle_acc
            .iter()
            .fold(0.0f64, |m, r| m.max(r[0].abs()).max(r[1].abs()))
    }
}

/// Inverts the in-plane block of a local moment matrix and embeds it with a
/// unit thickness entry; the manifold moment sum has no thickness content.
fn invert_in_plane<const D: usize>(m_local: &Mat<D>, particle: usize) -> Result<Mat<D>> {
    let mut out = Mat::<D>::identity();
    match D {
        2 => {
            let m = m_local[(0, 0)];
            if m.abs() < 1e-12 {
                return Err(Error::DegenerateNeighborhood {
                    particle,
                    reason: "vanishing tangential moment sum".into(),
                });
            }
            out[(0, 0)] = 1.0 / m;
        }
        3 => {
            let (a, b, c, d) = (
                m_local[(0, 0)],
                m_local[(0, 1)],
                m_local[(1, 0)],
                m_local[(1, 1)],
            );
            let det2 = a * d - b * c;
            let norm = a.abs() + b.abs() + c.abs() + d.abs();
            if det2.abs() < 1e-10 * norm.max(1e-300) * norm.max(1e-300) {
                return Err(Error::DegenerateNeighborhood {
                    particle,
                    reason: "singular in-plane moment block".into(),
                });
            }
            out[(0, 0)] = d / det2;
            out[(0, 1)] = -b / det2;
            out[(1, 0)] = -c / det2;
            out[(1, 1)] = a / det2;
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// Through-thickness 3-point Gauss rule on `[-d/2, d/2]`.
fn gauss_points(d: f64) -> [(f64, f64); 3] {
    let x = 0.5 * d * (3.0f64 / 5.0).sqrt();
    let half = 0.5 * d;
    [
        (-x, half * 5.0 / 9.0),
        (0.0, half * 8.0 / 9.0),
        (x, half * 5.0 / 9.0),
    ]
}

/// Per-particle resultants prepared for the momentum gather.
#[derive(Debug, Clone)]
struct Resultants<const D: usize> {
    /// `J N F_m^-T B0` (global coordinates)
    tn: Mat<D>,
    /// `J M F_m^-T B0` (global coordinates)
    tm: Mat<D>,
    /// `J (Q0)^T q_l` (global vector)
    shear: Vect<D>,
}

/// Stress resultants at the current state of one particle. The transverse
/// shear vector enters the angular equation with the restoring orientation
/// (a tilted director with an undeformed mid-surface is pushed back).
fn particle_resultants<const D: usize>(
    field: &ShellField<D>,
    mat: &LinearElasticMaterial,
    h_s: f64,
    a: usize,
) -> Result<Resultants<D>> {
    let q_cur = frame_from_normal(&field.normal[a])?;
    let rot = q_cur * field.q0[a].transpose();
    let damping_scale = mat.damping_a * mat.rho_s * mat.c_s * h_s * 0.5;
    let z = D - 1;

    let mut n_res = Mat::<D>::zeros();
    let mut m_res = Mat::<D>::zeros();
    for (chi, weight) in gauss_points(field.thickness) {
        let f = field.f_mid[a] + field.f_bend[a] * chi;
        let strain_initial = almansi_strain(&f, a)?;
        let strain_cur = rot * strain_initial * rot.transpose();
        let corrected = plane_stress_correct(&strain_cur, mat.poisson);
        let mut sigma = corrected_stress(&corrected, mat);

        // Kelvin-Voigt damping on the deformation rate, treated like the
        // elastic part (no thickness-normal component, scaled shear).
        let f_rate = field.f_mid_rate[a] + field.f_bend_rate[a] * chi;
        let mut damp =
            rot * ((f_rate.transpose() * f + f.transpose() * f_rate) * damping_scale)
                * rot.transpose();
        damp[(z, z)] = 0.0;
        for d in 0..z {
            damp[(d, z)] *= SHEAR_CORRECTION;
            damp[(z, d)] *= SHEAR_CORRECTION;
        }
        sigma += damp;

        n_res += sigma * weight;
        m_res += sigma * (weight * chi);
    }

    // transverse shear resultant, oriented to restore the director
    let mut q_l = Vect::<D>::zeros();
    for d in 0..z {
        q_l[d] = -n_res[(d, z)];
    }

    let f_mid_global = field.q0[a].transpose() * field.f_mid[a] * field.q0[a];
    let j_mid = det(&field.f_mid[a]);
    if j_mid <= 0.0 {
        return Err(Error::InvertedShell(a));
    }
    let f_inv_t = f_mid_global
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or(Error::InvertedShell(a))?
        .transpose();

    let n_global = q_cur.transpose() * n_res * q_cur;
    let m_global = q_cur.transpose() * m_res * q_cur;
    let common = f_inv_t * field.b0[a] * j_mid;
    // q_l lives in the current local frame, so the current frame maps it to
    // global; the initial frame would misdirect the restoring term once the
    // director has rotated.
    Ok(Resultants {
        tn: n_global * common,
        tm: m_global * common,
        shear: q_cur.transpose() * q_l * j_mid,
    })
}

/// Translational and rotational accelerations from the conservation
/// equations:
///
/// ```text
/// d rho0 u''_m = sum_b (T_N,a + T_N,b) grad0 W V0_b
/// (d^3/12) rho0 n'' = sum_b (T_M,a + T_M,b) grad0 W V0_b + J (Q0)^T q_l
/// ```
pub fn shell_rates<const D: usize>(
    field: &ShellField<D>,
    reference: &NeighborList<D>,
    mat: &LinearElasticMaterial,
    h_s: f64,
    ext_accel: &[Vect<D>],
) -> Result<(Vec<Vect<D>>, Vec<Vect<D>>)> {
    let n = field.len();
    let resultants: Vec<Result<Resultants<D>>> = (0..n)
        .into_par_iter()
        .map(|a| particle_resultants(field, mat, h_s, a))
        .collect();
    let mut res = Vec::with_capacity(n);
    for (a, r) in resultants.into_iter().enumerate() {
        res.push(r.map_err(|e| e.in_stage(format!("shell resultants at particle {a}")))?);
    }

    let d = field.thickness;
    let rot_inertia = d * d * d / 12.0;
    let out: Vec<(Vect<D>, Vect<D>)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut trans = Vect::<D>::zeros();
            let mut ang = Vect::<D>::zeros();
            for pair in reference.neighbors(a) {
                let b = pair.j as usize;
                let grad = pair.e_ij * pair.dwdr;
                let v0 = field.area0[b];
                trans += (res[a].tn + res[b].tn) * grad * v0;
                ang += (res[a].tm + res[b].tm) * grad * v0;
            }
            ang += res[a].shear;
            (
                trans / (d * field.rho0) + ext_accel[a],
                ang / (rot_inertia * field.rho0),
            )
        })
        .collect();
    Ok(out.into_iter().unzip())
}

/// Stability time step `0.6 min(dt1, dt2, dt3)`:
/// translational and rotational CFL-type bounds plus the Mindlin dispersion
/// bound with the `(h_s/d)^2` term.
pub fn shell_timestep<const D: usize>(
    field: &ShellField<D>,
    mat: &LinearElasticMaterial,
    h_s: f64,
) -> f64 {
    let inf = f64::INFINITY;
    let guarded_sqrt = |x: f64| if x > 0.0 { (h_s / x).sqrt() } else { inf };
    let dt1 = (h_s / (mat.c_s + field.max_speed())).min(guarded_sqrt(field.max_acceleration()));
    let dt2 = (h_s / (mat.c_s + field.max_angle_rate())).min(guarded_sqrt(field.max_angle_acc()));
    let ratio = h_s / field.thickness;
    let denom = 2.0
        + (std::f64::consts::PI.powi(2) / 12.0)
            * (1.0 - mat.poisson)
            * (1.0 + 1.5 * ratio * ratio);
    let dt3 = h_s
        * ((mat.rho_s * (1.0 - mat.poisson * mat.poisson) / mat.youngs) / denom).sqrt();
    0.6 * dt1.min(dt2).min(dt3)
}

/// Corrected reference gradient of a global vector field, expressed in the
/// particle's initial local frame with the thickness column cleared (the
/// manifold carries no intrinsic thickness gradient).
fn local_surface_gradient<const D: usize>(
    values: &[Vect<D>],
    field: &ShellField<D>,
    reference: &NeighborList<D>,
    a: usize,
) -> Mat<D> {
    let mut sum = Mat::<D>::zeros();
    for pair in reference.neighbors(a) {
        let b = pair.j as usize;
        let grad = pair.e_ij * pair.dwdr;
        sum += (values[b] - values[a]) * grad.transpose() * field.area0[b];
    }
    let mut local = field.q0[a] * (sum * field.b0[a]) * field.q0[a].transpose();
    for r in 0..D {
        local[(r, D - 1)] = 0.0;
    }
    local
}

/// Refreshes the local deformation-gradient rates from the current velocity
/// and pseudo-normal-rate fields:
/// mid-surface columns from corrected gradients, thickness column of the
/// mid part set to the pseudo-normal rate.
pub fn update_deformation_rates<const D: usize>(
    field: &mut ShellField<D>,
    reference: &NeighborList<D>,
) {
    let n_rate_global: Vec<Vect<D>> = (0..field.len())
        .map(|a| field.q0[a].transpose() * field.n_rate_local[a])
        .collect();
    let mid: Vec<Mat<D>> = (0..field.len())
        .into_par_iter()
        .map(|a| {
            let mut g = local_surface_gradient(&field.vel, field, reference, a);
            for r in 0..D {
                g[(r, D - 1)] = field.n_rate_local[a][r];
            }
            g
        })
        .collect();
    let bend: Vec<Mat<D>> = (0..field.len())
        .into_par_iter()
        .map(|a| local_surface_gradient(&n_rate_global, field, reference, a))
        .collect();
    field.f_mid_rate = mid;
    field.f_bend_rate = bend;
}

fn half_state_update<const D: usize>(field: &mut ShellField<D>, half: f64) {
    for a in 0..field.len() {
        field.f_mid[a] += field.f_mid_rate[a] * half;
        field.f_bend[a] += field.f_bend_rate[a] * half;
        field.rho[a] = field.rho0 / det(&field.f_mid[a]);
        field.pos[a] += field.vel[a] * half;
        field.angles[a][0] += field.angle_rates[a][0] * half;
        field.angles[a][1] += field.angle_rates[a][1] * half;
        field.n_local[a] += field.n_rate_local[a] * half;
        let norm = field.n_local[a].norm();
        if (norm - 1.0).abs() > 1e-6 {
            field.n_local[a] /= norm;
            field.renormalizations += 1;
            for r in 0..D {
                field.f_mid[a][(r, D - 1)] = field.n_local[a][r];
            }
        }
        field.normal[a] = field.q0[a].transpose() * field.n_local[a];
    }
}

/// One position-based Verlet substep of the shell: midpoint drift of
/// (F, rho, r, angles, pseudo-normal), resultant evaluation, velocity and
/// angular-rate kick, consistent pseudo-normal rate, final half drift.
pub fn shell_substep<const D: usize>(
    field: &mut ShellField<D>,
    reference: &NeighborList<D>,
    mat: &LinearElasticMaterial,
    h_s: f64,
    dt: f64,
    ext_accel: &[Vect<D>],
) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Scheduling(format!(
            "shell substep requires dt > 0, got {dt}"
        )));
    }
    let half = 0.5 * dt;

    update_deformation_rates(field, reference);
    half_state_update(field, half);

    let (trans_acc, normal_acc) = shell_rates(field, reference, mat, h_s, ext_accel)?;
    for a in 0..field.len() {
        if field.clamped[a] {
            field.acc[a] = Vect::zeros();
            field.vel[a] = Vect::zeros();
            field.angle_acc[a] = [0.0; 2];
            field.angle_rates[a] = [0.0; 2];
            field.n_rate_local[a] = Vect::zeros();
            continue;
        }
        field.acc[a] = if field.pinned[a] {
            Vect::zeros()
        } else {
            trans_acc[a]
        };
        if field.pinned[a] {
            field.vel[a] = Vect::zeros();
        }
        field.vel[a] += field.acc[a] * dt;

        let n_acc_local = field.q0[a] * normal_acc[a];
        field.angle_acc[a] = angle_accel_from_normal_accel::<D>(
            &field.angles[a],
            &field.angle_rates[a],
            &n_acc_local,
        );
        field.angle_rates[a][0] += field.angle_acc[a][0] * dt;
        field.angle_rates[a][1] += field.angle_acc[a][1] * dt;
    }

    // final half drift with updated rates; the pseudo-normal rate is made
    // kinematically consistent with the new angles and angle rates
    update_deformation_rates(field, reference);
    for a in 0..field.len() {
        field.angles[a][0] += field.angle_rates[a][0] * half;
        field.angles[a][1] += field.angle_rates[a][1] * half;
        field.n_rate_local[a] =
            normal_rate_from_angles::<D>(&field.angles[a], &field.angle_rates[a]);
    }
    // the mid deformation rate thickness column tracks the new normal rate
    for a in 0..field.len() {
        for r in 0..D {
            field.f_mid_rate[a][(r, D - 1)] = field.n_rate_local[a][r];
        }
    }
    for a in 0..field.len() {
        field.f_mid[a] += field.f_mid_rate[a] * half;
        field.f_bend[a] += field.f_bend_rate[a] * half;
        let j = det(&field.f_mid[a]);
        if j <= 0.0 {
            return Err(Error::InvertedShell(a));
        }
        field.rho[a] = field.rho0 / j;
        field.pos[a] += field.vel[a] * half;
        field.n_local[a] += field.n_rate_local[a] * half;
        let norm = field.n_local[a].norm();
        if (norm - 1.0).abs() > 1e-6 {
            field.n_local[a] /= norm;
            field.renormalizations += 1;
            for r in 0..D {
                field.f_mid[a][(r, D - 1)] = field.n_local[a][r];
            }
        }
        field.normal[a] = field.q0[a].transpose() * field.n_local[a];
    }
    Ok(())
}
