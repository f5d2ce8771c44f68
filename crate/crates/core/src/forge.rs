//! Particle generation: lattice fills of bounded regions, repulsive-pressure
//! relaxation with surface bounding, single-layer shell sheet sampling with
//! smoothed normals, and opening trims.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::SmoothingKernel;
use crate::mesh::TriangleSurface;
use crate::neighbor::NeighborList;
use crate::types::Vect;

/// A bounded region that particles are generated in: an inside test plus a
/// projection used by the surface-bounding step of the relaxation.
pub trait DomainBound<const D: usize> {
    /// Negative inside the region.
    fn signed_distance(&self, p: &Vect<D>) -> f64;
    /// Axis-aligned bounding box.
    fn bounds(&self) -> (Vect<D>, Vect<D>);
    /// Moves a point to signed distance `-offset` (i.e. `offset` inside) if
    /// it currently sits closer to the boundary than that.
    fn bound_inside(&self, p: &Vect<D>, offset: f64) -> Vect<D>;
}

/// Watertight triangle mesh as a 3D domain. The inside sign comes from the
/// outward face normal at the nearest surface point (grid-accelerated),
/// which is robust in the near-boundary band the relaxation operates in.
pub struct MeshBound<'a> {
    mesh: &'a TriangleSurface,
    locator: crate::mesh::TriangleLocator<'a>,
}

impl<'a> MeshBound<'a> {
    pub fn new(mesh: &'a TriangleSurface) -> Self {
        Self {
            mesh,
            locator: mesh.locator(),
        }
    }
}

impl DomainBound<3> for MeshBound<'_> {
    fn signed_distance(&self, p: &Vect<3>) -> f64 {
        let (q, t) = self.locator.nearest_point(p);
        let d = (p - q).norm();
        if (p - q).dot(&self.mesh.normals[t]) >= 0.0 {
            d
        } else {
            -d
        }
    }

    fn bounds(&self) -> (Vect<3>, Vect<3>) {
        self.mesh.bounds()
    }

    fn bound_inside(&self, p: &Vect<3>, offset: f64) -> Vect<3> {
        let (q, t) = self.locator.nearest_point(p);
        let to_p = p - q;
        let d = to_p.norm();
        let signed = if to_p.dot(&self.mesh.normals[t]) >= 0.0 {
            d
        } else {
            -d
        };
        if signed > -offset {
            let inward = if d > 1e-12 * offset {
                to_p / d * (-signed.signum())
            } else {
                -self.mesh.normals[t]
            };
            q + inward * offset
        } else {
            *p
        }
    }
}

/// Axis-aligned lattice sites with spacing `dp` (offset `dp/2`) whose centers
/// lie strictly inside the bound.
pub fn lattice_points<const D: usize>(bound: &dyn DomainBound<D>, dp: f64) -> Result<Vec<Vect<D>>> {
    if !(dp > 0.0) || !dp.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lattice spacing must be positive, got {dp}"
        )));
    }
    let (lo, hi) = bound.bounds();
    let mut counts = [0usize; D];
    for d in 0..D {
        counts[d] = (((hi[d] - lo[d]) / dp).round() as isize).max(0) as usize + 1;
    }
    let mut out = Vec::new();
    let mut idx = [0usize; D];
    'outer: loop {
        let mut p = Vect::<D>::zeros();
        for d in 0..D {
            p[d] = lo[d] + (idx[d] as f64 + 0.5) * dp;
        }
        if bound.signed_distance(&p) < 0.0 {
            out.push(p);
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == D {
                break 'outer;
            }
        }
    }
    Ok(out)
}

/// Lattice fill of a watertight mesh; open meshes are refused.
pub fn lattice_fill_mesh(surface: &TriangleSurface, dp: f64) -> Result<Vec<Vect<3>>> {
    if !surface.watertight {
        return Err(Error::Geometry(
            "lattice fill needs a watertight mesh (open shells may only be sampled)".into(),
        ));
    }
    lattice_points(&MeshBound::new(surface), dp)
}

/// Relaxation progress report. The isotropy metric is the standard deviation
/// of the per-particle kernel-gradient sums; it decreases as the cloud
/// approaches an isotropic distribution.
#[derive(Debug, Clone)]
pub struct RelaxationReport {
    pub iterations: usize,
    pub final_max_shift: f64,
    pub isotropy: Vec<f64>,
}

fn isotropy_metric<const D: usize>(pos: &[Vect<D>], dp: f64, kernel: &SmoothingKernel) -> f64 {
    let nl = match NeighborList::build(pos, kernel.support_radius(), kernel) {
        Ok(nl) => nl,
        Err(_) => return f64::NAN,
    };
    let vol = dp.powi(D as i32);
    let mags: Vec<f64> = (0..pos.len())
        .map(|i| {
            let mut g = Vect::<D>::zeros();
            for pair in nl.neighbors(i) {
                g += pair.e_ij * (pair.dwdr * vol);
            }
            g.norm()
        })
        .collect();
    let mean = mags.iter().sum::<f64>() / mags.len().max(1) as f64;
    (mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / mags.len().max(1) as f64).sqrt()
}

/// Physics-driven relaxation: positions advance down the repulsive
/// background-pressure force `-(2 p0 V/m) sum grad W V` (unit background
/// pressure", step length capped at `0.05 dp`), with every step followed by
/// the surface bounding that keeps centers half a spacing inside the
/// boundary. Stops at `max_steps` or when the largest displacement falls
/// below `1e-3 dp`.
pub fn relax_bulk<const D: usize>(
    pos: &mut [Vect<D>],
    dp: f64,
    bound: &dyn DomainBound<D>,
    max_steps: usize,
) -> Result<RelaxationReport> {
    let kernel = SmoothingKernel::full(D, 1.3 * dp)?;
    let vol = dp.powi(D as i32);
    let mut report = RelaxationReport {
        iterations: 0,
        final_max_shift: 0.0,
        isotropy: vec![isotropy_metric(pos, dp, &kernel)],
    };
    if pos.len() < 2 {
        return Ok(report);
    }
    // damped advection-velocity dynamics: overdamped descent churns because
    // the Wendland repulsion is weak at short range, while a lightly damped
    // velocity field lets crowded regions spread collectively
    let mut vel = vec![Vect::<D>::zeros(); pos.len()];
    let damping = 0.92;
    for step in 0..max_steps {
        separate_coincident(pos, dp, bound);
        let nl = NeighborList::build(pos, kernel.support_radius(), &kernel)?;
        let mut forces: Vec<Vect<D>> = Vec::with_capacity(pos.len());
        let mut max_force = 0.0f64;
        // the Wendland gradient peaks at 0.65 dp and softens inside it, so a
        // short-range core keeps crowded pairs from tunneling below the
        // half-spacing floor the cloud contract requires
        let core_radius = 0.65 * dp;
        let core_scale = 8.0 * kernel.alpha() / kernel.h() * vol;
        for i in 0..pos.len() {
            let mut g = Vect::<D>::zeros();
            let mut core = Vect::<D>::zeros();
            for pair in nl.neighbors(i) {
                g += pair.e_ij * (pair.dwdr * vol);
                if pair.r < core_radius {
                    core += pair.e_ij * (core_scale * (1.0 - pair.r / core_radius));
                }
            }
            let f = -g * 2.0 + core; // unit background pressure and density
            max_force = max_force.max(f.norm());
            forces.push(f);
        }
        if max_force == 0.0 {
            break;
        }
        // time step bounding the fastest particle to a tenth of the spacing
        let dt = (0.1 * dp / max_force).sqrt();
        let mut max_shift = 0.0f64;
        for i in 0..pos.len() {
            vel[i] = (vel[i] + forces[i] * dt) * damping;
            let step_vec = vel[i] * dt;
            let capped = if step_vec.norm() > 0.1 * dp {
                step_vec * (0.1 * dp / step_vec.norm())
            } else {
                step_vec
            };
            let before = pos[i];
            pos[i] += capped;
            pos[i] = bound.bound_inside(&pos[i], 0.5 * dp);
            max_shift = max_shift.max((pos[i] - before).norm());
        }
        report.iterations = step + 1;
        report.final_max_shift = max_shift;
        if step % 10 == 9 {
            report.isotropy.push(isotropy_metric(pos, dp, &kernel));
        }
        if max_shift < 1e-3 * dp {
            break;
        }
    }
    separate_coincident(pos, dp, bound);
    report.isotropy.push(isotropy_metric(pos, dp, &kernel));
    Ok(report)
}

/// Bit-identical particles see no kernel gradient and would never separate;
/// boundary projections (box corners) can produce them. Nudge such pairs
/// apart deterministically and re-apply the bound.
fn separate_coincident<const D: usize>(
    pos: &mut [Vect<D>],
    dp: f64,
    bound: &dyn DomainBound<D>,
) {
    use std::collections::HashMap;
    let mut seen: HashMap<[u64; D], usize> = HashMap::new();
    for i in 0..pos.len() {
        let key = std::array::from_fn(|d| pos[i][d].to_bits());
        if seen.insert(key, i).is_some() {
            let original = pos[i];
            // the kernel gradient vanishes at zero separation, so the nudge
            // must be a meaningful fraction of the spacing to re-engage the
            // repulsion; try axis directions until one survives the bounding
            'candidates: for k in 0..2 * D {
                let mut dir = Vect::<D>::zeros();
                dir[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                let nudged = original + dir * ((0.42 + 0.01 * (i % 7) as f64) * dp);
                let bounded = bound.bound_inside(&nudged, 0.5 * dp);
                if bounded != original {
                    pos[i] = bounded;
                    break 'candidates;
                }
            }
        }
    }
}

/// Single-layer shell particle sheet: mid-surface positions, unit
/// pseudo-normals, per-particle areas and the wall thickness.
#[derive(Debug, Clone)]
pub struct ShellSheet {
    pub pos: Vec<Vect<3>>,
    pub normals: Vec<Vect<3>>,
    pub areas: Vec<f64>,
    pub thickness: f64,
    pub dp: f64,
}

impl ShellSheet {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
}

/// Samples `N = ceil(A_TS / dp^2)` particles over a triangle surface,
/// allocated to faces proportionally to area (a seeded random face subset
/// when there are more faces than particles), evenly placed within each
/// face, then relaxed along the surface with nearest-point projection.
pub fn sample_shell_surface(
    surface: &TriangleSurface,
    dp: f64,
    thickness: f64,
    seed: u64,
    relax_steps: usize,
) -> Result<ShellSheet> {
    if !(dp > 0.0) || !(thickness > 0.0) {
        return Err(Error::InvalidInput(format!(
            "shell sampling needs dp > 0 and thickness > 0 (got {dp}, {thickness})"
        )));
    }
    let n_target = (surface.total_area / (dp * dp)).ceil() as usize;
    if n_target == 0 {
        return Err(Error::Sampling(format!(
            "spacing {dp} exceeds the geometry extent (total area {})",
            surface.total_area
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // allocate counts per face proportionally to area
    let faces: Vec<usize> = if surface.triangles.len() > n_target {
        let mut all: Vec<usize> = (0..surface.triangles.len()).collect();
        all.shuffle(&mut rng);
        all.truncate(n_target);
        all.sort_unstable();
        all
    } else {
        (0..surface.triangles.len()).collect()
    };
    let chosen_area: f64 = faces.iter().map(|&t| surface.areas[t]).sum();
    let mut pos = Vec::with_capacity(n_target);
    let mut normals = Vec::with_capacity(n_target);
    let mut assigned = 0usize;
    for (k, &t) in faces.iter().enumerate() {
        let remaining_faces = faces.len() - k;
        let mut quota =
            ((surface.areas[t] / chosen_area) * n_target as f64).round() as usize;
        if quota == 0 {
            quota = 1;
        }
        // keep the global count on target
        quota = quota.min(n_target - assigned - (remaining_faces - 1));
        quota = quota.max(if n_target > assigned { 1 } else { 0 });
        let [a, b, c] = surface.triangle(t);
        for _ in 0..quota {
            // uniform barycentric placement
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            pos.push(a + (b - a) * u + (c - a) * v);
            normals.push(surface.normals[t]);
            assigned += 1;
        }
        if assigned >= n_target {
            break;
        }
    }

    // on-surface relaxation: tangential repulsion, nearest-point projection
    let locator = surface.locator();
    let kernel = SmoothingKernel::reduced(3, 1.15 * dp)?;
    let area_each = surface.total_area / pos.len() as f64;
    for _ in 0..relax_steps {
        let nl = NeighborList::build(&pos, kernel.support_radius(), &kernel)?;
        let mut shifts: Vec<Vect<3>> = Vec::with_capacity(pos.len());
        let mut max_force = 0.0f64;
        for i in 0..pos.len() {
            let mut g = Vect::<3>::zeros();
            for pair in nl.neighbors(i) {
                g += pair.e_ij * (pair.dwdr * area_each);
            }
            let f = -g * 2.0;
            max_force = max_force.max(f.norm());
            shifts.push(f);
        }
        if max_force == 0.0 {
            break;
        }
        let scale = (0.1 * dp) / max_force;
        let mut max_shift = 0.0f64;
        for (i, s) in shifts.iter().enumerate() {
            let target = pos[i] + s * scale;
            let (projected, t) = locator.nearest_point(&target);
            max_shift = max_shift.max((projected - pos[i]).norm());
            pos[i] = projected;
            normals[i] = surface.normals[t];
        }
        if max_shift < 1e-3 * dp {
            break;
        }
    }

    let n = pos.len();
    Ok(ShellSheet {
        pos,
        normals,
        areas: vec![surface.total_area / n as f64; n],
        thickness,
        dp,
    })
}

/// Kernel-weighted normal smoothing
/// `n_i <- (W0 n_i + sum W_ij n_j) / (W0 + sum W_ij)`, renormalized to unit
/// length afterwards (the shell frame construction requires unit normals).
pub fn smooth_normals(sheet: &mut ShellSheet, kernel: &SmoothingKernel) -> Result<()> {
    let nl = NeighborList::build(&sheet.pos, kernel.support_radius(), kernel)?;
    let w0 = kernel.value(0.0);
    let mut smoothed = Vec::with_capacity(sheet.len());
    for i in 0..sheet.len() {
        let mut num = sheet.normals[i] * w0;
        let mut den = w0;
        for pair in nl.neighbors(i) {
            num += sheet.normals[pair.j as usize] * pair.w;
            den += pair.w;
        }
        let avg = num / den;
        let len = avg.norm();
        if len < 1e-6 {
            return Err(Error::DegenerateNormal(i));
        }
        smoothed.push(avg / len);
    }
    sheet.normals = smoothed;
    Ok(())
}

/// Oriented trim plane: points strictly beyond it (positive side of the
/// normal) are removed.
#[derive(Debug, Clone, Copy)]
pub struct TrimPlane<const D: usize> {
    pub point: Vect<D>,
    pub normal: Vect<D>,
}

/// Removes particles strictly beyond any plane; returns the removed count.
pub fn trim_openings<const D: usize, T>(
    positions: &mut Vec<Vect<D>>,
    attached: &mut [&mut Vec<T>],
    planes: &[TrimPlane<D>],
) -> usize {
    let keep: Vec<bool> = positions
        .iter()
        .map(|p| {
            !planes
                .iter()
                .any(|plane| (p - plane.point).dot(&plane.normal) > 0.0)
        })
        .collect();
    let removed = keep.iter().filter(|k| !**k).count();
    crate::fluid::retain_by_mask(positions, &keep);
    for arr in attached.iter_mut() {
        crate::fluid::retain_by_mask(arr, &keep);
    }
    removed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uv_sphere;
    use approx::assert_relative_eq;

    /// Axis-aligned rectangle in 2D, used as the unit-square polygon case.
    struct Rect2 {
        lo: Vect<2>,
        hi: Vect<2>,
    }

    impl DomainBound<2> for Rect2 {
        fn signed_distance(&self, p: &Vect<2>) -> f64 {
            let dx = (self.lo[0] - p[0]).max(p[0] - self.hi[0]);
            let dy = (self.lo[1] - p[1]).max(p[1] - self.hi[1]);
            if dx <= 0.0 && dy <= 0.0 {
                dx.max(dy)
            } else {
                let ox = dx.max(0.0);
                let oy = dy.max(0.0);
                (ox * ox + oy * oy).sqrt()
            }
        }

        fn bounds(&self) -> (Vect<2>, Vect<2>) {
            (self.lo, self.hi)
        }

        fn bound_inside(&self, p: &Vect<2>, offset: f64) -> Vect<2> {
            let mut q = *p;
            for d in 0..2 {
                q[d] = q[d].clamp(self.lo[d] + offset, self.hi[d] - offset);
            }
            q
        }
    }

    #[test]
    fn unit_square_lattice_count() {
        let rect = Rect2 {
            lo: Vect::<2>::zeros(),
            hi: Vect::<2>::new(1.0, 1.0),
        };
        let pts = lattice_points(&rect, 0.25).unwrap();
        assert_eq!(pts.len(), 16);
        assert!(lattice_points(&rect, 0.0).is_err());
    }

    #[test]
    fn sphere_fill_volume_fraction() {
        let r = 0.1;
        let sphere = uv_sphere(Vect::<3>::zeros(), r, 24, 48);
        let dp = r / 10.0;
        let pts = lattice_fill_mesh(&sphere, dp).unwrap();
        let filled = pts.len() as f64 * dp.powi(3);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        let ratio = filled / exact;
        assert!(
            (0.9..=1.1).contains(&ratio),
            "volume-count ratio {ratio} out of range"
        );
    }

    #[test]
    fn open_mesh_fill_refused() {
        let open = crate::mesh::open_cylinder(
            Vect::<3>::zeros(),
            Vect::<3>::new(1.0, 0.0, 0.0),
            0.1,
            0.5,
            6,
            16,
        );
        assert!(matches!(
            lattice_fill_mesh(&open, 0.01),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn relaxation_improves_perturbed_lattice() {
        let rect = Rect2 {
            lo: Vect::<2>::zeros(),
            hi: Vect::<2>::new(1.0, 1.0),
        };
        let dp = 0.05;
        let mut pos = lattice_points(&rect, dp).unwrap();
        // deterministic perturbation up to 0.3 dp
        for (k, p) in pos.iter_mut().enumerate() {
            let a = (k as f64 * 12.9898).sin() * 43758.5453;
            let b = (k as f64 * 78.233).sin() * 12345.6789;
            p[0] += (a.fract() - 0.5) * 0.6 * dp;
            p[1] += (b.fract() - 0.5) * 0.6 * dp;
            *p = rect.bound_inside(p, 0.5 * dp);
        }
        let min_dist = |pos: &[Vect<2>]| {
            let mut best = f64::INFINITY;
            for i in 0..pos.len() {
                for j in 0..i {
                    best = best.min((pos[i] - pos[j]).norm());
                }
            }
            best
        };
        let before = min_dist(&pos);
        let report = relax_bulk(&mut pos, dp, &rect, 200).unwrap();
        let after = min_dist(&pos);
        assert!(
            after > before,
            "min pairwise distance must increase ({before} -> {after})"
        );
        assert!(after >= 0.5 * dp);

        // monotone isotropy metric over the recorded checkpoints
        let iso = &report.isotropy;
        assert!(
            iso.last().unwrap() < iso.first().unwrap(),
            "isotropy metric must decrease: {iso:?}"
        );

        // bounding contract: all centers at least half a spacing inside
        for p in &pos {
            assert!(rect.signed_distance(p) <= -0.5 * dp + 1e-9);
        }

        // single particle: nothing to do
        let mut lonely = vec![Vect::<2>::new(0.5, 0.5)];
        relax_bulk(&mut lonely, dp, &rect, 50).unwrap();
        assert_eq!(lonely[0], Vect::<2>::new(0.5, 0.5));
    }

    #[test]
    fn shell_particle_count_formula() {
        // N = ceil(A_TS / dp^2)
        let sphere = uv_sphere(Vect::<3>::zeros(), 0.1, 16, 32);
        let dp = 0.02;
        let sheet = sample_shell_surface(&sphere, dp, 0.01, 7, 0).unwrap();
        assert_eq!(
            sheet.len(),
            (sphere.total_area / (dp * dp)).ceil() as usize
        );
        // worked ceiling examples
        assert_eq!((1.0f64 / 0.01).ceil() as usize, 100);
        assert_eq!((1.05e-2f64 / 0.01).ceil() as usize, 2);
    }

    #[test]
    fn sphere_sheet_areas_and_normals() {
        let r = 0.1;
        let sphere = uv_sphere(Vect::<3>::zeros(), r, 32, 64);
        let dp = r / 10.0;
        let mut sheet = sample_shell_surface(&sphere, dp, 0.005, 42, 60).unwrap();
        let exact = 4.0 * std::f64::consts::PI * r * r;
        assert_relative_eq!(sheet.total_area(), exact, max_relative = 0.05);

        // particles stay on the mesh
        for p in &sheet.pos {
            assert!(sphere.signed_distance(p).abs() <= 1e-6 * r);
        }

        let kernel = SmoothingKernel::reduced(3, 1.15 * dp).unwrap();
        smooth_normals(&mut sheet, &kernel).unwrap();

        // cylinder sheet at dp = R/10: smoothed normals within 2 degrees of
        // the exact radial field
        let r_c = 0.1;
        let dp_c = r_c / 10.0;
        let cyl = crate::mesh::open_cylinder(
            Vect::<3>::zeros(),
            Vect::<3>::new(1.0, 0.0, 0.0),
            r_c,
            0.5,
            50,
            128,
        );
        let mut cyl_sheet = sample_shell_surface(&cyl, dp_c, 0.01, 5, 40).unwrap();
        smooth_normals(&mut cyl_sheet, &kernel).unwrap();
        let mut worst: f64 = 0.0;
        for (p, n) in cyl_sheet.pos.iter().zip(cyl_sheet.normals.iter()) {
            let radial = Vect::<3>::new(0.0, p[1], p[2]).normalize();
            worst = worst.max(n.dot(&radial).clamp(-1.0, 1.0).acos());
        }
        assert!(
            worst <= 2.0_f64.to_radians(),
            "smoothed cylinder normals deviate up to {} degrees",
            worst.to_degrees()
        );

        // identical normals are unchanged by smoothing
        let mut flat = ShellSheet {
            pos: (0..5)
                .map(|i| Vect::<3>::new(i as f64 * dp, 0.0, 0.0))
                .collect(),
            normals: vec![Vect::<3>::new(0.0, 0.0, 1.0); 5],
            areas: vec![dp * dp; 5],
            thickness: 0.01,
            dp,
        };
        smooth_normals(&mut flat, &kernel).unwrap();
        for n in &flat.normals {
            assert_relative_eq!((n - Vect::<3>::new(0.0, 0.0, 1.0)).norm(), 0.0);
        }

        // isolated particle keeps its own normal
        let mut single = ShellSheet {
            pos: vec![Vect::<3>::zeros()],
            normals: vec![Vect::<3>::new(1.0, 0.0, 0.0)],
            areas: vec![dp * dp],
            thickness: 0.01,
            dp,
        };
        smooth_normals(&mut single, &kernel).unwrap();
        assert_eq!(single.normals[0], Vect::<3>::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let sphere = uv_sphere(Vect::<3>::zeros(), 0.1, 16, 32);
        let a = sample_shell_surface(&sphere, 0.02, 0.01, 11, 20).unwrap();
        let b = sample_shell_surface(&sphere, 0.02, 0.01, 11, 20).unwrap();
        assert_eq!(a.pos, b.pos);
        let c = sample_shell_surface(&sphere, 0.02, 0.01, 12, 20).unwrap();
        assert!(a.pos != c.pos);
    }

    #[test]
    fn trim_plane_behavior() {
        let mut pos: Vec<Vect<2>> = (0..10)
            .map(|i| Vect::<2>::new(i as f64 * 0.1, 0.0))
            .collect();
        let mut payload: Vec<usize> = (0..10).collect();

        // no plane: identity
        let removed = trim_openings(&mut pos, &mut [&mut payload], &[]);
        assert_eq!(removed, 0);
        assert_eq!(pos.len(), 10);

        // trim everything beyond x = 0.55
        let plane = TrimPlane {
            point: Vect::<2>::new(0.55, 0.0),
            normal: Vect::<2>::new(1.0, 0.0),
        };
        let removed = trim_openings(&mut pos, &mut [&mut payload], &[plane]);
        assert_eq!(removed, 4);
        assert_eq!(pos.len(), 6);
        assert_eq!(payload, vec![0, 1, 2, 3, 4, 5]);

        // all particles beyond the plane: empty set
        let all = TrimPlane {
            point: Vect::<2>::new(-1.0, 0.0),
            normal: Vect::<2>::new(1.0, 0.0),
        };
        let removed = trim_openings(&mut pos, &mut [&mut payload], &[all]);
        assert_eq!(removed, 6);
        assert!(pos.is_empty());
    }

    #[test]
    fn shell_mass_consistency() {
        // sheet mass sum(rho A d) equals rho A_TS d within 5%
        let sphere = uv_sphere(Vect::<3>::zeros(), 0.1, 24, 48);
        let sheet = sample_shell_surface(&sphere, 0.01, 0.004, 3, 30).unwrap();
        let rho = 1100.0;
        let mass: f64 = sheet.areas.iter().map(|a| rho * a * sheet.thickness).sum();
        let exact = rho * sphere.total_area * sheet.thickness;
        assert_relative_eq!(mass, exact, max_relative = 0.05);
    }
}
