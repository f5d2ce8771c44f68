//! Time-loop orchestration: dual-criteria fluid stepping, position-based
//! Verlet for the fluid, structure substep coupling, buffer and circuit
//! scheduling, and run control.
//!
//! Stage order per advection step: compaction and neighbor rebuild, density
//! re-initialization, correction matrices, transport correction, then the
//! acoustic loop (fluid rates including FSI, Verlet substep, buffer cycle,
//! outlet circuits, structure substeps), and finally diagnostics.

use crate::coupling::{self, ShellGeom, WallGeom};
use crate::error::{Error, Result};
use crate::fluid::{self, FluidField, FluidMaterial, PressureMode};
use crate::gates::{self, Buffer, BufferRole, FlowLedger, OutletCircuit, ParticleTag};
use crate::gauges;
use crate::kernel::SmoothingKernel;
use crate::neighbor::NeighborList;
use crate::scenario::{Assembly, ProbeQuantity, ScenarioSpec, ShellBody, SurfaceMap, WallBody};
use crate::solid::{self, LinearElasticMaterial};
use crate::shell as shell_mod;
use crate::types::{Mat, Vect};

pub const CFL_ADVECTION: f64 = 0.25;
pub const CFL_ACOUSTIC: f64 = 0.6;

/// Advection time step `CFL_ad min(h / |v|max, rho h^2 / eta)`; the velocity
/// scale includes the prescribed inlet peak.
pub fn advection_dt(h: f64, v_max: f64, rho: f64, eta: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("smoothing length must be positive, got {h}")));
    }
    let convective = if v_max > 0.0 { h / v_max } else { f64::INFINITY };
    let viscous = if eta > 0.0 {
        rho * h * h / eta
    } else {
        f64::INFINITY
    };
    let dt = CFL_ADVECTION * convective.min(viscous);
    if !dt.is_finite() {
        // quiescent inviscid state: fall back to the acoustic scale
        return Ok(f64::INFINITY);
    }
    Ok(dt)
}

/// Acoustic time step `CFL_ac h / (c_f + |v|max)`.
pub fn acoustic_dt(h: f64, c_f: f64, v_max: f64) -> f64 {
    CFL_ACOUSTIC * h / (c_f + v_max)
}

/// Structure substep count within one acoustic step.
pub fn couple_substeps(dt_ac: f64, dt_s: f64) -> usize {
    (dt_ac / dt_s).floor() as usize + 1
}

/// Per-cycle wall-shear accumulators: trapezoidal `int tau dt` and
/// `int |tau| dt`, finalized into TAWSS/OSI at each completed cycle.
#[derive(Debug, Clone)]
pub struct ShearAccumulator<const D: usize> {
    period: f64,
    cycle_start: f64,
    t_prev: Option<f64>,
    tau_prev: Vec<Vect<D>>,
    vec_int: Vec<Vect<D>>,
    mag_int: Vec<f64>,
    pub tawss: Vec<f64>,
    pub osi: Vec<f64>,
    pub completed_cycles: usize,
    /// Latest instantaneous shear sample.
    pub latest: Vec<Vect<D>>,
}

impl<const D: usize> ShearAccumulator<D> {
    pub fn new(n: usize, period: f64) -> Self {
        Self {
            period,
            cycle_start: 0.0,
            t_prev: None,
            tau_prev: vec![Vect::zeros(); n],
            vec_int: vec![Vect::zeros(); n],
            mag_int: vec![0.0; n],
            tawss: vec![0.0; n],
            osi: vec![0.0; n],
            completed_cycles: 0,
            latest: vec![Vect::zeros(); n],
        }
    }

    pub fn sample(&mut self, t: f64, tau: &[Vect<D>]) {
        if let Some(tp) = self.t_prev {
            let dt = t - tp;
            if dt > 0.0 {
                for i in 0..tau.len() {
                    self.vec_int[i] += (self.tau_prev[i] + tau[i]) * (0.5 * dt);
                    self.mag_int[i] +=
                        0.5 * (self.tau_prev[i].norm() + tau[i].norm()) * dt;
                }
            }
        }
        self.latest.copy_from_slice(tau);
        self.tau_prev.copy_from_slice(tau);
        self.t_prev = Some(t);
        if t - self.cycle_start >= self.period {
            let elapsed = t - self.cycle_start;
            for i in 0..tau.len() {
                self.tawss[i] = self.mag_int[i] / elapsed;
                self.osi[i] = if self.mag_int[i] > 0.0 {
                    0.5 * (1.0 - (self.vec_int[i].norm() / self.mag_int[i]).min(1.0))
                } else {
                    0.0
                };
                self.vec_int[i] = Vect::zeros();
                self.mag_int[i] = 0.0;
            }
            self.cycle_start = t;
            self.completed_cycles += 1;
        }
    }
}

/// Time-series diagnostics collected once per advection step.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics<const D: usize> {
    pub times: Vec<f64>,
    /// Per probe: interpolated velocity (None when out of support).
    pub probe_velocity: Vec<Vec<Option<Vect<D>>>>,
    pub probe_pressure: Vec<Vec<Option<f64>>>,
    /// Per outlet buffer: (volumetric flow rate, absolute circuit pressure).
    pub outlet_series: Vec<Vec<(f64, f64)>>,
    /// Totals of the structure reactions: (pressure force, viscous force).
    pub wall_force_series: Vec<(Vect<D>, Vect<D>)>,
    /// Displacement magnitude of the solid particle nearest the solid probe.
    pub solid_probe_series: Vec<f64>,
    pub max_density_deviation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub warnings: Vec<String>,
    pub correction_fallbacks: usize,
    pub buffer_events: usize,
    pub advection_steps: usize,
    pub acoustic_steps: usize,
    pub structure_substeps: usize,
}

/// Owner of the mutable simulation state.
pub struct Simulation<const D: usize> {
    pub spec: ScenarioSpec,
    pub dp: f64,
    pub kernel_fluid: SmoothingKernel,
    pub h_solid: f64,
    pub fluid_mat: FluidMaterial,
    pub solid_mat: Option<LinearElasticMaterial>,
    pub gravity: Vect<D>,
    pub sigma0: f64,

    pub fluid: FluidField<D>,
    pub tags: Vec<ParticleTag>,
    drho_prev: Vec<f64>,
    b: Vec<Mat<D>>,
    mode: Vec<PressureMode>,
    contrib: coupling::WallStencilContrib<D>,

    fluid_nl: NeighborList<D>,
    wall_pairs: NeighborList<D>,
    shell_pairs: NeighborList<D>,

    pub wall: Option<WallBody<D>>,
    pub shell: Option<ShellBody<D>>,
    pub buffers: Vec<Buffer<D>>,
    pub ledgers: Vec<FlowLedger>,

    pub t: f64,
    pub log: RunLog,
    pub diagnostics: Diagnostics<D>,
    pub wall_shear: Option<ShearAccumulator<D>>,
    pub shell_shear: Option<ShearAccumulator<D>>,

    probes: Vec<Vect<D>>,
    pub probe_quantities: Vec<ProbeQuantity>,
    solid_probe_index: Option<(bool, usize)>,
    peak_inlet_velocity: f64,
    last_dt_ad: f64,
    initial_reference_volume: f64,
    warned_compressibility: bool,
}

impl<const D: usize> Simulation<D> {
    pub fn new(assembly: Assembly<D>) -> Result<Self> {
        let Assembly {
            spec,
            dp,
            h_fluid,
            h_solid,
            fluid_mat,
            gravity,
            fluid,
            tags,
            buffers,
            ledgers,
            outlet_init,
            wall,
            shell,
            solid_mat,
            probes,
            probe_quantities,
            solid_probe,
            peak_inlet_velocity,
        } = assembly;
        let kernel_fluid = SmoothingKernel::full(D, h_fluid)?;
        let sigma0 = fluid::reference_number_density(&kernel_fluid, dp, D);

        // shear-index cycle length from the inlet waveform
        let period = spec
            .boundaries
            .iter()
            .find_map(|b| match &b.role {
                crate::scenario::BoundaryRole::Inlet { waveform, .. } => match waveform {
                    gates::InletWaveform::Fourier { period, .. } => Some(*period),
                    gates::InletWaveform::PiecewiseSystolic { period, .. } => Some(*period),
                    _ => None,
                },
                _ => None,
            })
            .unwrap_or(spec.duration.max(1e-9));

        let wall_shear = wall
            .as_ref()
            .map(|w| ShearAccumulator::new(w.surface.owner.len(), period));
        let shell_shear = shell
            .as_ref()
            .map(|s| ShearAccumulator::new(s.surface.owner.len(), period));

        // nearest solid particle to the displacement probe
        let solid_probe_index = solid_probe.and_then(|target| {
            let nearest = |pos: &[Vect<D>]| {
                pos.iter()
                    .enumerate()
                    .min_by(|a, b| {
                        (a.1 - target)
                            .norm()
                            .partial_cmp(&(b.1 - target).norm())
                            .unwrap()
                    })
                    .map(|(i, _)| i)
            };
            if let Some(s) = &shell {
                nearest(&s.field.pos0).map(|i| (true, i))
            } else {
                wall.as_ref().and_then(|w| nearest(&w.field.pos0).map(|i| (false, i)))
            }
        });

        let initial_reference_volume =
            fluid.mass.iter().sum::<f64>() / fluid_mat.rho0;

        let mut sim = Self {
            spec,
            dp,
            kernel_fluid,
            h_solid,
            fluid_mat,
            solid_mat,
            gravity,
            sigma0,
            fluid,
            tags,
            drho_prev: Vec::new(),
            b: Vec::new(),
            mode: Vec::new(),
            contrib: coupling::WallStencilContrib {
                number_density: Vec::new(),
                moment: Vec::new(),
                grad_sum: Vec::new(),
            },
            fluid_nl: NeighborList::default(),
            wall_pairs: NeighborList::default(),
            shell_pairs: NeighborList::default(),
            wall,
            shell,
            buffers,
            ledgers,
            t: 0.0,
            log: RunLog::default(),
            diagnostics: Diagnostics::default(),
            wall_shear,
            shell_shear,
            probes,
            probe_quantities,
            solid_probe_index,
            peak_inlet_velocity,
            last_dt_ad: 0.0,
            initial_reference_volume,
            warned_compressibility: false,
        };
        sim.drho_prev = vec![0.0; sim.fluid.len()];

        // Windkessel initialization policy: prescribed initial pressure plus
        // the inlet-derived initial flow estimate
        for (buf, (q0, _area)) in sim.buffers.iter_mut().zip(outlet_init.iter()) {
            if let BufferRole::Outlet {
                circuit: OutletCircuit::Windkessel(w),
                reference_depth,
            } = &mut buf.role
            {
                let q0_vol = if D == 2 { q0 * *reference_depth } else { *q0 };
                let p0 = w.p;
                w.initialize(p0, q0_vol);
                buf.target_pressure = w.p - sim.spec.pressure_offset;
            }
        }

        gates::impose_inlet_velocities(&mut sim.fluid, &sim.tags, &sim.buffers, 0.0);
        sim.fluid.update_pressure_and_volume(&sim.fluid_mat);
        Ok(sim)
    }

    pub fn particle_counts(&self) -> (usize, usize, usize) {
        let fluid = self
            .tags
            .iter()
            .filter(|t| !matches!(t, ParticleTag::Exited))
            .count();
        let wall = self.wall.as_ref().map(|w| w.field.len()).unwrap_or(0);
        let shell = self.shell.as_ref().map(|s| s.field.len()).unwrap_or(0);
        (fluid, wall, shell)
    }

    fn compact(&mut self) {
        if !self
            .tags
            .iter()
            .any(|t| matches!(t, ParticleTag::Exited))
        {
            return;
        }
        let keep: Vec<bool> = self
            .tags
            .iter()
            .map(|t| !matches!(t, ParticleTag::Exited))
            .collect();
        self.fluid.retain(&keep);
        fluid::retain_by_mask(&mut self.tags, &keep);
        fluid::retain_by_mask(&mut self.drho_prev, &keep);
    }

    fn wall_geom(&self) -> Option<(WallGeom<'_, D>, &NeighborList<D>)> {
        self.wall.as_ref().map(|w| {
            (
                WallGeom {
                    pos: &w.field.pos,
                    vel: &w.field.vel,
                    acc_prev: &w.field.acc,
                    vol: &w.field.vol0,
                },
                &self.wall_pairs,
            )
        })
    }

    fn shell_geom(&self) -> Option<(ShellGeom<'_, D>, &NeighborList<D>)> {
        self.shell.as_ref().map(|s| {
            (
                ShellGeom {
                    pos: &s.field.pos,
                    vel: &s.field.vel,
                    acc_prev: &s.field.acc,
                    normal_into_fluid: &s.field.normal,
                    area: &s.field.area0,
                    curvature: &s.curvature,
                    layer_spacing: self.dp,
                    layer_count: (self.kernel_fluid.support_radius() / self.dp).ceil() as usize,
                },
                &self.shell_pairs,
            )
        })
    }

    fn rebuild_configuration(&mut self) -> Result<()> {
        self.compact();
        let cutoff = self.kernel_fluid.support_radius();
        self.fluid_nl = NeighborList::build(&self.fluid.pos, cutoff, &self.kernel_fluid)?;
        if let Some(w) = &self.wall {
            self.wall_pairs = NeighborList::build_cross(
                &self.fluid.pos,
                &w.field.pos,
                cutoff,
                &self.kernel_fluid,
            )?;
        }
        if let Some(s) = &self.shell {
            let layer_extent =
                (self.kernel_fluid.support_radius() / self.dp).ceil() * self.dp;
            self.shell_pairs = NeighborList::build_cross(
                &self.fluid.pos,
                &s.field.pos,
                cutoff + layer_extent,
                &self.kernel_fluid,
            )?;
        }

        self.contrib = coupling::wall_stencil_contributions(
            &self.fluid,
            self.wall_geom().as_ref().map(|(w, p)| (w, *p)),
            self.shell_geom().as_ref().map(|(s, p)| (s, *p)),
            &self.kernel_fluid,
        )?;

        // density re-initialization (buffer residents keep the evolved value)
        let skip: Vec<bool> = self
            .tags
            .iter()
            .map(|t| !matches!(t, ParticleTag::Bulk))
            .collect();
        fluid::reinitialize_density(
            &mut self.fluid,
            &self.fluid_nl,
            &self.kernel_fluid,
            self.fluid_mat.rho0,
            self.sigma0,
            &self.contrib.number_density,
            &skip,
        );
        self.fluid.update_pressure_and_volume(&self.fluid_mat);

        let (b, fallbacks) =
            fluid::fluid_correction_matrices(&self.fluid, &self.fluid_nl, &self.contrib.moment);
        self.b = b;
        self.log.correction_fallbacks += fallbacks;
        self.mode = self
            .tags
            .iter()
            .map(|t| match t {
                ParticleTag::Bulk => PressureMode::Rkgc,
                _ => PressureMode::Plain,
            })
            .collect();

        // transport-velocity position correction, bulk particles only
        let shifts = fluid::transport_correction(
            &self.fluid,
            &self.fluid_nl,
            self.kernel_fluid.h(),
            &self.contrib.grad_sum,
        );
        for i in 0..self.fluid.len() {
            if matches!(self.tags[i], ParticleTag::Bulk) {
                self.fluid.pos[i] += shifts[i];
            }
        }
        Ok(())
    }

    fn velocity_scale(&self) -> f64 {
        self.fluid.max_speed().max(self.peak_inlet_velocity)
    }

    pub fn velocity_scale_public(&self) -> f64 {
        self.velocity_scale()
    }

    /// One full advection step; returns the step size taken.
    pub fn advance_advection_step(&mut self) -> Result<f64> {
        self.rebuild_configuration()
            .map_err(|e| e.in_stage(format!("configuration rebuild at t = {}", self.t)))?;

        let h = self.kernel_fluid.h();
        let v_scale = self.velocity_scale();
        let dt_ac_est = acoustic_dt(h, self.fluid_mat.c_f, v_scale);
        let dt_ad = advection_dt(h, v_scale, self.fluid_mat.rho0, self.spec.eta)?
            .min(200.0 * dt_ac_est);
        let remaining = self.spec.duration - self.t;
        let dt_ad = dt_ad.min(remaining.max(dt_ac_est * 1e-6));
        self.last_dt_ad = dt_ad;

        // acoustic substeps covering the advection window exactly
        let n_ac = (dt_ad / dt_ac_est).ceil().max(1.0) as usize;
        let dt_ac = dt_ad / n_ac as f64;
        for _ in 0..n_ac {
            self.acoustic_step(dt_ac)
                .map_err(|e| e.in_stage(format!("acoustic step at t = {}", self.t)))?;
        }
        self.log.advection_steps += 1;

        self.check_health()?;
        self.record_diagnostics();
        Ok(dt_ad)
    }

    fn acoustic_step(&mut self, dt: f64) -> Result<()> {
        let half = 0.5 * dt;
        let n = self.fluid.len();

        // first half: density (stored rate), pressure, drift
        for i in 0..n {
            self.fluid.rho[i] += half * self.drho_prev[i];
        }
        self.fluid.update_pressure_and_volume(&self.fluid_mat);
        for i in 0..n {
            let v = self.fluid.vel[i];
            self.fluid.pos[i] += v * half;
        }

        // momentum rates: internal pairs, coupling, body force, prescribed
        // pressure modification at outlet buffers
        let mut acc = fluid::momentum_rate(
            &self.fluid,
            &self.fluid_nl,
            &self.b,
            &self.mode,
            &self.fluid_mat,
            self.kernel_fluid.h(),
        );
        let coupling_forces = coupling::coupling_forces(
            &self.fluid,
            &self.fluid_mat,
            &self.gravity,
            &self.kernel_fluid,
            self.wall_geom().as_ref().map(|(w, p)| (w, *p)),
            self.shell_geom().as_ref().map(|(s, p)| (s, *p)),
        )?;
        for i in 0..n {
            acc[i] += coupling_forces.fluid_acc[i] + self.gravity;
        }
        for i in 0..n {
            if let ParticleTag::Buffer(bidx) = self.tags[i] {
                let buf = &self.buffers[bidx as usize];
                if buf.is_outlet() {
                    acc[i] += gates::pressure_boundary_acceleration(
                        &self.fluid,
                        &self.fluid_nl,
                        &self.contrib.grad_sum[i],
                        i,
                        buf.target_pressure,
                    );
                }
            }
        }

        // kick, boundary velocity conditions, second half drift
        for i in 0..n {
            self.fluid.vel[i] += acc[i] * dt;
        }
        let t_next = self.t + dt;
        gates::impose_inlet_velocities(&mut self.fluid, &self.tags, &self.buffers, t_next);
        gates::project_outlet_velocities(&mut self.fluid, &self.tags, &self.buffers);
        for i in 0..n {
            let v = self.fluid.vel[i];
            self.fluid.pos[i] += v * half;
        }

        // density rate at the end state
        let mut drho = fluid::density_rate(&self.fluid, &self.fluid_nl, &self.fluid_mat);
        let coupling_drho = coupling::coupling_density_rate(
            &self.fluid,
            &self.fluid_mat,
            &self.gravity,
            &self.kernel_fluid,
            self.wall_geom().as_ref().map(|(w, p)| (w, *p)),
            self.shell_geom().as_ref().map(|(s, p)| (s, *p)),
        )?;
        for i in 0..n {
            drho[i] += coupling_drho[i];
            self.fluid.rho[i] += half * drho[i];
        }
        self.drho_prev = drho;
        self.fluid.update_pressure_and_volume(&self.fluid_mat);
        self.t = t_next;

        // bidirectional buffer pass and circuit updates
        let outcome = gates::buffer_cycle(
            &mut self.fluid,
            &mut self.tags,
            &mut self.drho_prev,
            &self.buffers,
            &mut self.ledgers,
            self.t,
            &self.fluid_mat,
        )?;
        self.log.buffer_events += outcome.deleted + outcome.injected;
        self.sync_auxiliary_arrays();
        self.update_circuits(dt)?;

        // structure substeps under frozen FSI forces
        self.advance_structures(dt, &coupling_forces)?;

        self.log.acoustic_steps += 1;
        Ok(())
    }

    fn sync_auxiliary_arrays(&mut self) {
        let n = self.fluid.len();
        self.b.resize(n, Mat::identity());
        self.mode.resize(n, PressureMode::Plain);
        self.contrib.number_density.resize(n, 0.0);
        self.contrib.moment.resize(n, Mat::zeros());
        self.contrib.grad_sum.resize(n, Vect::zeros());
    }

    fn update_circuits(&mut self, dt: f64) -> Result<()> {
        let window = self
            .spec
            .flow_window
            .unwrap_or(if self.last_dt_ad > 0.0 {
                self.last_dt_ad
            } else {
                dt
            });
        for (bidx, buf) in self.buffers.iter_mut().enumerate() {
            if let BufferRole::Outlet {
                circuit,
                reference_depth,
            } = &mut buf.role
            {
                let q_ref = self.ledgers[bidx].flow_rate(self.t, window);
                let q_vol = if D == 2 { q_ref * *reference_depth } else { q_ref };
                circuit.advance(q_vol, dt)?;
                buf.target_pressure = circuit.pressure(q_vol) - self.spec.pressure_offset;
                self.ledgers[bidx].prune(self.t, 10.0 * window.max(dt));
            }
        }
        Ok(())
    }

    fn advance_structures(
        &mut self,
        dt_ac: f64,
        forces: &coupling::CouplingForces<D>,
    ) -> Result<()> {
        if let Some(w) = self.wall.as_mut() {
            if w.dynamic {
                let mat = self.solid_mat.as_ref().expect("deformable wall material");
                let ext: Vec<Vect<D>> = (0..w.field.len())
                    .map(|a| {
                        forces.wall_force(a) / w.field.mass(a) + self.gravity
                    })
                    .collect();
                let dt_s = solid::solid_timestep(&w.field, mat, self.h_solid);
                let k = couple_substeps(dt_ac, dt_s);
                if k > 10_000 {
                    self.log
                        .warnings
                        .push(format!("stiff wall: {k} substeps in one acoustic step"));
                }
                let dt_sub = dt_ac / k as f64;
                for _ in 0..k {
                    solid::volume_solid_substep(
                        &mut w.field,
                        &w.reference,
                        mat,
                        self.h_solid,
                        dt_sub,
                        &|a, _| ext[a],
                    )?;
                    self.log.structure_substeps += 1;
                }
            }
        }
        if let Some(s) = self.shell.as_mut() {
            if s.dynamic {
                let mat = self.solid_mat.as_ref().expect("deformable shell material");
                let ext: Vec<Vect<D>> = (0..s.field.len())
                    .map(|a| forces.shell_force(a) / s.field.mass(a) + self.gravity)
                    .collect();
                let dt_s = shell_mod::shell_timestep(&s.field, mat, self.h_solid);
                let k = couple_substeps(dt_ac, dt_s);
                if k > 10_000 {
                    self.log
                        .warnings
                        .push(format!("stiff shell: {k} substeps in one acoustic step"));
                }
                let dt_sub = dt_ac / k as f64;
                for _ in 0..k {
                    shell_mod::shell_substep(
                        &mut s.field,
                        &s.reference,
                        mat,
                        self.h_solid,
                        dt_sub,
                        &ext,
                    )?;
                    self.log.structure_substeps += 1;
                }
            }
        }

        // shear and force diagnostics from the reaction ledger
        if let Some(w) = &self.wall {
            if let Some(acc) = self.wall_shear.as_mut() {
                let tau = surface_shear(&w.surface, &forces.wall_viscous_force);
                acc.sample(self.t, &tau);
            }
        }
        if let Some(s) = &self.shell {
            if let Some(acc) = self.shell_shear.as_mut() {
                let tau = surface_shear(&s.surface, &forces.shell_viscous_force);
                acc.sample(self.t, &tau);
            }
        }
        let total = |v: &Vec<Vect<D>>| v.iter().fold(Vect::<D>::zeros(), |a, b| a + b);
        self.diagnostics.wall_force_series.push((
            total(&forces.wall_pressure_force) + total(&forces.shell_pressure_force),
            total(&forces.wall_viscous_force) + total(&forces.shell_viscous_force),
        ));
        Ok(())
    }

    fn check_health(&mut self) -> Result<()> {
        for i in 0..self.fluid.len() {
            if self.fluid.pos[i].iter().any(|x| !x.is_finite())
                || self.fluid.vel[i].iter().any(|x| !x.is_finite())
                || !self.fluid.rho[i].is_finite()
            {
                return Err(Error::NonFiniteState {
                    stage: "fluid state".into(),
                    time: self.t,
                    detail: format!("particle {i}"),
                });
            }
        }
        let deviation = self.fluid.max_density_deviation(self.fluid_mat.rho0);
        self.diagnostics.max_density_deviation =
            self.diagnostics.max_density_deviation.max(deviation);
        if deviation > 0.02 && !self.warned_compressibility {
            self.warned_compressibility = true;
            self.log.warnings.push(format!(
                "weak-compressibility breach: max density deviation {:.2}% at t = {:.4}",
                100.0 * deviation,
                self.t
            ));
        }
        Ok(())
    }

    /// Exact particle-inventory audit: the net ledger volume must equal the
    /// initial minus current total reference volume.
    pub fn ledger_conservation_error(&self) -> f64 {
        let current: f64 = self
            .fluid
            .mass
            .iter()
            .zip(self.tags.iter())
            .filter(|(_, t)| !matches!(t, ParticleTag::Exited))
            .map(|(m, _)| m / self.fluid_mat.rho0)
            .sum();
        let net: f64 = self.ledgers.iter().map(|l| l.cumulative).sum();
        net - (self.initial_reference_volume - current)
    }

    fn record_diagnostics(&mut self) {
        self.diagnostics.times.push(self.t);
        if !self.probes.is_empty() {
            let pairs = gauges::probe_pairs(&self.probes, &self.fluid, &self.kernel_fluid)
                .unwrap_or_default();
            let vels = gauges::probe_values(&pairs, &self.fluid, Vect::zeros(), |f, j| f.vel[j]);
            let prs = gauges::probe_values(&pairs, &self.fluid, 0.0, |f, j| f.p[j]);
            self.diagnostics.probe_velocity.push(vels);
            self.diagnostics.probe_pressure.push(prs);
        }
        let mut outlet_row = Vec::new();
        let window = self.spec.flow_window.unwrap_or(self.last_dt_ad.max(1e-12));
        for (bidx, buf) in self.buffers.iter().enumerate() {
            if let BufferRole::Outlet {
                circuit,
                reference_depth,
            } = &buf.role
            {
                let q_ref = self.ledgers[bidx].flow_rate(self.t, window);
                let q_vol = if D == 2 { q_ref * *reference_depth } else { q_ref };
                outlet_row.push((q_vol, circuit.pressure(q_vol)));
            }
        }
        self.diagnostics.outlet_series.push(outlet_row);
        if let Some((is_shell, idx)) = self.solid_probe_index {
            let disp = if is_shell {
                self.shell
                    .as_ref()
                    .map(|s| (s.field.pos[idx] - s.field.pos0[idx]).norm())
            } else {
                self.wall
                    .as_ref()
                    .map(|w| (w.field.pos[idx] - w.field.pos0[idx]).norm())
            };
            self.diagnostics.solid_probe_series.push(disp.unwrap_or(0.0));
        }
    }

    /// Velocity profile across a sampling line/section by Shepard
    /// interpolation.
    pub fn sample_velocity(&self, locations: &[Vect<D>]) -> Result<Vec<Option<Vect<D>>>> {
        let pairs = gauges::probe_pairs(locations, &self.fluid, &self.kernel_fluid)?;
        Ok(gauges::probe_values(&pairs, &self.fluid, Vect::zeros(), |f, j| f.vel[j]))
    }
}

/// Tangential shear on each surface patch from the aggregated viscous
/// reactions of its particle column.
fn surface_shear<const D: usize>(
    surface: &SurfaceMap<D>,
    viscous_force: &[Vect<D>],
) -> Vec<Vect<D>> {
    (0..surface.owner.len())
        .map(|k| {
            let mut f = Vect::<D>::zeros();
            for &idx in &surface.column[k] {
                f += viscous_force[idx];
            }
            gauges::wall_shear_stress(&f, &surface.normal[k], surface.area[k])
                .unwrap_or_else(|_| Vect::zeros())
        })
        .collect()
}

/// Runs a scenario to completion, invoking the sink at the output cadence
/// (including the initial state and the final state).
pub fn run<const D: usize>(
    assembly: Assembly<D>,
    mut frame_sink: Option<&mut dyn FnMut(&Simulation<D>, usize) -> Result<()>>,
) -> Result<Simulation<D>> {
    let mut sim = Simulation::new(assembly)?;
    let mut frame_index = 0usize;
    if let Some(sink) = frame_sink.as_mut() {
        sink(&sim, frame_index)?;
    }
    frame_index += 1;
    let cadence = sim.spec.output_interval;
    let mut next_output = cadence;
    while sim.t < sim.spec.duration - 1e-12 {
        sim.advance_advection_step()?;
        if sim.t + 1e-12 >= next_output {
            if let Some(sink) = frame_sink.as_mut() {
                sink(&sim, frame_index)?;
            }
            frame_index += 1;
            next_output += cadence;
        }
    }
    if sim.spec.duration > 0.0 && (sim.t - (next_output - cadence)).abs() > 1e-12 {
        if let Some(sink) = frame_sink.as_mut() {
            sink(&sim, frame_index)?;
        }
    }
    Ok(sim)
}
