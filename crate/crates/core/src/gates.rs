//! In/outlet machinery: four-layer bidirectional buffers with particle
//! injection, deletion and relabeling, inlet velocity waveforms, the
//! flow-rate ledger, constant/resistance/Windkessel outlet circuits, and the
//! pressure-boundary momentum modification.

use crate::error::{Error, Result};
use crate::fluid::{FluidField, FluidMaterial};
use crate::neighbor::NeighborList;
use crate::types::Vect;

/// Role of a fluid particle with respect to the in/outlet buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticleTag {
    Bulk,
    /// Resident in buffer `b`.
    Buffer(u8),
    /// Crossed an opening; kept as an outside ghost until the next
    /// advection-step compaction.
    Exited,
}

/// Time-dependent mean inlet velocity.
#[derive(Debug, Clone)]
pub enum InletWaveform {
    Steady {
        mean: f64,
    },
    /// Half-cosine ramp to `mean` over `t_ref`, constant afterwards.
    Ramp {
        mean: f64,
        t_ref: f64,
    },
    /// `mean + sum_i a_i cos(w i t) + b_i sin(w i t)`, `w = 2 pi / period`.
    Fourier {
        mean: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        period: f64,
    },
    /// Sinusoidal systole, constant diastole:
    /// `amp sin(4 pi (t + phase))` for `t mod period <= systole_end`,
    /// `diastole` otherwise.
    PiecewiseSystolic {
        amp: f64,
        phase: f64,
        systole_end: f64,
        diastole: f64,
        period: f64,
    },
}

impl InletWaveform {
    /// Mean velocity at time `t` (periodic kinds wrap).
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Steady { mean } => *mean,
            Self::Ramp { mean, t_ref } => {
                if t < *t_ref {
                    0.5 * mean * (1.0 - (std::f64::consts::PI * t / t_ref).cos())
                } else {
                    *mean
                }
            }
            Self::Fourier { mean, a, b, period } => {
                let omega = 2.0 * std::f64::consts::PI / period;
                let mut v = *mean;
                for (i, (ai, bi)) in a.iter().zip(b.iter()).enumerate() {
                    let k = (i + 1) as f64;
                    v += ai * (omega * k * t).cos() + bi * (omega * k * t).sin();
                }
                v
            }
            Self::PiecewiseSystolic {
                amp,
                phase,
                systole_end,
                diastole,
                period,
            } => {
                let tm = t.rem_euclid(*period);
                if tm <= *systole_end {
                    amp * (4.0 * std::f64::consts::PI * (tm + phase)).sin()
                } else {
                    *diastole
                }
            }
        }
    }

    /// Peak of `|v|` over one period (or the ramp target), sampled densely;
    /// feeds the sound-speed choice `c_f = 10 |v|_max`.
    pub fn peak_magnitude(&self) -> f64 {
        match self {
            Self::Steady { mean } => mean.abs(),
            Self::Ramp { mean, .. } => mean.abs(),
            Self::Fourier { period, .. } | Self::PiecewiseSystolic { period, .. } => {
                let n = 20_000;
                (0..=n)
                    .map(|i| self.eval(period * i as f64 / n as f64).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Spatial profile across an opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialProfile {
    Plug,
    /// Parabolic no-slip profile; peak 1.5x the mean in a 2D channel and
    /// 2x the mean in a circular pipe.
    Parabolic,
}

impl SpatialProfile {
    pub fn factor<const D: usize>(&self, lateral_fraction: f64) -> f64 {
        match self {
            Self::Plug => 1.0,
            Self::Parabolic => {
                let peak = if D == 2 { 1.5 } else { 2.0 };
                peak * (1.0 - lateral_fraction * lateral_fraction).max(0.0)
            }
        }
    }
}

/// Lumped outlet model relating target pressure to the measured flow rate.
#[derive(Debug, Clone)]
pub enum OutletCircuit {
    Constant {
        pressure: f64,
    },
    Resistance {
        base: f64,
        resistance: f64,
    },
    Windkessel(Windkessel),
}

impl OutletCircuit {
    /// Current target pressure (absolute).
    pub fn pressure(&self, q: f64) -> f64 {
        match self {
            Self::Constant { pressure } => *pressure,
            Self::Resistance { base, resistance } => resistance_pressure(*base, *resistance, q),
            Self::Windkessel(w) => w.p,
        }
    }

    /// Advances circuit state by one step with the windowed flow rate.
    pub fn advance(&mut self, q: f64, dt: f64) -> Result<()> {
        if let Self::Windkessel(w) = self {
            w.advance(q, dt)?;
        }
        Ok(())
    }
}

/// `p = p0 + Q R`.
pub fn resistance_pressure(base: f64, resistance: f64, q: f64) -> f64 {
    base + resistance * q
}

/// Three-element Windkessel state advanced with the two-stage modified Euler
/// scheme:
///
/// ```text
/// dp/dt = -p/(C R_d) + (R_p + R_d)/(C R_d) Q + R_p dQ/dt
/// p'      = p^n + dt (dp/dt)^n
/// p^{n+1} = p^n + dt/2 [(dp/dt)^n + (dp/dt)']
/// ```
#[derive(Debug, Clone)]
pub struct Windkessel {
    pub r_p: f64,
    pub c: f64,
    pub r_d: f64,
    pub p: f64,
    q_prev: f64,
    primed: bool,
}

impl Windkessel {
    pub fn new(r_p: f64, c: f64, r_d: f64) -> Result<Self> {
        if !(r_p >= 0.0 && c > 0.0 && r_d > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Windkessel parameters must satisfy R_p >= 0, C > 0, R_d > 0 (got {r_p}, {c}, {r_d})"
            )));
        }
        Ok(Self {
            r_p,
            c,
            r_d,
            p: 0.0,
            q_prev: 0.0,
            primed: false,
        })
    }

    /// Initialization policy: prescribed initial pressure plus the estimated
    /// initial flow rate so the first dQ/dt contribution vanishes.
    pub fn initialize(&mut self, p0: f64, q0: f64) {
        self.p = p0;
        self.q_prev = q0;
        self.primed = true;
    }

    fn rate(&self, p: f64, q: f64, dq_dt: f64) -> f64 {
        let tau = self.c * self.r_d;
        -p / tau + (self.r_p + self.r_d) / tau * q + self.r_p * dq_dt
    }

    pub fn advance(&mut self, q: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Scheduling(format!(
                "Windkessel update requires dt > 0, got {dt}"
            )));
        }
        if !self.primed {
            // without an explicit initialization the first step carries no
            // flow-derivative contribution
            self.q_prev = q;
            self.primed = true;
        }
        let dq_dt = (q - self.q_prev) / dt;
        let rate_n = self.rate(self.p, q, dq_dt);
        let p_pred = self.p + dt * rate_n;
        let rate_pred = self.rate(p_pred, q, dq_dt);
        self.p += 0.5 * dt * (rate_n + rate_pred);
        self.q_prev = q;
        Ok(())
    }
}

/// Signed cumulative particle volume crossing one buffer: deletions count
/// positive, injections negative. Events are kept for windowed averaging.
#[derive(Debug, Clone, Default)]
pub struct FlowLedger {
    events: Vec<(f64, f64)>,
    pub cumulative: f64,
}

impl FlowLedger {
    pub fn record(&mut self, t: f64, signed_volume: f64) {
        self.events.push((t, signed_volume));
        self.cumulative += signed_volume;
    }

    /// Net signed volume over `(t - window, t]` divided by the window.
    pub fn flow_rate(&self, t: f64, window: f64) -> f64 {
        if !(window > 0.0) {
            return 0.0;
        }
        let lo = t - window;
        let sum: f64 = self
            .events
            .iter()
            .rev()
            .take_while(|(te, _)| *te > lo)
            .map(|(_, v)| v)
            .sum();
        sum / window
    }

    /// Drops events older than `horizon` before `t`.
    pub fn prune(&mut self, t: f64, horizon: f64) {
        let lo = t - horizon;
        self.events.retain(|(te, _)| *te > lo);
    }
}

/// Which opening a buffer serves.
#[derive(Debug, Clone)]
pub enum BufferRole {
    Inlet {
        waveform: InletWaveform,
        profile: SpatialProfile,
    },
    Outlet {
        circuit: OutletCircuit,
        /// Converts per-depth 2D flow rates to volumetric ones.
        reference_depth: f64,
    },
}

/// Four-layer bidirectional buffer: an oriented slab just inside an opening.
/// `origin` sits at the center of the outer face, `axis` points into the
/// domain, `width = 4 dp`.
#[derive(Debug, Clone)]
pub struct Buffer<const D: usize> {
    pub origin: Vect<D>,
    pub axis: Vect<D>,
    pub width: f64,
    /// Half-extent of the opening perpendicular to the axis.
    pub lateral_half: f64,
    pub role: BufferRole,
    /// Target pressure (simulation frame) currently imposed; refreshed by
    /// the circuit update.
    pub target_pressure: f64,
}

impl<const D: usize> Buffer<D> {
    /// Signed distance past the outer face along the axis.
    pub fn axial(&self, p: &Vect<D>) -> f64 {
        (p - self.origin).dot(&self.axis)
    }

    pub fn lateral_offset(&self, p: &Vect<D>) -> f64 {
        let rel = p - self.origin;
        let lat = rel - self.axis * rel.dot(&self.axis);
        lat.norm()
    }

    pub fn contains(&self, p: &Vect<D>) -> bool {
        let s = self.axial(p);
        s >= 0.0 && s < self.width && self.lateral_offset(p) <= self.lateral_half + 1e-12
    }

    /// Prescribed velocity at a position inside an inlet buffer.
    pub fn inlet_velocity(&self, p: &Vect<D>, t: f64) -> Option<Vect<D>> {
        match &self.role {
            BufferRole::Inlet { waveform, profile } => {
                let frac = (self.lateral_offset(p) / self.lateral_half).min(1.0);
                Some(self.axis * (waveform.eval(t) * profile.factor::<D>(frac)))
            }
            BufferRole::Outlet { .. } => None,
        }
    }

    pub fn is_outlet(&self) -> bool {
        matches!(self.role, BufferRole::Outlet { .. })
    }
}

/// Outcome counters of one buffer-cycle pass.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CycleOutcome {
    pub deleted: usize,
    pub injected: usize,
    pub relabeled_to_bulk: usize,
    pub relabeled_to_buffer: usize,
}

/// One bidirectional-buffer pass:
/// particles past an outer face become outside ghosts (volume credited
/// positive, removed at the next compaction); buffer particles crossing the
/// inner face are relabeled bulk and a replacement is seeded one buffer width
/// upstream (volume debited negative); bulk particles entering a buffer
/// region are relabeled buffer residents.
///
/// Inlet spawns carry the waveform velocity; outlet spawns take the source
/// velocity projected on the axis and the equation-of-state density
/// `rho0 + p_target / c_f^2`.
pub fn buffer_cycle<const D: usize>(
    fluid: &mut FluidField<D>,
    tags: &mut Vec<ParticleTag>,
    drho_prev: &mut Vec<f64>,
    buffers: &[Buffer<D>],
    ledgers: &mut [FlowLedger],
    t: f64,
    mat: &FluidMaterial,
) -> Result<CycleOutcome> {
    let mut outcome = CycleOutcome::default();
    let n = fluid.len();
    for i in 0..n {
        match tags[i] {
            ParticleTag::Exited => continue,
            ParticleTag::Buffer(b) => {
                let buf = &buffers[b as usize];
                let s = buf.axial(&fluid.pos[i]);
                if s < 0.0 {
                    tags[i] = ParticleTag::Exited;
                    // reference volume, so the ledger balances the particle
                    // inventory exactly regardless of acoustic compression
                    ledgers[b as usize].record(t, fluid.mass[i] / mat.rho0);
                    outcome.deleted += 1;
                } else if s >= buf.width {
                    if s >= 2.0 * buf.width {
                        return Err(Error::Stability(format!(
                            "buffer {b} underrun: particle {i} crossed {s:.3e} past the face \
                             in one step; reduce the time step"
                        )));
                    }
                    tags[i] = ParticleTag::Bulk;
                    outcome.relabeled_to_bulk += 1;

                    let spawn_pos = fluid.pos[i] - buf.axis * buf.width;
                    let (vel, rho) = match &buf.role {
                        BufferRole::Inlet { .. } => (
                            buf.inlet_velocity(&spawn_pos, t).unwrap(),
                            fluid.rho[i],
                        ),
                        BufferRole::Outlet { .. } => {
                            let v_ax = buf.axis * fluid.vel[i].dot(&buf.axis);
                            (v_ax, mat.density_from_pressure(buf.target_pressure))
                        }
                    };
                    let vol = fluid.mass[i] / rho;
                    let mass = fluid.mass[i];
                    fluid.push(spawn_pos, vel, rho, vol);
                    tags.push(ParticleTag::Buffer(b));
                    drho_prev.push(0.0);
                    ledgers[b as usize].record(t, -mass / mat.rho0);
                    outcome.injected += 1;
                }
            }
            ParticleTag::Bulk => {
                for (b, buf) in buffers.iter().enumerate() {
                    if buf.contains(&fluid.pos[i]) {
                        tags[i] = ParticleTag::Buffer(b as u8);
                        outcome.relabeled_to_buffer += 1;
                        break;
                    }
                }
            }
        }
    }
    Ok(outcome)
}

/// Overwrites inlet-buffer velocities with the prescribed profile.
pub fn impose_inlet_velocities<const D: usize>(
    fluid: &mut FluidField<D>,
    tags: &[ParticleTag],
    buffers: &[Buffer<D>],
    t: f64,
) {
    for i in 0..fluid.len() {
        if let ParticleTag::Buffer(b) = tags[i] {
            if let Some(v) = buffers[b as usize].inlet_velocity(&fluid.pos[i], t) {
                fluid.vel[i] = v;
            }
        }
    }
}

/// Projects outlet-buffer velocities onto the boundary normal.
pub fn project_outlet_velocities<const D: usize>(
    fluid: &mut FluidField<D>,
    tags: &[ParticleTag],
    buffers: &[Buffer<D>],
) {
    for i in 0..fluid.len() {
        if let ParticleTag::Buffer(b) = tags[i] {
            let buf = &buffers[b as usize];
            if buf.is_outlet() {
                fluid.vel[i] = buf.axis * fluid.vel[i].dot(&buf.axis);
            }
        }
    }
}

/// Prescribed-pressure modification of the momentum equation at a
/// near-boundary particle: `+2 p_target / rho_i sum_j grad_i W_ij V_j`, the
/// sum running over fluid neighbors plus the wall stencil contribution.
pub fn pressure_boundary_acceleration<const D: usize>(
    fluid: &FluidField<D>,
    neighbors: &NeighborList<D>,
    wall_grad_sum: &Vect<D>,
    i: usize,
    p_target: f64,
) -> Vect<D> {
    let mut g = *wall_grad_sum;
    for pair in neighbors.neighbors(i) {
        g += pair.e_ij * (pair.dwdr * fluid.vol[pair.j as usize]);
    }
    g * (2.0 * p_target / fluid.rho[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Printed pulsatile waveform of the resistance validation case.
    pub fn resistance_waveform() -> InletWaveform {
        InletWaveform::Fourier {
            mean: 0.2339,
            a: vec![
                -0.0176, -0.0657, -0.0280, 0.0068, 0.0075, 0.0115, 0.0040, 0.0035,
            ],
            b: vec![
                0.1205, 0.0171, -0.0384, -0.0152, -0.0122, 0.0002, 0.0033, 0.0060,
            ],
            period: 1.0,
        }
    }

    #[test]
    fn waveform_values() {
        // resistance-case waveform at t = 0: mean + sum(a) = 0.1559
        let w = resistance_waveform();
        assert_relative_eq!(w.eval(0.0), 0.1559, epsilon = 1e-12);
        // periodicity
        assert_relative_eq!(w.eval(0.37), w.eval(1.37), epsilon = 1e-12);

        // carotid piecewise form
        let carotid = InletWaveform::PiecewiseSystolic {
            amp: 0.5,
            phase: 0.0160236,
            systole_end: 0.218,
            diastole: 0.1,
            period: 0.5,
        };
        assert_eq!(carotid.eval(0.3), 0.1);
        assert_eq!(carotid.eval(0.3 + 0.5), 0.1);
        // continuity at the systole/diastole switch
        assert_abs_diff_eq!(carotid.eval(0.218), 0.1, epsilon = 5e-4);
        // continuity at the cycle start
        assert_abs_diff_eq!(carotid.eval(0.0), 0.1, epsilon = 5e-4);

        // aorta waveform at t = 0: mean + sum(a) (frozen by direct addition)
        let aorta = InletWaveform::Fourier {
            mean: 5.0487,
            a: vec![
                4.5287, -4.3509, -5.8551, -1.5063, 1.2800, 0.9012, 0.0855, -0.0480,
            ],
            b: vec![
                -8.0420, -6.2637, 0.7465, 3.5239, 1.6283, -0.1306, -0.2738, -0.0449,
            ],
            period: 0.66,
        };
        assert_relative_eq!(aorta.eval(0.0), 0.0838, epsilon = 1e-10);

        // ramp reaches and holds the target
        let ramp = InletWaveform::Ramp {
            mean: 1.0,
            t_ref: 0.2,
        };
        assert_eq!(ramp.eval(0.0), 0.0);
        assert_relative_eq!(ramp.eval(0.1), 0.5);
        assert_eq!(ramp.eval(0.25), 1.0);
    }

    #[test]
    fn profile_factors() {
        let p = SpatialProfile::Parabolic;
        assert_relative_eq!(p.factor::<2>(0.0), 1.5);
        assert_relative_eq!(p.factor::<3>(0.0), 2.0);
        assert_abs_diff_eq!(p.factor::<2>(1.0), 0.0);
        assert_eq!(SpatialProfile::Plug.factor::<2>(0.7), 1.0);
    }

    #[test]
    fn resistance_values() {
        assert_eq!(resistance_pressure(7.0, 1e5, 0.0), 7.0);
        assert_relative_eq!(resistance_pressure(7.0, 1e5, 1e-5), 8.0);
    }

    #[test]
    fn windkessel_steady_state_fixed_point() {
        // R_p = 1.52e6, R_d = 6.85e6, Q = 1e-6: p_inf = (R_p + R_d) Q = 8.37
        let mut w = Windkessel::new(1.52e6, 1.96e-7, 6.85e6).unwrap();
        let q = 1e-6;
        let p_inf = (w.r_p + w.r_d) * q;
        assert_relative_eq!(p_inf, 8.37, epsilon = 1e-12);
        w.initialize(p_inf, q);
        w.advance(q, 1e-3).unwrap();
        assert_relative_eq!(w.p, p_inf, max_relative = 1e-9);
    }

    #[test]
    fn windkessel_free_decay_time_constant() {
        // Q = 0 from p0: p(t) = p0 exp(-t / (C R_d)), tau = 1.3426 s
        let mut w = Windkessel::new(1.52e6, 1.96e-7, 6.85e6).unwrap();
        let tau = w.c * w.r_d;
        assert_relative_eq!(tau, 1.3426, epsilon = 1e-12);
        let p0 = 1e4;
        w.initialize(p0, 0.0);
        let dt = tau / 1000.0;
        let steps = 1000;
        for _ in 0..steps {
            w.advance(0.0, dt).unwrap();
        }
        assert_relative_eq!(w.p, p0 * (-1.0f64).exp(), max_relative = 0.01);
    }

    #[test]
    fn windkessel_step_matches_high_order_reference() {
        // One step versus classical RK4 on the same held-constant Q: the
        // difference is bounded by the scheme's O(dt^2) order.
        let make = || {
            let mut w = Windkessel::new(1.52e6, 1.96e-7, 6.85e6).unwrap();
            w.initialize(5000.0, 0.0);
            w
        };
        let q = 8e-7;
        let mut w = make();
        let tau = w.c * w.r_d;
        let dt = tau / 100.0;
        w.advance(q, dt).unwrap();

        // RK4 on dp/dt = (-p + (R_p+R_d) q) / tau with dq/dt folded in as in
        // the discrete scheme (zero here since q_prev = 0 -> dq/dt = q/dt;
        // replicate the same forcing for an apples-to-apples comparison)
        let w2 = make();
        let dq_dt = (q - 0.0) / dt;
        let f = |p: f64| w2.rate(p, q, dq_dt);
        let p0 = 5000.0;
        let k1 = f(p0);
        let k2 = f(p0 + 0.5 * dt * k1);
        let k3 = f(p0 + 0.5 * dt * k2);
        let k4 = f(p0 + dt * k3);
        let p_rk4 = p0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        let scale = p0.abs();
        assert!(
            (w.p - p_rk4).abs() <= (dt / tau).powi(2) * scale,
            "modified Euler step off by {} (bound {})",
            (w.p - p_rk4).abs(),
            (dt / tau).powi(2) * scale
        );
    }

    #[test]
    fn windkessel_vanishing_compliance_recovers_resistance_model() {
        let mut w = Windkessel::new(1.52e6, 1e-12, 6.85e6).unwrap();
        let q = 1e-6;
        w.initialize(0.0, q);
        let dt = w.c * w.r_d / 10.0;
        for _ in 0..200 {
            w.advance(q, dt).unwrap();
        }
        assert_relative_eq!(w.p, (1.52e6 + 6.85e6) * q, max_relative = 1e-6);
    }

    #[test]
    fn ledger_arithmetic() {
        let mut l = FlowLedger::default();
        for k in 0..5 {
            l.record(0.002 * (k as f64 + 1.0), 1e-9);
        }
        // 5 deletions of 1e-9 m^3 within 0.01 s, no injections
        assert_relative_eq!(l.flow_rate(0.01, 0.01), 5e-9 / 0.01, epsilon = 1e-20);

        // equal injections and deletions cancel
        let mut l2 = FlowLedger::default();
        l2.record(0.001, 2e-9);
        l2.record(0.002, -2e-9);
        assert_eq!(l2.flow_rate(0.01, 0.01), 0.0);
        assert_eq!(l2.cumulative, 0.0);

        // the window excludes older events
        let mut l3 = FlowLedger::default();
        l3.record(0.1, 1e-9);
        l3.record(0.9, 3e-9);
        assert_relative_eq!(l3.flow_rate(1.0, 0.5), 3e-9 / 0.5, epsilon = 1e-20);
        l3.prune(1.0, 0.5);
        assert_relative_eq!(l3.flow_rate(1.0, 2.0), 3e-9 / 2.0, epsilon = 1e-20);
    }

    fn channel_buffer(role: BufferRole) -> Buffer<2> {
        Buffer {
            origin: Vect::<2>::new(0.0, 0.5),
            axis: Vect::<2>::new(1.0, 0.0),
            width: 0.04,
            lateral_half: 0.5,
            role,
            target_pressure: 0.0,
        }
    }

    #[test]
    fn buffer_classification_and_profiles() {
        let buf = channel_buffer(BufferRole::Inlet {
            waveform: InletWaveform::Steady { mean: 2.0 },
            profile: SpatialProfile::Parabolic,
        });
        assert!(buf.contains(&Vect::<2>::new(0.02, 0.5)));
        assert!(!buf.contains(&Vect::<2>::new(-0.01, 0.5)));
        assert!(!buf.contains(&Vect::<2>::new(0.05, 0.5)));
        assert!(!buf.contains(&Vect::<2>::new(0.02, 1.2)));

        // centerline peak 1.5x mean, wall zero
        let v_mid = buf.inlet_velocity(&Vect::<2>::new(0.01, 0.5), 1.0).unwrap();
        assert_relative_eq!(v_mid[0], 3.0);
        let v_wall = buf.inlet_velocity(&Vect::<2>::new(0.01, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(v_wall[0], 0.0);
    }

    #[test]
    fn buffer_cycle_events() {
        let mat = FluidMaterial::new(1000.0, 0.0, 10.0).unwrap();
        let dp = 0.01;
        let mut buffers = vec![channel_buffer(BufferRole::Outlet {
            circuit: OutletCircuit::Constant { pressure: 30.0 },
            reference_depth: 1.0,
        })];
        buffers[0].target_pressure = 30.0;
        let mut ledgers = vec![FlowLedger::default()];

        let mut fluid = FluidField::with_lattice(
            vec![
                Vect::<2>::new(0.02, 0.5),   // stays inside the buffer
                Vect::<2>::new(-0.001, 0.5), // crossed the opening: delete
                Vect::<2>::new(0.045, 0.5),  // crossed inward: relabel + spawn
                Vect::<2>::new(0.30, 0.5),   // bulk far away: untouched
                Vect::<2>::new(0.035, 0.5),  // bulk inside buffer: relabel
            ],
            dp,
            1000.0,
        );
        fluid.vel[2] = Vect::<2>::new(-0.3, 0.12);
        let mut tags = vec![
            ParticleTag::Buffer(0),
            ParticleTag::Buffer(0),
            ParticleTag::Buffer(0),
            ParticleTag::Bulk,
            ParticleTag::Bulk,
        ];
        let mut drho = vec![0.0; 5];

        // no-op pass first: nothing crosses if we only look at the inside one
        let before_count = fluid.len();
        let outcome = buffer_cycle(
            &mut fluid,
            &mut tags,
            &mut drho,
            &buffers,
            &mut ledgers,
            0.01,
            &mat,
        )
        .unwrap();
        assert_eq!(outcome.deleted, 1);
        assert_eq!(outcome.relabeled_to_bulk, 1);
        assert_eq!(outcome.injected, 1);
        assert_eq!(outcome.relabeled_to_buffer, 1);
        assert_eq!(fluid.len(), before_count + 1);
        assert_eq!(tags[1], ParticleTag::Exited);
        assert_eq!(tags[2], ParticleTag::Bulk);
        assert_eq!(tags[4], ParticleTag::Buffer(0));

        // the spawned replacement sits one width upstream with the projected
        // velocity and the EoS density of the target pressure
        let s = fluid.len() - 1;
        assert_eq!(tags[s], ParticleTag::Buffer(0));
        assert_abs_diff_eq!(fluid.pos[s], Vect::<2>::new(0.005, 0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(fluid.vel[s], Vect::<2>::new(-0.3, 0.0), epsilon = 1e-12);
        assert_relative_eq!(fluid.rho[s], mat.density_from_pressure(30.0));

        // bookkeeping in reference volumes: deletion positive, injection
        // negative
        let expected = (fluid.mass[1] - fluid.mass[s]) / 1000.0;
        assert_relative_eq!(ledgers[0].cumulative, expected, epsilon = 1e-18);

        // a second pass with no motion changes nothing
        let outcome2 = buffer_cycle(
            &mut fluid,
            &mut tags,
            &mut drho,
            &buffers,
            &mut ledgers,
            0.02,
            &mat,
        )
        .unwrap();
        assert_eq!(
            outcome2,
            CycleOutcome::default(),
            "idle pass must be a no-op"
        );
    }

    #[test]
    fn buffer_underrun_is_detected() {
        let mat = FluidMaterial::new(1000.0, 0.0, 10.0).unwrap();
        let buffers = vec![channel_buffer(BufferRole::Outlet {
            circuit: OutletCircuit::Constant { pressure: 0.0 },
            reference_depth: 1.0,
        })];
        let mut ledgers = vec![FlowLedger::default()];
        let mut fluid =
            FluidField::with_lattice(vec![Vect::<2>::new(0.09, 0.5)], 0.01, 1000.0);
        let mut tags = vec![ParticleTag::Buffer(0)];
        let mut drho = vec![0.0];
        let err = buffer_cycle(
            &mut fluid,
            &mut tags,
            &mut drho,
            &buffers,
            &mut ledgers,
            0.0,
            &mat,
        );
        assert!(matches!(err, Err(Error::Stability(_))));
    }

    #[test]
    fn outlet_projection_and_inlet_overwrite() {
        let buffers = vec![
            channel_buffer(BufferRole::Inlet {
                waveform: InletWaveform::Steady { mean: 2.0 },
                profile: SpatialProfile::Plug,
            }),
            Buffer {
                origin: Vect::<2>::new(1.0, 0.5),
                axis: Vect::<2>::new(-1.0, 0.0),
                width: 0.04,
                lateral_half: 0.5,
                role: BufferRole::Outlet {
                    circuit: OutletCircuit::Constant { pressure: 0.0 },
                    reference_depth: 1.0,
                },
                target_pressure: 0.0,
            },
        ];
        let mut fluid = FluidField::with_lattice(
            vec![Vect::<2>::new(0.02, 0.5), Vect::<2>::new(0.98, 0.5)],
            0.01,
            1000.0,
        );
        fluid.vel[0] = Vect::<2>::new(0.5, 0.9);
        fluid.vel[1] = Vect::<2>::new(0.4, -0.7);
        let tags = vec![ParticleTag::Buffer(0), ParticleTag::Buffer(1)];
        impose_inlet_velocities(&mut fluid, &tags, &buffers, 0.0);
        assert_abs_diff_eq!(fluid.vel[0], Vect::<2>::new(2.0, 0.0), epsilon = 1e-14);
        project_outlet_velocities(&mut fluid, &tags, &buffers);
        assert_abs_diff_eq!(fluid.vel[1], Vect::<2>::new(0.4, 0.0), epsilon = 1e-14);
    }
}
