//! Scenario ingestion: the declarative run description, its plain-text
//! config format (TOML: key/value plus arrays), validation with exhaustive
//! problem listing, and the parametric geometry builders that turn a spec
//! into particle fields, buffers and coupling data.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fluid::{FluidField, FluidMaterial};
use crate::gates::{
    Buffer, BufferRole, FlowLedger, InletWaveform, OutletCircuit, ParticleTag, SpatialProfile,
    Windkessel,
};
use crate::kernel::SmoothingKernel;
use crate::neighbor::NeighborList;
use crate::shell::ShellField;
use crate::solid::{LinearElasticMaterial, VolumeSolidField};
use crate::types::Vect;

pub const MMHG: f64 = 133.322;

/// Wall representation of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallModel {
    RigidVolume,
    RigidShell,
    DeformableVolume,
    DeformableShell,
}

impl WallModel {
    pub fn is_shell(&self) -> bool {
        matches!(self, WallModel::RigidShell | WallModel::DeformableShell)
    }

    pub fn is_deformable(&self) -> bool {
        matches!(
            self,
            WallModel::DeformableVolume | WallModel::DeformableShell
        )
    }
}

#[derive(Debug, Clone)]
pub enum GeometrySpec {
    /// Plane channel along +x with the gap across y.
    Channel2d { height: f64, length: f64 },
    /// Circular pipe along +x.
    Cylinder3d { diameter: f64, length: f64 },
    /// Horizontal inlet channel joining a vertical crossbar with two
    /// outlet branches; the crossbar walls are the deformable segments.
    Tpipe2d {
        inlet_length: f64,
        inlet_height: f64,
        crossbar_width: f64,
        branch_up: f64,
        branch_down: f64,
    },
    /// Closed box (no openings).
    Box2d { width: f64, height: f64 },
}

impl GeometrySpec {
    pub fn dim(&self) -> usize {
        match self {
            GeometrySpec::Cylinder3d { .. } => 3,
            _ => 2,
        }
    }

    pub fn opening_names(&self) -> Vec<&'static str> {
        match self {
            GeometrySpec::Channel2d { .. } | GeometrySpec::Cylinder3d { .. } => {
                vec!["left", "right"]
            }
            GeometrySpec::Tpipe2d { .. } => vec!["inlet", "top", "bottom"],
            GeometrySpec::Box2d { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub opening: String,
    pub role: BoundaryRole,
}

#[derive(Debug, Clone)]
pub enum BoundaryRole {
    Inlet {
        waveform: InletWaveform,
        profile: SpatialProfile,
    },
    Outlet {
        circuit: OutletCircuit,
        reference_depth: f64,
        init_pressure: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub position: Vec<f64>,
    pub quantity: ProbeQuantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeQuantity {
    Velocity,
    Pressure,
}

/// Fully validated scenario description.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub dim: usize,
    pub resolution: f64,
    pub duration: f64,
    pub output_interval: f64,
    pub seed: u64,
    pub pressure_offset: f64,
    pub flow_window: Option<f64>,
    pub rho0: f64,
    pub eta: f64,
    pub sound_speed: Option<f64>,
    pub body_force: Vec<f64>,
    pub wall_model: WallModel,
    pub wall_thickness: f64,
    pub wall_rho: f64,
    pub wall_youngs: f64,
    pub wall_poisson: f64,
    pub geometry: GeometrySpec,
    pub boundaries: Vec<BoundarySpec>,
    pub probes: Vec<ProbeSpec>,
    pub solid_probe: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// raw config structures (TOML)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    dim: Option<usize>,
    resolution: f64,
    duration: f64,
    output_interval: Option<f64>,
    seed: Option<u64>,
    pressure_offset: Option<f64>,
    pressure_offset_mmhg: Option<f64>,
    flow_window: Option<f64>,
    fluid: RawFluid,
    wall: RawWall,
    geometry: RawGeometry,
    #[serde(default)]
    boundary: Vec<RawBoundary>,
    #[serde(default)]
    probe: Vec<RawProbe>,
    solid_probe: Option<RawProbe>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    rho0: f64,
    eta: f64,
    sound_speed: Option<f64>,
    body_force: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWall {
    model: String,
    thickness: Option<f64>,
    rho: Option<f64>,
    youngs_modulus: Option<f64>,
    poisson: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    kind: String,
    height: Option<f64>,
    length: Option<f64>,
    diameter: Option<f64>,
    width: Option<f64>,
    inlet_length: Option<f64>,
    inlet_height: Option<f64>,
    crossbar_width: Option<f64>,
    branch_up: Option<f64>,
    branch_down: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    opening: String,
    kind: String,
    waveform: Option<String>,
    profile: Option<String>,
    mean: Option<f64>,
    t_ref: Option<f64>,
    period: Option<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    amp: Option<f64>,
    phase: Option<f64>,
    systole_end: Option<f64>,
    diastole: Option<f64>,
    circuit: Option<String>,
    pressure: Option<f64>,
    pressure_mmhg: Option<f64>,
    resistance: Option<f64>,
    r_p: Option<f64>,
    c: Option<f64>,
    r_d: Option<f64>,
    init_pressure_mmhg: Option<f64>,
    init_pressure: Option<f64>,
    reference_depth: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    position: Vec<f64>,
    quantity: Option<String>,
}

/// Parses and validates a scenario config, reporting every problem found.
pub fn parse_scenario(text: &str, fallback_name: &str) -> Result<ScenarioSpec> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::Validation(vec![format!("config parse error: {e}")]))?;
    let mut problems: Vec<String> = Vec::new();

    let geometry = parse_geometry(&raw.geometry, &mut problems);
    let dim = geometry
        .as_ref()
        .map(|g| g.dim())
        .unwrap_or(raw.dim.unwrap_or(2));
    if let Some(d) = raw.dim {
        if let Some(g) = &geometry {
            if d != g.dim() {
                problems.push(format!(
                    "dim = {d} conflicts with geometry `{}` (dimension {})",
                    raw.geometry.kind,
                    g.dim()
                ));
            }
        }
    }

    if !(raw.resolution > 0.0) {
        problems.push(format!(
            "resolution must be positive, got {}",
            raw.resolution
        ));
    }
    if raw.duration < 0.0 {
        problems.push(format!("duration must be non-negative, got {}", raw.duration));
    }
    if !(raw.fluid.rho0 > 0.0) {
        problems.push(format!("fluid.rho0 must be positive, got {}", raw.fluid.rho0));
    }
    if raw.fluid.eta < 0.0 {
        problems.push(format!(
            "fluid.eta must be non-negative, got {}",
            raw.fluid.eta
        ));
    }
    if let Some(c) = raw.fluid.sound_speed {
        if !(c > 0.0) {
            problems.push(format!("fluid.sound_speed must be positive, got {c}"));
        }
    }
    let body_force = raw.fluid.body_force.clone().unwrap_or_else(|| vec![0.0; dim]);
    if body_force.len() != dim {
        problems.push(format!(
            "fluid.body_force needs {dim} components, got {}",
            body_force.len()
        ));
    }

    let wall_model = match raw.wall.model.as_str() {
        "rigid-volume" => WallModel::RigidVolume,
        "rigid-shell" => WallModel::RigidShell,
        "deformable-volume" => WallModel::DeformableVolume,
        "deformable-shell" => WallModel::DeformableShell,
        other => {
            problems.push(format!(
                "wall.model `{other}` unknown (rigid-volume, rigid-shell, \
                 deformable-volume, deformable-shell)"
            ));
            WallModel::RigidVolume
        }
    };
    let wall_thickness = raw.wall.thickness.unwrap_or(0.0);
    if wall_model.is_deformable() {
        if !(wall_thickness > 0.0) {
            problems.push("wall.thickness must be positive for deformable walls".into());
        }
        for (key, v) in [
            ("wall.rho", raw.wall.rho),
            ("wall.youngs_modulus", raw.wall.youngs_modulus),
            ("wall.poisson", raw.wall.poisson),
        ] {
            if v.is_none() {
                problems.push(format!("{key} is required for deformable walls"));
            }
        }
        if let Some(nu) = raw.wall.poisson {
            if !(nu > -1.0 && nu < 0.5) {
                problems.push(format!("wall.poisson must lie in (-1, 0.5), got {nu}"));
            }
        }
    }

    let mut boundaries = Vec::new();
    if let Some(g) = &geometry {
        let names = g.opening_names();
        let mut covered = vec![false; names.len()];
        for (k, rb) in raw.boundary.iter().enumerate() {
            match names.iter().position(|n| *n == rb.opening) {
                None => problems.push(format!(
                    "boundary[{k}]: opening `{}` not in geometry (expected one of {names:?})",
                    rb.opening
                )),
                Some(slot) if covered[slot] => {
                    problems.push(format!(
                        "boundary[{k}]: opening `{}` assigned twice",
                        rb.opening
                    ));
                }
                Some(slot) => covered[slot] = true,
            }
            match parse_boundary(rb, k) {
                Ok(b) => boundaries.push(b),
                Err(list) => problems.extend(list),
            }
        }
        for (slot, name) in names.iter().enumerate() {
            if !covered[slot] {
                problems.push(format!("opening `{name}` has no boundary assigned"));
            }
        }
    }

    let mut probes = Vec::new();
    for (k, rp) in raw.probe.iter().enumerate() {
        if rp.position.len() != dim {
            problems.push(format!(
                "probe[{k}]: position needs {dim} components, got {}",
                rp.position.len()
            ));
        }
        let quantity = match rp.quantity.as_deref().unwrap_or("velocity") {
            "velocity" => ProbeQuantity::Velocity,
            "pressure" => ProbeQuantity::Pressure,
            other => {
                problems.push(format!("probe[{k}]: unknown quantity `{other}`"));
                ProbeQuantity::Velocity
            }
        };
        probes.push(ProbeSpec {
            position: rp.position.clone(),
            quantity,
        });
    }
    if let Some(sp) = &raw.solid_probe {
        if sp.position.len() != dim {
            problems.push(format!(
                "solid_probe: position needs {dim} components, got {}",
                sp.position.len()
            ));
        }
    }

    let pressure_offset = match (raw.pressure_offset, raw.pressure_offset_mmhg) {
        (Some(_), Some(_)) => {
            problems.push("give pressure_offset either in Pa or mmHg, not both".into());
            0.0
        }
        (Some(pa), None) => pa,
        (None, Some(mm)) => mm * MMHG,
        (None, None) => 0.0,
    };

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let geometry = geometry.expect("validated above");
    Ok(ScenarioSpec {
        name: raw.name.unwrap_or_else(|| fallback_name.to_string()),
        dim,
        resolution: raw.resolution,
        duration: raw.duration,
        output_interval: raw.output_interval.unwrap_or(f64::INFINITY),
        seed: raw.seed.unwrap_or(0),
        pressure_offset,
        flow_window: raw.flow_window,
        rho0: raw.fluid.rho0,
        eta: raw.fluid.eta,
        sound_speed: raw.fluid.sound_speed,
        body_force,
        wall_model,
        wall_thickness,
        wall_rho: raw.wall.rho.unwrap_or(1000.0),
        wall_youngs: raw.wall.youngs_modulus.unwrap_or(1e6),
        wall_poisson: raw.wall.poisson.unwrap_or(0.3),
        geometry,
        boundaries,
        probes,
        solid_probe: raw.solid_probe.map(|p| p.position),
    })
}

fn parse_geometry(raw: &RawGeometry, problems: &mut Vec<String>) -> Option<GeometrySpec> {
    let need = |problems: &mut Vec<String>, field: &str, v: Option<f64>| -> f64 {
        match v {
            Some(x) if x > 0.0 => x,
            Some(x) => {
                problems.push(format!("geometry.{field} must be positive, got {x}"));
                1.0
            }
            None => {
                problems.push(format!(
                    "geometry.{field} is required for kind `{}`",
                    raw.kind
                ));
                1.0
            }
        }
    };
    match raw.kind.as_str() {
        "channel2d" => Some(GeometrySpec::Channel2d {
            height: need(problems, "height", raw.height),
            length: need(problems, "length", raw.length),
        }),
        "cylinder3d" => Some(GeometrySpec::Cylinder3d {
            diameter: need(problems, "diameter", raw.diameter),
            length: need(problems, "length", raw.length),
        }),
        "tpipe2d" => Some(GeometrySpec::Tpipe2d {
            inlet_length: need(problems, "inlet_length", raw.inlet_length),
            inlet_height: need(problems, "inlet_height", raw.inlet_height),
            crossbar_width: need(problems, "crossbar_width", raw.crossbar_width),
            branch_up: need(problems, "branch_up", raw.branch_up),
            branch_down: need(problems, "branch_down", raw.branch_down),
        }),
        "box2d" => Some(GeometrySpec::Box2d {
            width: need(problems, "width", raw.width),
            height: need(problems, "height", raw.height),
        }),
        other => {
            problems.push(format!(
                "geometry.kind `{other}` unknown (channel2d, cylinder3d, tpipe2d, box2d)"
            ));
            None
        }
    }
}

fn parse_boundary(raw: &RawBoundary, k: usize) -> std::result::Result<BoundarySpec, Vec<String>> {
    let mut problems = Vec::new();
    let role = match raw.kind.as_str() {
        "inlet" => {
            let waveform = match raw.waveform.as_deref() {
                Some("steady") | None => InletWaveform::Steady {
                    mean: raw.mean.unwrap_or_else(|| {
                        problems.push(format!("boundary[{k}]: steady inlet needs `mean`"));
                        0.0
                    }),
                },
                Some("ramp") => InletWaveform::Ramp {
                    mean: raw.mean.unwrap_or_else(|| {
                        problems.push(format!("boundary[{k}]: ramp inlet needs `mean`"));
                        0.0
                    }),
                    t_ref: raw.t_ref.unwrap_or_else(|| {
                        problems.push(format!("boundary[{k}]: ramp inlet needs `t_ref`"));
                        1.0
                    }),
                },
                Some("fourier") => {
                    let a = raw.a.clone().unwrap_or_default();
                    let b = raw.b.clone().unwrap_or_default();
                    if a.len() != b.len() || a.is_empty() {
                        problems.push(format!(
                            "boundary[{k}]: fourier inlet needs matching non-empty `a` and `b`"
                        ));
                    }
                    InletWaveform::Fourier {
                        mean: raw.mean.unwrap_or(0.0),
                        a,
                        b,
                        period: raw.period.unwrap_or_else(|| {
                            problems.push(format!("boundary[{k}]: fourier inlet needs `period`"));
                            1.0
                        }),
                    }
                }
                Some("piecewise-systolic") => InletWaveform::PiecewiseSystolic {
                    amp: raw.amp.unwrap_or(0.5),
                    phase: raw.phase.unwrap_or(0.0160236),
                    systole_end: raw.systole_end.unwrap_or(0.218),
                    diastole: raw.diastole.unwrap_or(0.1),
                    period: raw.period.unwrap_or(0.5),
                },
                Some(other) => {
                    problems.push(format!("boundary[{k}]: unknown waveform `{other}`"));
                    InletWaveform::Steady { mean: 0.0 }
                }
            };
            let profile = match raw.profile.as_deref().unwrap_or("plug") {
                "plug" => SpatialProfile::Plug,
                "parabolic" => SpatialProfile::Parabolic,
                other => {
                    problems.push(format!("boundary[{k}]: unknown profile `{other}`"));
                    SpatialProfile::Plug
                }
            };
            BoundaryRole::Inlet { waveform, profile }
        }
        "outlet" => {
            let pressure = match (raw.pressure, raw.pressure_mmhg) {
                (Some(_), Some(_)) => {
                    problems.push(format!(
                        "boundary[{k}]: give pressure either in Pa or mmHg, not both"
                    ));
                    0.0
                }
                (Some(pa), None) => pa,
                (None, Some(mm)) => mm * MMHG,
                (None, None) => 0.0,
            };
            let init_pressure = match (raw.init_pressure, raw.init_pressure_mmhg) {
                (Some(pa), _) => pa,
                (None, Some(mm)) => mm * MMHG,
                (None, None) => pressure,
            };
            let circuit = match raw.circuit.as_deref().unwrap_or("constant") {
                "constant" => OutletCircuit::Constant { pressure },
                "resistance" => OutletCircuit::Resistance {
                    base: pressure,
                    resistance: raw.resistance.unwrap_or_else(|| {
                        problems.push(format!(
                            "boundary[{k}]: resistance outlet needs `resistance`"
                        ));
                        0.0
                    }),
                },
                "windkessel" => {
                    let (r_p, c, r_d) = (
                        raw.r_p.unwrap_or_else(|| {
                            problems
                                .push(format!("boundary[{k}]: windkessel outlet needs `r_p`"));
                            1.0
                        }),
                        raw.c.unwrap_or_else(|| {
                            problems.push(format!("boundary[{k}]: windkessel outlet needs `c`"));
                            1.0
                        }),
                        raw.r_d.unwrap_or_else(|| {
                            problems
                                .push(format!("boundary[{k}]: windkessel outlet needs `r_d`"));
                            1.0
                        }),
                    );
                    match Windkessel::new(r_p, c, r_d) {
                        Ok(w) => OutletCircuit::Windkessel(w),
                        Err(e) => {
                            problems.push(format!("boundary[{k}]: {e}"));
                            OutletCircuit::Constant { pressure }
                        }
                    }
                }
                other => {
                    problems.push(format!("boundary[{k}]: unknown circuit `{other}`"));
                    OutletCircuit::Constant { pressure }
                }
            };
            BoundaryRole::Outlet {
                circuit,
                reference_depth: raw.reference_depth.unwrap_or(1.0),
                init_pressure,
            }
        }
        other => {
            problems.push(format!(
                "boundary[{k}]: kind `{other}` unknown (inlet, outlet)"
            ));
            BoundaryRole::Inlet {
                waveform: InletWaveform::Steady { mean: 0.0 },
                profile: SpatialProfile::Plug,
            }
        }
    };
    if problems.is_empty() {
        Ok(BoundarySpec {
            opening: raw.opening.clone(),
            role,
        })
    } else {
        Err(problems)
    }
}

/// Built-in scenario configs shipped with the engine.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    match name {
        "poiseuille2d" => Some(include_str!("../scenarios/poiseuille2d.toml")),
        "poiseuille2d-shell" => Some(include_str!("../scenarios/poiseuille2d-shell.toml")),
        "cylinder3d" => Some(include_str!("../scenarios/cylinder3d.toml")),
        "cylinder3d-shell" => Some(include_str!("../scenarios/cylinder3d-shell.toml")),
        "channel-resistance" => Some(include_str!("../scenarios/channel-resistance.toml")),
        "channel-windkessel" => Some(include_str!("../scenarios/channel-windkessel.toml")),
        "tpipe" => Some(include_str!("../scenarios/tpipe.toml")),
        "tpipe-volume" => Some(include_str!("../scenarios/tpipe-volume.toml")),
        "box-hydrostatic" => Some(include_str!("../scenarios/box-hydrostatic.toml")),
        "carotid-example" => Some(include_str!("../scenarios/carotid-example.toml")),
        "aorta-example" => Some(include_str!("../scenarios/aorta-example.toml")),
        _ => None,
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "poiseuille2d",
        "poiseuille2d-shell",
        "cylinder3d",
        "cylinder3d-shell",
        "channel-resistance",
        "channel-windkessel",
        "tpipe",
        "tpipe-volume",
        "box-hydrostatic",
        "carotid-example",
        "aorta-example",
    ]
}

/// Loads a scenario from a builtin name or a file path.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioSpec> {
    if let Some(text) = builtin_scenario(name_or_path) {
        return parse_scenario(text, name_or_path);
    }
    let path = std::path::Path::new(name_or_path);
    if !path.exists() {
        return Err(Error::Config(format!(
            "`{name_or_path}` is neither a builtin scenario ({}) nor a readable file",
            builtin_names().join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &fallback)
}

// ---------------------------------------------------------------------------
// assembly: spec -> particle fields
// ---------------------------------------------------------------------------

/// Surface particles of a wall body for shear-stress diagnostics: each entry
/// aggregates the reaction forces of a column of volume-wall particles (or a
/// single shell particle) onto a wall area patch.
#[derive(Debug, Clone, Default)]
pub struct SurfaceMap<const D: usize> {
    /// Representative solid particle per surface patch.
    pub owner: Vec<usize>,
    /// All solid particles whose reactions belong to the patch.
    pub column: Vec<Vec<usize>>,
    pub normal: Vec<Vect<D>>,
    pub area: Vec<f64>,
}

/// Everything the conductor needs to run one scenario.
pub struct Assembly<const D: usize> {
    pub spec: ScenarioSpec,
    pub dp: f64,
    pub h_fluid: f64,
    pub h_solid: f64,
    pub fluid_mat: FluidMaterial,
    pub gravity: Vect<D>,
    pub fluid: FluidField<D>,
    pub tags: Vec<ParticleTag>,
    pub buffers: Vec<Buffer<D>>,
    pub ledgers: Vec<FlowLedger>,
    /// Estimated volumetric flow rate of each outlet at t = 0 and its
    /// opening area (Windkessel initialization policy).
    pub outlet_init: Vec<(f64, f64)>,
    pub wall: Option<WallBody<D>>,
    pub shell: Option<ShellBody<D>>,
    pub solid_mat: Option<LinearElasticMaterial>,
    pub probes: Vec<Vect<D>>,
    pub probe_quantities: Vec<ProbeQuantity>,
    pub solid_probe: Option<Vect<D>>,
    /// Peak prescribed velocity (profile factor included).
    pub peak_inlet_velocity: f64,
}

pub struct WallBody<const D: usize> {
    pub field: VolumeSolidField<D>,
    pub reference: NeighborList<D>,
    pub surface: SurfaceMap<D>,
    pub dynamic: bool,
}

pub struct ShellBody<const D: usize> {
    pub field: ShellField<D>,
    pub reference: NeighborList<D>,
    pub curvature: Vec<[f64; 2]>,
    pub surface: SurfaceMap<D>,
    pub dynamic: bool,
}

/// Numerical sound speed: explicit override or ten times the peak prescribed
/// velocity.
fn resolve_sound_speed(spec: &ScenarioSpec, peak_inlet: f64) -> Result<f64> {
    if let Some(c) = spec.sound_speed {
        return Ok(c);
    }
    if peak_inlet > 0.0 {
        return Ok(10.0 * peak_inlet);
    }
    Err(Error::Config(
        "fluid.sound_speed must be given explicitly when no inlet prescribes a velocity".into(),
    ))
}

fn peak_inlet_velocity<const D: usize>(spec: &ScenarioSpec) -> f64 {
    let mut peak = 0.0f64;
    for b in &spec.boundaries {
        if let BoundaryRole::Inlet { waveform, profile } = &b.role {
            peak = peak.max(waveform.peak_magnitude() * profile.factor::<D>(0.0));
        }
    }
    peak
}

fn vect_from<const D: usize>(v: &[f64]) -> Vect<D> {
    Vect::<D>::from_fn(|d, _| v[d])
}

pub fn build_assembly_2d(spec: &ScenarioSpec) -> Result<Assembly<2>> {
    match spec.geometry {
        GeometrySpec::Channel2d { height, length } => build_channel2d(spec, height, length),
        GeometrySpec::Tpipe2d { .. } => build_tpipe2d(spec),
        GeometrySpec::Box2d { width, height } => build_box2d(spec, width, height),
        GeometrySpec::Cylinder3d { .. } => Err(Error::Config(
            "cylinder3d is a 3D geometry; dispatch mismatch".into(),
        )),
    }
}

pub fn build_assembly_3d(spec: &ScenarioSpec) -> Result<Assembly<3>> {
    match spec.geometry {
        GeometrySpec::Cylinder3d { diameter, length } => {
            build_cylinder3d(spec, diameter, length)
        }
        _ => Err(Error::Config(
            "only cylinder3d is available as a 3D parametric geometry".into(),
        )),
    }
}

/// Rigid walls are represented as fully clamped solid bodies.
fn wall_material(spec: &ScenarioSpec) -> Result<LinearElasticMaterial> {
    if spec.wall_model.is_deformable() {
        LinearElasticMaterial::new(spec.wall_rho, spec.wall_youngs, spec.wall_poisson)
    } else {
        // placeholder stiffness for rigid bodies; never integrated
        LinearElasticMaterial::new(1000.0, 1e6, 0.3)
    }
}

struct BoundaryLookup<'a> {
    spec: &'a ScenarioSpec,
}

impl<'a> BoundaryLookup<'a> {
    fn get(&self, opening: &str) -> Result<&'a BoundarySpec> {
        self.spec
            .boundaries
            .iter()
            .find(|b| b.opening == opening)
            .ok_or_else(|| Error::Config(format!("opening `{opening}` missing a boundary")))
    }
}

fn make_buffer<const D: usize>(
    b: &BoundarySpec,
    origin: Vect<D>,
    axis: Vect<D>,
    width: f64,
    lateral_half: f64,
    pressure_offset: f64,
) -> (Buffer<D>, f64) {
    let (role, target0) = match &b.role {
        BoundaryRole::Inlet { waveform, profile } => (
            BufferRole::Inlet {
                waveform: waveform.clone(),
                profile: *profile,
            },
            0.0,
        ),
        BoundaryRole::Outlet {
            circuit,
            reference_depth,
            init_pressure,
        } => {
            let mut circuit = circuit.clone();
            if let OutletCircuit::Windkessel(w) = &mut circuit {
                w.p = *init_pressure;
            }
            let target = circuit.pressure(0.0) - pressure_offset;
            (
                BufferRole::Outlet {
                    circuit,
                    reference_depth: *reference_depth,
                },
                target,
            )
        }
    };
    (
        Buffer {
            origin,
            axis,
            width,
            lateral_half,
            role,
            target_pressure: target0,
        },
        target0,
    )
}

/// Tags lattice fluid particles that sit inside a buffer region.
fn tag_buffers<const D: usize>(fluid: &FluidField<D>, buffers: &[Buffer<D>]) -> Vec<ParticleTag> {
    fluid
        .pos
        .iter()
        .map(|p| {
            for (k, buf) in buffers.iter().enumerate() {
                if buf.contains(p) {
                    return ParticleTag::Buffer(k as u8);
                }
            }
            ParticleTag::Bulk
        })
        .collect()
}

/// Straight wall slab for 2D scenarios: `n_layers` rows of particles behind
/// the fluid boundary line, with the surface map aggregating columns.
struct Slab2 {
    /// Point on the fluid-side boundary where the wall starts.
    start: Vect<2>,
    /// Unit direction along the wall.
    along: Vect<2>,
    /// Unit normal pointing into the fluid.
    into_fluid: Vect<2>,
    length: f64,
    layers: usize,
    deformable: bool,
}

fn build_volume_walls_2d(
    slabs: &[Slab2],
    dp: f64,
    rho: f64,
    h_solid: f64,
) -> Result<(VolumeSolidField<2>, NeighborList<2>, SurfaceMap<2>, usize)> {
    let mut pos = Vec::new();
    let mut vol = Vec::new();
    let mut rigid_mask = Vec::new();
    let mut surface = SurfaceMap::<2>::default();
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for slab in slabs {
        let n_along = (slab.length / dp).round() as usize;
        for i in 0..n_along {
            let s = (i as f64 + 0.5) * dp;
            let mut column = Vec::new();
            for k in 0..slab.layers {
                let depth = (k as f64 + 0.5) * dp;
                let p = slab.start + slab.along * s - slab.into_fluid * depth;
                column.push(pos.len());
                pos.push(p);
                vol.push(dp * dp);
                rigid_mask.push(!slab.deformable);
            }
            surface.owner.push(column[0]);
            surface.normal.push(slab.into_fluid);
            surface.area.push(dp);
            columns.push(column);
        }
    }
    surface.column = columns;
    let kernel = SmoothingKernel::full(2, h_solid)?;
    let reference = NeighborList::build(&pos, kernel.support_radius(), &kernel)?;
    let rho_owned = rho;
    let (mut field, fallbacks) = VolumeSolidField::new(pos, vol, rho_owned, &reference);
    for (i, rigid) in rigid_mask.iter().enumerate() {
        field.clamped[i] = *rigid;
    }
    Ok((field, reference, surface, fallbacks))
}

/// Straight single-layer shell walls for 2D scenarios, placed half a spacing
/// behind the fluid boundary.
fn build_shell_walls_2d(
    slabs: &[Slab2],
    dp: f64,
    thickness: f64,
    rho: f64,
    h_solid: f64,
) -> Result<(ShellField<2>, NeighborList<2>, Vec<[f64; 2]>, SurfaceMap<2>, usize)> {
    let mut pos = Vec::new();
    let mut normals = Vec::new();
    let mut areas = Vec::new();
    let mut rigid_mask = Vec::new();
    for slab in slabs {
        let n_along = (slab.length / dp).round() as usize;
        for i in 0..n_along {
            let s = (i as f64 + 0.5) * dp;
            pos.push(slab.start + slab.along * s - slab.into_fluid * (0.5 * dp));
            normals.push(slab.into_fluid);
            areas.push(dp);
            rigid_mask.push(!slab.deformable);
        }
    }
    let kernel = SmoothingKernel::reduced(2, h_solid)?;
    let reference = NeighborList::build(&pos, kernel.support_radius(), &kernel)?;
    let n = pos.len();
    let (mut field, fallbacks) =
        ShellField::new(pos, normals.clone(), areas.clone(), thickness, rho, &reference)?;
    for (i, rigid) in rigid_mask.iter().enumerate() {
        field.clamped[i] = *rigid;
    }
    let surface = SurfaceMap {
        owner: (0..n).collect(),
        column: (0..n).map(|i| vec![i]).collect(),
        normal: normals,
        area: areas,
    };
    Ok((field, reference, vec![[0.0, 0.0]; n], surface, fallbacks))
}

fn build_channel2d(spec: &ScenarioSpec, height: f64, length: f64) -> Result<Assembly<2>> {
    let dp = spec.resolution;
    let lookup = BoundaryLookup { spec };
    let nx = (length / dp).round() as usize;
    let ny = (height / dp).round() as usize;
    let mut pos = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            pos.push(Vect::<2>::new((i as f64 + 0.5) * dp, (j as f64 + 0.5) * dp));
        }
    }
    let peak = peak_inlet_velocity::<2>(spec);
    let c_f = resolve_sound_speed(spec, peak)?;
    let fluid_mat = FluidMaterial::new(spec.rho0, spec.eta, c_f)?;
    let mut fluid = FluidField::with_lattice(pos, dp, spec.rho0);

    let left = lookup.get("left")?;
    let right = lookup.get("right")?;
    let (buf_left, p_left) = make_buffer(
        left,
        Vect::<2>::new(0.0, 0.5 * height),
        Vect::<2>::new(1.0, 0.0),
        4.0 * dp,
        0.5 * height,
        spec.pressure_offset,
    );
    let (buf_right, p_right) = make_buffer(
        right,
        Vect::<2>::new(length, 0.5 * height),
        Vect::<2>::new(-1.0, 0.0),
        4.0 * dp,
        0.5 * height,
        spec.pressure_offset,
    );
    let buffers = vec![buf_left, buf_right];

    // start the field at the mean prescribed outlet level so the initial
    // transient does not ring
    let p_init = p_left.max(p_right).max(0.0);
    let rho_init = fluid_mat.density_from_pressure(p_init);
    for r in fluid.rho.iter_mut() {
        *r = rho_init;
    }
    fluid.update_pressure_and_volume(&fluid_mat);

    let tags = tag_buffers(&fluid, &buffers);
    let margin = 2.0 * dp;
    let slabs = [
        Slab2 {
            start: Vect::<2>::new(-margin, 0.0),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, 1.0),
            length: length + 2.0 * margin,
            layers: 4,
            deformable: false,
        },
        Slab2 {
            start: Vect::<2>::new(-margin, height),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, -1.0),
            length: length + 2.0 * margin,
            layers: 4,
            deformable: false,
        },
    ];
    let h_fluid = 1.3 * dp;
    let h_solid = 1.15 * dp;
    let (wall, shell) = build_walls(spec, &slabs, dp, h_solid)?;

    let outlet_init = outlet_initial_rates(spec, &buffers, height, peak);
    Ok(Assembly {
        spec: spec.clone(),
        dp,
        h_fluid,
        h_solid,
        fluid_mat,
        gravity: vect_from::<2>(&spec.body_force),
        fluid,
        tags,
        buffers,
        ledgers: vec![FlowLedger::default(), FlowLedger::default()],
        outlet_init,
        wall,
        shell,
        solid_mat: Some(wall_material(spec)?),
        probes: spec.probes.iter().map(|p| vect_from::<2>(&p.position)).collect(),
        probe_quantities: spec.probes.iter().map(|p| p.quantity).collect(),
        solid_probe: spec.solid_probe.as_ref().map(|p| vect_from::<2>(p)),
        peak_inlet_velocity: peak,
    })
}

/// Estimated volumetric flow rate per outlet at t = 0, distributed over the
/// outlets proportionally to their opening measures.
fn outlet_initial_rates<const D: usize>(
    spec: &ScenarioSpec,
    buffers: &[Buffer<D>],
    opening_measure_total: f64,
    _peak: f64,
) -> Vec<(f64, f64)> {
    let mut inlet_q0 = 0.0;
    for b in &spec.boundaries {
        if let BoundaryRole::Inlet { waveform, .. } = &b.role {
            inlet_q0 += waveform.eval(0.0) * opening_measure_total;
        }
    }
    let mut measures = Vec::new();
    let mut total = 0.0;
    for buf in buffers {
        if buf.is_outlet() {
            let m = if D == 2 {
                2.0 * buf.lateral_half
            } else {
                std::f64::consts::PI * buf.lateral_half * buf.lateral_half
            };
            measures.push(m);
            total += m;
        } else {
            measures.push(0.0);
        }
    }
    buffers
        .iter()
        .zip(measures.iter())
        .map(|(buf, m)| {
            if buf.is_outlet() && total > 0.0 {
                (inlet_q0 * m / total, *m)
            } else {
                (0.0, *m)
            }
        })
        .collect()
}

fn build_walls(
    spec: &ScenarioSpec,
    slabs: &[Slab2],
    dp: f64,
    h_solid: f64,
) -> Result<(Option<WallBody<2>>, Option<ShellBody<2>>)> {
    if spec.wall_model.is_shell() {
        let thickness = if spec.wall_thickness > 0.0 {
            spec.wall_thickness
        } else {
            dp
        };
        let (field, reference, curvature, surface, _fallbacks) =
            build_shell_walls_2d(slabs, dp, thickness, spec.wall_rho, h_solid)?;
        Ok((
            None,
            Some(ShellBody {
                dynamic: spec.wall_model.is_deformable(),
                field,
                reference,
                curvature,
                surface,
            }),
        ))
    } else {
        let (field, reference, surface, _fallbacks) =
            build_volume_walls_2d(slabs, dp, spec.wall_rho, h_solid)?;
        Ok((
            Some(WallBody {
                dynamic: spec.wall_model.is_deformable(),
                field,
                reference,
                surface,
            }),
            None,
        ))
    }
}

fn build_tpipe2d(spec: &ScenarioSpec) -> Result<Assembly<2>> {
    let (inlet_length, inlet_height, crossbar_width, branch_up, branch_down) = match spec.geometry
    {
        GeometrySpec::Tpipe2d {
            inlet_length,
            inlet_height,
            crossbar_width,
            branch_up,
            branch_down,
        } => (
            inlet_length,
            inlet_height,
            crossbar_width,
            branch_up,
            branch_down,
        ),
        _ => unreachable!(),
    };
    let dp = spec.resolution;
    let lookup = BoundaryLookup { spec };
    let d = inlet_height;
    let x_bar = inlet_length;
    let x_end = inlet_length + crossbar_width;
    let y_top = d + branch_up;
    let y_bot = -branch_down;

    // fluid lattice over the union of the two rectangles
    let mut pos = Vec::new();
    let nx = ((x_end + 2.0 * dp) / dp).round() as usize;
    let ny = (((y_top - y_bot) + 2.0 * dp) / dp).round() as usize;
    for i in 0..nx {
        for j in 0..ny {
            let p = Vect::<2>::new((i as f64 + 0.5) * dp, y_bot + (j as f64 + 0.5) * dp);
            let in_inlet = p[0] > 0.0 && p[0] < x_bar && p[1] > 0.0 && p[1] < d;
            let in_bar = p[0] > x_bar && p[0] < x_end && p[1] > y_bot && p[1] < y_top;
            if in_inlet || in_bar {
                pos.push(p);
            }
        }
    }
    let peak = peak_inlet_velocity::<2>(spec);
    let c_f = resolve_sound_speed(spec, peak)?;
    let fluid_mat = FluidMaterial::new(spec.rho0, spec.eta, c_f)?;
    let mut fluid = FluidField::with_lattice(pos, dp, spec.rho0);
    fluid.update_pressure_and_volume(&fluid_mat);

    let inlet = lookup.get("inlet")?;
    let top = lookup.get("top")?;
    let bottom = lookup.get("bottom")?;
    let (buf_in, _) = make_buffer(
        inlet,
        Vect::<2>::new(0.0, 0.5 * d),
        Vect::<2>::new(1.0, 0.0),
        4.0 * dp,
        0.5 * d,
        spec.pressure_offset,
    );
    let (buf_top, _) = make_buffer(
        top,
        Vect::<2>::new(x_bar + 0.5 * crossbar_width, y_top),
        Vect::<2>::new(0.0, -1.0),
        4.0 * dp,
        0.5 * crossbar_width,
        spec.pressure_offset,
    );
    let (buf_bot, _) = make_buffer(
        bottom,
        Vect::<2>::new(x_bar + 0.5 * crossbar_width, y_bot),
        Vect::<2>::new(0.0, 1.0),
        4.0 * dp,
        0.5 * crossbar_width,
        spec.pressure_offset,
    );
    let buffers = vec![buf_in, buf_top, buf_bot];
    let tags = tag_buffers(&fluid, &buffers);

    let th = if spec.wall_thickness > 0.0 {
        spec.wall_thickness
    } else {
        4.0 * dp
    };
    let rigid_layers = ((th / dp).round() as usize).max(4);
    let deform_layers = (th / dp).round() as usize;
    let margin = 2.0 * dp;
    // rigid inlet walls stop where the deformable crossbar walls begin
    let slabs = [
        Slab2 {
            start: Vect::<2>::new(-margin, 0.0),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, 1.0),
            length: x_bar - th + margin,
            layers: rigid_layers,
            deformable: false,
        },
        Slab2 {
            start: Vect::<2>::new(-margin, d),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, -1.0),
            length: x_bar - th + margin,
            layers: rigid_layers,
            deformable: false,
        },
        // deformable: left crossbar wall below the inlet
        Slab2 {
            start: Vect::<2>::new(x_bar, y_bot),
            along: Vect::<2>::new(0.0, 1.0),
            into_fluid: Vect::<2>::new(1.0, 0.0),
            length: branch_down,
            layers: deform_layers,
            deformable: true,
        },
        // deformable: left crossbar wall above the inlet
        Slab2 {
            start: Vect::<2>::new(x_bar, d),
            along: Vect::<2>::new(0.0, 1.0),
            into_fluid: Vect::<2>::new(1.0, 0.0),
            length: branch_up,
            layers: deform_layers,
            deformable: true,
        },
        // deformable: right crossbar wall, full height
        Slab2 {
            start: Vect::<2>::new(x_end, y_bot),
            along: Vect::<2>::new(0.0, 1.0),
            into_fluid: Vect::<2>::new(-1.0, 0.0),
            length: y_top - y_bot,
            layers: deform_layers,
            deformable: true,
        },
    ];
    let h_fluid = 1.3 * dp;
    let h_solid = 1.15 * dp;
    let (mut wall, mut shell) = build_walls(spec, &slabs, dp, h_solid)?;

    // clamp the outlet-adjacent ends of the deformable segments
    let clamp_boxes = [
        (
            Vect::<2>::new(x_bar - th - dp, y_top - 2.0 * dp),
            Vect::<2>::new(x_end + th + dp, y_top + dp),
        ),
        (
            Vect::<2>::new(x_bar - th - dp, y_bot - dp),
            Vect::<2>::new(x_end + th + dp, y_bot + 2.0 * dp),
        ),
    ];
    let clamp = |p: &Vect<2>| {
        clamp_boxes
            .iter()
            .any(|(lo, hi)| (0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k]))
    };
    if let Some(w) = wall.as_mut() {
        for i in 0..w.field.len() {
            if clamp(&w.field.pos0[i]) {
                w.field.clamped[i] = true;
            }
        }
    }
    if let Some(s) = shell.as_mut() {
        for i in 0..s.field.len() {
            if clamp(&s.field.pos0[i]) {
                s.field.clamped[i] = true;
            }
        }
    }

    let outlet_init = outlet_initial_rates(spec, &buffers, d, peak);
    Ok(Assembly {
        spec: spec.clone(),
        dp,
        h_fluid,
        h_solid,
        fluid_mat,
        gravity: vect_from::<2>(&spec.body_force),
        fluid,
        tags,
        buffers,
        ledgers: vec![FlowLedger::default(); 3],
        outlet_init,
        wall,
        shell,
        solid_mat: Some(wall_material(spec)?),
        probes: spec.probes.iter().map(|p| vect_from::<2>(&p.position)).collect(),
        probe_quantities: spec.probes.iter().map(|p| p.quantity).collect(),
        solid_probe: spec.solid_probe.as_ref().map(|p| vect_from::<2>(p)),
        peak_inlet_velocity: peak,
    })
}

fn build_box2d(spec: &ScenarioSpec, width: f64, height: f64) -> Result<Assembly<2>> {
    let dp = spec.resolution;
    let nx = (width / dp).round() as usize;
    let ny = (height / dp).round() as usize;
    let mut pos = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            pos.push(Vect::<2>::new((i as f64 + 0.5) * dp, (j as f64 + 0.5) * dp));
        }
    }
    let c_f = resolve_sound_speed(spec, 0.0)?;
    let fluid_mat = FluidMaterial::new(spec.rho0, spec.eta, c_f)?;
    let mut fluid = FluidField::with_lattice(pos, dp, spec.rho0);
    fluid.update_pressure_and_volume(&fluid_mat);
    let n = fluid.len();

    let margin = 4.0 * dp;
    let slabs = [
        Slab2 {
            start: Vect::<2>::new(-margin, 0.0),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, 1.0),
            length: width + 2.0 * margin,
            layers: 4,
            deformable: false,
        },
        Slab2 {
            start: Vect::<2>::new(-margin, height),
            along: Vect::<2>::new(1.0, 0.0),
            into_fluid: Vect::<2>::new(0.0, -1.0),
            length: width + 2.0 * margin,
            layers: 4,
            deformable: false,
        },
        Slab2 {
            start: Vect::<2>::new(0.0, 0.0),
            along: Vect::<2>::new(0.0, 1.0),
            into_fluid: Vect::<2>::new(1.0, 0.0),
            length: height,
            layers: 4,
            deformable: false,
        },
        Slab2 {
            start: Vect::<2>::new(width, 0.0),
            along: Vect::<2>::new(0.0, 1.0),
            into_fluid: Vect::<2>::new(-1.0, 0.0),
            length: height,
            layers: 4,
            deformable: false,
        },
    ];
    let (wall, shell) = build_walls(spec, &slabs, dp, 1.15 * dp)?;
    Ok(Assembly {
        spec: spec.clone(),
        dp,
        h_fluid: 1.3 * dp,
        h_solid: 1.15 * dp,
        fluid_mat,
        gravity: vect_from::<2>(&spec.body_force),
        fluid,
        tags: vec![ParticleTag::Bulk; n],
        buffers: Vec::new(),
        ledgers: Vec::new(),
        outlet_init: Vec::new(),
        wall,
        shell,
        solid_mat: Some(wall_material(spec)?),
        probes: spec.probes.iter().map(|p| vect_from::<2>(&p.position)).collect(),
        probe_quantities: spec.probes.iter().map(|p| p.quantity).collect(),
        solid_probe: None,
        peak_inlet_velocity: 0.0,
    })
}

fn build_cylinder3d(spec: &ScenarioSpec, diameter: f64, length: f64) -> Result<Assembly<3>> {
    let dp = spec.resolution;
    let lookup = BoundaryLookup { spec };
    let radius = 0.5 * diameter;
    let nx = (length / dp).round() as usize;
    let m = (radius / dp).ceil() as i64 + 1;
    let mut pos = Vec::new();
    for i in 0..nx {
        let x = (i as f64 + 0.5) * dp;
        for jy in -m..m {
            for jz in -m..m {
                let y = (jy as f64 + 0.5) * dp;
                let z = (jz as f64 + 0.5) * dp;
                if y * y + z * z < (radius - 0.45 * dp) * (radius - 0.45 * dp) {
                    pos.push(Vect::<3>::new(x, y, z));
                }
            }
        }
    }
    let peak = peak_inlet_velocity::<3>(spec);
    let c_f = resolve_sound_speed(spec, peak)?;
    let fluid_mat = FluidMaterial::new(spec.rho0, spec.eta, c_f)?;
    let mut fluid = FluidField::with_lattice(pos, dp, spec.rho0);

    let left = lookup.get("left")?;
    let right = lookup.get("right")?;
    let (buf_left, p_left) = make_buffer(
        left,
        Vect::<3>::zeros(),
        Vect::<3>::new(1.0, 0.0, 0.0),
        4.0 * dp,
        radius,
        spec.pressure_offset,
    );
    let (buf_right, p_right) = make_buffer(
        right,
        Vect::<3>::new(length, 0.0, 0.0),
        Vect::<3>::new(-1.0, 0.0, 0.0),
        4.0 * dp,
        radius,
        spec.pressure_offset,
    );
    let buffers = vec![buf_left, buf_right];
    let p_init = p_left.max(p_right).max(0.0);
    let rho_init = fluid_mat.density_from_pressure(p_init);
    for r in fluid.rho.iter_mut() {
        *r = rho_init;
    }
    fluid.update_pressure_and_volume(&fluid_mat);
    let tags = tag_buffers(&fluid, &buffers);

    let margin = 2.0 * dp;
    let x0 = -margin;
    let x1 = length + margin;
    let n_axial = ((x1 - x0) / dp).round() as usize;
    let h_solid = 1.15 * dp;

    let (wall, shell) = if spec.wall_model.is_shell() {
        // single ring layer half a spacing outside the fluid radius
        let r_s = radius + 0.5 * dp;
        let n_ring = (2.0 * std::f64::consts::PI * r_s / dp).round() as usize;
        let area = 2.0 * std::f64::consts::PI * r_s * dp / n_ring as f64;
        let mut pos = Vec::new();
        let mut normals = Vec::new();
        for i in 0..n_axial {
            let x = x0 + (i as f64 + 0.5) * dp;
            for s in 0..n_ring {
                let phi = 2.0 * std::f64::consts::PI * (s as f64 + 0.5 * (i % 2) as f64)
                    / n_ring as f64;
                pos.push(Vect::<3>::new(x, r_s * phi.cos(), r_s * phi.sin()));
                normals.push(Vect::<3>::new(0.0, -phi.cos(), -phi.sin()));
            }
        }
        let n = pos.len();
        let thickness = if spec.wall_thickness > 0.0 {
            spec.wall_thickness
        } else {
            dp
        };
        let kernel = SmoothingKernel::reduced(3, h_solid)?;
        let reference = NeighborList::build(&pos, kernel.support_radius(), &kernel)?;
        let (mut field, _) = ShellField::new(
            pos,
            normals.clone(),
            vec![area; n],
            thickness,
            spec.wall_rho,
            &reference,
        )?;
        for c in field.clamped.iter_mut() {
            *c = !spec.wall_model.is_deformable();
        }
        let surface = SurfaceMap {
            owner: (0..n).collect(),
            column: (0..n).map(|i| vec![i]).collect(),
            normal: normals,
            area: vec![area; n],
        };
        (
            None,
            Some(ShellBody {
                dynamic: spec.wall_model.is_deformable(),
                field,
                reference,
                curvature: vec![[1.0 / r_s, 0.0]; n],
                surface,
            }),
        )
    } else {
        // four concentric ring layers with exact annulus volumes
        let mut pos = Vec::new();
        let mut vol = Vec::new();
        let mut surface = SurfaceMap::<3>::default();
        let mut columns: Vec<Vec<usize>> = Vec::new();
        let n_ring0 = (2.0 * std::f64::consts::PI * (radius + 0.5 * dp) / dp).round() as usize;
        for i in 0..n_axial {
            let x = x0 + (i as f64 + 0.5) * dp;
            let mut ring_columns: Vec<Vec<usize>> = vec![Vec::new(); n_ring0];
            for k in 0..4usize {
                let r = radius + (k as f64 + 0.5) * dp;
                let n_ring = (2.0 * std::f64::consts::PI * r / dp).round() as usize;
                let v = std::f64::consts::PI
                    * ((r + 0.5 * dp).powi(2) - (r - 0.5 * dp).powi(2))
                    / n_ring as f64
                    * dp;
                for s in 0..n_ring {
                    let phi = 2.0 * std::f64::consts::PI * s as f64 / n_ring as f64;
                    let idx = pos.len();
                    pos.push(Vect::<3>::new(x, r * phi.cos(), r * phi.sin()));
                    vol.push(v);
                    // aggregate deeper-layer reactions onto the nearest
                    // first-layer patch
                    let slot = ((phi / (2.0 * std::f64::consts::PI) * n_ring0 as f64).round()
                        as usize)
                        % n_ring0;
                    ring_columns[slot].push(idx);
                }
            }
            for (s, column) in ring_columns.into_iter().enumerate() {
                if column.is_empty() {
                    continue;
                }
                let phi = 2.0 * std::f64::consts::PI * s as f64 / n_ring0 as f64;
                surface.owner.push(column[0]);
                surface.normal.push(Vect::<3>::new(0.0, -phi.cos(), -phi.sin()));
                surface
                    .area
                    .push(2.0 * std::f64::consts::PI * radius * dp / n_ring0 as f64);
                columns.push(column);
            }
        }
        surface.column = columns;
        let kernel = SmoothingKernel::full(3, h_solid)?;
        let reference = NeighborList::build(&pos, kernel.support_radius(), &kernel)?;
        let (mut field, _) = VolumeSolidField::new(pos, vol, spec.wall_rho, &reference);
        for c in field.clamped.iter_mut() {
            *c = true; // rigid pipe wall
        }
        (
            Some(WallBody {
                dynamic: false,
                field,
                reference,
                surface,
            }),
            None,
        )
    };

    let outlet_init = outlet_initial_rates(
        spec,
        &buffers,
        std::f64::consts::PI * radius * radius,
        peak,
    );
    Ok(Assembly {
        spec: spec.clone(),
        dp,
        h_fluid: 1.3 * dp,
        h_solid,
        fluid_mat,
        gravity: vect_from::<3>(&spec.body_force),
        fluid,
        tags,
        buffers,
        ledgers: vec![FlowLedger::default(), FlowLedger::default()],
        outlet_init,
        wall,
        shell,
        solid_mat: Some(wall_material(spec)?),
        probes: spec.probes.iter().map(|p| vect_from::<3>(&p.position)).collect(),
        probe_quantities: spec.probes.iter().map(|p| p.quantity).collect(),
        solid_probe: spec.solid_probe.as_ref().map(|p| vect_from::<3>(p)),
        peak_inlet_velocity: peak,
    })
}

impl ScenarioSpec {
    /// Echo of every resolved number, written next to the outputs.
    pub fn provenance(&self, extra: &[(String, String)]) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("dim = {}\n", self.dim));
        out.push_str(&format!("resolution = {:.12e}\n", self.resolution));
        out.push_str(&format!("duration = {:.12e}\n", self.duration));
        out.push_str(&format!("output_interval = {:.12e}\n", self.output_interval));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("pressure_offset = {:.12e}\n", self.pressure_offset));
        out.push_str(&format!("fluid.rho0 = {:.12e}\n", self.rho0));
        out.push_str(&format!("fluid.eta = {:.12e}\n", self.eta));
        out.push_str(&format!("fluid.body_force = {:?}\n", self.body_force));
        out.push_str(&format!("wall.model = {:?}\n", self.wall_model));
        out.push_str(&format!("wall.thickness = {:.12e}\n", self.wall_thickness));
        out.push_str(&format!("wall.rho = {:.12e}\n", self.wall_rho));
        out.push_str(&format!("wall.youngs_modulus = {:.12e}\n", self.wall_youngs));
        out.push_str(&format!("wall.poisson = {:.12e}\n", self.wall_poisson));
        out.push_str(&format!("geometry = {:?}\n", self.geometry));
        for (k, b) in self.boundaries.iter().enumerate() {
            out.push_str(&format!("boundary[{k}].opening = {}\n", b.opening));
            out.push_str(&format!("boundary[{k}].role = {:?}\n", b.role));
        }
        for (k, p) in self.probes.iter().enumerate() {
            out.push_str(&format!(
                "probe[{k}] = {:?} ({:?})\n",
                p.position, p.quantity
            ));
        }
        for (k, v) in extra {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
