//! Output writers: self-describing particle frames (text plus legacy
//! polydata for external viewers), the particle-set file of the generation
//! pipeline, diagnostics CSVs, and the provenance echo.
//!
//! Floats are printed with 17 significant digits, so a write/read cycle
//! reproduces every f64 bit-exactly and reruns diff clean.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::conductor::Simulation;
use crate::error::{Error, Result};
use crate::gates::ParticleTag;
use crate::types::Vect;

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `content` atomically: a failed write never leaves a partial file.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Plain-text particle set: header with spacing, thickness and counts, one
/// record per particle. Used for generated clouds and shell sheets.
pub fn write_particle_set<const D: usize>(
    path: &Path,
    dp: f64,
    thickness: Option<f64>,
    positions: &[Vect<D>],
    normals: Option<&[Vect<D>]>,
    measures: &[f64],
) -> Result<()> {
    let mut out = String::new();
    out.push_str("# particle set v1\n");
    writeln!(out, "dim = {D}").unwrap();
    writeln!(out, "dp0 = {}", fmt_f(dp)).unwrap();
    if let Some(th) = thickness {
        writeln!(out, "thickness = {}", fmt_f(th)).unwrap();
    }
    writeln!(out, "count = {}", positions.len()).unwrap();
    let mut header = String::from("columns = x y");
    if D == 3 {
        header.push_str(" z");
    }
    if normals.is_some() {
        header.push_str(if D == 3 { " nx ny nz" } else { " nx ny" });
    }
    header.push_str(" measure");
    writeln!(out, "{header}").unwrap();
    for i in 0..positions.len() {
        let mut row = Vec::new();
        for d in 0..D {
            row.push(fmt_f(positions[i][d]));
        }
        if let Some(n) = normals {
            for d in 0..D {
                row.push(fmt_f(n[i][d]));
            }
        }
        row.push(fmt_f(measures[i]));
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    write_atomic(path, &out)
}

/// Reads a particle-set file back (positions and measures).
pub fn read_particle_set<const D: usize>(path: &Path) -> Result<(Vec<Vect<D>>, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut positions = Vec::new();
    let mut measures = Vec::new();
    let mut has_normals = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(cols) = line.strip_prefix("columns = ") {
            has_normals = cols.contains("nx");
            continue;
        }
        if line.contains('=') {
            if line.starts_with("dim") {
                let d: usize = line.split('=').nth(1).unwrap().trim().parse().map_err(|_| {
                    Error::InvalidInput("bad dim in particle set".into())
                })?;
                if d != D {
                    return Err(Error::InvalidInput(format!(
                        "particle set is {d}-dimensional, expected {D}"
                    )));
                }
            }
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse().unwrap_or(f64::NAN))
            .collect();
        let expected = D + if has_normals { D } else { 0 } + 1;
        if vals.len() != expected {
            return Err(Error::InvalidInput(format!(
                "particle record has {} columns, expected {expected}",
                vals.len()
            )));
        }
        positions.push(Vect::<D>::from_fn(|d, _| vals[d]));
        measures.push(vals[expected - 1]);
    }
    Ok((positions, measures))
}

/// Frame writer: one text table and one legacy polydata file per frame.
pub struct FrameWriter {
    pub dir: PathBuf,
}

impl FrameWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn write_frame<const D: usize>(
        &self,
        sim: &Simulation<D>,
        index: usize,
    ) -> Result<()> {
        let mut out = String::new();
        out.push_str("# frame v1\n");
        writeln!(out, "time = {}", fmt_f(sim.t)).unwrap();
        writeln!(out, "dim = {D}").unwrap();
        let (n_fluid, n_wall, n_shell) = sim.particle_counts();
        writeln!(out, "fluid_count = {n_fluid}").unwrap();
        writeln!(out, "wall_count = {n_wall}").unwrap();
        writeln!(out, "shell_count = {n_shell}").unwrap();
        let coords = if D == 3 { "x y z" } else { "x y" };
        let vels = if D == 3 { "vx vy vz" } else { "vx vy" };
        writeln!(out, "fluid_columns = {coords} {vels} rho p tag").unwrap();
        for i in 0..sim.fluid.len() {
            if matches!(sim.tags[i], ParticleTag::Exited) {
                continue;
            }
            let mut row = Vec::new();
            for d in 0..D {
                row.push(fmt_f(sim.fluid.pos[i][d]));
            }
            for d in 0..D {
                row.push(fmt_f(sim.fluid.vel[i][d]));
            }
            row.push(fmt_f(sim.fluid.rho[i]));
            row.push(fmt_f(sim.fluid.p[i]));
            row.push(match sim.tags[i] {
                ParticleTag::Bulk => "bulk".into(),
                ParticleTag::Buffer(b) => format!("buffer{b}"),
                ParticleTag::Exited => unreachable!(),
            });
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        if let Some(w) = &sim.wall {
            writeln!(out, "wall_columns = {coords} {vels} disp stress_norm").unwrap();
            for a in 0..w.field.len() {
                let mut row = Vec::new();
                for d in 0..D {
                    row.push(fmt_f(w.field.pos[a][d]));
                }
                for d in 0..D {
                    row.push(fmt_f(w.field.vel[a][d]));
                }
                row.push(fmt_f((w.field.pos[a] - w.field.pos0[a]).norm()));
                row.push(fmt_f(w.field.pk1[a].norm()));
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        if let Some(s) = &sim.shell {
            writeln!(out, "shell_columns = {coords} {vels} disp").unwrap();
            for a in 0..s.field.len() {
                let mut row = Vec::new();
                for d in 0..D {
                    row.push(fmt_f(s.field.pos[a][d]));
                }
                for d in 0..D {
                    row.push(fmt_f(s.field.vel[a][d]));
                }
                row.push(fmt_f((s.field.pos[a] - s.field.pos0[a]).norm()));
                writeln!(out, "{}", row.join(" ")).unwrap();
            }
        }
        write_atomic(&self.dir.join(format!("frame_{index:06}.txt")), &out)?;
        self.write_polydata(sim, index)
    }

    /// Legacy VTK polydata with point data, for external viewers.
    fn write_polydata<const D: usize>(&self, sim: &Simulation<D>, index: usize) -> Result<()> {
        let mut out = String::new();
        out.push_str("# vtk DataFile Version 3.0\n");
        writeln!(out, "fluid state at t = {}", fmt_f(sim.t)).unwrap();
        out.push_str("ASCII\nDATASET POLYDATA\n");
        let live: Vec<usize> = (0..sim.fluid.len())
            .filter(|&i| !matches!(sim.tags[i], ParticleTag::Exited))
            .collect();
        writeln!(out, "POINTS {} double", live.len()).unwrap();
        for &i in &live {
            let p = sim.fluid.pos[i];
            let z = if D == 3 { p[2] } else { 0.0 };
            writeln!(out, "{} {} {}", fmt_f(p[0]), fmt_f(p[1]), fmt_f(z)).unwrap();
        }
        writeln!(out, "POINT_DATA {}", live.len()).unwrap();
        out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for &i in &live {
            writeln!(out, "{}", fmt_f(sim.fluid.p[i])).unwrap();
        }
        out.push_str("VECTORS velocity double\n");
        for &i in &live {
            let v = sim.fluid.vel[i];
            let z = if D == 3 { v[2] } else { 0.0 };
            writeln!(out, "{} {} {}", fmt_f(v[0]), fmt_f(v[1]), fmt_f(z)).unwrap();
        }
        write_atomic(&self.dir.join(format!("frame_{index:06}.vtk")), &out)
    }
}

/// Probe time series: one row per advection step, one column block per probe.
pub fn write_probe_csv<const D: usize>(path: &Path, sim: &Simulation<D>) -> Result<()> {
    let mut out = String::new();
    let n_probes = sim
        .diagnostics
        .probe_velocity
        .first()
        .map(|r| r.len())
        .unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for p in 0..n_probes {
        for d in 0..D {
            header.push(format!("probe{p}_v{}", ["x", "y", "z"][d]));
        }
        header.push(format!("probe{p}_p"));
    }
    writeln!(out, "{}", header.join(",")).unwrap();
    for (k, t) in sim.diagnostics.times.iter().enumerate() {
        let mut row = vec![fmt_f(*t)];
        for p in 0..n_probes {
            let vel = sim.diagnostics.probe_velocity[k][p];
            for d in 0..D {
                row.push(fmt_f(vel.map(|v| v[d]).unwrap_or(f64::NAN)));
            }
            row.push(fmt_f(
                sim.diagnostics.probe_pressure[k][p].unwrap_or(f64::NAN),
            ));
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    write_atomic(path, &out)
}

/// Outlet circuit series: flow rate and absolute pressure per outlet.
pub fn write_outlet_csv<const D: usize>(path: &Path, sim: &Simulation<D>) -> Result<()> {
    let mut out = String::new();
    let n = sim
        .diagnostics
        .outlet_series
        .first()
        .map(|r| r.len())
        .unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for k in 0..n {
        header.push(format!("outlet{k}_q"));
        header.push(format!("outlet{k}_p"));
    }
    writeln!(out, "{}", header.join(",")).unwrap();
    for (k, t) in sim.diagnostics.times.iter().enumerate() {
        let mut row = vec![fmt_f(*t)];
        for (q, p) in &sim.diagnostics.outlet_series[k] {
            row.push(fmt_f(*q));
            row.push(fmt_f(*p));
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    write_atomic(path, &out)
}

/// Wall force history (pressure and viscous reaction totals).
pub fn write_wall_force_csv<const D: usize>(path: &Path, sim: &Simulation<D>) -> Result<()> {
    let mut out = String::new();
    let axes = ["x", "y", "z"];
    let mut header = vec!["index".to_string()];
    for d in 0..D {
        header.push(format!("fp_{}", axes[d]));
    }
    for d in 0..D {
        header.push(format!("fv_{}", axes[d]));
    }
    writeln!(out, "{}", header.join(",")).unwrap();
    for (k, (fp, fv)) in sim.diagnostics.wall_force_series.iter().enumerate() {
        let mut row = vec![k.to_string()];
        for d in 0..D {
            row.push(fmt_f(fp[d]));
        }
        for d in 0..D {
            row.push(fmt_f(fv[d]));
        }
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    write_atomic(path, &out)
}

/// Per-surface-particle hemodynamics indices of the last completed cycle.
pub fn write_wall_indices_csv<const D: usize>(path: &Path, sim: &Simulation<D>) -> Result<()> {
    let mut out = String::new();
    let coords = if D == 3 { "x,y,z" } else { "x,y" };
    writeln!(out, "{coords},tawss,osi,wss_latest").unwrap();
    let mut emit = |positions: &dyn Fn(usize) -> Vect<D>,
                    acc: &crate::conductor::ShearAccumulator<D>| {
        for k in 0..acc.tawss.len() {
            let p = positions(k);
            let mut row = Vec::new();
            for d in 0..D {
                row.push(fmt_f(p[d]));
            }
            row.push(fmt_f(acc.tawss[k]));
            row.push(fmt_f(acc.osi[k]));
            row.push(fmt_f(acc.latest[k].norm()));
            writeln!(out, "{}", row.join(",")).unwrap();
        }
    };
    if let (Some(w), Some(acc)) = (&sim.wall, &sim.wall_shear) {
        let owner = w.surface.owner.clone();
        let pos = w.field.pos.clone();
        emit(&move |k| pos[owner[k]], acc);
    }
    if let (Some(s), Some(acc)) = (&sim.shell, &sim.shell_shear) {
        let owner = s.surface.owner.clone();
        let pos = s.field.pos.clone();
        emit(&move |k| pos[owner[k]], acc);
    }
    write_atomic(path, &out)
}

/// Writes every output artifact of a finished run into `dir`.
pub fn write_run_outputs<const D: usize>(dir: &Path, sim: &Simulation<D>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_probe_csv(&dir.join("probes.csv"), sim)?;
    write_outlet_csv(&dir.join("outlets.csv"), sim)?;
    write_wall_force_csv(&dir.join("wall_forces.csv"), sim)?;
    write_wall_indices_csv(&dir.join("wall_indices.csv"), sim)?;
    Ok(())
}

/// Provenance echo: the resolved configuration plus derived numbers.
pub fn write_provenance<const D: usize>(dir: &Path, sim: &Simulation<D>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mat = &sim.fluid_mat;
    let mut extra = vec![
        ("derived.h_fluid".into(), fmt_f(sim.kernel_fluid.h())),
        ("derived.h_solid".into(), fmt_f(sim.h_solid)),
        ("derived.sound_speed".into(), fmt_f(mat.c_f)),
        ("derived.sigma0".into(), fmt_f(sim.sigma0)),
        (
            "derived.peak_inlet_velocity".into(),
            fmt_f(sim.velocity_scale_public()),
        ),
    ];
    if let Some(sm) = &sim.solid_mat {
        extra.push(("derived.lambda".into(), fmt_f(sm.lambda)));
        extra.push(("derived.mu".into(), fmt_f(sm.mu)));
        extra.push(("derived.bulk_modulus".into(), fmt_f(sm.bulk)));
        extra.push(("derived.c_solid".into(), fmt_f(sm.c_s)));
        extra.push(("derived.damping_a".into(), fmt_f(sm.damping_a)));
    }
    let (nf, nw, ns) = sim.particle_counts();
    extra.push(("counts.fluid".into(), nf.to_string()));
    extra.push(("counts.wall".into(), nw.to_string()));
    extra.push(("counts.shell".into(), ns.to_string()));
    write_atomic(
        &dir.join("run_config.txt"),
        &sim.spec.provenance(&extra),
    )
}
