//! Command-line entry point: scenario ingestion, run control and output
//! writing for the SPH fluid-structure engine.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use shellflow_core::conductor::{self, Simulation};
use shellflow_core::output::{self, FrameWriter};
use shellflow_core::scenario::{self, ScenarioSpec};

#[derive(Parser, Debug)]
#[command(
    name = "shellflow",
    about = "Weakly-compressible SPH engine for fluid-structure interaction \
             in thin-walled channels and vessels",
    after_help = "Built-in scenarios: poiseuille2d, poiseuille2d-shell, cylinder3d, \
                  cylinder3d-shell, channel-resistance, channel-windkessel, tpipe, \
                  tpipe-volume, box-hydrostatic, carotid-example, aorta-example"
)]
struct Args {
    /// Built-in scenario name or path to a scenario config file.
    #[arg(long)]
    scenario: String,

    /// Output directory (default: ./run-<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the particle spacing dp0 (m).
    #[arg(long)]
    resolution: Option<f64>,

    /// Override the simulated duration (s).
    #[arg(long)]
    duration: Option<f64>,

    /// Worker threads for the data-parallel stages (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Override the random seed recorded in the scenario.
    #[arg(long)]
    seed: Option<u64>,

    /// Skip writing particle frames (diagnostics CSVs are always written).
    #[arg(long)]
    no_frames: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(args: &Args) -> Result<(), shellflow_core::Error> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| {
                shellflow_core::Error::Config(format!("cannot size the thread pool: {e}"))
            })?;
    }

    let mut spec = scenario::load_scenario(&args.scenario)?;
    if let Some(dp) = args.resolution {
        spec.resolution = dp;
    }
    if let Some(t) = args.duration {
        spec.duration = t;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }

    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("run-{}", spec.name)));
    std::fs::create_dir_all(&out_dir)?;
    eprintln!("scenario `{}` -> {}", spec.name, out_dir.display());

    let started = Instant::now();
    match spec.dim {
        2 => {
            let assembly = scenario::build_assembly_2d(&spec)?;
            let sim = drive(assembly, &out_dir, args.no_frames)?;
            finish(&spec, &out_dir, &sim, started)
        }
        3 => {
            let assembly = scenario::build_assembly_3d(&spec)?;
            let sim = drive(assembly, &out_dir, args.no_frames)?;
            finish(&spec, &out_dir, &sim, started)
        }
        d => Err(shellflow_core::Error::Config(format!(
            "unsupported dimension {d}"
        ))),
    }
}

fn drive<const D: usize>(
    assembly: scenario::Assembly<D>,
    out_dir: &PathBuf,
    no_frames: bool,
) -> Result<Simulation<D>, shellflow_core::Error> {
    let writer = FrameWriter::new(out_dir)?;
    let mut sink = |sim: &Simulation<D>, index: usize| {
        if !no_frames {
            writer.write_frame(sim, index)?;
        }
        eprintln!(
            "t = {:.6e}  steps = {}/{}  particles = {}",
            sim.t,
            sim.log.advection_steps,
            sim.log.acoustic_steps,
            sim.fluid.len()
        );
        Ok(())
    };
    conductor::run(assembly, Some(&mut sink))
}

fn finish<const D: usize>(
    spec: &ScenarioSpec,
    out_dir: &PathBuf,
    sim: &Simulation<D>,
    started: Instant,
) -> Result<(), shellflow_core::Error> {
    output::write_run_outputs(out_dir, sim)?;
    output::write_provenance(out_dir, sim)?;

    let (nf, nw, ns) = sim.particle_counts();
    let wall_clock = started.elapsed().as_secs_f64();
    let mut summary = String::new();
    summary.push_str(&format!("scenario              {}\n", spec.name));
    summary.push_str(&format!("simulated time        {:.6} s\n", sim.t));
    summary.push_str(&format!("wall clock            {wall_clock:.3} s\n"));
    summary.push_str(&format!(
        "particles             fluid {nf}, wall {nw}, shell {ns}\n"
    ));
    summary.push_str(&format!(
        "steps                 advection {}, acoustic {}, structure {}\n",
        sim.log.advection_steps, sim.log.acoustic_steps, sim.log.structure_substeps
    ));
    summary.push_str(&format!("buffer events         {}\n", sim.log.buffer_events));
    summary.push_str(&format!(
        "max density excursion {:.3}%\n",
        100.0 * sim.diagnostics.max_density_deviation
    ));
    summary.push_str(&format!(
        "ledger conservation   {:.3e}\n",
        sim.ledger_conservation_error()
    ));
    if let Some(v) = sim
        .diagnostics
        .probe_velocity
        .last()
        .and_then(|r| r.first())
        .and_then(|v| *v)
    {
        summary.push_str(&format!("probe0 velocity       {:?}\n", v));
    }
    if let Some(u) = sim.diagnostics.solid_probe_series.last() {
        summary.push_str(&format!("solid probe |u|       {u:.6e} m\n"));
    }
    for w in &sim.log.warnings {
        summary.push_str(&format!("warning               {w}\n"));
    }
    print!("{summary}");
    std::fs::write(out_dir.join("summary.txt"), summary)?;
    Ok(())
}
