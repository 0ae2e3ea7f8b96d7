//! `sim`: run experiment files and canned sweeps, dump debug traces.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tmsim::harness::{self, parse_config, preset, Report, RunOptions, Workload};
use tmsim::kernels::{trace, KernelKind};
use tmsim::sim::run_simulation_logged;
use tmsim::{GraphSpec, SimError};

const EXIT_INVALID: u8 = 1;
const EXIT_ABORT: u8 = 2;

#[derive(Parser)]
#[command(name = "sim", version, about = "Manycore memory-hierarchy and graph prefetcher simulator")]
struct Cli {
    /// Worker threads for independent config points (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Base seed; overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Abort any single simulation after this many cycles.
    #[arg(long, global = true, default_value_t = 2_000_000_000)]
    max_cycles: u64,
    /// Also write a JSON mirror next to the CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment file.
    Run {
        config: PathBuf,
        /// Report path; defaults to the file's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in sweep.
    Preset {
        name: String,
        /// Compact graph form, e.g. `uniform:n=10000,deg=8,seed=1`.
        #[arg(long)]
        graph: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "pagerank")]
        kernel: String,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
    },
    /// Write the reference streams and event log of one config point.
    TraceDump {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "trace")]
        out: PathBuf,
        /// Index of the config point to dump.
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
}

fn exit_for(e: &SimError) -> ExitCode {
    match e {
        SimError::Abort { .. } => ExitCode::from(EXIT_ABORT),
        _ => ExitCode::from(EXIT_INVALID),
    }
}

fn finish(report: &Report, out: Option<&Path>, json: bool) -> Result<ExitCode, SimError> {
    match out {
        Some(p) => {
            report.save(p, json)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), p.display());
        }
        None => {
            let stdout = std::io::stdout();
            report.write_csv(stdout.lock())?;
        }
    }
    for r in report.failures() {
        eprintln!(
            "point {} rep {} {}: {}",
            r.point,
            r.rep,
            r.status.as_str(),
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if report.has_abort() {
        ExitCode::from(EXIT_ABORT)
    } else if report.has_invalid() {
        ExitCode::from(EXIT_INVALID)
    } else {
        ExitCode::SUCCESS
    })
}

fn trace_dump(config: &Path, out: &Path, point: usize, opts: &RunOptions) -> Result<(), SimError> {
    let spec = parse_config(config)?;
    let points = spec.expand()?;
    let mut p = points
        .get(point)
        .cloned()
        .ok_or_else(|| SimError::Validation(format!("point {point} out of range (have {})", points.len())))?;
    p.seed = harness::row_seed(opts.seed.unwrap_or(p.seed), point, 0);
    let kr = Workload::new(&spec.graph)?.kernel_run(&p)?;
    let cfg = p.tm_config(opts.max_cycles)?;
    std::fs::create_dir_all(out).map_err(|e| SimError::Io { path: out.into(), source: e })?;

    let streams = out.join("streams.bin");
    trace::write(&kr, &streams)?;
    let r = run_simulation_logged(&kr, &cfg)?;
    let log = r.log.as_ref().expect("logged run");

    let events = out.join("events.txt");
    let io = |e| SimError::Io { path: events.clone(), source: e };
    let mut f = std::io::BufWriter::new(std::fs::File::create(&events).map_err(io)?);
    writeln!(f, "# total_cycles {}", r.total_cycles).map_err(io)?;
    for e in &log.pfhr_ports {
        writeln!(f, "pfhr {} tile {} bank {}", e.cycle, e.tile, e.bank).map_err(io)?;
    }
    for s in &log.squashes {
        writeln!(
            f,
            "squash {} bank {} requester {} victim {}{}",
            s.cycle,
            s.bank,
            s.requester_gpe,
            s.victim_gpe,
            if s.catch_up { " catch-up" } else { "" }
        )
        .map_err(io)?;
    }
    for (c, t) in &log.xbar_through {
        writeln!(f, "xbar {c} tile {t}").map_err(io)?;
    }
    f.flush().map_err(io)?;
    eprintln!("wrote {} and {}", streams.display(), events.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        parallel: cli.parallel,
        seed: cli.seed,
        max_cycles: cli.max_cycles,
    };
    let res = match &cli.cmd {
        Cmd::Run { config, out } => parse_config(config).and_then(|spec| {
            let report = harness::run_experiment(&spec, &opts)?;
            let dest = out.clone().or(spec.output.clone());
            finish(&report, dest.as_deref(), cli.json)
        }),
        Cmd::Preset {
            name,
            graph,
            out,
            kernel,
            repetitions,
        } => (|| {
            let kernel: KernelKind = kernel.parse()?;
            let mut spec = preset(name, GraphSpec::parse_compact(graph)?, kernel)?;
            if *repetitions == 0 {
                return Err(SimError::Validation("repetitions must be at least 1".into()));
            }
            spec.repetitions = *repetitions;
            let report = harness::run_experiment(&spec, &opts)?;
            finish(&report, Some(out), cli.json)
        })(),
        Cmd::TraceDump { config, out, point } => trace_dump(config, out, *point, &opts).map(|_| ExitCode::SUCCESS),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
