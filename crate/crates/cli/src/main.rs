use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ggpu_cli::commands::{self, Failure, MapArgs, PlanArgs};
use ggpu_cli::service;

/// Frequency planning, PPA estimation, simulation and speedup analysis for G-GPU designs.
#[derive(Parser)]
#[command(name = "ggpu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan memory divisions and pipelines until a frequency target is met.
    Plan {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=8))]
        cus: u32,
        #[arg(long)]
        target_mhz: f64,
        /// Add wire delay from the partition floorplan.
        #[arg(long)]
        wire: bool,
        /// Parameter file or a directory holding tech_params.json.
        #[arg(long)]
        tech: Option<PathBuf>,
        #[arg(long)]
        max_area: Option<f64>,
        #[arg(long)]
        max_power: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the planned design document.
        #[arg(long)]
        design_out: Option<PathBuf>,
    },
    /// Report fmax, the critical path and the next recommended transform.
    Map {
        #[arg(long)]
        design: PathBuf,
        /// JSON object of measured read delays (ns) keyed by memory id.
        #[arg(long)]
        mem_delays: Option<PathBuf>,
        #[arg(long)]
        tech: Option<PathBuf>,
        #[arg(long)]
        wire: bool,
        #[arg(long)]
        target_mhz: Option<f64>,
        /// Print the critical-path listing instead of the JSON summary.
        #[arg(long)]
        report: bool,
    },
    /// Run the SIMT simulator for one or more CU counts.
    Simulate {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..=8))]
        cus: Vec<u32>,
        #[arg(long)]
        sim: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Raw and area-derated speedups against the scalar core.
    Compare {
        #[arg(long)]
        benchmarks: PathBuf,
        /// `cus,total_area_mm2` table or a synthesis results table.
        #[arg(long)]
        ppa: PathBuf,
        #[arg(long)]
        riscv_area: f64,
        #[arg(long, default_value = "structured")]
        format: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit technology parameters to a synthesis results table.
    Calibrate {
        #[arg(long)]
        table1: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Plan every (CU count, frequency) pair and tabulate the results.
    Enumerate {
        #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u32).range(1..=8))]
        cus: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        freqs: Vec<f64>,
        #[arg(long)]
        wire: bool,
        #[arg(long)]
        tech: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serve the session API over HTTP.
    Serve {
        /// Defaults to $GGPU_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        tech: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> commands::Outcome {
    match cli.command {
        Command::Plan {
            cus,
            target_mhz,
            wire,
            tech,
            max_area,
            max_power,
            output,
            design_out,
        } => commands::plan(&PlanArgs {
            cus,
            target_mhz,
            wire,
            tech: tech.as_deref(),
            max_area_mm2: max_area,
            max_power_w: max_power,
            out: output.as_deref(),
            design_out: design_out.as_deref(),
        }),
        Command::Map {
            design,
            mem_delays,
            tech,
            wire,
            target_mhz,
            report,
        } => commands::map(&MapArgs {
            design: &design,
            mem_delays: mem_delays.as_deref(),
            tech: tech.as_deref(),
            wire,
            target_mhz,
            report,
        }),
        Command::Simulate { kernel, cus, sim, seed } => commands::simulate_cmd(&kernel, &cus, &sim, seed),
        Command::Compare {
            benchmarks,
            ppa,
            riscv_area,
            format,
            output,
        } => commands::compare(&benchmarks, &ppa, riscv_area, &format, output.as_deref()),
        Command::Calibrate { table1, output } => commands::calibrate_cmd(&table1, output.as_deref()),
        Command::Enumerate {
            cus,
            freqs,
            wire,
            tech,
            output,
        } => commands::enumerate(&cus, &freqs, wire, tech.as_deref(), output.as_deref()),
        Command::Serve { port, tech } => {
            let p = commands::load_tech(tech.as_deref())?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Domain(e.to_string()))?;
            rt.block_on(service::serve(port.unwrap_or_else(service::default_port), p))
                .map_err(|e| Failure::Domain(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            if let Failure::Usage(_) = f {
                eprintln!("usage: ggpu <plan|map|simulate|compare|calibrate|enumerate|serve> [OPTIONS]; see ggpu --help");
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
