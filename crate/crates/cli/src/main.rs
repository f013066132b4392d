use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anisotag_cli::commands::{
    cmd_buildmap, cmd_decode, cmd_encode, cmd_simulate, load_or_build_map, report_csv, SimulationInput,
};
use anisotag_cli::sweep::{run_sweep, ExperimentSpec, SweepVariable, DEFAULT_TRIALS};
use anisotag_cli::{CommonArgs, HarnessError, Result};
use anisotag_core::codec::parse_bits;
use clap::{Parser, Subcommand};

/// Exit status of a decode whose region count did not match.
const DETECTION_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "anisotag", version, about = "Reflection-anisotropy tags: G-code, swipe simulation, decoding and sweeps")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the crossing-angle map for the geometry and cache it.
    Buildmap {
        #[arg(long, default_value = "anisotag.map")]
        out: PathBuf,
    },
    /// Write a tag program and its layout sidecar for a payload.
    Encode {
        /// Payload as 0/1 characters; zero-padded to the tag capacity.
        #[arg(long, default_value = "", conflicts_with = "payload_file")]
        payload: String,
        #[arg(long)]
        payload_file: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value = "tag.gcode")]
        out: PathBuf,
    },
    /// Simulate a swipe over a tag given as layout sidecar or G-code.
    Simulate {
        #[arg(long, required_unless_present = "gcode", conflicts_with = "gcode")]
        layout: Option<PathBuf>,
        #[arg(long)]
        gcode: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        /// Also write the ambient and per-state reference frames.
        #[arg(long)]
        refs: Option<PathBuf>,
    },
    /// Decode a trace; exit status 2 when the region count is wrong.
    Decode {
        #[arg(long)]
        trace: PathBuf,
        /// Reference frames; computed from the settings when absent.
        #[arg(long)]
        refs: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        /// Ground-truth payload bits, for the bit error rate.
        #[arg(long)]
        truth: Option<String>,
        /// Write a machine-readable report row here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a seeded parameter sweep.
    Sweep {
        /// JSON experiment spec; replaces the sweep flags when given.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, required_unless_present = "spec")]
        variable: Option<SweepVariable>,
        /// Comma-separated values of the swept variable.
        #[arg(long, value_delimiter = ',', required_unless_present = "spec")]
        values: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

fn read_payload(inline: &str, file: Option<&PathBuf>) -> Result<Vec<bool>> {
    match file {
        Some(p) => Ok(parse_bits(&fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?)?),
        None => Ok(parse_bits(inline)?),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let settings = cli.common.resolve()?;
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Buildmap { out } => {
            let hash = cmd_buildmap(&settings, &out)?;
            let _ = writeln!(stdout, "map {} hash {hash}", out.display());
        }
        Command::Encode {
            payload,
            payload_file,
            map,
            out,
        } => {
            let map = load_or_build_map(&settings, map.as_deref())?;
            let bits = read_payload(&payload, payload_file.as_ref())?;
            let outcome = cmd_encode(&settings, &map, &bits, &out)?;
            let _ = writeln!(
                stdout,
                "wrote {} and {} ({} regions, map {})",
                outcome.gcode_path.display(),
                outcome.sidecar_path.display(),
                outcome.sidecar.states.len(),
                outcome.sidecar.map_hash
            );
        }
        Command::Simulate {
            layout,
            gcode,
            map,
            out,
            refs,
        } => {
            let map = load_or_build_map(&settings, map.as_deref())?;
            let input = match (&layout, &gcode) {
                (Some(l), _) => SimulationInput::Layout(l),
                (None, Some(g)) => SimulationInput::Gcode(g),
                (None, None) => return Err(HarnessError::Usage("give --layout or --gcode".into())),
            };
            let mut log = io::stderr().lock();
            cmd_simulate(&settings, &map, input, &out, refs.as_deref(), &mut log)?;
        }
        Command::Decode {
            trace,
            refs,
            map,
            truth,
            csv,
        } => {
            let map = load_or_build_map(&settings, map.as_deref())?;
            let truth = truth.as_deref().map(parse_bits).transpose()?;
            let report = cmd_decode(&settings, &map, &trace, refs.as_deref(), truth.as_deref(), &mut stdout)?;
            if let Some(p) = csv {
                fs::write(&p, report_csv(&settings, &report)).map_err(|e| HarnessError::io(&p, e))?;
            }
            if !report.detection_success {
                return Ok(ExitCode::from(DETECTION_FAILURE));
            }
        }
        Command::Sweep {
            spec,
            variable,
            values,
            trials,
            out,
            map,
        } => {
            let spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| HarnessError::io(&p, e))?;
                    serde_json::from_str(&text).map_err(|e| HarnessError::Format {
                        path: p.display().to_string(),
                        message: e.to_string(),
                    })?
                }
                None => ExperimentSpec {
                    variable: variable.expect("required by clap"),
                    values,
                    trials,
                    seed: settings.rig.seed,
                    output: out,
                },
            };
            let map = load_or_build_map(&settings, map.as_deref())?;
            for s in run_sweep(&spec, &settings, &map)? {
                let _ = writeln!(
                    stdout,
                    "{} {} {}: detection {:.4} ber {}",
                    spec.variable.name(),
                    s.value,
                    s.coding,
                    s.detection_accuracy,
                    s.ber.map(|b| format!("{b:.4}")).unwrap_or_else(|| "n/a".into())
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
