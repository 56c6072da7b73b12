use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bifurc_cli::output::{write_json, Timing};
use bifurc_cli::{run, Command, Flags, RunConfig};
use clap::Parser;

/// Bifurcation branches of complex bound states on boxes, intervals and the disk.
#[derive(Debug, Parser)]
#[command(name = "bifurc", version, about)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    cmd: Command,
    /// Index into the seed list written by `seeds`.
    #[arg(long)]
    seed_id: Option<usize>,
    #[arg(long)]
    eps_max: Option<f64>,
    /// Grid points per side for nodal pictures.
    #[arg(long)]
    resolution: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (cfg, raw) = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let flags = Flags { seed_id: args.seed_id, eps_max: args.eps_max, resolution: args.resolution };
    let start = Instant::now();
    match run(args.cmd, &cfg, &raw, &args.out, &flags) {
        Ok((summary, files)) => {
            // a closed stdout (e.g. piped into `head`) is not an error
            let mut stdout = std::io::stdout().lock();
            let _ = write!(stdout, "{summary}");
            for f in &files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            let timing = Timing { command: args.cmd.name().to_string(), seconds: start.elapsed().as_secs_f64() };
            if let Err(e) = write_json(&args.out.join(format!("{}.timing.json", args.cmd.name())), &timing) {
                eprintln!("warning: {e}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
