use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use strata_cli::commands::{cmd_compare, cmd_gen_world, cmd_run, parse_methods, CliError, WorldKind};

#[derive(Parser)]
#[command(name = "strata", version, about = "Run and compare layered frontier exploration episodes")]
struct Cli {
    /// Keep the cost matrix and tour of every global plan.
    #[arg(long, global = true)]
    debug_dumps: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long, env = "STRATA_OUTPUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Run several planners over several seeds and summarize.
    Compare {
        config: PathBuf,
        #[arg(long, default_value = "go_feap,nearest,fov")]
        methods: String,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, env = "STRATA_OUTPUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Generate a world file.
    GenWorld {
        kind: Kind,
        /// Size in metres as x,y,z.
        #[arg(long, value_parser = parse_dims)]
        dims: Option<Dims>,
        /// Voxel edge (m).
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Maze,
    Plant,
}

#[derive(Clone, Copy)]
struct Dims([f64; 3]);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Dims([*x, *y, *z])),
        _ => Err(format!("expected x,y,z but got {} values", v.len())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res: Result<(), CliError> = match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, out.as_deref(), cli.debug_dumps).map(|d| println!("{}", d.display())),
        Cmd::Compare { config, methods, seeds, out } => parse_methods(&methods)
            .and_then(|m| cmd_compare(&config, &m, seeds, out.as_deref(), cli.debug_dumps))
            .map(|d| println!("{}", d.display())),
        Cmd::GenWorld { kind, dims, resolution, seed, output } => {
            let kind = match kind {
                Kind::Maze => WorldKind::Maze,
                Kind::Plant => WorldKind::Plant,
            };
            cmd_gen_world(kind, dims.map(|d| d.0), resolution, seed, &output)
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
