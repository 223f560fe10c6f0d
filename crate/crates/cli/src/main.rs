use std::process::ExitCode;

use clap::Parser;

use weakclose::commands::{run, Command};
use weakclose::config::parse_config;

/// Weak-closure sets, convex envelopes and approximating sequences for
/// forward-backward diffusion fluxes.
#[derive(Debug, Parser)]
#[command(name = "weakclose", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Config file, or inline JSON starting with `{`.
    #[arg(long)]
    config: String,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    /// Cell counts in x and t.
    #[arg(long, num_args = 2, value_names = ["NX", "NT"])]
    grid: Option<Vec<usize>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("WEAKCLOSE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // fails only if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut cfg = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = cli.out {
        // relative to the working directory, not to the config file
        let abs = std::env::current_dir().map(|d| d.join(&out)).unwrap_or_else(|_| out.into());
        cfg.output = Some(abs.to_string_lossy().into_owned());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.cg_tol {
        cfg.residual.cg_tol = tol;
    }
    if let Some(g) = cli.grid {
        cfg.grid.nx = g[0];
        cfg.grid.nt = g[1];
    }
    match run(cli.command, &cfg) {
        Ok(o) if o.passed => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("verdict failed; see the report in the output directory");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
