use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rough_tails::NormKind;
use rough_tails_cli::{
    cmd_functionals, cmd_report, cmd_simulate, exit, print_json, with_workers, CliError,
    ExperimentConfig,
};

#[derive(Debug, Parser)]
#[command(name = "rough-tails", version, about = "Tail experiments for rough path functionals")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate paths and sample sets.
    Simulate,
    /// Evaluate the functional bundle of a path CSV.
    Functionals {
        path: PathBuf,
        /// p-variation exponent (config value, else 2.5).
        #[arg(long)]
        p: Option<f64>,
        /// Greedy partition radius (config value, else 1).
        #[arg(long)]
        r: Option<f64>,
        /// hom_max, hom_sym or cc_heisenberg (config value, else hom_sym).
        #[arg(long)]
        metric: Option<NormKind>,
        /// Holder exponent (defaults to 1/p).
        #[arg(long)]
        holder_alpha: Option<f64>,
    },
    /// Run the tail study and write the report.
    Report,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <file> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stdout_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    print_json(&mut std::io::stdout().lock(), value).map_err(|source| CliError::Io {
        context: "writing stdout".into(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate => {
            let cfg = load(&cli)?;
            let summary = with_workers(cli.workers, || cmd_simulate(&cfg))??;
            stdout_json(&summary)
        }
        Command::Functionals {
            path,
            p,
            r,
            metric,
            holder_alpha,
        } => {
            let cfg = cli.config.as_ref().map(|_| load(&cli)).transpose()?;
            let p = p.or(cfg.as_ref().map(|c| c.p)).unwrap_or(2.5);
            let r = r.or(cfg.as_ref().map(|c| c.count_radius)).unwrap_or(1.0);
            let metric = metric
                .or(cfg.as_ref().map(|c| c.metric))
                .unwrap_or(NormKind::HomSym);
            let bundle = with_workers(cli.workers, || cmd_functionals(path, p, r, metric, *holder_alpha))??;
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out)
                    .and_then(|_| {
                        std::fs::write(
                            out.join("functionals.json"),
                            serde_json::to_string_pretty(&bundle).expect("serializable") + "\n",
                        )
                    })
                    .map_err(|source| CliError::Io {
                        context: format!("writing {}", out.display()),
                        source,
                    })?;
            }
            stdout_json(&bundle)
        }
        Command::Report => {
            let cfg = load(&cli)?;
            let report = with_workers(cli.workers, || cmd_report(&cfg))??;
            stdout_json(&serde_json::json!({
                "passed": report.passed,
                "output_dir": cfg.output_dir,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
