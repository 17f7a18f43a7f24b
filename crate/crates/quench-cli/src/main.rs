use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quench_cli::config::{ConfigError, ExperimentConfig, OutputFormat};
use quench_cli::experiments::{
    dump_state, run_experiment, write_all, write_output, ExperimentError, EXPERIMENTS,
};

#[derive(Parser, Debug)]
#[command(name = "quench", version, about = "Quench dynamics of patterned free-fermion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct Overrides {
    /// Config file, JSON or `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Block length for entropy experiments.
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// dimer, dimer-Q, rainbow, frozen-rainbow, wigner-P or island-P.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a named experiment and write its data files and report.
    Run {
        experiment: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Exit with status 2 when any verdict in the report fails.
        #[arg(long)]
        strict: bool,
    },
    /// Write a correlation matrix and its invariant report.
    DumpState {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the available experiments.
    ListExperiments,
}

fn resolve(o: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if o.family.is_some() {
        cfg.family = o.family.clone();
    }
    cfg.p = o.p.or(cfg.p);
    cfg.q = o.q.or(cfg.q);
    cfg.gamma = o.gamma.or(cfg.gamma);
    cfg.n = o.n.or(cfg.n);
    cfg.block = o.block.or(cfg.block);
    cfg.dt = o.dt.or(cfg.dt);
    cfg.t_max = o.tmax.or(cfg.t_max);
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    if let Some(f) = &o.format {
        cfg.format = OutputFormat::parse(f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                println!("{name:<14} {about}");
            }
            Ok(())
        }
        Command::Run {
            experiment,
            overrides,
            strict,
        } => {
            if !EXPERIMENTS.iter().any(|(n, _)| *n == experiment) {
                return Err(ExperimentError::Usage(format!(
                    "unknown experiment {experiment}; see list-experiments"
                )));
            }
            let cfg = resolve(&overrides)?;
            let out = run_experiment(&experiment, &cfg)?;
            let written = write_output(&experiment, &out, &cfg)?;
            for v in &out.report.verdicts {
                println!(
                    "criterion {:>2} {:<40} {}",
                    v.criterion,
                    v.name,
                    if v.passed { "PASS" } else { "FAIL" }
                );
            }
            for p in &written {
                println!("wrote {}", p.display());
            }
            let failed = out.report.verdicts.iter().filter(|v| !v.passed).count();
            if strict && failed > 0 {
                return Err(ExperimentError::FailedVerdicts(failed));
            }
            Ok(())
        }
        Command::DumpState { overrides } => {
            let cfg = resolve(&overrides)?;
            let fam = cfg
                .state_family()?
                .ok_or_else(|| ExperimentError::Usage("dump-state needs --family".into()))?;
            let n = cfg
                .n
                .ok_or_else(|| ExperimentError::Usage("dump-state needs --n".into()))?;
            let (csv, json) = dump_state(fam, n, &cfg.tolerances)?;
            std::fs::create_dir_all(&cfg.out)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", cfg.out.display())))?;
            let stem = format!("state_{}_{n}", fam.name());
            let files = vec![
                (cfg.out.join(format!("{stem}.csv")), csv),
                (cfg.out.join(format!("{stem}.json")), json),
            ];
            let written = write_all(&files)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
