use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weakmean::orbitstats::Schedule;
use weakmean::systems::SystemDescriptor;
use weakmean_cli::config::{ExperimentConfig, Format, OutputSpec, Task, VerifyLevel};
use weakmean_cli::record::{persist, write_csv};
use weakmean_cli::{tasks, CliError, EXIT_OK, EXIT_VERIFY_FAILED};

#[derive(Parser)]
#[command(name = "weakmean", version, about = "Weak-mean pseudometric experiments on exact orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orbit statistics over a pair list and schedule.
    Metric(Common),
    /// Upper and lower density of an integer set.
    Density(Common),
    /// A point, sensitivity or agreement probe.
    Probe(Common),
    /// Sensitive tuple search over anchor pairs.
    TupleSearch(Common),
    /// System-level equicontinuity/sensitivity verdict.
    Dichotomy(Common),
    /// Dichotomy reports over a grid of systems.
    Sweep(Common),
    /// The built-in invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Output {
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the record goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Schedule override: "lo..hi" (powers of two) or a comma list.
    #[arg(long)]
    schedule: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: VerifyLevel,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

fn task_of(command: &Command) -> Task {
    match command {
        Command::Metric(_) => Task::Metric,
        Command::Density(_) => Task::Density,
        Command::Probe(_) => Task::Probe,
        Command::TupleSearch(_) => Task::TupleSearch,
        Command::Dichotomy(_) => Task::Dichotomy,
        Command::Sweep(_) => Task::Sweep,
        Command::Verify(_) => Task::Verify,
    }
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn build_config(cli: &Cli) -> Result<(ExperimentConfig, &Output), CliError> {
    let task = task_of(&cli.command);
    let (mut cfg, output) = match &cli.command {
        Command::Verify(v) => {
            let mut cfg = match &v.config {
                Some(p) => load(p)?,
                None => ExperimentConfig::from_json(&serde_json::to_string(&serde_json::json!({
                    "system": SystemDescriptor::doubling(),
                    "task": "verify",
                }))?)?,
            };
            cfg.verify_level = v.level;
            (cfg, &v.output)
        }
        Command::Metric(c)
        | Command::Density(c)
        | Command::Probe(c)
        | Command::TupleSearch(c)
        | Command::Dichotomy(c)
        | Command::Sweep(c) => {
            let mut cfg = load(&c.config)?;
            if let Some(s) = &c.schedule {
                let s = Schedule::parse(s)?;
                cfg.probe.insert("schedule".into(), serde_json::to_value(&s)?);
                cfg.schedule = Some(s);
            }
            (cfg, &c.output)
        }
    };
    if cfg.task != task {
        return Err(CliError::Config(format!(
            "config task {:?} does not match the subcommand",
            serde_json::to_value(cfg.task)?
        )));
    }
    if let Some(seed) = output.seed {
        cfg.seed = seed;
    }
    cfg.output = OutputSpec {
        dir: output.out.clone().or(cfg.output.dir.clone()),
        format: output.format.or(cfg.output.format),
    };
    cfg.validate()?;
    Ok((cfg, output))
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let (cfg, output) = build_config(cli)?;
    if let Some(t) = output.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let outcome = tasks::run(&cfg)?;
    let format = cfg.output.format.unwrap_or_default();
    match &cfg.output.dir {
        Some(dir) => {
            persist(&outcome.record, &outcome.rows, dir, format)?;
            eprintln!("wrote {} (config {})", dir.display(), &outcome.record.config_hash[..12]);
        }
        None => match format {
            Format::Csv => write_csv(&outcome.rows, std::io::stdout().lock())?,
            _ => println!("{}", serde_json::to_string_pretty(&outcome.record)?),
        },
    }
    Ok(if outcome.failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
