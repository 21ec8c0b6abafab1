use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod execute;
mod spec;

use spec::{ExperimentKind, FieldError, RunSpec};

#[derive(Parser)]
#[command(name = "egtlab", version, about = "Batch experiment runner for evolutionary game models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run specification.
    #[arg(long)]
    spec: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec's sample count.
    #[arg(long)]
    samples: Option<u64>,
    /// Output directory (defaults to the spec's `out`, then `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pure and mixed Nash equilibria of a game.
    Nash(RunArgs),
    /// Evolve one initial condition to convergence.
    Evolve(RunArgs),
    /// Monte Carlo basins of attraction.
    Basins(RunArgs),
    /// Induced long-run payoff matrix of an automaton roster.
    Repeated(RunArgs),
    /// Basin sweep over apology cost and signal reliability.
    Sweep(RunArgs),
    /// Lattice imitation dynamics.
    Spatial(RunArgs),
    /// Re-execute a run from its manifest, reproducing outputs exactly.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (defaults to the manifest's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Nash(a) => run(ExperimentKind::Nash, a),
        Command::Evolve(a) => run(ExperimentKind::Evolve, a),
        Command::Basins(a) => run(ExperimentKind::Basins, a),
        Command::Repeated(a) => run(ExperimentKind::Repeated, a),
        Command::Sweep(a) => run(ExperimentKind::Sweep, a),
        Command::Spatial(a) => run(ExperimentKind::Spatial, a),
        Command::Rerun { manifest, out } => rerun(manifest, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            failure.exit_code()
        }
    }
}

/// Machine-readable failure report printed to stderr as JSON.
pub(crate) enum Failure {
    Validation(Vec<FieldError>),
    Runtime(String),
}

impl Failure {
    fn to_json(&self) -> String {
        match self {
            Failure::Validation(errors) => serde_json::json!({
                "error": { "kind": "validation", "details": errors }
            })
            .to_string(),
            Failure::Runtime(message) => serde_json::json!({
                "error": { "kind": "runtime", "message": message }
            })
            .to_string(),
        }
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Validation(_) => ExitCode::from(2),
            Failure::Runtime(_) => ExitCode::FAILURE,
        }
    }
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", args.spec.display())))?;
    let mut parsed: RunSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Runtime(format!("cannot parse {}: {e}", args.spec.display())))?;
    if parsed.experiment != kind {
        return Err(Failure::Validation(vec![FieldError {
            field: "experiment".into(),
            reason: format!(
                "spec declares `{}` but the `{}` subcommand was invoked",
                parsed.experiment.name(),
                kind.name()
            ),
        }]));
    }
    let mut overrides = Vec::new();
    if let Some(seed) = args.seed {
        parsed.seed = Some(seed);
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    if let Some(samples) = args.samples {
        parsed.samples = Some(samples);
        overrides.push(("samples".to_string(), samples.to_string()));
    }
    if let Some(out) = &args.out {
        parsed.out = Some(out.clone());
        overrides.push(("out".to_string(), out.display().to_string()));
    }
    let normalized = spec::validate(parsed).map_err(Failure::Validation)?;
    let out_dir = normalized.out.clone().unwrap_or_else(|| PathBuf::from("."));
    execute::execute(&normalized, &out_dir, &overrides)
        .map_err(|e| Failure::Runtime(format!("{e:#}")))?;
    Ok(())
}

fn rerun(manifest_path: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: execute::Manifest = serde_json::from_str(&text)
        .map_err(|e| Failure::Runtime(format!("cannot parse manifest: {e}")))?;
    let normalized = spec::validate(manifest.spec.clone()).map_err(Failure::Validation)?;
    let out_dir = out
        .or_else(|| manifest_path.parent().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    execute::execute(&normalized, &out_dir, &[])
        .map_err(|e| Failure::Runtime(format!("{e:#}")))?;
    Ok(())
}
