use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qtomo::experiments::{self, BasisKind, ExperimentConfig, ExperimentKind, Manifest, StateSpec};
use qtomo::io;
use qtomo::linalg::DensityMatrix;
use qtomo::sdp::SolverSettings;
use qtomo::states::{exact_probabilities, noisy_frequencies, NoiseModel};
use qtomo::tomography::{reconstruct_with_threshold, TomographyProblem, DEFAULT_THRESHOLD_FACTOR};
use qtomo::{witness, Error};

#[derive(Parser)]
#[command(
    name = "qtomo",
    version,
    about = "Variational quantum state tomography"
)]
struct Cli {
    /// Worker threads for experiment sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measurement bases.
    Bases {
        #[command(subcommand)]
        command: BasesCommand,
    },
    /// Simulate measurement records for a state.
    Simulate(SimulateArgs),
    /// Reconstruct a state from measurement records.
    Reconstruct(ReconstructArgs),
    /// Optimal decomposable witness of a state.
    Witness(WitnessArgs),
    /// Run one of the numerical experiments.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum BasesCommand {
    /// Write a projector set as JSON.
    Gen {
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = BasisArg::Mub)]
        kind: BasisArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Mub,
    GellMann,
}

impl From<BasisArg> for BasisKind {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Mub => BasisKind::Mub,
            BasisArg::GellMann => BasisKind::GellMann,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StateArg {
    Werner,
    RandomPure,
    RandomDensity,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    state: StateArg,
    /// Werner parameter.
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.8)]
    beta: f64,
    /// Local dimension of each Werner party.
    #[arg(long, default_value_t = 3)]
    local_dim: usize,
    /// Dimension of random states.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = BasisArg::Mub)]
    basis: BasisArg,
    /// Relative uniform noise level in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Keep only the first `classes` complete measurements.
    #[arg(long)]
    classes: Option<usize>,
    /// Records CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the simulated state as JSON.
    #[arg(long)]
    state_out: Option<PathBuf>,
    /// Also write the projector set as JSON.
    #[arg(long)]
    basis_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    records: PathBuf,
    /// Projector set JSON.
    #[arg(long)]
    basis: PathBuf,
    /// TomographyResult JSON (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// True state JSON for diagnostics.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Bipartite cut such as `3x3` for witnessed entanglement.
    #[arg(long, value_parser = parse_dims)]
    witness_dims: Option<(usize, usize)>,
    /// Also write the estimate's witness as JSON (needs --witness-dims).
    #[arg(long)]
    witness_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_FACTOR)]
    threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon_floor: f64,
    /// Solver settings JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    /// State JSON.
    #[arg(long)]
    state: PathBuf,
    #[arg(long, value_parser = parse_dims)]
    dims: (usize, usize),
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    which: ExperimentArg,
    /// Experiment config JSON.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the configuration stored in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Output directory (default `runs/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Fig1 => ExperimentKind::Fig1,
            ExperimentArg::Fig2 => ExperimentKind::Fig2,
            ExperimentArg::Fig3 => ExperimentKind::Fig3,
            ExperimentArg::Fig4 => ExperimentKind::Fig4,
            ExperimentArg::Custom => ExperimentKind::Custom,
        }
    }
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or("expected AxB, e.g. 3x3")?;
    let a = a
        .trim()
        .parse()
        .map_err(|_| format!("bad dimension `{a}`"))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| format!("bad dimension `{b}`"))?;
    Ok((a, b))
}

/// Errors from the library, split by exit code.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Failure::Numerical(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n"))
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn bases_gen(dim: usize, kind: BasisArg, out: Option<&Path>) -> Result<(), Failure> {
    let ps = BasisKind::from(kind).build(dim)?;
    emit(out, &io::projector_set_to_json(&ps)?)
}

fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let spec = match a.state {
        StateArg::Werner => StateSpec::Werner {
            beta: a.beta,
            local_dim: a.local_dim,
        },
        StateArg::RandomPure => StateSpec::RandomPure {
            dim: a
                .dim
                .ok_or_else(|| Failure::Usage("--dim is required for random states".into()))?,
        },
        StateArg::RandomDensity => {
            let dim = a
                .dim
                .ok_or_else(|| Failure::Usage("--dim is required for random states".into()))?;
            StateSpec::RandomDensity {
                dim,
                rank: a.rank.unwrap_or(dim),
            }
        }
    };
    let rho = spec.build(a.seed)?;
    let ps = BasisKind::from(a.basis).build(spec.dim())?;
    let noise = if a.noise == 0.0 {
        NoiseModel::none()
    } else {
        NoiseModel::uniform(a.noise, a.seed)
    };
    let mut records = noisy_frequencies(&exact_probabilities(&rho, &ps)?, &noise)?;
    if let Some(k) = a.classes {
        if k == 0 || k > ps.num_classes() {
            return Err(Failure::Usage(format!(
                "--classes must lie in 1..={}",
                ps.num_classes()
            )));
        }
        records.truncate(ps.class_range(k - 1).end);
    }
    let mut buf = Vec::new();
    io::write_records(&mut buf, &records)?;
    let text = String::from_utf8(buf).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(a.out.as_deref(), text.trim_end())?;
    if let Some(p) = &a.state_out {
        io::write_json(p, &rho)?;
    }
    if let Some(p) = &a.basis_out {
        io::write_projector_set(p, &ps)?;
    }
    Ok(())
}

fn reconstruct(a: &ReconstructArgs) -> Result<(), Failure> {
    let ps = io::read_projector_set(&a.basis)?;
    let records = io::read_records_file(&a.records)?;
    let settings: SolverSettings = match &a.config {
        Some(p) => io::read_json(p)?,
        None => SolverSettings::default(),
    };
    let reference: Option<DensityMatrix> = a.reference.as_deref().map(io::read_json).transpose()?;
    let tp = TomographyProblem::new(ps, records)?
        .with_epsilon_floor(a.epsilon_floor)?
        .with_witness_dims(a.witness_dims)?;
    let result = reconstruct_with_threshold(&tp, &settings, reference.as_ref(), a.threshold)?;
    emit(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&result).map_err(|e| Failure::Usage(e.to_string()))?,
    )?;
    if let Some(p) = &a.witness_out {
        let dims = a
            .witness_dims
            .ok_or_else(|| Failure::Usage("--witness-out needs --witness-dims".into()))?;
        io::write_json(p, &witness::decomposable_witness(&result.estimate, dims)?)?;
    }
    Ok(())
}

fn witness_cmd(a: &WitnessArgs) -> Result<(), Failure> {
    let rho: DensityMatrix = io::read_json(&a.state)?;
    let w = witness::decomposable_witness(&rho, a.dims)?;
    emit(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&w).map_err(|e| Failure::Usage(e.to_string()))?,
    )
}

fn experiment(a: &ExperimentArgs, threads: usize) -> Result<(), Failure> {
    let kind = ExperimentKind::from(a.which);
    let mut config = if let Some(p) = &a.manifest {
        io::read_json::<Manifest>(p)?.config
    } else if let Some(p) = &a.config {
        io::read_json::<ExperimentConfig>(p)?
    } else {
        ExperimentConfig::new(kind)
    };
    if config.experiment != kind {
        return Err(Failure::Usage(format!(
            "config describes {:?}, not {:?}",
            config.experiment, kind
        )));
    }
    if let Some(s) = a.seed {
        config.seed = Some(s);
    }
    if let Some(n) = a.noise {
        config.noise_level = Some(n);
    }
    let dir = a
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{kind:?}").to_lowercase()));
    let out = experiments::run(&config, threads)?;
    experiments::write_outputs(&dir, &out)?;
    eprintln!("wrote {} tables to {}", out.tables.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Bases {
            command: BasesCommand::Gen { dim, kind, out },
        } => bases_gen(*dim, *kind, out.as_deref()),
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Witness(a) => witness_cmd(a),
        Command::Experiment(a) => experiment(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
