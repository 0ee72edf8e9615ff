use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vaxnet::config::{parse_config, ConfigError};
use vaxnet::effects::{EffectsError, FittedModels, ModelSpec};
use vaxnet::epidemic::{write_group_trajectories_csv, write_trajectory_csv, ParamError};
use vaxnet::extract::{read_records_csv, write_records_csv, Field, RecordsError};
use vaxnet::inference::{
    bootstrap_effects, bootstrap_rng, dataset_records, fixture_from_network, generate_network, monte_carlo_experiment,
    simulate_dataset, table_scenarios, write_effect_report, write_summary_csv, InferenceError, ScenarioConfig,
    ScenarioError, SimulatedData, StudyDesign, Table,
};
use vaxnet::netgraph::{load_edge_list, save_edge_list, NetError};
use vaxnet::par;

#[derive(Parser)]
#[command(name = "vaxnet", version, about = "Contagion and infectiousness effects of vaccination")]
struct Cli {
    /// Overrides the seed of the config (or of the table presets).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replicate loops; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a family-cluster network and write its edge list.
    GenerateNetwork {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long)]
        out_tie_prob: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one epidemic replicate and write its trajectory.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Edge list to simulate on (network mode); generated from the config if absent.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        /// Trajectory CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write the analysis records.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Fit both models to a records file and bootstrap the effects.
    Estimate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated covariates, e.g. `V_e,U_a,L_a`.
        #[arg(long)]
        covariates: Option<String>,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Replicate index selecting the bootstrap stream.
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo experiment of a config and write its summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a results table.
    Reproduce {
        #[arg(value_enum)]
        table: TableArg,
        /// Fraction of the replicate and bootstrap counts to run, in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Table1,
    Table2,
}

enum Failure {
    Validation(String),
    Degenerate(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Degenerate(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Degenerate(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<NetError> for Failure {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<RecordsError> for Failure {
    fn from(e: RecordsError) -> Self {
        match &e {
            RecordsError::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Degenerate(_) => Failure::Degenerate(e.to_string()),
            ScenarioError::Params(p) => p.into(),
            ScenarioError::Network(n) => n.into(),
        }
    }
}

impl From<InferenceError> for Failure {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::NoReplicates => Failure::Validation(e.to_string()),
            _ => Failure::Degenerate(e.to_string()),
        }
    }
}

impl From<EffectsError> for Failure {
    fn from(e: EffectsError) -> Self {
        Failure::Degenerate(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>, default: &str, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(io_err(p))?,
        None => default.to_string(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Buffered writer on `path`, or stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

fn generate(
    cli_seed: Option<u64>,
    config: Option<&Path>,
    groups: Option<usize>,
    group_size: Option<usize>,
    out_tie_prob: Option<f64>,
    out: &Path,
) -> Result<(), Failure> {
    let mut cfg = load_config(config, "mode = network", cli_seed)?;
    match &mut cfg.design {
        StudyDesign::Network {
            num_groups,
            group_size: size,
            out_tie_prob: p,
        } => {
            *num_groups = groups.unwrap_or(*num_groups);
            *size = group_size.unwrap_or(*size);
            *p = out_tie_prob.unwrap_or(*p);
        }
        StudyDesign::Groups { .. } => {
            return Err(Failure::Validation("generate-network needs mode = network".into()));
        }
    }
    let net = generate_network(&cfg)?.expect("network design");
    save_edge_list(&net, out)?;
    Ok(())
}

fn simulate(
    cli_seed: Option<u64>,
    config: Option<&Path>,
    network: Option<&Path>,
    replicate: usize,
    out: &Path,
    records: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = load_config(config, "", cli_seed)?;
    cfg.validate()?;
    let fixture = match cfg.design {
        StudyDesign::Groups { .. } => None,
        StudyDesign::Network { .. } => {
            let net = match network {
                Some(p) => load_edge_list(p).map_err(|e| match Failure::from(e) {
                    Failure::Io(m) => Failure::Io(format!("{}: {m}", p.display())),
                    other => other,
                })?,
                None => generate_network(&cfg)?.expect("network design"),
            };
            Some(fixture_from_network(&cfg, net))
        }
    };
    let data = simulate_dataset(&cfg, fixture.as_ref(), replicate)?;
    let mut w = output(Some(out))?;
    match &data {
        SimulatedData::Groups(groups) => write_group_trajectories_csv(&mut w, groups),
        SimulatedData::Network { vaccination, trajectory } => write_trajectory_csv(&mut w, vaccination, trajectory),
    }
    .map_err(io_err(out))?;
    finish(w)?;
    if let Some(path) = records {
        let recs = dataset_records(&cfg, fixture.as_ref(), &data);
        let mut w = output(Some(path))?;
        write_records_csv(&mut w, &recs)?;
        finish(w)?;
    }
    Ok(())
}

fn parse_covariates(list: &str) -> Result<ModelSpec, Failure> {
    let mut covariates = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match Field::parse(name) {
            Some(Field::VA) => return Err(Failure::Validation("V_a is the exposure and is always in the model".into())),
            Some(f) => covariates.push(f),
            None => return Err(Failure::Validation(format!("unknown covariate {name:?}"))),
        }
    }
    Ok(ModelSpec { covariates })
}

fn estimate(
    cli_seed: Option<u64>,
    records: &Path,
    config: Option<&Path>,
    covariates: Option<&str>,
    bootstrap: Option<usize>,
    replicate: usize,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config, "", cli_seed)?;
    if let Some(list) = covariates {
        cfg.estimation.spec = parse_covariates(list)?;
    }
    if let Some(b) = bootstrap {
        if b == 0 {
            return Err(Failure::Validation("--bootstrap must be at least 1".into()));
        }
        cfg.estimation.n_bootstrap = b;
    }
    let file = fs::File::open(records).map_err(io_err(records))?;
    let recs = read_records_csv(io::BufReader::new(file))?;
    let opts = &cfg.estimation;
    let models = FittedModels::fit(&recs, &opts.spec, opts.eval, &opts.fit)?;
    let boot = bootstrap_effects(&recs, opts, &mut bootstrap_rng(&cfg, replicate))?;
    let mut w = output(out)?;
    write_effect_report(&mut w, &models, &opts.spec, &boot).map_err(|e| Failure::Io(e.to_string()))?;
    if boot.flagged() {
        eprintln!(
            "warning: only {} of {} bootstrap replicates converged",
            boot.n_converged, boot.n_requested
        );
    }
    finish(w)
}

fn run(cli_seed: Option<u64>, config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(Some(config), "", cli_seed)?;
    let row = monte_carlo_experiment(&cfg)?;
    let mut w = output(out)?;
    write_summary_csv(&mut w, &[row]).map_err(|e| Failure::Io(e.to_string()))?;
    finish(w)
}

fn reproduce(cli_seed: Option<u64>, table: TableArg, scale: f64, out: Option<&Path>) -> Result<(), Failure> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Failure::Validation(format!("--scale must be in (0, 1], got {scale}")));
    }
    let (table, default_seed) = match table {
        TableArg::Table1 => (Table::Groups, 20_240_601),
        TableArg::Table2 => (Table::Network, 20_240_602),
    };
    let mut rows = Vec::new();
    for cfg in table_scenarios(table, scale, cli_seed.unwrap_or(default_seed)) {
        eprintln!("{} at {}: {} replicates", cfg.label, cfg.design.size(), cfg.n_sims);
        rows.push(monte_carlo_experiment(&cfg)?);
    }
    let mut w = output(out)?;
    write_summary_csv(&mut w, &rows).map_err(|e| Failure::Io(e.to_string()))?;
    finish(w)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::GenerateNetwork {
            config,
            groups,
            group_size,
            out_tie_prob,
            out,
        } => generate(seed, config.as_deref(), groups, group_size, out_tie_prob, &out),
        Command::Simulate {
            config,
            network,
            replicate,
            out,
            records,
        } => simulate(seed, config.as_deref(), network.as_deref(), replicate, &out, records.as_deref()),
        Command::Estimate {
            records,
            config,
            covariates,
            bootstrap,
            replicate,
            out,
        } => estimate(
            seed,
            &records,
            config.as_deref(),
            covariates.as_deref(),
            bootstrap,
            replicate,
            out.as_deref(),
        ),
        Command::Run { config, out } => run(seed, &config, out.as_deref()),
        Command::Reproduce { table, scale, out } => reproduce(seed, table, scale, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match par::with_threads(threads, move || dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
