use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use twinreg::core::bench::{aggregate, Method};
use twinreg::core::Neighbors;
use twinreg::dataset_io::{export_generated, DatasetSpec};
use twinreg::experiment::{run_experiment, ExperimentConfig, MethodSpec};
use twinreg::results::{emit_results, format_report, read_aggregates, read_rows, write_rows};

#[derive(Parser)]
#[command(
    name = "twinreg",
    version,
    about = "Twin neural network regression experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV with a JSON metadata sidecar.
    Generate {
        /// tf, rcl or wsb
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of rows; the dataset's default size when omitted.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write rows.csv, aggregates.csv and aggregates.csv.json.
    Run(RunArgs),
    /// Aggregate per-split rows into per-method summaries.
    Aggregate {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an aggregate CSV as a table.
    Report {
        #[arg(long = "in", value_name = "AGGREGATES")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML experiment file. Other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// tf, rcl, wsb or a CSV path
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated method names, e.g. KNN,TNNR,NNTNNR_INFER
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Sweep values (k, m or ensemble size) for methods that take them, e.g. 1,4,16,ALL
    #[arg(long, value_delimiter = ',')]
    k: Vec<Neighbors>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch cap for plain networks.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epoch cap for twin networks.
    #[arg(long)]
    twin_epochs: Option<usize>,
    /// Training pairs sampled per twin epoch instead of a full pass.
    #[arg(long)]
    samples_per_epoch: Option<usize>,
    /// Cap on twin validation pairs.
    #[arg(long)]
    val_pair_limit: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn build_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let Some(name) = &args.dataset else {
                bail!("either --config or --dataset is required");
            };
            if args.methods.is_empty() {
                bail!("either --config or --methods is required");
            }
            ExperimentConfig::new(DatasetSpec::from_name(name), Vec::new())
        }
    };
    if args.config.is_some() {
        if let Some(name) = &args.dataset {
            cfg.dataset = DatasetSpec::from_name(name);
        }
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods.iter().copied().map(MethodSpec::new).collect();
    }
    if !args.k.is_empty() {
        for m in cfg
            .methods
            .iter_mut()
            .filter(|m| MethodSpec::takes_values(m.method))
        {
            m.k = args.k.clone();
        }
    }
    if let Some(s) = args.splits {
        cfg.n_splits = s;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.ann.max_epochs = e;
    }
    if let Some(e) = args.twin_epochs {
        cfg.twin.max_epochs = e;
    }
    if args.samples_per_epoch.is_some() {
        cfg.twin.samples_per_epoch = args.samples_per_epoch;
    }
    if args.val_pair_limit.is_some() {
        cfg.val_pair_limit = args.val_pair_limit;
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn generate(dataset: &str, seed: u64, n: Option<usize>, out: &Path) -> anyhow::Result<()> {
    let mut spec = DatasetSpec::from_name(dataset);
    match (&mut spec, n) {
        (DatasetSpec::Csv { .. }, _) => {
            bail!("unknown generator {dataset:?}; expected tf, rcl or wsb")
        }
        (DatasetSpec::Tf { n: size, .. }, Some(n))
        | (DatasetSpec::Rcl { n: size, .. }, Some(n))
        | (DatasetSpec::Wsb { n: size, .. }, Some(n)) => *size = n,
        _ => {}
    }
    let ds = export_generated(&spec, seed, out)?;
    info!("wrote {} rows to {}", ds.len(), out.display());
    Ok(())
}

fn run(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = build_config(args)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let rows = run_experiment(&cfg)?;
    for r in rows.iter().filter(|r| r.failure.is_some()) {
        warn!(
            "{} split {}: {}",
            r.method,
            r.split_seed,
            r.failure.as_deref().unwrap_or_default()
        );
    }
    write_rows(&rows, args.out.join("rows.csv"))?;
    let agg = aggregate(&rows)?;
    for w in &agg.warnings {
        warn!("{w}");
    }
    emit_results(&agg.rows, args.out.join("aggregates.csv"), &cfg)?;
    print!("{}", format_report(&agg.rows));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate {
            dataset,
            seed,
            n,
            out,
        } => generate(dataset, *seed, *n, out),
        Command::Run(args) => run(args),
        Command::Aggregate { rows, out } => (|| {
            let agg = aggregate(&read_rows(rows)?)?;
            for w in &agg.warnings {
                warn!("{w}");
            }
            twinreg::results::write_aggregates(&agg.rows, out)?;
            Ok(())
        })(),
        Command::Report { input } => read_aggregates(input)
            .map(|rows| print!("{}", format_report(&rows)))
            .map_err(Into::into),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
