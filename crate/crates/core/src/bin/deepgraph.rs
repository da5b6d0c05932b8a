use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use deepgraph::commands::{self, exit_code};
use deepgraph::config::{Overrides, RunConfig};
use deepgraph::pipeline::ModelKind;
use deepgraph::Result;

#[derive(Parser)]
#[command(name = "deepgraph", version, about = "Graph growth prediction from heat kernel signature descriptors")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,

    /// Initialize weights with unit standard deviation.
    #[arg(long, global = true)]
    paper_init: bool,

    /// Run directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overwrite an existing benchmark.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the temporal graph, labeled instances and splits.
    Generate,
    /// Fit normalization statistics on train and write descriptors.
    Describe,
    /// Train one model (default deepgraph).
    Train,
    /// Report test MSE for `--model`, or every model in the config.
    Evaluate,
    /// Train and evaluate every model listed in the config.
    Compare,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Deepgraph,
    GdLinear,
    GdMlp,
    GdCnn,
    FeaturesLinear,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Deepgraph => ModelKind::Deepgraph,
            ModelArg::GdLinear => ModelKind::GdLinear,
            ModelArg::GdMlp => ModelKind::GdMlp,
            ModelArg::GdCnn => ModelKind::GdCnn,
            ModelArg::FeaturesLinear => ModelKind::FeaturesLinear,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .ok_or_else(|| deepgraph::Error::Config("--config is required".into()))?;
    let overrides = Overrides { seed: cli.seed, out: cli.out, paper_init: cli.paper_init };
    let cfg = RunConfig::load(&path, &overrides)?;
    let model = cli.model.map(ModelKind::from);
    match cli.command {
        Command::Generate => {
            let s = commands::cmd_generate(&cfg, cli.force)?;
            let c = &s.manifest.counts;
            println!("{} edges; instances train {} val {} test {}", c.edges, c.train, c.val, c.test);
        }
        Command::Describe => {
            let s = commands::cmd_describe(&cfg)?;
            println!("descriptors train {} val {} test {}; stats {}", s.counts[0], s.counts[1], s.counts[2], s.stats_sha256);
        }
        Command::Train => {
            let kind = model.unwrap_or(ModelKind::Deepgraph);
            let fitted = commands::cmd_train(&cfg, kind)?;
            println!("{}: best validation MSE {}", kind.name(), fitted.val_mse());
        }
        Command::Evaluate => {
            let kinds = model.map(|k| vec![k]).unwrap_or_else(|| cfg.model.compare.clone());
            print_report(&commands::cmd_evaluate(&cfg, &kinds)?);
        }
        Command::Compare => print_report(&commands::cmd_compare(&cfg)?),
    }
    Ok(())
}

fn print_report(report: &commands::Report) {
    println!("{}", commands::REPORT_HEADER);
    for r in &report.rows {
        println!("{},{},{},{}", r.kind.name(), r.n_test, r.test_mse, r.val_mse);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
