use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use embdebias::evaluation::{render_table, Layout};
use embdebias::pipeline::{
    load_report, probe, run_matrix, run_strategy, write_report, write_run, DatasetConfig, ExperimentConfig, Scope, Strategy,
};
use embdebias::synth::{generate_biased_corpus, write_corpus, SynthSpec};
use embdebias::{Error, Result};

#[derive(Parser)]
#[command(name = "embdebias", version, about = "Measure and remove dataset bias from embedding features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-domain corpus and a matching config.json.
    Synth {
        /// Generator spec (JSON); built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured strategy and scope.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's strategy.
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Overrides the config's scope.
        #[arg(long)]
        scope: Option<Scope>,
        #[arg(long)]
        instrument: bool,
    },
    /// Run every strategy × scope combination plus the shared baseline.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "none,LDA,mLDA,K,KLDA,mKLDA")]
        strategies: Vec<Strategy>,
        #[arg(long, value_delimiter = ',', default_value = "global,classwise")]
        scopes: Vec<Scope>,
        #[arg(long)]
        instrument: bool,
    },
    /// Render a stored report.
    Report {
        /// Directory holding report.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "table1")]
        layout: Layout,
    },
    /// Bias correlations of the undebiased classifiers only.
    Probe {
        #[arg(long)]
        config: PathBuf,
    },
}

fn synth(spec: Option<&Path>, out: &Path) -> Result<()> {
    let spec = match spec {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec::default(),
    };
    let corpus = generate_biased_corpus(&spec)?;
    let files = write_corpus(&corpus, &spec, out)?;
    let rel = |p: &Path| PathBuf::from(p.file_name().expect("written file has a name"));
    let datasets = files
        .domains
        .iter()
        .map(|(name, emb, man)| DatasetConfig {
            name: name.clone(),
            embeddings: rel(emb),
            format: None,
            manifest: rel(man),
        })
        .collect();
    let mut config = ExperimentConfig::new(datasets, "results");
    config.genre_map = Some(rel(&files.genre_map));
    config.seed = spec.seed;
    config.save(out.join("config.json"))?;
    println!("wrote synthetic corpus and config.json to {}", out.display());
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { spec, out } => synth(spec.as_deref(), &out),
        Command::Run {
            config,
            strategy,
            scope,
            instrument,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.strategy = strategy.unwrap_or(cfg.strategy);
            cfg.scope = scope.unwrap_or(cfg.scope);
            cfg.instrument |= instrument;
            cfg.validate()?;
            let out = run_strategy(&cfg)?;
            let dir = write_run(&cfg, &out)?;
            print!("{}", render_table(&out.report, Layout::Table1)?.text);
            println!("results in {}", dir.display());
            Ok(())
        }
        Command::Matrix {
            config,
            strategies,
            scopes,
            instrument,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.instrument |= instrument;
            let out = run_matrix(&cfg, &strategies, &scopes)?;
            print!("{}", render_table(&out.combined, Layout::Table1)?.text);
            println!("results in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Report { input, layout } => {
            let report = load_report(&input)?;
            let r = render_table(&report, layout)?;
            let name = match layout {
                Layout::Table1 => "table1",
                Layout::Fig3 => "fig3",
                Layout::Fig2 => "fig2",
            };
            let path = input.join(format!("{name}.csv"));
            std::fs::write(&path, &r.csv).map_err(|e| Error::Io { path, source: e })?;
            print!("{}", r.text);
            Ok(())
        }
        Command::Probe { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = probe(&cfg)?;
            let dir = cfg.output_dir.join("probe");
            write_report(&dir, &report)?;
            print!("{}", render_table(&report, Layout::Fig3)?.text);
            println!("results in {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
