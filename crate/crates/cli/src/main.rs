//! `polycl`: contrastive pretraining, sweeps, and evaluation from the shell.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or
//! checkpoint error, 4 numeric failure. `POLYCL_LOG` sets log verbosity.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polycl_core::commands::{
    cmd_augment, cmd_embed, cmd_eval_repr, cmd_pretrain, cmd_sweep, cmd_transfer, load_vocab, CommandError, Result,
};
use polycl_core::config::RunConfig;

#[derive(Parser)]
#[command(name = "polycl", version, about = "Contrastive pretraining for polymer-SMILES encoders")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides paths.out_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides sweep.workers.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain one encoder with the configured augmentation.
    Pretrain,
    /// Pretrain one encoder per augmentation spec and compare transfer R².
    Sweep,
    /// Export pooled representations of a corpus.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to paths.corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Defaults to <out-dir>/embeddings.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Alignment and uniformity for each checkpoint.
    EvalRepr {
        #[arg(long, required = true, num_args = 1..)]
        checkpoint: Vec<PathBuf>,
        /// Defaults to paths.eval_corpus, then paths.corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Defaults to <out-dir>/eval_repr.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-validated regression on frozen features.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV with header "smiles,value".
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to <out-dir>/transfer.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dump augmented positive pairs for inspection.
    Augment {
        /// Defaults to paths.corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Pairs per polymer; defaults to augment.views.
        #[arg(long)]
        views: Option<usize>,
        /// Defaults to <out-dir>/views.csv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.paths.out_dir = Some(dir.clone());
    }
    if let Some(w) = cli.workers {
        cfg.sweep.workers = w;
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> Option<PathBuf> {
    cli.out_dir.clone().or_else(|| cfg.and_then(|c| c.paths.out_dir.clone()))
}

fn output(explicit: &Option<PathBuf>, cli: &Cli, cfg: Option<&RunConfig>, name: &str) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    let dir = out_dir(cli, cfg).ok_or_else(|| CommandError::usage("--output or an output directory is required"))?;
    std::fs::create_dir_all(&dir).map_err(|e| CommandError::data(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn input(explicit: &Option<PathBuf>, fallback: Option<&Path>, flag: &str) -> Result<PathBuf> {
    explicit
        .clone()
        .or_else(|| fallback.map(Path::to_path_buf))
        .ok_or_else(|| CommandError::usage(format!("{flag} is required")))
}

fn seed(cli: &Cli, cfg: Option<&RunConfig>) -> Result<u64> {
    cli.seed.or(cfg.map(|c| c.seed)).ok_or_else(|| CommandError::usage("--seed or a configuration seed is required"))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let cfg = cfg.as_ref();
    let vocab_path = cfg.and_then(|c| c.paths.vocab.as_deref());
    let corpus_path = cfg.and_then(|c| c.paths.corpus.as_deref());
    match &cli.command {
        Command::Pretrain | Command::Sweep => {
            let cfg = cfg.ok_or_else(|| CommandError::usage("--config is required"))?;
            let dir = out_dir(cli, Some(cfg)).ok_or_else(|| CommandError::usage("--out-dir or paths.out_dir is required"))?;
            if matches!(cli.command, Command::Pretrain) {
                let out = cmd_pretrain(cfg, &dir)?;
                if let Some((first, last)) = out.log.initial_final_loss(10) {
                    println!("loss {first:.6} -> {last:.6}; checkpoints in {}", dir.display());
                }
            } else {
                let rows = cmd_sweep(cfg, &dir)?;
                println!("{} cells; table in {}", rows.len(), dir.join("grid.csv").display());
            }
        }
        Command::Embed { checkpoint, corpus, output: o } => {
            let corpus = input(corpus, corpus_path, "--corpus")?;
            cmd_embed(checkpoint, &corpus, &load_vocab(vocab_path)?, &output(o, cli, cfg, "embeddings.csv")?)?;
        }
        Command::EvalRepr { checkpoint, corpus, output: o } => {
            let fallback = cfg.and_then(|c| c.paths.eval_corpus.as_deref()).or(corpus_path);
            let corpus = input(corpus, fallback, "--corpus")?;
            let out = output(o, cli, cfg, "eval_repr.csv")?;
            cmd_eval_repr(checkpoint, &corpus, seed(cli, cfg)?, &load_vocab(vocab_path)?, &out)?;
        }
        Command::Transfer { checkpoint, dataset, output: o } => {
            let head = cfg.map(|c| c.transfer.clone()).unwrap_or_default();
            let out = output(o, cli, cfg, "transfer.csv")?;
            let r = cmd_transfer(checkpoint, dataset, &head, seed(cli, cfg)?, &load_vocab(vocab_path)?, &out)?;
            println!("mean r2 {:.6}, mean rmse {:.6}", r.mean_r2, r.mean_rmse);
        }
        Command::Augment { corpus, views, output: o } => {
            let corpus = input(corpus, corpus_path, "--corpus")?;
            let spec = cfg.map(|c| c.augmentation).unwrap_or_default();
            let views = views.or(cfg.map(|c| c.augment.views)).unwrap_or(4);
            if views == 0 {
                return Err(CommandError::usage("--views must be at least 1"));
            }
            cmd_augment(&corpus, &spec, views, seed(cli, cfg)?, &output(o, cli, cfg, "views.csv")?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLYCL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
