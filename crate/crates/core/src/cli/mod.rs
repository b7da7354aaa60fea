//! Command-line pipeline: ingest, train embeddings, train the scorer,
//! evaluate, visualise, search and generate synthetic corpora.
//!
//! Settings come from defaults, then a `key = value` file (`--config` or the
//! `ATS_CONFIG` variable), then `--key value` flags.

pub mod commands;
pub mod config;
pub mod search;
pub mod synth;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

pub use commands::{
    cmd_evaluate, cmd_ingest, cmd_search, cmd_synth, cmd_train_embeddings, cmd_train_scorer,
    cmd_visualize, evaluate_config, evaluate_split, load_corpus, model_label, Corpus,
    EmbeddingSource, IngestSummary, SearchOutcome, VisualMode, VisualizeSummary, SPLITS,
};
pub use config::{Config, CONFIG_ENV};
pub use search::{SearchSpace, TrialParams, TrialResult};

use crate::error::{Error, Result};

fn command() -> Command {
    let mut cmd = Command::new("ats")
        .about("Essay scoring with score-specific embeddings and peephole LSTMs")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .help(format!("Config file (default: ${CONFIG_ENV})")),
        );
    for (key, help) in Config::KEYS {
        let mut arg = Arg::new(*key)
            .long(*key)
            .global(true)
            .value_name("VALUE")
            .help(help.trim())
            .help_heading("Config keys");
        if key.contains('_') {
            arg = arg.alias(key.replace('_', "-"));
        }
        cmd = cmd.arg(arg);
    }
    let model = || {
        Arg::new("model")
            .long("model")
            .value_name("PATH")
            .help("Scorer file (default: <models_dir>/scorer.sats)")
    };
    cmd.subcommand(Command::new("ingest").about("Tokenise the data file and write split manifests"))
        .subcommand(Command::new("train-embeddings").about("Train score-specific word embeddings"))
        .subcommand(Command::new("train-scorer").about("Train the LSTM scorer"))
        .subcommand(
            Command::new("evaluate")
                .about("Write metric reports for one or all splits")
                .arg(model())
                .arg(
                    Arg::new("split")
                        .long("split")
                        .value_parser(["train", "validation", "test", "all"])
                        .default_value("all"),
                ),
        )
        .subcommand(
            Command::new("visualize")
                .about("Render token quality maps as HTML and ANSI text")
                .arg(model())
                .arg(
                    Arg::new("ids")
                        .long("ids")
                        .value_name("ID,...")
                        .value_delimiter(',')
                        .value_parser(clap::value_parser!(u64))
                        .help("Essay ids (default: the test split)"),
                )
                .arg(
                    Arg::new("mode")
                        .long("mode")
                        .value_parser(["essay", "span"])
                        .default_value("essay"),
                )
                .arg(
                    Arg::new("span_len")
                        .long("span_len")
                        .alias("span-len")
                        .value_parser(clap::value_parser!(usize))
                        .default_value("10"),
                )
                .arg(
                    Arg::new("monochrome")
                        .long("monochrome")
                        .action(ArgAction::SetTrue)
                        .help("Plain text with [bin] suffixes"),
                ),
        )
        .subcommand(Command::new("search").about("Seeded random hyperparameter search"))
        .subcommand(
            Command::new("synth")
                .about("Write a synthetic corpus")
                .arg(
                    Arg::new("profile")
                        .long("profile")
                        .required(true)
                        .value_parser(["overfit16", "misspell", "ablation"]),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("PATH")
                        .help("Output TSV (default: stdout)"),
                ),
        )
}

/// Defaults, then the config file, then flags.
fn resolve_config(m: &ArgMatches) -> Result<Config> {
    let path = m
        .get_one::<String>("config")
        .cloned()
        .or_else(|| std::env::var(CONFIG_ENV).ok().filter(|v| !v.is_empty()));
    let mut cfg = match path {
        Some(p) => Config::from_file(&PathBuf::from(p))?,
        None => Config::default(),
    };
    for (key, _) in Config::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_path(cfg: &Config, m: &ArgMatches) -> PathBuf {
    m.get_one::<String>("model")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.model_path())
}

/// Runs one parsed invocation, writing human-readable output to `out`.
pub fn run(matches: &ArgMatches, out: &mut dyn Write) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = resolve_config(sub)?;
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    match name {
        "ingest" => {
            let s = cmd_ingest(&cfg)?;
            for e in &s.row_errors {
                eprintln!("skipped {e}");
            }
            writeln!(
                out,
                "{} essays: train {}, validation {}, test {}{}",
                s.essays,
                s.sizes[0],
                s.sizes[1],
                s.sizes[2],
                if s.reused_manifests { " (existing manifests)" } else { "" }
            )
            .map_err(io)?;
        }
        "train-embeddings" => {
            let h = cmd_train_embeddings(&cfg)?;
            if let (Some(a), Some(b)) = (h.first(), h.last()) {
                writeln!(out, "embedding loss {:.6} -> {:.6} over {} epochs", a.overall, b.overall, h.len())
                    .map_err(io)?;
            }
            writeln!(out, "wrote {}", cfg.default_embeddings_path().display()).map_err(io)?;
        }
        "train-scorer" => {
            let o = cmd_train_scorer(&cfg)?;
            let best = &o.history[o.best_epoch.min(o.history.len() - 1)];
            writeln!(
                out,
                "kept epoch {} (train mse {:.6}, validation rmse {})",
                o.best_epoch,
                best.train_mse,
                best.val_rmse.map_or("n/a".into(), |v| format!("{v:.4}"))
            )
            .map_err(io)?;
            writeln!(out, "wrote {}", cfg.model_path().display()).map_err(io)?;
        }
        "evaluate" => {
            let split = sub.get_one::<String>("split").expect("default");
            let splits: Vec<&str> = if split == "all" {
                SPLITS.to_vec()
            } else {
                vec![split.as_str()]
            };
            for (s, rep) in cmd_evaluate(&cfg, &model_path(&cfg, sub), &splits)? {
                writeln!(out, "[{s}]\n{rep}").map_err(io)?;
            }
        }
        "visualize" => {
            let ids: Vec<u64> = sub
                .get_many::<u64>("ids")
                .map(|v| v.copied().collect())
                .unwrap_or_default();
            let mode = match sub.get_one::<String>("mode").map(String::as_str) {
                Some("span") => VisualMode::Span(*sub.get_one::<usize>("span_len").expect("default")),
                _ => VisualMode::Essay,
            };
            let mono = sub.get_flag("monochrome");
            let s = cmd_visualize(&cfg, &model_path(&cfg, sub), &ids, mode, mono)?;
            for line in &s.ansi {
                writeln!(out, "{line}\n").map_err(io)?;
            }
            writeln!(out, "wrote {} heatmaps, index {}", s.html.len(), s.index.display())
                .map_err(io)?;
        }
        "search" => {
            let s = cmd_search(&cfg)?;
            for t in &s.trials {
                writeln!(out, "{}", t.csv_row()).map_err(io)?;
            }
            match s.best {
                Some(b) => writeln!(out, "best trial {}", b.trial).map_err(io)?,
                None => writeln!(out, "every trial diverged").map_err(io)?,
            }
        }
        "synth" => {
            let profile = sub.get_one::<String>("profile").expect("required").parse()?;
            let dest = sub.get_one::<String>("out").map(PathBuf::from);
            let tsv = cmd_synth(profile, cfg.seed, dest.as_deref())?;
            if dest.is_none() {
                out.write_all(tsv.as_bytes()).map_err(io)?;
            }
        }
        other => unreachable!("unhandled subcommand {other}"),
    }
    Ok(())
}

/// Entry point: parses `args`, runs, and returns the process exit code
/// (0 success, 1 usage or config error, 2 data error, 3 numerical failure).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&matches, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
