use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use atca::config::RunConfig;
use atca::error::{Error, Result};
use atca::pipeline::{self, SplitSel, TrainData};
use atca::{checkpoint, corpus, embeddings, ensemble_file, fsutil, tsv};
use atca_core::atca::count_params;
use atca_core::metrics::compute_eer;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atca", version = atca::version_string(), about = "Audio-text cross-attention deepfake detector pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthetic corpus generation.
    Corpus {
        #[command(subcommand)]
        cmd: CorpusCmd,
    },
    /// Write log-mel (and optional raw-patch) feature files for every clip.
    Featurize {
        /// Corpus directory.
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory [default: CORPUS/features].
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Toy text embeddings from the corpus captions, or `embed import`.
    #[command(args_conflicts_with_subcommands = true)]
    Embed {
        #[command(subcommand)]
        cmd: Option<EmbedCmd>,
        #[command(flatten)]
        args: EmbedArgs,
    },
    /// Train the detector on one track; writes checkpoint.atck and train_report.json.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Keep this fraction of the train split (seeded).
        #[arg(long)]
        fraction: Option<f64>,
        /// Training seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum epochs (overrides the config).
        #[arg(long)]
        epochs: Option<usize>,
        /// Record wall-clock seconds in the report (makes it non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Output directory [default: CORPUS/run_trackN].
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score one protocol split with a checkpoint.
    Score {
        /// Checkpoint file.
        #[arg(long)]
        ckpt: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// train, dev, eval or all.
        #[arg(long, default_value = "eval")]
        split: String,
        /// Replace the text input by a single zero row.
        #[arg(long)]
        ablate_text: bool,
        /// Score TSV [default: standard output].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
    /// Equal error rate of a score file against a protocol.
    Eer {
        /// Score TSV (utt_id, score).
        #[arg(long)]
        scores: PathBuf,
        /// Protocol TSV.
        #[arg(long)]
        protocol: PathBuf,
        /// Restrict to one split (train, dev, eval or all).
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Stacked regression ensemble over base-system scores.
    Ensemble {
        #[command(subcommand)]
        cmd: EnsembleCmd,
    },
    /// Learnable parameter count of a checkpoint.
    Params {
        /// Checkpoint file.
        #[arg(long)]
        ckpt: PathBuf,
    },
    /// Ridge baseline on pooled log-mel statistics: fit on train, score a split.
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        /// train, dev, eval or all.
        #[arg(long, default_value = "eval")]
        split: String,
        /// Score TSV [default: standard output].
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Render the synthetic corpus tree.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Corpus seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of clips (overrides the config).
        #[arg(long)]
        n_clips: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Validate an external embedding payload + index and store it.
    Import {
        /// Feature File holding all embedding rows.
        #[arg(long)]
        payload: PathBuf,
        /// JSONL index (utt_id, offset, L, Dt, spans).
        #[arg(long)]
        index: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct EmbedArgs {
    /// Corpus directory.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory [default: CORPUS/embeddings].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Embedding width (overrides the config).
    #[arg(long)]
    dim: Option<usize>,
    /// Hash seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum EnsembleCmd {
    /// Fit the stacked ensemble on one split of the protocol.
    Fit {
        #[command(flatten)]
        inputs: EnsembleInputs,
        /// Split used for fitting.
        #[arg(long, default_value = "dev")]
        split: String,
        /// Fold and forest seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score one split with a fitted ensemble.
    Score {
        /// Model file written by `ensemble fit`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        inputs: EnsembleInputs,
        #[arg(long, default_value = "eval")]
        split: String,
        /// Score TSV [default: standard output].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite existing outputs.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct EnsembleInputs {
    /// Comma-separated base-system score files, in a fixed order.
    #[arg(long, value_delimiter = ',', required = true)]
    scores: Vec<PathBuf>,
    /// Embedding directory.
    #[arg(long)]
    embeddings: PathBuf,
    /// Protocol TSV.
    #[arg(long)]
    protocol: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Corpus directory.
    #[arg(long)]
    corpus: PathBuf,
    /// Protocol track (1 or 2).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    track: u8,
    /// Feature directory [default: CORPUS/features].
    #[arg(long)]
    features: Option<PathBuf>,
    /// Embedding directory [default: CORPUS/embeddings].
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl DataArgs {
    fn features_dir(&self) -> PathBuf {
        self.features
            .clone()
            .unwrap_or_else(|| self.corpus.join("features"))
    }

    fn embeddings_dir(&self) -> PathBuf {
        self.embeddings
            .clone()
            .unwrap_or_else(|| self.corpus.join("embeddings"))
    }

    fn load(&self, sel: SplitSel, with_raw: bool) -> Result<TrainData> {
        let protocol = pipeline::select(&corpus::load_track(&self.corpus, self.track)?, sel);
        TrainData::load(
            protocol,
            &self.features_dir(),
            &self.embeddings_dir(),
            with_raw,
        )
    }
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        RunConfig::load_or_default(self.config.as_deref())
    }
}

fn parse_split(s: &str) -> Result<SplitSel> {
    SplitSel::parse(s).ok_or_else(|| {
        Error::Usage(format!(
            "unknown split {s:?} (expected train, dev, eval or all)"
        ))
    })
}

fn emit_scores(
    out: Option<&Path>,
    trials: &[atca_core::metrics::Trial],
    force: bool,
) -> Result<()> {
    match out {
        Some(p) => pipeline::write_trials(p, trials, force),
        None => {
            print!("{}", tsv::encode_trials(trials));
            Ok(())
        }
    }
}

fn load_score_sets(paths: &[PathBuf]) -> Result<Vec<Vec<(String, f64)>>> {
    paths.iter().map(|p| tsv::load_scores(p)).collect()
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Corpus {
            cmd:
                CorpusCmd::Synth {
                    out,
                    seed,
                    n_clips,
                    common,
                },
        } => {
            let mut cfg = common.config()?.corpus;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n_clips {
                cfg.n_clips = n;
            }
            let plan = corpus::write_corpus(&out, &cfg, common.force)?;
            log::info!(
                "wrote {} clips to {}",
                plan.manifest.clips.len(),
                out.display()
            );
        }
        Cmd::Featurize {
            corpus,
            out,
            common,
        } => {
            let cfg = common.config()?.features;
            let out = out.unwrap_or_else(|| corpus.join("features"));
            let n = pipeline::featurize(&corpus, &out, &cfg, common.force)?;
            log::info!("featurized {n} clips into {}", out.display());
        }
        Cmd::Embed {
            cmd:
                Some(EmbedCmd::Import {
                    payload,
                    index,
                    out,
                    force,
                }),
            ..
        } => {
            let n = pipeline::embed_import(&payload, &index, &out, force)?;
            log::info!("imported {n} embeddings into {}", out.display());
        }
        Cmd::Embed { cmd: None, args } => {
            let corpus = args
                .corpus
                .ok_or_else(|| Error::Usage("embed requires --corpus".into()))?;
            let mut cfg = args.common.config()?.embedder;
            if let Some(d) = args.dim {
                cfg.dim = d;
            }
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            let out = args.out.unwrap_or_else(|| corpus.join("embeddings"));
            let n = pipeline::embed(&corpus, &out, &cfg, args.common.force)?;
            log::info!("embedded {n} caption sets into {}", out.display());
        }
        Cmd::Train {
            data,
            fraction,
            seed,
            epochs,
            timing,
            out,
            common,
        } => {
            let mut cfg = common.config()?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let out = out.unwrap_or_else(|| data.corpus.join(format!("run_track{}", data.track)));
            let ckpt = out.join("checkpoint.atck");
            let report_path = out.join("train_report.json");
            fsutil::claim(&ckpt, common.force)?;
            fsutil::claim(&report_path, common.force)?;
            let mut protocol = corpus::load_track(&data.corpus, data.track)?;
            if let Some(f) = fraction {
                protocol = pipeline::subset_train(&protocol, f, cfg.train.seed)?;
            }
            let td = TrainData::load(
                protocol,
                &data.features_dir(),
                &data.embeddings_dir(),
                cfg.model.use_raw_branch,
            )?;
            let start = Instant::now();
            let (params, mut report) = pipeline::train_model(&td, &cfg)?;
            if timing {
                report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
            }
            fsutil::create_dir(&out)?;
            checkpoint::save_checkpoint(&ckpt, &params)?;
            fsutil::write_json(&report_path, &report)?;
            let best = &report.epochs[report.best_epoch];
            log::info!(
                "best epoch {} dev EER {:.2}%",
                best.epoch,
                100.0 * best.val_eer
            );
        }
        Cmd::Score {
            ckpt,
            data,
            split,
            ablate_text,
            out,
            force,
        } => {
            let sel = parse_split(&split)?;
            if let Some(p) = &out {
                fsutil::claim(p, force)?;
            }
            let params = checkpoint::load_checkpoint(&ckpt)?;
            let td = data.load(sel, params.config.use_raw_branch)?;
            let trials = pipeline::score_model(&params, &td, sel, ablate_text)?;
            emit_scores(out.as_deref(), &trials, force)?;
        }
        Cmd::Eer {
            scores,
            protocol,
            split,
        } => {
            let sel = parse_split(&split)?;
            let r = pipeline::eer_for(
                &tsv::load_scores(&scores)?,
                &tsv::load_protocol(&protocol)?,
                sel.as_split(),
            )?;
            println!("EER (%): {:.2}", 100.0 * r.eer);
            println!(
                "{}",
                serde_json::to_string(&r).expect("EER result serializes")
            );
        }
        Cmd::Ensemble {
            cmd:
                EnsembleCmd::Fit {
                    inputs,
                    split,
                    seed,
                    out,
                    common,
                },
        } => {
            let sel = parse_split(&split)?;
            let mut cfg = common.config()?.ensemble;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            fsutil::claim(&out, common.force)?;
            let fit = pipeline::fit_ensemble(
                &load_score_sets(&inputs.scores)?,
                &embeddings::load_map(&inputs.embeddings)?,
                &tsv::load_protocol(&inputs.protocol)?,
                sel,
                &cfg,
            )?;
            ensemble_file::save_ensemble(&out, &fit.model)?;
            log::info!(
                "combine weights {:?}, out-of-fold MSE {:.6}",
                fit.model.combine_weights,
                fit.oof_mse
            );
        }
        Cmd::Ensemble {
            cmd:
                EnsembleCmd::Score {
                    model,
                    inputs,
                    split,
                    out,
                    force,
                },
        } => {
            let sel = parse_split(&split)?;
            if let Some(p) = &out {
                fsutil::claim(p, force)?;
            }
            let m = ensemble_file::load_ensemble(&model)?;
            let trials = pipeline::score_ensemble(
                &m,
                &load_score_sets(&inputs.scores)?,
                &embeddings::load_map(&inputs.embeddings)?,
                &tsv::load_protocol(&inputs.protocol)?,
                sel,
            )?;
            emit_scores(out.as_deref(), &trials, force)?;
        }
        Cmd::Params { ckpt } => {
            println!("{}", count_params(&checkpoint::load_checkpoint(&ckpt)?));
        }
        Cmd::Baseline {
            data,
            split,
            out,
            common,
        } => {
            let sel = parse_split(&split)?;
            if let Some(p) = &out {
                fsutil::claim(p, common.force)?;
            }
            let cfg = common.config()?;
            let all = corpus::load_track(&data.corpus, data.track)?;
            let needed: Vec<_> = all
                .iter()
                .filter(|e| e.split == atca_core::protocol::Split::Train || sel.keep(e))
                .cloned()
                .collect();
            let td = TrainData::load(needed, &data.features_dir(), &data.embeddings_dir(), false)?;
            let model = pipeline::fit_baseline(&td, cfg.baseline_lambda)?;
            let trials = pipeline::score_baseline(&model, &td, sel)?;
            if let Ok(r) = compute_eer(&trials) {
                log::info!("baseline EER {:.2}%", 100.0 * r.eer);
            }
            emit_scores(out.as_deref(), &trials, common.force)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("ERROR USAGE: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
