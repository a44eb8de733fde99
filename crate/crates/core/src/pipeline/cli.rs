//! Command-line front end for the pipeline stages.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gru::JoinMode;
use crate::secondary::ClassifierKind;
use crate::text_prep::{format_histogram, DEFAULT_MAX_LEN};

use super::config::PipelineConfig;
use super::stages;

#[derive(Debug, Parser)]
#[command(
    name = "quesim",
    version,
    about = "Duplicate-question detection with a Siamese GRU and secondary classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the embedding store for a corpus and cache its token ids.
    Preprocess {
        /// Pair CSV; repeat for several files (training files are read first).
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// GloVe text file.
        #[arg(long)]
        glove: PathBuf,
        /// Vector width of the GloVe file.
        #[arg(long, default_value_t = 50)]
        dim: usize,
        /// Padded sentence length recorded with the store.
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the question-length histogram of a token cache.
    Stats {
        /// Directory holding `.ids` files written by `preprocess`.
        #[arg(long)]
        tokens: PathBuf,
    },
    /// Add flipped pairs, self pairs and balancing negatives.
    Augment {
        /// Labeled training CSV.
        #[arg(long)]
        input: PathBuf,
        /// Seed for negative sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (training layout plus a provenance column).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Siamese GRU and save a checkpoint.
    TrainGru(TrainGruArgs),
    /// Compute the GRU score and engineered features for every pair.
    Featurize {
        /// Pairs to featurize (training or test layout).
        #[arg(long)]
        data: PathBuf,
        /// GRU checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// Original labeled training pairs (duplicate graph and IDF source).
        #[arg(long)]
        train_data: PathBuf,
        /// Stopword file, one word per line; defaults to the built-in list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Output features CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a secondary classifier on labeled feature rows.
    TrainSecondary {
        /// Labeled features CSV.
        #[arg(long)]
        features: PathBuf,
        /// Classifier kind: rf, ada or svm.
        #[arg(long)]
        kind: Option<ClassifierKind>,
        /// Config file whose [secondary] section supplies hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed of the train/dev split.
        #[arg(long)]
        seed: Option<u64>,
        /// Share of rows held out for the dev report.
        #[arg(long)]
        dev_fraction: Option<f64>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print log loss and accuracy of a secondary model.
    Evaluate {
        /// Features CSV; must be labeled unless --labels is given.
        #[arg(long)]
        features: PathBuf,
        /// Secondary model file.
        #[arg(long)]
        model: PathBuf,
        /// `test_id,is_duplicate` file with the true labels.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write a `test_id,is_duplicate` submission.
    Predict {
        /// Features CSV of the test pairs.
        #[arg(long)]
        features: PathBuf,
        /// Secondary model file.
        #[arg(long)]
        model: PathBuf,
        /// Test CSV, used to check the row count.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Output submission CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage, skipping those whose outputs are current.
    RunAll {
        /// Pipeline config file.
        #[arg(long)]
        config: PathBuf,
        /// Override the work directory.
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainGruArgs {
    /// Labeled (possibly augmented) training CSV.
    #[arg(long)]
    data: PathBuf,
    /// GloVe text file; the vocabulary is taken from --data.
    #[arg(long, conflicts_with = "embeddings", required_unless_present = "embeddings")]
    glove: Option<PathBuf>,
    /// Embedding store written by `preprocess`, instead of --glove.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Config file supplying [embedding], [model] and [train].
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for initialisation, dev split, shuffling and dropout.
    #[arg(long)]
    seed: Option<u64>,
    /// Vector width of the GloVe file.
    #[arg(long)]
    dim: Option<usize>,
    /// Per-direction GRU sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Hidden dense sizes of the head, comma separated.
    #[arg(long, value_delimiter = ',')]
    head: Option<Vec<usize>>,
    /// Join of the sentence vectors: full or concat.
    #[arg(long)]
    join: Option<JoinMode>,
    /// Padded sentence length.
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Dropout keep probability on the first head layer.
    #[arg(long)]
    keep_prob: Option<f64>,
    /// Keep the embedding matrix fixed during training.
    #[arg(long)]
    freeze_embeddings: bool,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn train_gru(a: TrainGruArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_ref())?;
    if let Some(v) = a.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = a.dim {
        cfg.embedding.dim = v;
    }
    if let Some(v) = a.hidden {
        cfg.model.hidden = v;
    }
    if let Some(v) = a.head {
        cfg.model.head = v;
    }
    if let Some(v) = a.join {
        cfg.model.join = v;
    }
    if let Some(v) = a.max_len {
        cfg.model.max_len = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.train.lr = v;
    }
    if let Some(v) = a.keep_prob {
        cfg.train.keep_prob = v;
    }
    cfg.model.freeze_embeddings |= a.freeze_embeddings;
    cfg.validate()?;

    let store = match (&a.glove, &a.embeddings) {
        (_, Some(e)) => stages::load_store(e)?,
        (Some(g), None) => stages::store_from_glove(&a.data, g, cfg.embedding.dim)?,
        (None, None) => return Err(Error::Config("one of --glove or --embeddings is required".into())),
    };
    let outcome = stages::train_gru_file(&a.data, store, &cfg.model, &cfg.train, &a.out)?;
    println!("epoch\ttrain_loss\tdev_loss");
    for h in &outcome.history {
        let dev = h.dev_loss.map(|d| format!("{d:.6}")).unwrap_or_else(|| "-".into());
        println!("{}\t{:.6}\t{}", h.epoch, h.train_loss, dev);
    }
    println!("best epoch {}; saved {}", outcome.best_epoch, a.out.display());
    if let Some(path) = &a.history {
        stages::write_history(path, &outcome.history)?;
    }
    Ok(())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Preprocess {
            input,
            glove,
            dim,
            max_len,
            out,
        } => {
            let s = stages::preprocess(&input, &glove, dim, max_len, &out)?;
            println!(
                "vocabulary {} ({} corpus words); wrote {} and {} token files",
                s.n_words,
                s.corpus_words,
                s.embeddings.display(),
                s.token_files.len()
            );
        }
        Command::Stats { tokens } => {
            print!("{}", format_histogram(&stages::token_stats(&tokens)?));
        }
        Command::Augment { input, seed, out } => {
            let r = stages::augment_file(&input, seed, &out)?;
            println!(
                "original {}; flipped {}; self pairs {}; sampled negatives {}",
                r.original, r.flipped, r.self_pairs, r.sampled_negatives
            );
            println!(
                "positives {} -> {}; negatives {} -> {}; ratio {:.3}",
                r.positives_before_balancing,
                r.positives,
                r.negatives_before_balancing,
                r.negatives,
                r.ratio()
            );
        }
        Command::TrainGru(a) => train_gru(a)?,
        Command::Featurize {
            data,
            model,
            train_data,
            stopwords,
            out,
        } => {
            let model = stages::load_model(&model)?;
            let rows = stages::featurize_file(&data, &model, &train_data, stopwords.as_deref())?;
            stages::write_features(&out, &rows)?;
            println!("wrote {} feature rows to {}", rows.len(), out.display());
        }
        Command::TrainSecondary {
            features,
            kind,
            config,
            seed,
            dev_fraction,
            out,
        } => {
            let mut s = load_config(config.as_ref())?.secondary;
            if let Some(k) = kind {
                s.kind = k;
            }
            if let Some(v) = seed {
                s.split_seed = v;
            }
            if let Some(v) = dev_fraction {
                s.dev_fraction = v;
            }
            let rows = stages::read_features(&features)?;
            let outcome = stages::train_secondary(&rows, s.kind, &s.params(), s.split_seed, s.dev_fraction)?;
            stages::save_secondary(&outcome.model, &out)?;
            println!(
                "{} trained on {} rows; saved {}",
                s.kind,
                outcome.n_train,
                out.display()
            );
            if let Some(dev) = outcome.dev {
                println!(
                    "dev log_loss {:.6} accuracy {:.4} (n = {})",
                    dev.log_loss, dev.accuracy, dev.n
                );
            }
        }
        Command::Evaluate {
            features,
            model,
            labels,
        } => {
            let mut rows = stages::read_features(&features)?;
            if let Some(l) = &labels {
                stages::attach_labels(&mut rows, l)?;
            }
            let model = stages::load_secondary(&model)?;
            let e = stages::evaluate_rows(&model, &rows)?;
            println!("log_loss {:.16e}", e.log_loss);
            println!("accuracy {:.6}", e.accuracy);
            println!("n {}", e.n);
        }
        Command::Predict {
            features,
            model,
            test,
            out,
        } => {
            let n = stages::predict_file(&features, &model, test.as_deref(), &out)?;
            println!("wrote {n} predictions to {}", out.display());
        }
        Command::RunAll { config, work_dir } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(w) = work_dir {
                cfg.paths.work_dir = w;
            }
            let manifest = stages::run_all(&cfg)?;
            for r in &manifest.records {
                let status = if r.skipped { "skipped" } else { "ran" };
                println!("{:<16} {:<8} {} ms", r.stage, status, r.wall_ms);
            }
            println!(
                "submission: {}",
                cfg.paths.work_dir.join(stages::files::SUBMISSION).display()
            );
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code:
/// 0 on success, 1 on usage errors and 2 on data or numeric errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
