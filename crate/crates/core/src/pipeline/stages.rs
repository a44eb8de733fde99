//! The pipeline stages as file-to-file functions, shared by the CLI
//! subcommands and [`run_all`].

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{augment_all, AugmentReport};
use crate::dataset::{read_pairs, write_pairs, FileKind, PairFile, QuestionIndex, QuestionPair};
use crate::embedding::{load_glove, EmbeddingStore};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureContext, FeatureRow, Stopwords};
use crate::gru::{train, EncodedPair, EpochStats, ModelConfig, SiameseModel, TrainConfig, TrainOutcome};
use crate::secondary::{accuracy, log_loss, ClassifierKind, ClassifierParams, SecondaryModel};
use crate::text_prep::{encode, length_histogram, merge_histograms, tokenize, LengthHistogram};

use super::config::PipelineConfig;
use super::container::{
    embeddings_from_container, embeddings_to_container, model_from_container, model_to_container,
    secondary_from_container, secondary_to_container, Container,
};
use super::manifest::{digest_bytes, digest_file, FileDigest, ManifestLog, RunManifest, StageRecord};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Distinct tokens over both questions of every pair.
pub fn corpus_vocabulary<'a>(pairs: impl IntoIterator<Item = &'a QuestionPair>) -> HashSet<String> {
    let mut words = HashSet::new();
    for p in pairs {
        words.extend(tokenize(&p.q1).into_inner());
        words.extend(tokenize(&p.q2).into_inner());
    }
    words
}

/// Reads the given CSVs in order, training files first so test questions
/// resolve to training qids where the text matches.
fn read_all(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, PairFile)>> {
    let mut index = QuestionIndex::default();
    let mut files = Vec::with_capacity(inputs.len());
    let mut deferred = Vec::new();
    for path in inputs {
        let file = read_pairs(path, &mut index)?;
        match file.kind {
            FileKind::Train => files.push((path.clone(), file)),
            FileKind::Test => deferred.push(path.clone()),
        }
    }
    for path in deferred {
        let file = read_pairs(&path, &mut index)?;
        files.push((path, file));
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub n_words: usize,
    pub corpus_words: usize,
    pub embeddings: PathBuf,
    pub token_files: Vec<PathBuf>,
}

/// Builds the embedding store for the corpus of `inputs` and caches every
/// question's unpadded token ids under `out_dir/tokens`.
///
/// Token files hold one line per question (question1 then question2 of
/// each pair) with the ids as space-separated decimals.
pub fn preprocess(
    inputs: &[PathBuf],
    glove: &Path,
    dim: usize,
    max_len: usize,
    out_dir: &Path,
) -> Result<PreprocessSummary> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be positive".into()));
    }
    let files = read_all(inputs)?;
    let words = corpus_vocabulary(files.iter().flat_map(|(_, f)| &f.pairs));
    let store = load_glove(glove, dim, &words)?;
    log::info!("{} of {} corpus words have vectors", store.n_words() - 2, words.len());

    let embeddings = out_dir.join("embeddings.qsim");
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    embeddings_to_container(&store, max_len)?.save(&embeddings)?;

    let mut token_files = Vec::new();
    for (path, file) in &files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
        let out = out_dir.join("tokens").join(format!("{stem}.ids"));
        let mut w = create(&out)?;
        for text in file.pairs.iter().flat_map(|p| [&p.q1, &p.q2]) {
            let ids: Vec<String> = store.vocab.ids_of(&tokenize(text)).iter().map(u32::to_string).collect();
            writeln!(w, "{}", ids.join(" ")).map_err(|e| Error::io(&out, e))?;
        }
        flush(w, &out)?;
        token_files.push(out);
    }
    Ok(PreprocessSummary {
        n_words: store.n_words(),
        corpus_words: words.len(),
        embeddings,
        token_files,
    })
}

/// Question-length histogram over every `*.ids` file in `tokens_dir`.
pub fn token_stats(tokens_dir: &Path) -> Result<LengthHistogram> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(tokens_dir)
        .map_err(|e| Error::io(tokens_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ids"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no .ids files in {}", tokens_dir.display())));
    }
    let mut parts = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut seqs: Vec<Vec<String>> = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let ids: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if let Some(bad) = ids.iter().find(|t| t.parse::<u32>().is_err()) {
                return Err(Error::MalformedLine {
                    path: path.clone(),
                    line: i + 1,
                    reason: format!("{bad:?} is not a token id"),
                });
            }
            seqs.push(ids);
        }
        parts.push(length_histogram(seqs.iter().map(|s| &s[..])));
    }
    Ok(merge_histograms(parts))
}

/// Reads labeled pairs, augments them and writes the result with a
/// `provenance` column.
pub fn augment_file(input: &Path, seed: u64, out: &Path) -> Result<AugmentReport> {
    let file = read_pairs(input, &mut QuestionIndex::default())?;
    if file.kind == FileKind::Test {
        return Err(Error::Data(format!(
            "{} is a test file; augmentation needs labeled pairs",
            input.display()
        )));
    }
    let data = augment_all(&file.pairs, seed)?;
    ensure_parent(out)?;
    write_pairs(out, &data.pairs, Some(&data.provenance))?;
    Ok(data.report)
}

/// Tokenizes and pads labeled pairs against the model's vocabulary.
pub fn encode_pairs(pairs: &[QuestionPair], store: &EmbeddingStore, max_len: usize) -> Result<Vec<EncodedPair>> {
    pairs
        .iter()
        .map(|p| {
            let label = p
                .label
                .ok_or_else(|| Error::Data(format!("pair {} has no label", p.id)))?;
            Ok(EncodedPair {
                ids1: encode(&tokenize(&p.q1), &store.vocab, max_len)?,
                ids2: encode(&tokenize(&p.q2), &store.vocab, max_len)?,
                label,
            })
        })
        .collect()
}

/// Embeddings for the vocabulary of `data`, read straight from GloVe.
pub fn store_from_glove(data: &Path, glove: &Path, dim: usize) -> Result<EmbeddingStore> {
    let file = read_pairs(data, &mut QuestionIndex::default())?;
    load_glove(glove, dim, &corpus_vocabulary(&file.pairs))
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    Ok(embeddings_from_container(&Container::load(path)?)?.0)
}

/// Trains the Siamese model on `data` and saves the best checkpoint.
/// The model is initialised from `train_cfg.seed`.
pub fn train_gru_file(
    data: &Path,
    store: EmbeddingStore,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    out: &Path,
) -> Result<TrainOutcome> {
    let file = read_pairs(data, &mut QuestionIndex::default())?;
    let encoded = encode_pairs(&file.pairs, &store, model_cfg.max_len)?;
    let model = SiameseModel::new(model_cfg.clone(), store, train_cfg.seed)?;
    log::info!(
        "training {} ({} parameters) on {} pairs",
        model_cfg.name(),
        model.n_parameters(),
        encoded.len()
    );
    let outcome = train(model, &encoded, train_cfg)?;
    ensure_parent(out)?;
    model_to_container(&outcome.model)?.save(out)?;
    Ok(outcome)
}

pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "epoch,train_loss,dev_loss").map_err(io)?;
    for h in history {
        let dev = h.dev_loss.map(|d| format!("{d:.16e}")).unwrap_or_default();
        writeln!(w, "{},{:.16e},{}", h.epoch, h.train_loss, dev).map_err(io)?;
    }
    flush(w, path)
}

pub fn load_model(path: &Path) -> Result<SiameseModel> {
    model_from_container(&Container::load(path)?)
}

/// Feature rows for `data`. The duplicate graph and IDF weights come from
/// the original labeled pairs in `train_data`.
pub fn featurize_file(
    data: &Path,
    model: &SiameseModel,
    train_data: &Path,
    stopwords: Option<&Path>,
) -> Result<Vec<FeatureRow>> {
    let mut index = QuestionIndex::default();
    let train_file = read_pairs(train_data, &mut index)?;
    let stop = match stopwords {
        Some(p) => Stopwords::load(p)?,
        None => Stopwords::default(),
    };
    let ctx = FeatureContext::from_training(&train_file.pairs, stop)?;
    let target = read_pairs(data, &mut index)?;
    featurize(&target.pairs, model, &ctx)
}

/// Floats are written with 17 significant digits so they reload exactly.
pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let labeled = rows.iter().all(|r| r.label.is_some()) && !rows.is_empty();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "id,gru_score,word_match,tfidf_match,common_dups").map_err(io)?;
    writeln!(w, "{}", if labeled { ",label" } else { "" }).map_err(io)?;
    for r in rows {
        write!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.id, r.gru_score, r.word_match, r.tfidf_match, r.common_dups
        )
        .map_err(io)?;
        match (labeled, r.label) {
            (true, Some(l)) => writeln!(w, ",{l}"),
            _ => writeln!(w),
        }
        .map_err(io)?;
    }
    flush(w, path)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = ["id", "gru_score", "word_match", "tfidf_match", "common_dups"];
    if header.len() < 5 || header[..5] != expected || (header.len() == 6 && header[5] != "label") || header.len() > 6 {
        return Err(Error::Data(format!(
            "{}: unexpected features header {header:?}",
            path.display()
        )));
    }
    let labeled = header.len() == 6;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 2,
            reason: format!("bad {what}"),
        };
        let float = |k: usize, what: &str| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(what))
        };
        rows.push(FeatureRow {
            id: rec[0].trim().parse().map_err(|_| bad("id"))?,
            gru_score: float(1, "gru_score")?,
            word_match: float(2, "word_match")?,
            tfidf_match: float(3, "tfidf_match")?,
            common_dups: rec[4].trim().parse().map_err(|_| bad("common_dups"))?,
            label: if labeled {
                match rec[5].trim() {
                    "0" => Some(0),
                    "1" => Some(1),
                    _ => return Err(bad("label")),
                }
            } else {
                None
            },
        });
    }
    Ok(rows)
}

fn matrix_of(rows: &[FeatureRow]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.features().to_vec()).collect()
}

fn labels_of(rows: &[FeatureRow]) -> Result<Vec<u8>> {
    rows.iter()
        .map(|r| {
            r.label
                .ok_or_else(|| Error::Data(format!("feature row {} has no label", r.id)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub n: usize,
    pub log_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryOutcome {
    pub model: SecondaryModel,
    pub n_train: usize,
    /// Metrics on the held-out part, when it is non-empty.
    pub dev: Option<Evaluation>,
}

/// Fits a classifier on a seeded `1 - dev_fraction` share of the rows and
/// scores the rest.
pub fn train_secondary(
    rows: &[FeatureRow],
    kind: ClassifierKind,
    params: &ClassifierParams,
    split_seed: u64,
    dev_fraction: f64,
) -> Result<SecondaryOutcome> {
    if !(0.0..1.0).contains(&dev_fraction) {
        return Err(Error::Config(format!("dev_fraction {dev_fraction} must be in [0, 1)")));
    }
    let labels = labels_of(rows)?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_dev = ((rows.len() as f64) * dev_fraction).floor() as usize;
    let (dev, fit) = order.split_at(n_dev);
    let pick = |idx: &[usize]| -> (Vec<FeatureRow>, Vec<u8>) {
        (
            idx.iter().map(|&i| rows[i]).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (fit_rows, fit_y) = pick(fit);
    let model = SecondaryModel::fit(kind, &matrix_of(&fit_rows), &fit_y, params)?;
    let dev = if dev.is_empty() {
        None
    } else {
        let (dev_rows, _) = pick(dev);
        Some(evaluate_rows(&model, &dev_rows)?)
    };
    Ok(SecondaryOutcome {
        model,
        n_train: fit.len(),
        dev,
    })
}

pub fn save_secondary(model: &SecondaryModel, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    secondary_to_container(model)?.save(path)
}

pub fn load_secondary(path: &Path) -> Result<SecondaryModel> {
    secondary_from_container(&Container::load(path)?)
}

pub fn predict_rows(model: &SecondaryModel, rows: &[FeatureRow]) -> Vec<f64> {
    rows.iter().map(|r| model.predict_proba(&r.features())).collect()
}

pub fn evaluate_rows(model: &SecondaryModel, rows: &[FeatureRow]) -> Result<Evaluation> {
    let labels = labels_of(rows)?;
    let probs = predict_rows(model, rows);
    Ok(Evaluation {
        n: rows.len(),
        log_loss: log_loss(&probs, &labels)?,
        accuracy: accuracy(&probs, &labels)?,
    })
}

/// Reads a `test_id,is_duplicate` labels file and attaches the labels to
/// feature rows by id.
pub fn attach_labels(rows: &mut [FeatureRow], labels: &Path) -> Result<()> {
    let table = read_submission(labels)?;
    let by_id: std::collections::HashMap<u64, f64> = table.into_iter().collect();
    for r in rows.iter_mut() {
        let v = by_id
            .get(&r.id)
            .ok_or_else(|| Error::Data(format!("{}: no label for id {}", labels.display(), r.id)))?;
        r.label = Some(match *v {
            0.0 => 0,
            1.0 => 1,
            other => return Err(Error::Data(format!("label {other} for id {} is not 0 or 1", r.id))),
        });
    }
    Ok(())
}

/// Writes `test_id,is_duplicate` rows, one per feature row, in order.
pub fn write_submission(path: &Path, rows: &[FeatureRow], probs: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "test_id,is_duplicate").map_err(io)?;
    for (r, p) in rows.iter().zip(probs) {
        writeln!(w, "{},{:.16e}", r.id, p).map_err(io)?;
    }
    flush(w, path)
}

/// Reads any two-column `id,value` CSV such as a submission or a labels file.
pub fn read_submission(path: &Path) -> Result<Vec<(u64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 2,
            reason: "expected an integer id and a number".into(),
        };
        if rec.len() != 2 {
            return Err(bad());
        }
        let id = rec[0].trim().parse().map_err(|_| bad())?;
        let v = rec[1].trim().parse().map_err(|_| bad())?;
        out.push((id, v));
    }
    Ok(out)
}

/// Scores feature rows and writes the submission. When `test` is given,
/// the row count must match its pair count.
pub fn predict_file(features: &Path, model: &Path, test: Option<&Path>, out: &Path) -> Result<usize> {
    let rows = read_features(features)?;
    if let Some(test) = test {
        let n = read_pairs(test, &mut QuestionIndex::default())?.pairs.len();
        if n != rows.len() {
            return Err(Error::Data(format!(
                "{} has {} feature rows but {} has {} pairs",
                features.display(),
                rows.len(),
                test.display(),
                n
            )));
        }
    }
    let model = load_secondary(model)?;
    let probs = predict_rows(&model, &rows);
    write_submission(out, &rows, &probs)?;
    Ok(rows.len())
}

/// File names inside the work directory.
pub mod files {
    pub const MANIFEST: &str = "manifest.jsonl";
    pub const EMBEDDINGS: &str = "embeddings.qsim";
    pub const AUGMENTED: &str = "augmented.csv";
    pub const GRU: &str = "gru.qsim";
    pub const HISTORY: &str = "gru_history.csv";
    pub const TRAIN_FEATURES: &str = "features_train.csv";
    pub const TEST_FEATURES: &str = "features_test.csv";
    pub const SECONDARY: &str = "secondary.qsim";
    pub const SUBMISSION: &str = "submission.csv";
}

pub const STAGES: [&str; 6] = [
    "preprocess",
    "augment",
    "train-gru",
    "featurize",
    "train-secondary",
    "predict",
];

struct Stage<'a> {
    name: &'static str,
    inputs: Vec<PathBuf>,
    params: String,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    run: Box<dyn FnOnce() -> Result<()> + 'a>,
}

enum Decision {
    Skip(Vec<FileDigest>),
    Run,
}

fn decide(log: &ManifestLog, stage: &Stage<'_>, inputs: &[FileDigest]) -> Result<Decision> {
    let Some(prev) = log.latest(stage.name) else {
        return Ok(Decision::Run);
    };
    let recorded_outputs: Vec<&PathBuf> = prev.outputs.iter().map(|d| &d.path).collect();
    let expected_outputs: Vec<&PathBuf> = stage.outputs.iter().collect();
    if prev.inputs != inputs || prev.params != stage.params || recorded_outputs != expected_outputs {
        return Ok(Decision::Run);
    }
    let mut current = Vec::with_capacity(prev.outputs.len());
    for out in &prev.outputs {
        if !out.path.exists() {
            log::info!("{}: {} is missing, rerunning", stage.name, out.path.display());
            return Ok(Decision::Run);
        }
        let now = digest_file(&out.path)?;
        if now.sha256 != out.sha256 {
            return Err(Error::StaleDigest {
                stage: stage.name.to_string(),
                path: out.path.clone(),
            });
        }
        current.push(now);
    }
    Ok(Decision::Skip(current))
}

fn params_digest<T: serde::Serialize>(value: &T) -> Result<String> {
    let text = serde_json::to_string(value)?;
    Ok(digest_bytes(text.as_bytes()))
}

/// Runs every stage in order inside `cfg.paths.work_dir`.
///
/// A stage is skipped when its last recorded run had the same input
/// digests and parameters and its outputs are still intact. Once a stage
/// runs, every later stage runs too. An output that exists but no longer
/// matches its recorded digest is reported as [`Error::StaleDigest`].
pub fn run_all(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let p = &cfg.paths;
    for (what, path) in [("train", &p.train), ("test", &p.test), ("glove", &p.glove)] {
        if !path.is_file() {
            return Err(Error::Config(format!("{what} file {} does not exist", path.display())));
        }
    }
    if let Some(s) = &p.stopwords {
        if !s.is_file() {
            return Err(Error::Config(format!("stopwords file {} does not exist", s.display())));
        }
    }
    let work = &p.work_dir;
    std::fs::create_dir_all(work).map_err(|e| Error::io(work, e))?;
    let at = |name: &str| work.join(name);
    let train_stem = p.train.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let test_stem = p.test.file_stem().and_then(|s| s.to_str()).unwrap_or("input");

    let mut stopword_inputs = Vec::new();
    if let Some(s) = &p.stopwords {
        stopword_inputs.push(s.clone());
    }

    let stages: Vec<Stage<'_>> = vec![
        Stage {
            name: "preprocess",
            inputs: vec![p.train.clone(), p.test.clone(), p.glove.clone()],
            params: params_digest(&(cfg.embedding.dim, cfg.model.max_len))?,
            seed: None,
            outputs: vec![
                at(files::EMBEDDINGS),
                work.join("tokens").join(format!("{train_stem}.ids")),
                work.join("tokens").join(format!("{test_stem}.ids")),
            ],
            run: Box::new(|| {
                preprocess(
                    &[p.train.clone(), p.test.clone()],
                    &p.glove,
                    cfg.embedding.dim,
                    cfg.model.max_len,
                    work,
                )
                .map(drop)
            }),
        },
        Stage {
            name: "augment",
            inputs: vec![p.train.clone()],
            params: params_digest(&cfg.augment)?,
            seed: Some(cfg.augment.seed),
            outputs: vec![at(files::AUGMENTED)],
            run: Box::new(|| {
                let report = augment_file(&p.train, cfg.augment.seed, &at(files::AUGMENTED))?;
                log::info!(
                    "augmented {} pairs to {} ({} positive, {} negative)",
                    report.original,
                    report.total(),
                    report.positives,
                    report.negatives
                );
                Ok(())
            }),
        },
        Stage {
            name: "train-gru",
            inputs: vec![at(files::AUGMENTED), at(files::EMBEDDINGS)],
            params: params_digest(&(&cfg.model, &cfg.train))?,
            seed: Some(cfg.train.seed),
            outputs: vec![at(files::GRU), at(files::HISTORY)],
            run: Box::new(|| {
                let store = load_store(&at(files::EMBEDDINGS))?;
                let outcome = train_gru_file(&at(files::AUGMENTED), store, &cfg.model, &cfg.train, &at(files::GRU))?;
                write_history(&at(files::HISTORY), &outcome.history)
            }),
        },
        Stage {
            name: "featurize",
            inputs: [vec![at(files::GRU), p.train.clone(), p.test.clone()], stopword_inputs].concat(),
            params: params_digest(&())?,
            seed: None,
            outputs: vec![at(files::TRAIN_FEATURES), at(files::TEST_FEATURES)],
            run: Box::new(|| {
                let model = load_model(&at(files::GRU))?;
                let stop = p.stopwords.as_deref();
                let train_rows = featurize_file(&p.train, &model, &p.train, stop)?;
                write_features(&at(files::TRAIN_FEATURES), &train_rows)?;
                let test_rows = featurize_file(&p.test, &model, &p.train, stop)?;
                write_features(&at(files::TEST_FEATURES), &test_rows)
            }),
        },
        Stage {
            name: "train-secondary",
            inputs: vec![at(files::TRAIN_FEATURES)],
            params: params_digest(&cfg.secondary)?,
            seed: Some(cfg.secondary.split_seed),
            outputs: vec![at(files::SECONDARY)],
            run: Box::new(|| {
                let rows = read_features(&at(files::TRAIN_FEATURES))?;
                let s = &cfg.secondary;
                let outcome = train_secondary(&rows, s.kind, &s.params(), s.split_seed, s.dev_fraction)?;
                if let Some(dev) = outcome.dev {
                    log::info!(
                        "{} dev log loss {:.6}, accuracy {:.4}",
                        s.kind,
                        dev.log_loss,
                        dev.accuracy
                    );
                }
                save_secondary(&outcome.model, &at(files::SECONDARY))
            }),
        },
        Stage {
            name: "predict",
            inputs: vec![at(files::TEST_FEATURES), at(files::SECONDARY), p.test.clone()],
            params: params_digest(&())?,
            seed: None,
            outputs: vec![at(files::SUBMISSION)],
            run: Box::new(|| {
                predict_file(
                    &at(files::TEST_FEATURES),
                    &at(files::SECONDARY),
                    Some(&p.test),
                    &at(files::SUBMISSION),
                )
                .map(drop)
            }),
        },
    ];

    let mut log = ManifestLog::open(at(files::MANIFEST))?;
    let mut manifest = RunManifest::default();
    let mut force = false;
    for stage in stages {
        let name = stage.name;
        let wrap = |e: Error| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        };
        let start = Instant::now();
        let inputs = stage
            .inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let decision = if force {
            Decision::Run
        } else {
            match decide(&log, &stage, &inputs) {
                Err(e @ Error::StaleDigest { .. }) => return Err(e),
                other => other.map_err(wrap)?,
            }
        };
        let (outputs, skipped) = match decision {
            Decision::Skip(outputs) => {
                log::info!("{name}: up to date");
                (outputs, true)
            }
            Decision::Run => {
                log::info!("{name}: running");
                (stage.run)().map_err(wrap)?;
                force = true;
                let outputs = stage
                    .outputs
                    .iter()
                    .map(|p| digest_file(p))
                    .collect::<Result<Vec<_>>>()
                    .map_err(wrap)?;
                (outputs, false)
            }
        };
        let record = StageRecord {
            stage: name.to_string(),
            inputs,
            params: stage.params,
            outputs,
            seed: stage.seed,
            wall_ms: start.elapsed().as_millis() as u64,
            skipped,
        };
        log.append(record.clone()).map_err(wrap)?;
        manifest.records.push(record);
    }
    Ok(manifest)
}
