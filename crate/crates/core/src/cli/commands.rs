use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Config;
use super::search::{best_trial, run_trials, TrialResult, TRIALS_HEADER};
use super::synth::{synth_tsv, Profile};
use crate::binio::write_atomic;
use crate::corpus::{
    ingest_asap_tsv, read_score_ranges, split_corpus, Essay, EssayRecord, RowError, ScoreRange,
    ScoreRanges, Split, Vocabulary,
};
use crate::error::{Error, Result};
use crate::metrics::{
    pearson_r, quadratic_weighted_kappa, rmse, spearman_rho, IntRange, MetricsReport, CSV_HEADER,
};
use crate::saliency::{quality_map, render_ansi, span_quality_map, write_html};
use crate::seqmodel::{
    load_model, predict, save_model, train_scorer, EpochRecord, ModelFile, SeqModel,
    TrainOutcome, HISTORY_HEADER,
};
use crate::sswe::{load_embeddings, save_embeddings, train_sswe, EmbeddingFile, EpochLoss};

pub const SPLITS: [&str; 3] = ["train", "validation", "test"];

fn hash_line(cfg: &Config) -> String {
    format!("# config_hash={}\n", cfg.hash())
}

/// Lines of a text artifact with `#` comment lines removed.
fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// The ingested corpus: tokenised records, per-set ranges and the split.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<EssayRecord>,
    pub ranges: ScoreRanges,
    pub split: Split,
}

impl Corpus {
    pub fn records_of(&self, split: &str) -> Result<Vec<&EssayRecord>> {
        let ids = match split {
            "train" => &self.split.train,
            "validation" => &self.split.validation,
            "test" => &self.split.test,
            other => return Err(Error::Config(format!("unknown split `{other}`"))),
        };
        Ok(Split::select(&self.records, ids))
    }

    /// Essays of `split` encoded against `vocab`, scaled with `ranges`.
    pub fn essays(&self, split: &str, vocab: &Vocabulary, ranges: &ScoreRanges) -> Result<Vec<Essay>> {
        self.records_of(split)?
            .into_iter()
            .map(|r| Essay::encode(r, vocab, ranges))
            .collect()
    }

    pub fn train_vocabulary(&self, min_count: usize) -> Result<Vocabulary> {
        let docs = self.records_of("train")?.into_iter().map(|r| r.tokens.clone());
        Ok(Vocabulary::build(docs, min_count))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub essays: usize,
    pub sizes: [usize; 3],
    /// Existing manifests were honoured instead of re-splitting.
    pub reused_manifests: bool,
    pub row_errors: Vec<RowError>,
}

fn mix(seed: u64, id: u64) -> u64 {
    let mut z = seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn read_manifest(path: &Path) -> Result<Vec<u64>> {
    let text = read_text(path)?;
    content_lines(&text)
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("bad essay id `{l}`")))
        })
        .collect()
}

fn write_manifest(cfg: &Config, path: &Path, ids: &[u64]) -> Result<()> {
    let mut out = hash_line(cfg);
    for id in ids {
        let _ = writeln!(out, "{id}");
    }
    write_atomic(path, out.as_bytes())
}

fn write_cache(cfg: &Config, records: &[EssayRecord], ranges: &ScoreRanges) -> Result<()> {
    let mut out = hash_line(cfg);
    let _ = writeln!(out, "# scaling={}", super::config::ConfigValue::render(&ranges.scaling));
    for (set, r) in &ranges.ranges {
        let _ = writeln!(out, "# range\t{set}\t{:?}\t{:?}", r.min, r.max);
    }
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{:?}\t{}",
            r.essay_id,
            r.set_id,
            r.raw_score,
            r.tokens.join(" ")
        );
    }
    write_atomic(&cfg.cache_path(), out.as_bytes())
}

/// Reads the corpus cache and split manifests written by [`cmd_ingest`].
pub fn load_corpus(cfg: &Config) -> Result<Corpus> {
    let path = cfg.cache_path();
    if !path.exists() {
        return Err(Error::Data(format!(
            "corpus cache {} not found; run `ats ingest` first",
            path.display()
        )));
    }
    let text = read_text(&path)?;
    let mut ranges = ScoreRanges::default();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = || Error::format(&path, format!("line {}: malformed cache entry", i + 1));
        if let Some(s) = line.strip_prefix("# scaling=") {
            ranges.scaling =
                super::config::ConfigValue::parse_value(s).map_err(|_| bad())?;
        } else if let Some(r) = line.strip_prefix("# range\t") {
            let f: Vec<&str> = r.split('\t').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let set = f[0].parse().map_err(|_| bad())?;
            let min = f[1].parse().map_err(|_| bad())?;
            let max = f[2].parse().map_err(|_| bad())?;
            ranges.ranges.insert(set, ScoreRange { min, max });
        } else if !line.starts_with('#') && !line.is_empty() {
            let f: Vec<&str> = line.splitn(4, '\t').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            records.push(EssayRecord {
                essay_id: f[0].parse().map_err(|_| bad())?,
                set_id: f[1].parse().map_err(|_| bad())?,
                raw_score: f[2].parse().map_err(|_| bad())?,
                tokens: f[3].split(' ').map(String::from).collect(),
            });
        }
    }
    let mut parts = Vec::new();
    for s in SPLITS {
        parts.push(read_manifest(&cfg.manifest_path(s))?);
    }
    let [train, validation, test]: [Vec<u64>; 3] = parts.try_into().expect("three splits");
    Ok(Corpus {
        records,
        ranges,
        split: Split {
            train,
            validation,
            test,
        },
    })
}

/// Tokenises the data file, fixes the split and writes the cache.
pub fn cmd_ingest(cfg: &Config) -> Result<IngestSummary> {
    cfg.validate()?;
    let supplied = if cfg.score_ranges.is_empty() {
        None
    } else {
        Some(read_score_ranges(Path::new(&cfg.score_ranges))?)
    };
    let ingested = ingest_asap_tsv(Path::new(&cfg.data), supplied.as_ref(), cfg.scaling)?;
    if !ingested.errors.is_empty() && !cfg.skip_bad_rows {
        let shown: Vec<String> = ingested.errors.iter().take(10).map(|e| e.to_string()).collect();
        return Err(Error::Data(format!(
            "{}: {} malformed rows (set skip_bad_rows = true to continue):\n  {}",
            cfg.data,
            ingested.errors.len(),
            shown.join("\n  ")
        )));
    }
    let mut records = ingested.records;
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no essays", cfg.data)));
    }

    let manifests: Vec<PathBuf> = SPLITS.iter().map(|s| cfg.manifest_path(s)).collect();
    let reused = manifests.iter().all(|p| p.exists());
    let split = if reused {
        // Existing manifests fix the corpus; max_essays does not apply.
        let known: BTreeSet<u64> = records.iter().map(|r| r.essay_id).collect();
        let mut parts = Vec::new();
        for p in &manifests {
            let ids = read_manifest(p)?;
            if let Some(missing) = ids.iter().find(|id| !known.contains(id)) {
                return Err(Error::Data(format!(
                    "{} lists essay {missing}, which is not in {}",
                    p.display(),
                    cfg.data
                )));
            }
            parts.push(ids);
        }
        let listed: BTreeSet<u64> = parts.iter().flatten().copied().collect();
        records.retain(|r| listed.contains(&r.essay_id));
        let [train, validation, test]: [Vec<u64>; 3] = parts.try_into().expect("three splits");
        Split {
            train,
            validation,
            test,
        }
    } else {
        if cfg.max_essays > 0 && records.len() > cfg.max_essays {
            let mut keyed: Vec<(u64, usize)> = records
                .iter()
                .enumerate()
                .map(|(i, r)| (mix(cfg.seed, r.essay_id), i))
                .collect();
            keyed.sort_unstable();
            let keep: BTreeSet<usize> = keyed[..cfg.max_essays].iter().map(|&(_, i)| i).collect();
            records = records
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.contains(i))
                .map(|(_, r)| r)
                .collect();
        }
        split_corpus(&records, &cfg.split_spec())?
    };

    write_cache(cfg, &records, &ingested.ranges)?;
    if !reused {
        write_manifest(cfg, &manifests[0], &split.train)?;
        write_manifest(cfg, &manifests[1], &split.validation)?;
        write_manifest(cfg, &manifests[2], &split.test)?;
    }
    Ok(IngestSummary {
        essays: records.len(),
        sizes: [split.train.len(), split.validation.len(), split.test.len()],
        reused_manifests: reused,
        row_errors: ingested.errors,
    })
}

/// Trains embeddings on the training split.
pub fn cmd_train_embeddings(cfg: &Config) -> Result<Vec<EpochLoss>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let vocab = corpus.train_vocabulary(cfg.min_count)?;
    let train = corpus.essays("train", &vocab, &corpus.ranges)?;
    let (params, history) = train_sswe(&train, vocab.len(), &cfg.sswe_hyper())?;

    let mut csv = hash_line(cfg);
    csv.push_str("epoch,overall,context,score\n");
    for h in &history {
        let _ = writeln!(csv, "{},{:?},{:?},{:?}", h.epoch, h.overall, h.context, h.score);
    }
    let file = EmbeddingFile {
        vocab,
        params,
        metadata: cfg.metadata(),
    };
    save_embeddings(&cfg.default_embeddings_path(), &file)?;
    write_atomic(
        &Path::new(&cfg.reports_dir).join("embedding_history.csv"),
        csv.as_bytes(),
    )?;
    Ok(history)
}

/// Where the scorer's initial embeddings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    /// Random initialisation, trained jointly with the scorer.
    Learned,
    File(PathBuf),
}

impl EmbeddingSource {
    pub fn from_config(cfg: &Config) -> Self {
        match cfg.embeddings.as_str() {
            "learned" => EmbeddingSource::Learned,
            "auto" | "" => EmbeddingSource::File(cfg.default_embeddings_path()),
            path => EmbeddingSource::File(PathBuf::from(path)),
        }
    }
}

/// Model name used in metric rows, e.g. `sswe+two-layer blstm`.
pub fn model_label(cfg: &Config) -> String {
    let emb = match EmbeddingSource::from_config(cfg) {
        EmbeddingSource::Learned => "learned",
        EmbeddingSource::File(_) => "sswe",
    };
    format!("{emb}+{}", cfg.architecture().label())
}

/// Builds the vocabulary and initial model for the scorer.
fn initial_scorer(cfg: &Config, corpus: &Corpus) -> Result<(Vocabulary, SeqModel)> {
    let vocab = corpus.train_vocabulary(cfg.min_count)?;
    let arch = cfg.architecture();
    match EmbeddingSource::from_config(cfg) {
        EmbeddingSource::Learned => {
            let model = SeqModel::new(arch, cfg.dropout, vocab.len(), cfg.seed)?;
            Ok((vocab, model))
        }
        EmbeddingSource::File(path) => {
            let emb = load_embeddings(&path)?;
            if emb.vocab != vocab {
                return Err(Error::Data(format!(
                    "vocabulary mismatch: {} has {} entries but the training corpus yields {}",
                    path.display(),
                    emb.vocab.len(),
                    vocab.len()
                )));
            }
            let model = SeqModel::with_embeddings(arch, cfg.dropout, emb.params.embeddings, cfg.seed)?;
            Ok((emb.vocab, model))
        }
    }
}

/// Trains the scorer with early stopping on the validation split.
pub fn cmd_train_scorer(cfg: &Config) -> Result<TrainOutcome> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let (vocab, model) = initial_scorer(cfg, &corpus)?;
    let train = corpus.essays("train", &vocab, &corpus.ranges)?;
    let val = corpus.essays("validation", &vocab, &corpus.ranges)?;
    let outcome = train_scorer(model, &train, &val, &corpus.ranges, &cfg.scorer_hyper())?;

    let mut csv = hash_line(cfg);
    csv.push_str(HISTORY_HEADER);
    csv.push('\n');
    for r in &outcome.history {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let file = ModelFile {
        vocab,
        ranges: corpus.ranges.clone(),
        model: outcome.model.clone(),
        metadata: cfg.metadata(),
    };
    save_model(&cfg.model_path(), &file)?;
    write_atomic(
        &Path::new(&cfg.reports_dir).join("scorer_history.csv"),
        csv.as_bytes(),
    )?;
    Ok(outcome)
}

/// Correlations are undefined for constant inputs; report them as NaN.
fn lenient(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::UndefinedCorrelation(_)) => Ok(f64::NAN),
        other => other,
    }
}

/// QWK category range covering every set of `ranges`.
pub fn kappa_range(ranges: &ScoreRanges) -> Result<IntRange> {
    let g = ranges
        .global()
        .ok_or_else(|| Error::Data("no score ranges".into()))?;
    IntRange::new(g.min.floor() as i64, g.max.ceil() as i64)
}

/// Scores `split` with a saved model; predictions are raw-scale.
pub fn evaluate_split(file: &ModelFile, corpus: &Corpus, split: &str) -> Result<MetricsReport> {
    let essays = corpus.essays(split, &file.vocab, &file.ranges)?;
    if essays.is_empty() {
        return Err(Error::Data(format!("the {split} split is empty")));
    }
    let pred = predict(&file.model, &essays, &file.ranges)?;
    let gold: Vec<f64> = essays.iter().map(|e| e.raw_score).collect();
    Ok(MetricsReport {
        spearman_rho: lenient(spearman_rho(&pred, &gold))?,
        pearson_r: lenient(pearson_r(&pred, &gold))?,
        rmse: rmse(&pred, &gold)?,
        qwk: lenient(quadratic_weighted_kappa(&pred, &gold, kappa_range(&file.ranges)?))?,
        n: essays.len(),
    })
}

/// Writes `metrics_<split>.csv` and `metrics_<split>.txt` for each split.
pub fn cmd_evaluate(cfg: &Config, model: &Path, splits: &[&str]) -> Result<Vec<(String, MetricsReport)>> {
    cfg.validate()?;
    let file = load_model(model)?;
    let corpus = load_corpus(cfg)?;
    let label = model_label(cfg);
    let mut out = Vec::new();
    for &split in splits {
        let rep = evaluate_split(&file, &corpus, split)?;
        let csv = format!("{}{CSV_HEADER}\n{}\n", hash_line(cfg), rep.csv_row(&label));
        let txt = format!("{}{label} on {split}\n{rep}\n", hash_line(cfg));
        let dir = Path::new(&cfg.reports_dir);
        write_atomic(&dir.join(format!("metrics_{split}.csv")), csv.as_bytes())?;
        write_atomic(&dir.join(format!("metrics_{split}.txt")), txt.as_bytes())?;
        out.push((split.to_string(), rep));
    }
    Ok(out)
}

/// Whole-essay or span-level quality maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisualMode {
    Essay,
    Span(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualizeSummary {
    /// One rendered line per essay.
    pub ansi: Vec<String>,
    pub html: Vec<PathBuf>,
    pub index: PathBuf,
}

/// Renders quality maps for `ids` (the test split when empty). The model is
/// only read.
pub fn cmd_visualize(
    cfg: &Config,
    model: &Path,
    ids: &[u64],
    mode: VisualMode,
    monochrome: bool,
) -> Result<VisualizeSummary> {
    cfg.validate()?;
    let file = load_model(model)?;
    let corpus = load_corpus(cfg)?;
    let by_id: BTreeMap<u64, &EssayRecord> =
        corpus.records.iter().map(|r| (r.essay_id, r)).collect();
    let ids: Vec<u64> = if ids.is_empty() {
        corpus.split.test.clone()
    } else {
        ids.to_vec()
    };
    let dir = PathBuf::from(&cfg.heatmaps_dir);
    let meta = cfg.metadata();
    let mut index = hash_line(cfg);
    index.push_str("essay_id\tprediction\tmean_quality\tfile\n");
    let mut summary = VisualizeSummary {
        ansi: Vec::new(),
        html: Vec::new(),
        index: dir.join("index.tsv"),
    };
    for id in ids {
        let record = by_id
            .get(&id)
            .ok_or_else(|| Error::Lookup(format!("unknown essay id {id}")))?;
        let essay = Essay::encode(record, &file.vocab, &file.ranges)?;
        let map = match mode {
            VisualMode::Essay => quality_map(&file.model, &essay, &record.tokens, &file.ranges)?,
            VisualMode::Span(n) => {
                span_quality_map(&file.model, &essay, &record.tokens, &file.ranges, n)?
            }
        };
        let name = format!("essay_{id}.html");
        let path = dir.join(&name);
        write_html(&map, &path, &meta)?;
        let _ = writeln!(index, "{id}\t{:?}\t{:?}\t{name}", map.prediction, map.mean_quality());
        summary.ansi.push(render_ansi(&map, monochrome));
        summary.html.push(path);
    }
    write_atomic(&summary.index, index.as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub trials: Vec<TrialResult>,
    pub best: Option<TrialResult>,
    pub best_config: Option<Config>,
}

/// Best validation RMSE reached by one configuration.
pub fn evaluate_config(cfg: &Config, corpus: &Corpus) -> Result<f64> {
    let (vocab, model) = match EmbeddingSource::from_config(cfg) {
        EmbeddingSource::Learned => {
            let vocab = corpus.train_vocabulary(cfg.min_count)?;
            let model = SeqModel::new(cfg.architecture(), cfg.dropout, vocab.len(), cfg.seed)?;
            (vocab, model)
        }
        EmbeddingSource::File(_) => {
            let vocab = corpus.train_vocabulary(cfg.min_count)?;
            let train = corpus.essays("train", &vocab, &corpus.ranges)?;
            let (params, _) = train_sswe(&train, vocab.len(), &cfg.sswe_hyper())?;
            let model = SeqModel::with_embeddings(
                cfg.architecture(),
                cfg.dropout,
                params.embeddings,
                cfg.seed,
            )?;
            (vocab, model)
        }
    };
    let train = corpus.essays("train", &vocab, &corpus.ranges)?;
    let val = corpus.essays("validation", &vocab, &corpus.ranges)?;
    if val.is_empty() {
        return Err(Error::Data("search needs a non-empty validation split".into()));
    }
    let out = train_scorer(model, &train, &val, &corpus.ranges, &cfg.scorer_hyper())?;
    out.history
        .iter()
        .filter_map(|r: &EpochRecord| r.val_rmse)
        .reduce(f64::min)
        .ok_or_else(|| Error::Data("no validation RMSE recorded".into()))
}

/// Seeded random search. In search trials SSWE is trained afresh unless
/// `embeddings = learned`.
pub fn cmd_search(cfg: &Config) -> Result<SearchOutcome> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let space = cfg.search_space();
    let base = Config {
        epochs: cfg.search_epochs,
        ..cfg.clone()
    };
    let trials = run_trials(&space, |p| {
        let trial_cfg = p.apply(&base);
        trial_cfg.validate()?;
        evaluate_config(&trial_cfg, &corpus)
    })?;
    let best = best_trial(&trials).copied();
    let best_config = best.map(|b| b.params.apply(cfg));

    let mut csv = hash_line(cfg);
    csv.push_str(TRIALS_HEADER);
    csv.push('\n');
    for t in &trials {
        csv.push_str(&t.csv_row());
        csv.push('\n');
    }
    let dir = Path::new(&cfg.reports_dir);
    write_atomic(&dir.join("search_trials.csv"), csv.as_bytes())?;
    if let Some(bc) = &best_config {
        let text = format!("{}{}", hash_line(cfg), bc.to_text());
        write_atomic(&dir.join("best.conf"), text.as_bytes())?;
    }
    Ok(SearchOutcome {
        trials,
        best,
        best_config,
    })
}

/// Writes a synthetic corpus to `out`, or returns it when `out` is `None`.
pub fn cmd_synth(profile: Profile, seed: u64, out: Option<&Path>) -> Result<String> {
    let tsv = synth_tsv(profile, seed);
    if let Some(path) = out {
        write_atomic(path, tsv.as_bytes())?;
    }
    Ok(tsv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_in(dir: &Path, data: &str) -> Config {
        let data_path = dir.join("essays.tsv");
        std::fs::write(&data_path, data).unwrap();
        let d = |s: &str| dir.join(s).display().to_string();
        Config {
            data: data_path.display().to_string(),
            splits_dir: d("splits"),
            models_dir: d("models"),
            reports_dir: d("reports"),
            heatmaps_dir: d("heatmaps"),
            ..Config::default()
        }
    }

    #[test]
    fn ingest_splits_subsample_and_reuses_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config_in(dir.path(), &synth_tsv(Profile::Ablation, 0));
        cfg.max_essays = 100;
        let s = cmd_ingest(&cfg).unwrap();
        assert_eq!((s.essays, s.sizes), (100, [64, 16, 20]));
        assert!(!s.reused_manifests);
        let before = std::fs::read_to_string(cfg.manifest_path("test")).unwrap();
        assert!(before.starts_with(&format!("# config_hash={}", cfg.hash())));

        let first = load_corpus(&cfg).unwrap();
        assert_eq!(first.records.len(), 100);

        cfg.seed = 5;
        let again = cmd_ingest(&cfg).unwrap();
        assert!(again.reused_manifests);
        assert_eq!(std::fs::read_to_string(cfg.manifest_path("test")).unwrap(), before);
    }

    #[test]
    fn cache_round_trips_records() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), &synth_tsv(Profile::Overfit16, 2));
        cmd_ingest(&cfg).unwrap();
        let corpus = load_corpus(&cfg).unwrap();
        let direct = ingest_asap_tsv(Path::new(&cfg.data), None, cfg.scaling).unwrap();
        assert_eq!(corpus.records, direct.records);
        assert_eq!(corpus.ranges, direct.ranges);
    }

    #[test]
    fn bad_rows_fail_unless_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut tsv = synth_tsv(Profile::Overfit16, 0);
        tsv.push_str("99\t1\tsome words\tnot-a-number\n");
        let mut cfg = config_in(dir.path(), &tsv);
        assert!(matches!(cmd_ingest(&cfg), Err(Error::Data(_))));
        cfg.skip_bad_rows = true;
        let s = cmd_ingest(&cfg).unwrap();
        assert_eq!((s.essays, s.row_errors.len()), (16, 1));
    }

    #[test]
    fn stale_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), &synth_tsv(Profile::Overfit16, 0));
        cmd_ingest(&cfg).unwrap();
        std::fs::write(cfg.manifest_path("test"), "12345\n").unwrap();
        let err = cmd_ingest(&cfg).unwrap_err();
        assert!(err.to_string().contains("12345"), "{err}");
    }

    #[test]
    fn later_stages_need_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path(), &synth_tsv(Profile::Overfit16, 0));
        let err = cmd_train_scorer(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("ats ingest"));
    }

    #[test]
    fn labels_follow_the_embedding_source() {
        let mut cfg = Config::default();
        assert_eq!(model_label(&cfg), "sswe+lstm");
        cfg.embeddings = "learned".into();
        cfg.layers = 2;
        cfg.bidirectional = true;
        assert_eq!(model_label(&cfg), "learned+two-layer blstm");
    }
}
