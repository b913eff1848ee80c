//! Stage bodies. Each reads its inputs from the output directory and returns
//! the relative paths it wrote.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use deid_audit::attacks::{
    brute_force_rank, build_shadow_plan, mia_attack_target, naive_cutoff, top_repetition_reports,
    train_shadow_models, AttackConfig, CutoffResult, MiaConfig, MiaReport, RankResult,
};
use deid_audit::corpus::{
    build_name_inventory, generate_synthetic_corpus, parse_conll, synth_name_dictionary, write_conll,
    write_name_list, Corpus, NameDictionary, NameKind, Report, Split, SynthConfig, TagSet,
};
use deid_audit::embeddings::{load_word_vectors, synth_embedding, EmbeddingTable};
use deid_audit::neural::{container, TrainConfig};
use deid_audit::perturb::{
    make_variant, outside_dictionary, repetition_count, revert_variant, select_repetition_reports, VariantKind,
};
use deid_audit::seed::derive_seed;
use deid_audit::stats::{export_curves, ks_two_sample, summary_stats, Bandwidth, KsResult, KsRow, KsTable, SummaryStats};
use deid_audit::tagger::{
    evaluate, extract_name_probs, train_tagger, write_prob_records, Metrics, TaggerConfig, TaggerModel,
};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::pipeline::Stage;
use crate::report;

pub(crate) struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: &'a Path,
    /// Seed of the running stage.
    pub seed: u64,
}

/// Collects written files so the manifest can hash them.
struct Writer<'a> {
    root: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(root: &'a Path) -> Self {
        Writer { root, files: Vec::new() }
    }

    fn create(&mut self, rel: impl AsRef<Path>) -> Result<BufWriter<File>> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(rel.to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn text(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<()> {
        let mut w = self.create(rel)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.text(rel, &(text + "\n"))
    }

    fn with<F>(&mut self, rel: impl AsRef<Path>, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = self.create(rel)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn run(stage: Stage, ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let mut w = Writer::new(ctx.out);
    match stage {
        Stage::GenCorpus => gen_corpus(ctx, &mut w),
        Stage::Train => train(ctx, &mut w),
        Stage::Perturb => perturb(ctx, &mut w),
        Stage::Extract => extract(ctx, &mut w),
        Stage::Ks => ks(ctx, &mut w),
        Stage::Cutoff => cutoff(ctx, &mut w),
        Stage::Brute => brute(ctx, &mut w),
        Stage::Mia => mia(ctx, &mut w),
        Stage::Report => report_stage(ctx, &mut w),
    }?;
    Ok(w.files)
}

pub(crate) fn head_tag(crf: bool) -> &'static str {
    if crf {
        "crf"
    } else {
        "nocrf"
    }
}

fn kind_tag(kind: NameKind) -> &'static str {
    match kind {
        NameKind::Surname => "surname",
        NameKind::Given => "given",
    }
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_conll(path: &Path) -> Result<Corpus> {
    let parsed = parse_conll(open(path)?, &TagSet::default()).with_context(|| format!("parsing {}", path.display()))?;
    if parsed.repairs > 0 {
        log::warn!("{}: repaired {} dangling I- tags", path.display(), parsed.repairs);
    }
    Ok(parsed.corpus)
}

fn full_corpus(ctx: &Ctx) -> Result<Corpus> {
    read_conll(&ctx.out.join("corpus.conll"))
}

/// The corpus every model sees: the full one, or its train split cut to the
/// overfit dial.
fn working_corpus(ctx: &Ctx) -> Result<Corpus> {
    let full = full_corpus(ctx)?;
    Ok(match ctx.cfg.overfit_dial {
        Some(n) => full.truncate_train(n),
        None => full,
    })
}

fn read_dictionary(dir: &Path, prefix: &str) -> Result<NameDictionary> {
    let f = |name: &str| open(&dir.join(format!("{prefix}{name}.txt")));
    Ok(NameDictionary::from_readers(f("surnames")?, f("male")?, f("female")?)?)
}

fn write_dictionary(w: &mut Writer, prefix: &str, dict: &NameDictionary) -> Result<()> {
    for (name, list) in [("surnames", &dict.surnames), ("male", &dict.given_male), ("female", &dict.given_female)] {
        w.with(format!("dict/{prefix}{name}.txt"), |out| Ok(write_name_list(list, out)?))?;
    }
    Ok(())
}

fn embedding(ctx: &Ctx) -> Result<EmbeddingTable> {
    Ok(load_word_vectors(open(&ctx.out.join("embeddings.txt"))?, ctx.cfg.embedding_dim)?)
}

fn model_path(ctx: &Ctx, crf: bool) -> PathBuf {
    ctx.out.join(format!("model_{}.json", head_tag(crf)))
}

fn load_model(ctx: &Ctx, crf: bool) -> Result<TaggerModel> {
    let path = model_path(ctx, crf);
    container::load(open(&path)?).with_context(|| format!("loading {}", path.display()))
}

fn variant_corpus(ctx: &Ctx, kind: VariantKind) -> Result<Corpus> {
    match kind {
        VariantKind::Orig => working_corpus(ctx),
        k => read_conll(&ctx.out.join(format!("variants/{}.conll", k.label()))),
    }
}

fn prob_path(crf: bool, kind: VariantKind, names: NameKind) -> String {
    format!("probs/{}/{}_{}.csv", head_tag(crf), kind.label(), kind_tag(names))
}

/// Name classes a variant's records are extracted for: both for the
/// original, only the replaced ones otherwise.
fn extracted_kinds(kind: VariantKind) -> Vec<NameKind> {
    [NameKind::Surname, NameKind::Given]
        .into_iter()
        .filter(|&k| kind == VariantKind::Orig || kind.replaces(k))
        .collect()
}

fn read_scores(ctx: &Ctx, crf: bool, kind: VariantKind, names: NameKind) -> Result<Vec<f64>> {
    let path = ctx.out.join(prob_path(crf, kind, names));
    let mut r = csv::Reader::from_reader(open(&path)?);
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "score")
        .with_context(|| format!("{} has no score column", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(rec.get(col).context("short row")?.parse::<f64>()?)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CorpusStats {
    pub source: String,
    pub reports: IndexMap<String, usize>,
    pub sentences: usize,
    pub tokens: usize,
    pub surname_occurrences: usize,
    pub given_occurrences: usize,
    pub reports_with_min_repetitions: usize,
    pub dictionary: [usize; 3],
    pub embedding_words: usize,
}

fn gen_corpus(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let cfg = ctx.cfg;
    let dict = match (&cfg.surnames_path, &cfg.male_path, &cfg.female_path) {
        (Some(s), Some(m), Some(f)) => NameDictionary::from_readers(open(s)?, open(m)?, open(f)?)?,
        _ => synth_name_dictionary(cfg.dict_surnames, cfg.dict_male, cfg.dict_female, derive_seed(ctx.seed, "dictionary"))?,
    };
    let (corpus, source) = match &cfg.corpus_path {
        Some(p) => (read_conll(p)?, p.display().to_string()),
        None => {
            let synth = SynthConfig {
                n_reports: cfg.synth_reports,
                names_per_report: cfg.synth_names_per_report,
                min_repetition_quota: cfg.synth_repetition_quota,
                templates: cfg.synth_templates,
                seed: derive_seed(ctx.seed, "corpus"),
                ..Default::default()
            };
            let (corpus, log) = generate_synthetic_corpus(&synth, &dict)?;
            w.json("synth_log.json", &log)?;
            (corpus, "synthetic".to_string())
        }
    };
    if corpus.reports.is_empty() {
        bail!("corpus has no reports");
    }
    let table = match &cfg.embeddings_path {
        Some(p) => load_word_vectors(open(p)?, cfg.embedding_dim)?,
        None => {
            let mut vocab = corpus.vocabulary();
            vocab.extend(dict.surnames.iter().cloned());
            vocab.extend(dict.given_all().cloned());
            synth_embedding(&vocab, cfg.embedding_dim, derive_seed(ctx.seed, "embedding"))?
        }
    };

    w.with("corpus.conll", |out| Ok(write_conll(&corpus, out)?))?;
    write_dictionary(w, "", &dict)?;
    w.with("embeddings.txt", |out| {
        for (word, v) in table.iter() {
            write!(out, "{word}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    })?;

    let mut reports = IndexMap::new();
    for split in [Split::Train, Split::Valid, Split::Test] {
        reports.insert(split.to_string(), corpus.split(split).count());
    }
    let stats = CorpusStats {
        source,
        reports,
        sentences: corpus.reports.iter().map(|r| r.sentences().len()).sum(),
        tokens: corpus.reports.iter().map(Report::token_count).sum(),
        surname_occurrences: corpus.surname_occurrences(),
        given_occurrences: corpus.given_occurrences(),
        reports_with_min_repetitions: corpus
            .reports
            .iter()
            .filter(|r| repetition_count(r, NameKind::Surname) >= cfg.repetition_min)
            .count(),
        dictionary: [dict.surnames.len(), dict.given_male.len(), dict.given_female.len()],
        embedding_words: table.len(),
    };
    w.json("corpus_stats.json", &stats)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct HeadMetrics {
    pub epochs: usize,
    pub best_epoch: Option<usize>,
    pub train: Metrics,
    pub valid: Option<Metrics>,
    pub test: Option<Metrics>,
}

fn tagger_config(cfg: &RunConfig, crf: bool, seed: u64) -> TaggerConfig {
    TaggerConfig {
        char_dim: cfg.char_dim,
        char_hidden: cfg.char_hidden,
        char_bidirectional: cfg.char_bidirectional,
        token_hidden: cfg.token_hidden,
        crf,
        seed,
    }
}

fn train_config(cfg: &RunConfig, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.learning_rate,
        dropout: cfg.dropout,
        clip_norm: cfg.clip_norm,
        max_epochs: epochs,
        seed,
    }
}

fn train(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let corpus = working_corpus(ctx)?;
    let table = embedding(ctx)?;
    let mut metrics = IndexMap::new();
    for crf in ctx.cfg.crf.heads() {
        let tag = head_tag(crf);
        let epochs = ctx.cfg.epochs(crf);
        let mc = tagger_config(ctx.cfg, crf, derive_seed(ctx.seed, &format!("{tag}-init")));
        let tc = train_config(ctx.cfg, epochs, derive_seed(ctx.seed, &format!("{tag}-sgd")));
        log::info!("training {tag} tagger for {epochs} epochs");
        let outcome = train_tagger(&corpus, table.clone(), &mc, &tc)?;
        w.with(format!("model_{tag}.json"), |out| Ok(container::save(&outcome.model, out)?))?;
        w.with(format!("history_{tag}.csv"), |out| {
            let mut c = csv::Writer::from_writer(out);
            c.write_record(["epoch", "mean_loss", "valid_f1"])?;
            for h in &outcome.history {
                let f1 = h.valid_f1.map_or("NA".to_string(), |v| format!("{v:e}"));
                c.write_record([h.epoch.to_string(), format!("{:e}", h.mean_loss), f1])?;
            }
            c.flush()?;
            Ok(())
        })?;
        let split_metrics = |split: Split| -> Result<Option<Metrics>> {
            if corpus.split(split).next().is_none() {
                return Ok(None);
            }
            Ok(Some(evaluate(&outcome.model, &corpus, split)?))
        };
        let m = HeadMetrics {
            epochs,
            best_epoch: outcome.best_epoch,
            train: split_metrics(Split::Train)?.context("empty train split")?,
            valid: split_metrics(Split::Valid)?,
            test: split_metrics(Split::Test)?,
        };
        log::info!("{tag}: train precision {:.4}", m.train.precision);
        metrics.insert(tag.to_string(), m);
    }
    w.json("metrics.json", &metrics)
}

fn perturb(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let full = full_corpus(ctx)?;
    let corpus = working_corpus(ctx)?;
    let dict = read_dictionary(&ctx.out.join("dict"), "")?;
    let inventory = build_name_inventory(&corpus);
    let outside = outside_dictionary(&dict, &full);
    write_dictionary(w, "outside_", &outside)?;
    for kind in VariantKind::PERTURBED {
        let (variant, plan) =
            make_variant(&corpus, kind, &inventory, &outside, &dict, derive_seed(ctx.seed, kind.label()))?;
        if revert_variant(&variant, &plan)? != corpus {
            bail!("{kind} does not revert to the original corpus");
        }
        w.with(format!("variants/{}.conll", kind.label()), |out| Ok(write_conll(&variant, out)?))?;
        w.with(format!("variants/{}.plan", kind.label()), |out| Ok(plan.write_sidecar(out)?))?;
    }
    Ok(())
}

fn extract(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    for crf in ctx.cfg.crf.heads() {
        let model = load_model(ctx, crf)?;
        for kind in VariantKind::ALL {
            let train = variant_corpus(ctx, kind)?.subset(Split::Train);
            for names in extracted_kinds(kind) {
                let records = extract_name_probs(&model, &train, names, kind)?;
                w.with(prob_path(crf, kind, names), |out| Ok(write_prob_records(&records, &model.tagset, out)?))?;
            }
        }
    }
    Ok(())
}

/// Rows of the KS table: label and the variant compared with the original.
pub(crate) const KS_ROWS: [(&str, VariantKind); 4] = [
    ("SN1", VariantKind::Sn1),
    ("SN2", VariantKind::Sn2),
    ("SN1*", VariantKind::Sngn1),
    ("SN2*", VariantKind::Sngn2),
];

const KS_GIVEN_ROWS: [(&str, VariantKind); 4] = [
    ("GN1", VariantKind::Gn1),
    ("GN2", VariantKind::Gn2),
    ("GN1*", VariantKind::Sngn1),
    ("GN2*", VariantKind::Sngn2),
];

const CURVE_SETS: [VariantKind; 5] =
    [VariantKind::Orig, VariantKind::Sn1, VariantKind::Sn2, VariantKind::Sngn1, VariantKind::Sngn2];

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct KsResults {
    pub surname: KsTable,
    pub given: KsTable,
}

fn ks_table(ctx: &Ctx, rows: &[(&str, VariantKind)], names: NameKind) -> Result<KsTable> {
    let heads = ctx.cfg.crf.heads();
    let mut out = Vec::new();
    for &(label, kind) in rows {
        let mut row = KsRow { label: label.to_string(), no_crf: None, crf: None };
        for &crf in &heads {
            let orig = read_scores(ctx, crf, VariantKind::Orig, names)?;
            let var = read_scores(ctx, crf, kind, names)?;
            let result: Option<KsResult> = if orig.is_empty() || var.is_empty() {
                log::warn!("{label}: no {} records, leaving NA", kind_tag(names));
                None
            } else {
                Some(ks_two_sample(&orig, &var)?)
            };
            if crf {
                row.crf = result;
            } else {
                row.no_crf = result;
            }
        }
        out.push(row);
    }
    Ok(KsTable { rows: out })
}

fn ks(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let results = KsResults {
        surname: ks_table(ctx, &KS_ROWS, NameKind::Surname)?,
        given: ks_table(ctx, &KS_GIVEN_ROWS, NameKind::Given)?,
    };
    w.with("ks_table.csv", |out| Ok(results.surname.write_csv(out)?))?;
    w.with("ks_given_table.csv", |out| Ok(results.given.write_csv(out)?))?;
    w.json("ks_results.json", &results)?;

    let mut summaries: IndexMap<String, IndexMap<String, SummaryStats>> = IndexMap::new();
    for crf in ctx.cfg.crf.heads() {
        let tag = head_tag(crf);
        let entry = summaries.entry(tag.to_string()).or_default();
        for kind in VariantKind::ALL {
            for names in extracted_kinds(kind) {
                let scores = read_scores(ctx, crf, kind, names)?;
                if !scores.is_empty() {
                    entry.insert(format!("{}_{}", kind.label(), kind_tag(names)), summary_stats(&scores)?);
                }
            }
        }
        for kind in CURVE_SETS {
            let scores = read_scores(ctx, crf, kind, NameKind::Surname)?;
            if scores.is_empty() {
                continue;
            }
            let curves = export_curves(&scores, ctx.cfg.hist_bins, Bandwidth::Silverman, ctx.cfg.kde_grid)?;
            let base = format!("curves/{tag}_{}", kind.label());
            w.with(format!("{base}_hist.csv"), |out| Ok(curves.histogram.write_csv(out)?))?;
            w.with(format!("{base}_ecdf.csv"), |out| Ok(curves.ecdf.write_csv(out)?))?;
            w.with(format!("{base}_kde.csv"), |out| Ok(curves.kde.write_csv(out)?))?;
        }
    }
    w.json("summaries.json", &summaries)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CutoffEntry {
    pub comparison: String,
    pub members: usize,
    pub nonmembers: usize,
    pub ks_d: f64,
    /// `(1 + D) / 2`: the balanced accuracy a single threshold attains.
    pub ks_bound: f64,
    pub result: CutoffResult,
}

fn cutoff(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let mut all: IndexMap<String, Vec<CutoffEntry>> = IndexMap::new();
    for crf in ctx.cfg.crf.heads() {
        let members = read_scores(ctx, crf, VariantKind::Orig, NameKind::Surname)?;
        let mut entries = Vec::new();
        for (label, kind) in KS_ROWS {
            let nonmembers = read_scores(ctx, crf, kind, NameKind::Surname)?;
            if members.is_empty() || nonmembers.is_empty() {
                continue;
            }
            let d = ks_two_sample(&members, &nonmembers)?.d;
            entries.push(CutoffEntry {
                comparison: format!("ORIG vs {label}"),
                members: members.len(),
                nonmembers: nonmembers.len(),
                ks_d: d,
                ks_bound: 0.5 * (1.0 + d),
                result: naive_cutoff(&members, &nonmembers)?,
            });
        }
        all.insert(head_tag(crf).to_string(), entries);
    }
    w.json("cutoff.json", &all)
}

/// Brute-force dictionary: the first names of the outside surname list.
fn brute_dictionary(ctx: &Ctx) -> Result<Vec<String>> {
    let outside = read_dictionary(&ctx.out.join("dict"), "outside_")?;
    let names: Vec<String> = outside.surnames.into_iter().take(ctx.cfg.brute_dict_size).collect();
    if names.len() < ctx.cfg.brute_dict_size {
        log::warn!("outside dictionary holds only {} surnames", names.len());
    }
    Ok(names)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RankSummary {
    pub report_id: String,
    pub true_name: String,
    pub repetitions: usize,
    pub candidate_count: usize,
    pub true_name_rank: usize,
    pub per_occurrence_ranks: Vec<usize>,
}

impl RankSummary {
    fn new(r: &RankResult, repetitions: usize) -> Self {
        RankSummary {
            report_id: r.report_id.clone(),
            true_name: r.true_name.clone(),
            repetitions,
            candidate_count: r.candidate_count,
            true_name_rank: r.true_name_rank,
            per_occurrence_ranks: r.per_occurrence_ranks.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct BruteSummary {
    pub min_repetitions: usize,
    /// True when too few reports reached `min_repetitions` and the most
    /// repetitive ones were used instead.
    pub fallback: bool,
    pub heads: IndexMap<String, Vec<RankSummary>>,
}

fn brute(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let train = working_corpus(ctx)?.subset(Split::Train);
    let dict = brute_dictionary(ctx)?;
    let k = ctx.cfg.repetition_reports;
    let (reports, fallback) =
        match select_repetition_reports(&train, ctx.cfg.repetition_min, k, derive_seed(ctx.seed, "reports")) {
            Ok(r) => (r, false),
            Err(deid_audit::Error::NotEnoughReports { found, .. }) => {
                log::warn!("only {found} reports repeat a surname {} times", ctx.cfg.repetition_min);
                (top_repetition_reports(&train, NameKind::Surname, k), true)
            }
            Err(e) => return Err(e.into()),
        };
    if reports.is_empty() {
        bail!("no train report mentions a patient surname");
    }
    let mut heads = IndexMap::new();
    for crf in ctx.cfg.crf.heads() {
        let model = load_model(ctx, crf)?;
        let tag = head_tag(crf);
        let mut rows = Vec::new();
        for r in &reports {
            let result = brute_force_rank(&model, r, NameKind::Surname, &dict, ctx.cfg.aggregation)?;
            w.with(format!("brute/{tag}_{}.csv", file_safe(&r.id)), |out| Ok(result.write_csv(out)?))?;
            rows.push(RankSummary::new(&result, repetition_count(r, NameKind::Surname)));
        }
        heads.insert(tag.to_string(), rows);
    }
    w.json("brute.json", &BruteSummary { min_repetitions: ctx.cfg.repetition_min, fallback, heads })
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct MiaSummary {
    pub num_shadow: usize,
    pub head: String,
    pub shadow_epochs: usize,
    pub target_epochs: usize,
    pub candidates: usize,
    pub mean_rank: Option<f64>,
    pub report: MiaReport,
}

fn mia(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let cfg = ctx.cfg;
    let corpus = working_corpus(ctx)?;
    let dict = read_dictionary(&ctx.out.join("dict"), "")?;
    let outside = read_dictionary(&ctx.out.join("dict"), "outside_")?;
    let inventory = build_name_inventory(&corpus);
    let (plan, corpora) =
        build_shadow_plan(&corpus, &inventory, &outside, &dict, cfg.num_shadow, derive_seed(ctx.seed, "plan"))?;
    for (k, c) in corpora.iter().enumerate() {
        w.with(format!("shadows/shadow_{k:02}.conll"), |out| Ok(write_conll(c, out)?))?;
    }
    let shadow_epochs = cfg.shadow_epochs.unwrap_or(cfg.epochs(cfg.mia_crf));
    let models = train_shadow_models(
        &plan,
        &corpora,
        &embedding(ctx)?,
        &tagger_config(cfg, cfg.mia_crf, 0),
        &train_config(cfg, shadow_epochs, 0),
        cfg.mia_target_epochs,
    )?;
    let dict_names = brute_dictionary(ctx)?;
    let mia_cfg = MiaConfig {
        num_shadow: cfg.num_shadow,
        kind: NameKind::Surname,
        reports: cfg.repetition_reports,
        aggregation: cfg.aggregation,
        attack: AttackConfig {
            hidden: cfg.attack_hidden,
            epochs: cfg.attack_epochs,
            learning_rate: cfg.attack_learning_rate,
            seed: 0,
        },
        target_epochs: cfg.mia_target_epochs,
        seed: derive_seed(ctx.seed, "attack"),
    };
    let report = mia_attack_target(&plan, &models, &corpora, &dict_names, &mia_cfg)?;
    for r in &report.ranks {
        w.with(format!("mia/ranks_{}.csv", file_safe(&r.report_id)), |out| Ok(r.write_csv(out)?))?;
    }
    let summary = MiaSummary {
        num_shadow: cfg.num_shadow,
        head: head_tag(cfg.mia_crf).to_string(),
        shadow_epochs,
        target_epochs: cfg.mia_target_epochs.unwrap_or(shadow_epochs),
        candidates: dict_names.len(),
        mean_rank: report.mean_rank(),
        report,
    };
    w.json("mia_report.json", &summary)
}

fn report_stage(ctx: &Ctx, w: &mut Writer) -> Result<()> {
    let inputs = report::Inputs {
        corpus: read_json(&ctx.out.join("corpus_stats.json"))?,
        metrics: read_json(&ctx.out.join("metrics.json"))?,
        ks: read_json(&ctx.out.join("ks_results.json"))?,
        cutoff: read_json(&ctx.out.join("cutoff.json"))?,
        brute: read_json(&ctx.out.join("brute.json"))?,
        mia: read_json(&ctx.out.join("mia_report.json"))?,
    };
    w.text("report.md", &report::render(ctx.cfg, &inputs))
}
