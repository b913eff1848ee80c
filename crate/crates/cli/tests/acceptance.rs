//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any fails. Run alone with `cargo test -p deid-audit-cli --test acceptance`.
//! A criterion number as argument runs just that one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use deid_audit::attacks::{
    build_membership_dataset, build_shadow_plan, mia_attack_target, naive_cutoff, train_shadow_models, MiaConfig,
};
use deid_audit::corpus::{
    build_name_inventory, canonical, generate_synthetic_corpus, synth_name_dictionary, AnnotatedSentence, Corpus,
    NameDictionary, NameKind, SynthConfig, TagSet,
};
use deid_audit::embeddings::{synth_embedding, EmbeddingTable};
use deid_audit::neural::{grad_check, lstm_param_count, log_sum_exp, CrfParams, LstmParams, Mat, TrainConfig};
use deid_audit::perturb::{make_variant, outside_dictionary, revert_variant, VariantKind};
use deid_audit::seed;
use deid_audit::stats::{format_p, kolmogorov_q, ks_exact_p, ks_statistic, ks_two_sample, KsTable};
use deid_audit::tagger::{TaggerConfig, TaggerModel};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_param_count() -> Outcome {
    let mut details = Vec::new();
    for (n, m) in [(1, 1), (25, 30), (100, 150), (100, 0), (3, 7)] {
        let formula = lstm_param_count(n, m);
        let built = LstmParams::zeros(n, m).element_count();
        if formula != built {
            return Err(format!("({n},{m}): formula {formula} vs constructed {built}"));
        }
        details.push(format!("({n},{m})={formula}"));
    }
    check(lstm_param_count(100, 0) == 40400, details.join(" "))
}

fn c2_grad_check() -> Outcome {
    let tagset = TagSet::new(vec!["O".into(), "B-PATIENT-SURNAME".into(), "I-PATIENT-SURNAME".into()]).unwrap();
    let words = ["Patient", "Smith", "Jones", "was", "seen"];
    let emb = synth_embedding(words.iter().map(|w| w.to_lowercase()), 4, 5).unwrap();
    let sentence = AnnotatedSentence::from_words(&words, vec![0, 1, 2, 0, 0]).unwrap();
    let mut worst = Vec::new();
    for crf in [false, true] {
        let cfg = TaggerConfig { char_dim: 3, char_hidden: 3, token_hidden: 4, crf, seed: 9, ..Default::default() };
        let mut model = TaggerModel::new(emb.clone(), tagset.clone(), cfg).unwrap();
        if let Some(c) = &mut model.params.crf {
            let mut rng = seed::rng(4);
            c.transitions.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let r = grad_check(&mut model, &sentence, 1e-4, None).map_err(|e| e.to_string())?;
        worst.push((crf, r.max_rel_error, r.checked));
    }
    let detail = worst
        .iter()
        .map(|(crf, e, n)| format!("{}: max rel err {e:.2e} over {n} params", if *crf { "CRF" } else { "CE" }))
        .collect::<Vec<_>>()
        .join(", ");
    check(worst.iter().all(|(_, e, _)| *e < 1e-4), detail)
}

/// Independent CRF reference by listing every path. Transition layout:
/// labels `0..k`, start row `k`, stop column `k + 1`.
fn enumerate_crf(crf: &CrfParams, em: &Mat) -> (f64, Vec<usize>, Vec<Vec<f64>>) {
    let (l, k) = (em.rows(), em.cols());
    let t = &crf.transitions;
    let mut scores = Vec::new();
    let mut paths = Vec::new();
    for code in 0..k.pow(l as u32) {
        let path: Vec<usize> = (0..l).map(|i| code / k.pow(i as u32) % k).collect();
        let mut s = t.get(k, path[0]) + t.get(path[l - 1], k + 1);
        for i in 0..l {
            s += em.get(i, path[i]);
            if i > 0 {
                s += t.get(path[i - 1], path[i]);
            }
        }
        scores.push(s);
        paths.push(path);
    }
    let log_z = log_sum_exp(scores.iter().copied());
    // Lowest index wins ties in lexicographic order of (position 0, 1, ...).
    let mut best = 0;
    for i in 1..scores.len() {
        let better = scores[i] > scores[best] || (scores[i] == scores[best] && paths[i] < paths[best]);
        if better {
            best = i;
        }
    }
    let mut marg = vec![vec![0.0; k]; l];
    for (s, p) in scores.iter().zip(&paths) {
        let w = (s - log_z).exp();
        for (i, &y) in p.iter().enumerate() {
            marg[i][y] += w;
        }
    }
    (log_z, paths[best].clone(), marg)
}

fn c3_crf_oracles() -> Outcome {
    let mut rng = seed::rng(seed::derive_seed(0, "acceptance-crf"));
    let (mut z_err, mut m_err) = (0.0f64, 0.0f64);
    for trial in 0..100 {
        let l = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=4);
        let mut crf = CrfParams::new(k);
        for i in 0..k + 2 {
            for j in 0..k + 2 {
                if i != k + 1 && j != k {
                    crf.transitions.set(i, j, rng.gen_range(-2.0..2.0));
                }
            }
        }
        let data: Vec<f64> = (0..l * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let em = Mat::from_vec(l, k, data).unwrap();
        let (log_z, best, marg) = enumerate_crf(&crf, &em);
        let got_z = crf.log_partition(&em).map_err(|e| e.to_string())?;
        let got_path = crf.viterbi(&em).map_err(|e| e.to_string())?;
        let got_m = crf.marginals(&em).map_err(|e| e.to_string())?;
        z_err = z_err.max((got_z - log_z).abs());
        if got_path != best {
            return Err(format!("trial {trial} (L={l},K={k}): Viterbi {got_path:?} vs {best:?}"));
        }
        for i in 0..l {
            for y in 0..k {
                m_err = m_err.max((got_m.get(i, y) - marg[i][y]).abs());
            }
        }
    }
    check(z_err < 1e-8 && m_err < 1e-8, format!("100 instances, max |dlogZ| {z_err:.1e}, max |dmarg| {m_err:.1e}"))
}

fn brute_d(a: &[f64], b: &[f64]) -> f64 {
    let f = |xs: &[f64], x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
    a.iter().chain(b).map(|&x| (f(a, x) - f(b, x)).abs()).fold(0.0, f64::max)
}

fn c4_ks() -> Outcome {
    let mut rng = seed::rng(seed::derive_seed(0, "acceptance-ks"));
    let mut gap = 0.0f64;
    for _ in 0..200 {
        let a: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() + 0.2).collect();
        let r = ks_two_sample(&a, &b).map_err(|e| e.to_string())?;
        let exact = ks_exact_p(&a, &b).map_err(|e| e.to_string())?;
        gap = gap.max((exact - r.p_asymptotic).abs());
    }
    for trial in 0..200 {
        let (m, n) = (rng.gen_range(1..40), rng.gen_range(1..40));
        // Coarse grid values force ties.
        let a: Vec<f64> = (0..m).map(|_| (rng.gen_range(0..20) as f64) / 4.0).collect();
        let b: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..20) as f64) / 4.0).collect();
        let d = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
        if d != brute_d(&a, &b) {
            return Err(format!("trial {trial}: D {d} vs brute {}", brute_d(&a, &b)));
        }
    }
    let lambda = 0.16 * (770.0f64 * 770.0 / 1540.0).sqrt();
    let p = kolmogorov_q(lambda);
    check(
        gap < 0.05 && (3e-9..=2e-8).contains(&p),
        format!("(a) max |exact-asym| {gap:.3} (b) 200 D exact (c) p(D=0.16,770,770) = {p:.3e}"),
    )
}

fn c5_cutoff_identity() -> Outcome {
    let mut rng = seed::rng(seed::derive_seed(0, "acceptance-cutoff"));
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let (m, n) = (rng.gen_range(1..60), rng.gen_range(1..60));
        let shift = rng.gen_range(-1.0..1.0);
        let a: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() + shift).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let d = ks_statistic(&a, &b).map_err(|e| e.to_string())?;
        let acc = naive_cutoff(&a, &b).map_err(|e| e.to_string())?.balanced_accuracy;
        let dev = (acc - 0.5 * (1.0 + d)).abs();
        if dev > 1.0 / (2.0 * m.min(n) as f64) {
            return Err(format!("trial {trial}: accuracy {acc} vs (1+D)/2 = {}", 0.5 * (1.0 + d)));
        }
        worst = worst.max(dev);
    }
    Ok(format!("100 pairs, max deviation {worst:.1e}"))
}

/// Synthetic corpus, dictionary and embedding shared by the training-based
/// criteria.
struct Fixture {
    corpus: Corpus,
    dict: NameDictionary,
    embedding: EmbeddingTable,
}

fn fixture(reports: usize, dict_size: usize, dim: usize, s: u64) -> Fixture {
    let dict = synth_name_dictionary(dict_size, dict_size / 2, dict_size / 2, s).unwrap();
    let cfg = SynthConfig { n_reports: reports, seed: s, ..Default::default() };
    let (corpus, _) = generate_synthetic_corpus(&cfg, &dict).unwrap();
    let mut vocab = corpus.vocabulary();
    vocab.extend(dict.surnames.iter().cloned());
    vocab.extend(dict.given_all().cloned());
    let embedding = synth_embedding(&vocab, dim, s).unwrap();
    Fixture { corpus, dict, embedding }
}

/// Trains both heads through the binary with the built-in defaults: a
/// 60-report synthetic corpus and 88 / 95 epochs.
fn c6_training(out: &Path) -> Outcome {
    let status = Command::new(env!("CARGO_BIN_EXE_deid-audit"))
        .args(["--out", out.to_str().unwrap(), "--seed", "0", "train"])
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("train stage exited with {status}"));
    }
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("metrics.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for head in ["nocrf", "crf"] {
        let m = &metrics[head];
        let (train, test) = (m["train"]["precision"].as_f64(), m["test"]["precision"].as_f64());
        let (Some(train), Some(test)) = (train, test) else {
            return Err(format!("{head}: metrics missing"));
        };
        ok &= train >= 0.95 && train >= test;
        lines.push(format!("{head} ({} epochs): train P {train:.4}, test P {test:.4}", m["epochs"]));
    }
    check(ok, lines.join("; "))
}

fn c7_perturbation() -> Outcome {
    let f = fixture(60, 2000, 4, 13);
    let corpus = &f.corpus;
    let inventory = build_name_inventory(corpus);
    let outside = outside_dictionary(&f.dict, corpus);
    let vocab = corpus.vocabulary();
    let mut changed = 0;
    for kind in VariantKind::PERTURBED {
        let (v, plan) = make_variant(corpus, kind, &inventory, &outside, &f.dict, 21).map_err(|e| e.to_string())?;
        if v.reports.len() != corpus.reports.len() {
            return Err(format!("{kind}: report count changed"));
        }
        for (a, b) in corpus.reports.iter().zip(&v.reports) {
            let same_shape = a.id == b.id
                && a.split == b.split
                && a.surname_positions() == b.surname_positions()
                && a.given_positions() == b.given_positions()
                && a.sentences().len() == b.sentences().len();
            if !same_shape {
                return Err(format!("{kind}: report {} changed structure", a.id));
            }
            for (sa, sb) in a.sentences().iter().zip(b.sentences()) {
                if sa.tags != sb.tags || sa.tokens.len() != sb.tokens.len() {
                    return Err(format!("{kind}: tags or lengths changed in {}", a.id));
                }
                for (t, (ta, tb)) in sa.tokens.iter().zip(&sb.tokens).enumerate() {
                    if ta.text == tb.text {
                        continue;
                    }
                    changed += 1;
                    let class = match v.tagset.category(sa.tags[t]) {
                        Some(c) if c == NameKind::Surname.category() => NameKind::Surname,
                        Some(c) if c == NameKind::Given.category() => NameKind::Given,
                        _ => return Err(format!("{kind}: non-name token {:?} changed", ta.text)),
                    };
                    if !kind.replaces(class) {
                        return Err(format!("{kind}: {class:?} token {:?} changed", ta.text));
                    }
                    let name = canonical(&tb.text);
                    let inside = inventory.names(class).contains(&name);
                    let law = if kind.is_inside() { inside } else { !inventory.contains(&name) && !vocab.contains(&name) };
                    if !law {
                        return Err(format!("{kind}: replacement {name:?} breaks inside/outside disjointness"));
                    }
                }
            }
        }
        if &revert_variant(&v, &plan).map_err(|e| e.to_string())? != corpus {
            return Err(format!("{kind}: substitute-back identity fails"));
        }
    }
    Ok(format!("6 variants over 60 reports, {changed} substituted tokens checked"))
}

struct SeedResult {
    regular_rank: f64,
    overfit_rank: f64,
    null_accuracy: f64,
    balanced: bool,
}

fn mia_seed(s: u64) -> Result<SeedResult, String> {
    let err = |e: deid_audit::Error| e.to_string();
    let f = fixture(30, 1200, 16, s);
    let tcfg = TaggerConfig { char_dim: 8, char_hidden: 8, token_hidden: 16, crf: false, seed: s, ..Default::default() };
    let mut out = SeedResult { regular_rank: 0.0, overfit_rank: 0.0, null_accuracy: 0.0, balanced: true };
    for overfit in [false, true] {
        let corpus = if overfit { f.corpus.truncate_train(5) } else { f.corpus.clone() };
        let inventory = build_name_inventory(&corpus);
        let outside = outside_dictionary(&f.dict, &corpus);
        let (plan, corpora) = build_shadow_plan(&corpus, &inventory, &outside, &f.dict, 5, s).map_err(err)?;
        let trc = TrainConfig { max_epochs: if overfit { 300 } else { 30 }, seed: s, ..Default::default() };
        let mut models = train_shadow_models(&plan, &corpora, &f.embedding, &tcfg, &trc, None).map_err(err)?;
        let candidates: Vec<String> = outside.surnames.iter().take(200).cloned().collect();
        if candidates.len() < 200 {
            return Err(format!("seed {s}: only {} candidates", candidates.len()));
        }
        let cfg = MiaConfig { num_shadow: 5, seed: s, ..Default::default() };
        let dataset = build_membership_dataset(&plan, &models, &corpora, NameKind::Surname, s).map_err(err)?;
        let members = dataset.iter().filter(|e| e.member).count();
        out.balanced &= !dataset.is_empty() && 2 * members == dataset.len();
        let report = mia_attack_target(&plan, &models, &corpora, &candidates, &cfg).map_err(err)?;
        let rank = report.mean_rank().ok_or("no ranked reports")?;
        if overfit {
            out.overfit_rank = rank;
        } else {
            out.regular_rank = rank;
            // Null control: same shadows, target replaced by its untrained init.
            let init = TaggerConfig { seed: plan.seeds[plan.target()], ..tcfg.clone() };
            models[plan.target()] =
                TaggerModel::new(f.embedding.clone(), corpora[0].tagset.clone(), init).map_err(err)?;
            out.null_accuracy = mia_attack_target(&plan, &models, &corpora, &candidates, &cfg).map_err(err)?.target_accuracy;
        }
    }
    Ok(out)
}

fn c8_mia_controls() -> Outcome {
    let results: Vec<SeedResult> = (0..10).map(mia_seed).collect::<Result<_, _>>()?;
    let null_mean = results.iter().map(|r| r.null_accuracy).sum::<f64>() / results.len() as f64;
    let wins = results.iter().filter(|r| r.overfit_rank < r.regular_rank).count();
    let balanced = results.iter().all(|r| r.balanced);
    let ranks: Vec<String> =
        results.iter().map(|r| format!("{:.1}/{:.1}", r.overfit_rank, r.regular_rank)).collect();
    check(
        (null_mean - 0.5).abs() <= 0.1 && wins >= 8 && balanced,
        format!(
            "(a) null accuracy {null_mean:.3} (b) overfit beats regular in {wins}/10 [{}] (c) balanced: {balanced}",
            ranks.join(" ")
        ),
    )
}

fn bundle(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    files.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
    }
    files
}

fn minimal_config() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/minimal.toml")
}

fn run_all(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_deid-audit"))
        .args(["--config", minimal_config().to_str().unwrap(), "--out", out.to_str().unwrap(), "all"])
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), format!("exit {status}")).map(|_| ())
}

fn c9_determinism(a: &Path, b: &Path) -> Outcome {
    run_all(a)?;
    run_all(b)?;
    let (fa, fb) = (bundle(a), bundle(b));
    if fa.keys().ne(fb.keys()) {
        return Err("the two bundles contain different files".into());
    }
    let differing: Vec<&String> = fa.iter().filter(|(k, v)| fb[*k] != **v).map(|(k, _)| k).collect();
    check(
        differing.is_empty(),
        format!("{} files compared, {} differ {:?}", fa.len(), differing.len(), differing),
    )
}

fn c10_report_format(bundle: &Path) -> Outcome {
    let text = fs::read_to_string(bundle.join("ks_table.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != KsTable::HEADER.join(",") {
        return Err(format!("header {header:?}"));
    }
    // One significant decimal in scientific notation, e.g. `1.6e-1`.
    let d_cell = |c: &str| {
        c.split_once('e').is_some_and(|(m, e)| {
            m.len() == 3 && m.as_bytes()[1] == b'.' && m.parse::<f64>().is_ok() && e.parse::<i32>().is_ok()
        })
    };
    let p_cell = |c: &str| c == "<e-9" || d_cell(c);
    let mut labels = Vec::new();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(format!("row {line:?} has {} cells", cells.len()));
        }
        if !(d_cell(cells[1]) && p_cell(cells[2]) && d_cell(cells[3]) && p_cell(cells[4])) {
            return Err(format!("badly formatted row {line:?}"));
        }
        labels.push(cells[0].to_string());
    }
    if labels != ["SN1", "SN2", "SN1*", "SN2*"] {
        return Err(format!("rows {labels:?}"));
    }
    if format_p(6.0e-9) != "6.0e-9" || format_p(5.0e-10) != "<e-9" {
        return Err("p clamping".into());
    }
    let mut curves = 0;
    for head in ["nocrf", "crf"] {
        for set in ["ORIG", "SN1", "SN2", "SNGN1", "SNGN2"] {
            for kind in ["hist", "ecdf", "kde"] {
                let p = bundle.join(format!("curves/{head}_{set}_{kind}.csv"));
                let body = fs::read_to_string(&p).map_err(|_| format!("missing {}", p.display()))?;
                if !body.starts_with("x,value\n") || body.lines().count() < 2 {
                    return Err(format!("malformed {}", p.display()));
                }
                curves += 1;
            }
        }
    }
    Ok(format!("4 rows x (no-CRF, CRF) x (D, p); {curves} curve files"))
}

fn main() -> ExitCode {
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let tmp = tempfile::tempdir().expect("temp dir");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "LSTM parameter count", Box::new(c1_param_count)),
        (2, "gradient check", Box::new(c2_grad_check)),
        (3, "CRF enumeration oracles", Box::new(c3_crf_oracles)),
        (4, "KS correctness", Box::new(c4_ks)),
        (5, "threshold/KS identity", Box::new(c5_cutoff_identity)),
        (6, "desk-scale training", Box::new(|| c6_training(&tmp.path().join("c6")))),
        (7, "perturbation laws", Box::new(c7_perturbation)),
        (8, "MIA controls", Box::new(c8_mia_controls)),
        (9, "end-to-end determinism", Box::new(|| c9_determinism(&a, &b))),
        (10, "report format", Box::new(|| {
            if !a.join("ks_table.csv").exists() {
                run_all(&a)?;
            }
            c10_report_format(&a)
        })),
    ];
    let mut failed = 0;
    for (n, name, f) in &criteria {
        if only.is_some_and(|o| o != *n) {
            continue;
        }
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS [{n}] {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL [{n}] {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
