//! Markdown summary of a finished bundle.

use std::fmt::Write;

use deid_audit::stats::{format_d, format_p, KsResult, KsTable};
use deid_audit::tagger::Metrics;
use indexmap::IndexMap;

use crate::config::RunConfig;
use crate::stages::{BruteSummary, CorpusStats, CutoffEntry, HeadMetrics, KsResults, MiaSummary};

pub(crate) struct Inputs {
    pub corpus: CorpusStats,
    pub metrics: IndexMap<String, HeadMetrics>,
    pub ks: KsResults,
    pub cutoff: IndexMap<String, Vec<CutoffEntry>>,
    pub brute: BruteSummary,
    pub mia: MiaSummary,
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn metric_cells(m: Option<&Metrics>) -> String {
    match m {
        Some(m) => format!("{} | {} | {}", pct(m.precision), pct(m.recall), pct(m.f1)),
        None => "NA | NA | NA".to_string(),
    }
}

fn ks_cells(r: &Option<KsResult>) -> String {
    match r {
        Some(r) => format!("{} | {}", format_d(r.d), format_p(r.p_asymptotic)),
        None => "NA | NA".to_string(),
    }
}

fn ks_markdown(out: &mut String, table: &KsTable) {
    out.push_str("| | no-CRF D | no-CRF p | CRF D | CRF p |\n|---|---|---|---|---|\n");
    for row in &table.rows {
        let _ = writeln!(out, "| {} | {} | {} |", row.label, ks_cells(&row.no_crf), ks_cells(&row.crf));
    }
}

pub(crate) fn render(cfg: &RunConfig, x: &Inputs) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Memorization audit report\n");
    let _ = writeln!(s, "Master seed {}, config hash `{}`.\n", cfg.seed, cfg.hash());

    let _ = writeln!(s, "## Corpus\n");
    let splits: Vec<String> = x.corpus.reports.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let _ = writeln!(
        s,
        "Source: {}. Reports: {}. {} sentences, {} tokens, {} surname and {} given-name mentions; \
         {} reports repeat their patient surname at least {} times.",
        x.corpus.source,
        splits.join(", "),
        x.corpus.sentences,
        x.corpus.tokens,
        x.corpus.surname_occurrences,
        x.corpus.given_occurrences,
        x.corpus.reports_with_min_repetitions,
        cfg.repetition_min
    );
    if let Some(n) = cfg.overfit_dial {
        let _ = writeln!(s, "\nThe train split was truncated to its first {n} reports.");
    }

    let _ = writeln!(s, "\n## Tagger (token-level, %)\n");
    s.push_str("| head | epochs | best | train P | train R | train F1 | test P | test R | test F1 |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for (tag, m) in &x.metrics {
        let best = m.best_epoch.map_or("NA".to_string(), |e| e.to_string());
        let _ = writeln!(
            s,
            "| {tag} | {} | {best} | {} | {} |",
            m.epochs,
            metric_cells(Some(&m.train)),
            metric_cells(m.test.as_ref())
        );
    }

    let _ = writeln!(s, "\n## Two-sample KS, surname P (original vs perturbed)\n");
    ks_markdown(&mut s, &x.ks.surname);
    let _ = writeln!(s, "\nGiven names:\n");
    ks_markdown(&mut s, &x.ks.given);

    let _ = writeln!(s, "\n## Naive cut-off\n");
    s.push_str("| head | comparison | threshold | balanced accuracy | (1+D)/2 |\n|---|---|---|---|---|\n");
    for (tag, entries) in &x.cutoff {
        for e in entries {
            let _ = writeln!(
                s,
                "| {tag} | {} | {:.4} | {:.4} | {:.4} |",
                e.comparison, e.result.best_threshold, e.result.balanced_accuracy, e.ks_bound
            );
        }
    }

    let _ = writeln!(s, "\n## Brute-force cut-off\n");
    if x.brute.fallback {
        let _ = writeln!(
            s,
            "Too few reports repeat a surname {} times; the most repetitive reports were used.\n",
            x.brute.min_repetitions
        );
    }
    s.push_str("| head | report | repetitions | true-name rank | candidates |\n|---|---|---|---|---|\n");
    for (tag, rows) in &x.brute.heads {
        for r in rows {
            let _ = writeln!(
                s,
                "| {tag} | {} | {} | {} | {} |",
                r.report_id, r.repetitions, r.true_name_rank, r.candidate_count
            );
        }
    }

    let m = &x.mia;
    let _ = writeln!(s, "\n## Membership inference ({} shadows, {} head)\n", m.num_shadow, m.head);
    let _ = writeln!(s, "- attack train accuracy: {:.4}", m.report.attack_train_accuracy);
    if let Some(v) = m.report.attack_validation_accuracy {
        let _ = writeln!(s, "- attack validation accuracy: {v:.4}");
    }
    let _ = writeln!(s, "- target example accuracy: {:.4}", m.report.target_accuracy);
    let _ = writeln!(s, "- target report accuracy: {:.4}", m.report.target_report_accuracy);
    let _ = writeln!(s, "- membership examples: {}", m.report.membership_examples);
    for r in &m.report.ranks {
        let _ = writeln!(s, "- {}: true-name rank {} of {}", r.report_id, r.true_name_rank, r.candidate_count);
    }
    s
}
