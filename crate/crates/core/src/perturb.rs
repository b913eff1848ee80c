//! Name-substituted corpus variants.
//!
//! Inside variants (`*1`) replace patient names with other names found in the
//! corpus; outside variants (`*2`) draw replacements from a dictionary that
//! shares no name with the corpus. Only token surfaces at patient-name
//! positions ever change, so tags, token counts and every other token stay
//! identical to the source corpus.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use rand::seq::{index, SliceRandom};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    canonical, AnnotatedSentence, Corpus, Gender, NameDictionary, NameInventory, NameKind,
    Position, Report,
};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantKind {
    #[serde(rename = "ORIG")]
    Orig,
    #[serde(rename = "SN1")]
    Sn1,
    #[serde(rename = "GN1")]
    Gn1,
    #[serde(rename = "SNGN1")]
    Sngn1,
    #[serde(rename = "SN2")]
    Sn2,
    #[serde(rename = "GN2")]
    Gn2,
    #[serde(rename = "SNGN2")]
    Sngn2,
}

impl VariantKind {
    pub const ALL: [VariantKind; 7] = [
        VariantKind::Orig,
        VariantKind::Sn1,
        VariantKind::Gn1,
        VariantKind::Sngn1,
        VariantKind::Sn2,
        VariantKind::Gn2,
        VariantKind::Sngn2,
    ];

    /// Every kind except [`VariantKind::Orig`].
    pub const PERTURBED: [VariantKind; 6] = [
        VariantKind::Sn1,
        VariantKind::Gn1,
        VariantKind::Sngn1,
        VariantKind::Sn2,
        VariantKind::Gn2,
        VariantKind::Sngn2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            VariantKind::Orig => "ORIG",
            VariantKind::Sn1 => "SN1",
            VariantKind::Gn1 => "GN1",
            VariantKind::Sngn1 => "SNGN1",
            VariantKind::Sn2 => "SN2",
            VariantKind::Gn2 => "GN2",
            VariantKind::Sngn2 => "SNGN2",
        }
    }

    pub fn is_inside(self) -> bool {
        matches!(self, VariantKind::Sn1 | VariantKind::Gn1 | VariantKind::Sngn1)
    }

    pub fn is_outside(self) -> bool {
        matches!(self, VariantKind::Sn2 | VariantKind::Gn2 | VariantKind::Sngn2)
    }

    pub fn replaces(self, kind: NameKind) -> bool {
        match kind {
            NameKind::Surname => matches!(
                self,
                VariantKind::Sn1 | VariantKind::Sngn1 | VariantKind::Sn2 | VariantKind::Sngn2
            ),
            NameKind::Given => matches!(
                self,
                VariantKind::Gn1 | VariantKind::Sngn1 | VariantKind::Gn2 | VariantKind::Sngn2
            ),
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant kind {s:?}")))
    }
}

/// Applies the case pattern of `original` to `replacement`: all-caps stays
/// all-caps, all-lowercase stays lowercase, anything else becomes title case.
pub fn transfer_case(original: &str, replacement: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    let lower = replacement.to_lowercase();
    if letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase()) {
        replacement.to_uppercase()
    } else if !letters.is_empty() && letters.iter().all(|c| c.is_lowercase()) {
        lower
    } else {
        let mut chars = lower.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    }
}

/// Replacement maps of one report, keyed by canonical original name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPlan {
    pub report_id: String,
    pub surnames: IndexMap<String, String>,
    pub given: IndexMap<String, String>,
}

impl ReportPlan {
    pub fn map(&self, kind: NameKind) -> &IndexMap<String, String> {
        match kind {
            NameKind::Surname => &self.surnames,
            NameKind::Given => &self.given,
        }
    }

    fn map_mut(&mut self, kind: NameKind) -> &mut IndexMap<String, String> {
        match kind {
            NameKind::Surname => &mut self.surnames,
            NameKind::Given => &mut self.given,
        }
    }
}

/// What [`make_variant`] changed, with enough detail to undo it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementPlan {
    pub variant: VariantKind,
    pub seed: u64,
    pub reports: Vec<ReportPlan>,
    /// `(report index, position, original surface)` for every changed token.
    pub originals: Vec<(usize, Position, String)>,
}

impl ReplacementPlan {
    pub fn replacement_names(&self) -> IndexSet<&str> {
        self.reports
            .iter()
            .flat_map(|r| r.surnames.values().chain(r.given.values()))
            .map(String::as_str)
            .collect()
    }

    /// Key-value sidecar: a header of `key=value` lines, then one
    /// `map<TAB>report<TAB>kind<TAB>original<TAB>replacement` line per entry.
    pub fn write_sidecar<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "variant={}", self.variant)?;
        writeln!(out, "seed={}", self.seed)?;
        writeln!(out, "reports={}", self.reports.len())?;
        for r in &self.reports {
            for (kind, tag) in [(NameKind::Surname, "surname"), (NameKind::Given, "given")] {
                for (from, to) in r.map(kind) {
                    writeln!(out, "map\t{}\t{tag}\t{from}\t{to}", r.report_id)?;
                }
            }
        }
        Ok(())
    }

    /// Reads the variant, seed and maps back from a sidecar. The per-token
    /// originals are not part of the sidecar and come back empty.
    pub fn read_sidecar<R: BufRead>(reader: R) -> Result<ReplacementPlan> {
        let mut variant = None;
        let mut seed_value = None;
        let mut reports: IndexMap<String, ReportPlan> = IndexMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let bad = |message: String| Error::Parse { line: i + 1, message };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("map\t") {
                let f: Vec<&str> = rest.split('\t').collect();
                if f.len() != 4 {
                    return Err(bad(format!("map line has {} fields, expected 4", f.len())));
                }
                let kind = match f[1] {
                    "surname" => NameKind::Surname,
                    "given" => NameKind::Given,
                    other => return Err(bad(format!("unknown name kind {other:?}"))),
                };
                let entry = reports.entry(f[0].to_string()).or_insert_with(|| ReportPlan {
                    report_id: f[0].to_string(),
                    ..Default::default()
                });
                entry.map_mut(kind).insert(f[2].to_string(), f[3].to_string());
            } else if let Some((key, value)) = line.split_once('=') {
                match key {
                    "variant" => variant = Some(value.parse()?),
                    "seed" => {
                        seed_value = Some(value.parse().map_err(|e| bad(format!("seed: {e}")))?)
                    }
                    _ => {}
                }
            } else {
                return Err(bad(format!("unrecognized line {line:?}")));
            }
        }
        Ok(ReplacementPlan {
            variant: variant.ok_or(Error::Empty("sidecar variant"))?,
            seed: seed_value.ok_or(Error::Empty("sidecar seed"))?,
            reports: reports.into_values().collect(),
            originals: Vec::new(),
        })
    }
}

fn pool_for<'a>(
    kind: NameKind,
    variant: VariantKind,
    original: &str,
    inventory: &'a NameInventory,
    outside: &'a NameDictionary,
    genders: &NameDictionary,
) -> Vec<&'a String> {
    let gender = match kind {
        NameKind::Given => genders.gender_of(original),
        NameKind::Surname => None,
    };
    let by_gender = |names: Vec<&'a String>, g: Option<Gender>| -> Vec<&'a String> {
        match g {
            Some(g) => {
                let same: Vec<&String> =
                    names.iter().copied().filter(|n| genders.gender_of(n) == Some(g)).collect();
                if same.is_empty() {
                    names
                } else {
                    same
                }
            }
            None => names,
        }
    };
    if variant.is_inside() {
        by_gender(inventory.names(kind).iter().collect(), gender)
    } else {
        match (kind, gender) {
            (NameKind::Surname, _) => outside.surnames.iter().collect(),
            (NameKind::Given, Some(g)) if !outside.given(g).is_empty() => {
                outside.given(g).iter().collect()
            }
            (NameKind::Given, _) => outside.given_all().collect(),
        }
    }
}

fn plan_report(
    report: &Report,
    report_index: usize,
    variant: VariantKind,
    inventory: &NameInventory,
    outside: &NameDictionary,
    genders: &NameDictionary,
    rng: &mut ChaCha8Rng,
) -> Result<ReportPlan> {
    let mut plan = ReportPlan { report_id: report.id.clone(), ..Default::default() };
    for kind in [NameKind::Surname, NameKind::Given] {
        if !variant.replaces(kind) {
            continue;
        }
        let own: IndexSet<String> = report.name_counts(kind).into_iter().map(|(n, _)| n).collect();
        let mut used: IndexSet<String> = IndexSet::new();
        for original in &own {
            let candidates: Vec<&String> =
                pool_for(kind, variant, original, inventory, outside, genders)
                    .into_iter()
                    .filter(|n| !own.contains(*n) && !used.contains(*n))
                    .collect();
            let choice = candidates.choose(rng).ok_or_else(|| {
                Error::DictionaryExhausted(format!(
                    "no {} replacement left for {original:?} in report {} (index {report_index})",
                    kind.category(),
                    report.id
                ))
            })?;
            used.insert((*choice).clone());
            plan.map_mut(kind).insert(original.clone(), (*choice).clone());
        }
    }
    Ok(plan)
}

/// Builds a perturbed copy of `corpus` together with its replacement plan.
///
/// Each report gets its own consistent mapping: every occurrence of an
/// original name in the report receives the same replacement, and distinct
/// names in a report receive distinct replacements. Given names keep the
/// gender `genders` assigns to the original when the pool allows it.
pub fn make_variant(
    corpus: &Corpus,
    variant: VariantKind,
    inventory: &NameInventory,
    outside: &NameDictionary,
    genders: &NameDictionary,
    seed_value: u64,
) -> Result<(Corpus, ReplacementPlan)> {
    if variant == VariantKind::Orig {
        return Err(Error::Config("ORIG is not a perturbation".into()));
    }
    if variant.is_outside() {
        if let Some(clash) = inventory
            .surnames
            .iter()
            .chain(inventory.given.iter())
            .find(|n| outside.contains(n))
        {
            return Err(Error::Config(format!("outside dictionary contains corpus name {clash:?}")));
        }
    }
    let mut out = corpus.clone();
    let mut plan = ReplacementPlan {
        variant,
        seed: seed_value,
        reports: Vec::with_capacity(corpus.reports.len()),
        originals: Vec::new(),
    };
    for (ri, report) in out.reports.iter_mut().enumerate() {
        let mut rng = seed::rng(seed::derive_indexed(seed_value, variant.label(), ri as u64));
        let rp = plan_report(report, ri, variant, inventory, outside, genders, &mut rng)?;
        for kind in [NameKind::Surname, NameKind::Given] {
            for &pos in corpus.reports[ri].positions(kind) {
                let surface = report.token(pos).expect("indexed position").text.clone();
                if let Some(to) = rp.map(kind).get(&canonical(&surface)) {
                    report.set_token_text(pos, &transfer_case(&surface, to));
                    plan.originals.push((ri, pos, surface));
                }
            }
        }
        plan.reports.push(rp);
    }
    Ok((out, plan))
}

/// Restores the original surfaces recorded in `plan`.
pub fn revert_variant(perturbed: &Corpus, plan: &ReplacementPlan) -> Result<Corpus> {
    let mut out = perturbed.clone();
    for (ri, pos, surface) in &plan.originals {
        let report = out.reports.get_mut(*ri).ok_or_else(|| Error::PositionOutOfRange {
            report: format!("#{ri}"),
            sentence: pos.sentence,
            token: pos.token,
        })?;
        if report.token(*pos).is_none() {
            return Err(Error::PositionOutOfRange {
                report: report.id.clone(),
                sentence: pos.sentence,
                token: pos.token,
            });
        }
        report.set_token_text(*pos, surface);
    }
    Ok(out)
}

/// `full` minus every token string of `corpus`, so it shares no name with it.
pub fn outside_dictionary(full: &NameDictionary, corpus: &Corpus) -> NameDictionary {
    let vocab = corpus.vocabulary();
    full.excluding(|n| vocab.contains(n))
}

/// Splits every list of `dict` into `parts` disjoint, near-equal shares after
/// a seeded shuffle.
pub fn partition_dictionary(dict: &NameDictionary, parts: usize, seed_value: u64) -> Vec<NameDictionary> {
    let mut out = vec![NameDictionary::default(); parts];
    if parts == 0 {
        return out;
    }
    let lists: [(&IndexSet<String>, fn(&mut NameDictionary) -> &mut IndexSet<String>); 3] = [
        (&dict.surnames, |d| &mut d.surnames),
        (&dict.given_male, |d| &mut d.given_male),
        (&dict.given_female, |d| &mut d.given_female),
    ];
    for (li, (list, slot)) in lists.into_iter().enumerate() {
        let mut names: Vec<&String> = list.iter().collect();
        names.shuffle(&mut seed::rng(seed::derive_indexed(seed_value, "partition", li as u64)));
        for (i, name) in names.into_iter().enumerate() {
            slot(&mut out[i % parts]).insert(name.clone());
        }
    }
    out
}

/// One brute-force candidate: the report's name-bearing sentences with every
/// occurrence of the name class replaced by `candidate`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub candidate: String,
    pub sentences: Vec<AnnotatedSentence>,
    /// Name positions, with sentence indices into `sentences`.
    pub positions: Vec<Position>,
}

/// Streams one [`Substitution`] per dictionary name, in dictionary order.
pub fn brute_force_substitutions<'a>(
    report: &'a Report,
    kind: NameKind,
    dict: &'a [String],
) -> Result<impl Iterator<Item = Substitution> + 'a> {
    if dict.is_empty() {
        return Err(Error::Empty("brute-force dictionary"));
    }
    let positions = report.positions(kind);
    if positions.is_empty() {
        return Err(Error::Empty("report name positions"));
    }
    let mut bearing: Vec<usize> = positions.iter().map(|p| p.sentence).collect();
    bearing.dedup();
    let local: Vec<Position> = positions
        .iter()
        .map(|p| Position {
            sentence: bearing.binary_search(&p.sentence).expect("sorted positions"),
            token: p.token,
        })
        .collect();
    let base: Vec<AnnotatedSentence> =
        bearing.iter().map(|&s| report.sentences()[s].clone()).collect();
    Ok(dict.iter().map(move |candidate| {
        let mut sentences = base.clone();
        for p in &local {
            let s = &mut sentences[p.sentence];
            let surface = transfer_case(&s.tokens[p.token].text, candidate);
            s.set_token_text(p.token, &surface);
        }
        Substitution { candidate: candidate.clone(), sentences, positions: local.clone() }
    }))
}

/// Number of occurrences of a report's most frequent name of `kind`.
pub fn repetition_count(report: &Report, kind: NameKind) -> usize {
    report.name_counts(kind).first().map_or(0, |(_, c)| *c)
}

/// Seeded uniform sample of `k` reports whose primary surname occurs at least
/// `min_count` times, returned in corpus order.
pub fn select_repetition_reports(
    corpus: &Corpus,
    min_count: usize,
    k: usize,
    seed_value: u64,
) -> Result<Vec<&Report>> {
    let qualifying: Vec<&Report> = corpus
        .reports
        .iter()
        .filter(|r| repetition_count(r, NameKind::Surname) >= min_count)
        .collect();
    if qualifying.len() < k {
        return Err(Error::NotEnoughReports { needed: k, found: qualifying.len() });
    }
    let mut picked = index::sample(&mut seed::rng(seed_value), qualifying.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| qualifying[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        build_name_inventory, generate_synthetic_corpus, synth_name_dictionary, SynthConfig,
    };
    use proptest::prelude::*;

    fn fixture() -> (Corpus, NameDictionary) {
        let dict = synth_name_dictionary(200, 120, 120, 3).unwrap();
        let cfg = SynthConfig { n_reports: 12, ..Default::default() };
        let (corpus, _) = generate_synthetic_corpus(&cfg, &dict).unwrap();
        (corpus, dict)
    }

    #[test]
    fn case_transfer_rules() {
        assert_eq!(transfer_case("SMITH", "johnson"), "JOHNSON");
        assert_eq!(transfer_case("Smith", "johnson"), "Johnson");
        assert_eq!(transfer_case("smith", "Johnson"), "johnson");
        assert_eq!(transfer_case("McSmith", "o'neil"), "O'neil");
        assert_eq!(transfer_case("J", "jo"), "Jo");
    }

    #[test]
    fn variant_labels_round_trip() {
        for k in VariantKind::ALL {
            assert_eq!(k.label().parse::<VariantKind>().unwrap(), k);
        }
        assert!("SN3".parse::<VariantKind>().is_err());
    }

    #[test]
    fn inside_variant_uses_corpus_names_only() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let (v, plan) = make_variant(&corpus, VariantKind::Sn1, &inv, &dict, &dict, 1).unwrap();
        for (orig, new) in corpus.reports.iter().zip(&v.reports) {
            let before = orig.primary_name(NameKind::Surname).unwrap();
            for &p in new.surname_positions() {
                let name = canonical(&new.token(p).unwrap().text);
                assert!(inv.surnames.contains(&name));
                assert_ne!(name, before);
            }
            assert_eq!(orig.given_positions().len(), new.given_positions().len());
            for &p in new.given_positions() {
                assert_eq!(orig.token(p).unwrap().text, new.token(p).unwrap().text);
            }
        }
        assert!(!plan.originals.is_empty());
    }

    #[test]
    fn outside_variant_leaves_inventory() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let outside = outside_dictionary(&dict, &corpus);
        let (v, _) = make_variant(&corpus, VariantKind::Sngn2, &inv, &outside, &dict, 2).unwrap();
        for r in &v.reports {
            for &p in r.surname_positions().iter().chain(r.given_positions()) {
                let name = canonical(&r.token(p).unwrap().text);
                assert!(!inv.contains(&name));
                assert!(outside.contains(&name));
            }
        }
        assert!(make_variant(&corpus, VariantKind::Sn2, &inv, &dict, &dict, 2).is_err());
    }

    #[test]
    fn given_names_keep_gender() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let outside = outside_dictionary(&dict, &corpus);
        let (v, _) = make_variant(&corpus, VariantKind::Gn2, &inv, &outside, &dict, 4).unwrap();
        for (a, b) in corpus.reports.iter().zip(&v.reports) {
            for &p in a.given_positions() {
                assert_eq!(
                    dict.gender_of(&a.token(p).unwrap().text),
                    dict.gender_of(&b.token(p).unwrap().text)
                );
            }
        }
    }

    #[test]
    fn replacement_is_consistent_within_report() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let (v, plan) = make_variant(&corpus, VariantKind::Sngn1, &inv, &dict, &dict, 9).unwrap();
        for ((a, b), rp) in corpus.reports.iter().zip(&v.reports).zip(&plan.reports) {
            for kind in [NameKind::Surname, NameKind::Given] {
                for &p in a.positions(kind) {
                    let from = canonical(&a.token(p).unwrap().text);
                    assert_eq!(canonical(&b.token(p).unwrap().text), rp.map(kind)[&from]);
                }
            }
        }
    }

    #[test]
    fn empty_pool_is_reported() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let empty = NameDictionary::default();
        let err = make_variant(&corpus, VariantKind::Sn2, &inv, &empty, &dict, 0).unwrap_err();
        assert!(matches!(err, Error::DictionaryExhausted(_)));
        assert!(make_variant(&corpus, VariantKind::Orig, &inv, &dict, &dict, 0).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let (corpus, dict) = fixture();
        let inv = build_name_inventory(&corpus);
        let (_, plan) = make_variant(&corpus, VariantKind::Sngn1, &inv, &dict, &dict, 5).unwrap();
        let mut buf = Vec::new();
        plan.write_sidecar(&mut buf).unwrap();
        let back = ReplacementPlan::read_sidecar(buf.as_slice()).unwrap();
        assert_eq!(back.variant, plan.variant);
        assert_eq!(back.seed, plan.seed);
        assert_eq!(back.reports, plan.reports);
    }

    #[test]
    fn brute_force_stream_shape() {
        let (corpus, _) = fixture();
        let report = &corpus.reports[0];
        let dict: Vec<String> = ["alpha", "beta", "gamma"].map(String::from).to_vec();
        let units: Vec<_> = brute_force_substitutions(report, NameKind::Surname, &dict).unwrap().collect();
        assert_eq!(units.len(), 3);
        let mut bearing: Vec<usize> = report.surname_positions().iter().map(|p| p.sentence).collect();
        bearing.dedup();
        for (u, name) in units.iter().zip(&dict) {
            assert_eq!(&u.candidate, name);
            assert_eq!(u.sentences.len(), bearing.len());
            for p in &u.positions {
                assert_eq!(canonical(&u.sentences[p.sentence].tokens[p.token].text), *name);
            }
        }
        let truth = vec![report.primary_name(NameKind::Surname).unwrap()];
        let same: Vec<_> = brute_force_substitutions(report, NameKind::Surname, &truth).unwrap().collect();
        for (s, &i) in same[0].sentences.iter().zip(&bearing) {
            assert_eq!(s, &report.sentences()[i]);
        }
        assert!(brute_force_substitutions(report, NameKind::Surname, &[]).is_err());
    }

    #[test]
    fn repetition_selection() {
        let (corpus, _) = fixture();
        let a = select_repetition_reports(&corpus, 6, 3, 11).unwrap();
        let b = select_repetition_reports(&corpus, 6, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| repetition_count(r, NameKind::Surname) >= 6));
        let qualifying = corpus.reports.iter().filter(|r| repetition_count(r, NameKind::Surname) >= 6).count();
        let err = select_repetition_reports(&corpus, 6, qualifying + 1, 0).unwrap_err();
        assert!(matches!(err, Error::NotEnoughReports { found, .. } if found == qualifying));
        assert_eq!(select_repetition_reports(&corpus, 1, 5, 0).unwrap().len(), 5);
    }

    #[test]
    fn partition_is_disjoint_and_complete() {
        let dict = synth_name_dictionary(50, 20, 21, 1).unwrap();
        let parts = partition_dictionary(&dict, 4, 7);
        assert_eq!(parts.iter().map(NameDictionary::len).sum::<usize>(), dict.len());
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(parts[i].surnames.iter().all(|n| !parts[j].contains(n)));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_variant_preserves_structure_and_reverts(seed_value in any::<u64>(), k in 0usize..6) {
            let (corpus, dict) = fixture();
            let inv = build_name_inventory(&corpus);
            let outside = outside_dictionary(&dict, &corpus);
            let kind = VariantKind::PERTURBED[k];
            let (v, plan) = make_variant(&corpus, kind, &inv, &outside, &dict, seed_value).unwrap();
            for (a, b) in corpus.reports.iter().zip(&v.reports) {
                prop_assert_eq!(a.surname_positions(), b.surname_positions());
                prop_assert_eq!(a.given_positions(), b.given_positions());
                for (sa, sb) in a.sentences().iter().zip(b.sentences()) {
                    prop_assert_eq!(&sa.tags, &sb.tags);
                    prop_assert_eq!(sa.len(), sb.len());
                }
                let names: IndexSet<Position> = a.surname_positions().iter().chain(a.given_positions()).copied().collect();
                for (s, (sa, sb)) in a.sentences().iter().zip(b.sentences()).enumerate() {
                    for t in 0..sa.len() {
                        if !names.contains(&Position { sentence: s, token: t }) {
                            prop_assert_eq!(&sa.tokens[t].text, &sb.tokens[t].text);
                        }
                    }
                }
            }
            prop_assert_eq!(revert_variant(&v, &plan).unwrap(), corpus);
        }
    }
}
