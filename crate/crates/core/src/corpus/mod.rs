//! Annotated clinical corpora.
//!
//! A [`Corpus`] is a list of [`Report`]s, each a list of BIO-tagged
//! sentences. Patient surname and given-name token positions are indexed per
//! report and recomputed whenever tags change, so they always cover exactly
//! the tokens carrying a `PATIENT-SURNAME` / `PATIENT-GIVEN` tag.

mod conll;
mod dictionary;
mod synth;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use conll::{emit_conll, parse_conll, write_conll, ParseOutcome};
pub use dictionary::{read_name_list, synth_name_dictionary, write_name_list, Gender, NameDictionary};
pub use synth::{generate_synthetic_corpus, SynthConfig, SynthLog};
pub use tokenize::tokenize;

pub const SURNAME: &str = "PATIENT-SURNAME";
pub const GIVEN: &str = "PATIENT-GIVEN";
pub const DOCTOR: &str = "DOCTOR";
pub const DATE: &str = "DATE";
pub const LOCATION: &str = "LOCATION";
pub const ID: &str = "ID";

/// A token with its character codes and byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_ids: Vec<u32>,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize) -> Self {
        let text = text.into();
        let end = start + text.len();
        let char_ids = text.chars().map(u32::from).collect();
        Token {
            text,
            char_ids,
            start,
            end,
        }
    }
}

/// Ordered BIO label inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    labels: Vec<String>,
    o_index: usize,
}

impl TagSet {
    /// Builds a tag set, checking uniqueness and that every `I-X` has a `B-X`.
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut seen = IndexSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Config(format!("duplicate tag {label}")));
            }
        }
        for label in &labels {
            if let Some(cat) = label.strip_prefix("I-") {
                if !seen.contains(format!("B-{cat}").as_str()) {
                    return Err(Error::Config(format!("{label} has no matching B- tag")));
                }
            } else if label != "O" && !label.starts_with("B-") {
                return Err(Error::Config(format!("tag {label} is not BIO")));
            }
        }
        let o_index = labels
            .iter()
            .position(|l| l == "O")
            .ok_or_else(|| Error::Config("tag set has no O tag".into()))?;
        Ok(TagSet { labels, o_index })
    }

    /// `O` plus B/I tags for every category in `categories`.
    pub fn from_categories(categories: &[&str]) -> Self {
        let mut labels = vec!["O".to_string()];
        for cat in categories {
            labels.push(format!("B-{cat}"));
            labels.push(format!("I-{cat}"));
        }
        TagSet::new(labels).expect("generated tag set is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn o_index(&self) -> usize {
        self.o_index
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Category of a tag (`B-DATE` → `DATE`), `None` for `O`.
    pub fn category(&self, index: usize) -> Option<&str> {
        let label = &self.labels[index];
        label
            .strip_prefix("B-")
            .or_else(|| label.strip_prefix("I-"))
    }

    pub fn is_inside(&self, index: usize) -> bool {
        self.labels[index].starts_with("I-")
    }

    pub fn begin_of(&self, category: &str) -> Option<usize> {
        self.index_of(&format!("B-{category}"))
    }

    pub fn inside_of(&self, category: &str) -> Option<usize> {
        self.index_of(&format!("I-{category}"))
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::from_categories(&[SURNAME, GIVEN, DOCTOR, DATE, LOCATION, ID])
    }
}

/// A tokenized sentence with one gold tag per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub tokens: Vec<Token>,
    pub tags: Vec<usize>,
}

impl AnnotatedSentence {
    /// Builds a sentence whose offsets index the words joined by single spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S], tags: Vec<usize>) -> Result<Self> {
        if words.len() != tags.len() {
            return Err(Error::Shape(format!(
                "{} words but {} tags",
                words.len(),
                tags.len()
            )));
        }
        let mut tokens = Vec::with_capacity(words.len());
        let mut offset = 0;
        for word in words {
            let word = word.as_ref();
            if word.is_empty() {
                return Err(Error::Empty("token text"));
            }
            let token = Token::new(word, offset);
            offset = token.end + 1;
            tokens.push(token);
        }
        Ok(AnnotatedSentence { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Replaces one token's surface, shifting later offsets by the length delta.
    pub fn set_token_text(&mut self, index: usize, text: &str) {
        let old_len = self.tokens[index].text.len();
        let start = self.tokens[index].start;
        self.tokens[index] = Token::new(text, start);
        let delta = text.len() as isize - old_len as isize;
        for token in &mut self.tokens[index + 1..] {
            token.start = (token.start as isize + delta) as usize;
            token.end = (token.end as isize + delta) as usize;
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// Token coordinates inside a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub sentence: usize,
    pub token: usize,
}

/// Which patient-name class a position refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NameKind {
    Surname,
    Given,
}

impl NameKind {
    pub fn category(self) -> &'static str {
        match self {
            NameKind::Surname => SURNAME,
            NameKind::Given => GIVEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub split: Split,
    sentences: Vec<AnnotatedSentence>,
    surname_positions: Vec<Position>,
    given_positions: Vec<Position>,
}

impl Report {
    pub fn new(
        id: impl Into<String>,
        split: Split,
        sentences: Vec<AnnotatedSentence>,
        tagset: &TagSet,
    ) -> Self {
        let mut report = Report {
            id: id.into(),
            split,
            sentences,
            surname_positions: Vec::new(),
            given_positions: Vec::new(),
        };
        report.reindex(tagset);
        report
    }

    fn reindex(&mut self, tagset: &TagSet) {
        self.surname_positions.clear();
        self.given_positions.clear();
        for (s, sentence) in self.sentences.iter().enumerate() {
            for (t, &tag) in sentence.tags.iter().enumerate() {
                let pos = Position {
                    sentence: s,
                    token: t,
                };
                match tagset.category(tag) {
                    Some(SURNAME) => self.surname_positions.push(pos),
                    Some(GIVEN) => self.given_positions.push(pos),
                    _ => {}
                }
            }
        }
    }

    pub fn sentences(&self) -> &[AnnotatedSentence] {
        &self.sentences
    }

    pub fn surname_positions(&self) -> &[Position] {
        &self.surname_positions
    }

    pub fn given_positions(&self) -> &[Position] {
        &self.given_positions
    }

    pub fn positions(&self, kind: NameKind) -> &[Position] {
        match kind {
            NameKind::Surname => &self.surname_positions,
            NameKind::Given => &self.given_positions,
        }
    }

    pub fn token(&self, pos: Position) -> Option<&Token> {
        self.sentences.get(pos.sentence)?.tokens.get(pos.token)
    }

    /// Changes a token surface without touching tags, so positions stay valid.
    pub fn set_token_text(&mut self, pos: Position, text: &str) {
        self.sentences[pos.sentence].set_token_text(pos.token, text);
    }

    /// Canonical (lowercase) strings at the given name positions, most
    /// frequent first, ties in first-seen order.
    pub fn name_counts(&self, kind: NameKind) -> Vec<(String, usize)> {
        let mut counts: indexmap::IndexMap<String, usize> = indexmap::IndexMap::new();
        for &pos in self.positions(kind) {
            let text = canonical(&self.sentences[pos.sentence].tokens[pos.token].text);
            *counts.entry(text).or_default() += 1;
        }
        let mut out: Vec<_> = counts.into_iter().collect();
        out.sort_by(|a, b| b.1.cmp(&a.1));
        out
    }

    /// The report's main patient name of the given class.
    pub fn primary_name(&self, kind: NameKind) -> Option<String> {
        self.name_counts(kind).into_iter().next().map(|(n, _)| n)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(AnnotatedSentence::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub tagset: TagSet,
    pub reports: Vec<Report>,
}

impl Corpus {
    pub fn new(tagset: TagSet, reports: Vec<Report>) -> Self {
        Corpus { tagset, reports }
    }

    pub fn empty() -> Self {
        Corpus::new(TagSet::default(), Vec::new())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Report> {
        self.reports.iter().filter(move |r| r.split == split)
    }

    /// A corpus holding clones of the reports in `split`.
    pub fn subset(&self, split: Split) -> Corpus {
        Corpus::new(self.tagset.clone(), self.split(split).cloned().collect())
    }

    /// Keeps only the first `n` training reports; other splits are untouched.
    pub fn truncate_train(&self, n: usize) -> Corpus {
        let mut kept = 0;
        let reports = self
            .reports
            .iter()
            .filter(|r| {
                if r.split != Split::Train {
                    return true;
                }
                kept += 1;
                kept <= n
            })
            .cloned()
            .collect();
        Corpus::new(self.tagset.clone(), reports)
    }

    pub fn sentences(&self, split: Split) -> impl Iterator<Item = &AnnotatedSentence> {
        self.split(split).flat_map(|r| r.sentences.iter())
    }

    pub fn surname_occurrences(&self) -> usize {
        self.reports.iter().map(|r| r.surname_positions.len()).sum()
    }

    pub fn given_occurrences(&self) -> usize {
        self.reports.iter().map(|r| r.given_positions.len()).sum()
    }

    pub fn report(&self, id: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.id == id)
    }

    /// Every distinct lowercase token string in the corpus.
    pub fn vocabulary(&self) -> IndexSet<String> {
        self.reports
            .iter()
            .flat_map(|r| r.sentences.iter())
            .flat_map(|s| s.tokens.iter())
            .map(|t| canonical(&t.text))
            .collect()
    }
}

/// Lowercase comparison form of a name or word.
pub fn canonical(text: &str) -> String {
    text.to_lowercase()
}

/// In-corpus patient name sets and per-report positions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameInventory {
    pub surnames: IndexSet<String>,
    pub given: IndexSet<String>,
    /// `(report id, surname positions, given positions)` in corpus order.
    pub positions: Vec<(String, Vec<Position>, Vec<Position>)>,
}

impl NameInventory {
    pub fn names(&self, kind: NameKind) -> &IndexSet<String> {
        match kind {
            NameKind::Surname => &self.surnames,
            NameKind::Given => &self.given,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        let name = canonical(name);
        self.surnames.contains(&name) || self.given.contains(&name)
    }
}

pub fn build_name_inventory(corpus: &Corpus) -> NameInventory {
    let mut inv = NameInventory::default();
    for report in &corpus.reports {
        for &pos in &report.surname_positions {
            inv.surnames.insert(canonical(&report.token(pos).unwrap().text));
        }
        for &pos in &report.given_positions {
            inv.given.insert(canonical(&report.token(pos).unwrap().text));
        }
        inv.positions.push((
            report.id.clone(),
            report.surname_positions.clone(),
            report.given_positions.clone(),
        ));
    }
    inv
}
