//! Two-column CoNLL-style files.
//!
//! ```text
//! #doc r1 split=train
//! Smith	B-PATIENT-SURNAME
//! ,	O
//!
//! ```
//!
//! `#doc <id>` opens a report (the `split=` field is optional and defaults to
//! `train`), a blank line closes a sentence and every other line is
//! `token<TAB>tag`.

use std::io::{self, BufRead, Write};

use super::{AnnotatedSentence, Corpus, Report, Split, TagSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub corpus: Corpus,
    /// Number of `I-X` tags rewritten to `B-X` because they did not continue
    /// an `X` span.
    pub repairs: usize,
}

struct PendingReport {
    id: String,
    split: Split,
    sentences: Vec<AnnotatedSentence>,
    words: Vec<String>,
    tags: Vec<usize>,
}

impl PendingReport {
    fn close_sentence(&mut self) -> Result<()> {
        if !self.words.is_empty() {
            let words = std::mem::take(&mut self.words);
            let tags = std::mem::take(&mut self.tags);
            self.sentences.push(AnnotatedSentence::from_words(&words, tags)?);
        }
        Ok(())
    }
}

pub fn parse_conll<R: BufRead>(reader: R, tagset: &TagSet) -> Result<ParseOutcome> {
    let mut reports = Vec::new();
    let mut current: Option<PendingReport> = None;
    let mut repairs = 0;

    let finish = |current: &mut Option<PendingReport>, reports: &mut Vec<Report>| -> Result<()> {
        if let Some(mut p) = current.take() {
            p.close_sentence()?;
            reports.push(Report::new(p.id, p.split, p.sentences, tagset));
        }
        Ok(())
    };

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);

        if let Some(rest) = line.strip_prefix("#doc") {
            finish(&mut current, &mut reports)?;
            let mut fields = rest.split_whitespace();
            let id = fields.next().ok_or(Error::Parse {
                line: line_no,
                message: "#doc line without an id".into(),
            })?;
            let mut split = Split::Train;
            for field in fields {
                let value = field.strip_prefix("split=").ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("unexpected #doc field {field:?}"),
                })?;
                split = value.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("unknown split {value:?}"),
                })?;
            }
            current = Some(PendingReport {
                id: id.to_string(),
                split,
                sentences: Vec::new(),
                words: Vec::new(),
                tags: Vec::new(),
            });
            continue;
        }

        if line.trim().is_empty() {
            if let Some(p) = current.as_mut() {
                p.close_sentence()?;
            }
            continue;
        }

        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 2 || columns[0].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 tab-separated columns, found {}", columns.len()),
            });
        }
        let mut tag = tagset.index_of(columns[1]).ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("unknown tag {:?}", columns[1]),
        })?;

        let pending = current.get_or_insert_with(|| PendingReport {
            id: format!("doc{}", reports.len()),
            split: Split::Train,
            sentences: Vec::new(),
            words: Vec::new(),
            tags: Vec::new(),
        });
        if tagset.is_inside(tag) {
            let category = tagset.category(tag);
            let continues = pending
                .tags
                .last()
                .is_some_and(|&prev| tagset.category(prev) == category);
            if !continues {
                tag = tagset
                    .begin_of(category.unwrap())
                    .expect("tag set validated B- for every I-");
                repairs += 1;
            }
        }
        pending.words.push(columns[0].to_string());
        pending.tags.push(tag);
    }
    finish(&mut current, &mut reports)?;

    Ok(ParseOutcome {
        corpus: Corpus::new(tagset.clone(), reports),
        repairs,
    })
}

pub fn write_conll<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for report in &corpus.reports {
        writeln!(out, "#doc {} split={}", report.id, report.split)?;
        for sentence in report.sentences() {
            for (token, &tag) in sentence.tokens.iter().zip(&sentence.tags) {
                writeln!(out, "{}\t{}", token.text, corpus.tagset.label(tag))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn emit_conll(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    write_conll(corpus, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("corpus text is UTF-8")
}
