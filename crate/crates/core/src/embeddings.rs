//! Frozen token-embedding table.
//!
//! Lookups are lowercase; case information reaches the tagger only through
//! its character channel. The table is never written to after construction.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{canonical, Token};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
    unk: Vec<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(&canonical(word)).map(Vec::as_slice)
    }

    /// Stored vector for the token's lowercase text, or the unknown vector.
    pub fn embed_token(&self, token: &Token) -> &[f64] {
        self.embed_word(&token.text)
    }

    pub fn embed_word(&self, word: &str) -> &[f64] {
        self.get(word).unwrap_or(&self.unk)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Parses `word v1 ... v_dim` lines. Blank lines are skipped; a repeated word
/// keeps its first vector.
pub fn load_word_vectors<R: BufRead>(reader: R, dim: usize) -> Result<EmbeddingTable> {
    let mut entries = BTreeMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: index + 1,
                    message: format!("bad component {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.len() != dim {
            return Err(Error::Parse {
                line: index + 1,
                message: format!("expected {dim} components, found {}", vector.len()),
            });
        }
        entries.entry(canonical(word)).or_insert(vector);
    }
    Ok(EmbeddingTable {
        dim,
        entries,
        unk: vec![0.0; dim],
    })
}

/// Seeded unit-norm vectors for every word of `vocab`.
///
/// Each word's vector depends only on `(seed, word)`, not on the rest of the
/// vocabulary.
pub fn synth_embedding<I, S>(vocab: I, dim: usize, seed_value: u64) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut entries = BTreeMap::new();
    for word in vocab {
        let word = canonical(word.as_ref());
        if entries.contains_key(&word) {
            continue;
        }
        let mut rng = seed::rng(seed::mix64(seed_value ^ seed::fnv1a(&word)));
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        entries.insert(word, v);
    }
    if entries.is_empty() {
        return Err(Error::Empty("embedding vocabulary"));
    }
    Ok(EmbeddingTable {
        dim,
        entries,
        unk: vec![0.0; dim],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = "the 0.418 0.24968 -0.41242\n\
                          , 0.013441 0.23682 -0.16899\n\
                          Smith -0.1 0.5 2.25e-1\n\
                          of 0.70853 0.57088 -0.4716\n\
                          pain 1 -1 0\n";

    #[test]
    fn single_entry() {
        let t = load_word_vectors("the 0.1 0.2".as_bytes(), 2).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("the"), Some(&[0.1, 0.2][..]));
        assert_eq!(t.unk_vector(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_names_line() {
        let err = load_word_vectors("a 1 2\nb 1 2 3\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn golden_file_vectors() {
        let t = load_word_vectors(GOLDEN.as_bytes(), 3).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.get("smith"), Some(&[-0.1, 0.5, 0.225][..]));
        assert_eq!(t.get(","), Some(&[0.013441, 0.23682, -0.16899][..]));
        assert_eq!(t.get("pain"), Some(&[1.0, -1.0, 0.0][..]));
    }

    #[test]
    fn lookup_is_case_insensitive_and_total() {
        let t = load_word_vectors(GOLDEN.as_bytes(), 3).unwrap();
        assert_eq!(t.embed_word("The"), t.embed_word("the"));
        assert_eq!(t.embed_token(&Token::new("SMITH", 0)), t.embed_word("smith"));
        assert_eq!(t.embed_word("unseen"), &[0.0; 3]);
    }

    #[test]
    fn synth_is_seeded_and_unit_norm() {
        let vocab: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let a = synth_embedding(&vocab, 100, 5).unwrap();
        let b = synth_embedding(&vocab, 100, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        for (_, v) in a.iter() {
            assert_eq!(v.len(), 100);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let c = synth_embedding(&vocab, 100, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_vectors_do_not_depend_on_vocab_order() {
        let a = synth_embedding(["x", "y"], 8, 1).unwrap();
        let b = synth_embedding(["y", "z", "x"], 8, 1).unwrap();
        assert_eq!(a.get("x"), b.get("x"));
    }

    #[test]
    fn empty_vocab_rejected() {
        assert!(synth_embedding(Vec::<String>::new(), 4, 1).is_err());
    }
}
