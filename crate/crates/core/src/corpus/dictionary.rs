use std::io::{self, BufRead, Write};

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::canonical;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

/// Surname and gendered given-name lists in canonical lowercase.
///
/// Order is significant: brute-force streams enumerate names in dictionary
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameDictionary {
    pub surnames: IndexSet<String>,
    pub given_male: IndexSet<String>,
    pub given_female: IndexSet<String>,
}

/// Reads one name per line, lowercasing and dropping blanks and duplicates.
pub fn read_name_list<R: BufRead>(reader: R) -> io::Result<IndexSet<String>> {
    let mut names = IndexSet::new();
    for line in reader.lines() {
        let line = line?;
        let name = line.trim();
        if !name.is_empty() {
            names.insert(canonical(name));
        }
    }
    Ok(names)
}

pub fn write_name_list<'a, W: Write>(
    names: impl IntoIterator<Item = &'a String>,
    mut out: W,
) -> io::Result<()> {
    for name in names {
        writeln!(out, "{name}")?;
    }
    Ok(())
}

impl NameDictionary {
    pub fn from_readers<R: BufRead>(surnames: R, male: R, female: R) -> io::Result<Self> {
        Ok(NameDictionary {
            surnames: read_name_list(surnames)?,
            given_male: read_name_list(male)?,
            given_female: read_name_list(female)?,
        })
    }

    pub fn gender_of(&self, name: &str) -> Option<Gender> {
        let name = canonical(name);
        if self.given_male.contains(&name) {
            Some(Gender::Male)
        } else if self.given_female.contains(&name) {
            Some(Gender::Female)
        } else {
            None
        }
    }

    pub fn given(&self, gender: Gender) -> &IndexSet<String> {
        match gender {
            Gender::Male => &self.given_male,
            Gender::Female => &self.given_female,
        }
    }

    pub fn given_all(&self) -> impl Iterator<Item = &String> {
        self.given_male.iter().chain(self.given_female.iter())
    }

    /// Same dictionary with every name for which `exclude` returns true removed.
    pub fn excluding(&self, exclude: impl Fn(&str) -> bool) -> NameDictionary {
        let keep = |set: &IndexSet<String>| -> IndexSet<String> {
            set.iter().filter(|n| !exclude(n)).cloned().collect()
        };
        NameDictionary {
            surnames: keep(&self.surnames),
            given_male: keep(&self.given_male),
            given_female: keep(&self.given_female),
        }
    }

    pub fn len(&self) -> usize {
        self.surnames.len() + self.given_male.len() + self.given_female.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, name: &str) -> bool {
        let name = canonical(name);
        self.surnames.contains(&name)
            || self.given_male.contains(&name)
            || self.given_female.contains(&name)
    }
}

const ONSETS: &[&str] = &[
    "b", "br", "c", "ch", "d", "dr", "f", "g", "gr", "h", "j", "k", "l", "m", "n", "p", "r", "s",
    "sh", "st", "t", "tr", "v", "w", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ei", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "s", "k", "m", "th", "rd", "nd"];
const SURNAME_ENDINGS: &[&str] = &["", "", "son", "man", "ley", "ton", "er", "ov", "ez", "ski"];
const FEMALE_ENDINGS: &[&str] = &["a", "ia", "ine", "elle", "ie"];
const MALE_ENDINGS: &[&str] = &["", "o", "us", "an", "el"];

fn syllable<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    s.push_str(ONSETS.choose(rng).unwrap());
    s.push_str(VOWELS.choose(rng).unwrap());
    s.push_str(CODAS.choose(rng).unwrap());
    s
}

fn fill<R: Rng>(
    rng: &mut R,
    taken: &mut IndexSet<String>,
    count: usize,
    what: &str,
    make: impl Fn(&mut R) -> String,
) -> Result<IndexSet<String>> {
    let mut out = IndexSet::new();
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > count * 100 + 1000 {
            return Err(Error::DictionaryExhausted(format!(
                "could only generate {} of {count} distinct {what}",
                out.len()
            )));
        }
        let name = make(rng);
        if name.len() >= 3 && taken.insert(name.clone()) {
            out.insert(name);
        }
    }
    Ok(out)
}

/// Seeded pseudo-name dictionary with mutually disjoint lists.
pub fn synth_name_dictionary(
    surnames: usize,
    male: usize,
    female: usize,
    seed_value: u64,
) -> Result<NameDictionary> {
    let mut rng = seed::rng(seed_value);
    let mut taken = IndexSet::new();
    let surnames = fill(&mut rng, &mut taken, surnames, "surnames", |r| {
        let n = r.gen_range(2..=3);
        let mut s: String = (0..n).map(|_| syllable(r)).collect();
        s.push_str(SURNAME_ENDINGS.choose(r).unwrap());
        s
    })?;
    let given_male = fill(&mut rng, &mut taken, male, "male given names", |r| {
        let mut s = syllable(r);
        if r.gen_bool(0.5) {
            s.push_str(&syllable(r));
        }
        s.push_str(MALE_ENDINGS.choose(r).unwrap());
        s
    })?;
    let given_female = fill(&mut rng, &mut taken, female, "female given names", |r| {
        let mut s = syllable(r);
        if r.gen_bool(0.4) {
            s.push_str(&syllable(r));
        }
        s.push_str(FEMALE_ENDINGS.choose(r).unwrap());
        s
    })?;
    Ok(NameDictionary {
        surnames,
        given_male,
        given_female,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_canonicalizes_and_dedups() {
        let names = read_name_list("Smith\n\nsmith\n JONES \n".as_bytes()).unwrap();
        assert_eq!(names.into_iter().collect::<Vec<_>>(), ["smith", "jones"]);
    }

    #[test]
    fn synthetic_dictionary_is_disjoint_and_deterministic() {
        let a = synth_name_dictionary(500, 100, 120, 3).unwrap();
        let b = synth_name_dictionary(500, 100, 120, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.surnames.len(), 500);
        assert_eq!(a.given_male.len(), 100);
        assert_eq!(a.given_female.len(), 120);
        assert!(a.surnames.iter().all(|s| !a.given_male.contains(s) && !a.given_female.contains(s)));
        assert!(a.given_male.iter().all(|s| !a.given_female.contains(s)));
        assert!(a.surnames.iter().all(|s| s.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn excluding_removes_names() {
        let d = synth_name_dictionary(10, 3, 3, 1).unwrap();
        let first = d.surnames[0].clone();
        let out = d.excluding(|n| n == first);
        assert_eq!(out.surnames.len(), 9);
        assert!(!out.contains(&first));
    }

    #[test]
    fn gender_lookup() {
        let d = synth_name_dictionary(5, 2, 2, 9).unwrap();
        assert_eq!(d.gender_of(&d.given_male[0].to_uppercase()), Some(Gender::Male));
        assert_eq!(d.gender_of(&d.given_female[1]), Some(Gender::Female));
        assert_eq!(d.gender_of(&d.surnames[0]), None);
    }
}
