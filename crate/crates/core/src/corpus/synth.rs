//! Slot-filling generator for synthetic clinical reports.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    tokenize, AnnotatedSentence, Corpus, Gender, NameDictionary, Report, Split, TagSet, DATE,
    DOCTOR, GIVEN, ID, LOCATION, SURNAME,
};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_reports: usize,
    /// Upper bound on patient-surname mentions in an ordinary report.
    pub names_per_report: usize,
    /// Number of reports guaranteed to mention the patient surname at least
    /// six times. They are placed first in the training split.
    pub min_repetition_quota: usize,
    /// Train / valid / test fractions.
    pub split: [f64; 3],
    /// Size of the template inventory drawn from (per template family).
    pub templates: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_reports: 60,
            names_per_report: 4,
            min_repetition_quota: 3,
            split: [0.7, 0.15, 0.15],
            templates: 40,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.split.iter().any(|&r| r < 0.0) {
            return Err(Error::Config(format!("split ratios {:?} must sum to 1", self.split)));
        }
        if self.min_repetition_quota > self.n_reports {
            return Err(Error::Config(format!(
                "repetition quota {} exceeds report count {}",
                self.min_repetition_quota, self.n_reports
            )));
        }
        if self.names_per_report == 0 || self.templates == 0 {
            return Err(Error::Config(
                "names_per_report and templates must be positive".into(),
            ));
        }
        Ok(())
    }

    fn split_sizes(&self) -> (usize, usize) {
        let n = self.n_reports as f64;
        let train = (n * self.split[0]).round() as usize;
        let valid = ((n * self.split[1]).round() as usize).min(self.n_reports - train);
        (train, valid)
    }
}

/// Patient assignments and occurrence counts of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLog {
    pub distinct_surnames: usize,
    pub distinct_given: usize,
    pub surname_occurrences: usize,
    pub given_occurrences: usize,
    pub reports_with_six_or_more: usize,
    /// `(report id, surname, given name, gender)`.
    pub patients: Vec<(String, String, String, Gender)>,
}

const MENTION_TEMPLATES: &[&str] = &[
    "ZSN , ZGN is a ZAGE year old patient admitted on ZDATE .",
    "Mr. ZSN was seen by Dr. ZDR in clinic today .",
    "PATIENT : ZSNU , ZGNU",
    "ZSN reports mild chest pain since ZDATE .",
    "Discussed the plan with ZSN and family at bedside .",
    "ZGN ZSN ( MRN ZID ) was transferred from ZLOC .",
    "Patient ZSN denies fever , chills or night sweats .",
    "Follow-up for ZSN with Dr. ZDR on ZDATE .",
    "ZSN tolerated the procedure well without complications .",
    "We will call ZSN with the biopsy results .",
    "Labs for ZSN were notable for mild anemia .",
    "ZGN ZSN lives in ZLOC with family .",
    "Per ZSN , the pain began after dinner .",
    "ZSN was discharged home in stable condition on ZDATE .",
    "Dr. ZDR spoke with ZSN about the imaging findings .",
    "The patient , ZGN ZSN , has a history of diabetes .",
    "RE : ZSNU ZID",
    "pt zsn seen for routine follow-up .",
    "Ms. ZSN was started on metformin .",
    "ZSN will return to clinic in two weeks .",
    "Daughter of ZSN was present for the visit .",
    "According to ZSN the cough has improved .",
    "ZSN , ZGN presented to ZLOC emergency department .",
    "Counseled ZSN on smoking cessation .",
];

const FILLER_TEMPLATES: &[&str] = &[
    "Blood pressure was 130/85 and heart rate 72 .",
    "No acute distress .",
    "Lungs are clear to auscultation bilaterally .",
    "Seen in consultation at ZLOC on ZDATE .",
    "Dr. ZDR will follow in clinic .",
    "Medications include metformin and lisinopril .",
    "Record number ZID .",
    "Plan : continue current regimen .",
    "Return in two weeks or sooner if symptoms worsen .",
    "Imaging at ZLOC showed no fracture .",
    "Abdomen soft , non-tender , non-distended .",
    "Cardiology recommended an echocardiogram .",
    "Dictated by Dr. ZDR on ZDATE .",
    "Allergies : penicillin .",
    "Hemoglobin A1c was 7.2 percent .",
    "Transferred from ZLOC for further care .",
];

const LOCATIONS: &[&str] = &[
    "Boston", "New Haven", "Springfield", "Lake Forest", "Riverton", "Port Allen", "Fairview",
    "Greenwood", "Salem", "West Brook", "Millbrook", "Cedar Falls",
];

struct Patient {
    surname: String,
    given: String,
}

fn title(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Filler<'a, R> {
    rng: &'a mut R,
    tagset: &'a TagSet,
    doctors: &'a [String],
}

impl<R: Rng> Filler<'_, R> {
    fn fill(&mut self, template: &str, patient: &Patient) -> Result<AnnotatedSentence> {
        let mut words: Vec<String> = Vec::new();
        let mut tags: Vec<usize> = Vec::new();
        let ts = self.tagset;
        let begin = |cat| ts.begin_of(cat).unwrap();
        for token in tokenize(template) {
            let word = token.text;
            match word.as_str() {
                "ZSN" | "ZSNU" | "zsn" => {
                    words.push(match word.as_str() {
                        "ZSN" => title(&patient.surname),
                        "ZSNU" => patient.surname.to_uppercase(),
                        _ => patient.surname.clone(),
                    });
                    tags.push(begin(SURNAME));
                }
                "ZGN" | "ZGNU" => {
                    words.push(if word == "ZGN" {
                        title(&patient.given)
                    } else {
                        patient.given.to_uppercase()
                    });
                    tags.push(begin(GIVEN));
                }
                "ZDR" => {
                    words.push(title(self.doctors.choose(self.rng).unwrap()));
                    tags.push(begin(DOCTOR));
                }
                "ZDATE" => {
                    let (y, m, d) = (
                        self.rng.gen_range(2080..2100),
                        self.rng.gen_range(1..=12),
                        self.rng.gen_range(1..=28),
                    );
                    words.push(format!("{y}-{m:02}-{d:02}"));
                    tags.push(begin(DATE));
                }
                "ZLOC" => {
                    let loc = LOCATIONS.choose(self.rng).unwrap();
                    for (i, part) in loc.split(' ').enumerate() {
                        words.push(part.to_string());
                        tags.push(if i == 0 {
                            begin(LOCATION)
                        } else {
                            ts.inside_of(LOCATION).unwrap()
                        });
                    }
                }
                "ZID" => {
                    words.push(self.rng.gen_range(1_000_000..10_000_000u32).to_string());
                    tags.push(begin(ID));
                }
                "ZAGE" => {
                    words.push(self.rng.gen_range(18..90u32).to_string());
                    tags.push(ts.o_index());
                }
                _ => {
                    words.push(word);
                    tags.push(ts.o_index());
                }
            }
        }
        AnnotatedSentence::from_words(&words, tags)
    }
}

fn take_names(pool: &mut Vec<String>, count: usize, what: &str) -> Result<Vec<String>> {
    if pool.len() < count {
        return Err(Error::DictionaryExhausted(format!(
            "need {count} {what}, dictionary provides {} (short by {})",
            pool.len(),
            count - pool.len()
        )));
    }
    Ok(pool.drain(..count).collect())
}

/// Generates a corpus with one distinct patient per report.
pub fn generate_synthetic_corpus(
    cfg: &SynthConfig,
    dict: &NameDictionary,
) -> Result<(Corpus, SynthLog)> {
    cfg.validate()?;
    let tagset = TagSet::default();
    let mut rng = seed::rng(cfg.seed);
    let n = cfg.n_reports;

    let mut surnames: Vec<String> = dict.surnames.iter().cloned().collect();
    surnames.shuffle(&mut rng);
    let n_doctors = if n == 0 { 0 } else { (n / 4).max(2) };
    let patient_surnames = take_names(&mut surnames, n, "patient surnames")?;
    let doctors = take_names(&mut surnames, n_doctors, "doctor surnames")?;

    let mut male: Vec<String> = dict.given_male.iter().cloned().collect();
    let mut female: Vec<String> = dict.given_female.iter().cloned().collect();
    male.shuffle(&mut rng);
    female.shuffle(&mut rng);
    let genders: Vec<Gender> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female })
        .collect();
    let n_male = genders.iter().filter(|&&g| g == Gender::Male).count();
    let mut male_names = take_names(&mut male, n_male, "male given names")?.into_iter();
    let mut female_names = take_names(&mut female, n - n_male, "female given names")?.into_iter();

    let mentions = &MENTION_TEMPLATES[..cfg.templates.min(MENTION_TEMPLATES.len())];
    let fillers = &FILLER_TEMPLATES[..cfg.templates.min(FILLER_TEMPLATES.len())];
    let (n_train, n_valid) = cfg.split_sizes();

    let mut reports = Vec::with_capacity(n);
    let mut patients = Vec::with_capacity(n);
    for i in 0..n {
        let gender = genders[i];
        let given = match gender {
            Gender::Male => male_names.next(),
            Gender::Female => female_names.next(),
        }
        .expect("given names reserved per gender");
        let patient = Patient {
            surname: patient_surnames[i].clone(),
            given,
        };
        let repeats = if i < cfg.min_repetition_quota {
            rng.gen_range(6..=8)
        } else {
            rng.gen_range(1..=cfg.names_per_report)
        };
        let n_fill = rng.gen_range(2..=5);

        let mut chosen: Vec<&str> = (0..repeats)
            .map(|_| *mentions.choose(&mut rng).unwrap())
            .collect();
        chosen.extend((0..n_fill).map(|_| *fillers.choose(&mut rng).unwrap()));
        chosen.shuffle(&mut rng);

        let mut filler = Filler {
            rng: &mut rng,
            tagset: &tagset,
            doctors: &doctors,
        };
        let sentences = chosen
            .iter()
            .map(|t| filler.fill(t, &patient))
            .collect::<Result<Vec<_>>>()?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        let id = format!("r{i:04}");
        patients.push((id.clone(), patient.surname, patient.given, gender));
        reports.push(Report::new(id, split, sentences, &tagset));
    }

    let corpus = Corpus::new(tagset, reports);
    let inv = super::build_name_inventory(&corpus);
    let log = SynthLog {
        distinct_surnames: inv.surnames.len(),
        distinct_given: inv.given.len(),
        surname_occurrences: corpus.surname_occurrences(),
        given_occurrences: corpus.given_occurrences(),
        reports_with_six_or_more: corpus
            .reports
            .iter()
            .filter(|r| r.surname_positions().len() >= 6)
            .count(),
        patients,
    };
    Ok((corpus, log))
}
