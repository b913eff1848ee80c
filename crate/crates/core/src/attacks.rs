//! Membership attacks against a trained tagger.
//!
//! - [`naive_cutoff`]: the best single threshold on a scalar score.
//! - [`brute_force_rank`]: substitute every dictionary name into a report and
//!   rank candidates by the tagger's name-tag probability.
//! - Shadow-model membership inference: shadow taggers trained on
//!   outside-name copies of the corpus provide labelled `P` vectors for an
//!   attack classifier, which then ranks brute-force candidates on the
//!   target.

use indexmap::IndexSet;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, NameDictionary, NameInventory, NameKind, Report, Split};
use crate::embeddings::EmbeddingTable;
use crate::neural::{
    sgd_epoch, softmax, Activation, Differentiable, Dropout, FfnParams, ParamSet, TrainConfig,
};
use crate::perturb::{
    brute_force_substitutions, make_variant, partition_dictionary, repetition_count, VariantKind,
};
use crate::tagger::{train_tagger, TaggerConfig, TaggerModel};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffResult {
    pub best_threshold: f64,
    /// Members are predicted above the threshold when true, below otherwise.
    pub members_above: bool,
    pub balanced_accuracy: f64,
    pub confusion: Confusion,
}

/// Best balanced accuracy over every threshold between consecutive distinct
/// pooled scores (plus one below and one above all of them), for both
/// orientations. Earlier thresholds win ties.
pub fn naive_cutoff(members: &[f64], nonmembers: &[f64]) -> Result<CutoffResult> {
    if members.is_empty() || nonmembers.is_empty() {
        return Err(Error::Empty("cut-off scores"));
    }
    if members.iter().chain(nonmembers).any(|v| !v.is_finite()) {
        return Err(Error::Config("cut-off scores must be finite".into()));
    }
    let mut pooled: Vec<(f64, bool)> = members
        .iter()
        .map(|&v| (v, true))
        .chain(nonmembers.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (m, n) = (members.len(), nonmembers.len());
    // Counts at or below the current threshold.
    let (mut mem_below, mut non_below) = (0usize, 0usize);
    let mut best: Option<CutoffResult> = None;
    let mut consider = |t: f64, mem_below: usize, non_below: usize| {
        let above = Confusion { tp: m - mem_below, fn_: mem_below, tn: non_below, fp: n - non_below };
        let below = Confusion { tp: mem_below, fn_: m - mem_below, tn: n - non_below, fp: non_below };
        for (c, members_above) in [(above, true), (below, false)] {
            let acc = 0.5 * (c.tp as f64 / m as f64 + c.tn as f64 / n as f64);
            if best.as_ref().map_or(true, |b| acc > b.balanced_accuracy) {
                best = Some(CutoffResult { best_threshold: t, members_above, balanced_accuracy: acc, confusion: c });
            }
        }
    };
    consider(pooled[0].0 - 1.0, 0, 0);
    let mut i = 0;
    while i < pooled.len() {
        let x = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == x {
            if pooled[i].1 {
                mem_below += 1;
            } else {
                non_below += 1;
            }
            i += 1;
        }
        let t = match pooled.get(i) {
            Some(next) => 0.5 * (x + next.0),
            None => x + 1.0,
        };
        consider(t, mem_below, non_below);
    }
    Ok(best.expect("at least one threshold"))
}

/// How per-occurrence scores combine into one candidate score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl Aggregation {
    pub fn apply(self, xs: &[f64]) -> f64 {
        match self {
            Aggregation::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Aggregation::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Rank of `scores[index]` when sorted descending, counting every score
/// greater than or equal to it, so ties never improve the rank.
pub fn pessimistic_rank(scores: &[f64], index: usize) -> usize {
    let s = scores[index];
    scores.iter().filter(|&&v| v >= s).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub report_id: String,
    pub true_name: String,
    pub candidate_count: usize,
    /// 1 is the most suspicious candidate.
    pub true_name_rank: usize,
    pub per_occurrence_ranks: Vec<usize>,
    pub aggregation: Aggregation,
    /// `(candidate, aggregated score)` in candidate order.
    pub scores: Vec<(String, f64)>,
}

impl RankResult {
    /// `candidate,score,rank` rows in candidate order.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate", "score", "rank"])?;
        let values: Vec<f64> = self.scores.iter().map(|(_, s)| *s).collect();
        for (i, (name, score)) in self.scores.iter().enumerate() {
            w.write_record([name.clone(), format!("{score:e}"), pessimistic_rank(&values, i).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dictionary names followed by the report's true name when it is missing.
pub fn candidate_list(report: &Report, kind: NameKind, dict: &[String]) -> Result<(Vec<String>, String)> {
    let truth = report.primary_name(kind).ok_or(Error::Empty("report name positions"))?;
    let mut seen: IndexSet<String> = dict.iter().cloned().collect();
    seen.insert(truth.clone());
    Ok((seen.into_iter().collect(), truth))
}

/// Scores every candidate substitution of `report` with `score_occurrence`,
/// which receives `P` and the gold tag at one name occurrence.
fn rank_candidates(
    model: &TaggerModel,
    report: &Report,
    kind: NameKind,
    dict: &[String],
    aggregation: Aggregation,
    mut score_occurrence: impl FnMut(&[f64], usize) -> f64,
) -> Result<RankResult> {
    if dict.is_empty() {
        return Err(Error::Empty("brute-force dictionary"));
    }
    let (candidates, truth) = candidate_list(report, kind, dict)?;
    let mut per_occ: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    for unit in brute_force_substitutions(report, kind, &candidates)? {
        let probs: Vec<Vec<Vec<f64>>> =
            unit.sentences.iter().map(|s| model.predict_p(&s.tokens)).collect::<Result<_>>()?;
        per_occ.push(
            unit.positions
                .iter()
                .map(|p| {
                    let gold = unit.sentences[p.sentence].tags[p.token];
                    score_occurrence(&probs[p.sentence][p.token], gold)
                })
                .collect(),
        );
    }
    let truth_index = candidates.iter().position(|c| *c == truth).expect("truth is a candidate");
    let aggregated: Vec<f64> = per_occ.iter().map(|o| aggregation.apply(o)).collect();
    let occurrences = per_occ[0].len();
    let per_occurrence_ranks = (0..occurrences)
        .map(|j| {
            let col: Vec<f64> = per_occ.iter().map(|o| o[j]).collect();
            pessimistic_rank(&col, truth_index)
        })
        .collect();
    Ok(RankResult {
        report_id: report.id.clone(),
        true_name: truth,
        candidate_count: candidates.len(),
        true_name_rank: pessimistic_rank(&aggregated, truth_index),
        per_occurrence_ranks,
        aggregation,
        scores: candidates.into_iter().zip(aggregated).collect(),
    })
}

/// Ranks candidates by the probability the tagger gives the gold name tag.
pub fn brute_force_rank(
    model: &TaggerModel,
    report: &Report,
    kind: NameKind,
    dict: &[String],
    aggregation: Aggregation,
) -> Result<RankResult> {
    rank_candidates(model, report, kind, dict, aggregation, |p, gold| p[gold])
}

/// Roles of shadow-model indices: 0 is the target, the last index is the
/// attack-validation shadow, everything in between trains the attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowPlan {
    pub num_shadow: usize,
    pub seeds: Vec<u64>,
}

impl ShadowPlan {
    pub const MIN_SHADOWS: usize = 4;

    pub fn new(num_shadow: usize, master: u64) -> Result<Self> {
        if num_shadow < Self::MIN_SHADOWS {
            return Err(Error::Config(format!(
                "need at least {} shadows, got {num_shadow}",
                Self::MIN_SHADOWS
            )));
        }
        let seeds = (0..num_shadow).map(|k| seed::derive_indexed(master, "shadow", k as u64)).collect();
        Ok(ShadowPlan { num_shadow, seeds })
    }

    pub fn target(&self) -> usize {
        0
    }

    pub fn validation(&self) -> usize {
        self.num_shadow - 1
    }

    pub fn training(&self) -> std::ops::Range<usize> {
        1..self.num_shadow - 1
    }
}

/// One outside-name (SNGN2) copy of `original` per shadow, each drawing from
/// its own share of `outside` so no name is reused across shadows.
pub fn build_shadow_plan(
    original: &Corpus,
    inventory: &NameInventory,
    outside: &NameDictionary,
    genders: &NameDictionary,
    num_shadow: usize,
    master: u64,
) -> Result<(ShadowPlan, Vec<Corpus>)> {
    let plan = ShadowPlan::new(num_shadow, master)?;
    let parts = partition_dictionary(outside, num_shadow, seed::derive_seed(master, "shadow-partition"));
    let corpora = parts
        .iter()
        .zip(&plan.seeds)
        .map(|(part, &s)| {
            make_variant(original, VariantKind::Sngn2, inventory, part, genders, s).map(|(c, _)| c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((plan, corpora))
}

/// A labelled `P` vector at one name token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipExample {
    pub feature: Vec<f64>,
    pub member: bool,
    /// Shadow index of the model that produced the feature.
    pub source: usize,
    pub report_id: String,
}

fn examples_from(
    model: &TaggerModel,
    reports: &[&Report],
    kind: NameKind,
    member: bool,
    source: usize,
) -> Result<Vec<MembershipExample>> {
    let mut out = Vec::new();
    for r in reports {
        let recs = crate::tagger::extract_report_probs(model, r, r.positions(kind), VariantKind::Sngn2)?;
        out.extend(recs.into_iter().map(|rec| MembershipExample {
            feature: rec.p,
            member,
            source,
            report_id: rec.report_id,
        }));
    }
    Ok(out)
}

/// Seeded mix of `count` train reports drawn without replacement from
/// `corpora[i]` for every `i` in `sources`.
fn nonmember_mix<'a>(corpora: &'a [Corpus], sources: &[usize], count: usize, s: u64) -> Vec<&'a Report> {
    let pool: Vec<&Report> = sources.iter().flat_map(|&i| corpora[i].split(Split::Train)).collect();
    let count = count.min(pool.len());
    let mut idx = index::sample(&mut seed::rng(s), pool.len(), count).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Equal member and non-member counts by seeded down-sampling of the larger
/// side; relative order is kept.
pub fn balance(examples: Vec<MembershipExample>, s: u64) -> Vec<MembershipExample> {
    let (pos, neg): (Vec<_>, Vec<_>) = examples.into_iter().partition(|e| e.member);
    let keep = pos.len().min(neg.len());
    let mut rng = seed::rng(s);
    let mut thin = |v: Vec<MembershipExample>| -> Vec<MembershipExample> {
        if v.len() == keep {
            return v;
        }
        let mut idx = index::sample(&mut rng, v.len(), keep).into_vec();
        idx.sort_unstable();
        let mut v: Vec<Option<MembershipExample>> = v.into_iter().map(Some).collect();
        idx.into_iter().map(|i| v[i].take().unwrap()).collect()
    };
    let mut out = thin(pos);
    out.extend(thin(neg));
    out
}

/// Unbalanced member/non-member examples for the shadow `k`: its own train
/// reports against a same-sized mix from the corpora in `others`.
pub fn shadow_examples(
    model: &TaggerModel,
    corpora: &[Corpus],
    k: usize,
    others: &[usize],
    kind: NameKind,
    s: u64,
) -> Result<Vec<MembershipExample>> {
    let own: Vec<&Report> = corpora[k].split(Split::Train).collect();
    let mix = nonmember_mix(corpora, others, own.len(), seed::derive_indexed(s, "mix", k as u64));
    let mut out = examples_from(model, &own, kind, true, k)?;
    out.extend(examples_from(model, &mix, kind, false, k)?);
    Ok(out)
}

/// Balanced attack-training examples from every training shadow.
pub fn build_membership_dataset(
    plan: &ShadowPlan,
    models: &[TaggerModel],
    corpora: &[Corpus],
    kind: NameKind,
    s: u64,
) -> Result<Vec<MembershipExample>> {
    let training: Vec<usize> = plan.training().collect();
    let mut all = Vec::new();
    for &k in &training {
        let model = models.get(k).ok_or_else(|| Error::Config(format!("missing shadow model {k}")))?;
        let others: Vec<usize> = training.iter().copied().filter(|&j| j != k).collect();
        all.extend(shadow_examples(model, corpora, k, &others, kind, s)?);
    }
    Ok(balance(all, seed::derive_seed(s, "balance")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { hidden: 64, epochs: 100, learning_rate: 0.01, seed: 0 }
    }
}

/// `K → hidden (ReLU) → 2` classifier; output 1 is "member".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub net: FfnParams,
}

impl AttackModel {
    pub fn membership_probability(&self, feature: &[f64]) -> Result<f64> {
        Ok(softmax(&self.net.logits(feature)?)[1])
    }

    pub fn predict(&self, feature: &[f64]) -> Result<bool> {
        let z = self.net.logits(feature)?;
        Ok(z[1] > z[0])
    }

    pub fn accuracy(&self, examples: &[MembershipExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("attack evaluation examples"));
        }
        let mut hits = 0;
        for e in examples {
            if self.predict(&e.feature)? == e.member {
                hits += 1;
            }
        }
        Ok(hits as f64 / examples.len() as f64)
    }
}

impl Differentiable for AttackModel {
    type Example = MembershipExample;
    type Params = FfnParams;

    fn params(&self) -> &FfnParams {
        &self.net
    }

    fn params_mut(&mut self) -> &mut FfnParams {
        &mut self.net
    }

    fn loss(&self, e: &MembershipExample) -> Result<f64> {
        let z = self.net.logits(&e.feature)?;
        Ok(crate::neural::log_sum_exp(z.iter().copied()) - z[e.member as usize])
    }

    fn loss_and_grad(&self, e: &MembershipExample, _: Option<&mut Dropout>) -> Result<(f64, FfnParams)> {
        let trace = self.net.forward(&e.feature)?;
        let z = trace.logits();
        let y = e.member as usize;
        let loss = crate::neural::log_sum_exp(z.iter().copied()) - z[y];
        let mut d = softmax(z);
        d[y] -= 1.0;
        let mut grad = ParamSet::zeros_like(&self.net);
        self.net.backward(&trace, &d, &mut grad);
        Ok((loss, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTraining {
    pub model: AttackModel,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

pub fn train_attack_model(
    examples: &[MembershipExample],
    validation: &[MembershipExample],
    cfg: &AttackConfig,
) -> Result<AttackTraining> {
    let first = examples.first().ok_or(Error::Empty("attack training examples"))?;
    if examples.iter().all(|e| e.member == first.member) {
        return Err(Error::Config("attack training examples contain a single class".into()));
    }
    let dim = first.feature.len();
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "attack-init"));
    let mut model = AttackModel { net: FfnParams::init(&[dim, cfg.hidden, 2], Activation::Relu, &mut rng) };
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        dropout: 0.0,
        max_epochs: cfg.epochs,
        seed: seed::derive_seed(cfg.seed, "attack-sgd"),
        ..Default::default()
    };
    for epoch in 0..cfg.epochs {
        sgd_epoch(&mut model, examples, &tc, epoch)?;
    }
    let train_accuracy = model.accuracy(examples)?;
    let validation_accuracy =
        if validation.is_empty() { None } else { Some(model.accuracy(validation)?) };
    Ok(AttackTraining { model, train_accuracy, validation_accuracy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaReport {
    pub attack_train_accuracy: f64,
    pub attack_validation_accuracy: Option<f64>,
    /// Example-level accuracy on the target's balanced member/non-member set.
    pub target_accuracy: f64,
    /// Report-level accuracy: a report is called a member when its mean
    /// membership probability exceeds 1/2.
    pub target_report_accuracy: f64,
    pub membership_examples: usize,
    pub ranks: Vec<RankResult>,
}

impl MiaReport {
    pub fn mean_rank(&self) -> Option<f64> {
        if self.ranks.is_empty() {
            None
        } else {
            Some(self.ranks.iter().map(|r| r.true_name_rank as f64).sum::<f64>() / self.ranks.len() as f64)
        }
    }
}

/// Ranks candidates by attack-model membership probability of the target's
/// `P` at the name tokens.
pub fn mia_rank(
    attack: &AttackModel,
    target: &TaggerModel,
    report: &Report,
    kind: NameKind,
    dict: &[String],
    aggregation: Aggregation,
) -> Result<RankResult> {
    let mut err = None;
    let r = rank_candidates(target, report, kind, dict, aggregation, |p, _| {
        attack.membership_probability(p).unwrap_or_else(|e| {
            err.get_or_insert(e);
            f64::NAN
        })
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// The target's train reports with the most repetitions of their primary
/// name, most repeated first and corpus order among equals.
pub fn top_repetition_reports(corpus: &Corpus, kind: NameKind, k: usize) -> Vec<&Report> {
    let mut reports: Vec<&Report> = corpus.split(Split::Train).filter(|r| !r.positions(kind).is_empty()).collect();
    reports.sort_by_key(|r| std::cmp::Reverse(repetition_count(r, kind)));
    reports.truncate(k);
    reports
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaConfig {
    pub num_shadow: usize,
    pub kind: NameKind,
    pub reports: usize,
    pub aggregation: Aggregation,
    pub attack: AttackConfig,
    /// Epoch budget of the target only; 0 leaves it untrained.
    pub target_epochs: Option<usize>,
    pub seed: u64,
}

impl Default for MiaConfig {
    fn default() -> Self {
        MiaConfig {
            num_shadow: 12,
            kind: NameKind::Surname,
            reports: 3,
            aggregation: Aggregation::Mean,
            attack: AttackConfig::default(),
            target_epochs: None,
            seed: 0,
        }
    }
}

/// Trains one tagger per shadow corpus. Each model's init and shuffling seeds
/// come from its plan seed.
pub fn train_shadow_models(
    plan: &ShadowPlan,
    corpora: &[Corpus],
    embedding: &EmbeddingTable,
    tagger_cfg: &TaggerConfig,
    train_cfg: &TrainConfig,
    target_epochs: Option<usize>,
) -> Result<Vec<TaggerModel>> {
    corpora
        .iter()
        .zip(&plan.seeds)
        .enumerate()
        .map(|(k, (corpus, &s))| {
            let mc = TaggerConfig { seed: s, ..tagger_cfg.clone() };
            let mut tc = TrainConfig { seed: s, ..train_cfg.clone() };
            if k == plan.target() {
                if let Some(e) = target_epochs {
                    tc.max_epochs = e;
                }
            }
            log::info!("training shadow {k} for {} epochs", tc.max_epochs);
            Ok(train_tagger(corpus, embedding.clone(), &mc, &tc)?.model)
        })
        .collect()
}

/// Attack model from the training shadows, validated on the validation
/// shadow, then applied to the target: membership accuracies plus candidate
/// ranks on the target's most repetitive train reports.
pub fn mia_attack_target(
    plan: &ShadowPlan,
    models: &[TaggerModel],
    corpora: &[Corpus],
    dict: &[String],
    cfg: &MiaConfig,
) -> Result<MiaReport> {
    if models.len() != plan.num_shadow || corpora.len() != plan.num_shadow {
        return Err(Error::Config(format!(
            "{} models and {} corpora for {} shadows",
            models.len(),
            corpora.len(),
            plan.num_shadow
        )));
    }
    let training: Vec<usize> = plan.training().collect();
    let examples = build_membership_dataset(plan, models, corpora, cfg.kind, cfg.seed)?;
    let v = plan.validation();
    let validation = balance(
        shadow_examples(&models[v], corpora, v, &training, cfg.kind, cfg.seed)?,
        seed::derive_seed(cfg.seed, "balance-validation"),
    );
    let attack_cfg = AttackConfig { seed: seed::derive_seed(cfg.seed, "attack"), ..cfg.attack.clone() };
    let trained = train_attack_model(&examples, &validation, &attack_cfg)?;

    let t = plan.target();
    let target_examples = balance(
        shadow_examples(&models[t], corpora, t, &training, cfg.kind, cfg.seed)?,
        seed::derive_seed(cfg.seed, "balance-target"),
    );
    let target_accuracy = trained.model.accuracy(&target_examples)?;

    let mut per_report: indexmap::IndexMap<(bool, &str), Vec<f64>> = indexmap::IndexMap::new();
    for e in &target_examples {
        per_report
            .entry((e.member, e.report_id.as_str()))
            .or_default()
            .push(trained.model.membership_probability(&e.feature)?);
    }
    let hits = per_report
        .iter()
        .filter(|((member, _), ps)| (Aggregation::Mean.apply(ps) > 0.5) == *member)
        .count();
    let target_report_accuracy = hits as f64 / per_report.len().max(1) as f64;

    let ranks = top_repetition_reports(&corpora[t], cfg.kind, cfg.reports)
        .into_iter()
        .map(|r| mia_rank(&trained.model, &models[t], r, cfg.kind, dict, cfg.aggregation))
        .collect::<Result<Vec<_>>>()?;
    Ok(MiaReport {
        attack_train_accuracy: trained.train_accuracy,
        attack_validation_accuracy: trained.validation_accuracy,
        target_accuracy,
        target_report_accuracy,
        membership_examples: examples.len(),
        ranks,
    })
}
