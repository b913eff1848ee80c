//! Three-layer sequence tagger.
//!
//! 1. Token representation: the frozen word vector concatenated with the
//!    final hidden states of a character LSTM run over the token.
//! 2. A token-level BiLSTM followed by a linear layer giving one score per
//!    tag; its softmax is the probability vector `P` used by the audits.
//! 3. An optional linear-chain CRF over those scores.
//!
//! `P` is always read before the CRF, so it does not depend on whether a CRF
//! is attached.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, Corpus, NameKind, Position, Report, Split, TagSet, Token};
use crate::embeddings::EmbeddingTable;
use crate::neural::lstm::LstmTrace;
use crate::neural::{
    sgd_epoch, softmax, Activation, CrfParams, Differentiable, Dropout, FfnParams,
    LossKind, LstmParams, Mat, ParamSet, TrainConfig,
};
use crate::perturb::VariantKind;
use crate::{seed, Error, Result};

/// Printable ASCII plus one shared row for every other character.
pub const CHAR_VOCAB: usize = 96;

/// Row of `c` in the character embedding; 0 is the unknown-character row.
pub fn char_index(c: char) -> usize {
    match c as u32 {
        cp @ 32..=126 => (cp - 31) as usize,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub char_dim: usize,
    pub char_hidden: usize,
    pub char_bidirectional: bool,
    pub token_hidden: usize,
    pub crf: bool,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            char_dim: 25,
            char_hidden: 25,
            char_bidirectional: true,
            token_hidden: 100,
            crf: true,
            seed: 0,
        }
    }
}

/// Default epoch budget: 95 with a CRF, 88 without.
pub fn default_epochs(crf: bool) -> usize {
    if crf {
        95
    } else {
        88
    }
}

/// Every trainable tensor of the tagger. The word embedding is not here, so
/// training cannot change it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerParams {
    pub char_embedding: Mat,
    pub char_fwd: LstmParams,
    pub char_bwd: Option<LstmParams>,
    pub token_fwd: LstmParams,
    pub token_bwd: LstmParams,
    pub head: FfnParams,
    pub crf: Option<CrfParams>,
}

impl ParamSet for TaggerParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.char_embedding.data()];
        t.extend(ParamSet::tensors(&self.char_fwd));
        if let Some(b) = &self.char_bwd {
            t.extend(ParamSet::tensors(b));
        }
        t.extend(ParamSet::tensors(&self.token_fwd));
        t.extend(ParamSet::tensors(&self.token_bwd));
        t.extend(ParamSet::tensors(&self.head));
        if let Some(c) = &self.crf {
            t.extend(ParamSet::tensors(c));
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![self.char_embedding.data_mut()];
        t.extend(ParamSet::tensors_mut(&mut self.char_fwd));
        if let Some(b) = &mut self.char_bwd {
            t.extend(ParamSet::tensors_mut(b));
        }
        t.extend(ParamSet::tensors_mut(&mut self.token_fwd));
        t.extend(ParamSet::tensors_mut(&mut self.token_bwd));
        t.extend(ParamSet::tensors_mut(&mut self.head));
        if let Some(c) = &mut self.crf {
            t.extend(ParamSet::tensors_mut(c));
        }
        t
    }

    fn zeros_like(&self) -> Self {
        TaggerParams {
            char_embedding: ParamSet::zeros_like(&self.char_embedding),
            char_fwd: ParamSet::zeros_like(&self.char_fwd),
            char_bwd: self.char_bwd.as_ref().map(ParamSet::zeros_like),
            token_fwd: ParamSet::zeros_like(&self.token_fwd),
            token_bwd: ParamSet::zeros_like(&self.token_bwd),
            head: ParamSet::zeros_like(&self.head),
            crf: self.crf.as_ref().map(ParamSet::zeros_like),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub embedding: EmbeddingTable,
    pub params: TaggerParams,
    pub tagset: TagSet,
    pub config: TaggerConfig,
}

struct CharTrace {
    ids: Vec<usize>,
    fwd: LstmTrace,
    bwd: Option<LstmTrace>,
}

struct SentenceTrace {
    chars: Vec<CharTrace>,
    masks: Option<Vec<Vec<f64>>>,
    token_fwd: LstmTrace,
    token_bwd: LstmTrace,
    hidden: Vec<Vec<f64>>,
    logits: Mat,
}

impl TaggerModel {
    pub fn new(embedding: EmbeddingTable, tagset: TagSet, config: TaggerConfig) -> Result<Self> {
        if config.char_dim == 0 || config.char_hidden == 0 || config.token_hidden == 0 {
            return Err(Error::Config("tagger dimensions must be positive".into()));
        }
        let mut rng = seed::rng(seed::derive_seed(config.seed, "tagger-init"));
        let mut char_embedding = Mat::zeros(CHAR_VOCAB, config.char_dim);
        let bound = (3.0 / config.char_dim as f64).sqrt();
        for v in char_embedding.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        let char_fwd = LstmParams::init(config.char_hidden, config.char_dim, &mut rng);
        let char_bwd = config
            .char_bidirectional
            .then(|| LstmParams::init(config.char_hidden, config.char_dim, &mut rng));
        let directions = if config.char_bidirectional { 2 } else { 1 };
        let m = embedding.dim() + directions * config.char_hidden;
        let token_fwd = LstmParams::init(config.token_hidden, m, &mut rng);
        let token_bwd = LstmParams::init(config.token_hidden, m, &mut rng);
        let head = FfnParams::init(&[2 * config.token_hidden, tagset.len()], Activation::Relu, &mut rng);
        let crf = config.crf.then(|| CrfParams::new(tagset.len()));
        Ok(TaggerModel {
            embedding,
            params: TaggerParams { char_embedding, char_fwd, char_bwd, token_fwd, token_bwd, head, crf },
            tagset,
            config,
        })
    }

    pub fn loss_kind(&self) -> LossKind {
        if self.params.crf.is_some() {
            LossKind::Crf
        } else {
            LossKind::CrossEntropy
        }
    }

    /// Token-BiLSTM input width.
    pub fn token_input_dim(&self) -> usize {
        self.params.token_fwd.input_dim()
    }

    /// The same network with the CRF layer replaced by `crf`.
    pub fn with_crf(&self, crf: Option<CrfParams>) -> TaggerModel {
        let mut m = self.clone();
        m.config.crf = crf.is_some();
        m.params.crf = crf;
        m
    }

    /// Replaces the output layer with zeros, making every `P` uniform.
    pub fn zero_head(&mut self) {
        for t in self.params.head.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn char_features(&self, token: &Token) -> Result<(Vec<f64>, CharTrace)> {
        let ids: Vec<usize> = token.text.chars().map(char_index).collect();
        if ids.is_empty() {
            return Err(Error::Empty("token text"));
        }
        let xs: Vec<Vec<f64>> =
            ids.iter().map(|&i| self.params.char_embedding.row(i).to_vec()).collect();
        let fwd = self.params.char_fwd.forward(&xs)?;
        let mut feat = fwd.last_hidden().unwrap().to_vec();
        let bwd = match &self.params.char_bwd {
            Some(p) => {
                let rev: Vec<Vec<f64>> = xs.into_iter().rev().collect();
                let tr = p.forward(&rev)?;
                feat.extend_from_slice(tr.last_hidden().unwrap());
                Some(tr)
            }
            None => None,
        };
        Ok((feat, CharTrace { ids, fwd, bwd }))
    }

    fn run(&self, tokens: &[Token], dropout: Option<&mut Dropout>) -> Result<SentenceTrace> {
        let mut chars = Vec::with_capacity(tokens.len());
        let mut inputs = Vec::with_capacity(tokens.len());
        for token in tokens {
            let (feat, trace) = self.char_features(token)?;
            let mut x = self.embedding.embed_token(token).to_vec();
            x.extend(feat);
            inputs.push(x);
            chars.push(trace);
        }
        let masks = dropout.map(|d| {
            let masks: Vec<Vec<f64>> = inputs.iter().map(|x| d.mask(x.len())).collect();
            for (x, m) in inputs.iter_mut().zip(&masks) {
                x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
            }
            masks
        });
        let token_fwd = self.params.token_fwd.forward(&inputs)?;
        let rev: Vec<Vec<f64>> = inputs.into_iter().rev().collect();
        let token_bwd = self.params.token_bwd.forward(&rev)?;
        let len = tokens.len();
        let hidden: Vec<Vec<f64>> = (0..len)
            .map(|t| {
                let mut h = token_fwd.hidden()[t].clone();
                h.extend_from_slice(&token_bwd.hidden()[len - 1 - t]);
                h
            })
            .collect();
        let k = self.tagset.len();
        let mut logits = Mat::zeros(len, k);
        for (t, h) in hidden.iter().enumerate() {
            logits.row_mut(t).copy_from_slice(&self.params.head.logits(h)?);
        }
        Ok(SentenceTrace { chars, masks, token_fwd, token_bwd, hidden, logits })
    }

    /// Pre-softmax tag scores, one row per token.
    pub fn emissions(&self, tokens: &[Token]) -> Result<Mat> {
        if tokens.is_empty() {
            return Ok(Mat::zeros(0, self.tagset.len()));
        }
        Ok(self.run(tokens, None)?.logits)
    }

    /// `P` for every token: the softmax of the emission scores.
    pub fn predict_p(&self, tokens: &[Token]) -> Result<Vec<Vec<f64>>> {
        let em = self.emissions(tokens)?;
        Ok((0..em.rows()).map(|t| softmax(em.row(t))).collect())
    }

    /// Viterbi path with a CRF, otherwise per-token argmax of `P` with ties
    /// to the lowest tag index.
    pub fn decode_tags(&self, tokens: &[Token]) -> Result<Vec<usize>> {
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let em = self.emissions(tokens)?;
        match &self.params.crf {
            Some(crf) => crf.viterbi(&em),
            None => Ok((0..em.rows()).map(|t| argmax(em.row(t))).collect()),
        }
    }

    /// Posterior tag marginals after the CRF; `None` without a CRF.
    pub fn crf_marginals(&self, tokens: &[Token]) -> Result<Option<Mat>> {
        match &self.params.crf {
            Some(crf) if !tokens.is_empty() => Ok(Some(crf.marginals(&self.emissions(tokens)?)?)),
            _ => Ok(None),
        }
    }

    fn loss_from_logits(&self, logits: &Mat, gold: &[usize], grad: Option<&mut TaggerParams>) -> Result<(f64, Mat)> {
        match &self.params.crf {
            Some(crf) => {
                let mut scratch;
                let d_trans = match grad {
                    Some(g) => &mut g.crf.as_mut().expect("gradient mirrors model").transitions,
                    None => {
                        scratch = Mat::zeros(crf.transitions.rows(), crf.transitions.cols());
                        &mut scratch
                    }
                };
                crf.nll_and_grad(logits, gold, d_trans)
            }
            None => {
                let mut loss = 0.0;
                let mut d = Mat::zeros(logits.rows(), logits.cols());
                for (t, &y) in gold.iter().enumerate() {
                    let row = logits.row(t);
                    let lse = crate::neural::log_sum_exp(row.iter().copied());
                    loss += lse - row[y];
                    let p = softmax(row);
                    d.row_mut(t).copy_from_slice(&p);
                    d.set(t, y, p[y] - 1.0);
                }
                Ok((loss, d))
            }
        }
    }

    fn check_gold(&self, sentence: &AnnotatedSentence) -> Result<()> {
        if sentence.is_empty() {
            return Err(Error::Empty("training sentence"));
        }
        if sentence.tags.len() != sentence.tokens.len() {
            return Err(Error::Shape("tag count differs from token count".into()));
        }
        if let Some(&bad) = sentence.tags.iter().find(|&&t| t >= self.tagset.len()) {
            return Err(Error::Shape(format!("tag index {bad} outside a tag set of {}", self.tagset.len())));
        }
        Ok(())
    }

    fn backward(&self, trace: &SentenceTrace, d_logits: &Mat, grad: &mut TaggerParams) {
        let len = trace.hidden.len();
        let n = self.params.token_fwd.hidden_dim();
        let mut d_fwd = vec![vec![0.0; n]; len];
        let mut d_bwd = vec![vec![0.0; n]; len];
        let head = &self.params.head;
        for t in 0..len {
            let ht = head.forward(&trace.hidden[t]).expect("checked in forward");
            let dh = head.backward(&ht, d_logits.row(t), &mut grad.head);
            d_fwd[t].copy_from_slice(&dh[..n]);
            d_bwd[len - 1 - t].copy_from_slice(&dh[n..]);
        }
        let dx_f = self.params.token_fwd.backward(&trace.token_fwd, &d_fwd, &mut grad.token_fwd);
        let dx_b = self.params.token_bwd.backward(&trace.token_bwd, &d_bwd, &mut grad.token_bwd);
        let emb = self.embedding.dim();
        let ch = self.params.char_fwd.hidden_dim();
        for t in 0..len {
            let mut dx: Vec<f64> = dx_f[t].iter().zip(&dx_b[len - 1 - t]).map(|(a, b)| a + b).collect();
            if let Some(masks) = &trace.masks {
                dx.iter_mut().zip(&masks[t]).for_each(|(v, k)| *v *= k);
            }
            let ct = &trace.chars[t];
            let steps = ct.ids.len();
            let mut d_last = vec![vec![0.0; ch]; steps];
            d_last[steps - 1].copy_from_slice(&dx[emb..emb + ch]);
            let dc = self.params.char_fwd.backward(&ct.fwd, &d_last, &mut grad.char_fwd);
            for (s, d) in dc.iter().enumerate() {
                grad.char_embedding.row_mut(ct.ids[s]).iter_mut().zip(d).for_each(|(g, v)| *g += v);
            }
            if let (Some(p), Some(tr), Some(g)) = (&self.params.char_bwd, &ct.bwd, grad.char_bwd.as_mut()) {
                d_last[steps - 1].copy_from_slice(&dx[emb + ch..emb + 2 * ch]);
                let dc = p.backward(tr, &d_last, g);
                for (s, d) in dc.iter().enumerate() {
                    let id = ct.ids[steps - 1 - s];
                    grad.char_embedding.row_mut(id).iter_mut().zip(d).for_each(|(g, v)| *g += v);
                }
            }
        }
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Differentiable for TaggerModel {
    type Example = AnnotatedSentence;
    type Params = TaggerParams;

    fn params(&self) -> &TaggerParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut TaggerParams {
        &mut self.params
    }

    fn loss(&self, sentence: &AnnotatedSentence) -> Result<f64> {
        self.check_gold(sentence)?;
        let trace = self.run(&sentence.tokens, None)?;
        Ok(self.loss_from_logits(&trace.logits, &sentence.tags, None)?.0)
    }

    fn loss_and_grad(
        &self,
        sentence: &AnnotatedSentence,
        dropout: Option<&mut Dropout>,
    ) -> Result<(f64, TaggerParams)> {
        self.check_gold(sentence)?;
        let trace = self.run(&sentence.tokens, dropout)?;
        let mut grad = self.params.zeros_like();
        let (loss, d_logits) = self.loss_from_logits(&trace.logits, &sentence.tags, Some(&mut grad))?;
        self.backward(&trace, &d_logits, &mut grad);
        Ok((loss, grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TaggerModel,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

/// Trains a fresh tagger on the train split, keeping the parameters of the
/// epoch with the best validation F1 (the last epoch when there is no
/// validation split). Earlier epochs win ties.
pub fn train_tagger(
    corpus: &Corpus,
    embedding: EmbeddingTable,
    model_cfg: &TaggerConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let train: Vec<AnnotatedSentence> =
        corpus.sentences(Split::Train).filter(|s| !s.is_empty()).cloned().collect();
    if train.is_empty() {
        return Err(Error::Empty("train split"));
    }
    train_cfg.validate()?;
    let has_valid = corpus.split(Split::Valid).next().is_some();
    let mut model = TaggerModel::new(embedding, corpus.tagset.clone(), model_cfg.clone())?;
    let mut history = Vec::with_capacity(train_cfg.max_epochs);
    let mut best: Option<(f64, usize, TaggerParams)> = None;
    for epoch in 0..train_cfg.max_epochs {
        let stats = sgd_epoch(&mut model, &train, train_cfg, epoch)?;
        let valid_f1 = if has_valid { Some(evaluate(&model, corpus, Split::Valid)?.f1) } else { None };
        log::debug!("epoch {epoch}: loss {:.4} valid F1 {valid_f1:?}", stats.mean_loss);
        history.push(EpochRecord { epoch, mean_loss: stats.mean_loss, valid_f1 });
        let score = valid_f1.unwrap_or(epoch as f64);
        if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
            best = Some((score, epoch, model.params.clone()));
        }
    }
    let best_epoch = best.map(|(_, e, p)| {
        model.params = p;
        e
    });
    Ok(TrainOutcome { model, history, best_epoch })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Token-level scores over non-O tags. Per-class rows plus micro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Some ratio was 0/0 and was reported as 0.
    pub undefined: bool,
}

fn ratio(num: usize, den: usize, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores predicted tag sequences against gold ones.
pub fn score_tags(tagset: &TagSet, gold: &[Vec<usize>], predicted: &[Vec<usize>]) -> Result<Metrics> {
    if gold.len() != predicted.len() {
        return Err(Error::Shape(format!("{} gold vs {} predicted sentences", gold.len(), predicted.len())));
    }
    let k = tagset.len();
    let (mut tp, mut fp, mut fn_) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let o = tagset.o_index();
    for (g, p) in gold.iter().zip(predicted) {
        if g.len() != p.len() {
            return Err(Error::Shape("gold and predicted lengths differ".into()));
        }
        for (&g, &p) in g.iter().zip(p) {
            if g == p {
                if g != o {
                    tp[g] += 1;
                }
            } else {
                if p != o {
                    fp[p] += 1;
                }
                if g != o {
                    fn_[g] += 1;
                }
            }
        }
    }
    let mut undefined = false;
    let mut per_class = Vec::new();
    for c in (0..k).filter(|&c| c != o) {
        let precision = ratio(tp[c], tp[c] + fp[c], &mut undefined);
        let recall = ratio(tp[c], tp[c] + fn_[c], &mut undefined);
        per_class.push(ClassMetrics {
            label: tagset.label(c).to_string(),
            tp: tp[c],
            fp: fp[c],
            fn_: fn_[c],
            precision,
            recall,
            f1: harmonic(precision, recall),
        });
    }
    let (t, f, n): (usize, usize, usize) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let precision = ratio(t, t + f, &mut undefined);
    let recall = ratio(t, t + n, &mut undefined);
    Ok(Metrics { per_class, precision, recall, f1: harmonic(precision, recall), undefined })
}

pub fn evaluate(model: &TaggerModel, corpus: &Corpus, split: Split) -> Result<Metrics> {
    let mut gold = Vec::new();
    let mut predicted = Vec::new();
    for s in corpus.sentences(split) {
        predicted.push(model.decode_tags(&s.tokens)?);
        gold.push(s.tags.clone());
    }
    score_tags(&model.tagset, &gold, &predicted)
}

/// `P` at one name-token occurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRecord {
    pub report_id: String,
    pub sentence_index: usize,
    pub token_index: usize,
    pub p: Vec<f64>,
    pub gold_tag: usize,
    pub variant: VariantKind,
    pub name: String,
}

impl ProbRecord {
    /// Probability of the gold tag: the B- tag at a name's first token, the
    /// I- tag at its continuation tokens.
    pub fn score(&self) -> f64 {
        self.p[self.gold_tag]
    }
}

/// Records for the given positions of one report.
pub fn extract_report_probs(
    model: &TaggerModel,
    report: &Report,
    positions: &[Position],
    variant: VariantKind,
) -> Result<Vec<ProbRecord>> {
    let mut out = Vec::with_capacity(positions.len());
    let mut cached: Option<(usize, Vec<Vec<f64>>)> = None;
    for &pos in positions {
        let out_of_range = || Error::PositionOutOfRange {
            report: report.id.clone(),
            sentence: pos.sentence,
            token: pos.token,
        };
        let sentence = report.sentences().get(pos.sentence).ok_or_else(out_of_range)?;
        let token = sentence.tokens.get(pos.token).ok_or_else(out_of_range)?;
        if cached.as_ref().map(|(s, _)| *s) != Some(pos.sentence) {
            cached = Some((pos.sentence, model.predict_p(&sentence.tokens)?));
        }
        let probs = &cached.as_ref().unwrap().1;
        out.push(ProbRecord {
            report_id: report.id.clone(),
            sentence_index: pos.sentence,
            token_index: pos.token,
            p: probs[pos.token].clone(),
            gold_tag: sentence.tags[pos.token],
            variant,
            name: token.text.clone(),
        });
    }
    Ok(out)
}

/// One record per name-token occurrence of `kind` in `corpus`, corpus order.
pub fn extract_name_probs(
    model: &TaggerModel,
    corpus: &Corpus,
    kind: NameKind,
    variant: VariantKind,
) -> Result<Vec<ProbRecord>> {
    let mut out = Vec::new();
    for report in &corpus.reports {
        out.extend(extract_report_probs(model, report, report.positions(kind), variant)?);
    }
    Ok(out)
}

/// CSV with `report_id,sentence,token,variant,name,score` followed by one
/// `p_<tag>` column per tag.
pub fn write_prob_records<W: Write>(records: &[ProbRecord], tagset: &TagSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["report_id", "sentence", "token", "variant", "name", "score"].map(String::from).to_vec();
    header.extend(tagset.labels().iter().map(|l| format!("p_{l}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.report_id.clone(),
            r.sentence_index.to_string(),
            r.token_index.to_string(),
            r.variant.to_string(),
            r.name.clone(),
            format!("{:e}", r.score()),
        ];
        row.extend(r.p.iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
