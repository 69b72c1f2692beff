//! Training (dynamic oracle, exploration, per-step hinge objective),
//! greedy decoding, and single-root postprocessing.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::neural::{adam_step, AdamHyper, AdamState, Tape};
use crate::oracle::{self, ExplorationPolicy, OracleError};
use crate::scorer::{
    encode_sentence, feature_vector, score_labels, score_transitions, Model, ScorerError,
};
use crate::transition::{initial_config, Transition, TransitionError, TransitionKind};
use crate::treebank::{Arc, GoldTree, Sentence};

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("no word is attached to the dummy root")]
    NoRoot,
    #[error("postprocessing: {0}")]
    InvalidForest(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Training-run settings; the model's hyperparameters carry the sizes.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Seed for shuffling, word dropout, and exploration draws.
    pub seed: u64,
    /// Hinge margin, shared by the exploration gate.
    pub margin: f64,
    /// First epoch (1-based) on which exploration is enabled.
    pub exploration_start_epoch: usize,
    /// How many training sentences the per-epoch LAS re-parse samples.
    pub metrics_sample: usize,
    /// Save cadence honored by the driving CLI, in epochs.
    pub checkpoint_every: Option<usize>,
    /// Held-out data, evaluated per epoch; never enters gradient updates.
    pub dev: Option<Vec<(Sentence, GoldTree)>>,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            seed: 1,
            margin: 1.0,
            exploration_start_epoch: 2,
            metrics_sample: 100,
            checkpoint_every: None,
            dev: None,
            adam: AdamHyper::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Sum of hinge terms over the epoch.
    pub hinge_loss: f64,
    /// LAS of a teacher-free re-parse of the sampled training subset.
    pub train_las: f64,
    pub dev_las: Option<f64>,
    /// Cumulative optimizer steps, for gradient-isolation checks.
    pub optimizer_steps: u64,
}

/// Trains the model in place; returns one metrics row per epoch and calls
/// `on_epoch` after each (checkpointing hook).
pub fn train(
    model: &mut Model,
    corpus: &[(Sentence, GoldTree)],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Model, &EpochMetrics),
) -> Result<Vec<EpochMetrics>, ParserError> {
    if corpus.is_empty() {
        return Err(ParserError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam_state = AdamState::new(&model.store);
    let parse_cfg = ParseConfig::default();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for epoch in 1..=cfg.epochs {
        let p_explore = if epoch >= cfg.exploration_start_epoch {
            model.hyper.p_explore
        } else {
            0.0
        };
        let policy = ExplorationPolicy {
            p_explore,
            margin: cfg.margin,
        };
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let (sentence, gold) = &corpus[idx];
            epoch_loss +=
                train_sentence(model, sentence, gold, &policy, cfg, &mut rng, &mut adam_state)?;
        }
        let sample = cfg.metrics_sample.min(corpus.len());
        let train_las = labeled_accuracy(model, &corpus[..sample], &parse_cfg)?;
        let dev_las = match &cfg.dev {
            Some(dev) => Some(labeled_accuracy(model, dev, &parse_cfg)?),
            None => None,
        };
        let row = EpochMetrics {
            epoch,
            hinge_loss: epoch_loss,
            train_las,
            dev_las,
            optimizer_steps: adam_state.step_count(),
        };
        on_epoch(model, &row);
        metrics.push(row);
    }
    Ok(metrics)
}

fn train_sentence(
    model: &mut Model,
    sentence: &Sentence,
    gold: &GoldTree,
    policy: &ExplorationPolicy,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    adam_state: &mut AdamState,
) -> Result<f64, ParserError> {
    let n = sentence.len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut tape = Tape::new();
    let encoded = encode_sentence(model, &mut tape, sentence, Some(rng))?;
    let mut c = initial_config(n)?;
    let mut hinge_terms = Vec::new();
    while !c.is_final() {
        let h = feature_vector(&mut tape, model, &encoded, &c);
        let t_scores = score_transitions(&mut tape, model, h)?;
        let legal = c.legal_transitions()?;
        let zero_cost = oracle::zero_cost_transitions(&c, gold)?;
        let svals = tape.value(t_scores).to_vec();
        let legal_scores: Vec<(TransitionKind, f64)> =
            legal.iter().map(|&k| (k, svals[k.index()])).collect();
        // Transition hinge: best loss-increasing vs best zero-cost score.
        let best_in = |keep: &dyn Fn(TransitionKind) -> bool| -> Option<usize> {
            let mut best: Option<usize> = None;
            for &(kind, score) in &legal_scores {
                if keep(kind) && best.map_or(true, |b| score > svals[b]) {
                    best = Some(kind.index());
                }
            }
            best
        };
        let zero_idx = best_in(&|k| zero_cost.contains(&k)).expect("zero-cost set is never empty");
        if let Some(wrong_idx) = best_in(&|k| !zero_cost.contains(&k)) {
            if cfg.margin + svals[wrong_idx] - svals[zero_idx] > 0.0 {
                let diff = tape.pick_sub(t_scores, wrong_idx, zero_idx);
                hinge_terms.push(tape.relu_plus(diff, cfg.margin));
            }
        }
        let kind = oracle::explore_next(&legal_scores, &zero_cost, policy, rng)?;
        debug_assert!(policy.p_explore > 0.0 || zero_cost.contains(&kind));
        let label = if kind.is_arc() {
            let gold_label =
                oracle::oracle_label(&c, gold, kind, model.vocab.most_frequent_label());
            let l_scores = score_labels(&mut tape, model, h)?;
            let lvals = tape.value(l_scores).to_vec();
            if let Some(gold_idx) = model.vocab.label_id(&gold_label) {
                if lvals.len() > 1 {
                    let mut wrong = if gold_idx == 0 { 1 } else { 0 };
                    for (k, &v) in lvals.iter().enumerate() {
                        if k != gold_idx && v > lvals[wrong] {
                            wrong = k;
                        }
                    }
                    if cfg.margin + lvals[wrong] - lvals[gold_idx] > 0.0 {
                        let diff = tape.pick_sub(l_scores, wrong, gold_idx);
                        hinge_terms.push(tape.relu_plus(diff, cfg.margin));
                    }
                }
            }
            Some(gold_label)
        } else {
            None
        };
        c = c.apply(&Transition { kind, label })?;
    }
    // With exploration off every chosen transition was zero-cost, so the
    // walk must have rebuilt the gold tree.
    debug_assert!(policy.p_explore > 0.0 || oracle::loss(&c, gold)?.loss == 0);
    if log::log_enabled!(log::Level::Debug) {
        debug!("walk finished: {}", oracle::loss(&c, gold)?);
    }
    let mut loss_value = 0.0;
    if !hinge_terms.is_empty() {
        let total = tape.sum(&hinge_terms);
        loss_value = tape.scalar(total);
        tape.backward(total, &mut model.store);
        adam_step(&mut model.store, adam_state, &cfg.adam);
    }
    Ok(loss_value)
}

/// Decoding options.
#[derive(Debug, Clone)]
pub struct ParseConfig {
    /// Deprel assigned to extra roots reattached by postprocessing.
    pub reattach_deprel: String,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            reattach_deprel: "parataxis".to_string(),
        }
    }
}

/// Greedy parse: argmax over legal transitions (ties go to the first kind
/// in scoring order), labels by argmax of the label head; headless words
/// are attached to the root and the single-root postprocessing runs last.
pub fn parse_sentence(
    model: &Model,
    sentence: &Sentence,
    cfg: &ParseConfig,
) -> Result<Vec<Arc>, ParserError> {
    let n = sentence.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let encoded = encode_sentence(model, &mut tape, sentence, None)?;
    let mut c = initial_config(n)?;
    let bound = n + n * (n + 1) / 2;
    let mut transitions = 0;
    while !c.is_final() {
        let h = feature_vector(&mut tape, model, &encoded, &c);
        let t_scores = score_transitions(&mut tape, model, h)?;
        let svals = tape.value(t_scores);
        let legal = c.legal_transitions()?;
        let mut best = legal[0];
        for &k in &legal[1..] {
            if svals[k.index()] > svals[best.index()] {
                best = k;
            }
        }
        let label = if best.is_arc() {
            let l_scores = score_labels(&mut tape, model, h)?;
            let lvals = tape.value(l_scores);
            let mut li = 0;
            for k in 1..lvals.len() {
                if lvals[k] > lvals[li] {
                    li = k;
                }
            }
            Some(model.vocab.labels.symbol(li).to_string())
        } else {
            None
        };
        c = c.apply(&Transition { kind: best, label })?;
        transitions += 1;
        debug_assert!(transitions <= bound, "transition bound exceeded");
    }
    let mut heads = vec![0usize; n];
    let mut labels = vec![String::new(); n];
    for d in 1..=n {
        match c.arcs().head_of(d) {
            Some(h) => {
                heads[d - 1] = h;
                labels[d - 1] = c.arcs().label_of(d).unwrap_or("dep").to_string();
            }
            // Completeness guard: words the walk left unattached hang off
            // the dummy root until postprocessing picks the real one.
            None => {
                heads[d - 1] = 0;
                labels[d - 1] = "root".to_string();
            }
        }
    }
    let upos: Vec<String> = sentence.tokens.iter().map(|t| t.upos.clone()).collect();
    let outcome = postprocess_single_root(&mut heads, &upos)?;
    for &d in &outcome.reattached {
        labels[d - 1] = cfg.reattach_deprel.clone();
    }
    Ok((1..=n)
        .map(|d| Arc {
            head: heads[d - 1],
            label: labels[d - 1].clone(),
            dep: d,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleRootOutcome {
    pub chosen_root: usize,
    /// Words whose head was reassigned, in index order.
    pub reattached: Vec<usize>,
}

/// Reduces multiple children of the dummy root to one: the first verb
/// among them, or the first of them when no verb exists; every other
/// 0-headed word is reattached to the chosen one. Idempotent.
pub fn postprocess_single_root(
    heads: &mut [usize],
    upos: &[String],
) -> Result<SingleRootOutcome, ParserError> {
    let n = heads.len();
    if upos.len() != n {
        return Err(ParserError::InvalidForest(format!(
            "{} heads but {} tags",
            n,
            upos.len()
        )));
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(ParserError::InvalidForest(format!(
                "word {} has head {} out of range",
                i + 1,
                h
            )));
        }
    }
    let roots: Vec<usize> = (1..=n).filter(|&d| heads[d - 1] == 0).collect();
    if roots.is_empty() {
        return Err(ParserError::NoRoot);
    }
    if roots.len() == 1 {
        return Ok(SingleRootOutcome {
            chosen_root: roots[0],
            reattached: Vec::new(),
        });
    }
    let mut chosen = roots[0];
    for &r in &roots {
        if upos[r - 1] == "VERB" {
            chosen = r;
            break;
        }
    }
    let mut reattached = Vec::new();
    for &r in &roots {
        if r != chosen {
            heads[r - 1] = chosen;
            reattached.push(r);
        }
    }
    Ok(SingleRootOutcome {
        chosen_root: chosen,
        reattached,
    })
}

/// LAS (exact label match) of re-parsing gold-annotated sentences.
pub fn labeled_accuracy(
    model: &Model,
    corpus: &[(Sentence, GoldTree)],
    cfg: &ParseConfig,
) -> Result<f64, ParserError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (sentence, gold) in corpus {
        let arcs = parse_sentence(model, sentence, cfg)?;
        for arc in &arcs {
            total += 1;
            if gold.head_of(arc.dep) == arc.head && gold.label_of(arc.dep) == arc.label {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * correct as f64 / total as f64)
}
