//! Bridges sentences and configurations to the neural core: vocabularies,
//! input embedding concatenation, BiLSTM context vectors, feature-window
//! extraction, and the two scoring heads.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{
    bilstm_encode, mlp_forward, xavier_uniform, BiLstmStack, MlpParams, NeuralError, NodeId,
    ParamId, ParamStore, Tape, Tensor,
};
use crate::transition::Configuration;
use crate::treebank::{GoldTree, Sentence};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("cannot build vocabularies from an empty corpus")]
    EmptyCorpus,
    #[error("external embeddings are {found}-dimensional, expected {expected}")]
    ExternalDimension { expected: usize, found: usize },
    #[error("external embeddings line {line}: {msg}")]
    ExternalParse { line: usize, msg: String },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Index of the unknown symbol in every open vocabulary.
pub const UNK_ID: usize = 0;
/// Reserved padding entry in the word vocabulary.
pub const PAD_ID: usize = 1;
/// Index of the missing-column symbol in the tag vocabularies.
pub const NONE_ID: usize = 1;

const UNK: &str = "<unk>";
const PAD: &str = "<pad>";
const NONE: &str = "<none>";

/// One symbol table: dense indices from 0, counts kept per symbol.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(from = "Vec<(String, u64)>", into = "Vec<(String, u64)>")]
pub struct SymbolTable {
    entries: Vec<(String, u64)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl From<Vec<(String, u64)>> for SymbolTable {
    fn from(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.clone(), i))
            .collect();
        SymbolTable { entries, index }
    }
}

impl From<SymbolTable> for Vec<(String, u64)> {
    fn from(t: SymbolTable) -> Self {
        t.entries
    }
}

impl SymbolTable {
    fn with_reserved(reserved: &[&str]) -> SymbolTable {
        let entries: Vec<(String, u64)> = reserved.iter().map(|s| (s.to_string(), 0)).collect();
        entries.into()
    }

    fn intern(&mut self, symbol: &str) -> usize {
        if let Some(&i) = self.index.get(symbol) {
            self.entries[i].1 += 1;
            return i;
        }
        self.entries.push((symbol.to_string(), 1));
        let i = self.entries.len() - 1;
        self.index.insert(symbol.to_string(), i);
        i
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.entries[id].0
    }

    pub fn count(&self, symbol: &str) -> u64 {
        self.id(symbol).map(|i| self.entries[i].1).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.as_str())
    }
}

/// The parallel vocabularies behind the input channels and the label head.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Vocabulary {
    pub words: SymbolTable,
    pub upos: SymbolTable,
    pub xpos: SymbolTable,
    pub feats: SymbolTable,
    /// Closed at training time; no unknown entry.
    pub labels: SymbolTable,
    pub min_count: u64,
    /// Whether any non-`_` value was seen per tag channel.
    pub saw_upos: bool,
    pub saw_xpos: bool,
    pub saw_feats: bool,
}

/// Builds the vocabularies from a training corpus.
///
/// Words below `min_count` keep their counts (word dropout needs them) but
/// map to the unknown symbol at lookup time. Missing tag columns (`_`)
/// map to a dedicated none symbol; feats strings are interned whole.
pub fn build_vocab(
    corpus: &[(Sentence, GoldTree)],
    min_count: u64,
) -> Result<Vocabulary, ScorerError> {
    if corpus.is_empty() {
        return Err(ScorerError::EmptyCorpus);
    }
    let mut vocab = Vocabulary {
        words: SymbolTable::with_reserved(&[UNK, PAD]),
        upos: SymbolTable::with_reserved(&[UNK, NONE]),
        xpos: SymbolTable::with_reserved(&[UNK, NONE]),
        feats: SymbolTable::with_reserved(&[UNK, NONE]),
        labels: SymbolTable::with_reserved(&[]),
        min_count,
        saw_upos: false,
        saw_xpos: false,
        saw_feats: false,
    };
    for (sentence, gold) in corpus {
        for tok in &sentence.tokens {
            vocab.words.intern(&tok.form);
            for (value, table, saw) in [
                (&tok.upos, &mut vocab.upos, &mut vocab.saw_upos),
                (&tok.xpos, &mut vocab.xpos, &mut vocab.saw_xpos),
                (&tok.feats, &mut vocab.feats, &mut vocab.saw_feats),
            ] {
                if value != "_" {
                    table.intern(value);
                    *saw = true;
                }
            }
        }
        for arc in gold.arcs() {
            vocab.labels.intern(&arc.label);
        }
    }
    Ok(vocab)
}

impl Vocabulary {
    /// Word index with the frequency cutoff applied.
    pub fn word_id(&self, form: &str) -> usize {
        match self.words.id(form) {
            Some(i) if self.words.count(form) >= self.min_count => i,
            _ => UNK_ID,
        }
    }

    /// Tag index: `_` maps to the none symbol, unseen values to unknown.
    pub fn tag_id(table: &SymbolTable, value: &str) -> usize {
        if value == "_" {
            return NONE_ID;
        }
        table.id(value).unwrap_or(UNK_ID)
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.id(label)
    }

    /// The most frequent training label (lowest index wins ties).
    pub fn most_frequent_label(&self) -> &str {
        let mut best = 0;
        let mut best_count = 0;
        for (i, s) in self.labels.symbols().enumerate() {
            let c = self.labels.count(s);
            if c > best_count {
                best = i;
                best_count = c;
            }
        }
        self.labels.symbol(best)
    }
}

/// All model sizes and training-time constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub dim_word: usize,
    pub dim_upos: usize,
    pub dim_xpos: usize,
    pub dim_feats: usize,
    pub dim_external: usize,
    pub bilstm_out: usize,
    pub bilstm_layers: usize,
    pub mlp_hidden: usize,
    pub epochs: usize,
    /// Feature window: leftmost words of β.
    pub window_beta: usize,
    /// Rightmost words of λ1.
    pub window_lambda1: usize,
    /// Leftmost words of λ2.
    pub window_lambda2_left: usize,
    /// Rightmost words of λ2.
    pub window_lambda2_right: usize,
    pub p_explore: f64,
    pub word_dropout_alpha: f64,
    pub min_count: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim_word: 100,
            dim_upos: 25,
            dim_xpos: 25,
            dim_feats: 25,
            dim_external: 100,
            bilstm_out: 512,
            bilstm_layers: 2,
            mlp_hidden: 100,
            epochs: 30,
            window_beta: 1,
            window_lambda1: 3,
            window_lambda2_left: 1,
            window_lambda2_right: 1,
            p_explore: 0.9,
            word_dropout_alpha: 0.25,
            min_count: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ScorerError> {
        let err = |msg: &str| Err(ScorerError::InvalidHyperparams(msg.to_string()));
        if self.dim_word < 1
            || self.dim_upos < 1
            || self.dim_xpos < 1
            || self.dim_feats < 1
            || self.dim_external < 1
            || self.mlp_hidden < 1
        {
            return err("all embedding and hidden sizes must be at least 1");
        }
        if self.bilstm_out < 2 || self.bilstm_out % 2 != 0 {
            return err("bilstm_out must be even and at least 2");
        }
        if self.bilstm_layers < 1 {
            return err("bilstm_layers must be at least 1");
        }
        if self.window_beta < 1 {
            return err("the feature window needs at least one β word");
        }
        if !(0.0..=1.0).contains(&self.p_explore) {
            return err("p_explore must lie in [0, 1]");
        }
        if self.word_dropout_alpha < 0.0 {
            return err("word_dropout_alpha must be non-negative");
        }
        Ok(())
    }

    /// Total feature-window slots.
    pub fn window_slots(&self) -> usize {
        self.window_beta
            + self.window_lambda1
            + self.window_lambda2_left
            + self.window_lambda2_right
    }
}

/// Which input channels the model concatenates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    pub upos: bool,
    pub xpos: bool,
    pub feats: bool,
    pub external: bool,
}

impl Channels {
    /// Enable a channel when the training data carries content for it.
    pub fn detect(vocab: &Vocabulary, has_external: bool) -> Channels {
        Channels {
            upos: vocab.saw_upos,
            xpos: vocab.saw_xpos,
            feats: vocab.saw_feats,
            external: has_external,
        }
    }
}

/// Pretrained external word vectors, frozen during training.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    pub dim: usize,
    pub words: Vec<String>,
    /// Row-major `words.len() × dim`.
    pub matrix: Vec<f64>,
}

/// Reads the text format: an optional `count dim` header line, then one
/// `word v1 .. vd` line per word. The dimension must match `expected_dim`.
pub fn load_external_embeddings<R: BufRead>(
    source: R,
    expected_dim: usize,
) -> Result<ExternalEmbeddings, ScorerError> {
    let mut words = Vec::new();
    let mut matrix = Vec::new();
    let mut dim: Option<usize> = None;
    for (k, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(ScorerError::ExternalParse {
                line: line_no,
                msg: "expected a word followed by vector components".to_string(),
            });
        }
        let d = fields.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(ScorerError::ExternalParse {
                    line: line_no,
                    msg: format!("expected {} components, found {}", expected, d),
                })
            }
            _ => {}
        }
        words.push(fields[0].to_string());
        for f in &fields[1..] {
            matrix.push(f.parse::<f64>().map_err(|_| ScorerError::ExternalParse {
                line: line_no,
                msg: format!("bad float {:?}", f),
            })?);
        }
    }
    let dim = dim.unwrap_or(expected_dim);
    if dim != expected_dim {
        return Err(ScorerError::ExternalDimension {
            expected: expected_dim,
            found: dim,
        });
    }
    Ok(ExternalEmbeddings { dim, words, matrix })
}

/// Vocabularies, hyperparameters, and every tensor of the scorer.
pub struct Model {
    pub hyper: Hyperparams,
    pub vocab: Vocabulary,
    pub channels: Channels,
    pub store: ParamStore,
    pub(crate) emb_word: ParamId,
    pub(crate) emb_upos: Option<ParamId>,
    pub(crate) emb_xpos: Option<ParamId>,
    pub(crate) emb_feats: Option<ParamId>,
    pub(crate) ext_table: Option<ParamId>,
    pub(crate) ext_index: HashMap<String, usize>,
    pub(crate) ext_words: Vec<String>,
    pub(crate) root_input: ParamId,
    pub(crate) pad_context: ParamId,
    pub(crate) bilstm: BiLstmStack,
    pub(crate) transition_head: MlpParams,
    pub(crate) label_head: MlpParams,
}

impl Model {
    /// Builds a freshly initialized model. Parameter creation order is
    /// fixed, so equal seeds give identical models.
    pub fn new(
        hyper: Hyperparams,
        vocab: Vocabulary,
        channels: Channels,
        external: Option<ExternalEmbeddings>,
        seed: u64,
    ) -> Result<Model, ScorerError> {
        hyper.validate()?;
        if channels.external && external.is_none() {
            return Err(ScorerError::InvalidHyperparams(
                "external channel enabled without embeddings".to_string(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let emb_word = store.add(
            "emb.word",
            xavier_uniform(vocab.words.len(), hyper.dim_word, &mut rng),
        );
        let table = |store: &mut ParamStore,
                         on: bool,
                         name: &str,
                         rows: usize,
                         dim: usize,
                         rng: &mut ChaCha8Rng| {
            if on {
                Some(store.add(name, xavier_uniform(rows, dim, rng)))
            } else {
                None
            }
        };
        let emb_upos = table(
            &mut store,
            channels.upos,
            "emb.upos",
            vocab.upos.len(),
            hyper.dim_upos,
            &mut rng,
        );
        let emb_xpos = table(
            &mut store,
            channels.xpos,
            "emb.xpos",
            vocab.xpos.len(),
            hyper.dim_xpos,
            &mut rng,
        );
        let emb_feats = table(
            &mut store,
            channels.feats,
            "emb.feats",
            vocab.feats.len(),
            hyper.dim_feats,
            &mut rng,
        );
        let input_dim = hyper.dim_word
            + if channels.upos { hyper.dim_upos } else { 0 }
            + if channels.xpos { hyper.dim_xpos } else { 0 }
            + if channels.feats { hyper.dim_feats } else { 0 }
            + if channels.external {
                hyper.dim_external
            } else {
                0
            };
        let root_vec = xavier_uniform(1, input_dim, &mut rng);
        let root_input = store.add(
            "root_input",
            Tensor::from_values(&[input_dim], root_vec.values().to_vec()),
        );
        let pad_vec = xavier_uniform(1, hyper.bilstm_out, &mut rng);
        let pad_context = store.add(
            "pad_context",
            Tensor::from_values(&[hyper.bilstm_out], pad_vec.values().to_vec()),
        );
        let bilstm = BiLstmStack::init(
            &mut store,
            "bilstm",
            input_dim,
            hyper.bilstm_out,
            hyper.bilstm_layers,
            &mut rng,
        );
        let feature_dim = hyper.bilstm_out * hyper.window_slots();
        let transition_head = MlpParams::init(
            &mut store,
            "head.transition",
            feature_dim,
            hyper.mlp_hidden,
            4,
            &mut rng,
        );
        let label_head = MlpParams::init(
            &mut store,
            "head.label",
            feature_dim,
            hyper.mlp_hidden,
            vocab.labels.len().max(1),
            &mut rng,
        );
        let (ext_table, ext_index, ext_words) = match (channels.external, external) {
            (true, Some(ext)) => {
                if ext.dim != hyper.dim_external {
                    return Err(ScorerError::ExternalDimension {
                        expected: hyper.dim_external,
                        found: ext.dim,
                    });
                }
                let rows = ext.words.len().max(1);
                let mut matrix = ext.matrix;
                matrix.resize(rows * ext.dim, 0.0);
                let id =
                    store.add_frozen("ext.table", Tensor::from_values(&[rows, ext.dim], matrix));
                let index = ext
                    .words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (w.clone(), i))
                    .collect();
                (Some(id), index, ext.words)
            }
            _ => (None, HashMap::new(), Vec::new()),
        };
        Ok(Model {
            hyper,
            vocab,
            channels,
            store,
            emb_word,
            emb_upos,
            emb_xpos,
            emb_feats,
            ext_table,
            ext_index,
            ext_words,
            root_input,
            pad_context,
            bilstm,
            transition_head,
            label_head,
        })
    }

    /// Per-word input size after channel concatenation.
    pub fn input_dim(&self) -> usize {
        self.store.get(self.root_input).len()
    }

    /// Fixed feature-vector length fed to both heads.
    pub fn feature_dim(&self) -> usize {
        self.hyper.bilstm_out * self.hyper.window_slots()
    }

    pub fn label_count(&self) -> usize {
        self.vocab.labels.len()
    }
}

/// Context vectors for one sentence plus the shared padding node.
pub struct EncodedSentence {
    /// One context per node, index 0 the dummy root.
    pub contexts: Vec<NodeId>,
    pub pad: NodeId,
}

/// Runs the input concatenation and the BiLSTM stack over a sentence.
///
/// Passing a random source enables training mode: words are replaced by
/// the unknown symbol with probability `α / (α + count)`. Without one the
/// encoding is deterministic. Returns `n + 1` contexts; index 0 is the
/// learned root-position vector run through the BiLSTM.
pub fn encode_sentence(
    model: &Model,
    tape: &mut Tape,
    sentence: &Sentence,
    mut dropout_rng: Option<&mut dyn RngCore>,
) -> Result<EncodedSentence, ScorerError> {
    let store = &model.store;
    let mut inputs = Vec::with_capacity(sentence.len() + 1);
    inputs.push(tape.param(store, model.root_input));
    for tok in &sentence.tokens {
        let mut parts = Vec::with_capacity(5);
        let mut word_id = model.vocab.word_id(&tok.form);
        if let Some(rng) = dropout_rng.as_deref_mut() {
            let alpha = model.hyper.word_dropout_alpha;
            let count = model.vocab.words.count(&tok.form) as f64;
            let p = if alpha > 0.0 {
                alpha / (alpha + count)
            } else {
                0.0
            };
            if rng.gen::<f64>() < p {
                word_id = UNK_ID;
            }
        }
        parts.push(tape.lookup(store, model.emb_word, word_id));
        if let Some(t) = model.emb_upos {
            parts.push(tape.lookup(store, t, Vocabulary::tag_id(&model.vocab.upos, &tok.upos)));
        }
        if let Some(t) = model.emb_xpos {
            parts.push(tape.lookup(store, t, Vocabulary::tag_id(&model.vocab.xpos, &tok.xpos)));
        }
        if let Some(t) = model.emb_feats {
            parts.push(tape.lookup(
                store,
                t,
                Vocabulary::tag_id(&model.vocab.feats, &tok.feats),
            ));
        }
        if let Some(t) = model.ext_table {
            match model.ext_index.get(&tok.form) {
                Some(&row) => parts.push(tape.lookup(store, t, row)),
                None => parts.push(tape.input(vec![0.0; model.hyper.dim_external])),
            }
        }
        inputs.push(tape.concat(&parts));
    }
    let contexts = bilstm_encode(tape, store, &model.bilstm, &inputs)?;
    let pad = tape.param(store, model.pad_context);
    Ok(EncodedSentence { contexts, pad })
}

/// Concatenates the context vectors of the feature window:
/// the first `x` of β, the last `y` of λ1, the first `z` and last `v` of
/// λ2, in that slot order; missing slots use the learned padding vector.
pub fn feature_vector(
    tape: &mut Tape,
    model: &Model,
    encoded: &EncodedSentence,
    c: &Configuration,
) -> NodeId {
    let h = &model.hyper;
    let ctx = |node: usize| encoded.contexts[node];
    let mut slots = Vec::with_capacity(h.window_slots());
    let beta = c.beta();
    for k in 0..h.window_beta {
        slots.push(beta.get(k).map(|&n| ctx(n)).unwrap_or(encoded.pad));
    }
    let l1 = c.lambda1();
    for k in 0..h.window_lambda1 {
        // Left-padded: the rightmost y words keep their relative order.
        let idx = (l1.len() + k).checked_sub(h.window_lambda1);
        slots.push(
            idx.and_then(|i| l1.get(i))
                .map(|&n| ctx(n))
                .unwrap_or(encoded.pad),
        );
    }
    let l2 = c.lambda2();
    for k in 0..h.window_lambda2_left {
        slots.push(l2.get(k).map(|&n| ctx(n)).unwrap_or(encoded.pad));
    }
    for k in 0..h.window_lambda2_right {
        let idx = (l2.len() + k).checked_sub(h.window_lambda2_right);
        slots.push(
            idx.and_then(|i| l2.get(i))
                .map(|&n| ctx(n))
                .unwrap_or(encoded.pad),
        );
    }
    tape.concat(&slots)
}

/// Transition scores in the fixed order `[LEFT_ARC, RIGHT_ARC, SHIFT, NO_ARC]`.
/// Total: legality masking is the caller's concern.
pub fn score_transitions(tape: &mut Tape, model: &Model, h: NodeId) -> Result<NodeId, ScorerError> {
    Ok(mlp_forward(tape, &model.store, &model.transition_head, h)?)
}

/// One score per known dependency label, over the same feature vector.
pub fn score_labels(tape: &mut Tape, model: &Model, h: NodeId) -> Result<NodeId, ScorerError> {
    Ok(mlp_forward(tape, &model.store, &model.label_head, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::initial_config;
    use crate::treebank::Token;

    fn sentence(words: &[(&str, &str)]) -> Sentence {
        Sentence::from_tokens(
            words
                .iter()
                .enumerate()
                .map(|(i, (form, upos))| {
                    let mut t = Token::bare(i + 1, form, upos);
                    t.head = Some(if i == 0 { 0 } else { i });
                    t.deprel = Some(if i == 0 { "root" } else { "dep" }.to_string());
                    t
                })
                .collect(),
        )
    }

    fn corpus() -> Vec<(Sentence, GoldTree)> {
        [
            sentence(&[("the", "DET"), ("cat", "NOUN"), ("sleeps", "VERB")]),
            sentence(&[("the", "DET"), ("dog", "NOUN")]),
        ]
        .into_iter()
        .map(|s| {
            let t = s.gold_tree().unwrap();
            (s, t)
        })
        .collect()
    }

    fn small_hyper() -> Hyperparams {
        Hyperparams {
            dim_word: 6,
            dim_upos: 3,
            dim_xpos: 3,
            dim_feats: 3,
            dim_external: 4,
            bilstm_out: 8,
            bilstm_layers: 2,
            mlp_hidden: 5,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn vocab_counts_and_min_count() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 2).unwrap();
        assert_eq!(vocab.words.count("the"), 2);
        assert_eq!(vocab.words.count("cat"), 1);
        // Shared word keeps one index and survives the cutoff.
        assert_ne!(vocab.word_id("the"), UNK_ID);
        // Singletons map to the unknown symbol at lookup time.
        assert_eq!(vocab.word_id("cat"), UNK_ID);
        assert_eq!(vocab.word_id("never-seen"), UNK_ID);
        assert!(build_vocab(&[], 1).is_err());
    }

    #[test]
    fn all_underscore_feats_vocabulary_is_reserved_only() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let feats: Vec<&str> = vocab.feats.symbols().collect();
        assert_eq!(feats, vec![UNK, NONE]);
        assert!(!vocab.saw_feats);
        assert!(vocab.saw_upos);
    }

    #[test]
    fn default_hyperparams_match_reference_setup() {
        let h = Hyperparams::default();
        assert_eq!(
            (
                h.dim_word,
                h.dim_upos,
                h.dim_xpos,
                h.dim_feats,
                h.dim_external
            ),
            (100, 25, 25, 25, 100)
        );
        assert_eq!((h.bilstm_out, h.bilstm_layers, h.epochs), (512, 2, 30));
        assert_eq!(
            (
                h.window_beta,
                h.window_lambda1,
                h.window_lambda2_left,
                h.window_lambda2_right
            ),
            (1, 3, 1, 1)
        );
        h.validate().unwrap();
    }

    #[test]
    fn input_dim_tracks_channels() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let hyper = Hyperparams::default();
        let channels = Channels::detect(&vocab, false);
        // Only upos carries content in this corpus.
        assert!(channels.upos && !channels.xpos && !channels.feats);
        let model = Model::new(hyper.clone(), vocab.clone(), channels, None, 1).unwrap();
        assert_eq!(model.input_dim(), 100 + 25);
        let all = Channels {
            upos: true,
            xpos: true,
            feats: true,
            external: false,
        };
        let model = Model::new(hyper.clone(), vocab.clone(), all, None, 1).unwrap();
        assert_eq!(model.input_dim(), 100 + 25 + 25 + 25);
        let ext = ExternalEmbeddings {
            dim: 100,
            words: vec!["the".to_string()],
            matrix: vec![0.5; 100],
        };
        let with_ext = Channels {
            external: true,
            ..all
        };
        let model = Model::new(hyper, vocab, with_ext, Some(ext), 1).unwrap();
        assert_eq!(model.input_dim(), 100 + 25 + 25 + 25 + 100);
    }

    #[test]
    fn eval_encoding_is_deterministic() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let model = Model::new(
            small_hyper(),
            vocab.clone(),
            Channels::detect(&vocab, false),
            None,
            7,
        )
        .unwrap();
        let run = || {
            let mut tape = Tape::new();
            let enc = encode_sentence(&model, &mut tape, &corpus[0].0, None).unwrap();
            enc.contexts
                .iter()
                .map(|&c| tape.value(c).to_vec())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert_eq!(run().len(), corpus[0].0.len() + 1);
    }

    #[test]
    fn feature_vector_slots_on_initial_config() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let model = Model::new(
            small_hyper(),
            vocab.clone(),
            Channels::detect(&vocab, false),
            None,
            7,
        )
        .unwrap();
        let mut tape = Tape::new();
        let enc = encode_sentence(&model, &mut tape, &corpus[0].0, None).unwrap();
        let c = initial_config(3).unwrap();
        let h = feature_vector(&mut tape, &model, &enc, &c);
        let hv = tape.value(h).to_vec();
        assert_eq!(hv.len(), model.feature_dim());
        let dim = model.hyper.bilstm_out;
        let slot = |k: usize| &hv[k * dim..(k + 1) * dim];
        let node = |n: usize| tape.value(enc.contexts[n]).to_vec();
        let pad = tape.value(enc.pad).to_vec();
        // β slot: node 1; λ1 slots: [pad, pad, node 0]; λ2 slots: [pad, pad].
        assert_eq!(slot(0), node(1).as_slice());
        assert_eq!(slot(1), pad.as_slice());
        assert_eq!(slot(2), pad.as_slice());
        assert_eq!(slot(3), node(0).as_slice());
        assert_eq!(slot(4), pad.as_slice());
        assert_eq!(slot(5), pad.as_slice());
    }

    #[test]
    fn singleton_lambda2_fills_both_slots() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let model = Model::new(
            small_hyper(),
            vocab.clone(),
            Channels::detect(&vocab, false),
            None,
            7,
        )
        .unwrap();
        let mut tape = Tape::new();
        let enc = encode_sentence(&model, &mut tape, &corpus[0].0, None).unwrap();
        let c =
            crate::transition::Configuration::from_parts(vec![0], vec![1], vec![2, 3], vec![], 3)
                .unwrap();
        let h = feature_vector(&mut tape, &model, &enc, &c);
        let hv = tape.value(h).to_vec();
        let dim = model.hyper.bilstm_out;
        let z_slot = &hv[4 * dim..5 * dim];
        let v_slot = &hv[5 * dim..6 * dim];
        assert_eq!(z_slot, v_slot);
        assert_eq!(z_slot, tape.value(enc.contexts[1]));
    }

    #[test]
    fn heads_have_expected_output_sizes() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let labels = vocab.labels.len();
        let model = Model::new(
            small_hyper(),
            vocab.clone(),
            Channels::detect(&vocab, false),
            None,
            7,
        )
        .unwrap();
        let mut tape = Tape::new();
        let enc = encode_sentence(&model, &mut tape, &corpus[0].0, None).unwrap();
        let c = initial_config(3).unwrap();
        let h = feature_vector(&mut tape, &model, &enc, &c);
        let t = score_transitions(&mut tape, &model, h).unwrap();
        assert_eq!(tape.value(t).len(), 4);
        let l = score_labels(&mut tape, &model, h).unwrap();
        assert_eq!(tape.value(l).len(), labels);
        // Scores respond to the feature vector.
        let c2 = initial_config(3)
            .unwrap()
            .apply(&crate::transition::Transition::shift())
            .unwrap();
        let h2 = feature_vector(&mut tape, &model, &enc, &c2);
        let t2 = score_transitions(&mut tape, &model, h2).unwrap();
        assert_ne!(tape.value(t), tape.value(t2));
    }

    #[test]
    fn word_dropout_hits_rare_words() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        let mut hyper = small_hyper();
        hyper.word_dropout_alpha = 10.0; // make dropout frequent
        let model = Model::new(
            hyper,
            vocab.clone(),
            Channels::detect(&vocab, false),
            None,
            7,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut differs = 0;
        for _ in 0..20 {
            let mut tape = Tape::new();
            let enc = encode_sentence(&model, &mut tape, &corpus[0].0, Some(&mut rng)).unwrap();
            let mut tape2 = Tape::new();
            let enc2 = encode_sentence(&model, &mut tape2, &corpus[0].0, None).unwrap();
            if tape.value(enc.contexts[1]) != tape2.value(enc2.contexts[1]) {
                differs += 1;
            }
        }
        assert!(differs > 5, "dropout never triggered");
    }

    #[test]
    fn external_embeddings_parse_and_validate() {
        let text = "2 3\nthe 0.1 0.2 0.3\ncat 1.0 -1.0 0.5\n";
        let ext = load_external_embeddings(text.as_bytes(), 3).unwrap();
        assert_eq!(ext.words, vec!["the", "cat"]);
        assert_eq!(ext.matrix.len(), 6);
        assert!(matches!(
            load_external_embeddings(text.as_bytes(), 4),
            Err(ScorerError::ExternalDimension {
                expected: 4,
                found: 3
            })
        ));
        let headerless = "the 0.1 0.2\ncat 0.3 0.4\n";
        let ext = load_external_embeddings(headerless.as_bytes(), 2).unwrap();
        assert_eq!(ext.words.len(), 2);
        let ragged = "the 0.1 0.2\ncat 0.3\n";
        assert!(load_external_embeddings(ragged.as_bytes(), 2).is_err());
    }

    #[test]
    fn most_frequent_label_is_deterministic() {
        let corpus = corpus();
        let vocab = build_vocab(&corpus, 1).unwrap();
        // "dep" appears three times, "root" twice.
        assert_eq!(vocab.most_frequent_label(), "dep");
    }
}
