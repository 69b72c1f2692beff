//! CoNLL-U reading/writing and the dependency-tree data model.
//!
//! The reader accepts CoNLL-U v2 text: ten tab-separated columns, UTF-8,
//! blank-line sentence separation, `#`-prefixed comments. Multiword-token
//! lines are carried as passthrough so files round-trip; empty nodes
//! (decimal ids like `5.1`) are rejected in [`ReadMode::Strict`] and kept
//! verbatim in [`ReadMode::Lenient`].
//!
//! Round-trip contract: `write(read(f)) == f` byte for byte for files that
//! use single tabs between columns, carry no trailing whitespace, and end
//! every sentence (including the last) with one blank line. Trailing
//! whitespace on token lines is normalized away on read.


use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Errors from CoNLL-U parsing, validation, and writing.
#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sentence {index}: {msg}")]
    InvalidTree { index: usize, msg: String },
    #[error("cannot write sentence {index}: token {id} has no {what}")]
    MissingAnnotation {
        index: usize,
        id: usize,
        what: &'static str,
    },
}

impl ConlluError {
    fn parse(line: usize, msg: impl Into<String>) -> Self {
        ConlluError::Parse {
            line,
            msg: msg.into(),
        }
    }
}

/// Error building or validating a [`GoldTree`].
#[derive(Debug, Error)]
#[error("invalid tree: {0}")]
pub struct TreeError(pub String);

/// One word line of a CoNLL-U sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Word index, 1-based.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    /// Universal PoS tag.
    pub upos: String,
    /// Language-specific tag; `_` when absent.
    pub xpos: String,
    /// Morphological features column; `_` when absent.
    pub feats: String,
    /// Head index in `0..=n`, or `None` when the column is `_`.
    pub head: Option<usize>,
    /// Dependency relation, or `None` when the column is `_`.
    pub deprel: Option<String>,
    /// Enhanced-dependencies column, passthrough.
    pub deps: String,
    /// Miscellaneous column, passthrough.
    pub misc: String,
}

impl Token {
    /// A token with only id/form/upos set; remaining columns are `_`.
    pub fn bare(id: usize, form: &str, upos: &str) -> Token {
        Token {
            id,
            form: form.to_string(),
            lemma: "_".to_string(),
            upos: upos.to_string(),
            xpos: "_".to_string(),
            feats: "_".to_string(),
            head: None,
            deprel: None,
            deps: "_".to_string(),
            misc: "_".to_string(),
        }
    }
}

/// A multiword-token range line, e.g. `1-2  vámonos  _ ...`.
///
/// Only FORM and MISC may carry content on these lines; the range is kept
/// for validation and the line is re-rendered verbatim on write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwtRange {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub misc: String,
}

/// An empty-node line (decimal id), kept opaque in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyNodeLine {
    /// Integer part of the decimal id; the line is written after this word.
    pub after: usize,
    /// The normalized raw line.
    pub raw: String,
}

/// One CoNLL-U sentence: word lines plus preserved comments and ranges.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub comments: Vec<String>,
    pub mwt_ranges: Vec<MwtRange>,
    pub empty_nodes: Vec<EmptyNodeLine>,
}

impl Sentence {
    pub fn from_tokens(tokens: Vec<Token>) -> Sentence {
        Sentence {
            tokens,
            ..Sentence::default()
        }
    }

    /// Number of syntactic words.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the structural invariants: ids are exactly `1..=n`, heads in
    /// range, multiword ranges non-overlapping and within `1..=n`.
    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.tokens.len();
        for (pos, tok) in self.tokens.iter().enumerate() {
            if tok.id != pos + 1 {
                return Err(TreeError(format!(
                    "token ids must be 1..{}, found {} at position {}",
                    n,
                    tok.id,
                    pos + 1
                )));
            }
            if tok.form.is_empty() {
                return Err(TreeError(format!("token {} has an empty form", tok.id)));
            }
            if let Some(h) = tok.head {
                if h > n {
                    return Err(TreeError(format!(
                        "token {} has head {} out of range 0..{}",
                        tok.id, h, n
                    )));
                }
                if h == tok.id {
                    return Err(TreeError(format!("token {} is its own head", tok.id)));
                }
            }
        }
        let mut covered = vec![false; n + 1];
        for r in &self.mwt_ranges {
            if r.start < 1 || r.end > n || r.start > r.end {
                return Err(TreeError(format!(
                    "multiword range {}-{} outside 1..{}",
                    r.start, r.end, n
                )));
            }
            for i in r.start..=r.end {
                if covered[i] {
                    return Err(TreeError(format!(
                        "multiword range {}-{} overlaps another range",
                        r.start, r.end
                    )));
                }
                covered[i] = true;
            }
        }
        Ok(())
    }

    /// Builds the gold tree from the HEAD/DEPREL columns.
    pub fn gold_tree(&self) -> Result<GoldTree, TreeError> {
        let n = self.tokens.len();
        let mut arcs = Vec::with_capacity(n);
        for tok in &self.tokens {
            let head = tok
                .head
                .ok_or_else(|| TreeError(format!("token {} has no head", tok.id)))?;
            let label = tok
                .deprel
                .clone()
                .ok_or_else(|| TreeError(format!("token {} has no deprel", tok.id)))?;
            arcs.push(Arc {
                head,
                label,
                dep: tok.id,
            });
        }
        GoldTree::new(n, arcs)
    }
}

/// A labeled dependency arc `head -> dep`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arc {
    pub head: usize,
    pub label: String,
    pub dep: usize,
}

impl Arc {
    pub fn new(head: usize, label: &str, dep: usize) -> Arc {
        Arc {
            head,
            label: label.to_string(),
            dep,
        }
    }
}

impl fmt::Display for Arc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.head, self.dep, self.label)
    }
}

/// A gold dependency tree over nodes `0..=n`, node 0 the dummy root.
///
/// Every node `1..=n` has exactly one head and the arc set is acyclic, so
/// the structure is a tree rooted at node 0 (several children of node 0
/// are allowed at this level; single-rootedness is a reader-mode concern).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTree {
    n: usize,
    arcs: Vec<Arc>,
    /// heads[d] = head of d, for d in 1..=n; heads[0] unused.
    heads: Vec<usize>,
}

impl GoldTree {
    pub fn new(n: usize, arcs: Vec<Arc>) -> Result<GoldTree, TreeError> {
        if arcs.len() != n {
            return Err(TreeError(format!(
                "expected {} arcs (one per word), found {}",
                n,
                arcs.len()
            )));
        }
        let mut heads = vec![usize::MAX; n + 1];
        for arc in &arcs {
            if arc.dep < 1 || arc.dep > n {
                return Err(TreeError(format!("dependent {} out of range", arc.dep)));
            }
            if arc.head > n {
                return Err(TreeError(format!("head {} out of range", arc.head)));
            }
            if arc.head == arc.dep {
                return Err(TreeError(format!("node {} is its own head", arc.dep)));
            }
            if heads[arc.dep] != usize::MAX {
                return Err(TreeError(format!("node {} has two heads", arc.dep)));
            }
            heads[arc.dep] = arc.head;
        }
        // With one in-range head per node, cycles are the only way to be
        // disconnected from node 0.
        for start in 1..=n {
            let mut node = start;
            let mut steps = 0;
            while node != 0 {
                node = heads[node];
                steps += 1;
                if steps > n {
                    return Err(TreeError(format!(
                        "cycle through node {} (not reachable from the root)",
                        start
                    )));
                }
            }
        }
        Ok(GoldTree { n, arcs, heads })
    }

    /// Builds a tree from a head vector (`heads[i]` is the head of word `i+1`)
    /// with a single label on every arc. Test and tooling convenience.
    pub fn from_heads(heads: &[usize], label: &str) -> Result<GoldTree, TreeError> {
        let arcs = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Arc::new(h, label, i + 1))
            .collect();
        GoldTree::new(heads.len(), arcs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Head of `dep`.
    pub fn head_of(&self, dep: usize) -> usize {
        self.heads[dep]
    }

    pub fn label_of(&self, dep: usize) -> &str {
        &self.arcs.iter().find(|a| a.dep == dep).unwrap().label
    }

    /// True iff exactly one node depends on the dummy root.
    pub fn is_single_rooted(&self) -> bool {
        self.heads[1..].iter().filter(|&&h| h == 0).count() == 1
    }
}

/// True iff the tree contains a pair of crossing arcs: arcs `i->j`, `k->l`
/// with `min(i,j) < min(k,l) < max(i,j) < max(k,l)`.
pub fn is_nonprojective(tree: &GoldTree) -> bool {
    let spans: Vec<(usize, usize)> = tree
        .arcs()
        .iter()
        .map(|a| (a.head.min(a.dep), a.head.max(a.dep)))
        .collect();
    for (x, &(lo1, hi1)) in spans.iter().enumerate() {
        for &(lo2, hi2) in &spans[x + 1..] {
            if lo1 < lo2 && lo2 < hi1 && hi1 < hi2 {
                return true;
            }
            if lo2 < lo1 && lo1 < hi2 && hi2 < hi1 {
                return true;
            }
        }
    }
    false
}

/// How the reader treats content outside the plain word-line model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    /// Reject empty nodes; sentences with fully annotated heads must form a
    /// valid single-rooted tree.
    Strict,
    /// Pass empty nodes through verbatim; accept partial or multi-rooted
    /// annotation (parser input).
    Lenient,
}

/// Reads CoNLL-U sentences from a byte stream.
pub fn read_conllu<R: BufRead>(source: R, mode: ReadMode) -> Result<Vec<Sentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut builder = SentenceBuilder::new(mode);
    let mut line_no = 0;
    for line in source.lines() {
        line_no += 1;
        let line = line?;
        if line.trim().is_empty() {
            if let Some(s) = builder.flush(line_no)? {
                sentences.push(s);
            }
            continue;
        }
        builder.push_line(&line, line_no)?;
    }
    if let Some(s) = builder.flush(line_no + 1)? {
        sentences.push(s);
    }
    Ok(sentences)
}

struct SentenceBuilder {
    mode: ReadMode,
    sentence: Sentence,
    first_line: usize,
    started: bool,
}

impl SentenceBuilder {
    fn new(mode: ReadMode) -> SentenceBuilder {
        SentenceBuilder {
            mode,
            sentence: Sentence::default(),
            first_line: 0,
            started: false,
        }
    }

    fn push_line(&mut self, line: &str, line_no: usize) -> Result<(), ConlluError> {
        if !self.started {
            self.started = true;
            self.first_line = line_no;
        }
        if line.starts_with('#') {
            if !self.sentence.tokens.is_empty() {
                return Err(ConlluError::parse(line_no, "comment line after word lines"));
            }
            self.sentence.comments.push(line.to_string());
            return Ok(());
        }
        let line = line.trim_end();
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::parse(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id_col = cols[0];
        if id_col.contains('-') {
            return self.push_mwt(&cols, line_no);
        }
        if id_col.contains('.') {
            return self.push_empty_node(&cols, line, line_no);
        }
        let id: usize = id_col
            .parse()
            .map_err(|_| ConlluError::parse(line_no, format!("bad token id {:?}", id_col)))?;
        if id != self.sentence.tokens.len() + 1 {
            return Err(ConlluError::parse(
                line_no,
                format!(
                    "non-contiguous token id {} (expected {})",
                    id,
                    self.sentence.tokens.len() + 1
                ),
            ));
        }
        if cols[1].is_empty() {
            return Err(ConlluError::parse(line_no, "empty FORM column"));
        }
        let head = match cols[6] {
            "_" => None,
            h => Some(h.parse::<usize>().map_err(|_| {
                ConlluError::parse(line_no, format!("bad head {:?}", h))
            })?),
        };
        let deprel = match cols[7] {
            "_" => None,
            d => Some(d.to_string()),
        };
        self.sentence.tokens.push(Token {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel,
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
        Ok(())
    }

    fn push_mwt(&mut self, cols: &[&str], line_no: usize) -> Result<(), ConlluError> {
        let (a, b) = cols[0]
            .split_once('-')
            .ok_or_else(|| ConlluError::parse(line_no, "bad multiword range"))?;
        let start: usize = a
            .parse()
            .map_err(|_| ConlluError::parse(line_no, format!("bad multiword range {:?}", cols[0])))?;
        let end: usize = b
            .parse()
            .map_err(|_| ConlluError::parse(line_no, format!("bad multiword range {:?}", cols[0])))?;
        if start != self.sentence.tokens.len() + 1 {
            return Err(ConlluError::parse(
                line_no,
                format!("multiword range {}-{} does not start at the next word", start, end),
            ));
        }
        for (i, col) in cols.iter().enumerate().take(9).skip(2) {
            if *col != "_" {
                return Err(ConlluError::parse(
                    line_no,
                    format!("multiword line must have _ in column {}", i + 1),
                ));
            }
        }
        self.sentence.mwt_ranges.push(MwtRange {
            start,
            end,
            surface: cols[1].to_string(),
            misc: cols[9].to_string(),
        });
        Ok(())
    }

    fn push_empty_node(&mut self, cols: &[&str], line: &str, line_no: usize) -> Result<(), ConlluError> {
        if self.mode == ReadMode::Strict {
            return Err(ConlluError::parse(
                line_no,
                format!("empty node {:?} not allowed in strict mode", cols[0]),
            ));
        }
        let (int_part, _) = cols[0].split_once('.').unwrap();
        let after: usize = int_part
            .parse()
            .map_err(|_| ConlluError::parse(line_no, format!("bad empty-node id {:?}", cols[0])))?;
        self.sentence.empty_nodes.push(EmptyNodeLine {
            after,
            raw: line.to_string(),
        });
        Ok(())
    }

    fn flush(&mut self, line_no: usize) -> Result<Option<Sentence>, ConlluError> {
        if !self.started {
            return Ok(None);
        }
        let sentence = std::mem::take(&mut self.sentence);
        self.started = false;
        if sentence.tokens.is_empty() && sentence.comments.is_empty() {
            return Ok(None);
        }
        if sentence.tokens.is_empty() {
            return Err(ConlluError::parse(
                self.first_line,
                "comments without word lines",
            ));
        }
        sentence.validate().map_err(|e| ConlluError::Parse {
            line: self.first_line,
            msg: e.0,
        })?;
        for en in &sentence.empty_nodes {
            if en.after > sentence.tokens.len() {
                return Err(ConlluError::parse(
                    self.first_line,
                    format!("empty node {:?} anchored past the last word", en.raw),
                ));
            }
        }
        if self.mode == ReadMode::Strict && sentence.tokens.iter().all(|t| t.head.is_some()) {
            let tree = sentence.gold_tree().map_err(|e| ConlluError::Parse {
                line: self.first_line,
                msg: e.0,
            })?;
            if !tree.is_single_rooted() {
                return Err(ConlluError::parse(
                    self.first_line,
                    "tree has more than one word attached to the dummy root",
                ));
            }
        }
        let _ = line_no;
        Ok(Some(sentence))
    }
}

/// Writes sentences in CoNLL-U format, one blank line after each sentence.
///
/// Every token must carry HEAD and DEPREL; columns are joined with single
/// tabs, so well-formed input round-trips byte-identically.
pub fn write_conllu<W: Write>(sentences: &[Sentence], sink: &mut W) -> Result<(), ConlluError> {
    for (index, sentence) in sentences.iter().enumerate() {
        for tok in &sentence.tokens {
            if tok.head.is_none() {
                return Err(ConlluError::MissingAnnotation {
                    index,
                    id: tok.id,
                    what: "head",
                });
            }
            if tok.deprel.is_none() {
                return Err(ConlluError::MissingAnnotation {
                    index,
                    id: tok.id,
                    what: "deprel",
                });
            }
        }
        write_sentence(sentence, sink)?;
    }
    Ok(())
}

fn write_sentence<W: Write>(sentence: &Sentence, sink: &mut W) -> Result<(), ConlluError> {
    for c in &sentence.comments {
        writeln!(sink, "{}", c)?;
    }
    for en in sentence.empty_nodes.iter().filter(|e| e.after == 0) {
        writeln!(sink, "{}", en.raw)?;
    }
    for tok in &sentence.tokens {
        if let Some(r) = sentence.mwt_ranges.iter().find(|r| r.start == tok.id) {
            writeln!(
                sink,
                "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}",
                r.start, r.end, r.surface, r.misc
            )?;
        }
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            tok.id,
            tok.form,
            tok.lemma,
            tok.upos,
            tok.xpos,
            tok.feats,
            tok.head.map(|h| h.to_string()).unwrap_or_default(),
            tok.deprel.as_deref().unwrap_or(""),
            tok.deps,
            tok.misc
        )?;
        for en in sentence.empty_nodes.iter().filter(|e| e.after == tok.id) {
            writeln!(sink, "{}", en.raw)?;
        }
    }
    writeln!(sink)?;
    Ok(())
}

/// Writes sentences to a string; panics only on formatting bugs.
pub fn write_conllu_string(sentences: &[Sentence]) -> Result<String, ConlluError> {
    let mut buf = Vec::new();
    write_conllu(sentences, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CoNLL-U output is UTF-8"))
}
