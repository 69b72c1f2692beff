//! LAS/UAS scoring of system output against gold CoNLL-U, word-level,
//! gold segmentation assumed.

use thiserror::Error;

use crate::treebank::Sentence;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("system has {system} sentences but gold has {gold}")]
    SentenceCount { system: usize, gold: usize },
    #[error("token count mismatch in {sentence}: system {system}, gold {gold}")]
    TokenCount {
        sentence: String,
        system: usize,
        gold: usize,
    },
    #[error("{sentence}: token {token} has no {what}")]
    MissingAnnotation {
        sentence: String,
        token: usize,
        what: &'static str,
    },
    #[error("nothing to score")]
    EmptyInput,
    #[error("macro average over an empty score set")]
    EmptyScoreSet,
}

/// How dependency relations are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeprelMatch {
    /// Compare the universal part before any `:` subtype.
    #[default]
    Universal,
    /// Compare the full string.
    Exact,
}

/// Attachment scores over one system/gold file pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub las: f64,
    pub uas: f64,
    pub correct_heads: usize,
    pub correct_labeled: usize,
    pub total: usize,
}

impl Score {
    /// Machine-readable one-liner: `LAS=<f> UAS=<f> N=<int>`.
    pub fn summary_line(&self) -> String {
        format!("LAS={:.2} UAS={:.2} N={}", self.las, self.uas, self.total)
    }
}

fn sentence_name(index: usize, gold: &Sentence) -> String {
    for c in &gold.comments {
        if let Some(rest) = c.strip_prefix("# sent_id") {
            let id = rest.trim_start_matches([' ', '=']).trim();
            if !id.is_empty() {
                return format!("sentence {} (sent_id {})", index + 1, id);
            }
        }
    }
    format!("sentence {}", index + 1)
}

fn labels_match(system: &str, gold: &str, mode: DeprelMatch) -> bool {
    match mode {
        DeprelMatch::Exact => system == gold,
        DeprelMatch::Universal => {
            let s = system.split(':').next().unwrap_or(system);
            let g = gold.split(':').next().unwrap_or(gold);
            s == g
        }
    }
}

/// Word-level attachment scores. A word is UAS-correct when the heads
/// match and LAS-correct when head and deprel match. All syntactic words
/// count; multiword surface lines and empty nodes are not words.
pub fn evaluate(
    system: &[Sentence],
    gold: &[Sentence],
    mode: DeprelMatch,
) -> Result<Score, EvalError> {
    if system.len() != gold.len() {
        return Err(EvalError::SentenceCount {
            system: system.len(),
            gold: gold.len(),
        });
    }
    let mut correct_heads = 0;
    let mut correct_labeled = 0;
    let mut total = 0;
    for (index, (s, g)) in system.iter().zip(gold).enumerate() {
        if s.len() != g.len() {
            return Err(EvalError::TokenCount {
                sentence: sentence_name(index, g),
                system: s.len(),
                gold: g.len(),
            });
        }
        for (st, gt) in s.tokens.iter().zip(&g.tokens) {
            let missing = |what| EvalError::MissingAnnotation {
                sentence: sentence_name(index, g),
                token: gt.id,
                what,
            };
            let sh = st.head.ok_or_else(|| missing("head"))?;
            let gh = gt.head.ok_or_else(|| missing("head"))?;
            let sl = st.deprel.as_deref().ok_or_else(|| missing("deprel"))?;
            let gl = gt.deprel.as_deref().ok_or_else(|| missing("deprel"))?;
            total += 1;
            if sh == gh {
                correct_heads += 1;
                if labels_match(sl, gl, mode) {
                    correct_labeled += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(Score {
        las: 100.0 * correct_labeled as f64 / total as f64,
        uas: 100.0 * correct_heads as f64 / total as f64,
        correct_heads,
        correct_labeled,
        total,
    })
}

/// Unweighted mean of per-treebank scores; counts are summed.
pub fn macro_average(scores: &[Score]) -> Result<Score, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScoreSet);
    }
    let k = scores.len() as f64;
    Ok(Score {
        las: scores.iter().map(|s| s.las).sum::<f64>() / k,
        uas: scores.iter().map(|s| s.uas).sum::<f64>() / k,
        correct_heads: scores.iter().map(|s| s.correct_heads).sum(),
        correct_labeled: scores.iter().map(|s| s.correct_labeled).sum(),
        total: scores.iter().map(|s| s.total).sum(),
    })
}
