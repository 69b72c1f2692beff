//! Multilingual treebank merging and source ranking for low-resource
//! training: take the first N sentences of each source, and order
//! candidate sources by how well their models score a sample set.

use crate::treebank::Sentence;

/// Concatenates the first `min(take, available)` sentences of each source,
/// in source order.
pub fn merge_treebanks(sources: &[Vec<Sentence>], take: usize) -> Vec<Sentence> {
    let mut out = Vec::new();
    for source in sources {
        out.extend(source.iter().take(take).cloned());
    }
    out
}

/// One candidate source treebank with its sample-set score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSource {
    pub name: String,
    pub las: f64,
}

/// Sorts sources by LAS, best first; ties keep their input order.
pub fn rank_by_las(mut entries: Vec<RankedSource>) -> Vec<RankedSource> {
    entries.sort_by(|a, b| b.las.partial_cmp(&a.las).expect("scores are finite"));
    entries
}
