//! A greedy non-projective dependency parsing toolkit.
//!
//! The pipeline: CoNLL-U treebanks go in ([`treebank`]), a list-based
//! transition system decides one word pair at a time ([`transition`]),
//! a dynamic oracle supervises training on erroneous states ([`oracle`]),
//! a BiLSTM + MLP scorer ranks transitions ([`neural`], [`scorer`]),
//! and [`parser`] ties it together with greedy decoding and single-root
//! postprocessing. [`evaluation`] scores output against gold trees.

pub mod evaluation;
pub mod merge;
pub mod model_io;
pub mod neural;
pub mod oracle;
pub mod parser;
pub mod scorer;
pub mod transition;
pub mod treebank;
