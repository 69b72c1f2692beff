//! The dynamic oracle: configuration loss against a gold tree, zero-cost
//! transition sets, and the exploration policy used during training.
//!
//! The loss of a configuration is the minimum number of gold arcs that any
//! completion must miss. It is computed from individual arc reachability
//! plus a cycle count over the union of built and still-buildable gold
//! arcs; [`brute_force_loss`] recomputes the same quantity by exhaustive
//! search and is the referee for the closed-form version.

use std::collections::HashMap;
use std::fmt;
use std::hash::BuildHasherDefault;

use rand::Rng;
use thiserror::Error;

use crate::transition::{
    Configuration, Transition, TransitionError, TransitionKind,
};
use crate::treebank::{Arc, GoldTree};

/// Largest sentence length the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_N: usize = 7;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("configuration is over {config} words but the gold tree has {gold}")]
    MismatchedLength { config: usize, gold: usize },
    #[error("the oracle is undefined on final configurations")]
    FinalConfiguration,
    #[error("exhaustive search limited to n <= {BRUTE_FORCE_MAX_N}, got {0}")]
    SentenceTooLong(usize),
    #[error("the zero-cost transition set must not be empty")]
    EmptyZeroCost,
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Per-configuration loss decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossReport {
    /// Minimum number of gold arcs missed by any completion.
    pub loss: usize,
    /// Gold arcs not in A and no longer buildable.
    pub unreachable: Vec<Arc>,
    /// Vertex-disjoint cycles in A joined with the buildable gold arcs.
    pub cycles: usize,
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arcs = self
            .unreachable
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        write!(
            f,
            "loss={} cycles={} unreachable=[{}]",
            self.loss, self.cycles, arcs
        )
    }
}

/// True iff the gold arc is already built or can still be built from `c`.
///
/// Writing `r`/`l` for the outer/inner endpoint of the arc: the arc is
/// buildable iff `r` is still in the buffer, `l` is still in λ1 whenever
/// `r` is the current focus, the dependent is not yet attached elsewhere,
/// and attaching it would not close a cycle.
pub fn arc_reachable(c: &Configuration, a: &Arc) -> bool {
    if c.arcs().contains(a.head, a.dep) {
        return true;
    }
    let r = a.head.max(a.dep);
    let l = a.head.min(a.dep);
    if !c.beta().contains(&r) {
        return false;
    }
    if c.beta().first() == Some(&r) && !c.lambda1().contains(&l) {
        return false;
    }
    if c.arcs().head_of(a.dep).is_some() {
        return false;
    }
    if c.arcs().has_path(a.dep, a.head) {
        return false;
    }
    true
}

/// The dynamic-oracle loss of `c` with respect to `gold`.
pub fn loss(c: &Configuration, gold: &GoldTree) -> Result<LossReport, OracleError> {
    if c.n() != gold.n() {
        return Err(OracleError::MismatchedLength {
            config: c.n(),
            gold: gold.n(),
        });
    }
    let n = c.n();
    // Union graph A ∪ R: built arcs plus individually buildable gold arcs.
    // Both sides give each dependent at most one head, so cycles in the
    // union are vertex-disjoint and one gold arc must be dropped per cycle.
    let mut union_heads: Vec<Option<usize>> = vec![None; n + 1];
    for d in 1..=n {
        union_heads[d] = c.arcs().head_of(d);
    }
    let mut unreachable = Vec::new();
    for a in gold.arcs() {
        if c.arcs().contains(a.head, a.dep) {
            continue;
        }
        if arc_reachable(c, a) {
            debug_assert!(union_heads[a.dep].is_none());
            union_heads[a.dep] = Some(a.head);
        } else {
            unreachable.push(a.clone());
        }
    }
    let cycles = count_cycles(&union_heads);
    Ok(LossReport {
        loss: unreachable.len() + cycles,
        unreachable,
        cycles,
    })
}

/// Counts cycles in a graph with at most one head per node.
fn count_cycles(heads: &[Option<usize>]) -> usize {
    const FRESH: u8 = 0;
    const ON_PATH: u8 = 1;
    const DONE: u8 = 2;
    let mut color = vec![FRESH; heads.len()];
    let mut cycles = 0;
    let mut path = Vec::new();
    for start in 1..heads.len() {
        if color[start] != FRESH {
            continue;
        }
        path.clear();
        let mut cur = start;
        loop {
            color[cur] = ON_PATH;
            path.push(cur);
            match heads[cur] {
                Some(h) if color[h] == FRESH => cur = h,
                Some(h) if color[h] == ON_PATH => {
                    cycles += 1;
                    break;
                }
                _ => break,
            }
        }
        for &p in &path {
            color[p] = DONE;
        }
    }
    cycles
}

/// The legal transitions that leave the loss unchanged. Never empty.
pub fn zero_cost_transitions(
    c: &Configuration,
    gold: &GoldTree,
) -> Result<Vec<TransitionKind>, OracleError> {
    if c.is_final() {
        return Err(OracleError::FinalConfiguration);
    }
    let base = loss(c, gold)?.loss;
    let mut out = Vec::new();
    for kind in c.legal_transitions()? {
        let succ = c.apply(&probe(kind))?;
        if loss(&succ, gold)?.loss == base {
            out.push(kind);
        }
    }
    debug_assert!(!out.is_empty(), "some legal transition preserves loss");
    Ok(out)
}

/// A throwaway transition for loss probing; labels do not affect the loss.
fn probe(kind: TransitionKind) -> Transition {
    match kind {
        TransitionKind::LeftArc => Transition::left_arc("dep"),
        TransitionKind::RightArc => Transition::right_arc("dep"),
        TransitionKind::Shift => Transition::shift(),
        TransitionKind::NoArc => Transition::no_arc(),
    }
}

/// The label to train toward for an arc transition at `c`.
///
/// The created arc's dependent keeps its gold label whether or not the
/// attachment matches the gold head; `fallback` covers the degenerate case
/// of a dependent outside the tree, which cannot occur for valid inputs.
pub fn oracle_label(
    c: &Configuration,
    gold: &GoldTree,
    kind: TransitionKind,
    fallback: &str,
) -> String {
    let (i, j) = c.focus();
    let dep = match kind {
        TransitionKind::LeftArc => i,
        TransitionKind::RightArc => j,
        _ => None,
    };
    match dep {
        Some(d) if d >= 1 && d <= gold.n() => gold.label_of(d).to_string(),
        _ => fallback.to_string(),
    }
}

/// Training-time exploration: probability of following a loss-increasing
/// transition and the score margin that gates it.
#[derive(Debug, Clone, Copy)]
pub struct ExplorationPolicy {
    pub p_explore: f64,
    pub margin: f64,
}

impl Default for ExplorationPolicy {
    fn default() -> Self {
        ExplorationPolicy {
            p_explore: 0.9,
            margin: 1.0,
        }
    }
}

/// Picks the next transition during training.
///
/// Returns the best-scoring zero-cost transition, except that with
/// probability `p_explore` — and only when the best loss-increasing
/// transition scores above the best zero-cost one minus the margin — the
/// best loss-increasing transition is returned instead.
pub fn explore_next<R: Rng + ?Sized>(
    legal_scores: &[(TransitionKind, f64)],
    zero_cost: &[TransitionKind],
    policy: &ExplorationPolicy,
    rng: &mut R,
) -> Result<TransitionKind, OracleError> {
    if zero_cost.is_empty() {
        return Err(OracleError::EmptyZeroCost);
    }
    let best_of = |pred: &dyn Fn(TransitionKind) -> bool| {
        let mut best: Option<(TransitionKind, f64)> = None;
        for &(kind, score) in legal_scores {
            if pred(kind) && best.map_or(true, |(_, s)| score > s) {
                best = Some((kind, score));
            }
        }
        best
    };
    let (zero_kind, zero_score) = best_of(&|k| zero_cost.contains(&k))
        .ok_or(OracleError::EmptyZeroCost)?;
    let wrong = best_of(&|k| !zero_cost.contains(&k));
    match wrong {
        Some((wrong_kind, wrong_score)) => {
            let aggressive = wrong_score > zero_score - policy.margin;
            if aggressive && rng.gen::<f64>() < policy.p_explore {
                Ok(wrong_kind)
            } else {
                Ok(zero_kind)
            }
        }
        None => Ok(zero_kind),
    }
}

// ---------------------------------------------------------------------
// Brute-force reference oracle.
//
// States are packed into a u64: the buffer start k, the λ1 length s (λ1 is
// always [0..s), λ2 is [s..k)), and one nibble per dependent's head. The
// transition logic below is a direct transcription of the transition
// table, kept independent of `Configuration` on purpose.
// ---------------------------------------------------------------------

const NO_HEAD: u8 = 0xF;

#[derive(Clone, Copy, PartialEq, Eq)]
struct PackedState {
    k: u8,
    s: u8,
    heads: [u8; BRUTE_FORCE_MAX_N + 1],
}

impl PackedState {
    fn key(&self) -> u64 {
        let mut key = (self.k as u64) | ((self.s as u64) << 4);
        for (d, &h) in self.heads.iter().enumerate().skip(1) {
            key |= (h as u64) << (4 + 4 * d);
        }
        key
    }

    fn initial() -> PackedState {
        PackedState {
            k: 1,
            s: 1,
            heads: [NO_HEAD; BRUTE_FORCE_MAX_N + 1],
        }
    }

    fn has_path(&self, from: u8, to: u8) -> bool {
        let mut cur = to;
        while self.heads[cur as usize] != NO_HEAD {
            cur = self.heads[cur as usize];
            if cur == from {
                return true;
            }
        }
        false
    }

    fn successors(&self, n: u8, out: &mut Vec<PackedState>) {
        out.clear();
        if self.k > n {
            return;
        }
        let j = self.k;
        if self.s >= 2 {
            let i = self.s - 1;
            // LEFT_ARC: i > 0, i unattached, no path i ->* j.
            if self.heads[i as usize] == NO_HEAD && !self.has_path(i, j) {
                let mut st = *self;
                st.heads[i as usize] = j;
                st.s -= 1;
                out.push(st);
            }
            // NO_ARC: i > 0.
            let mut st = *self;
            st.s -= 1;
            out.push(st);
        }
        if self.s >= 1 {
            let i = self.s - 1;
            // RIGHT_ARC: j unattached, no path j ->* i.
            if self.heads[j as usize] == NO_HEAD && !self.has_path(j, i) {
                let mut st = *self;
                st.heads[j as usize] = i;
                st.s -= 1;
                out.push(st);
            }
        }
        // SHIFT.
        let mut st = *self;
        st.k += 1;
        st.s = st.k;
        out.push(st);
    }
}

#[derive(Default)]
struct KeyHasher(u64);

impl std::hash::Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_u64(&mut self, x: u64) {
        // splitmix64 finalizer.
        let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        self.0 = z ^ (z >> 31);
    }
}

type Memo = HashMap<u64, u8, BuildHasherDefault<KeyHasher>>;

fn pack(c: &Configuration) -> PackedState {
    let n = c.n();
    let mut st = PackedState {
        k: c.beta().first().copied().unwrap_or(n + 1) as u8,
        s: c.lambda1().len() as u8,
        heads: [NO_HEAD; BRUTE_FORCE_MAX_N + 1],
    };
    for d in 1..=n {
        if let Some(h) = c.arcs().head_of(d) {
            st.heads[d] = h as u8;
        }
    }
    st
}

fn gold_heads(gold: &GoldTree) -> [u8; BRUTE_FORCE_MAX_N + 1] {
    let mut heads = [NO_HEAD; BRUTE_FORCE_MAX_N + 1];
    for a in gold.arcs() {
        heads[a.dep] = a.head as u8;
    }
    heads
}

fn search(
    st: PackedState,
    n: u8,
    gold: &[u8; BRUTE_FORCE_MAX_N + 1],
    memo: &mut Memo,
    prune_zero: bool,
) -> u8 {
    let key = st.key();
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let value = if st.k > n {
        let mut missed = 0;
        for d in 1..=n as usize {
            if gold[d] != NO_HEAD && st.heads[d] != gold[d] {
                missed += 1;
            }
        }
        missed
    } else {
        let mut succs = Vec::with_capacity(4);
        st.successors(n, &mut succs);
        let mut best = u8::MAX;
        for succ in succs {
            best = best.min(search(succ, n, gold, memo, prune_zero));
            // Zero is the global floor, so sibling subtrees cannot improve
            // on it; every memoized value stays exact under this cut.
            if prune_zero && best == 0 {
                break;
            }
        }
        best
    };
    memo.insert(key, value);
    value
}

/// Exhaustive searcher with a memo shared across queries for one tree.
pub struct BruteForceSearch {
    n: usize,
    gold: [u8; BRUTE_FORCE_MAX_N + 1],
    memo: Memo,
}

impl BruteForceSearch {
    pub fn new(gold: &GoldTree) -> Result<BruteForceSearch, OracleError> {
        if gold.n() > BRUTE_FORCE_MAX_N {
            return Err(OracleError::SentenceTooLong(gold.n()));
        }
        Ok(BruteForceSearch {
            n: gold.n(),
            gold: gold_heads(gold),
            memo: Memo::default(),
        })
    }

    /// Minimum gold arcs missed over all completions from `c`.
    pub fn min_missed(&mut self, c: &Configuration) -> Result<usize, OracleError> {
        if c.n() != self.n {
            return Err(OracleError::MismatchedLength {
                config: c.n(),
                gold: self.n,
            });
        }
        Ok(search(pack(c), self.n as u8, &self.gold, &mut self.memo, true) as usize)
    }
}

/// Minimum gold arcs missed over all completions, by exhaustive
/// memoized search. Only defined for `n <= 7`.
pub fn brute_force_loss(c: &Configuration, gold: &GoldTree) -> Result<usize, OracleError> {
    BruteForceSearch::new(gold)?.min_missed(c)
}

/// Exhaustive exploration of every configuration reachable from the
/// initial one, with the minimum-missed-arcs value of each. Verification
/// support for the closed-form loss.
pub struct ReferenceExploration {
    n: usize,
    memo: Memo,
}

impl ReferenceExploration {
    pub fn explore(gold: &GoldTree) -> Result<ReferenceExploration, OracleError> {
        if gold.n() > BRUTE_FORCE_MAX_N {
            return Err(OracleError::SentenceTooLong(gold.n()));
        }
        if gold.n() == 0 {
            return Err(OracleError::MismatchedLength { config: 0, gold: 0 });
        }
        let mut memo = Memo::default();
        search(
            PackedState::initial(),
            gold.n() as u8,
            &gold_heads(gold),
            &mut memo,
            false,
        );
        Ok(ReferenceExploration { n: gold.n(), memo })
    }

    /// Number of distinct reachable configurations.
    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }

    /// The reference loss for a reachable configuration.
    pub fn min_missed(&self, c: &Configuration) -> Option<usize> {
        self.memo.get(&pack(c).key()).map(|&v| v as usize)
    }

    /// Walks every explored state; hands the callback the materialized
    /// configuration, its reference loss, and the reference losses of its
    /// legal successors.
    pub fn for_each_state(&self, mut f: impl FnMut(&Configuration, usize, &[usize])) {
        let n = self.n as u8;
        let mut succs = Vec::with_capacity(4);
        for (&key, &value) in &self.memo {
            let st = unpack_key(key, self.n);
            let config = materialize(&st, self.n);
            st.successors(n, &mut succs);
            let succ_losses: Vec<usize> = succs
                .iter()
                .map(|s| self.memo[&s.key()] as usize)
                .collect();
            f(&config, value as usize, &succ_losses);
        }
    }
}

fn unpack_key(key: u64, n: usize) -> PackedState {
    let mut st = PackedState {
        k: (key & 0xF) as u8,
        s: ((key >> 4) & 0xF) as u8,
        heads: [NO_HEAD; BRUTE_FORCE_MAX_N + 1],
    };
    for d in 1..=n {
        st.heads[d] = ((key >> (4 + 4 * d)) & 0xF) as u8;
    }
    st
}

fn materialize(st: &PackedState, n: usize) -> Configuration {
    let lambda1: Vec<usize> = (0..st.s as usize).collect();
    let lambda2: Vec<usize> = (st.s as usize..st.k as usize).collect();
    let beta: Vec<usize> = (st.k as usize..=n).collect();
    let arcs: Vec<Arc> = (1..=n)
        .filter(|&d| st.heads[d] != NO_HEAD)
        .map(|d| Arc::new(st.heads[d] as usize, "dep", d))
        .collect();
    Configuration::from_parts(lambda1, lambda2, beta, arcs, n)
        .expect("packed states satisfy the configuration invariants")
}
