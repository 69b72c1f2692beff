//! The Covington non-projective transition system.
//!
//! A configuration is the 4-tuple `(λ1, λ2, β, A)`: two lists of already
//! processed words (λ1 still pending a decision against the current focus
//! word, λ2 already decided), the buffer of unprocessed words, and the arc
//! set built so far. Four transitions move between configurations:
//! `LEFT_ARC` and `RIGHT_ARC` connect the focus pair and move the λ1 top
//! to λ2, `NO_ARC` moves it without connecting, and `SHIFT` concatenates
//! `λ1·λ2` plus the buffer front back into λ1.

use std::fmt;

use thiserror::Error;

use crate::treebank::{Arc, GoldTree};

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("sentence length must be at least 1")]
    EmptySentence,
    #[error("no transition is legal in a final configuration")]
    FinalConfiguration,
    #[error("{kind} is illegal: {reason}")]
    Illegal { kind: TransitionKind, reason: String },
    #[error("{0} requires a dependency label")]
    MissingLabel(TransitionKind),
    #[error("invalid configuration: {0}")]
    InvalidParts(String),
}

/// The four transition kinds, in the fixed scoring order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    LeftArc,
    RightArc,
    Shift,
    NoArc,
}

/// Scoring order of the transition head outputs.
pub const TRANSITION_KINDS: [TransitionKind; 4] = [
    TransitionKind::LeftArc,
    TransitionKind::RightArc,
    TransitionKind::Shift,
    TransitionKind::NoArc,
];

impl TransitionKind {
    /// Index of this kind in [`TRANSITION_KINDS`].
    pub fn index(self) -> usize {
        match self {
            TransitionKind::LeftArc => 0,
            TransitionKind::RightArc => 1,
            TransitionKind::Shift => 2,
            TransitionKind::NoArc => 3,
        }
    }

    pub fn is_arc(self) -> bool {
        matches!(self, TransitionKind::LeftArc | TransitionKind::RightArc)
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TransitionKind::LeftArc => "LEFT_ARC",
            TransitionKind::RightArc => "RIGHT_ARC",
            TransitionKind::Shift => "SHIFT",
            TransitionKind::NoArc => "NO_ARC",
        };
        f.write_str(name)
    }
}

/// A transition, carrying a dependency label for the arc kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub kind: TransitionKind,
    pub label: Option<String>,
}

impl Transition {
    pub fn left_arc(label: &str) -> Transition {
        Transition {
            kind: TransitionKind::LeftArc,
            label: Some(label.to_string()),
        }
    }

    pub fn right_arc(label: &str) -> Transition {
        Transition {
            kind: TransitionKind::RightArc,
            label: Some(label.to_string()),
        }
    }

    pub fn shift() -> Transition {
        Transition {
            kind: TransitionKind::Shift,
            label: None,
        }
    }

    pub fn no_arc() -> Transition {
        Transition {
            kind: TransitionKind::NoArc,
            label: None,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{}:{}", self.kind, l),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// The arcs built so far: at most one head per dependent, acyclic.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArcSet {
    /// heads[d] = (head, label) of dependent d; index 0 unused.
    heads: Vec<Option<(usize, String)>>,
}

impl ArcSet {
    fn new(n: usize) -> ArcSet {
        ArcSet {
            heads: vec![None; n + 1],
        }
    }

    pub fn head_of(&self, dep: usize) -> Option<usize> {
        self.heads[dep].as_ref().map(|(h, _)| *h)
    }

    pub fn label_of(&self, dep: usize) -> Option<&str> {
        self.heads[dep].as_ref().map(|(_, l)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.heads.iter().filter(|h| h.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.iter().all(|h| h.is_none())
    }

    pub fn contains(&self, head: usize, dep: usize) -> bool {
        self.head_of(dep) == Some(head)
    }

    /// True iff `to` is reachable from `from` along head->dependent arcs.
    /// Walks the unique head chain upward from `to`; O(n).
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let mut cur = to;
        while let Some(h) = self.head_of(cur) {
            if h == from {
                return true;
            }
            cur = h;
        }
        false
    }

    fn add(&mut self, head: usize, label: &str, dep: usize) {
        debug_assert!(self.heads[dep].is_none());
        self.heads[dep] = Some((head, label.to_string()));
    }

    /// Arcs sorted by dependent.
    pub fn arcs(&self) -> Vec<Arc> {
        self.heads
            .iter()
            .enumerate()
            .filter_map(|(dep, h)| {
                h.as_ref().map(|(head, label)| Arc {
                    head: *head,
                    label: label.clone(),
                    dep,
                })
            })
            .collect()
    }
}

/// A parser configuration `(λ1, λ2, β, A)` over nodes `0..=n`.
///
/// Values are persistent: [`Configuration::apply`] returns a new
/// configuration and leaves the input untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    lambda1: Vec<usize>,
    lambda2: Vec<usize>,
    beta: Vec<usize>,
    arcs: ArcSet,
    n: usize,
}

/// The initial configuration `([0], [], [1..n], {})`.
pub fn initial_config(n: usize) -> Result<Configuration, TransitionError> {
    if n == 0 {
        return Err(TransitionError::EmptySentence);
    }
    Ok(Configuration {
        lambda1: vec![0],
        lambda2: Vec::new(),
        beta: (1..=n).collect(),
        arcs: ArcSet::new(n),
        n,
    })
}

impl Configuration {
    /// Builds a configuration from explicit parts, checking all invariants.
    pub fn from_parts(
        lambda1: Vec<usize>,
        lambda2: Vec<usize>,
        beta: Vec<usize>,
        arcs: Vec<Arc>,
        n: usize,
    ) -> Result<Configuration, TransitionError> {
        let mut arc_set = ArcSet::new(n);
        for a in &arcs {
            if a.dep < 1 || a.dep > n || a.head > n {
                return Err(TransitionError::InvalidParts(format!(
                    "arc {} out of range",
                    a
                )));
            }
            if arc_set.heads[a.dep].is_some() {
                return Err(TransitionError::InvalidParts(format!(
                    "dependent {} has two heads",
                    a.dep
                )));
            }
            arc_set.add(a.head, &a.label, a.dep);
        }
        let c = Configuration {
            lambda1,
            lambda2,
            beta,
            arcs: arc_set,
            n,
        };
        c.check_invariants().map_err(TransitionError::InvalidParts)?;
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda1(&self) -> &[usize] {
        &self.lambda1
    }

    pub fn lambda2(&self) -> &[usize] {
        &self.lambda2
    }

    pub fn beta(&self) -> &[usize] {
        &self.beta
    }

    pub fn arcs(&self) -> &ArcSet {
        &self.arcs
    }

    /// The focus pair: rightmost of λ1 and front of β.
    pub fn focus(&self) -> (Option<usize>, Option<usize>) {
        (self.lambda1.last().copied(), self.beta.first().copied())
    }

    /// A configuration is final when the buffer is empty.
    pub fn is_final(&self) -> bool {
        self.beta.is_empty()
    }

    /// The set of legal transition kinds, in scoring order.
    pub fn legal_transitions(&self) -> Result<Vec<TransitionKind>, TransitionError> {
        if self.is_final() {
            return Err(TransitionError::FinalConfiguration);
        }
        Ok(TRANSITION_KINDS
            .iter()
            .copied()
            .filter(|&k| self.check_precondition(k).is_ok())
            .collect())
    }

    pub fn is_legal(&self, kind: TransitionKind) -> bool {
        !self.is_final() && self.check_precondition(kind).is_ok()
    }

    fn check_precondition(&self, kind: TransitionKind) -> Result<(), String> {
        let j = match self.beta.first() {
            Some(&j) => j,
            None => return Err("buffer is empty".to_string()),
        };
        match kind {
            TransitionKind::Shift => Ok(()),
            TransitionKind::NoArc => {
                let i = self.top_checked(kind)?;
                if i == 0 {
                    return Err("focus word i must satisfy i > 0".to_string());
                }
                Ok(())
            }
            TransitionKind::LeftArc => {
                let i = self.top_checked(kind)?;
                if i == 0 {
                    return Err("focus word i must satisfy i > 0".to_string());
                }
                if self.arcs.head_of(i).is_some() {
                    return Err(format!("dependent {} already has a head", i));
                }
                if self.arcs.has_path(i, j) {
                    return Err(format!("arc {}->{} would close a cycle", j, i));
                }
                Ok(())
            }
            TransitionKind::RightArc => {
                let i = self.top_checked(kind)?;
                if self.arcs.head_of(j).is_some() {
                    return Err(format!("dependent {} already has a head", j));
                }
                if self.arcs.has_path(j, i) {
                    return Err(format!("arc {}->{} would close a cycle", i, j));
                }
                Ok(())
            }
        }
    }

    fn top_checked(&self, kind: TransitionKind) -> Result<usize, String> {
        self.lambda1
            .last()
            .copied()
            .ok_or_else(|| format!("{} needs a word in λ1", kind))
    }

    /// Applies a transition, returning the successor configuration.
    pub fn apply(&self, t: &Transition) -> Result<Configuration, TransitionError> {
        if self.is_final() {
            return Err(TransitionError::FinalConfiguration);
        }
        self.check_precondition(t.kind)
            .map_err(|reason| TransitionError::Illegal {
                kind: t.kind,
                reason,
            })?;
        if t.kind.is_arc() && t.label.is_none() {
            return Err(TransitionError::MissingLabel(t.kind));
        }
        let mut next = self.clone();
        let j = next.beta[0];
        match t.kind {
            TransitionKind::LeftArc => {
                let i = next.lambda1.pop().unwrap();
                next.arcs.add(j, t.label.as_deref().unwrap(), i);
                next.lambda2.insert(0, i);
            }
            TransitionKind::RightArc => {
                let i = next.lambda1.pop().unwrap();
                next.arcs.add(i, t.label.as_deref().unwrap(), j);
                next.lambda2.insert(0, i);
            }
            TransitionKind::NoArc => {
                let i = next.lambda1.pop().unwrap();
                next.lambda2.insert(0, i);
            }
            TransitionKind::Shift => {
                next.beta.remove(0);
                next.lambda1.append(&mut next.lambda2);
                next.lambda1.push(j);
            }
        }
        debug_assert_eq!(next.check_invariants(), Ok(()));
        Ok(next)
    }

    /// Full structural check: the three lists partition `{0..n}`, λ1 and λ2
    /// are increasing with λ1 below λ2 below β, β is the suffix `k..n`, and
    /// the arc set is an acyclic forest in which node 0 has no head.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![false; self.n + 1];
        for &x in self.lambda1.iter().chain(&self.lambda2).chain(&self.beta) {
            if x > self.n {
                return Err(format!("node {} out of range", x));
            }
            if seen[x] {
                return Err(format!("node {} appears twice", x));
            }
            seen[x] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err("lists do not cover all nodes".to_string());
        }
        for w in self.lambda1.windows(2).chain(self.lambda2.windows(2)) {
            if w[0] >= w[1] {
                return Err("λ lists must be strictly increasing".to_string());
            }
        }
        if let (Some(&l1max), Some(&l2min)) = (self.lambda1.last(), self.lambda2.first()) {
            if l1max >= l2min {
                return Err("λ1 must lie below λ2".to_string());
            }
        }
        if let Some(&b0) = self.beta.first() {
            let expected: Vec<usize> = (b0..=self.n).collect();
            if self.beta != expected {
                return Err("β must be a contiguous suffix".to_string());
            }
            for &x in self.lambda1.iter().chain(&self.lambda2) {
                if x >= b0 {
                    return Err("processed words must lie below β".to_string());
                }
            }
        }
        if self.arcs.heads.len() != self.n + 1 {
            return Err("arc set sized for a different sentence".to_string());
        }
        if self.arcs.head_of(0).is_some() {
            return Err("node 0 must not have a head".to_string());
        }
        for d in 1..=self.n {
            let mut cur = d;
            let mut steps = 0;
            while let Some(h) = self.arcs.head_of(cur) {
                cur = h;
                steps += 1;
                if steps > self.n {
                    return Err(format!("cycle through node {}", d));
                }
            }
        }
        Ok(())
    }
}

/// Debug rendering `λ1 | λ2 | β | A`: lists as space-separated indices in
/// brackets, arcs as `head->dep:label` sorted by dependent in braces.
impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let arcs = self
            .arcs
            .arcs()
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        write!(
            f,
            "[{}] | [{}] | [{}] | {{{}}}",
            list(&self.lambda1),
            list(&self.lambda2),
            list(&self.beta),
            arcs
        )
    }
}

/// The canonical gold transition sequence for a tree.
///
/// At each step: an arc transition if the gold arc between the focus words
/// exists, else `NO_ARC` while a gold arc remains between the buffer front
/// and a word left of the λ1 top, else `SHIFT` (as early as possible).
/// Applying the sequence from the initial configuration rebuilds the tree
/// exactly, for projective and non-projective trees alike.
pub fn static_oracle(tree: &GoldTree) -> Vec<Transition> {
    let n = tree.n();
    if n == 0 {
        return Vec::new();
    }
    let mut c = initial_config(n).expect("n >= 1");
    let mut seq = Vec::new();
    while !c.is_final() {
        let t = next_gold_transition(&c, tree);
        c = c.apply(&t).expect("gold transition must be legal");
        seq.push(t);
    }
    debug_assert_eq!(c.arcs().len(), n);
    seq
}

fn next_gold_transition(c: &Configuration, tree: &GoldTree) -> Transition {
    let j = c.beta()[0];
    if let Some(&i) = c.lambda1().last() {
        if i > 0 && tree.head_of(i) == j {
            return Transition::left_arc(tree.label_of(i));
        }
        if tree.head_of(j) == i {
            return Transition::right_arc(tree.label_of(j));
        }
        // A gold arc between j and some word strictly left of i keeps the
        // pair walk going; otherwise shift as early as possible.
        let head_pending = tree.head_of(j) < i;
        let dep_pending = (1..i).any(|d| tree.head_of(d) == j && c.arcs().head_of(d).is_none());
        if head_pending || dep_pending {
            return Transition::no_arc();
        }
    }
    Transition::shift()
}
