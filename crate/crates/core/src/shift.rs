//! Countable Markov shifts, their finite truncations, admissible words and
//! periodic points.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symbol of the alphabet. Countable alphabets are enumerated by `u32` ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(pub u32);

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Transition predicate `a -> b` of a Markov shift.
pub trait TransitionRule: Send + Sync + fmt::Debug {
    fn allowed(&self, a: Letter, b: Letter) -> bool;

    /// `true` when every transition is allowed; truncations then skip the
    /// quadratic adjacency scan.
    fn is_full(&self) -> bool {
        false
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FullShift;

impl TransitionRule for FullShift {
    fn allowed(&self, _: Letter, _: Letter) -> bool {
        true
    }
    fn is_full(&self) -> bool {
        true
    }
    fn describe(&self) -> String {
        "full".into()
    }
}

/// 0-1 transition matrix on the letters `0..n`.
#[derive(Debug, Clone)]
pub struct MatrixRule {
    matrix: Vec<Vec<bool>>,
}

impl MatrixRule {
    pub fn new(matrix: Vec<Vec<bool>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(
                "transition matrix must be square and non-empty".into(),
            ));
        }
        Ok(MatrixRule { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }
}

impl TransitionRule for MatrixRule {
    fn allowed(&self, a: Letter, b: Letter) -> bool {
        let (a, b) = (a.0 as usize, b.0 as usize);
        a < self.matrix.len() && b < self.matrix.len() && self.matrix[a][b]
    }
    fn is_full(&self) -> bool {
        self.matrix.iter().all(|row| row.iter().all(|&x| x))
    }
    fn describe(&self) -> String {
        let rows: Vec<String> = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|&x| if x { '1' } else { '0' }).collect())
            .collect();
        format!("matrix[{}]", rows.join(","))
    }
}

/// Everything allowed except an explicit list of pairs.
#[derive(Debug, Clone, Default)]
pub struct ForbiddenPairs {
    pairs: BTreeSet<(Letter, Letter)>,
}

impl ForbiddenPairs {
    pub fn new(pairs: impl IntoIterator<Item = (Letter, Letter)>) -> Self {
        ForbiddenPairs {
            pairs: pairs.into_iter().collect(),
        }
    }
}

impl TransitionRule for ForbiddenPairs {
    fn allowed(&self, a: Letter, b: Letter) -> bool {
        !self.pairs.contains(&(a, b))
    }
    fn is_full(&self) -> bool {
        self.pairs.is_empty()
    }
    fn describe(&self) -> String {
        let list: Vec<String> = self.pairs.iter().map(|(a, b)| format!("{a}{b}")).collect();
        format!("forbid[{}]", list.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alphabet {
    Finite(Vec<Letter>),
    /// Letters `first, first + 1, ...`.
    Countable { first: u32 },
}

impl Alphabet {
    pub fn is_finite(&self) -> bool {
        matches!(self, Alphabet::Finite(_))
    }

    /// The `i`-th letter in enumeration order.
    pub fn nth(&self, i: usize) -> Option<Letter> {
        match self {
            Alphabet::Finite(v) => v.get(i).copied(),
            Alphabet::Countable { first } => u32::try_from(i)
                .ok()
                .and_then(|i| first.checked_add(i))
                .map(Letter),
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Alphabet::Finite(v) => Some(v.len()),
            Alphabet::Countable { .. } => None,
        }
    }
}

/// Per-letter weight used by [`TruncationRule::WeightBelow`].
pub type WeightHint = Arc<dyn Fn(Letter) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ShiftSpec {
    pub alphabet: Alphabet,
    pub rule: Arc<dyn TransitionRule>,
    pub weight: Option<WeightHint>,
}

impl fmt::Debug for ShiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftSpec")
            .field("alphabet", &self.alphabet)
            .field("rule", &self.rule)
            .field("weight", &self.weight.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl ShiftSpec {
    pub fn new(alphabet: Alphabet, rule: Arc<dyn TransitionRule>) -> Self {
        ShiftSpec {
            alphabet,
            rule,
            weight: None,
        }
    }

    /// Full shift on the letters `0..n`.
    pub fn full(n: u32) -> Self {
        Self::new(Alphabet::Finite((0..n).map(Letter).collect()), Arc::new(FullShift))
    }

    /// Full shift on `first, first + 1, ...`.
    pub fn countable_full(first: u32) -> Self {
        Self::new(Alphabet::Countable { first }, Arc::new(FullShift))
    }

    /// Finite shift on `0..n` given by a 0-1 matrix.
    pub fn from_matrix(matrix: Vec<Vec<bool>>) -> Result<Self> {
        let rule = MatrixRule::new(matrix)?;
        let n = rule.size() as u32;
        Ok(Self::new(
            Alphabet::Finite((0..n).map(Letter).collect()),
            Arc::new(rule),
        ))
    }

    pub fn with_weight(mut self, weight: WeightHint) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn truncate(&self, rule: &TruncationRule) -> Result<TruncatedShift> {
        build_truncation(self, rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruncationRule {
    /// The first `k` letters in enumeration order.
    FirstK(usize),
    /// Letters with weight hint at most `bound`. Countable alphabets are
    /// scanned until `patience` consecutive letters exceed the bound or
    /// `max_scan` letters have been seen.
    WeightBelow {
        bound: f64,
        patience: usize,
        max_scan: usize,
    },
}

impl TruncationRule {
    pub fn weight_below(bound: f64) -> Self {
        TruncationRule::WeightBelow {
            bound,
            patience: 64,
            max_scan: 1 << 22,
        }
    }
}

/// What a truncation kept and dropped.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CutoffNote {
    pub rule: String,
    pub kept: usize,
    pub scanned: usize,
    /// Letters dropped because they had no predecessor or successor inside
    /// the truncation.
    pub pruned: Vec<Letter>,
}

#[derive(Debug, Clone)]
pub enum Adjacency {
    Full(usize),
    Sparse {
        succ: Vec<Vec<u32>>,
        pred: Vec<Vec<u32>>,
    },
}

/// Iterator over neighbour indices.
pub enum Neighbors<'a> {
    Range(std::ops::Range<u32>),
    List(std::slice::Iter<'a, u32>),
}

impl Iterator for Neighbors<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        match self {
            Neighbors::Range(r) => r.next().map(|x| x as usize),
            Neighbors::List(it) => it.next().map(|&x| x as usize),
        }
    }
}

impl Adjacency {
    pub fn len(&self) -> usize {
        match self {
            Adjacency::Full(n) => *n,
            Adjacency::Sparse { succ, .. } => succ.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Adjacency::Full(_))
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        match self {
            Adjacency::Full(n) => i < *n && j < *n,
            Adjacency::Sparse { succ, .. } => succ[i].binary_search(&(j as u32)).is_ok(),
        }
    }

    pub fn successors(&self, i: usize) -> Neighbors<'_> {
        match self {
            Adjacency::Full(n) => Neighbors::Range(0..*n as u32),
            Adjacency::Sparse { succ, .. } => Neighbors::List(succ[i].iter()),
        }
    }

    pub fn predecessors(&self, j: usize) -> Neighbors<'_> {
        match self {
            Adjacency::Full(n) => Neighbors::Range(0..*n as u32),
            Adjacency::Sparse { pred, .. } => Neighbors::List(pred[j].iter()),
        }
    }

    pub fn out_degree(&self, i: usize) -> usize {
        match self {
            Adjacency::Full(n) => *n,
            Adjacency::Sparse { succ, .. } => succ[i].len(),
        }
    }

    pub fn in_degree(&self, j: usize) -> usize {
        match self {
            Adjacency::Full(n) => *n,
            Adjacency::Sparse { pred, .. } => pred[j].len(),
        }
    }

    fn from_predicate(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Self {
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (i, row) in succ.iter_mut().enumerate() {
            for j in 0..n {
                if allowed(i, j) {
                    row.push(j as u32);
                    pred[j].push(i as u32);
                }
            }
        }
        Adjacency::Sparse { succ, pred }
    }
}

/// A finite truncation of a Markov shift, with the letters kept in
/// enumeration order.
#[derive(Debug, Clone)]
pub struct TruncatedShift {
    letters: Vec<Letter>,
    index: HashMap<Letter, usize>,
    adjacency: Adjacency,
    rule: Arc<dyn TransitionRule>,
    pub cutoff: CutoffNote,
}

impl TruncatedShift {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn letter(&self, i: usize) -> Letter {
        self.letters[i]
    }

    pub fn index_of(&self, a: Letter) -> Option<usize> {
        self.index.get(&a).copied()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn rule(&self) -> &Arc<dyn TransitionRule> {
        &self.rule
    }

    pub fn allowed(&self, a: Letter, b: Letter) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.adjacency.allowed(i, j),
            _ => false,
        }
    }

    pub fn word(&self, letters: Vec<Letter>) -> Word {
        let inside = letters.iter().all(|a| self.index.contains_key(a));
        let mut w = Word::new(letters, self.rule.as_ref());
        if !inside {
            w.admissible = false;
            w.closes = false;
        }
        w
    }

    /// Index sequences of all admissible words of length `k`, in
    /// lexicographic order of letter indices.
    pub fn admissible_words(&self, k: usize, limit: usize) -> Result<Vec<Vec<u32>>> {
        let mut out: Vec<Vec<u32>> = Vec::new();
        if k == 0 {
            return Ok(vec![Vec::new()]);
        }
        let mut stack: Vec<u32> = Vec::with_capacity(k);
        fn rec(
            adj: &Adjacency,
            k: usize,
            stack: &mut Vec<u32>,
            out: &mut Vec<Vec<u32>>,
            limit: usize,
        ) -> Result<()> {
            if stack.len() == k {
                if out.len() >= limit {
                    return Err(Error::TooManyCylinders {
                        needed: limit + 1,
                        limit,
                    });
                }
                out.push(stack.clone());
                return Ok(());
            }
            let next: Vec<usize> = match stack.last() {
                None => (0..adj.len()).collect(),
                Some(&l) => adj.successors(l as usize).collect(),
            };
            for j in next {
                stack.push(j as u32);
                rec(adj, k, stack, out, limit)?;
                stack.pop();
            }
            Ok(())
        }
        rec(&self.adjacency, k, &mut stack, &mut out, limit)?;
        Ok(out)
    }

    /// Exact count of admissible words of length `k` (u128, saturating).
    pub fn count_words(&self, k: usize) -> u128 {
        if k == 0 {
            return 1;
        }
        let n = self.len();
        if let Adjacency::Full(_) = self.adjacency {
            return (n as u128).saturating_pow(k as u32);
        }
        let mut v = vec![1u128; n];
        for _ in 1..k {
            let mut next = vec![0u128; n];
            for (i, &vi) in v.iter().enumerate() {
                for j in self.adjacency.successors(i) {
                    next[j] = next[j].saturating_add(vi);
                }
            }
            v = next;
        }
        v.iter().fold(0u128, |acc, &x| acc.saturating_add(x))
    }
}

pub fn build_truncation(spec: &ShiftSpec, rule: &TruncationRule) -> Result<TruncatedShift> {
    let (mut letters, scanned, rule_text) = match rule {
        TruncationRule::FirstK(k) => {
            let mut v = Vec::with_capacity(*k);
            for i in 0..*k {
                match spec.alphabet.nth(i) {
                    Some(a) => v.push(a),
                    None => break,
                }
            }
            let n = v.len();
            (v, n, format!("first {k}"))
        }
        TruncationRule::WeightBelow {
            bound,
            patience,
            max_scan,
        } => {
            let weight = spec.weight.as_ref().ok_or_else(|| {
                Error::InvalidArgument("weight-below truncation needs a weight hint".into())
            })?;
            let mut v = Vec::new();
            let mut over = 0usize;
            let mut i = 0usize;
            while i < *max_scan {
                let Some(a) = spec.alphabet.nth(i) else { break };
                i += 1;
                if weight(a) <= *bound {
                    v.push(a);
                    over = 0;
                } else {
                    over += 1;
                    if !spec.alphabet.is_finite() && over >= *patience {
                        break;
                    }
                }
            }
            (v, i, format!("weight <= {bound}"))
        }
    };
    if letters.is_empty() {
        return Err(Error::EmptyTruncation);
    }

    let full = spec.rule.is_full();
    let mut pruned = Vec::new();
    let adjacency = if full {
        Adjacency::Full(letters.len())
    } else {
        // Repeatedly drop letters that cannot sit inside a bi-infinite path.
        loop {
            let n = letters.len();
            let adj = Adjacency::from_predicate(n, |i, j| spec.rule.allowed(letters[i], letters[j]));
            let dead: Vec<usize> = (0..n)
                .filter(|&i| adj.out_degree(i) == 0 || adj.in_degree(i) == 0)
                .collect();
            if dead.is_empty() {
                break adj;
            }
            let dead_set: BTreeSet<usize> = dead.into_iter().collect();
            let mut kept = Vec::with_capacity(n);
            for (i, a) in letters.into_iter().enumerate() {
                if dead_set.contains(&i) {
                    pruned.push(a);
                } else {
                    kept.push(a);
                }
            }
            letters = kept;
            if letters.is_empty() {
                return Err(Error::Disconnected);
            }
        }
    };
    let index = letters.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    Ok(TruncatedShift {
        cutoff: CutoffNote {
            rule: rule_text,
            kept: letters.len(),
            scanned,
            pruned,
        },
        letters,
        index,
        adjacency,
        rule: spec.rule.clone(),
    })
}

/// A finite word together with its admissibility flags.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Word {
    letters: Vec<Letter>,
    admissible: bool,
    closes: bool,
}

impl Word {
    pub fn new(letters: Vec<Letter>, rule: &dyn TransitionRule) -> Self {
        let admissible = letters.windows(2).all(|w| rule.allowed(w[0], w[1]));
        let closes = match (letters.first(), letters.last()) {
            (Some(&f), Some(&l)) => rule.allowed(l, f),
            _ => false,
        };
        Word {
            letters,
            admissible,
            closes,
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible
    }

    /// Admissible and the last letter may be followed by the first, so the
    /// periodic point `w^infinity` exists.
    pub fn is_cyclic(&self) -> bool {
        self.admissible && self.closes && !self.letters.is_empty()
    }
}

/// The periodic orbit of a cyclic word, stored by its least rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PeriodicOrbit {
    pub representative: Vec<Letter>,
    pub period: usize,
    pub primitive: bool,
}

impl PeriodicOrbit {
    pub fn from_word(word: &Word) -> Result<Self> {
        if !word.is_cyclic() {
            return Err(Error::InadmissibleWord(word.letters.clone()));
        }
        let w = &word.letters;
        let n = w.len();
        let best = (0..n)
            .min_by(|&i, &j| w[i..].iter().chain(&w[..i]).cmp(w[j..].iter().chain(&w[..j])))
            .unwrap_or(0);
        let representative: Vec<Letter> = w[best..].iter().chain(&w[..best]).copied().collect();
        Ok(PeriodicOrbit {
            primitive: smallest_period(w) == n,
            representative,
            period: n,
        })
    }
}

/// Smallest `p` dividing `len` with `w` equal to a power of its length-`p`
/// prefix.
pub fn smallest_period<T: PartialEq>(w: &[T]) -> usize {
    let n = w.len();
    if n == 0 {
        return 0;
    }
    let pi = prefix_function(w);
    let p = n - pi[n - 1];
    if n % p == 0 {
        p
    } else {
        n
    }
}

pub(crate) fn prefix_function<T: PartialEq>(w: &[T]) -> Vec<usize> {
    let mut pi = vec![0usize; w.len()];
    for i in 1..w.len() {
        let mut k = pi[i - 1];
        while k > 0 && w[i] != w[k] {
            k = pi[k - 1];
        }
        if w[i] == w[k] {
            k += 1;
        }
        pi[i] = k;
    }
    pi
}

/// Calls `visit` with the letter indices of every point of period `n` in
/// the truncation (that is, every cyclic admissible word of length `n`),
/// optionally restricted to a first letter. Order is lexicographic in
/// letter indices.
pub fn for_each_fix(
    shift: &TruncatedShift,
    n: usize,
    first: Option<Letter>,
    mut visit: impl FnMut(&[u32]),
) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let adj = shift.adjacency();
    let roots: Vec<usize> = match first {
        Some(a) => vec![shift.index_of(a).ok_or(Error::LetterAbsent(a))?],
        None => (0..shift.len()).collect(),
    };
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    fn rec(adj: &Adjacency, n: usize, stack: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
        let last = *stack.last().expect("non-empty") as usize;
        if stack.len() == n {
            if adj.allowed(last, stack[0] as usize) {
                visit(stack);
            }
            return;
        }
        for j in adj.successors(last) {
            stack.push(j as u32);
            rec(adj, n, stack, visit);
            stack.pop();
        }
    }
    for r in roots {
        stack.clear();
        stack.push(r as u32);
        rec(adj, n, &mut stack, &mut visit);
    }
    Ok(())
}

/// All cyclic admissible words of length `n` (points of `Fix^n`).
pub fn enumerate_fix(shift: &TruncatedShift, n: usize, first: Option<Letter>) -> Result<Vec<Word>> {
    let mut out = Vec::new();
    for_each_fix(shift, n, first, |idx| {
        let letters = idx.iter().map(|&i| shift.letter(i as usize)).collect();
        out.push(Word {
            letters,
            admissible: true,
            closes: true,
        });
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BipReport {
    /// A finite letter set `B` such that every letter has a predecessor and a
    /// successor in `B`.
    pub witness: Option<Vec<Letter>>,
    pub irreducible: bool,
    pub period: usize,
    pub mixing: bool,
}

/// Checks the big-images-and-preimages property and topological mixing on
/// the truncation.
pub fn check_bip_mixing(shift: &TruncatedShift) -> BipReport {
    let n = shift.len();
    let adj = shift.adjacency();
    let witness = greedy_bip_witness(adj).map(|v| v.into_iter().map(|i| shift.letter(i)).collect());
    let (irreducible, period) = match adj {
        Adjacency::Full(_) => (n > 0, 1),
        Adjacency::Sparse { .. } => irreducibility_and_period(adj),
    };
    BipReport {
        witness,
        irreducible,
        period,
        mixing: irreducible && period == 1,
    }
}

fn greedy_bip_witness(adj: &Adjacency) -> Option<Vec<usize>> {
    let n = adj.len();
    if n == 0 {
        return None;
    }
    if adj.is_full() {
        return Some(vec![0]);
    }
    // Requirement i: letter i needs a predecessor in B; n + i: a successor.
    let mut need_pred = vec![true; n];
    let mut need_succ = vec![true; n];
    let mut remaining = 2 * n;
    let mut chosen = Vec::new();
    let mut used = vec![false; n];
    while remaining > 0 {
        let mut best: Option<(usize, usize)> = None;
        for b in 0..n {
            if used[b] {
                continue;
            }
            // b covers "has predecessor" for its successors, and "has
            // successor" for its predecessors.
            let gain = adj.successors(b).filter(|&j| need_pred[j]).count()
                + adj.predecessors(b).filter(|&i| need_succ[i]).count();
            if gain > 0 && best.map_or(true, |(_, g)| gain > g) {
                best = Some((b, gain));
            }
        }
        let (b, _) = best?;
        used[b] = true;
        chosen.push(b);
        for j in adj.successors(b) {
            if need_pred[j] {
                need_pred[j] = false;
                remaining -= 1;
            }
        }
        for i in adj.predecessors(b) {
            if need_succ[i] {
                need_succ[i] = false;
                remaining -= 1;
            }
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

fn bfs_reach(n: usize, start: usize, next: impl Fn(usize) -> Vec<usize>) -> Vec<Option<usize>> {
    let mut level = vec![None; n];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("visited");
        for v in next(u) {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn irreducibility_and_period(adj: &Adjacency) -> (bool, usize) {
    let n = adj.len();
    if n == 0 {
        return (false, 0);
    }
    let fwd = bfs_reach(n, 0, |u| adj.successors(u).collect());
    let bwd = bfs_reach(n, 0, |u| adj.predecessors(u).collect());
    if fwd.iter().any(Option::is_none) || bwd.iter().any(Option::is_none) {
        return (false, 0);
    }
    let mut p = 0usize;
    for u in 0..n {
        let lu = fwd[u].expect("reached") as i64;
        for v in adj.successors(u) {
            let lv = fwd[v].expect("reached") as i64;
            p = gcd(p, (lu + 1 - lv).unsigned_abs() as usize);
        }
    }
    (true, p)
}
