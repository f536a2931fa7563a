//! Renewal functions, closed-orbit counts `M_f(t)` and `R_f(t)`,
//! equidistribution sums and the sample-point bijection check.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{cyclic_sum, eval_birkhoff_along, Potential};
use crate::shift::{Letter, TruncatedShift};
use crate::thermo::PressureFamily;

/// Default cap on visited search nodes.
pub const DEFAULT_NODE_LIMIT: u64 = 2_000_000_000;

/// Longest orbit length the exact rational accumulation supports
/// (`lcm(1..=64)` times the counts still fits in `u128`).
pub const MAX_ORBIT_LENGTH: usize = 64;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub enum Weight {
    One,
    /// Indicator of the cylinder of a word.
    Cylinder(Vec<Letter>),
}

impl Weight {
    fn at(&self, y: &[Letter]) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Cylinder(p) => f64::from(u8::from(y.starts_with(p))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalQuery {
    /// Prefix of the base point `x`; it is extended aperiodically.
    pub base_point: Vec<Letter>,
    pub weight: Weight,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct RenewalValue {
    pub value: f64,
    /// Sum over counted preimages of the accumulated evaluation radius; a
    /// preimage whose margin is below its radius could flip.
    pub radius: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone)]
pub struct CountOptions {
    /// Term length for non-locally-constant potentials.
    pub eval_depth: usize,
    pub node_limit: u64,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            eval_depth: 12,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

fn term_length(f: &dyn Potential, depth: usize) -> usize {
    f.locally_constant_depth().map_or(depth, |d| d.max(1)).max(1)
}

/// Certified lower bounds `I(f, a)` on depth-one cylinders, by truncation
/// index.
fn lower_bounds(f: &dyn Potential, shift: &TruncatedShift) -> Vec<f64> {
    shift.letters().iter().map(|&a| f.eval(&[a]).lo()).collect()
}

fn strict_positivity(lower: &[f64]) -> Result<f64> {
    let c = lower.iter().copied().fold(f64::INFINITY, f64::min);
    if !(c > 0.0) {
        return Err(Error::NotStrictlyPositive(c));
    }
    Ok(c)
}

/// A non-periodic point extending `prefix`: a path to a letter `v` lying on
/// two cycles `C1 != C2`, followed by `C2 C1 C2 C1 C1 C2 C1 C1 C1 ...`.
pub fn aperiodic_extension(shift: &TruncatedShift, prefix: &[Letter], length: usize) -> Result<Vec<Letter>> {
    let adj = shift.adjacency();
    let mut idx: Vec<usize> = Vec::with_capacity(prefix.len());
    for &a in prefix {
        idx.push(shift.index_of(a).ok_or(Error::LetterAbsent(a))?);
    }
    if idx.windows(2).any(|w| !adj.allowed(w[0], w[1])) {
        return Err(Error::InadmissibleWord(prefix.to_vec()));
    }
    let n = shift.len();
    let start = *idx.last().ok_or_else(|| Error::InvalidArgument("empty base point".into()))?;

    // Shortest path u -> v, as the letters after u.
    let path = |u: usize, v: usize| -> Option<Vec<usize>> {
        let mut parent = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([u]);
        seen[u] = true;
        while let Some(x) = queue.pop_front() {
            for y in adj.successors(x) {
                if y == v {
                    let mut out = vec![v];
                    let mut cur = x;
                    while cur != u {
                        out.push(cur);
                        cur = parent[cur];
                    }
                    out.reverse();
                    return Some(out);
                }
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        None
    };

    let mut order = vec![start];
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        // Cycles through v leaving by different first edges, as the letters
        // after v ending with v.
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        for u in adj.successors(v) {
            let c = if u == v { Some(vec![v]) } else { path(u, v).map(|p| [vec![u], p].concat()) };
            if let Some(c) = c {
                cycles.push(c);
                if cycles.len() == 2 {
                    break;
                }
            }
        }
        if cycles.len() == 2 {
            let lead: Vec<usize> = if v == start { Vec::new() } else { path(start, v).expect("reachable") };
            let mut out: Vec<usize> = idx.clone();
            out.extend(&lead);
            let mut run = 1;
            while out.len() < length {
                out.extend(&cycles[1]);
                for _ in 0..run {
                    out.extend(&cycles[0]);
                }
                run += 1;
            }
            // Run lengths of cycles[0] grow, so the point is never periodic.
            out.truncate(length.max(prefix.len()));
            return Ok(out.into_iter().map(|i| shift.letter(i)).collect());
        }
        for u in adj.successors(v) {
            if !seen[u] {
                seen[u] = true;
                order.push(u);
            }
        }
    }
    Err(Error::SamplePointPeriodic(prefix.to_vec()))
}

struct RenewalSearch<'a> {
    f: &'a dyn Potential,
    shift: &'a TruncatedShift,
    weight: &'a Weight,
    term: usize,
    /// Predecessors of each letter index, sorted by lower bound.
    preds: Vec<Vec<(f64, usize)>>,
    buf: Vec<Letter>,
    nodes: u64,
    limit: u64,
    value: f64,
    radius: f64,
}

impl RenewalSearch<'_> {
    /// Counts `y = buf[start..]` (already prepended) with remaining budget
    /// `r`, and recurses into its preimages.
    fn visit(&mut self, start: usize, r: f64, path_radius: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::BudgetExplosion {
                limit: self.limit,
                partial: self.value,
            });
        }
        if r >= 0.0 {
            let w = self.weight.at(&self.buf[start..]);
            self.value += w;
            if w != 0.0 {
                self.radius += path_radius;
            }
        }
        if start == 0 {
            return Ok(());
        }
        let head = self.shift.index_of(self.buf[start]).expect("letter in truncation");
        for k in 0..self.preds[head].len() {
            let (lo, a) = self.preds[head][k];
            if lo > r {
                break;
            }
            let s = start - 1;
            self.buf[s] = self.shift.letter(a);
            let end = (s + self.term).min(self.buf.len());
            let e = self.f.eval(&self.buf[s..end]);
            let child = r - e.value;
            // f > 0, so nothing below a negative budget is counted.
            if child >= 0.0 {
                self.visit(s, child, path_radius + e.radius)?;
            }
        }
        Ok(())
    }
}

/// `N_f(phi, x, t)`: weighted count of preimages `y` of `x` (all orders)
/// with `S_n f(y) <= t`, by depth-first search over the preimage tree.
/// Budgets are decremented along each path, so evaluating at a preimage
/// with the reduced budget reproduces the subtree sum bit for bit.
pub fn renewal_count(
    f: &dyn Potential,
    query: &RenewalQuery,
    shift: &TruncatedShift,
    options: &CountOptions,
) -> Result<RenewalValue> {
    let lower = lower_bounds(f, shift);
    let c = strict_positivity(&lower)?;
    if query.t < 0.0 {
        return Ok(RenewalValue {
            value: 0.0,
            radius: 0.0,
            nodes: 0,
        });
    }
    let term = term_length(f, options.eval_depth);
    let max_depth = (query.t / c).floor() as usize + 1;
    let ext_len = query.base_point.len().max(term + 1);
    let x = aperiodic_extension(shift, &query.base_point, ext_len)?;
    let mut buf = vec![Letter(0); max_depth + 1];
    let front = buf.len();
    buf.extend(&x);
    let preds = (0..shift.len())
        .map(|j| {
            let mut v: Vec<(f64, usize)> = shift.adjacency().predecessors(j).map(|i| (lower[i], i)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        })
        .collect();
    let mut search = RenewalSearch {
        f,
        shift,
        weight: &query.weight,
        term,
        preds,
        buf,
        nodes: 0,
        limit: options.node_limit,
        value: 0.0,
        radius: 0.0,
    };
    search.visit(front, query.t, 0.0)?;
    Ok(RenewalValue {
        value: search.value,
        radius: search.radius,
        nodes: search.nodes,
    })
}

/// The one-step preimages `a x` of a base point with their `f` values, as
/// used on the right-hand side of the renewal equation. Each entry is
/// `(preimage prefix, f(a x))`.
pub fn one_step_preimages(
    f: &dyn Potential,
    base_point: &[Letter],
    shift: &TruncatedShift,
    options: &CountOptions,
) -> Result<Vec<(Vec<Letter>, f64)>> {
    let term = term_length(f, options.eval_depth);
    let x = aperiodic_extension(shift, base_point, base_point.len().max(term + 1))?;
    let head = shift.index_of(x[0]).expect("letter in truncation");
    let lower = lower_bounds(f, shift);
    let mut preds: Vec<(f64, usize)> = shift.adjacency().predecessors(head).map(|i| (lower[i], i)).collect();
    preds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(preds
        .into_iter()
        .map(|(_, a)| {
            let mut y = Vec::with_capacity(x.len() + 1);
            y.push(shift.letter(a));
            y.extend(&x);
            let v = f.eval(&y[..term.min(y.len())]).value;
            (y, v)
        })
        .collect())
}

/// Exact per-length orbit counts of one search, binned by threshold.
#[derive(Debug, Clone, Default)]
struct SweepCounts {
    /// `all[n][b]`: words of length `n` in `Fix^n` with `S_n f` in bin `b`.
    all: Vec<Vec<u64>>,
    primitive: Vec<Vec<u64>>,
    /// Nodes whose pruning bound falls in bin `b`.
    nodes: Vec<u64>,
    /// Per length: `sum S_n g / S_n f` over words with `S_n f <= thresholds[0]`.
    ratio: Vec<f64>,
    /// The same over primitive words only.
    ratio_primitive: Vec<f64>,
}

impl SweepCounts {
    fn new(n_max: usize, bins: usize) -> Self {
        SweepCounts {
            all: vec![vec![0; bins]; n_max + 1],
            primitive: vec![vec![0; bins]; n_max + 1],
            nodes: vec![0; bins],
            ratio: vec![0.0; n_max + 1],
            ratio_primitive: vec![0.0; n_max + 1],
        }
    }

    fn merge(&mut self, other: &SweepCounts) {
        for (a, b) in self.all.iter_mut().zip(&other.all) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.primitive.iter_mut().zip(&other.primitive) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.nodes.iter_mut().zip(&other.nodes).for_each(|(x, y)| *x += y);
        self.ratio.iter_mut().zip(&other.ratio).for_each(|(x, y)| *x += y);
        self.ratio_primitive
            .iter_mut()
            .zip(&other.ratio_primitive)
            .for_each(|(x, y)| *x += y);
    }
}

struct Sweep<'a> {
    f: &'a dyn Potential,
    g: Option<&'a dyn Potential>,
    g_depth: usize,
    shift: &'a TruncatedShift,
    term: usize,
    lower: &'a [f64],
    thresholds: &'a [f64],
    t_max: f64,
    n_max: usize,
    budget: &'a AtomicU64,
    limit: u64,
    word: Vec<usize>,
    letters: Vec<Letter>,
    pi: Vec<usize>,
    /// `interior[j]`: sum of the first `j` fully determined terms.
    interior: Vec<f64>,
    out: SweepCounts,
}

impl Sweep<'_> {
    fn bin(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t < x)
    }

    fn push(&mut self, a: usize) {
        let l = self.word.len();
        self.word.push(a);
        self.letters.push(self.shift.letter(a));
        let k = if l == 0 {
            0
        } else {
            let mut k = self.pi[l - 1];
            while k > 0 && self.word[l] != self.word[k] {
                k = self.pi[k - 1];
            }
            if self.word[l] == self.word[k] {
                k + 1
            } else {
                k
            }
        };
        self.pi.push(k);
        let len = l + 1;
        if len >= self.term {
            let i = len - self.term;
            let v = self.f.eval(&self.letters[i..len]).value;
            let prev = *self.interior.last().expect("initialized");
            self.interior.push(prev + v);
        }
    }

    fn pop(&mut self) {
        let len = self.word.len();
        if len >= self.term {
            self.interior.pop();
        }
        self.word.pop();
        self.letters.pop();
        self.pi.pop();
    }

    fn known(&self) -> usize {
        self.interior.len() - 1
    }

    fn bound(&self) -> f64 {
        let known = self.known();
        let mut b = *self.interior.last().expect("initialized");
        for &a in &self.word[known..] {
            b += self.lower[a];
        }
        b
    }

    fn leaf(&mut self) {
        let n = self.word.len();
        let adj = self.shift.adjacency();
        if !adj.allowed(self.word[n - 1], self.word[0]) {
            return;
        }
        let mut s = *self.interior.last().expect("initialized");
        let mut window = Vec::with_capacity(self.term);
        for i in self.known()..n {
            window.clear();
            window.extend((0..self.term).map(|j| self.letters[(i + j) % n]));
            s += self.f.eval(&window).value;
        }
        if s > self.t_max {
            return;
        }
        let b = self.bin(s);
        self.out.all[n][b] += 1;
        let p = n - self.pi[n - 1];
        let primitive = !(p < n && n % p == 0);
        if primitive {
            self.out.primitive[n][b] += 1;
        }
        if let Some(g) = self.g {
            if s <= self.thresholds[0] {
                let q = cyclic_sum(g, &self.letters, self.g_depth).value / s;
                self.out.ratio[n] += q;
                if primitive {
                    self.out.ratio_primitive[n] += q;
                }
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        let bound = self.bound();
        if bound > self.t_max {
            return Ok(());
        }
        let used = self.budget.fetch_add(1, Ordering::Relaxed) + 1;
        if used > self.limit {
            return Err(Error::BudgetExplosion {
                limit: self.limit,
                partial: 0.0,
            });
        }
        let b = self.bin(bound);
        self.out.nodes[b] += 1;
        self.leaf();
        if self.word.len() == self.n_max {
            return Ok(());
        }
        let last = *self.word.last().expect("non-empty");
        let next: Vec<usize> = self.shift.adjacency().successors(last).collect();
        for a in next {
            if bound + self.lower[a] > self.t_max {
                continue;
            }
            self.push(a);
            let r = self.run();
            self.pop();
            r?;
        }
        Ok(())
    }
}

fn sweep(
    f: &dyn Potential,
    g: Option<&dyn Potential>,
    shift: &TruncatedShift,
    thresholds: &[f64],
    options: &CountOptions,
) -> Result<(SweepCounts, usize)> {
    let lower = lower_bounds(f, shift);
    let c = strict_positivity(&lower)?;
    let t_max = *thresholds.last().expect("non-empty thresholds");
    let n_max = (t_max / c).floor() as usize;
    if n_max > MAX_ORBIT_LENGTH {
        return Err(Error::CutoffTooSmall {
            needed: n_max,
            limit: MAX_ORBIT_LENGTH,
        });
    }
    let term = term_length(f, options.eval_depth);
    let g_depth = g.map_or(1, |g| term_length(g, options.eval_depth));
    let budget = AtomicU64::new(0);
    let bins = thresholds.len();
    let branches: Vec<Result<SweepCounts>> = (0..shift.len())
        .into_par_iter()
        .map(|root| {
            let mut s = Sweep {
                f,
                g,
                g_depth,
                shift,
                term,
                lower: &lower,
                thresholds,
                t_max,
                n_max,
                budget: &budget,
                limit: options.node_limit,
                word: Vec::with_capacity(n_max),
                letters: Vec::with_capacity(n_max),
                pi: Vec::with_capacity(n_max),
                interior: vec![0.0],
                out: SweepCounts::new(n_max, bins),
            };
            if n_max == 0 {
                return Ok(s.out);
            }
            s.push(root);
            s.run()?;
            Ok(s.out)
        })
        .collect();
    let mut total = SweepCounts::new(n_max, bins);
    for b in branches {
        total.merge(&b?);
    }
    Ok((total, n_max))
}

/// Exact rational `sum_n (1/n) counts_n`, as an integer over `scale`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct ScaledSum {
    pub numerator: u128,
    pub scale: u128,
}

impl ScaledSum {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.scale as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRecord {
    pub t: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub predicted: f64,
    pub ratio_m: f64,
    pub ratio_r: f64,
    pub nodes: u64,
    pub m_exact: ScaledSum,
    pub r_exact: ScaledSum,
    /// `M(t/2)`, for the prime-orbit sandwich.
    pub m_half_exact: ScaledSum,
    /// `#M_f(n, t)` for `n = 1..`.
    pub fix_counts: Vec<u64>,
    /// Number of prime orbits with period at most `t`.
    pub prime_orbits: u64,
}

impl CountRecord {
    /// `M(t) - M(t/2) <= R(t) <= M(t)`, in exact integer arithmetic.
    pub fn sandwich_holds(&self) -> bool {
        let (m, r, h) = (self.m_exact.numerator, self.r_exact.numerator, self.m_half_exact.numerator);
        m - h <= r && r <= m
    }
}

fn lcm_up_to(n: usize) -> u128 {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=n as u128).fold(1, |l, k| l / gcd(l, k) * k)
}

fn thresholds_for(t_grid: &[f64]) -> Vec<f64> {
    let mut th: Vec<f64> = t_grid.iter().flat_map(|&t| [t, t / 2.0]).collect();
    th.sort_by(f64::total_cmp);
    th.dedup();
    th
}

fn cumulative(counts: &[Vec<u64>], n: usize, bin: usize) -> u64 {
    counts[n][..=bin].iter().sum()
}

/// `M_f(t)`, `R_f(t)` and the ratios to `e^{t delta}/(t delta)` on a grid.
pub fn count_orbits(
    f: &dyn Potential,
    shift: &TruncatedShift,
    t_grid: &[f64],
    delta: f64,
    options: &CountOptions,
) -> Result<Vec<CountRecord>> {
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("count grid must be positive and finite".into()));
    }
    let thresholds = thresholds_for(t_grid);
    let (counts, n_max) = sweep(f, None, shift, &thresholds, options)?;
    let scale = lcm_up_to(n_max.max(1));
    let bin_of = |t: f64| thresholds.partition_point(|&x| x < t);
    let scaled = |table: &[Vec<u64>], bin: usize| -> ScaledSum {
        let numerator = (1..=n_max)
            .map(|n| cumulative(table, n, bin) as u128 * (scale / n as u128))
            .sum();
        ScaledSum { numerator, scale }
    };
    Ok(t_grid
        .iter()
        .map(|&t| {
            let b = bin_of(t);
            let h = bin_of(t / 2.0);
            let m_exact = scaled(&counts.all, b);
            let r_exact = scaled(&counts.primitive, b);
            let predicted = (t * delta).exp() / (t * delta);
            let m = m_exact.value();
            let r = r_exact.value();
            CountRecord {
                t,
                m,
                r,
                predicted,
                ratio_m: m / predicted,
                ratio_r: r / predicted,
                nodes: counts.nodes[..=b].iter().sum(),
                m_exact,
                r_exact,
                m_half_exact: scaled(&counts.all, h),
                fix_counts: (1..=n_max).map(|n| cumulative(&counts.all, n, b)).collect(),
                prime_orbits: (1..=n_max)
                    .map(|n| cumulative(&counts.primitive, n, b) / n as u64)
                    .sum(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct EquidistributionResult {
    /// `sum_k (1/k) sum_{x in M_f(k, t)} S_k g(x) / S_k f(x)`.
    pub lhs: f64,
    /// `(mean_g / mean_f) e^{t delta} / (t delta)`.
    pub predicted: f64,
    pub mean_f: f64,
    pub mean_g: f64,
    /// `M_f(t)`.
    pub m: f64,
}

/// Weighted orbit sum of `g / f` against its predicted asymptotic, with
/// means taken under the equilibrium state of `-delta f`.
pub fn equidistribution_ratio(
    f: &dyn Potential,
    g: &dyn Potential,
    shift: &TruncatedShift,
    t: f64,
    delta: f64,
    options: &CountOptions,
) -> Result<EquidistributionResult> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument("t must be positive and finite".into()));
    }
    strict_positivity(&lower_bounds(g, shift))?;
    let (counts, n_max) = sweep(f, Some(g), shift, &[t], options)?;
    let lhs: f64 = (1..=n_max).map(|n| counts.ratio[n] / n as f64).sum();
    let m: f64 = (1..=n_max).map(|n| counts.all[n][0] as f64 / n as f64).sum();
    let depth = term_length(f, options.eval_depth).max(term_length(g, options.eval_depth));
    let family = PressureFamily::new(shift, &[f, g], depth, None, 1e-13)?;
    let eq = family
        .equilibrium(&[-delta, 0.0])?
        .expect("finite family has no divergent tail");
    let mean_f = family.mean(&eq, 0);
    let mean_g = family.mean(&eq, 1);
    Ok(EquidistributionResult {
        lhs,
        predicted: (mean_g / mean_f) * (t * delta).exp() / (t * delta),
        mean_f,
        mean_g,
        m,
    })
}

/// Average of `S_n g / S_n f` over prime orbits with `S_n f <= t`, each
/// orbit counted once; `None` when there are no such orbits.
pub fn orbit_ratio_average(
    f: &dyn Potential,
    g: &dyn Potential,
    shift: &TruncatedShift,
    t: f64,
    options: &CountOptions,
) -> Result<Option<f64>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument("t must be positive and finite".into()));
    }
    let (counts, n_max) = sweep(f, Some(g), shift, &[t], options)?;
    let num: f64 = (1..=n_max).map(|n| counts.ratio_primitive[n] / n as f64).sum();
    let den: u64 = (1..=n_max).map(|n| counts.primitive[n][0] / n as u64).sum();
    Ok((den > 0).then(|| num / den as f64))
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleBijectionReport {
    pub k: usize,
    pub n: usize,
    pub cylinders: usize,
    /// Cardinalities agree on every cylinder and the map is injective.
    pub bijective: bool,
    pub max_discrepancy: f64,
    /// `A sum_{l >= k} e^{-alpha l}`.
    pub epsilon_k: f64,
    /// Accumulated evaluation radius of the discrepancy computation.
    pub evaluation_radius: f64,
    pub w_lower: u64,
    pub fix_count: u64,
    pub w_upper: u64,
    pub sandwich_holds: bool,
}

/// Builds `Psi_p^n: Fix^n cap p -> sigma^{-n}(z_p) cap p` (replace the
/// periodic tail by the sample point's) for every `k`-cylinder `p` and
/// checks bijectivity, the Birkhoff discrepancy and the `W(n, p, t)`
/// sandwich.
pub fn validate_sample_bijection(
    f: &dyn Potential,
    shift: &TruncatedShift,
    k: usize,
    n: usize,
    t: f64,
    options: &CountOptions,
) -> Result<SampleBijectionReport> {
    if k == 0 || n < k {
        return Err(Error::InvalidArgument("need 1 <= k <= n".into()));
    }
    let adj = shift.adjacency();
    let cylinders = shift.admissible_words(k, 1_000_000)?;
    let eps = f.holder().tail_sum(k);
    let tail_len = options.eval_depth.max(k) + 2;
    let mut bijective = true;
    let mut max_disc: f64 = 0.0;
    let mut eval_radius: f64 = 0.0;
    let (mut w_lower, mut w_upper, mut fix_count) = (0u64, 0u64, 0u64);
    for p in &cylinders {
        let p_letters: Vec<Letter> = p.iter().map(|&i| shift.letter(i as usize)).collect();
        let z = aperiodic_extension(shift, &p_letters, k + tail_len)?;
        let z_head = p[0] as usize;
        // Words u of length n starting with p and closing onto z_p.
        let mut words: Vec<Vec<usize>> = Vec::new();
        let mut stack: Vec<usize> = p.iter().map(|&i| i as usize).collect();
        fn extend(adj: &crate::shift::Adjacency, n: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if stack.len() == n {
                out.push(stack.clone());
                return;
            }
            let last = *stack.last().expect("non-empty");
            for j in adj.successors(last) {
                stack.push(j);
                extend(adj, n, stack, out);
                stack.pop();
            }
        }
        if stack.len() > n {
            continue;
        }
        extend(adj, n, &mut stack, &mut words);
        let preimages: Vec<&Vec<usize>> = words.iter().filter(|u| adj.allowed(u[n - 1], z_head)).collect();
        // Fix^n cap p: the same words closing onto their own first letter.
        // That letter is z_p's first letter too, so the sets coincide.
        let fixed: Vec<&Vec<usize>> = words.iter().filter(|u| adj.allowed(u[n - 1], u[0])).collect();
        if fixed.len() != preimages.len() {
            bijective = false;
        }
        for u in &fixed {
            let w: Vec<Letter> = u.iter().map(|&i| shift.letter(i)).collect();
            let periodic: Vec<Letter> = w.iter().cycle().take(n + tail_len).copied().collect();
            if eval_birkhoff_along(f, &periodic, n, periodic.len()).value <= t {
                fix_count += 1;
            }
        }
        for u in &preimages {
            let word: Vec<Letter> = u.iter().map(|&i| shift.letter(i)).collect();
            let mut y = word.clone();
            y.extend(&z);
            let s_pre = eval_birkhoff_along(f, &y, n, y.len());
            let periodic: Vec<Letter> = word.iter().cycle().take(y.len()).copied().collect();
            let s_fix = eval_birkhoff_along(f, &periodic, n, periodic.len());
            max_disc = max_disc.max((s_pre.value - s_fix.value).abs());
            eval_radius = eval_radius.max(s_pre.radius + s_fix.radius);
            if s_pre.value <= t - eps {
                w_lower += 1;
            }
            if s_pre.value <= t + eps {
                w_upper += 1;
            }
        }
    }
    Ok(SampleBijectionReport {
        k,
        n,
        cylinders: cylinders.len(),
        bijective,
        max_discrepancy: max_disc,
        epsilon_k: eps,
        evaluation_radius: eval_radius,
        w_lower,
        fix_count,
        w_upper,
        sandwich_holds: w_lower <= fix_count && fix_count <= w_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Constant, GeometricIndicator, LocallyConstant};
    use crate::shift::{ShiftSpec, TruncationRule};

    fn full2() -> TruncatedShift {
        ShiftSpec::full(2).truncate(&TruncationRule::FirstK(2)).unwrap()
    }

    fn no_aa() -> TruncatedShift {
        ShiftSpec::from_matrix(vec![vec![false, true], vec![true, true]])
            .unwrap()
            .truncate(&TruncationRule::FirstK(2))
            .unwrap()
    }

    fn query(base: &[u32], t: f64) -> RenewalQuery {
        RenewalQuery {
            base_point: base.iter().map(|&a| Letter(a)).collect(),
            weight: Weight::One,
            t,
        }
    }

    #[test]
    fn renewal_examples() {
        let o = CountOptions::default();
        let r = renewal_count(&Constant(1.0), &query(&[0], 3.0), &full2(), &o).unwrap();
        assert_eq!(r.value, 15.0);
        let r = renewal_count(&Constant(1.0), &query(&[0], -0.5), &full2(), &o).unwrap();
        assert_eq!(r.value, 0.0);
        // Words w with w·a admissible: 1, 1, 2, 3 for n = 0..3.
        let r = renewal_count(&Constant(1.0), &query(&[0], 3.0), &no_aa(), &o).unwrap();
        assert_eq!(r.value, 7.0);
        let r = renewal_count(&Constant(1.0), &query(&[1], 3.0), &no_aa(), &o).unwrap();
        assert_eq!(r.value, 11.0);
    }

    #[test]
    fn renewal_matches_brute_force() {
        let shift = no_aa();
        let f = LocallyConstant::per_letter([(Letter(0), 1.0), (Letter(1), 2f64.sqrt())]);
        let t = 6.5;
        let x = aperiodic_extension(&shift, &[Letter(1)], 4).unwrap();
        let mut brute = 0u64;
        for n in 0..=7usize {
            for code in 0..(1u32 << n) {
                let mut y: Vec<Letter> = (0..n).map(|i| Letter((code >> i) & 1)).collect();
                y.extend(&x);
                if y.windows(2).any(|w| w[0] == Letter(0) && w[1] == Letter(0)) {
                    continue;
                }
                if eval_birkhoff_along(&f, &y, n, 1).value <= t {
                    brute += 1;
                }
            }
        }
        let r = renewal_count(&f, &query(&[1], t), &shift, &CountOptions::default()).unwrap();
        assert_eq!(r.value, brute as f64);
    }

    #[test]
    fn count_examples() {
        let recs = count_orbits(&Constant(1.0), &full2(), &[4.0], 2f64.ln(), &CountOptions::default()).unwrap();
        let r = &recs[0];
        assert!((r.m - 32.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.r, 8.0);
        assert!(r.sandwich_holds());
        assert_eq!(r.fix_counts, vec![2, 4, 8, 16]);
    }

    #[test]
    fn aperiodic_extension_is_not_periodic() {
        let x = aperiodic_extension(&full2(), &[Letter(0)], 200).unwrap();
        assert_eq!(x[0], Letter(0));
        for p in 1..=60 {
            assert!((100..200 - p).any(|i| x[i] != x[i + p]), "period {p}");
        }
        let y = aperiodic_extension(&no_aa(), &[Letter(0)], 100).unwrap();
        assert!(y.windows(2).all(|w| !(w[0] == Letter(0) && w[1] == Letter(0))));
    }

    #[test]
    fn bijection_constant_potential() {
        let r = validate_sample_bijection(&Constant(1.0), &full2(), 1, 3, 3.0, &CountOptions::default()).unwrap();
        assert!(r.bijective);
        assert_eq!(r.max_discrepancy, 0.0);
        assert!(r.sandwich_holds);
        assert_eq!(r.fix_count, 8);
    }

    #[test]
    fn bijection_holder_potential() {
        let f = GeometricIndicator {
            target: Letter(0),
            ratio: 0.5,
        };
        let r = validate_sample_bijection(&f, &full2(), 2, 4, 1.5, &CountOptions::default()).unwrap();
        assert!(r.bijective);
        assert!(r.max_discrepancy <= r.epsilon_k + r.evaluation_radius);
        assert!((r.epsilon_k - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equidistribution_g_equals_f() {
        let f = LocallyConstant::per_letter([(Letter(0), 1.0), (Letter(1), 2f64.sqrt())]);
        let r = equidistribution_ratio(&f, &f, &full2(), 8.0, 0.58, &CountOptions::default()).unwrap();
        assert!((r.lhs - r.m).abs() < 1e-9 * r.m);
    }
}
