use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{eval_birkhoff_along, Evaluation, Potential, PotentialRef};
use crate::shift::{Adjacency, Letter, TruncatedShift};

/// Default cap on the number of cylinder states.
pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

/// Extra state standing for every letter beyond a depth-one truncation. It
/// copies the transitions of `template` and carries the lumped weight
/// `log sum_{a not kept} e^{g(a)}`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct TailAggregate {
    pub template: Letter,
    pub log_weight: f64,
}

/// Cylinder states of depth `k` and the preimage structure of the transfer
/// operator on them, shared between potentials.
///
/// For `k >= 2`, `(L phi)(p)` only depends on `p[..k-1]`: it sums over the
/// cylinders `q = [a p_1 .. p_{k-1}]`. Cylinders that contribute to the
/// same sums are stored as one group.
#[derive(Debug, Clone)]
pub struct CylinderStructure {
    depth: usize,
    letters: Vec<Letter>,
    /// Letter indices of each cylinder (empty at depth one, where state `i`
    /// is letter `i`).
    cylinders: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, u32>,
    groups: Vec<Vec<u32>>,
    group_of: Vec<u32>,
    /// Index of the tail state and the state it copies.
    tail: Option<(usize, usize)>,
    adjacency: Adjacency,
}

impl CylinderStructure {
    pub fn build(shift: &TruncatedShift, depth: usize, tail_template: Option<Letter>, limit: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("transfer depth must be at least 1".into()));
        }
        let adjacency = shift.adjacency().clone();
        let k = shift.len();
        if depth == 1 {
            let tail = match tail_template {
                Some(a) => Some((k, shift.index_of(a).ok_or(Error::LetterAbsent(a))?)),
                None => None,
            };
            let states = k + usize::from(tail.is_some());
            if states > limit {
                return Err(Error::TooManyCylinders { needed: states, limit });
            }
            let (groups, group_of) = match &adjacency {
                Adjacency::Full(_) => (vec![(0..states as u32).collect()], vec![0u32; states]),
                Adjacency::Sparse { pred, .. } => {
                    let mut groups: Vec<Vec<u32>> = pred.clone();
                    if let Some((t, template)) = tail {
                        for (j, g) in groups.iter_mut().enumerate() {
                            if adjacency.allowed(template, j) {
                                g.push(t as u32);
                            }
                        }
                    }
                    let mut group_of: Vec<u32> = (0..k as u32).collect();
                    if let Some((_, template)) = tail {
                        group_of.push(template as u32);
                    }
                    (groups, group_of)
                }
            };
            return Ok(CylinderStructure {
                depth,
                letters: shift.letters().to_vec(),
                cylinders: Vec::new(),
                lookup: HashMap::new(),
                groups,
                group_of,
                tail,
                adjacency,
            });
        }
        if tail_template.is_some() {
            return Err(Error::InvalidArgument("tail aggregation needs depth 1".into()));
        }
        let count = shift.count_words(depth);
        if count > limit as u128 {
            return Err(Error::TooManyCylinders {
                needed: usize::try_from(count).unwrap_or(usize::MAX),
                limit,
            });
        }
        let cylinders = shift.admissible_words(depth, limit)?;
        let lookup: HashMap<Vec<u32>, u32> = cylinders
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();
        let mut prefix_ids: HashMap<&[u32], u32> = HashMap::new();
        let mut group_of = Vec::with_capacity(cylinders.len());
        for c in &cylinders {
            let next = prefix_ids.len() as u32;
            group_of.push(*prefix_ids.entry(&c[..depth - 1]).or_insert(next));
        }
        let mut groups = vec![Vec::new(); prefix_ids.len()];
        for (qi, q) in cylinders.iter().enumerate() {
            if let Some(&g) = prefix_ids.get(&q[1..]) {
                groups[g as usize].push(qi as u32);
            }
        }
        Ok(CylinderStructure {
            depth,
            letters: shift.letters().to_vec(),
            cylinders,
            lookup,
            groups,
            group_of,
            tail: None,
            adjacency,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn states(&self) -> usize {
        self.group_of.len()
    }

    pub fn has_tail(&self) -> bool {
        self.tail.is_some()
    }

    pub fn tail_index(&self) -> Option<usize> {
        self.tail.map(|(t, _)| t)
    }

    /// Letters of a non-tail state.
    pub fn cylinder(&self, state: usize) -> Vec<Letter> {
        if self.depth == 1 {
            vec![self.letters[state]]
        } else {
            self.cylinders[state].iter().map(|&i| self.letters[i as usize]).collect()
        }
    }

    fn state_of(&self, idx: &[u32]) -> Option<usize> {
        if self.depth == 1 {
            Some(idx[0] as usize)
        } else {
            self.lookup.get(idx).map(|&s| s as usize)
        }
    }

    /// Values and radii of `f` on every non-tail state.
    pub fn sample(&self, f: &dyn Potential) -> (Vec<f64>, Vec<f64>) {
        let n = self.states() - usize::from(self.has_tail());
        let mut values = Vec::with_capacity(n);
        let mut radii = Vec::with_capacity(n);
        for s in 0..n {
            let e = f.eval(&self.cylinder(s));
            values.push(e.value);
            radii.push(e.radius);
        }
        (values, radii)
    }

    /// `y = L phi` for linear-space weights `e`.
    fn apply(&self, e: &[f64], phi: &[f64], sums: &mut [f64], y: &mut [f64]) {
        for (s, g) in sums.iter_mut().zip(&self.groups) {
            let mut acc = 0.0;
            for &q in g {
                acc += e[q as usize] * phi[q as usize];
            }
            *s = acc;
        }
        for (yp, &g) in y.iter_mut().zip(&self.group_of) {
            *yp = sums[g as usize];
        }
    }

    /// `y = L^* nu`.
    fn apply_adjoint(&self, e: &[f64], nu: &[f64], sums: &mut [f64], y: &mut [f64]) {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (&g, &v) in self.group_of.iter().zip(nu) {
            sums[g as usize] += v;
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for (g, &s) in self.groups.iter().zip(sums.iter()) {
            for &q in g {
                y[q as usize] += s;
            }
        }
        for (v, &w) in y.iter_mut().zip(e) {
            *v *= w;
        }
    }
}

/// The transfer operator `L_g` discretized on cylinder states, with
/// log-weights `g` evaluated at each cylinder.
#[derive(Debug, Clone)]
pub struct TransferDiscretization {
    pub structure: Arc<CylinderStructure>,
    pub log_weights: Vec<f64>,
    /// Per-state evaluation radius; the discretized potential differs from
    /// `g` by at most this much on the cylinder.
    pub radii: Vec<f64>,
    pub potential: Option<PotentialRef>,
}

impl TransferDiscretization {
    pub fn from_parts(structure: Arc<CylinderStructure>, log_weights: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if log_weights.len() != structure.states() || radii.len() != structure.states() {
            return Err(Error::InvalidArgument("weight vector does not match the cylinder states".into()));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::InvalidArgument("log-weights must be finite or -inf".into()));
        }
        Ok(TransferDiscretization {
            structure,
            log_weights,
            radii,
            potential: None,
        })
    }

    pub fn depth(&self) -> usize {
        self.structure.depth
    }

    /// Largest per-state evaluation radius, a bound on `|P(g) - P(g_k)|`.
    pub fn discretization_error(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }

    /// Dense matrix of linear weights, `m[p][q] = e^{g(q)}` when `q` is a
    /// one-step preimage cylinder of `p`. Meant for small systems and tests.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let s = &self.structure;
        let n = s.states();
        let mut m = vec![vec![0.0; n]; n];
        for (p, row) in m.iter_mut().enumerate() {
            for &q in &s.groups[s.group_of[p] as usize] {
                row[q as usize] = self.log_weights[q as usize].exp();
            }
        }
        m
    }
}

/// Discretizes `L_g` on depth-`depth` cylinders of the truncation, with an
/// optional lumped tail state.
pub fn build_transfer(
    shift: &TruncatedShift,
    g: PotentialRef,
    depth: usize,
    tail: Option<TailAggregate>,
) -> Result<TransferDiscretization> {
    let structure = CylinderStructure::build(shift, depth, tail.map(|t| t.template), DEFAULT_STATE_LIMIT)?;
    let (mut values, mut radii) = structure.sample(g.as_ref());
    if let Some(t) = tail {
        values.push(t.log_weight);
        radii.push(0.0);
    }
    let mut op = TransferDiscretization::from_parts(Arc::new(structure), values, radii)?;
    op.potential = Some(g);
    Ok(op)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumData {
    pub pressure: f64,
    /// Bound on the gap between the pressure of the discretized potential
    /// and of the potential itself.
    pub pressure_radius: f64,
    /// Right eigenvector, normalized so that `sum h nu = 1`.
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// Integral of the discretized potential against `mu`.
    pub mean_f: Evaluation,
    /// Observed Gibbs constant on sampled cylinders (when the potential is
    /// attached to the operator).
    pub gibbs_constant: Option<f64>,
    pub h_residual: f64,
    pub nu_residual: f64,
    pub iterations: usize,
    pub depth: usize,
    pub states: usize,
}

impl EquilibriumData {
    /// `sum mu_i v_i` with radius `sum mu_i r_i`.
    pub fn integrate(&self, values: &[f64], radii: &[f64]) -> Evaluation {
        let mut value = 0.0;
        let mut radius = 0.0;
        for ((&m, &v), &r) in self.mu.iter().zip(values).zip(radii) {
            if m > 0.0 {
                value += m * v;
                radius += m * r;
            }
        }
        Evaluation { value, radius }
    }

    /// Mean of `f` under the equilibrium measure, `f` evaluated on every
    /// non-tail cylinder state. A tail state (if any) contributes `tail_value`.
    pub fn mean_of(&self, structure: &CylinderStructure, f: &dyn Potential, tail_value: f64) -> Evaluation {
        let (mut v, mut r) = structure.sample(f);
        if structure.has_tail() {
            v.push(tail_value);
            r.push(0.0);
        }
        self.integrate(&v, &r)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Leading eigen-data of the discretized transfer operator by power
/// iteration in linear space (weights shifted by their maximum).
pub fn spectral_pressure(op: &TransferDiscretization, tol: f64, max_iter: usize) -> Result<EquilibriumData> {
    let s = op.structure.as_ref();
    let n = s.states();
    let w_max = op
        .log_weights
        .iter()
        .copied()
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !w_max.is_finite() {
        return Err(Error::InvalidArgument("all transfer weights vanish".into()));
    }
    let e: Vec<f64> = op.log_weights.iter().map(|&w| (w - w_max).exp()).collect();
    let target = (tol * 1e-2).max(4.0 * f64::EPSILON);
    let mut sums = vec![0.0; s.groups.len()];
    let mut y = vec![0.0; n];

    let mut h = vec![1.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut stall = 0;
    while iterations < max_iter {
        iterations += 1;
        s.apply(&e, &h, &mut sums, &mut y);
        let hs: f64 = h.iter().sum();
        lambda = y.iter().sum::<f64>() / hs;
        let hm = max_abs(&h);
        residual = y
            .iter()
            .zip(&h)
            .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
            / (lambda * hm);
        let ym = max_abs(&y);
        if !(ym > 0.0) || !ym.is_finite() {
            return Err(Error::NoConvergence { iterations, residual });
        }
        for (hi, yi) in h.iter_mut().zip(&y) {
            *hi = yi / ym;
        }
        if residual <= target {
            break;
        }
        if residual < best * 0.999 {
            best = residual;
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 && residual <= tol {
                break;
            }
        }
    }
    if residual > tol {
        return Err(Error::NoConvergence { iterations, residual });
    }

    let mut nu = vec![1.0 / n as f64; n];
    let mut nu_residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stall = 0;
    let mut nu_iterations = 0;
    while nu_iterations < max_iter {
        nu_iterations += 1;
        s.apply_adjoint(&e, &nu, &mut sums, &mut y);
        let total: f64 = y.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NoConvergence {
                iterations: nu_iterations,
                residual: nu_residual,
            });
        }
        let l = total;
        nu_residual = y.iter().zip(&nu).map(|(a, b)| (a - l * b).abs()).sum::<f64>() / l;
        for (ni, yi) in nu.iter_mut().zip(&y) {
            *ni = yi / total;
        }
        if nu_residual <= target {
            break;
        }
        if nu_residual < best * 0.999 {
            best = nu_residual;
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 && nu_residual <= tol {
                break;
            }
        }
    }
    if nu_residual > tol {
        return Err(Error::NoConvergence {
            iterations: nu_iterations,
            residual: nu_residual,
        });
    }

    let hn: f64 = h.iter().zip(&nu).map(|(a, b)| a * b).sum();
    h.iter_mut().for_each(|x| *x /= hn);
    let mu: Vec<f64> = h.iter().zip(&nu).map(|(a, b)| a * b).collect();
    let pressure = w_max + lambda.ln();
    let mut data = EquilibriumData {
        pressure,
        pressure_radius: op.discretization_error(),
        mean_f: Evaluation::exact(0.0),
        gibbs_constant: None,
        h_residual: residual,
        nu_residual,
        iterations: iterations.max(nu_iterations),
        depth: s.depth,
        states: n,
        h,
        nu,
        mu,
    };
    let finite: Vec<f64> = op
        .log_weights
        .iter()
        .map(|&w| if w.is_finite() { w } else { 0.0 })
        .collect();
    data.mean_f = data.integrate(&finite, &op.radii);
    if let Some(g) = &op.potential {
        data.gibbs_constant = Some(gibbs_constant(op, &data, g.as_ref(), lambda, w_max));
    }
    Ok(data)
}

/// Observed `B` in `1/B <= mu[w] / e^{S_n g - nP} <= B` on sampled words a
/// few letters longer than the depth, with `mu[w]` the Markov measure of
/// the discretized system.
fn gibbs_constant(op: &TransferDiscretization, data: &EquilibriumData, g: &dyn Potential, lambda: f64, w_max: f64) -> f64 {
    let s = op.structure.as_ref();
    let k = s.depth;
    let real_states = s.states() - usize::from(s.has_tail());
    let mut rng = ChaCha8Rng::seed_from_u64(0x6962_6273);
    let mut worst: f64 = 1.0;
    for extra in [1usize, 2, 4] {
        let n = k + extra;
        for _ in 0..64 {
            let start = rng.gen_range(0..real_states);
            let mut idx: Vec<u32> = if k == 1 {
                vec![start as u32]
            } else {
                s.cylinders[start].clone()
            };
            let mut stuck = false;
            while idx.len() < n {
                let last = *idx.last().expect("non-empty") as usize;
                let deg = s.adjacency.out_degree(last);
                if deg == 0 {
                    stuck = true;
                    break;
                }
                let pick = rng.gen_range(0..deg);
                let next = s.adjacency.successors(last).nth(pick).expect("in range");
                idx.push(next as u32);
            }
            if stuck {
                continue;
            }
            // mu[w] = h(c_1) e^{sum_{i<n-k} w(c_i)} lambda^{-(n-k)} nu(c_{n-k+1}),
            // with weights shifted by w_max.
            let mut log_mu = 0.0;
            let mut ok = true;
            let mut states = Vec::with_capacity(n - k + 1);
            for i in 0..=n - k {
                match s.state_of(&idx[i..i + k]) {
                    Some(st) => states.push(st),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            log_mu += data.h[states[0]].ln();
            for &st in &states[..n - k] {
                log_mu += op.log_weights[st] - w_max - lambda.ln();
            }
            log_mu += data.nu[states[n - k]].ln();
            let word: Vec<Letter> = idx.iter().map(|&i| s.letters[i as usize]).collect();
            let birkhoff = eval_birkhoff_along(g, &word, n, k);
            let log_ratio = log_mu - (birkhoff.value - n as f64 * data.pressure);
            if log_ratio.is_finite() {
                worst = worst.max(log_ratio.abs().exp());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Constant, LocallyConstant};
    use crate::shift::{ShiftSpec, TruncationRule};

    fn golden() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn depth_one_no_aa_is_transition_matrix() {
        let spec = ShiftSpec::from_matrix(vec![vec![false, true], vec![true, true]]).unwrap();
        let t = spec.truncate(&TruncationRule::FirstK(2)).unwrap();
        let op = build_transfer(&t, Arc::new(Constant(0.0)), 1, None).unwrap();
        // rows index the image cylinder p, columns the preimage q -> p
        assert_eq!(op.dense_matrix(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        let eq = spectral_pressure(&op, 1e-12, 10_000).unwrap();
        assert!((eq.pressure - golden().ln()).abs() < 1e-12);
    }

    #[test]
    fn depth_two_full_shift_has_de_bruijn_pattern() {
        let t = ShiftSpec::full(2).truncate(&TruncationRule::FirstK(2)).unwrap();
        let op = build_transfer(&t, Arc::new(Constant(0.0)), 2, None).unwrap();
        let m = op.dense_matrix();
        // p = [p1 p2] has preimages [a p1]
        let cyl = |i: usize| op.structure.cylinder(i);
        for p in 0..4 {
            for q in 0..4 {
                let overlap = cyl(q)[1] == cyl(p)[0];
                assert_eq!(m[p][q] > 0.0, overlap, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn bernoulli_equilibrium() {
        let t = ShiftSpec::full(2).truncate(&TruncationRule::FirstK(2)).unwrap();
        let g = LocallyConstant::per_letter([(Letter(0), -0.3), (Letter(1), -1.1)]);
        let op = build_transfer(&t, Arc::new(g), 1, None).unwrap();
        let eq = spectral_pressure(&op, 1e-13, 1000).unwrap();
        let z = (-0.3f64).exp() + (-1.1f64).exp();
        assert!((eq.pressure - z.ln()).abs() < 1e-14);
        assert!((eq.mu[0] - (-0.3f64).exp() / z).abs() < 1e-14);
        assert!(eq.h.iter().all(|&x| (x - 1.0).abs() < 1e-13));
        assert!(eq.gibbs_constant.unwrap() <= 1.0 + 1e-10);
    }
}
