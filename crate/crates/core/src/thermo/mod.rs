//! Pressure, transfer-operator spectral data, equilibrium states, critical
//! exponents, entropy gaps and the Bowen equation `P(-delta f) = 0`.

mod tail;
mod transfer;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{cyclic_sum, Potential, PotentialRef};
use crate::shift::{for_each_fix, Letter, ShiftSpec, TruncatedShift};

pub use tail::{fit_tail_model, TailModel, TailShape};
pub use transfer::{
    build_transfer, spectral_pressure, CylinderStructure, EquilibriumData, TailAggregate, TransferDiscretization,
    DEFAULT_STATE_LIMIT,
};

/// Running log-sum-exp in a fixed order.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicPressure {
    /// `log Z_n`, `Z_n = sum over Fix^n with x_1 = a of e^{S_n g}`, for
    /// `n = 1..=n_max` (`-inf` when empty).
    pub log_sums: Vec<f64>,
    /// `p_n = log Z_n / n`.
    pub estimates: Vec<f64>,
    /// `log Z_n - log Z_{n-1}` at the largest `n` with both sums present.
    /// The first-letter restriction contributes an `O(1)` term to `log Z_n`
    /// that cancels in the ratio, which converges geometrically.
    pub ratio_estimate: f64,
    /// Mean of the last half of the `p_n`.
    pub cesaro: f64,
}

/// Periodic-orbit estimates of the Gurevich pressure.
pub fn pressure_periodic(
    shift: &TruncatedShift,
    g: &dyn Potential,
    a: Letter,
    n_max: usize,
    depth: usize,
) -> Result<PeriodicPressure> {
    if shift.index_of(a).is_none() {
        return Err(Error::LetterAbsent(a));
    }
    let mut log_sums = Vec::with_capacity(n_max);
    let mut buf = Vec::new();
    for n in 1..=n_max {
        let budget = shift.count_words(n);
        if budget > 50_000_000 {
            return Err(Error::TooManyCylinders {
                needed: usize::try_from(budget).unwrap_or(usize::MAX),
                limit: 50_000_000,
            });
        }
        let mut acc = LogSumExp::default();
        for_each_fix(shift, n, Some(a), |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| shift.letter(i as usize)));
            acc.add(cyclic_sum(g, &buf, depth).value);
        })?;
        log_sums.push(acc.value());
    }
    let estimates: Vec<f64> = log_sums
        .iter()
        .enumerate()
        .map(|(i, &l)| l / (i + 1) as f64)
        .collect();
    let ratio_estimate = (1..log_sums.len())
        .rev()
        .find(|&i| log_sums[i].is_finite() && log_sums[i - 1].is_finite())
        .map_or_else(
            || estimates.last().copied().unwrap_or(f64::NAN),
            |i| log_sums[i] - log_sums[i - 1],
        );
    let half = &estimates[estimates.len() / 2..];
    let finite: Vec<f64> = half.iter().copied().filter(|x| x.is_finite()).collect();
    let cesaro = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    Ok(PeriodicPressure {
        log_sums,
        estimates,
        ratio_estimate,
        cesaro,
    })
}

/// Pressures `P(sum c_i f_i)` of linear combinations of fixed potentials on
/// one cylinder structure. Potential values are sampled once.
#[derive(Debug, Clone)]
pub struct PressureFamily {
    pub structure: Arc<CylinderStructure>,
    components: Vec<(Vec<f64>, Vec<f64>)>,
    tail: Option<(TailModel, usize)>,
    pub tol: f64,
    pub max_iter: usize,
}

impl PressureFamily {
    /// With `tail`, a lumped state stands for the letters beyond the
    /// truncation; only single-potential families support it.
    pub fn new(
        shift: &TruncatedShift,
        potentials: &[&dyn Potential],
        depth: usize,
        tail: Option<TailModel>,
        tol: f64,
    ) -> Result<Self> {
        if tail.is_some() && potentials.len() != 1 {
            return Err(Error::InvalidArgument("tail aggregation needs a single potential".into()));
        }
        let template = tail.map(|_| *shift.letters().last().expect("non-empty truncation"));
        let structure = CylinderStructure::build(shift, depth, template, DEFAULT_STATE_LIMIT)?;
        let components = potentials.iter().map(|f| structure.sample(*f)).collect();
        Ok(PressureFamily {
            structure: Arc::new(structure),
            components,
            tail: tail.map(|m| (m, shift.cutoff.scanned)),
            tol,
            max_iter: 200_000,
        })
    }

    /// Operator for `sum c_i f_i`, or `None` when the lumped tail diverges.
    pub fn operator(&self, coeffs: &[f64]) -> Option<TransferDiscretization> {
        assert_eq!(coeffs.len(), self.components.len());
        let n = self.components[0].0.len();
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        for (&c, (v, rad)) in coeffs.iter().zip(&self.components) {
            for i in 0..n {
                w[i] += c * v[i];
                r[i] += c.abs() * rad[i];
            }
        }
        if let Some((model, kept)) = &self.tail {
            w.push(model.log_remainder(-coeffs[0], *kept)?);
            r.push(0.0);
        }
        Some(TransferDiscretization::from_parts(self.structure.clone(), w, r).expect("sizes match"))
    }

    pub fn equilibrium(&self, coeffs: &[f64]) -> Result<Option<EquilibriumData>> {
        match self.operator(coeffs) {
            None => Ok(None),
            Some(op) => spectral_pressure(&op, self.tol, self.max_iter).map(Some),
        }
    }

    /// `+inf` when the tail diverges.
    pub fn pressure(&self, coeffs: &[f64]) -> Result<f64> {
        Ok(self.equilibrium(coeffs)?.map_or(f64::INFINITY, |e| e.pressure))
    }

    /// Mean of component `i` under an equilibrium state of this family.
    pub fn mean(&self, eq: &EquilibriumData, i: usize) -> f64 {
        let (v, r) = &self.components[i];
        eq.integrate(v, r).value
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalExponent {
    Finite(f64),
    /// Finite alphabet: `Z_1(f, s)` is finite for every `s`.
    FiniteAlphabet,
}

impl CriticalExponent {
    pub fn value(&self) -> Option<f64> {
        match self {
            CriticalExponent::Finite(d) => Some(*d),
            CriticalExponent::FiniteAlphabet => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapClass {
    Strong,
    Weak,
    #[serde(rename = "none")]
    NoGap,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyGapReport {
    pub d_f: CriticalExponent,
    pub diverges_at_d: bool,
    pub delta: Option<f64>,
    pub gap: GapClass,
    pub tail_model: String,
    pub tail: Option<TailModel>,
    pub note: Option<String>,
}

/// Upper letter bounds `S(f, a)` for the first `count` letters, sorted.
pub fn sorted_letter_uppers(f: &dyn Potential, spec: &ShiftSpec, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count)
        .map_while(|i| spec.alphabet.nth(i))
        .map(|a| f.eval(&[a]).hi())
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Critical exponent of `Z_1(f, s)`, by bisection of the convergence
/// predicate of the fitted (or supplied) tail model on `bracket`.
pub fn critical_exponent(
    f: &dyn Potential,
    spec: &ShiftSpec,
    letter_count: usize,
    bracket: (f64, f64),
    tail: Option<TailModel>,
) -> Result<EntropyGapReport> {
    if spec.alphabet.is_finite() {
        return Ok(EntropyGapReport {
            d_f: CriticalExponent::FiniteAlphabet,
            diverges_at_d: false,
            delta: None,
            gap: GapClass::Undetermined,
            tail_model: "finite alphabet".into(),
            tail: None,
            note: None,
        });
    }
    let model = match tail {
        Some(m) => m,
        None => fit_tail_model(&sorted_letter_uppers(f, spec, letter_count), None)?,
    };
    let (mut lo, mut hi) = bracket;
    if !model.converges(hi) {
        return Err(Error::TailModelUnavailable(format!(
            "series still diverges at the bracket end s = {hi}"
        )));
    }
    if model.converges(lo) {
        hi = lo;
    }
    while hi - lo > 1e-14 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if model.converges(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EntropyGapReport {
        d_f: CriticalExponent::Finite(hi),
        diverges_at_d: model.diverges_at_critical(),
        delta: None,
        gap: GapClass::Undetermined,
        tail_model: format!(
            "{:?}: S_k = {:.6} log k{} + {:.6}, fitted on ranks {}..{} (max residual {:.3e})",
            model.shape,
            model.slope,
            if model.shape == TailShape::LogLogCorrected {
                format!(" + {:.6} log log k", model.loglog)
            } else {
                String::new()
            },
            model.offset,
            model.fitted_ranks.0,
            model.fitted_ranks.1,
            model.residual
        ),
        tail: Some(model),
        note: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaSolution {
    pub delta: f64,
    pub pressure_at_delta: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Root of `t -> P(-t f)`, restricted to `t > d_f`.
pub fn solve_delta(
    f: &dyn Potential,
    shift: &TruncatedShift,
    d_f: CriticalExponent,
    depth: usize,
    tol: f64,
    tail: Option<TailModel>,
) -> Result<DeltaSolution> {
    let family = PressureFamily::new(shift, &[f], depth, tail, (tol * 1e-2).max(1e-15))?;
    solve_delta_in(&family, d_f, tol)
}

/// `solve_delta` on a prepared single-potential family.
pub fn solve_delta_in(family: &PressureFamily, d_f: CriticalExponent, tol: f64) -> Result<DeltaSolution> {
    bowen_root(|t| family.pressure(&[-t]), d_f.value().unwrap_or(0.0).max(0.0), tol)
}

/// Root of a decreasing function `p` on `(t0, inf)` with `p(t0) > 0`:
/// doubling to bracket, bisection to rounding level, then one secant step.
pub fn bowen_root(p: impl Fn(f64) -> Result<f64>, t0: f64, tol: f64) -> Result<DeltaSolution> {
    let mut evaluations = 0usize;
    let mut eval = |t: f64| -> Result<f64> {
        evaluations += 1;
        let v = p(t)?;
        Ok(v)
    };
    let p0 = eval(t0)?;
    if p0 <= 0.0 {
        return Err(Error::NoSignChange { lo: t0, hi: t0 });
    }
    let mut lo = t0;
    let mut p_lo = p0;
    let mut step = 1.0f64.max(t0);
    let mut hi = t0 + step;
    let mut p_hi = eval(hi)?;
    let mut doublings = 0;
    while p_hi >= 0.0 {
        if p_hi > p_lo + 1e-12 * p_lo.abs().max(1.0) && p_lo.is_finite() {
            return Err(Error::NonMonotonePressure {
                t1: lo,
                p1: p_lo,
                t2: hi,
                p2: p_hi,
            });
        }
        lo = hi;
        p_lo = p_hi;
        step *= 2.0;
        hi = t0 + step;
        p_hi = eval(hi)?;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NoSignChange { lo: t0, hi });
        }
    }
    let bracket = (lo, hi);
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let pm = eval(mid)?;
        let noise = 1e-12 * pm.abs().max(1.0);
        if (p_lo.is_finite() && pm > p_lo + noise) || pm < p_hi - noise {
            return Err(Error::NonMonotonePressure {
                t1: lo,
                p1: p_lo,
                t2: mid,
                p2: pm,
            });
        }
        if pm > 0.0 {
            lo = mid;
            p_lo = pm;
        } else {
            hi = mid;
            p_hi = pm;
        }
    }
    // Linear interpolation inside the final bracket.
    let delta = if p_lo.is_finite() && p_lo > p_hi {
        lo + (hi - lo) * p_lo / (p_lo - p_hi)
    } else {
        0.5 * (lo + hi)
    };
    let pressure_at_delta = p(delta)?;
    if pressure_at_delta.abs() > tol {
        return Err(Error::NoConvergence {
            iterations: evaluations,
            residual: pressure_at_delta.abs(),
        });
    }
    Ok(DeltaSolution {
        delta,
        pressure_at_delta,
        bracket,
        evaluations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GapOptions {
    pub letter_count: usize,
    pub bracket: (f64, f64),
    pub depth: usize,
    pub tol: f64,
    pub tail: Option<TailModel>,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            letter_count: 100_000,
            bracket: (1e-6, 100.0),
            depth: 1,
            tol: 1e-8,
            tail: None,
        }
    }
}

/// Critical exponent, Bowen root and gap classification. Failures of the
/// sub-steps are folded into the `undetermined` class with a note.
pub fn entropy_gap_report(
    f: &dyn Potential,
    spec: &ShiftSpec,
    shift: &TruncatedShift,
    options: &GapOptions,
) -> EntropyGapReport {
    let mut report = match critical_exponent(f, spec, options.letter_count, options.bracket, options.tail) {
        Ok(r) => r,
        Err(e) => {
            return EntropyGapReport {
                d_f: CriticalExponent::Finite(f64::NAN),
                diverges_at_d: false,
                delta: None,
                gap: GapClass::Undetermined,
                tail_model: "unavailable".into(),
                tail: None,
                note: Some(e.to_string()),
            }
        }
    };
    let solved = solve_delta(f, shift, report.d_f, options.depth, options.tol, report.tail);
    match (&report.d_f, solved) {
        (CriticalExponent::FiniteAlphabet, Ok(sol)) => {
            report.delta = Some(sol.delta);
            report.gap = GapClass::Weak;
            report.note = Some("finite alphabet: the gap at infinity holds vacuously".into());
        }
        (CriticalExponent::FiniteAlphabet, Err(e)) => {
            report.note = Some(e.to_string());
        }
        (CriticalExponent::Finite(_), Ok(sol)) => {
            report.delta = Some(sol.delta);
            if report.diverges_at_d {
                report.gap = GapClass::Strong;
            } else {
                report.gap = GapClass::Weak;
                report.note = Some("Z_1 converges at d(f): weak gap only, flagged for review".into());
            }
        }
        (CriticalExponent::Finite(_), Err(Error::NoSignChange { .. })) if !report.diverges_at_d => {
            report.gap = GapClass::NoGap;
        }
        (CriticalExponent::Finite(_), Err(e)) => {
            report.note = Some(e.to_string());
        }
    }
    report
}

/// Regularized potentials share periodic data with the original, so their
/// pressures agree; this helper exposes `P(-t f)` for a single potential.
pub fn pressure_of(f: PotentialRef, shift: &TruncatedShift, t: f64, depth: usize, tol: f64) -> Result<f64> {
    let family = PressureFamily::new(shift, &[f.as_ref()], depth, None, tol)?;
    family.pressure(&[-t])
}
