use std::collections::HashSet;

use serde::Serialize;

use super::{Evaluation, Potential, PotentialRef, Regularized};
use crate::error::{Error, Result};
use crate::shift::{for_each_fix, smallest_period, Letter, TruncatedShift, Word};

/// Largest denominator tried when matching period ratios to rationals.
const MAX_DENOMINATOR: i64 = 1000;

/// Enumeration budget for the periodic-point sweeps in this module.
const FIX_BUDGET: u128 = 20_000_000;

fn term_length(f: &dyn Potential, depth: usize) -> usize {
    depth.max(f.locally_constant_depth().unwrap_or(0)).max(1)
}

/// `S_n f` at the periodic point `w^infinity`, each term evaluated on a
/// cylinder of length `max(depth, locally constant depth)`.
pub fn cyclic_sum(f: &dyn Potential, w: &[Letter], depth: usize) -> Evaluation {
    let n = w.len();
    let l = term_length(f, depth);
    let mut buf = Vec::with_capacity(l);
    let mut value = 0.0;
    let mut radius = 0.0;
    for i in 0..n {
        buf.clear();
        buf.extend((0..l).map(|j| w[(i + j) % n]));
        let e = f.eval(&buf);
        value += e.value;
        radius += e.radius;
    }
    Evaluation { value, radius }
}

/// Birkhoff sum over one period of a cyclic word.
pub fn eval_birkhoff(f: &dyn Potential, word: &Word, depth: usize) -> Result<Evaluation> {
    if !word.is_cyclic() {
        return Err(Error::InadmissibleWord(word.letters().to_vec()));
    }
    Ok(cyclic_sum(f, word.letters(), depth))
}

/// `S_n f` at a point given by a (long enough) prefix. Terms near the end
/// of the prefix see shorter cylinders and carry larger radii.
pub fn eval_birkhoff_along(f: &dyn Potential, point: &[Letter], n: usize, depth: usize) -> Evaluation {
    assert!(n <= point.len(), "point prefix shorter than the sum");
    let l = term_length(f, depth);
    let mut value = 0.0;
    let mut radius = 0.0;
    for i in 0..n {
        let e = f.eval(&point[i..(i + l).min(point.len())]);
        value += e.value;
        radius += e.radius;
    }
    Evaluation { value, radius }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LetterBounds {
    pub letter: Letter,
    /// Certified lower bound of `f` on the cylinder `[a]`.
    pub lower: f64,
    /// Certified upper bound of `f` on the cylinder `[a]`.
    pub upper: f64,
    pub depth: usize,
}

/// `I(f, a)` and `S(f, a)`, obtained by evaluating every admissible word of
/// length `depth` starting with `a`.
pub fn letter_bounds(
    f: &dyn Potential,
    a: Letter,
    shift: &TruncatedShift,
    depth: usize,
) -> Result<LetterBounds> {
    let i = shift.index_of(a).ok_or(Error::LetterAbsent(a))?;
    let depth = depth.max(1);
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut word = vec![a];
    fn rec(
        f: &dyn Potential,
        shift: &TruncatedShift,
        depth: usize,
        last: usize,
        word: &mut Vec<Letter>,
        lower: &mut f64,
        upper: &mut f64,
    ) {
        if word.len() == depth {
            let e = f.eval(word);
            *lower = lower.min(e.lo());
            *upper = upper.max(e.hi());
            return;
        }
        for j in shift.adjacency().successors(last) {
            word.push(shift.letter(j));
            rec(f, shift, depth, j, word, lower, upper);
            word.pop();
        }
    }
    rec(f, shift, depth, i, &mut word, &mut lower, &mut upper);
    Ok(LetterBounds {
        letter: a,
        lower,
        upper,
        depth,
    })
}

fn check_budget(shift: &TruncatedShift, n: usize) -> Result<()> {
    let count = shift.count_words(n);
    if count > FIX_BUDGET {
        return Err(Error::TooManyCylinders {
            needed: usize::try_from(count).unwrap_or(usize::MAX),
            limit: FIX_BUDGET as usize,
        });
    }
    Ok(())
}

/// Builds the strictly positive potential cohomologous on periodic data to
/// an eventually positive `f`, with `S_N f > B` checked on `Fix^N`.
pub fn regularize(
    f: PotentialRef,
    n: usize,
    b: f64,
    shift: &TruncatedShift,
    depth: usize,
) -> Result<Regularized> {
    if n == 0 || b <= 0.0 {
        return Err(Error::InvalidArgument("regularization needs N >= 1 and B > 0".into()));
    }
    let bounds: Vec<LetterBounds> = shift
        .letters()
        .iter()
        .map(|&a| letter_bounds(f.as_ref(), a, shift, depth))
        .collect::<Result<_>>()?;
    let min_lower = bounds.iter().map(|lb| lb.lower).fold(f64::INFINITY, f64::min);
    let r = min_lower.abs();
    let cut = r * n as f64 + b;
    let mut kept = HashSet::new();
    let mut t = f64::NEG_INFINITY;
    let mut lowest_in_f = f64::INFINITY;
    for lb in &bounds {
        if lb.lower <= cut {
            kept.insert(lb.letter);
            t = t.max(lb.upper);
            lowest_in_f = lowest_in_f.min(lb.lower);
        }
    }
    if kept.is_empty() {
        t = cut;
        lowest_in_f = cut;
    }

    check_budget(shift, n)?;
    let mut failure: Option<(Vec<Letter>, f64)> = None;
    let mut buf = Vec::with_capacity(n);
    for_each_fix(shift, n, None, |idx| {
        if failure.is_some() {
            return;
        }
        buf.clear();
        buf.extend(idx.iter().map(|&i| shift.letter(i as usize)));
        let s = cyclic_sum(f.as_ref(), &buf, depth);
        if s.lo() <= b {
            failure = Some((buf.clone(), s.value));
        }
    })?;
    if let Some((word, sum)) = failure {
        return Err(Error::NotEventuallyPositive { word, sum });
    }
    Ok(Regularized {
        base: f,
        n,
        b,
        r,
        t,
        lowest_in_f,
        kept,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LivsicFailure {
    pub period: usize,
    pub word: Vec<Letter>,
    /// `|S_n f - S_n g|` minus the accumulated evaluation error.
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LivsicReport {
    pub cohomologous_up_to_tol: bool,
    /// Largest `|S_n f - S_n g|` minus evaluation error over all checked
    /// periodic words (zero or negative when everything agrees).
    pub worst_violation: f64,
    pub first_failure: Option<LivsicFailure>,
    pub words_checked: usize,
}

/// Compares periodic Birkhoff sums of `f` and `g` on `Fix^n`, `n <= n_max`.
pub fn livsic_test(
    f: &dyn Potential,
    g: &dyn Potential,
    shift: &TruncatedShift,
    n_max: usize,
    tol: f64,
    depth: usize,
) -> Result<LivsicReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut first_failure = None;
    let mut checked = 0usize;
    let mut buf = Vec::new();
    for n in 1..=n_max {
        check_budget(shift, n)?;
        for_each_fix(shift, n, None, |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| shift.letter(i as usize)));
            let sf = cyclic_sum(f, &buf, depth);
            let sg = cyclic_sum(g, &buf, depth);
            let violation = (sf.value - sg.value).abs() - sf.radius - sg.radius;
            checked += 1;
            worst = worst.max(violation);
            if violation > tol && first_failure.is_none() {
                first_failure = Some(LivsicFailure {
                    period: n,
                    word: buf.clone(),
                    violation,
                });
            }
        })?;
    }
    Ok(LivsicReport {
        cohomologous_up_to_tol: first_failure.is_none(),
        worst_violation: if checked == 0 { 0.0 } else { worst },
        first_failure,
        words_checked: checked,
    })
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub enum ArithmeticVerdict {
    /// Every period examined is an integer multiple of `generator` within
    /// tolerance.
    ArithmeticSuspected { generator: f64 },
    /// Two periods whose ratio has no rational approximation with small
    /// denominator.
    NonArithmetic { witness: (f64, f64) },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ArithmeticReport {
    pub verdict: ArithmeticVerdict,
    pub periods_examined: usize,
}

fn is_least_rotation(w: &[u32]) -> bool {
    let n = w.len();
    (1..n).all(|i| w[i..].iter().chain(&w[..i]).ge(w.iter()))
}

/// Best rational approximation `p/q` with `q <= max_den` meeting `tol`.
fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let h = a.checked_mul(h1)?.checked_add(h0)?;
        let k = a.checked_mul(k1)?.checked_add(k0)?;
        if k > max_den {
            return None;
        }
        if (x - h as f64 / k as f64).abs() <= tol * x.abs().max(1.0) {
            return Some((h, k));
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        let frac = r - a as f64;
        if frac.abs() < 1e-300 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Decides whether the periods of primitive orbits of length `<= n_max`
/// generate a discrete subgroup of the reals.
pub fn arithmetic_test(
    f: &dyn Potential,
    shift: &TruncatedShift,
    n_max: usize,
    tol: f64,
    depth: usize,
) -> Result<ArithmeticReport> {
    let mut periods = Vec::new();
    let mut buf = Vec::new();
    for n in 1..=n_max {
        check_budget(shift, n)?;
        for_each_fix(shift, n, None, |idx| {
            if smallest_period(idx) != n || !is_least_rotation(idx) {
                return;
            }
            buf.clear();
            buf.extend(idx.iter().map(|&i| shift.letter(i as usize)));
            periods.push(cyclic_sum(f, &buf, depth).value);
        })?;
    }
    let examined = periods.len();
    let base = periods
        .iter()
        .map(|p| p.abs())
        .filter(|&p| p > tol)
        .fold(f64::INFINITY, f64::min);
    if !base.is_finite() {
        return Ok(ArithmeticReport {
            verdict: ArithmeticVerdict::ArithmeticSuspected { generator: 0.0 },
            periods_examined: examined,
        });
    }
    let mut lcm = 1i64;
    for &p in &periods {
        if p.abs() <= tol {
            continue;
        }
        match rational_approx(p.abs() / base, MAX_DENOMINATOR, tol) {
            Some((_, q)) => {
                lcm = lcm / gcd(lcm, q) * q;
                if lcm > MAX_DENOMINATOR * MAX_DENOMINATOR {
                    return Ok(ArithmeticReport {
                        verdict: ArithmeticVerdict::NonArithmetic { witness: (base, p) },
                        periods_examined: examined,
                    });
                }
            }
            None => {
                return Ok(ArithmeticReport {
                    verdict: ArithmeticVerdict::NonArithmetic { witness: (base, p) },
                    periods_examined: examined,
                })
            }
        }
    }
    let unit = base / lcm as f64;
    let common = periods
        .iter()
        .filter(|p| p.abs() > tol)
        .map(|p| (p.abs() / unit).round() as i64)
        .fold(0i64, gcd);
    Ok(ArithmeticReport {
        verdict: ArithmeticVerdict::ArithmeticSuspected {
            generator: unit * common.max(1) as f64,
        },
        periods_examined: examined,
    })
}
