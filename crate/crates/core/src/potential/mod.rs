//! Hölder potentials on cylinders, Birkhoff sums, letter bounds,
//! regularization and cohomology checks.

mod analysis;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::shift::Letter;

pub use analysis::{
    arithmetic_test, cyclic_sum, eval_birkhoff, eval_birkhoff_along, letter_bounds, livsic_test, regularize,
    ArithmeticReport, ArithmeticVerdict, LetterBounds, LivsicFailure, LivsicReport,
};

/// A value together with a certified radius: the true value lies in
/// `[value - radius, value + radius]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub radius: f64,
}

impl Evaluation {
    pub fn exact(value: f64) -> Self {
        Evaluation { value, radius: 0.0 }
    }

    pub fn from_range(lo: f64, hi: f64) -> Self {
        Evaluation {
            value: 0.5 * (lo + hi),
            radius: 0.5 * (hi - lo),
        }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.value + self.radius
    }
}

/// `|f(x) - f(y)| <= constant * exp(-exponent * n)` whenever `x` and `y`
/// share their first `n >= 1` letters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderConstants {
    pub constant: f64,
    pub exponent: f64,
}

impl HolderConstants {
    pub fn variation(&self, n: usize) -> f64 {
        self.constant * (-self.exponent * n as f64).exp()
    }

    /// Bound on `sum_{l >= n} variation(l)`.
    pub fn tail_sum(&self, n: usize) -> f64 {
        if self.constant == 0.0 {
            return 0.0;
        }
        self.variation(n) / (1.0 - (-self.exponent).exp())
    }
}

pub trait Potential: Send + Sync + fmt::Debug {
    /// Value on the cylinder of a non-empty prefix. The radius covers every
    /// point of the cylinder.
    fn eval(&self, prefix: &[Letter]) -> Evaluation;

    fn holder(&self) -> HolderConstants;

    /// `Some(m)` when the potential depends on the first `m` letters only.
    fn locally_constant_depth(&self) -> Option<usize> {
        None
    }

    fn describe(&self) -> String;
}

pub type PotentialRef = Arc<dyn Potential>;

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Potential for Constant {
    fn eval(&self, _: &[Letter]) -> Evaluation {
        Evaluation::exact(self.0)
    }
    fn holder(&self) -> HolderConstants {
        HolderConstants {
            constant: 0.0,
            exponent: 1.0,
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        Some(0)
    }
    fn describe(&self) -> String {
        format!("constant {}", self.0)
    }
}

/// A function of the first `depth` letters given by a table. Words missing
/// from the table take `default`.
#[derive(Debug, Clone)]
pub struct LocallyConstant {
    depth: usize,
    table: BTreeMap<Vec<Letter>, f64>,
    default: f64,
    spread: f64,
}

impl LocallyConstant {
    pub fn new(depth: usize, table: BTreeMap<Vec<Letter>, f64>, default: f64) -> Self {
        assert!(depth >= 1, "locally constant depth must be at least 1");
        assert!(
            table.keys().all(|k| k.len() == depth),
            "table keys must have length {depth}"
        );
        let (lo, hi) = table
            .values()
            .fold((default, default), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        LocallyConstant {
            depth,
            table,
            default,
            spread: hi - lo,
        }
    }

    /// Depth-one potential from per-letter values.
    pub fn per_letter(values: impl IntoIterator<Item = (Letter, f64)>) -> Self {
        let table = values.into_iter().map(|(a, v)| (vec![a], v)).collect();
        Self::new(1, table, 0.0)
    }

    /// Depth-two potential from per-pair values.
    pub fn per_pair(values: impl IntoIterator<Item = ((Letter, Letter), f64)>) -> Self {
        let table = values.into_iter().map(|((a, b), v)| (vec![a, b], v)).collect();
        Self::new(2, table, 0.0)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Range over all table words extending `prefix` (the empty prefix gives
    /// the global range).
    pub fn range(&self, prefix: &[Letter]) -> (f64, f64) {
        if prefix.len() >= self.depth {
            let v = self
                .table
                .get(&prefix[..self.depth])
                .copied()
                .unwrap_or(self.default);
            return (v, v);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, &v) in self.table.range(prefix.to_vec()..) {
            if !k.starts_with(prefix) {
                break;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            (self.default, self.default)
        } else {
            (lo, hi)
        }
    }
}

impl Potential for LocallyConstant {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        let (lo, hi) = self.range(prefix);
        Evaluation::from_range(lo, hi)
    }
    fn holder(&self) -> HolderConstants {
        HolderConstants {
            constant: self.spread * ((self.depth - 1) as f64).exp(),
            exponent: 1.0,
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        Some(self.depth)
    }
    fn describe(&self) -> String {
        format!("locally constant, depth {}, {} entries", self.depth, self.table.len())
    }
}

/// `scale * ln(x_1 + offset)`, with the letter id read as a number.
#[derive(Debug, Clone, Copy)]
pub struct LogFirstLetter {
    pub scale: f64,
    pub offset: f64,
}

impl Potential for LogFirstLetter {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        Evaluation::exact(self.scale * (prefix[0].0 as f64 + self.offset).ln())
    }
    fn holder(&self) -> HolderConstants {
        HolderConstants {
            constant: 0.0,
            exponent: 1.0,
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        Some(1)
    }
    fn describe(&self) -> String {
        format!("{} * ln(x1 + {})", self.scale, self.offset)
    }
}

/// `sum_{i >= 1} ratio^i [x_i = target]`, a genuinely Hölder (not locally
/// constant) potential.
#[derive(Debug, Clone, Copy)]
pub struct GeometricIndicator {
    pub target: Letter,
    pub ratio: f64,
}

impl Potential for GeometricIndicator {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        let mut known = 0.0;
        let mut w = 1.0;
        for &a in prefix {
            w *= self.ratio;
            if a == self.target {
                known += w;
            }
        }
        let tail = w * self.ratio / (1.0 - self.ratio);
        Evaluation::from_range(known, known + tail)
    }
    fn holder(&self) -> HolderConstants {
        HolderConstants {
            constant: self.ratio / (1.0 - self.ratio),
            exponent: -self.ratio.ln(),
        }
    }
    fn describe(&self) -> String {
        format!("sum ratio^i [x_i = {}], ratio {}", self.target, self.ratio)
    }
}

/// `sum c_i f_i`.
#[derive(Debug, Clone)]
pub struct LinearCombination(pub Vec<(f64, PotentialRef)>);

impl Potential for LinearCombination {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        let mut value = 0.0;
        let mut radius = 0.0;
        for (c, f) in &self.0 {
            let e = f.eval(prefix);
            value += c * e.value;
            radius += c.abs() * e.radius;
        }
        Evaluation { value, radius }
    }
    fn holder(&self) -> HolderConstants {
        let exponent = self
            .0
            .iter()
            .map(|(_, f)| f.holder().exponent)
            .fold(f64::INFINITY, f64::min);
        HolderConstants {
            constant: self.0.iter().map(|(c, f)| c.abs() * f.holder().constant).sum(),
            exponent: if exponent.is_finite() { exponent } else { 1.0 },
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        self.0
            .iter()
            .map(|(_, f)| f.locally_constant_depth())
            .try_fold(0usize, |m, d| d.map(|d| m.max(d)))
    }
    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(c, f)| format!("{c} * ({})", f.describe()))
            .collect();
        parts.join(" + ")
    }
}

pub fn scaled(c: f64, f: PotentialRef) -> PotentialRef {
    Arc::new(LinearCombination(vec![(c, f)]))
}

/// `f + h - h o sigma`, cohomologous to `f`.
#[derive(Debug, Clone)]
pub struct Coboundary {
    pub base: PotentialRef,
    pub transfer: LocallyConstant,
}

impl Potential for Coboundary {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        let e = self.base.eval(prefix);
        let (h_lo, h_hi) = self.transfer.range(prefix);
        let (s_lo, s_hi) = self.transfer.range(&prefix[1..]);
        Evaluation::from_range(e.lo() + h_lo - s_hi, e.hi() + h_hi - s_lo)
    }
    fn holder(&self) -> HolderConstants {
        let b = self.base.holder();
        let h = self.transfer.holder();
        HolderConstants {
            constant: b.constant + h.constant * (1.0 + std::f64::consts::E),
            exponent: b.exponent.min(1.0),
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        self.base
            .locally_constant_depth()
            .map(|d| d.max(self.transfer.depth() + 1))
    }
    fn describe(&self) -> String {
        format!("({}) + coboundary", self.base.describe())
    }
}

/// The strictly positive potential
/// `g = (1/N) sum_{i<N} f o sigma^i + (f - (R N + B)) [x_1 not in F]`
/// built from an eventually positive `f`. It has the same periodic sums as
/// `f`, satisfies `g >= B / N` and `|f - g| <= 2 (R N + B + T)`.
#[derive(Debug, Clone)]
pub struct Regularized {
    pub base: PotentialRef,
    pub n: usize,
    pub b: f64,
    /// `|inf_a I(f, a)|`.
    pub r: f64,
    /// `max_{a in F} S(f, a)`.
    pub t: f64,
    /// Lowest certified lower letter bound over `F`.
    pub lowest_in_f: f64,
    pub kept: HashSet<Letter>,
}

impl Regularized {
    pub fn cutoff(&self) -> f64 {
        self.r * self.n as f64 + self.b
    }

    pub fn in_f(&self, a: Letter) -> bool {
        self.kept.contains(&a)
    }
}

impl Potential for Regularized {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        let cut = self.cutoff();
        let m = prefix.len();
        let (mut lo, mut hi) = (0.0, 0.0);
        for i in 0..self.n {
            if i < m {
                if self.in_f(prefix[i]) {
                    let e = self.base.eval(&prefix[i..]);
                    lo += e.lo();
                    hi += e.hi();
                } else {
                    lo += cut;
                    hi += cut;
                }
            } else {
                // Unseen letter: either in F (value in [lowest, T]) or the
                // constant cutoff.
                lo += self.lowest_in_f.min(cut);
                hi += self.t.max(cut);
            }
        }
        let n = self.n as f64;
        lo /= n;
        hi /= n;
        if !self.in_f(prefix[0]) {
            let e = self.base.eval(prefix);
            lo += e.lo() - cut;
            hi += e.hi() - cut;
        }
        Evaluation::from_range(lo, hi)
    }
    fn holder(&self) -> HolderConstants {
        let h = self.base.holder();
        HolderConstants {
            constant: 2.0 * h.constant * (h.exponent * (self.n as f64 - 1.0)).exp(),
            exponent: h.exponent,
        }
    }
    fn locally_constant_depth(&self) -> Option<usize> {
        self.base
            .locally_constant_depth()
            .map(|d| d.max(1) + self.n - 1)
    }
    fn describe(&self) -> String {
        format!(
            "regularization of ({}) with N = {}, B = {}",
            self.base.describe(),
            self.n,
            self.b
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_indicator_radius() {
        let f = GeometricIndicator {
            target: Letter(0),
            ratio: 0.5,
        };
        let e = f.eval(&[Letter(0), Letter(1), Letter(0)]);
        // known part 1/2 + 1/8, tail in [0, 1/8]
        assert!((e.lo() - 0.625).abs() < 1e-15);
        assert!((e.hi() - 0.75).abs() < 1e-15);
        assert_eq!(f.holder().constant, 1.0);
    }

    #[test]
    fn pair_table_short_prefix_is_range() {
        let f = LocallyConstant::per_pair([
            ((Letter(0), Letter(0)), 1.0),
            ((Letter(0), Letter(1)), 3.0),
            ((Letter(1), Letter(0)), 5.0),
        ]);
        let e = f.eval(&[Letter(0)]);
        assert_eq!((e.lo(), e.hi()), (1.0, 3.0));
        assert_eq!(f.eval(&[Letter(1), Letter(0)]).value, 5.0);
        assert_eq!(f.locally_constant_depth(), Some(2));
    }

    #[test]
    fn linear_combination_depth() {
        let f: PotentialRef = Arc::new(LocallyConstant::per_letter([(Letter(0), 1.0)]));
        let g: PotentialRef = Arc::new(Constant(2.0));
        let h = LinearCombination(vec![(2.0, f), (-1.0, g)]);
        assert_eq!(h.locally_constant_depth(), Some(1));
        assert_eq!(h.eval(&[Letter(0)]).value, 0.0);
    }
}
