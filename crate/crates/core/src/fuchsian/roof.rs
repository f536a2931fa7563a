//! Roof functions of symmetric-power representations over the parabolic
//! coding: `tau(x) = phi(B(rho(G(x_1)), xi(omega(sigma x))))`.
//!
//! For `Sym^{d-1}` the cocycle at a Veronese flag is `b (d-1-2j)_j` with
//! `b = log |A v|` for the 2x2 matrix `A` and a unit vector `v` on the
//! boundary line, so `tau` is `phi.sym_weight() * b`. As a function of the
//! line, `b` only has critical points at the right singular directions of
//! `A`, so its range over an arc is attained at the arc endpoints or at a
//! singular direction inside it. Cylinder ranges are therefore exact up to
//! rounding.

use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::coding::{CodingLetter, CodingTable};
use super::linalg::{iwasawa_cocycle, sym_power, veronese_flag, CartanVector, Functional, Matrix};
use super::mobius::{angle_of, CircleArc, MobiusMap};
use crate::error::{Error, Result};
use crate::potential::{Evaluation, HolderConstants, Potential};
use crate::shift::Letter;

/// Minimum transversality angle accepted by [`roof`].
pub const FLAG_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RepresentationKind {
    Sl2,
    /// `Sym^{d-1}` into `SL(d, R)`.
    SymPower(usize),
}

#[derive(Debug, Clone)]
pub struct Representation {
    pub kind: RepresentationKind,
    coding: Arc<CodingTable>,
}

impl Representation {
    pub fn new(kind: RepresentationKind, coding: Arc<CodingTable>) -> Result<Self> {
        if let RepresentationKind::SymPower(d) = kind {
            if d < 2 {
                return Err(Error::InvalidArgument(format!("symmetric power dimension {d} < 2")));
            }
        }
        let rep = Representation { kind, coding };
        rep.check_unipotent()?;
        Ok(rep)
    }

    /// Parabolic generators must map to a single unipotent Jordan block:
    /// `(rho(p) - I)^{d-1} != 0` and `(rho(p) - I)^d = 0`.
    pub fn check_unipotent(&self) -> Result<()> {
        let d = self.dim();
        for g in &self.coding.presentation().parabolic {
            let n = self.of(&g.map) - Matrix::identity(d, d);
            let mut pow = Matrix::identity(d, d);
            for _ in 0..d - 1 {
                pow = &pow * &n;
            }
            let scale = n.amax().max(1.0).powi(d as i32);
            if pow.amax() <= 1e-9 * scale || (&pow * &n).amax() > 1e-9 * scale {
                return Err(Error::InvalidPresentation(
                    "parabolic image is not a single unipotent Jordan block".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            RepresentationKind::Sl2 => 2,
            RepresentationKind::SymPower(d) => d,
        }
    }

    pub fn coding(&self) -> &CodingTable {
        &self.coding
    }

    pub fn of(&self, g: &MobiusMap) -> Matrix {
        sym_power(g.matrix(), self.dim())
    }

    /// `rho(G(a))`.
    pub fn image(&self, c: &CodingLetter) -> Matrix {
        self.of(&self.coding.element(c))
    }

    /// `rho` of the product `G(w_1) ... G(w_n)`, multiplied in `SL(2)`
    /// before taking the symmetric power.
    pub fn word_image(&self, word: &[CodingLetter]) -> Matrix {
        self.of(&self.word_element(word))
    }

    pub fn word_element(&self, word: &[CodingLetter]) -> MobiusMap {
        word.iter()
            .fold(MobiusMap::identity(), |acc, c| acc.compose(&self.coding.element(c)))
    }

    /// `kappa(rho(g))`. Rotations act orthogonally in the basis of
    /// [`sym_power`], so this is `log sigma_1(g) (d-1-2j)_j`; computing it
    /// from the 2x2 matrix avoids the conditioning loss of a `d x d` SVD.
    pub fn cartan(&self, g: &MobiusMap) -> CartanVector {
        let s = g.matrix().singular_values();
        self.weights(s[0].max(s[1]).ln())
    }

    /// `lambda(rho(g))`, from the eigenvalues of the 2x2 matrix.
    pub fn jordan(&self, g: &MobiusMap) -> CartanVector {
        let tr = g.trace().abs();
        let lam = if tr > 2.0 {
            0.5 * (tr + (tr * tr - 4.0).sqrt())
        } else {
            1.0
        };
        self.weights(lam.ln())
    }

    fn weights(&self, b: f64) -> CartanVector {
        let d = self.dim();
        CartanVector((0..d).map(|j| b * (d as f64 - 1.0 - 2.0 * j as f64)).collect())
    }

    /// `B(rho(g), xi(psi))` through the generic QR cocycle.
    pub fn cocycle(&self, g: &MobiusMap, psi: f64) -> Result<CartanVector> {
        iwasawa_cocycle(&self.of(g), &veronese_flag([psi.cos(), psi.sin()], self.dim()))
    }
}

/// `log |A v|` for the unit vector on the line with angle `psi`.
fn log_stretch(a: &Matrix2<f64>, psi: f64) -> f64 {
    (a * Vector2::new(psi.cos(), psi.sin())).norm().ln()
}

/// Angles of the right singular directions of `a`; the second one is the
/// most contracted.
fn singular_angles(a: &Matrix2<f64>) -> [f64; 2] {
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (first, second) = if svd.singular_values[0] >= svd.singular_values[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    [
        angle_of(vt[(first, 0)], vt[(first, 1)]),
        angle_of(vt[(second, 0)], vt[(second, 1)]),
    ]
}

/// Exact range of `log |A v|` over the lines of the arcs.
fn stretch_range(a: &Matrix2<f64>, arcs: &[CircleArc]) -> (f64, f64) {
    let critical = singular_angles(a);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for arc in arcs {
        let mut probe = |psi: f64| {
            let b = log_stretch(a, psi);
            lo = lo.min(b);
            hi = hi.max(b);
        };
        probe(arc.start);
        probe(arc.end());
        for &c in &critical {
            if arc.contains(c, 0.0) {
                probe(c);
            }
        }
    }
    (lo, hi)
}

/// `tau = phi(B(rho(G(x_1)), xi(omega(sigma x))))` as a potential on the
/// coding shift.
#[derive(Debug)]
pub struct RoofPotential {
    rep: Representation,
    phi: Functional,
    weight: f64,
    holder: OnceLock<HolderConstants>,
}

impl RoofPotential {
    pub fn new(rep: Representation, phi: Functional) -> Result<Self> {
        if phi.dim() != rep.dim() {
            return Err(Error::InvalidArgument(format!(
                "functional has dimension {}, representation {}",
                phi.dim(),
                rep.dim()
            )));
        }
        let weight = phi.sym_weight();
        Ok(RoofPotential {
            rep,
            phi,
            weight,
            holder: OnceLock::new(),
        })
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn functional(&self) -> &Functional {
        &self.phi
    }

    /// Arcs that contain `omega(sigma x)` for every `x` in the cylinder.
    fn shifted_arcs(&self, word: &[CodingLetter]) -> Vec<CircleArc> {
        let coding = self.rep.coding();
        if word.len() == 1 {
            coding.successor_arcs(&word[0])
        } else {
            vec![coding.omega_arc(&word[1..])]
        }
    }

    /// Range of `tau` on the cylinder of a non-empty decoded word.
    pub fn range(&self, word: &[CodingLetter]) -> (f64, f64) {
        let a = *self.rep.coding().element(&word[0]).matrix();
        let (lo, hi) = stretch_range(&a, &self.shifted_arcs(word));
        let (lo, hi) = if self.weight >= 0.0 {
            (self.weight * lo, self.weight * hi)
        } else {
            (self.weight * hi, self.weight * lo)
        };
        let pad = 8.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs()));
        (lo - pad, hi + pad)
    }

    /// Empirical Hölder constants: widest cylinder range at each depth up
    /// to 5 over parabolic powers up to 3, fitted by an exponential
    /// envelope.
    fn fit_holder(&self) -> HolderConstants {
        let coding = self.rep.coding();
        let letters: Vec<CodingLetter> = (0..coding.letters_up_to(3))
            .map(|i| coding.decode(Letter(i as u32)))
            .collect();
        const DEPTH: usize = 5;
        let mut widths = [0.0f64; DEPTH + 1];
        let mut stack = Vec::with_capacity(DEPTH);
        fn walk(
            me: &RoofPotential,
            letters: &[CodingLetter],
            stack: &mut Vec<CodingLetter>,
            widths: &mut [f64],
        ) {
            let n = stack.len();
            let (lo, hi) = me.range(stack);
            widths[n] = widths[n].max(hi - lo);
            if n + 1 >= widths.len() {
                return;
            }
            for c in letters {
                if me.rep.coding().allowed(stack.last().expect("non-empty"), c) {
                    stack.push(*c);
                    walk(me, letters, stack, widths);
                    stack.pop();
                }
            }
        }
        for c in &letters {
            stack.push(*c);
            walk(self, &letters, &mut stack, &mut widths);
            stack.pop();
        }
        // Least-squares slope of log width over depths 2..=DEPTH.
        let pts: Vec<(f64, f64)> = (2..=DEPTH)
            .filter(|&n| widths[n] > 0.0)
            .map(|n| (n as f64, widths[n].ln()))
            .collect();
        let exponent = if pts.len() >= 2 {
            let m = pts.len() as f64;
            let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
            let (mx, my) = (sx / m, sy / m);
            let (num, den) = pts
                .iter()
                .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
            (-num / den).max(0.05)
        } else {
            0.05
        };
        let constant = (1..=DEPTH)
            .map(|n| widths[n] * (exponent * n as f64).exp())
            .fold(0.0, f64::max);
        HolderConstants { constant, exponent }
    }
}

impl Potential for RoofPotential {
    fn eval(&self, prefix: &[Letter]) -> Evaluation {
        if prefix.is_empty() {
            return Evaluation {
                value: 0.0,
                radius: f64::INFINITY,
            };
        }
        let word = self.rep.coding().decode_word(prefix);
        let (lo, hi) = self.range(&word);
        Evaluation::from_range(lo, hi)
    }

    fn holder(&self) -> HolderConstants {
        *self.holder.get_or_init(|| self.fit_holder())
    }

    fn describe(&self) -> String {
        format!("roof of {:?} for functional {}", self.rep.kind, self.phi.name)
    }
}

/// `tau(x)` from the first `depth` letters of `prefix`, as `(value,
/// certified error)`. Fails with `FlagDegenerate` when the flag is within
/// [`FLAG_EPSILON`] of the most contracted direction of `G(x_1)`.
pub fn roof(potential: &RoofPotential, prefix: &[Letter], depth: usize) -> Result<(f64, f64)> {
    let coding = potential.rep.coding();
    let word = coding.decode_word(prefix);
    coding.check_admissible(&word)?;
    if word.is_empty() || depth == 0 {
        return Err(Error::InvalidArgument("roof needs at least one letter".into()));
    }
    let word = &word[..depth.min(word.len())];
    let a = *coding.element(&word[0]).matrix();
    let [_, contracted] = singular_angles(&a);
    let arcs = potential.shifted_arcs(word);
    let angle = arcs
        .iter()
        .map(|arc| {
            if arc.contains(contracted, 0.0) {
                0.0
            } else {
                let d = |p: f64| (p - contracted).sin().abs();
                d(arc.start).min(d(arc.end()))
            }
        })
        .fold(f64::INFINITY, f64::min);
    if angle < FLAG_EPSILON {
        return Err(Error::FlagDegenerate {
            angle,
            epsilon: FLAG_EPSILON,
        });
    }
    let (lo, hi) = potential.range(word);
    Ok((0.5 * (lo + hi), 0.5 * (hi - lo)))
}

/// Birkhoff sum of `tau` around the periodic point `w^infinity` against
/// `phi(lambda(rho(G(w_1) ... G(w_n))))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodicCheck {
    pub birkhoff: f64,
    pub certified_error: f64,
    pub expected: f64,
}

impl PeriodicCheck {
    pub fn holds(&self, slack: f64) -> bool {
        (self.birkhoff - self.expected).abs() <= self.certified_error + slack
    }
}

pub fn periodic_check(potential: &RoofPotential, word: &[CodingLetter], reps: usize) -> Result<PeriodicCheck> {
    let coding = potential.rep.coding();
    let n = word.len();
    let long: Vec<CodingLetter> = word.iter().copied().cycle().take(n * (reps + 1)).collect();
    coding.check_admissible(&long)?;
    let mut birkhoff = 0.0;
    let mut err = 0.0;
    for j in 0..n {
        let (lo, hi) = potential.range(&long[j..j + n * reps]);
        birkhoff += 0.5 * (lo + hi);
        err += 0.5 * (hi - lo);
    }
    let expected = potential.phi.apply(&potential.rep.jordan(&potential.rep.word_element(word)));
    Ok(PeriodicCheck {
        birkhoff,
        certified_error: err,
        expected,
    })
}

/// Certified upper bound for `|tau_a - tau_b|` on the cylinder of `word`,
/// for two roofs over codings with the same letter structure.
pub fn difference_bound(a: &RoofPotential, b: &RoofPotential, word: &[CodingLetter]) -> f64 {
    let (alo, ahi) = a.range(word);
    let (blo, bhi) = b.range(word);
    (ahi - blo).max(bhi - alo)
}

/// `alpha_j(kappa(rho(p^n))) - 2 log n` for `n` in `ns`, for a parabolic
/// generator `p`.
pub fn parabolic_growth(rep: &Representation, generator: usize, j: usize, ns: &[u64]) -> Vec<f64> {
    let p = rep.coding().presentation().generator(generator).map;
    ns.iter()
        .map(|&n| rep.cartan(&p.pow(n as i64)).alpha(j) - 2.0 * (n as f64).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::coding::build_coding;
    use super::super::linalg::{cartan_projection, jordan_projection, Flag};
    use super::super::mobius::default_group;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rep(kind: RepresentationKind) -> Representation {
        Representation::new(kind, Arc::new(build_coding(&default_group()).unwrap())).unwrap()
    }

    const H: CodingLetter = CodingLetter { generator: 0, power: 1 };
    const HI: CodingLetter = CodingLetter { generator: 0, power: -1 };

    fn p(n: i64) -> CodingLetter {
        CodingLetter { generator: 1, power: n }
    }

    #[test]
    fn hyperbolic_periods() {
        let golden_log = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let tau = RoofPotential::new(rep(RepresentationKind::Sl2), Functional::alpha(1, 2)).unwrap();
        let c = periodic_check(&tau, &[H], 40).unwrap();
        assert!((c.birkhoff - 1.9248).abs() < 1e-4);
        assert!((c.expected - 2.0 * golden_log).abs() < 1e-12);
        assert!(c.holds(1e-10), "{c:?}");

        let phi = Functional::from_alpha(&[1.0, 1.0]);
        let tau = RoofPotential::new(rep(RepresentationKind::SymPower(3)), phi).unwrap();
        let c = periodic_check(&tau, &[H], 40).unwrap();
        assert!((c.birkhoff - 4.0 * golden_log).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn periodic_identity_with_parabolics() {
        let phi = Functional::from_alpha(&[1.0, 1.0]);
        let tau = RoofPotential::new(rep(RepresentationKind::SymPower(3)), phi).unwrap();
        for w in [vec![H, p(1)], vec![H, p(-3), HI, p(2)], vec![p(5), H, H, p(-1), HI]] {
            let c = periodic_check(&tau, &w, 30).unwrap();
            assert!(c.holds(1e-9 * (1.0 + c.expected.abs())), "{w:?}: {c:?}");
        }
    }

    #[test]
    fn closed_form_matches_qr_cocycle() {
        let r = rep(RepresentationKind::SymPower(4));
        let phi = Functional::omega(1, 4);
        let tau = RoofPotential::new(r.clone(), phi.clone()).unwrap();
        let word = [H, p(2), HI, HI];
        let (lo, hi) = tau.range(&word);
        let psi = r.coding().omega_arc(&word[1..]).midpoint();
        let b = r.cocycle(&r.coding().element(&word[0]), psi).unwrap();
        let v = phi.apply(&b);
        assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} not in [{lo}, {hi}]");
    }

    #[test]
    fn cocycle_laws_on_random_samples() {
        let r = rep(RepresentationKind::SymPower(3));
        let letters = [H, HI, p(1), p(-1), p(2), p(-4)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = r.coding().element(&letters[rng.gen_range(0..letters.len())]);
            let b = r.coding().element(&letters[rng.gen_range(0..letters.len())]);
            let psi = rng.gen_range(0.0..std::f64::consts::PI);
            let ab = r.cocycle(&a.compose(&b), psi).unwrap();
            let split = r.cocycle(&a, b.act(psi)).unwrap().add(&r.cocycle(&b, psi).unwrap());
            assert!(ab.max_abs_diff(&split) < 1e-9);
            let kappa = cartan_projection(&r.of(&a)).unwrap();
            assert!(r.cocycle(&a, psi).unwrap().norm() <= kappa.norm() + 1e-9);
        }
        let m = r.of(&r.coding().element(&H));
        let f = Flag::attracting(&m).unwrap();
        let b = iwasawa_cocycle(&m, &f).unwrap();
        assert!(b.max_abs_diff(&jordan_projection(&m).unwrap()) < 1e-9);
    }

    #[test]
    fn closed_form_projections_match_generic() {
        let r = rep(RepresentationKind::SymPower(4));
        for w in [vec![H, p(2)], vec![p(3)], vec![HI, p(-2), HI]] {
            let g = r.word_element(&w);
            let m = r.of(&g);
            // The generic routes lose accuracy with the condition number.
            assert!(r.cartan(&g).max_abs_diff(&cartan_projection(&m).unwrap()) < 1e-6);
            if w.len() > 1 {
                let (a, b) = (r.jordan(&g), jordan_projection(&m).unwrap());
                assert!(a.max_abs_diff(&b) < 1e-6, "{a:?} {b:?} {}", g.trace());
            }
        }
    }

    #[test]
    fn parabolic_growth_is_logarithmic() {
        let r = rep(RepresentationKind::SymPower(3));
        let ns: Vec<u64> = vec![1, 10, 100, 1000, 10_000];
        for j in 1..=2 {
            let g = parabolic_growth(&r, 1, j, &ns);
            let spread = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - g.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread < 3.0, "{g:?}");
            assert!((g[4] - g[3]).abs() < 1e-3);
        }
    }

    #[test]
    fn cylinder_ranges_nest_and_shrink() {
        let tau = RoofPotential::new(rep(RepresentationKind::Sl2), Functional::alpha(1, 2)).unwrap();
        let word = [H, p(3), H, H, p(-2), HI];
        let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
        for m in 1..=word.len() {
            let (lo, hi) = tau.range(&word[..m]);
            assert!(lo >= prev.0 - 1e-12 && hi <= prev.1 + 1e-12);
            prev = (lo, hi);
        }
        assert!(prev.1 - prev.0 < 0.05);
        let h = tau.holder();
        assert!(h.constant.is_finite() && h.exponent > 0.0);
    }

    #[test]
    fn roof_rejects_bad_input() {
        let tau = RoofPotential::new(rep(RepresentationKind::Sl2), Functional::alpha(1, 2)).unwrap();
        let c = tau.representation().coding();
        let bad: Vec<Letter> = [H, HI].iter().map(|x| c.encode(*x).unwrap()).collect();
        assert!(matches!(roof(&tau, &bad, 2), Err(Error::InadmissibleWord(_))));
        let ok: Vec<Letter> = [H, p(2), H].iter().map(|x| c.encode(*x).unwrap()).collect();
        let (v, e) = roof(&tau, &ok, 3).unwrap();
        assert!(v.is_finite() && e < 1.0);
    }
}
