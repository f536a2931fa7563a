//! Countable coding of a Schottky-type group with parabolics: the letters
//! are the hyperbolic generators and their inverses together with all
//! nonzero powers of each parabolic generator.
//!
//! Letter ids: `0..2H` are `h_i^{+1}, h_i^{-1}` for the `H` hyperbolic
//! generators; then for `n = 1, 2, ...` come `p_j^{+n}, p_j^{-n}` for each
//! parabolic generator `j`. Taking the first `2H + 2P N` ids keeps every
//! parabolic power up to `N`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::mobius::{CircleArc, GroupPresentation, MobiusKind, MobiusMap};
use crate::error::{Error, Result};
use crate::shift::{Alphabet, Letter, ShiftSpec, TransitionRule, TruncatedShift, TruncationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CodingLetter {
    /// Generator index (hyperbolic generators first).
    pub generator: usize,
    /// `+-1` for hyperbolic generators, any nonzero power for parabolic
    /// ones.
    pub power: i64,
}

impl CodingLetter {
    pub fn sign(&self) -> i64 {
        self.power.signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    hyperbolic: usize,
    parabolic: usize,
}

impl Layout {
    fn decode(&self, a: Letter) -> CodingLetter {
        let id = a.0 as usize;
        let h2 = 2 * self.hyperbolic;
        if id < h2 {
            CodingLetter {
                generator: id / 2,
                power: if id % 2 == 0 { 1 } else { -1 },
            }
        } else {
            let k = id - h2;
            let p2 = 2 * self.parabolic;
            let n = (k / p2 + 1) as i64;
            CodingLetter {
                generator: self.hyperbolic + (k % p2) / 2,
                power: if k % 2 == 0 { n } else { -n },
            }
        }
    }

    fn encode(&self, c: CodingLetter) -> Option<Letter> {
        if c.power == 0 {
            return None;
        }
        let neg = usize::from(c.power < 0);
        if c.generator < self.hyperbolic {
            (c.power.abs() == 1).then(|| Letter((2 * c.generator + neg) as u32))
        } else if c.generator < self.hyperbolic + self.parabolic {
            let j = c.generator - self.hyperbolic;
            let n = c.power.unsigned_abs() as usize;
            let id = 2 * self.hyperbolic + (n - 1) * 2 * self.parabolic + 2 * j + neg;
            u32::try_from(id).ok().map(Letter)
        } else {
            None
        }
    }

    fn is_parabolic(&self, c: &CodingLetter) -> bool {
        c.generator >= self.hyperbolic
    }

    /// `G(b) != G(a)^{-1}`, and a parabolic letter is not followed by a
    /// power of the same parabolic generator.
    fn allowed(&self, a: &CodingLetter, b: &CodingLetter) -> bool {
        if a.generator != b.generator {
            return true;
        }
        !self.is_parabolic(a) && a.power == b.power
    }
}

/// Transition rule of the coding, usable as a [`ShiftSpec`] rule.
#[derive(Debug, Clone, Copy)]
pub struct CodingRule {
    layout: Layout,
}

impl TransitionRule for CodingRule {
    fn allowed(&self, a: Letter, b: Letter) -> bool {
        self.layout.allowed(&self.layout.decode(a), &self.layout.decode(b))
    }
    fn describe(&self) -> String {
        format!(
            "parabolic coding ({} hyperbolic, {} parabolic generators)",
            self.layout.hyperbolic, self.layout.parabolic
        )
    }
}

/// The coding of a validated presentation.
#[derive(Debug, Clone)]
pub struct CodingTable {
    presentation: GroupPresentation,
    layout: Layout,
}

impl fmt::Display for CodingLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}^{}", self.generator, self.power)
    }
}

impl CodingTable {
    pub fn presentation(&self) -> &GroupPresentation {
        &self.presentation
    }

    pub fn hyperbolic_count(&self) -> usize {
        self.layout.hyperbolic
    }

    pub fn parabolic_count(&self) -> usize {
        self.layout.parabolic
    }

    pub fn decode(&self, a: Letter) -> CodingLetter {
        self.layout.decode(a)
    }

    pub fn encode(&self, c: CodingLetter) -> Option<Letter> {
        self.layout.encode(c)
    }

    pub fn is_parabolic(&self, c: &CodingLetter) -> bool {
        self.layout.is_parabolic(c)
    }

    pub fn allowed(&self, a: &CodingLetter, b: &CodingLetter) -> bool {
        self.layout.allowed(a, b)
    }

    /// Number of letters with parabolic powers up to `max_power`.
    pub fn letters_up_to(&self, max_power: usize) -> usize {
        2 * self.layout.hyperbolic + 2 * self.layout.parabolic * max_power
    }

    /// `G(a)`.
    pub fn element(&self, c: &CodingLetter) -> MobiusMap {
        self.presentation.generator(c.generator).map.pow(c.power)
    }

    /// `r(a)`: `|n| + 1` for a parabolic power `p^n`, else 1.
    pub fn r(&self, c: &CodingLetter) -> u64 {
        if self.is_parabolic(c) {
            c.power.unsigned_abs() + 1
        } else {
            1
        }
    }

    /// `s(a)` as `(generator, sign)`, or `None` for the identity.
    pub fn s(&self, c: &CodingLetter) -> Option<(usize, i64)> {
        self.is_parabolic(c).then(|| (c.generator, c.sign()))
    }

    /// `g_a`, with `G(a) = s(a)^{r(a) - 2} g_a`.
    pub fn g(&self, c: &CodingLetter) -> MobiusMap {
        let gen = self.presentation.generator(c.generator).map;
        if self.is_parabolic(c) {
            gen.pow(c.sign())
        } else {
            gen.pow(c.power)
        }
    }

    /// Largest deviation of `G(a)` from `s(a)^{r(a)-2} g_a` over the letters
    /// with parabolic powers up to `max_power`.
    pub fn relation_defect(&self, max_power: usize) -> f64 {
        (0..self.letters_up_to(max_power))
            .map(|i| {
                let c = self.decode(Letter(i as u32));
                let rhs = match self.s(&c) {
                    Some((gen, sign)) => {
                        let s = self.presentation.generator(gen).map.pow(sign);
                        s.pow(self.r(&c) as i64 - 2).compose(&self.g(&c))
                    }
                    None => self.g(&c),
                };
                (self.element(&c).matrix() - rhs.matrix()).amax()
            })
            .fold(0.0, f64::max)
    }

    /// `max_n #r^{-1}(n)`.
    pub fn multiplicity_bound(&self) -> usize {
        (2 * self.layout.hyperbolic).max(2 * self.layout.parabolic)
    }

    pub fn rule(&self) -> CodingRule {
        CodingRule { layout: self.layout }
    }

    /// The countable shift, with `r` as truncation weight.
    pub fn shift_spec(&self) -> ShiftSpec {
        let layout = self.layout;
        ShiftSpec::new(Alphabet::Countable { first: 0 }, Arc::new(self.rule()))
            .with_weight(Arc::new(move |a| {
                let c = layout.decode(a);
                if layout.is_parabolic(&c) {
                    (c.power.unsigned_abs() + 1) as f64
                } else {
                    1.0
                }
            }))
    }

    pub fn truncated(&self, max_power: usize) -> Result<TruncatedShift> {
        self.shift_spec().truncate(&TruncationRule::FirstK(self.letters_up_to(max_power)))
    }

    /// Arc containing `omega` of every sequence starting with `c`.
    pub fn target(&self, c: &CodingLetter) -> CircleArc {
        let g = self.presentation.generator(c.generator);
        if c.power > 0 {
            g.attracting
        } else {
            g.repelling
        }
    }

    /// Target arcs of the letter classes allowed after `c` (one arc per
    /// generator and sign).
    pub fn successor_arcs(&self, c: &CodingLetter) -> Vec<CircleArc> {
        let mut out = Vec::new();
        for gen in 0..self.presentation.rank() {
            for sign in [1i64, -1] {
                let b = CodingLetter { generator: gen, power: sign };
                if self.allowed(c, &b) {
                    out.push(self.target(&b));
                }
            }
        }
        out
    }

    pub fn check_admissible(&self, word: &[CodingLetter]) -> Result<()> {
        for w in word.windows(2) {
            if !self.allowed(&w[0], &w[1]) {
                let letters = word.iter().filter_map(|c| self.encode(*c)).collect();
                return Err(Error::InadmissibleWord(letters));
            }
        }
        Ok(())
    }

    /// `G(x_1) ... G(x_{m-1})` applied to the target arc of `x_m`: the
    /// nested arc containing `omega(x)` for every `x` starting with `word`.
    pub fn omega_arc(&self, word: &[CodingLetter]) -> CircleArc {
        let Some(last) = word.last() else {
            return CircleArc {
                start: 0.0,
                length: PI,
            };
        };
        let t = self.target(last);
        let (mut s, mut e) = (t.start, t.end());
        for c in word[..word.len() - 1].iter().rev() {
            let g = self.element(c);
            s = g.act(s);
            e = g.act(e);
        }
        CircleArc::new(s, e)
    }

    pub fn decode_word(&self, word: &[Letter]) -> Vec<CodingLetter> {
        word.iter().map(|&a| self.decode(a)).collect()
    }

    /// Empirical shadow constant: the largest distance from
    /// `G(x_1)...G(x_n)(b_0)` to the geodesic ray from `b_0` to `omega(x)`,
    /// over the given words and all their prefixes.
    pub fn shadow_constant(&self, words: &[Vec<CodingLetter>]) -> f64 {
        let b0 = self.presentation.basepoint;
        let mut worst: f64 = 0.0;
        for w in words {
            let omega = self.omega_arc(w).midpoint();
            let mut g = MobiusMap::identity();
            for c in w {
                g = g.compose(&self.element(c));
                worst = worst.max(distance_to_ray(b0, omega, g.act_upper(b0)));
            }
        }
        worst
    }
}

/// Hyperbolic distance in the upper half-plane.
pub fn hyperbolic_distance(z: (f64, f64), w: (f64, f64)) -> f64 {
    let d2 = (z.0 - w.0).powi(2) + (z.1 - w.1).powi(2);
    (1.0 + d2 / (2.0 * z.1 * w.1)).acosh()
}

/// Distance from `q` to the geodesic ray from `b0` towards the boundary
/// point with angle `psi`.
fn distance_to_ray(b0: (f64, f64), psi: f64, q: (f64, f64)) -> f64 {
    // Move b0 to i and the endpoint to infinity: first translate/scale b0
    // to i, then rotate the endpoint to infinity about i.
    let to_i = |z: (f64, f64)| ((z.0 - b0.0) / b0.1, z.1 / b0.1);
    let x = super::mobius::real_of_angle(psi);
    let qi = to_i(q);
    let end = if x.is_infinite() { f64::INFINITY } else { (x - b0.0) / b0.1 };
    // Rotation about i by angle t: z -> (cos t z + sin t)/(-sin t z + cos t)
    // sends cot(t)... choose t with -sin t * end + cos t = 0.
    let t = if end.is_infinite() { 0.0 } else { (1.0f64).atan2(end) };
    let rot = MobiusMap::new(t.cos(), t.sin(), -t.sin(), t.cos()).expect("rotation");
    let r = rot.act_upper(qi);
    // Ray is {i y : y >= 1}.
    if r.1 >= 1.0 {
        (r.0.abs() / r.1).asinh()
    } else {
        hyperbolic_distance(r, (0.0, 1.0))
    }
}

/// Builds the coding after validating the presentation.
pub fn build_coding(presentation: &GroupPresentation) -> Result<CodingTable> {
    presentation.validate()?;
    for g in presentation.parabolic.iter() {
        if g.map.kind() != MobiusKind::Parabolic {
            return Err(Error::InvalidPresentation("parabolic generator is not parabolic".into()));
        }
    }
    Ok(CodingTable {
        presentation: presentation.clone(),
        layout: Layout {
            hyperbolic: presentation.hyperbolic.len(),
            parabolic: presentation.parabolic.len(),
        },
    })
}

/// `(center angle, radius)` of the nested arc of the first `depth` letters.
pub fn omega_endpoint(coding: &CodingTable, prefix: &[Letter], depth: usize) -> Result<(f64, f64)> {
    let word = coding.decode_word(prefix);
    coding.check_admissible(&word)?;
    let arc = coding.omega_arc(&word[..depth.min(word.len())]);
    Ok((arc.midpoint(), arc.length / 2.0))
}

#[cfg(test)]
mod tests {
    use super::super::mobius::{angle_of_real, default_group, real_of_angle};
    use super::*;

    fn table() -> CodingTable {
        build_coding(&default_group()).unwrap()
    }

    #[test]
    fn letters_round_trip() {
        let t = table();
        for i in 0..40 {
            let c = t.decode(Letter(i));
            assert_eq!(t.encode(c), Some(Letter(i)));
        }
        let p5 = CodingLetter { generator: 1, power: -5 };
        assert_eq!(t.r(&p5), 6);
        assert_eq!(t.s(&p5), Some((1, -1)));
        assert_eq!(t.r(&t.decode(Letter(0))), 1);
        assert!(t.relation_defect(20) < 1e-9);
        assert_eq!(t.multiplicity_bound(), 2);
    }

    #[test]
    fn transitions() {
        let t = table();
        let h = CodingLetter { generator: 0, power: 1 };
        let hi = CodingLetter { generator: 0, power: -1 };
        let p2 = CodingLetter { generator: 1, power: 2 };
        let pm3 = CodingLetter { generator: 1, power: -3 };
        assert!(t.allowed(&h, &h));
        assert!(!t.allowed(&h, &hi));
        assert!(!t.allowed(&p2, &pm3));
        assert!(!t.allowed(&p2, &p2));
        assert!(t.allowed(&p2, &hi));
        assert!(t.allowed(&hi, &pm3));
    }

    #[test]
    fn omega_examples() {
        let t = table();
        let h = CodingLetter { generator: 0, power: 1 };
        let arc = t.omega_arc(&[h; 30]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(arc.contains(angle_of_real(golden), 1e-15));
        assert!(arc.length < 1e-12);
        let r10 = t.omega_arc(&[h; 10]).length;
        let r20 = t.omega_arc(&[h; 20]).length;
        assert!(r20 < r10 * 1e-6);
        let p = CodingLetter { generator: 1, power: 1 };
        let w: Vec<CodingLetter> = (0..40).map(|i| if i % 2 == 0 { h } else { p }).collect();
        let (center, radius) = omega_endpoint(&t, &w.iter().map(|c| t.encode(*c).unwrap()).collect::<Vec<_>>(), 40).unwrap();
        let hp = t.element(&h).compose(&t.element(&p));
        let (att, _) = hp.fixed_points().unwrap();
        assert!((real_of_angle(center) - real_of_angle(att)).abs() < 1e-9 && radius < 1e-12);
    }

    #[test]
    fn cyclic_products_are_hyperbolic() {
        let t = table();
        let shift = t.truncated(3).unwrap();
        for n in 1..=4 {
            crate::shift::for_each_fix(&shift, n, None, |idx| {
                let g = idx
                    .iter()
                    .map(|&i| t.element(&t.decode(shift.letter(i as usize))))
                    .fold(MobiusMap::identity(), |acc, m| acc.compose(&m));
                assert_eq!(g.kind(), MobiusKind::Hyperbolic, "{idx:?}");
            })
            .unwrap();
        }
    }

    #[test]
    fn shadow_constant_is_finite() {
        let t = table();
        let h = CodingLetter { generator: 0, power: 1 };
        let p = CodingLetter { generator: 1, power: 7 };
        let words = vec![vec![h; 12], vec![h, p, h, h, p, h, h, h]];
        let l = t.shadow_constant(&words);
        assert!(l.is_finite() && l < 10.0, "{l}");
    }
}
