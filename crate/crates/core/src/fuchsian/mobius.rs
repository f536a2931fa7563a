//! Möbius maps, boundary arcs and Schottky-type presentations.
//!
//! Boundary points are lines in `R^2`, stored as angles `psi` in `[0, pi)`
//! of a spanning vector `(cos psi, sin psi)`. The real point `x` is the line
//! through `(x, 1)` and infinity is `psi = 0`. Arcs run counterclockwise
//! (increasing `psi`), which is decreasing `x` on the real line.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobiusKind {
    Hyperbolic,
    Parabolic,
    Elliptic,
    Identity,
}

/// Tolerance on `|tr| = 2` when classifying.
const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusMap {
    m: Matrix2<f64>,
}

impl MobiusMap {
    /// Requires `|det - 1| <= 1e-12`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Matrix2::new(a, b, c, d);
        let det = m.determinant();
        if !((det - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidPresentation(format!("determinant {det} is not 1")));
        }
        Ok(MobiusMap { m })
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    fn raw(m: Matrix2<f64>) -> Self {
        MobiusMap { m }
    }

    pub fn identity() -> Self {
        Self::raw(Matrix2::identity())
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.m[(0, 0)], self.m[(0, 1)]], [self.m[(1, 0)], self.m[(1, 1)]]]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn kind(&self) -> MobiusKind {
        let t = self.trace().abs();
        if (self.m - Matrix2::identity()).amax() <= TRACE_TOL || (self.m + Matrix2::identity()).amax() <= TRACE_TOL {
            MobiusKind::Identity
        } else if (t - 2.0).abs() <= TRACE_TOL {
            MobiusKind::Parabolic
        } else if t > 2.0 {
            MobiusKind::Hyperbolic
        } else {
            MobiusKind::Elliptic
        }
    }

    /// Hyperbolic translation length `2 acosh(|tr| / 2)`.
    pub fn translation_length(&self) -> f64 {
        2.0 * (self.trace().abs() / 2.0).max(1.0).acosh()
    }

    pub fn compose(&self, other: &MobiusMap) -> MobiusMap {
        Self::raw(self.m * other.m)
    }

    pub fn inverse(&self) -> MobiusMap {
        let m = &self.m;
        Self::raw(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]))
    }

    /// `g^n` for any integer `n`, by repeated squaring.
    pub fn pow(&self, n: i64) -> MobiusMap {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = MobiusMap::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base);
            }
            base = base.compose(&base);
            e >>= 1;
        }
        acc
    }

    /// Image of the boundary point `psi`.
    pub fn act(&self, psi: f64) -> f64 {
        let v = self.m * nalgebra::Vector2::new(psi.cos(), psi.sin());
        angle_of(v[0], v[1])
    }

    /// Image of `z` in the upper half-plane.
    pub fn act_upper(&self, z: (f64, f64)) -> (f64, f64) {
        let (a, b, c, d) = (self.m[(0, 0)], self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]);
        // (a z + b) / (c z + d)
        let (nr, ni) = (a * z.0 + b, a * z.1);
        let (dr, di) = (c * z.0 + d, c * z.1);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// Attracting and repelling boundary fixed points of a hyperbolic map.
    pub fn fixed_points(&self) -> Option<(f64, f64)> {
        if self.kind() != MobiusKind::Hyperbolic {
            return None;
        }
        let (a, b, c, d) = (self.m[(0, 0)], self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]);
        let t = a + d;
        let disc = (t * t - 4.0).sqrt();
        let lam_big = if t > 0.0 { (t + disc) / 2.0 } else { (t - disc) / 2.0 };
        let lam_small = 1.0 / lam_big;
        // Eigenvector of [[a, b], [c, d]] for lambda: (b, lambda - a) or
        // (lambda - d, c).
        let vec_for = |l: f64| {
            let (x1, y1) = (b, l - a);
            let (x2, y2) = (l - d, c);
            if x1.hypot(y1) >= x2.hypot(y2) {
                angle_of(x1, y1)
            } else {
                angle_of(x2, y2)
            }
        };
        Some((vec_for(lam_big), vec_for(lam_small)))
    }
}

/// Angle in `[0, pi)` of the line through `(x, y)`.
pub fn angle_of(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    let a = if a < 0.0 { a + PI } else { a };
    if a >= PI {
        a - PI
    } else {
        a
    }
}

/// Boundary angle of the real point `x` (infinite `x` maps to 0).
pub fn angle_of_real(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        angle_of(x, 1.0)
    }
}

/// Real coordinate of a boundary angle (`inf` at 0).
pub fn real_of_angle(psi: f64) -> f64 {
    let s = psi.sin();
    if s == 0.0 {
        f64::INFINITY
    } else {
        psi.cos() / s
    }
}

/// Counterclockwise offset from `from` to `to`, in `[0, pi)`.
pub fn ccw_offset(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(PI);
    if d >= PI {
        0.0
    } else {
        d
    }
}

/// Closed counterclockwise arc of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleArc {
    pub start: f64,
    pub length: f64,
}

impl CircleArc {
    pub fn new(start: f64, end: f64) -> Self {
        let start = start.rem_euclid(PI);
        let length = ccw_offset(start, end.rem_euclid(PI));
        CircleArc { start, length }
    }

    /// The real points from `a` to `b` traversed with increasing `x`
    /// (through infinity when `a > b`); infinite endpoints are allowed.
    pub fn from_real(a: f64, b: f64) -> Self {
        let start = angle_of_real(b);
        let end = if a == f64::NEG_INFINITY { PI } else { angle_of_real(a) };
        let mut arc = CircleArc::new(start, end);
        if arc.length == 0.0 && a != b {
            arc.length = PI;
        }
        arc
    }

    pub fn end(&self) -> f64 {
        (self.start + self.length).rem_euclid(PI)
    }

    pub fn midpoint(&self) -> f64 {
        (self.start + self.length / 2.0).rem_euclid(PI)
    }

    pub fn contains(&self, psi: f64, slack: f64) -> bool {
        let o = ccw_offset(self.start, psi);
        o <= self.length + slack || o >= PI - slack
    }

    /// Image under a Möbius map (orientation is preserved).
    pub fn image(&self, g: &MobiusMap) -> CircleArc {
        let s = g.act(self.start);
        let e = g.act(self.end());
        let mut arc = CircleArc::new(s, e);
        // A long arc whose image wraps to the start is the whole circle
        // minus rounding.
        if arc.length == 0.0 && self.length > 0.0 {
            arc.length = if self.length > PI / 2.0 { PI } else { 0.0 };
        }
        arc
    }

    /// The complementary arc.
    pub fn complement(&self) -> CircleArc {
        CircleArc {
            start: self.end(),
            length: PI - self.length,
        }
    }

    /// Whether `other` lies inside this arc (within `slack`).
    pub fn contains_arc(&self, other: &CircleArc, slack: f64) -> bool {
        let o = ccw_offset(self.start, other.start);
        let o = if o > PI - slack { 0.0 } else { o };
        o + other.length <= self.length + slack
    }

    /// Whether the interiors overlap.
    pub fn overlaps(&self, other: &CircleArc, slack: f64) -> bool {
        let o = ccw_offset(self.start, other.start);
        let p = ccw_offset(other.start, self.start);
        (o < self.length - slack) || (p < other.length - slack)
    }

    pub fn sample(&self, i: usize, n: usize) -> f64 {
        (self.start + self.length * i as f64 / (n - 1).max(1) as f64).rem_euclid(PI)
    }
}

/// A generator with its ping-pong arcs: `g` maps the complement of
/// `repelling` into `attracting`, and `g^{-1}` the complement of
/// `attracting` into `repelling`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub map: MobiusMap,
    pub repelling: CircleArc,
    pub attracting: CircleArc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPresentation {
    pub hyperbolic: Vec<Generator>,
    pub parabolic: Vec<Generator>,
    /// Basepoint in the upper half-plane.
    pub basepoint: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PingPongReport {
    /// Smallest gap between distinct arcs (touching arcs of one parabolic
    /// generator excluded).
    pub min_gap: f64,
    /// Total length of the arcs; less than `pi` means the arcs leave
    /// boundary uncovered.
    pub covered: f64,
}

const ARC_SLACK: f64 = 1e-12;

impl GroupPresentation {
    pub fn generators(&self) -> impl Iterator<Item = &Generator> {
        self.hyperbolic.iter().chain(&self.parabolic)
    }

    pub fn generator(&self, i: usize) -> &Generator {
        if i < self.hyperbolic.len() {
            &self.hyperbolic[i]
        } else {
            &self.parabolic[i - self.hyperbolic.len()]
        }
    }

    pub fn rank(&self) -> usize {
        self.hyperbolic.len() + self.parabolic.len()
    }

    /// Checks generator kinds, the ping-pong inclusions, disjointness of the
    /// arcs and that they leave part of the boundary uncovered.
    pub fn validate(&self) -> Result<PingPongReport> {
        if self.parabolic.is_empty() {
            return Err(Error::InvalidPresentation(
                "no parabolic generator: the group is convex cocompact, use a finite coding".into(),
            ));
        }
        if !(self.basepoint.1 > 0.0) {
            return Err(Error::InvalidPresentation("basepoint must lie in the upper half-plane".into()));
        }
        for (i, g) in self.hyperbolic.iter().enumerate() {
            if g.map.kind() != MobiusKind::Hyperbolic {
                return Err(Error::InvalidPresentation(format!("hyperbolic generator {i} has trace {}", g.map.trace())));
            }
        }
        for (i, g) in self.parabolic.iter().enumerate() {
            if g.map.kind() != MobiusKind::Parabolic {
                return Err(Error::InvalidPresentation(format!("parabolic generator {i} has trace {}", g.map.trace())));
            }
        }
        for (i, g) in self.generators().enumerate() {
            let fwd = g.repelling.complement().image(&g.map);
            if !g.attracting.contains_arc(&fwd, 1e-9) {
                return Err(Error::PingPongFailure(format!(
                    "generator {i} does not map the complement of its repelling arc into its attracting arc"
                )));
            }
            let back = g.attracting.complement().image(&g.map.inverse());
            if !g.repelling.contains_arc(&back, 1e-9) {
                return Err(Error::PingPongFailure(format!(
                    "inverse of generator {i} does not map the complement of its attracting arc into its repelling arc"
                )));
            }
        }
        let arcs: Vec<(usize, CircleArc)> = self
            .generators()
            .enumerate()
            .flat_map(|(i, g)| [(i, g.repelling), (i, g.attracting)])
            .collect();
        let mut min_gap = f64::INFINITY;
        for (x, (i, a)) in arcs.iter().enumerate() {
            for (j, b) in arcs.iter().skip(x + 1) {
                if a.overlaps(b, ARC_SLACK) {
                    return Err(Error::PingPongFailure(format!("arcs of generators {i} and {j} overlap")));
                }
                let touching_ok = i == j && *i >= self.hyperbolic.len();
                let gap = ccw_offset(a.end(), b.start).min(ccw_offset(b.end(), a.start));
                if !touching_ok {
                    min_gap = min_gap.min(gap);
                }
            }
        }
        if !(min_gap > 0.0) {
            return Err(Error::PingPongFailure("arcs of different generators touch".into()));
        }
        let covered: f64 = arcs.iter().map(|(_, a)| a.length).sum();
        if !(covered < PI) {
            return Err(Error::PingPongFailure("arcs cover the boundary".into()));
        }
        Ok(PingPongReport { min_gap, covered })
    }
}

/// `h = [[2,1],[1,1]]`, `p = [[1,6],[0,1]]` with arcs `[-2,0] -> [1,3]` and
/// `(-inf,-2.5] -> [3.5,inf)` on the real line.
pub fn default_group() -> GroupPresentation {
    GroupPresentation {
        hyperbolic: vec![Generator {
            map: MobiusMap::new(2.0, 1.0, 1.0, 1.0).expect("det 1"),
            repelling: CircleArc::from_real(-2.0, 0.0),
            attracting: CircleArc::from_real(1.0, 3.0),
        }],
        parabolic: vec![Generator {
            map: MobiusMap::new(1.0, 6.0, 0.0, 1.0).expect("det 1"),
            repelling: CircleArc::from_real(f64::NEG_INFINITY, -2.5),
            attracting: CircleArc::from_real(3.5, f64::INFINITY),
        }],
        basepoint: (0.0, 1.0),
    }
}

/// A second presentation with the same parabolic generator:
/// `h' = [[3,1],[2,1]]` with arcs `[-1,0] -> [1,2]`.
pub fn companion_group() -> GroupPresentation {
    let mut g = default_group();
    g.hyperbolic[0] = Generator {
        map: MobiusMap::new(3.0, 1.0, 2.0, 1.0).expect("det 1"),
        repelling: CircleArc::from_real(-1.0, 0.0),
        attracting: CircleArc::from_real(1.0, 2.0),
    };
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(MobiusMap::new(2.0, 1.0, 1.0, 1.0).unwrap().kind(), MobiusKind::Hyperbolic);
        assert_eq!(MobiusMap::new(1.0, 6.0, 0.0, 1.0).unwrap().kind(), MobiusKind::Parabolic);
        assert_eq!(MobiusMap::new(0.0, -1.0, 1.0, 0.0).unwrap().kind(), MobiusKind::Elliptic);
        assert_eq!(MobiusMap::identity().kind(), MobiusKind::Identity);
        assert!(MobiusMap::new(2.0, 0.0, 0.0, 2.0).is_err());
        let h = MobiusMap::new(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!((h.translation_length() - 2.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-14);
        assert!((h.pow(-3).compose(&h.pow(3)).matrix() - Matrix2::identity()).amax() < 1e-12);
    }

    #[test]
    fn arcs_and_fixed_points() {
        let h = MobiusMap::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let (att, rep) = h.fixed_points().unwrap();
        assert!((real_of_angle(att) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((real_of_angle(rep) - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let a = CircleArc::from_real(1.0, 3.0);
        assert!(a.contains(angle_of_real(2.0), 0.0));
        assert!(!a.contains(angle_of_real(0.0), 0.0));
        let p = CircleArc::from_real(3.5, f64::INFINITY);
        assert!(p.contains(angle_of_real(1e9), 0.0));
        assert!(p.contains(0.0, 1e-15));
    }

    #[test]
    fn default_presentations_play_ping_pong() {
        let r = default_group().validate().unwrap();
        assert!(r.min_gap > 0.0 && r.covered < PI);
        companion_group().validate().unwrap();
        // [[1,2],[0,1]] has no room next to h: h p^-1 is elliptic.
        let mut bad = default_group();
        bad.parabolic[0].map = MobiusMap::new(1.0, 2.0, 0.0, 1.0).unwrap();
        assert!(matches!(bad.validate(), Err(Error::PingPongFailure(_))));
        let mut only_h = default_group();
        only_h.parabolic.clear();
        assert!(matches!(only_h.validate(), Err(Error::InvalidPresentation(_))));
    }
}
