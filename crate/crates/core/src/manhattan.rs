//! The Manhattan curve `{(a, b) : P(-a f - b g) = 0}`, its slopes, and the
//! pressure intersection of two roof functions.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::counting::{orbit_ratio_average, CountOptions};
use crate::error::{Error, Result};
use crate::potential::{livsic_test, scaled, PotentialRef};
use crate::shift::TruncatedShift;
use crate::thermo::{bowen_root, CriticalExponent, PressureFamily};

#[derive(Debug, Clone, Serialize)]
pub struct ManhattanPoint {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    /// `db/da = -mean_f / mean_g` under the equilibrium state of `-a f - b g`.
    pub slope: f64,
    /// `da/db = -mean_g / mean_f`.
    pub inverse_slope: f64,
    /// `|P(-a f - b g)|` at the accepted point.
    pub residual: f64,
    /// Why the ray has no point (the coordinates are then NaN).
    pub flag: Option<String>,
}

impl ManhattanPoint {
    pub fn is_valid(&self) -> bool {
        self.flag.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct ManhattanOptions {
    pub rays: usize,
    pub depth: usize,
    pub tol: f64,
    /// Critical exponents of `f` and `g`, used to start the bracket on each
    /// ray past `d(f)/(a+b)`.
    pub d_f: CriticalExponent,
    pub d_g: CriticalExponent,
    /// Also trace rays with one negative coefficient where `a c(f) + b c(g)`
    /// stays positive.
    pub enlarged: bool,
}

impl Default for ManhattanOptions {
    fn default() -> Self {
        ManhattanOptions {
            rays: 17,
            depth: 1,
            tol: 1e-10,
            d_f: CriticalExponent::FiniteAlphabet,
            d_g: CriticalExponent::FiniteAlphabet,
            enlarged: false,
        }
    }
}

/// Pressures of `-a f - b g` on a fixed truncation.
pub struct Manhattan {
    family: PressureFamily,
    options: ManhattanOptions,
    /// Infima of `f` and `g` on the truncation.
    inf: (f64, f64),
}

impl Manhattan {
    pub fn new(f: PotentialRef, g: PotentialRef, shift: &TruncatedShift, options: ManhattanOptions) -> Result<Self> {
        if options.rays < 2 {
            return Err(Error::InvalidArgument("need at least two rays".into()));
        }
        let family = PressureFamily::new(
            shift,
            &[f.as_ref(), g.as_ref()],
            options.depth,
            None,
            (options.tol * 1e-2).max(1e-15),
        )?;
        let inf_of = |p: &PotentialRef| {
            shift
                .letters()
                .iter()
                .map(|&a| p.eval(&[a]).lo())
                .fold(f64::INFINITY, f64::min)
        };
        let inf = (inf_of(&f), inf_of(&g));
        if !(inf.0 > 0.0 && inf.1 > 0.0) {
            return Err(Error::NotStrictlyPositive(inf.0.min(inf.1)));
        }
        Ok(Manhattan { family, options, inf })
    }

    pub fn options(&self) -> &ManhattanOptions {
        &self.options
    }

    fn start(&self, ca: f64, cb: f64) -> f64 {
        // P(-t(af+bg)) is finite past d(f)/(a+b) on the positive quadrant.
        let d = |c: &CriticalExponent| c.value().unwrap_or(0.0).max(0.0);
        if ca > 0.0 && cb > 0.0 {
            (d(&self.options.d_f).min(d(&self.options.d_g))) / (ca + cb)
        } else if cb <= 0.0 {
            d(&self.options.d_f) / ca
        } else {
            d(&self.options.d_g) / cb
        }
    }

    /// The curve point on the ray with direction `(cos theta, sin theta)`.
    pub fn point(&self, theta: f64) -> ManhattanPoint {
        let (ca, cb) = direction(theta);
        let flagged = |msg: String| ManhattanPoint {
            theta,
            a: f64::NAN,
            b: f64::NAN,
            slope: f64::NAN,
            inverse_slope: f64::NAN,
            residual: f64::NAN,
            flag: Some(msg),
        };
        if ca * self.inf.0 + cb * self.inf.1 <= 0.0 {
            return flagged("direction leaves the domain where a f + b g is positive".into());
        }
        let root = bowen_root(|t| self.family.pressure(&[-t * ca, -t * cb]), self.start(ca, cb), self.options.tol);
        let root = match root {
            Ok(r) => r,
            Err(Error::NoSignChange { .. }) => {
                return flagged(Error::NoCrossing { theta }.to_string());
            }
            Err(e) => return flagged(e.to_string()),
        };
        let (a, b) = (root.delta * ca, root.delta * cb);
        match self.family.equilibrium(&[-a, -b]) {
            Ok(Some(eq)) => ManhattanPoint {
                theta,
                a,
                b,
                slope: -self.family.mean(&eq, 0) / self.family.mean(&eq, 1),
                inverse_slope: -self.family.mean(&eq, 1) / self.family.mean(&eq, 0),
                residual: eq.pressure.abs(),
                flag: None,
            },
            Ok(None) => flagged("pressure diverges at the crossing".into()),
            Err(e) => flagged(e.to_string()),
        }
    }

    /// Ray angles: evenly spaced over `[0, pi/2]`, or over the enlarged
    /// range when enabled.
    pub fn angles(&self) -> Vec<f64> {
        let (lo, hi) = if self.options.enlarged {
            // a c(f) + b c(g) > 0 holds for theta in
            // (-atan(c(f)/c(g)), pi/2 + atan(c(g)/c(f))); keep 90% of it.
            let lo = -0.9 * (self.inf.0 / self.inf.1).atan();
            let hi = FRAC_PI_2 + 0.9 * (self.inf.1 / self.inf.0).atan();
            (lo, hi)
        } else {
            (0.0, FRAC_PI_2)
        };
        let m = self.options.rays;
        (0..m)
            .map(|i| {
                if i == m - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (m - 1) as f64
                }
            })
            .collect()
    }

    pub fn trace(&self) -> Vec<ManhattanPoint> {
        self.angles().into_par_iter().map(|t| self.point(t)).collect()
    }

    /// Centered difference `db/da` from the curve points at `theta +- h`.
    pub fn finite_difference_slope(&self, theta: f64, h: f64) -> Result<f64> {
        let p = self.point(theta + h);
        let q = self.point(theta - h);
        if let Some(msg) = p.flag.or(q.flag) {
            return Err(Error::InvalidArgument(msg));
        }
        Ok((p.b - q.b) / (p.a - q.a))
    }
}

fn direction(theta: f64) -> (f64, f64) {
    // Exact axes, so the endpoint rays reduce to single potentials.
    if theta == 0.0 {
        (1.0, 0.0)
    } else if theta == FRAC_PI_2 {
        (0.0, 1.0)
    } else {
        (theta.cos(), theta.sin())
    }
}

/// Traces the curve along `options.rays` directions.
pub fn trace_curve(
    f: PotentialRef,
    g: PotentialRef,
    shift: &TruncatedShift,
    options: ManhattanOptions,
) -> Result<Vec<ManhattanPoint>> {
    Ok(Manhattan::new(f, g, shift, options)?.trace())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvexityReport {
    /// Smallest `chord - b` at the middle of consecutive triples; negative
    /// beyond the slack means a violation.
    pub min_margin: f64,
    pub max_margin: f64,
    pub convex: bool,
    pub triples: usize,
}

/// Chord test on consecutive valid points ordered by `a`.
pub fn convexity_check(points: &[ManhattanPoint], slack: f64) -> ConvexityReport {
    let mut pts: Vec<(f64, f64)> = points.iter().filter(|p| p.is_valid()).map(|p| (p.a, p.b)).collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut min_margin = f64::INFINITY;
    let mut max_margin = f64::NEG_INFINITY;
    let mut triples = 0;
    for w in pts.windows(3) {
        let ((x0, y0), (x1, y1), (x2, y2)) = (w[0], w[1], w[2]);
        if x2 - x0 <= 0.0 {
            continue;
        }
        let chord = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0);
        let m = chord - y1;
        min_margin = min_margin.min(m);
        max_margin = max_margin.max(m);
        triples += 1;
    }
    ConvexityReport {
        min_margin,
        max_margin,
        convex: triples == 0 || min_margin >= -slack,
        triples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rigidity {
    Rigid,
    NonRigid { margin: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct IntersectionReport {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub delta_f: f64,
    pub delta_g: f64,
    pub rigidity: Rigidity,
    /// Whether `delta_f f` and `delta_g g` have equal periodic sums up to
    /// the checked period.
    pub proportional_periods: bool,
}

/// Longest period compared when deciding rigidity.
pub const RIGIDITY_PERIOD: usize = 6;

/// `I = mean_g / mean_f` under the equilibrium state of `-delta(f) f` and
/// `J = (delta(g) / delta(f)) I`.
pub fn intersection(
    f: PotentialRef,
    g: PotentialRef,
    shift: &TruncatedShift,
    options: &ManhattanOptions,
) -> Result<IntersectionReport> {
    let m = Manhattan::new(f.clone(), g.clone(), shift, options.clone())?;
    let tol = options.tol;
    let axis = |i: usize| {
        let start = if i == 0 { m.start(1.0, 0.0) } else { m.start(0.0, 1.0) };
        bowen_root(
            |t| {
                let c = if i == 0 { [-t, 0.0] } else { [0.0, -t] };
                m.family.pressure(&c)
            },
            start,
            tol,
        )
    };
    let delta_f = axis(0)?.delta;
    let delta_g = axis(1)?.delta;
    let eq = m
        .family
        .equilibrium(&[-delta_f, 0.0])?
        .ok_or_else(|| Error::InvalidArgument("pressure diverges at delta(f)".into()))?;
    let i = m.family.mean(&eq, 1) / m.family.mean(&eq, 0);
    let j = delta_g / delta_f * i;
    let lc = f
        .locally_constant_depth()
        .unwrap_or(options.depth)
        .max(g.locally_constant_depth().unwrap_or(options.depth))
        .max(1);
    let livsic = livsic_test(
        scaled(delta_f, f).as_ref(),
        scaled(delta_g, g).as_ref(),
        shift,
        RIGIDITY_PERIOD,
        (tol * 1e2).max(1e-8),
        lc,
    )?;
    let proportional_periods = livsic.cohomologous_up_to_tol;
    let rigidity = if (j - 1.0).abs() <= (tol * 1e2).max(1e-6) && proportional_periods {
        Rigidity::Rigid
    } else {
        Rigidity::NonRigid { margin: j - 1.0 }
    };
    Ok(IntersectionReport {
        i,
        j,
        delta_f,
        delta_g,
        rigidity,
        proportional_periods,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometricIntersection {
    /// Average of `S_n g / S_n f` over prime orbits with `S_n f <= t`.
    pub empirical: f64,
    pub thermodynamic: f64,
}

/// Compares the orbit average of length ratios with `I`.
pub fn geometric_intersection_check(
    f: PotentialRef,
    g: PotentialRef,
    shift: &TruncatedShift,
    t: f64,
    options: &ManhattanOptions,
    count: &CountOptions,
) -> Result<GeometricIntersection> {
    let empirical = orbit_ratio_average(f.as_ref(), g.as_ref(), shift, t, count)?
        .ok_or_else(|| Error::InvalidArgument(format!("no closed orbits with period at most {t}")))?;
    let thermodynamic = intersection(f, g, shift, options)?.i;
    Ok(GeometricIntersection {
        empirical,
        thermodynamic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::LocallyConstant;
    use crate::shift::{Letter, ShiftSpec, TruncationRule};
    use std::sync::Arc;

    fn full2() -> TruncatedShift {
        ShiftSpec::full(2).truncate(&TruncationRule::FirstK(2)).unwrap()
    }

    fn pair(x: f64, y: f64) -> PotentialRef {
        Arc::new(LocallyConstant::per_letter([(Letter(0), x), (Letter(1), y)]))
    }

    #[test]
    fn proportional_pair_is_a_line() {
        let f = pair(1.0, 2f64.sqrt());
        let g = pair(2.0, 2.0 * 2f64.sqrt());
        let pts = trace_curve(f.clone(), g.clone(), &full2(), ManhattanOptions::default()).unwrap();
        let delta = pts[0].a;
        for p in &pts {
            assert!((p.slope + 0.5).abs() < 1e-8, "{p:?}");
            assert!((p.a + 2.0 * p.b - delta).abs() < 1e-8);
        }
        let r = intersection(f, g, &full2(), &ManhattanOptions::default()).unwrap();
        assert!((r.i - 2.0).abs() < 1e-9 && (r.j - 1.0).abs() < 1e-9);
        assert_eq!(r.rigidity, Rigidity::Rigid);
    }

    #[test]
    fn symmetric_pair_matches_closed_form() {
        let f = pair(1.0, 2f64.sqrt());
        let g = pair(2f64.sqrt(), 1.0);
        let m = Manhattan::new(f.clone(), g.clone(), &full2(), ManhattanOptions::default()).unwrap();
        let mid = m.point(std::f64::consts::FRAC_PI_4);
        assert!((mid.slope + 1.0).abs() < 1e-9);
        // log(e^{-a - sqrt2 b} + e^{-sqrt2 a - b}) = 0 on the diagonal.
        let s = 2f64.sqrt();
        let closed = ((-(mid.a + s * mid.b)).exp() + (-(s * mid.a + mid.b)).exp()).ln();
        assert!(closed.abs() < 1e-10);
        let r = intersection(f, g, &full2(), &ManhattanOptions::default()).unwrap();
        assert!(r.j > 1.0 + 1e-3);
        assert!(matches!(r.rigidity, Rigidity::NonRigid { .. }));
    }
}
