use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailShape {
    /// `S_k ~ c log k + b` (zeta-type).
    LogLetter,
    /// `S_k ~ c log k + beta log log k + b`.
    LogLogCorrected,
    /// `S_k ~ c k + b`.
    ExpLetter,
}

/// Model of the sorted letter upper bounds `S_k` (rank `k >= 1`) used to
/// estimate the remainder of `Z_1(f, s) = sum_k e^{-s S_k}` beyond a
/// truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub shape: TailShape,
    pub slope: f64,
    pub loglog: f64,
    pub offset: f64,
    /// Largest absolute fit residual over the fitted ranks.
    pub residual: f64,
    pub fitted_ranks: (usize, usize),
}

impl TailModel {
    pub fn log_letter(slope: f64, offset: f64) -> Self {
        TailModel {
            shape: TailShape::LogLetter,
            slope,
            loglog: 0.0,
            offset,
            residual: 0.0,
            fitted_ranks: (0, 0),
        }
    }

    pub fn predict(&self, k: f64) -> f64 {
        match self.shape {
            TailShape::LogLetter => self.slope * k.ln() + self.offset,
            TailShape::LogLogCorrected => self.slope * k.ln() + self.loglog * k.ln().ln() + self.offset,
            TailShape::ExpLetter => self.slope * k + self.offset,
        }
    }

    /// Whether `sum_k e^{-s S_k}` converges under the model.
    pub fn converges(&self, s: f64) -> bool {
        if s <= 0.0 {
            return false;
        }
        match self.shape {
            TailShape::LogLetter => s * self.slope > 1.0,
            TailShape::LogLogCorrected => {
                let e = s * self.slope;
                e > 1.0 || (e == 1.0 && s * self.loglog > 1.0)
            }
            TailShape::ExpLetter => self.slope > 0.0,
        }
    }

    /// Critical exponent of the model series.
    pub fn critical_exponent(&self) -> f64 {
        match self.shape {
            TailShape::LogLetter | TailShape::LogLogCorrected => 1.0 / self.slope,
            TailShape::ExpLetter => 0.0,
        }
    }

    /// Whether the model series diverges at its critical exponent.
    pub fn diverges_at_critical(&self) -> bool {
        match self.shape {
            TailShape::LogLetter | TailShape::ExpLetter => true,
            TailShape::LogLogCorrected => self.loglog / self.slope <= 1.0,
        }
    }

    /// `log sum_{k > kept} e^{-s S_k}`, or `None` when the remainder
    /// diverges.
    pub fn log_remainder(&self, s: f64, kept: usize) -> Option<f64> {
        if !self.converges(s) {
            return None;
        }
        let x0 = kept as f64 + 0.5;
        match self.shape {
            TailShape::LogLetter => {
                let e = s * self.slope - 1.0;
                Some(-s * self.offset + (-e) * x0.ln() - e.ln())
            }
            TailShape::ExpLetter => {
                let a = s * self.slope;
                Some(-s * self.offset - a * (kept as f64 + 1.0) - (-(-a).exp_m1()).ln())
            }
            TailShape::LogLogCorrected => {
                // integral over u = log x of e^{(1 - s c) u} u^{-s beta}
                let e = s * self.slope - 1.0;
                let u0 = x0.ln();
                if e <= 0.0 {
                    return None;
                }
                let sb = s * self.loglog;
                // substitute v = e (u - u0): e^{-e u0}/e * int_0^inf e^{-v} (u0 + v/e)^{-sb} dv
                let steps = 4000;
                let vmax = 60.0;
                let h = vmax / steps as f64;
                let f = |v: f64| (-v).exp() * (u0 + v / e).powf(-sb);
                let mut acc = f(0.0) + f(vmax);
                for i in 1..steps {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * f(i as f64 * h);
                }
                let integral = acc * h / 3.0;
                Some(-s * self.offset - e * u0 - e.ln() + integral.ln())
            }
        }
    }
}

fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let p = rows[0].len();
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            aty[i] += r[i] * yi;
            for j in 0..p {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the normal equations.
    for c in 0..p {
        let piv = (c..p).max_by(|&a, &b| ata[a][c].abs().total_cmp(&ata[b][c].abs()))?;
        if ata[piv][c].abs() < 1e-300 {
            return None;
        }
        ata.swap(c, piv);
        aty.swap(c, piv);
        for r in c + 1..p {
            let m = ata[r][c] / ata[c][c];
            for k in c..p {
                ata[r][k] -= m * ata[c][k];
            }
            aty[r] -= m * aty[c];
        }
    }
    let mut x = vec![0.0; p];
    for c in (0..p).rev() {
        let mut s = aty[c];
        for k in c + 1..p {
            s -= ata[c][k] * x[k];
        }
        x[c] = s / ata[c][c];
    }
    Some(x)
}

fn sample_ranks(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize)
        .map(|k| k.clamp(lo, hi))
        .collect();
    v.dedup();
    v
}

fn fit_shape(shape: TailShape, sorted: &[f64], lo: usize, hi: usize) -> Option<TailModel> {
    let ranks = sample_ranks(lo.max(3), hi, 256);
    if ranks.len() < 4 {
        return None;
    }
    let rows: Vec<Vec<f64>> = ranks
        .iter()
        .map(|&k| {
            let x = k as f64;
            match shape {
                TailShape::LogLetter => vec![x.ln(), 1.0],
                TailShape::LogLogCorrected => vec![x.ln(), x.ln().ln(), 1.0],
                TailShape::ExpLetter => vec![x, 1.0],
            }
        })
        .collect();
    let y: Vec<f64> = ranks.iter().map(|&k| sorted[k - 1]).collect();
    let c = least_squares(&rows, &y)?;
    let mut model = TailModel {
        shape,
        slope: c[0],
        loglog: if shape == TailShape::LogLogCorrected { c[1] } else { 0.0 },
        offset: *c.last().expect("non-empty"),
        residual: 0.0,
        fitted_ranks: (lo, hi),
    };
    model.residual = ranks
        .iter()
        .map(|&k| (model.predict(k as f64) - sorted[k - 1]).abs())
        .fold(0.0, f64::max);
    Some(model)
}

/// Fits a tail model to sorted letter upper bounds (`sorted[k-1]` is the
/// `k`-th smallest). The fit uses the upper half of the ranks and is
/// rejected when the slope is non-positive or moves by more than 5%
/// between the upper half and the upper quarter.
pub fn fit_tail_model(sorted: &[f64], shape: Option<TailShape>) -> Result<TailModel> {
    let k = sorted.len();
    if k < 32 {
        return Err(Error::TailModelUnavailable(format!("only {k} letters available for the fit")));
    }
    let fit = |s: TailShape| fit_shape(s, sorted, k / 2, k);
    let model = match shape {
        Some(s) => fit(s),
        None => {
            let log = fit(TailShape::LogLetter);
            let exp = fit(TailShape::ExpLetter);
            let loglog = fit(TailShape::LogLogCorrected);
            let res = |m: &Option<TailModel>| m.map_or(f64::INFINITY, |m| m.residual);
            let mut pick = log;
            if res(&exp) < 0.1 * res(&pick) {
                pick = exp;
            }
            // A log log k term much smaller than the slope only absorbs
            // lower-order drift, so it has to earn its place.
            if let Some(m) = loglog {
                if m.residual < 0.1 * res(&pick) && m.loglog.abs() >= 0.1 * m.slope.abs() {
                    pick = loglog;
                }
            }
            pick
        }
    }
    .ok_or_else(|| Error::TailModelUnavailable("singular least-squares fit".into()))?;
    if !(model.slope > 0.0) {
        return Err(Error::TailModelUnavailable(format!("fitted slope {} is not positive", model.slope)));
    }
    let check = fit_shape(model.shape, sorted, 3 * k / 4, k)
        .ok_or_else(|| Error::TailModelUnavailable("singular least-squares fit".into()))?;
    if (check.slope - model.slope).abs() > 0.05 * model.slope.abs() {
        return Err(Error::TailModelUnavailable(format!(
            "slope unstable between fit windows ({} vs {})",
            model.slope, check.slope
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_remainder_matches_partial_sums() {
        // sum_{k > 1000} k^{-2}
        let m = TailModel::log_letter(2.0, 0.0);
        let direct: f64 = (1001..2_000_000).map(|k| (k as f64).powi(-2)).sum::<f64>() + 1.0 / 2_000_000.0;
        let approx = m.log_remainder(1.0, 1000).unwrap().exp();
        assert!((approx - direct).abs() / direct < 1e-6);
        assert!(m.log_remainder(0.5, 1000).is_none());
    }

    #[test]
    fn fit_recovers_log_slope() {
        let s: Vec<f64> = (1..=20_000).map(|k| 2.0 * ((k + 1) as f64).ln()).collect();
        let m = fit_tail_model(&s, None).unwrap();
        assert_eq!(m.shape, TailShape::LogLetter);
        assert!((m.slope - 2.0).abs() < 1e-3);
    }

    #[test]
    fn loglog_divergence_rule() {
        let mut m = TailModel::log_letter(2.0, 0.0);
        m.shape = TailShape::LogLogCorrected;
        m.loglog = 4.0;
        assert!(!m.diverges_at_critical());
        m.loglog = 1.0;
        assert!(m.diverges_at_critical());
    }
}
