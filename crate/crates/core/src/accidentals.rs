//! Multi-pair accidental-coincidence analytics: coincidence rates, visibility,
//! mean pair number and the single-count saturation model.
//!
//! Rates are per-pulse probabilities throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::brent_bounded;
use crate::tomography::CoincidenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorContext {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub dark_a: f64,
    pub dark_b: f64,
    /// Pulse repetition frequency f in Hz.
    pub rep_rate: f64,
    /// Detector dead time t_d in seconds.
    pub dead_time: f64,
}

impl Default for DetectorContext {
    /// Efficiencies 0.60 / 0.27, dark probability 2e−9 per pulse, 500 MHz, 80 ns.
    fn default() -> Self {
        Self {
            alpha_a: 0.60,
            alpha_b: 0.27,
            dark_a: 2e-9,
            dark_b: 2e-9,
            rep_rate: 5e8,
            dead_time: 8e-8,
        }
    }
}

impl DetectorContext {
    pub fn from_record(rec: &CoincidenceRecord) -> Self {
        Self {
            alpha_a: rec.alpha_a,
            alpha_b: rec.alpha_b,
            dark_a: rec.dark_a,
            dark_b: rec.dark_b,
            rep_rate: rec.rep_rate,
            dead_time: rec.dead_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha_a", self.alpha_a), ("alpha_b", self.alpha_b)] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Validation(format!("{name} = {a} must lie in (0, 1]")));
            }
        }
        for (name, d) in [("dark_a", self.dark_a), ("dark_b", self.dark_b)] {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Validation(format!("{name} = {d} must be non-negative")));
            }
        }
        if !(self.rep_rate > 0.0) || !self.rep_rate.is_finite() {
            return Err(Error::Validation(format!("rep_rate = {} must be positive", self.rep_rate)));
        }
        if !(self.dead_time >= 0.0) || !self.dead_time.is_finite() {
            return Err(Error::Validation(format!("dead_time = {} must be non-negative", self.dead_time)));
        }
        Ok(())
    }
}

/// (R_max, R_min) with R_min = (μα_A/4 + d_A)(μα_B/4 + d_B) and R_max = μα_Aα_B/8 + R_min.
pub fn coincidence_rates(mu: f64, ctx: &DetectorContext) -> (f64, f64) {
    let r_min = (mu * ctx.alpha_a / 4.0 + ctx.dark_a) * (mu * ctx.alpha_b / 4.0 + ctx.dark_b);
    let r_max = mu * ctx.alpha_a * ctx.alpha_b / 8.0 + r_min;
    (r_max, r_min)
}

pub fn visibility(r_max: f64, r_min: f64) -> Result<f64> {
    let den = r_max + r_min;
    if !(den > 0.0) {
        return Err(Error::Validation(format!(
            "visibility undefined for rates ({r_max}, {r_min})"
        )));
    }
    Ok((r_max - r_min) / den)
}

fn model_visibility(mu: f64, ctx: &DetectorContext) -> f64 {
    let (hi, lo) = coincidence_rates(mu, ctx);
    (hi - lo) / (hi + lo)
}

/// V' from the mean of n(11), n(22) against the mean of n(12), n(21).
pub fn visibility_from_counts(rec: &CoincidenceRecord) -> Result<f64> {
    let c = &rec.counts;
    let n_max = 0.5 * (c[0] + c[5]) as f64;
    let n_min = 0.5 * (c[1] + c[4]) as f64;
    if n_max + n_min == 0.0 {
        return Err(Error::EmptyData("all four time-bin counts are zero".into()));
    }
    Ok((n_max - n_min) / (n_max + n_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub mu: f64,
    /// The default bracket [1e−6, 10] had to be widened to find a sign change.
    pub bracket_widened: bool,
}

/// μ such that V(μ) = V', by bisection to 1e−9 in μ.
pub fn estimate_mu(v_prime: f64, ctx: &DetectorContext) -> Result<f64> {
    estimate_mu_report(v_prime, ctx).map(|e| e.mu)
}

pub fn estimate_mu_report(v_prime: f64, ctx: &DetectorContext) -> Result<MuEstimate> {
    ctx.validate()?;
    if !(v_prime > 0.0 && v_prime < 1.0) {
        return Err(Error::Domain {
            name: "v_prime",
            value: v_prime,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let g = |mu: f64| model_visibility(mu, ctx) - v_prime;
    let brackets = [(1e-6, 10.0), (1e-9, 100.0), (1e-12, 1e4)];
    for (k, &(mut lo, mut hi)) in brackets.iter().enumerate() {
        let (mut glo, ghi) = (g(lo), g(hi));
        if glo.signum() == ghi.signum() {
            continue;
        }
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        return Ok(MuEstimate {
            mu: 0.5 * (lo + hi),
            bracket_widened: k > 0,
        });
    }
    Err(Error::Estimation(format!(
        "visibility {v_prime} is not reachable by the detector model for any mean pair number"
    )))
}

/// η_exp = 1 − V'
pub fn eta_from_visibility(v_prime: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_prime) {
        return Err(Error::Domain {
            name: "v_prime",
            value: v_prime,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(1.0 - v_prime)
}

/// μξf·exp(−μξf·t_d/2) in counts per second.
pub fn single_count_rate(mu: f64, xi: f64, ctx: &DetectorContext) -> f64 {
    let r = mu * xi * ctx.rep_rate;
    r * (-r * ctx.dead_time / 2.0).exp()
}

/// Least-squares ξ for measured (μ, single-count rate) pairs, searched on (0, 1].
pub fn fit_xi(points: &[(f64, f64)], ctx: &DetectorContext) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyData("no single-count points to fit".into()));
    }
    if points.iter().any(|&(m, r)| !(m > 0.0) || !(r > 0.0)) {
        return Err(Error::Validation("single-count points need positive μ and rate".into()));
    }
    let sse = |xi: f64| -> f64 {
        points
            .iter()
            .map(|&(mu, rate)| (single_count_rate(mu, xi, ctx) - rate).powi(2))
            .sum()
    };
    // coarse logarithmic scan, then Brent inside the neighbouring grid cells
    let grid: Vec<f64> = (0..=120).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / 120.0)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| sse(grid[a]).total_cmp(&sse(grid[b])))
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (xi, _, _) = brent_bounded(|x| Ok(sse(x)), lo, hi, 1e-12 * hi, 500)?;
    Ok(xi)
}

/// Accidental-coincidence summary attached to reports derived from counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccidentalsReport {
    pub v_prime: f64,
    pub mu: Option<f64>,
    pub eta_exp: f64,
    pub xi_fit: Option<f64>,
}

/// V', η_exp, and μ when the visibility is inside the model's range.
pub fn accidentals_report(rec: &CoincidenceRecord, single_counts: Option<&[(f64, f64)]>) -> Result<AccidentalsReport> {
    let ctx = DetectorContext::from_record(rec);
    ctx.validate()?;
    let v_prime = visibility_from_counts(rec)?;
    let eta_exp = eta_from_visibility(v_prime.clamp(0.0, 1.0))?;
    let mu = estimate_mu(v_prime, &ctx).ok();
    let xi_fit = match single_counts {
        Some(points) => Some(fit_xi(points, &ctx)?),
        None => None,
    };
    Ok(AccidentalsReport {
        v_prime,
        mu,
        eta_exp,
        xi_fit,
    })
}
