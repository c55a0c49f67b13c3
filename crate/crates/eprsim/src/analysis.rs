//! Autocorrelation analysis of piecewise-constant periodic signals.
//!
//! The shifted autocorrelation of a 2pi-periodic step function is piecewise
//! linear in the shift: the overlap measure between the pattern and its
//! translate changes at a constant rate until a pair of switch points
//! crosses, and each crossing leaves a kink. A harmonic reference such as
//! -cos 2theta is curved everywhere, so the two function classes can agree
//! only on isolated points. This module makes that gap measurable:
//!
//! * exact overlap integration of the autocorrelation (no quadrature error
//!   for piecewise-constant integrands);
//! * the maximum deviation from the harmonic reference over a grid;
//! * a second-finite-difference linearity check away from the kinks;
//! * the threshold-discriminator integral of D(sin t - x) D(x) over one
//!   period, evaluated in closed form and compared against sin t.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// A 2pi-periodic piecewise-constant function.
///
/// `levels[i]` holds on `[switches[i], switches[i+1])`; the last level wraps
/// through 2pi back around to `switches[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    switches: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(switches: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if switches.is_empty() {
            return Err(Error::input("a step function needs at least one switch point".to_string()));
        }
        if switches.len() != levels.len() {
            return Err(Error::input(format!(
                "switch and level counts differ: {} vs {}",
                switches.len(),
                levels.len()
            )));
        }
        if switches.iter().any(|s| !s.is_finite() || *s < 0.0 || *s >= TAU) {
            return Err(Error::input("switch points must lie in [0, 2pi)".to_string()));
        }
        if switches.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("switch points must be strictly ascending".to_string()));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::input("levels must be finite".to_string()));
        }
        if levels.len() >= 2 {
            let wrap_ok = levels[levels.len() - 1] != levels[0];
            let adjacent_ok = levels.windows(2).all(|w| w[0] != w[1]);
            if !adjacent_ok || !wrap_ok {
                return Err(Error::input(
                    "consecutive levels (including the wrap-around) must differ".to_string(),
                ));
            }
        }
        Ok(StepFunction { switches, levels })
    }

    /// The symmetric +-1 square wave with switches at {0, pi/2, pi, 3pi/2}.
    pub fn symmetric_square() -> Self {
        StepFunction::new(vec![0.0, FRAC_PI_2, PI, 1.5 * PI], vec![1.0, -1.0, 1.0, -1.0])
            .expect("fixed literals satisfy the constructor")
    }

    pub fn switches(&self) -> &[f64] {
        &self.switches
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Value at `x`, reduced modulo 2pi. Points below the first switch fall
    /// in the wrap-around segment and take the last level.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x.rem_euclid(TAU);
        let idx = self.switches.partition_point(|s| *s <= t);
        if idx == 0 {
            *self.levels.last().expect("constructor guarantees non-empty")
        } else {
            self.levels[idx - 1]
        }
    }

    /// Shifts at which the autocorrelation can change slope: all pairwise
    /// switch differences modulo 2pi (zero lag included).
    pub fn kink_offsets(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.switches.len() * self.switches.len());
        for &si in &self.switches {
            for &sj in &self.switches {
                out.push((si - sj).rem_euclid(TAU));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// (1/2pi) integral over one period of p(x - theta) p(x) dx, computed
    /// exactly: the integrand is constant between the merged switch points of
    /// the two factors, so each piece contributes width times a midpoint
    /// product with no quadrature error.
    pub fn autocorrelation(&self, theta: f64) -> f64 {
        let mut cuts: Vec<f64> = Vec::with_capacity(2 * self.switches.len());
        for &s in &self.switches {
            cuts.push(s);
            cuts.push((s + theta).rem_euclid(TAU));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut integral = 0.0;
        let mut shared_product: Option<f64> = None;
        let mut uniform = true;
        for i in 0..cuts.len() {
            let lo = cuts[i];
            let hi = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + TAU };
            if hi <= lo {
                continue;
            }
            let mid = lo + (hi - lo) / 2.0;
            let product = self.eval(mid - theta) * self.eval(mid);
            match shared_product {
                None => shared_product = Some(product),
                Some(p) if p == product => {}
                Some(_) => uniform = false,
            }
            integral += (hi - lo) * product;
        }
        // A globally constant integrand integrates to value times period with
        // no accumulation error; this keeps zero-lag values of +-1 functions
        // exactly 1.
        if uniform {
            if let Some(p) = shared_product {
                return p;
            }
        }
        integral / TAU
    }
}

/// Autocorrelation sampled over a shift grid.
///
/// `n_quad` is the resolution the caller would accept from a sampled
/// quadrature; it is validated as a floor of 1024 but the computation itself
/// is exact overlap arithmetic, so every admissible resolution returns
/// identical values.
pub fn shifted_autocorrelation(
    p: &StepFunction,
    theta_grid: &[f64],
    n_quad: usize,
) -> Result<Vec<(f64, f64)>> {
    if theta_grid.is_empty() {
        return Err(Error::input("shift grid must not be empty".to_string()));
    }
    if theta_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("shift grid must be finite".to_string()));
    }
    if n_quad < 1024 {
        return Err(Error::input(format!("quadrature resolution {n_quad} is below the 1024 floor")));
    }
    Ok(theta_grid.iter().map(|&t| (t, p.autocorrelation(t))).collect())
}

/// Maximum absolute deviation of a sampled correlation from -cos 2theta,
/// with the grid point where it occurs.
pub fn harmonic_deviation(corr: &[(f64, f64)]) -> Result<(f64, f64)> {
    if corr.len() < 64 {
        return Err(Error::input(format!(
            "grid too sparse: {} points, need at least 64 spanning [0, pi]",
            corr.len()
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (t, v) in corr {
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::input("correlation samples must be finite".to_string()));
        }
        lo = lo.min(*t);
        hi = hi.max(*t);
    }
    if lo > 1e-9 || hi < PI - 1e-9 {
        return Err(Error::input(format!(
            "grid too sparse: shifts span [{lo}, {hi}] but must cover [0, pi]"
        )));
    }
    let mut max_abs = f64::NEG_INFINITY;
    let mut argmax = corr[0].0;
    for (t, v) in corr {
        let dev = (v - (-(2.0 * t).cos())).abs();
        if dev > max_abs {
            max_abs = dev;
            argmax = *t;
        }
    }
    Ok((max_abs, argmax))
}

/// Second-finite-difference probe of autocorrelation linearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearityReport {
    pub grid_points: usize,
    /// Grid points whose full stencil stays clear of every kink.
    pub checked_points: usize,
    /// Largest |v(t+h) - 2v(t) + v(t-h)| over the checked points; zero up to
    /// rounding when the function is piecewise linear between kinks.
    pub max_second_difference: f64,
}

/// Evaluates the autocorrelation on a uniform circular grid and measures the
/// second finite differences at every point whose three-point stencil does
/// not straddle a kink.
pub fn piecewise_linearity_report(p: &StepFunction, n_grid: usize) -> Result<LinearityReport> {
    if n_grid < 16 {
        return Err(Error::input(format!("linearity grid needs at least 16 points, got {n_grid}")));
    }
    let h = TAU / n_grid as f64;
    let values: Vec<f64> = (0..n_grid).map(|j| p.autocorrelation(j as f64 * h)).collect();
    let kinks = p.kink_offsets();
    let margin = h * (1.0 + 1e-3);
    let mut checked = 0usize;
    let mut max_d2 = 0.0f64;
    for j in 0..n_grid {
        let t = j as f64 * h;
        if kinks.iter().any(|k| circular_distance(t, *k) <= margin) {
            continue;
        }
        let prev = values[(j + n_grid - 1) % n_grid];
        let next = values[(j + 1) % n_grid];
        let d2 = (next - 2.0 * values[j] + prev).abs();
        checked += 1;
        max_d2 = max_d2.max(d2);
    }
    Ok(LinearityReport {
        grid_points: n_grid,
        checked_points: checked,
        max_second_difference: max_d2,
    })
}

fn circular_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// One period of the discriminator product integral: D(sin t - x) D(x) over
/// x in [-pi, pi], with D(x) = +1 for x >= threshold and -1 below. Each
/// factor flips at a single point, so the integrand has at most three
/// constant pieces and the integral is evaluated exactly.
pub fn harmonic_argument_rhs(threshold: f64, t: f64) -> f64 {
    let d = |x: f64| if x >= threshold { 1.0 } else { -1.0 };
    let s = t.sin();
    let mut cuts = [-PI, (s - threshold).clamp(-PI, PI), threshold.clamp(-PI, PI), PI];
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = lo + (hi - lo) / 2.0;
        total += (hi - lo) * d(s - mid) * d(mid);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicArgumentPoint {
    pub t: f64,
    pub integral: f64,
    pub target: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicArgumentReport {
    pub threshold: f64,
    pub points: Vec<HarmonicArgumentPoint>,
    pub max_deviation: f64,
    pub at_t: f64,
}

/// Evaluates the discriminator integral across `t_grid` and reports how far
/// it stays from the harmonic sin t it would need to equal. A discriminator
/// fed the harmonic argument sin t - x still produces a step-shaped
/// integrand, and the gap is positive over most of the period.
pub fn harmonic_argument_check(threshold_x: f64, t_grid: &[f64]) -> Result<HarmonicArgumentReport> {
    if t_grid.is_empty() {
        return Err(Error::input("t grid must not be empty".to_string()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || !threshold_x.is_finite() {
        return Err(Error::input("threshold and grid must be finite".to_string()));
    }
    let lo = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = t_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > -PI + 1e-9 || hi < PI - 1e-9 {
        return Err(Error::input(format!(
            "t grid spans [{lo}, {hi}] but must cover [-pi, pi]"
        )));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    let mut max_deviation = f64::NEG_INFINITY;
    let mut at_t = t_grid[0];
    for &t in t_grid {
        let integral = harmonic_argument_rhs(threshold_x, t);
        let target = t.sin();
        let deviation = (integral - target).abs();
        if deviation > max_deviation {
            max_deviation = deviation;
            at_t = t;
        }
        points.push(HarmonicArgumentPoint { t, integral, target, deviation });
    }
    Ok(HarmonicArgumentReport { threshold: threshold_x, points, max_deviation, at_t })
}
