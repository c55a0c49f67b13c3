//! Correlation estimators and the inequality bounds built on them.
//!
//! Three estimators cover the ways a correlation gets measured here:
//!
//! * the eventwise product mean of two ±1 outcome sequences;
//! * the normalized moment ratio (<AB> - <A><B>) / sqrt(<A^2><B^2>) for
//!   real-valued samples such as intensities or spin projections;
//! * the four-channel count combination (n++ + n-- - n+- - n-+) / total.
//!
//! On top of them sit the bound evaluators. For four setting pairs the
//! familiar combination |P(a,b) - P(a,b')| + |P(a',b') + P(a',b)| is capped
//! at 2 for factorizable models and reaches 2*sqrt(2) on the full-visibility
//! curve. When the four ±1 sequences of a run are shared, the rearrangement
//! |m(ab) + m(ab')| + |m(a'b) - m(a'b')| is an arithmetic identity bounded by
//! 2 for *any* data; when the four products come from four independent runs
//! (eight distinct sequences) the only a-priori cap is 4. For samples whose
//! means do not vanish, the two-setting-pair bound shifts to
//! 2 + 2<A><B> / sqrt(<A^2><B^2>).

use crate::detection::CoincidenceCounts;
use crate::error::{Error, Result};
use crate::model::Model;

/// Which analyzer setting an outcome sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingLabel {
    A,
    APrime,
    B,
    BPrime,
}

/// A pair of analyzer orientations, one per arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingPair {
    pub a: f64,
    pub b: f64,
}

impl SettingPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::input(format!("analyzer settings must be finite, got ({a}, {b})")));
        }
        Ok(SettingPair { a, b })
    }

    /// The angle the correlation actually depends on.
    pub fn relative(&self) -> f64 {
        self.b - self.a
    }
}

/// A run of ±1 outcomes recorded at one analyzer setting.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicSequence {
    label: SettingLabel,
    values: Vec<i8>,
}

impl DichotomicSequence {
    pub fn new(label: SettingLabel, values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("outcome sequence must not be empty".to_string()));
        }
        if let Some(bad) = values.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::input(format!("outcome values must be +1 or -1, got {bad}")));
        }
        Ok(DichotomicSequence { label, values })
    }

    pub fn label(&self) -> SettingLabel {
        self.label
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A correlation estimate with its sample size and sampling uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub n: u64,
    pub std_err: f64,
}

impl CorrelationEstimate {
    pub fn new(value: f64, n: u64, std_err: f64) -> Result<Self> {
        if !value.is_finite() || value.abs() > 1.0 + 1e-12 {
            return Err(Error::degenerate(format!(
                "correlation estimate {value} falls outside [-1, 1]"
            )));
        }
        if !std_err.is_finite() || std_err < 0.0 {
            return Err(Error::degenerate(format!("standard error {std_err} is not valid")));
        }
        Ok(CorrelationEstimate { value, n, std_err })
    }
}

fn exact_product_sum(x: &[i8], y: &[i8]) -> i64 {
    x.iter().zip(y).map(|(a, b)| i64::from(*a) * i64::from(*b)).sum()
}

/// Mean of the per-event products of two ±1 sequences, with the sample
/// standard error of that mean.
pub fn eventwise_correlation(
    x: &DichotomicSequence,
    y: &DichotomicSequence,
) -> Result<CorrelationEstimate> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "sequences must have equal length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let mean = exact_product_sum(x.values(), y.values()) as f64 / n as f64;
    // Products are ±1, so the sample variance collapses to n(1 - m^2)/(n - 1).
    let std_err = if n > 1 {
        ((1.0 - mean * mean).max(0.0) / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    CorrelationEstimate::new(mean, n as u64, std_err)
}

struct SampleMoments {
    m_a: f64,
    m_b: f64,
    m_aa: f64,
    m_bb: f64,
    m_ab: f64,
    sd_ab: f64,
    n: u64,
}

fn joint_moments(a: &[f64], b: &[f64]) -> Result<SampleMoments> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "sample slices must have equal length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::input("need at least two samples".to_string()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::input("samples must be finite".to_string()));
    }
    let n = a.len() as f64;
    let (mut m_a, mut m_b, mut m_aa, mut m_bb, mut m_ab, mut m_abab) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        m_a += x;
        m_b += y;
        m_aa += x * x;
        m_bb += y * y;
        m_ab += x * y;
        m_abab += (x * y) * (x * y);
    }
    m_a /= n;
    m_b /= n;
    m_aa /= n;
    m_bb /= n;
    m_ab /= n;
    m_abab /= n;
    let var_ab = (m_abab - m_ab * m_ab).max(0.0);
    Ok(SampleMoments { m_a, m_b, m_aa, m_bb, m_ab, sd_ab: var_ab.sqrt(), n: a.len() as u64 })
}

/// Normalized moment ratio (<AB> - <A><B>) / sqrt(<A^2><B^2>) for paired real
/// samples. Note the denominator uses raw second moments, not variances.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(normalized_correlation_estimate(a, b)?.value)
}

/// Same ratio plus a leading-order standard error: the spread of the per-event
/// products divided by the normalizing moments, which are treated as fixed.
pub fn normalized_correlation_estimate(a: &[f64], b: &[f64]) -> Result<CorrelationEstimate> {
    let m = joint_moments(a, b)?;
    let denom = (m.m_aa * m.m_bb).sqrt();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::degenerate(
            "second moments vanish; the normalized correlation is undefined".to_string(),
        ));
    }
    let value = (m.m_ab - m.m_a * m.m_b) / denom;
    let std_err = m.sd_ab / (m.n as f64).sqrt() / denom;
    CorrelationEstimate::new(value, m.n, std_err)
}

/// Count-based correlation (n++ + n-- - n+- - n-+) / total for one run of
/// coincidence tallies, with the multinomial standard error of a ±1 mean.
pub fn four_channel_correlation(counts: &CoincidenceCounts) -> Result<CorrelationEstimate> {
    let total = counts.total_pairs();
    if total == 0 {
        return Err(Error::degenerate(
            "no coincidences recorded; the correlation is undefined".to_string(),
        ));
    }
    let same = counts.n_pp + counts.n_mm;
    let cross = counts.n_pm + counts.n_mp;
    let value = (same as f64 - cross as f64) / total as f64;
    let std_err = ((1.0 - value * value).max(0.0) / total as f64).sqrt();
    CorrelationEstimate::new(value, total, std_err)
}

fn check_correlation_input(p: f64) -> Result<()> {
    if !p.is_finite() || p.abs() > 1.0 + 1e-9 {
        return Err(Error::input(format!("correlation {p} falls outside [-1, 1]")));
    }
    Ok(())
}

/// |P(a,b) - P(a,b')| + |P(a',b') + P(a',b)| for four correlations.
pub fn chsh(p_ab: f64, p_abp: f64, p_apbp: f64, p_apb: f64) -> Result<f64> {
    for p in [p_ab, p_abp, p_apbp, p_apb] {
        check_correlation_input(p)?;
    }
    Ok((p_ab - p_abp).abs() + (p_apbp + p_apb).abs())
}

/// The two-correlation difference |P(a,b) - P(a,b')| with its unconditional
/// cap of 2: any pair of quantities in [-1, 1] satisfies it, so it carries no
/// constraint beyond the range of a correlation.
pub fn trivial_bound(p_ab: f64, p_abp: f64) -> Result<BoundCheck> {
    check_correlation_input(p_ab)?;
    check_correlation_input(p_abp)?;
    let lhs = (p_ab - p_abp).abs();
    Ok(BoundCheck { lhs, bound: 2.0, holds: lhs <= 2.0 + 1e-12 })
}

/// Setting-pair bound adjusted for samples with non-vanishing means:
/// 2 + 2<A><B> / sqrt(<A^2><B^2>). Mean-centered samples recover the usual 2;
/// samples pinned at a constant push it to 4 (or to 0 for opposite signs).
pub fn amended_bound(a: &[f64], b: &[f64]) -> Result<f64> {
    let ma = marginal_moments(a)?;
    let mb = marginal_moments(b)?;
    let denom = (ma.1 * mb.1).sqrt();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::degenerate(
            "second moments vanish; the amended bound is undefined".to_string(),
        ));
    }
    Ok(2.0 + 2.0 * ma.0 * mb.0 / denom)
}

fn marginal_moments(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::input("samples must not be empty".to_string()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("samples must be finite".to_string()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let second = samples.iter().map(|v| v * v).sum::<f64>() / n;
    Ok((mean, second))
}

/// Result of checking one of the arithmetic bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Shared-sequence rearrangement check: for four equal-length ±1 sequences
/// the combination |m(ab) + m(ab')| + |m(a'b) - m(a'b')| can never exceed 2,
/// because per event |b + b'| + |b - b'| = 2. Evaluated in exact integer
/// arithmetic; the float tolerance on `holds` is cosmetic only.
pub fn sica_check(
    a: &DichotomicSequence,
    a_prime: &DichotomicSequence,
    b: &DichotomicSequence,
    b_prime: &DichotomicSequence,
) -> Result<BoundCheck> {
    let n = a.len();
    if [a_prime.len(), b.len(), b_prime.len()].iter().any(|l| *l != n) {
        return Err(Error::input("all four sequences must have equal length".to_string()));
    }
    let s_ab = exact_product_sum(a.values(), b.values());
    let s_abp = exact_product_sum(a.values(), b_prime.values());
    let s_apb = exact_product_sum(a_prime.values(), b.values());
    let s_apbp = exact_product_sum(a_prime.values(), b_prime.values());
    let lhs_int = (s_ab + s_abp).abs() + (s_apb - s_apbp).abs();
    let holds = lhs_int <= 2 * n as i64;
    Ok(BoundCheck { lhs: lhs_int as f64 / n as f64, bound: 2.0, holds })
}

/// Four-run variant: each product mean comes from its own independently
/// recorded pair of sequences (eight sequences in all), so the shared-event
/// cancellation is unavailable and the only a-priori cap is 4.
pub fn eight_sequence_check(
    run_ab: (&DichotomicSequence, &DichotomicSequence),
    run_abp: (&DichotomicSequence, &DichotomicSequence),
    run_apb: (&DichotomicSequence, &DichotomicSequence),
    run_apbp: (&DichotomicSequence, &DichotomicSequence),
) -> Result<BoundCheck> {
    let mean = |run: (&DichotomicSequence, &DichotomicSequence)| -> Result<f64> {
        Ok(eventwise_correlation(run.0, run.1)?.value)
    };
    let m_ab = mean(run_ab)?;
    let m_abp = mean(run_abp)?;
    let m_apb = mean(run_apb)?;
    let m_apbp = mean(run_apbp)?;
    let lhs = (m_ab + m_abp).abs() + (m_apb - m_apbp).abs();
    Ok(BoundCheck { lhs, bound: 4.0, holds: lhs <= 4.0 + 1e-12 })
}

/// Which bound a model's statistics are expected to respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundForm {
    /// Factorizable per-event probabilities with vanishing outcome means:
    /// the standard four-correlation combination capped at 2.
    Chsh,
    /// Intensity-style observables whose means do not vanish: the cap moves
    /// to 2 + 2<A><B> / sqrt(<A^2><B^2>).
    Amended,
    /// Hidden state fixes both outcomes deterministically, leaving only the
    /// unconditional two-correlation cap of 2.
    Trivial,
}

/// Classifies which bound form applies to each emission model.
///
/// Locked-mode runs measure both output intensities of every analyzer, and
/// those double-measurement observables have unit means, so the amended cap
/// applies (and evaluates to 4 for them). The spin-pair model's hidden axis
/// determines both projections outright, leaving only the trivial cap. The
/// independent-signal model factorizes event by event with zero-mean
/// outcomes, the standard situation; the full-visibility reference curve is
/// scored against the same standard form, which it exceeds at the optimal
/// settings.
pub fn applicable_bound(model: Model) -> BoundForm {
    match model {
        Model::LockedMode => BoundForm::Amended,
        Model::Barut => BoundForm::Trivial,
        Model::Furry | Model::QmOracle => BoundForm::Chsh,
    }
}

/// One row of an exportable result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub theta: f64,
    pub model: String,
    pub estimator: String,
    pub value: f64,
    pub std_err: f64,
    pub n: u64,
}

pub const RESULT_CSV_HEADER: &str = "theta,model,estimator,value,std_err,n";

/// Renders result rows as CSV. Floats use the shortest round-trip form, so
/// equal inputs always serialize to identical bytes.
pub fn result_table_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.theta, r.model, r.estimator, r.value, r.std_err, r.n
        ));
    }
    out
}

/// Parses a result table written by [`result_table_csv`].
pub fn parse_result_table_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == RESULT_CSV_HEADER => {}
        other => {
            return Err(Error::input(format!(
                "result table must start with {RESULT_CSV_HEADER:?}, got {other:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::input(format!(
                "result row {} has {} fields, expected 6",
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::input(format!("bad {what} value {s:?} in row {}", idx + 2)))
        };
        rows.push(ResultRow {
            theta: parse_f(fields[0], "theta")?,
            model: fields[1].to_string(),
            estimator: fields[2].to_string(),
            value: parse_f(fields[3], "value")?,
            std_err: parse_f(fields[4], "std_err")?,
            n: fields[5]
                .parse::<u64>()
                .map_err(|_| Error::input(format!("bad n value {:?} in row {}", fields[5], idx + 2)))?,
        });
    }
    Ok(rows)
}
