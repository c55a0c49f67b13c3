//! Named, configuration-driven experiments binding sources, optics,
//! detection and statistics together, with reproducible CSV/JSON output.
//!
//! Six experiments are available:
//!
//! * `correlation-sweep`: Monte Carlo correlation versus analyzer separation,
//!   scored against the model's closed-form curve;
//! * `chsh`: four sub-seeded runs at the relative angles of an (a, a', b, b')
//!   setting quadruple, combined into the four-correlation statistic;
//! * `window-sweep`: matched-pair rate versus coincidence window for true
//!   pairs and for independent accidental streams;
//! * `sica-fuzz`: randomized search for violations of the shared-sequence
//!   rearrangement bound (none exist; the run verifies that);
//! * `dichotomic-demo`: exact autocorrelation of the square wave against the
//!   harmonic reference, plus linearity and discriminator-integral checks;
//! * `barut-quadrature`: the sphere-average quadrature against -cos(theta).

use crate::analysis::{
    harmonic_argument_check, harmonic_deviation, piecewise_linearity_report,
    shifted_autocorrelation, StepFunction,
};
use crate::detection::{count_coincidences, paired_click_streams, window_sweep, SweepSource};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::optics::{analytic_correlation, barut_quadrature, project, PolarizerMatrix};
use crate::rng::{self, role};
use crate::statistics::{
    chsh, four_channel_correlation, normalized_correlation_estimate, result_table_csv,
    sica_check, CorrelationEstimate, DichotomicSequence, ResultRow, SettingLabel,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Seed used when neither the config file, the environment, nor a flag
/// provides one.
pub const DEFAULT_SEED: u64 = 0xBE11_7E57;

/// Analyzer settings (a, a', b, b') that maximize the four-correlation
/// combination on the full-visibility curve -cos 2(x - y).
pub const CHSH_OPTIMAL: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_8, 3.0 * FRAC_PI_8];

/// Sixteen uniform analyzer separations across [0, pi).
pub fn sweep_16() -> Vec<f64> {
    (0..16).map(|i| PI * i as f64 / 16.0).collect()
}

/// Resolves a named angle preset.
pub fn preset_angles(name: &str) -> Result<Vec<f64>> {
    match name {
        "chsh-optimal" => Ok(CHSH_OPTIMAL.to_vec()),
        "sweep-16" => Ok(sweep_16()),
        other => Err(Error::config(format!(
            "unknown angle preset {other:?}; expected \"chsh-optimal\" or \"sweep-16\""
        ))),
    }
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CorrelationSweep,
    Chsh,
    WindowSweep,
    SicaFuzz,
    DichotomicDemo,
    BarutQuadrature,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::CorrelationSweep => "correlation-sweep",
            ExperimentKind::Chsh => "chsh",
            ExperimentKind::WindowSweep => "window-sweep",
            ExperimentKind::SicaFuzz => "sica-fuzz",
            ExperimentKind::DichotomicDemo => "dichotomic-demo",
            ExperimentKind::BarutQuadrature => "barut-quadrature",
        }
    }

    /// Whether the experiment draws random events (and so needs n_events).
    pub fn is_monte_carlo(self) -> bool {
        matches!(
            self,
            ExperimentKind::CorrelationSweep
                | ExperimentKind::Chsh
                | ExperimentKind::WindowSweep
                | ExperimentKind::SicaFuzz
        )
    }
}

/// Analyzer angles: either a named preset or an explicit list of radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Preset(String),
    List(Vec<f64>),
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_n_events() -> u64 {
    100_000
}

fn default_mean_rate() -> f64 {
    1e4
}

fn default_efficiency() -> f64 {
    1.0
}

/// A complete experiment description, loadable from a JSON document.
///
/// Only `experiment` is required. `window` defaults to a tenth of the mean
/// emission gap; `angles` defaults to the preset natural for the experiment
/// ("chsh-optimal" for chsh, 32 points on [0, pi] for barut-quadrature,
/// "sweep-16" otherwise). `output` is a path prefix; when set, the run
/// writes `<prefix>.csv` and `<prefix>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_events")]
    pub n_events: u64,
    #[serde(default)]
    pub angles: Option<AngleSpec>,
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_mean_rate")]
    pub mean_rate: f64,
    #[serde(default = "default_efficiency")]
    pub efficiency: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub dark_rate: f64,
}

impl ExperimentConfig {
    /// A minimal config for one experiment, everything else defaulted.
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            model: Model::default(),
            seed: default_seed(),
            n_events: default_n_events(),
            angles: None,
            window: None,
            output: None,
            mean_rate: default_mean_rate(),
            efficiency: default_efficiency(),
            jitter: 0.0,
            dark_rate: 0.0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// The effective coincidence window.
    pub fn window_value(&self) -> f64 {
        self.window.unwrap_or(0.1 / self.mean_rate)
    }

    /// The effective angle list for this experiment.
    pub fn resolved_angles(&self) -> Result<Vec<f64>> {
        match &self.angles {
            Some(AngleSpec::Preset(name)) => preset_angles(name),
            Some(AngleSpec::List(list)) => {
                if list.is_empty() {
                    return Err(Error::config("angle list must not be empty".to_string()));
                }
                if list.iter().any(|a| !a.is_finite()) {
                    return Err(Error::config("angles must be finite radians".to_string()));
                }
                Ok(list.clone())
            }
            None => Ok(match self.experiment {
                ExperimentKind::Chsh => CHSH_OPTIMAL.to_vec(),
                ExperimentKind::BarutQuadrature => uniform_grid(0.0, PI, 32),
                _ => sweep_16(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_monte_carlo() && self.n_events == 0 {
            return Err(Error::config(format!(
                "{} needs n_events >= 1",
                self.experiment.id()
            )));
        }
        if let Some(w) = self.window {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::config(format!("window must be a non-negative time, got {w}")));
            }
        }
        if !self.mean_rate.is_finite() || self.mean_rate <= 0.0 {
            return Err(Error::config(format!(
                "mean_rate must be a positive finite rate, got {}",
                self.mean_rate
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !self.jitter.is_finite() || self.jitter < 0.0 {
            return Err(Error::config(format!(
                "jitter must be a non-negative time, got {}",
                self.jitter
            )));
        }
        if !self.dark_rate.is_finite() || self.dark_rate < 0.0 {
            return Err(Error::config(format!(
                "dark_rate must be a non-negative rate, got {}",
                self.dark_rate
            )));
        }
        Ok(())
    }
}

/// How much of each analyzer's output a station records per event.
///
/// `BothChannels` is the double measurement: both analyzer outputs enter the
/// observable. `SingleChannel` records only the transmitted output. The two
/// choices change the visibility of every intensity-based correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityObservable {
    BothChannels,
    SingleChannel,
}

/// Per-event intensity observables for the shared-orientation source: the
/// left arm meets an analyzer at angle zero, the right arm (a quarter turn
/// ahead of the left) one at `theta`.
///
/// With `SingleChannel` each arm reports its transmitted intensity, whose
/// normalized correlation is the one-third-visibility curve -cos(2 theta)/3.
/// With `BothChannels` each arm reports i+ minus i-, which restores the full
/// -cos(2 theta).
pub fn furry_intensity_samples(
    theta: f64,
    n_events: u64,
    seed: u64,
    observable: IntensityObservable,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng::stream(seed, role::SOURCE);
    let n = n_events as usize;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let nu = rng.random::<f64>() * PI;
        let (ca, cb) = ((2.0 * nu).cos(), (2.0 * (nu - theta)).cos());
        match observable {
            IntensityObservable::BothChannels => {
                // i+ - i- = cos^2 - sin^2 at each arm; the right arm's
                // quarter-turn offset flips its sign.
                a.push(ca);
                b.push(-cb);
            }
            IntensityObservable::SingleChannel => {
                // i+ = cos^2 on the left; the offset makes it sin^2 on the
                // right.
                a.push((1.0 + ca) / 2.0);
                b.push((1.0 - cb) / 2.0);
            }
        }
    }
    (a, b)
}

/// Normalized correlation of the axis-locked pair under rotational
/// averaging, sampled per event from a uniform frame orientation.
///
/// Each event contributes the squared cross amplitude between the two arm
/// orientations. Recording both analyzer outputs doubles that contribution
/// and the correlation spans [-1, 1] as -cos(2 theta); with a single
/// recorded output the factor of two is absent and the result -cos^2(theta)
/// ranges over [-1, 0], as expected when the only visible events are
/// crossed-channel coincidences or their absence. Both arms keep unit total
/// intensity, so the normalizing moments are exactly 1.
pub fn locked_rotational_correlation(
    theta: f64,
    n_events: u64,
    seed: u64,
    observable: IntensityObservable,
) -> Result<CorrelationEstimate> {
    if n_events == 0 {
        return Err(Error::input("need at least one event".to_string()));
    }
    let mut rng = rng::stream(seed, role::SOURCE);
    let factor = match observable {
        IntensityObservable::BothChannels => 2.0,
        IntensityObservable::SingleChannel => 1.0,
    };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_events {
        let nu = rng.random::<f64>() * PI;
        let cross = nu.cos() * (nu + theta).sin() - nu.sin() * (nu + theta).cos();
        let product = factor * cross * cross;
        sum += product;
        sum_sq += product * product;
    }
    let n = n_events as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    CorrelationEstimate::new(mean - 1.0, n_events, (variance / n).sqrt())
}

/// Per-event spin projections for the anti-aligned spin-pair source: arm one
/// projects on an axis tilted `theta` from arm two's axis.
pub fn spin_projection_samples(theta: f64, n_events: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let (st, ct) = theta.sin_cos();
    let n = n_events as usize;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for e in crate::sources::barut_source(seed, n_events) {
        a.push(e.s1[0] * st + e.s1[2] * ct);
        b.push(e.s2[2]);
    }
    debug_assert_eq!(a.len(), n);
    (a, b)
}

/// Per-event total transmitted intensity (both analyzer outputs summed) for
/// the axis-locked source. Unit-norm emissions conserve power through the
/// projector pair, so every sample is 1 and the sample means and second
/// moments are all unity.
pub fn locked_total_intensity_samples(
    theta: f64,
    n_events: u64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pol_a = PolarizerMatrix::new(0.0)?;
    let pol_b = PolarizerMatrix::new(theta)?;
    let n = n_events as usize;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for e in crate::sources::locked_mode_source(seed, n_events, default_mean_rate())? {
        a.push(project(&pol_a, e.left).incident());
        b.push(project(&pol_b, e.right).incident());
    }
    Ok((a, b))
}

/// Monte Carlo parameters shared by the click-level experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McParams {
    pub mean_rate: f64,
    pub efficiency: f64,
    pub jitter: f64,
    pub window: f64,
    pub dark_rate: f64,
}

impl ExperimentConfig {
    pub fn mc_params(&self) -> McParams {
        McParams {
            mean_rate: self.mean_rate,
            efficiency: self.efficiency,
            jitter: self.jitter,
            window: self.window_value(),
            dark_rate: self.dark_rate,
        }
    }
}

fn merge_sorted(
    mut base: Vec<crate::detection::EventRecord>,
    extra: Vec<crate::detection::EventRecord>,
) -> Vec<crate::detection::EventRecord> {
    base.extend(extra);
    base.sort_by(|x, y| x.time.total_cmp(&y.time));
    base
}

/// One Monte Carlo correlation estimate at analyzer separation `theta`,
/// using the estimator native to the model. Returns the estimate and the
/// estimator's name for result rows.
pub fn mc_correlation(
    model: Model,
    theta: f64,
    n_events: u64,
    seed: u64,
    params: &McParams,
) -> Result<(CorrelationEstimate, &'static str)> {
    match model {
        Model::LockedMode => {
            let streams = paired_click_streams(
                model,
                theta,
                n_events,
                params.mean_rate,
                params.efficiency,
                params.jitter,
                seed,
            )?;
            let (mut a, mut b) = (streams.a, streams.b);
            if params.dark_rate > 0.0 {
                use crate::detection::{poisson_clicks, Station};
                let dark_a =
                    poisson_clicks(Station::A, params.dark_rate, streams.duration, seed, role::DARK_A)?;
                let dark_b =
                    poisson_clicks(Station::B, params.dark_rate, streams.duration, seed, role::DARK_B)?;
                a = merge_sorted(a, dark_a);
                b = merge_sorted(b, dark_b);
            }
            let counts = count_coincidences(&a, &b, params.window, streams.duration)?;
            Ok((four_channel_correlation(&counts)?, "four-channel"))
        }
        Model::Furry => {
            let (a, b) = furry_intensity_samples(
                theta,
                n_events,
                seed,
                IntensityObservable::SingleChannel,
            );
            Ok((normalized_correlation_estimate(&a, &b)?, "normalized-intensity"))
        }
        Model::Barut => {
            let (a, b) = spin_projection_samples(theta, n_events, seed);
            Ok((normalized_correlation_estimate(&a, &b)?, "normalized-spin"))
        }
        Model::QmOracle => {
            let value = analytic_correlation(model, theta)?;
            Ok((CorrelationEstimate::new(value, 0, 0.0)?, "analytic"))
        }
    }
}

type Scalars = BTreeMap<String, Value>;

fn scalar(scalars: &mut Scalars, key: &str, value: f64) {
    scalars.insert(key.to_string(), json!(value));
}

fn correlation_sweep(config: &ExperimentConfig) -> Result<(String, Scalars)> {
    let thetas = config.resolved_angles()?;
    let params = config.mc_params();
    let mut rows = Vec::with_capacity(thetas.len());
    let mut max_dev = 0.0f64;
    let mut max_dev_at = thetas[0];
    let mut max_z = 0.0f64;
    for (i, &theta) in thetas.iter().enumerate() {
        let sub = rng::sub_seed(config.seed, i as u64);
        let (est, estimator) = mc_correlation(config.model, theta, config.n_events, sub, &params)?;
        let reference = analytic_correlation(config.model, theta)?;
        let dev = (est.value - reference).abs();
        if dev > max_dev {
            max_dev = dev;
            max_dev_at = theta;
        }
        if est.std_err > 0.0 {
            max_z = max_z.max(dev / est.std_err);
        }
        rows.push(ResultRow {
            theta,
            model: config.model.id().to_string(),
            estimator: estimator.to_string(),
            value: est.value,
            std_err: est.std_err,
            n: est.n,
        });
    }
    let mut scalars = Scalars::new();
    scalar(&mut scalars, "max_abs_deviation", max_dev);
    scalar(&mut scalars, "max_abs_deviation_at", max_dev_at);
    scalar(&mut scalars, "max_z", max_z);
    Ok((result_table_csv(&rows), scalars))
}

fn chsh_experiment(config: &ExperimentConfig) -> Result<(String, Scalars)> {
    let angles = config.resolved_angles()?;
    if angles.len() != 4 {
        return Err(Error::config(format!(
            "chsh needs exactly four settings (a, a', b, b'), got {}",
            angles.len()
        )));
    }
    let (a, ap, b, bp) = (angles[0], angles[1], angles[2], angles[3]);
    // The correlation depends only on the separation, so each of the four
    // runs measures one relative angle with its own seed stream.
    let relative = [b - a, bp - a, bp - ap, b - ap];
    let params = config.mc_params();
    let mut estimates = Vec::with_capacity(4);
    let mut rows = Vec::with_capacity(4);
    for (i, &theta) in relative.iter().enumerate() {
        let sub = rng::sub_seed(config.seed, i as u64);
        let (est, estimator) = mc_correlation(config.model, theta, config.n_events, sub, &params)?;
        rows.push(ResultRow {
            theta,
            model: config.model.id().to_string(),
            estimator: estimator.to_string(),
            value: est.value,
            std_err: est.std_err,
            n: est.n,
        });
        estimates.push(est);
    }
    let value = chsh(estimates[0].value, estimates[1].value, estimates[2].value, estimates[3].value)?;
    let std_err = estimates.iter().map(|e| e.std_err * e.std_err).sum::<f64>().sqrt();
    let mut scalars = Scalars::new();
    scalar(&mut scalars, "chsh_value", value);
    scalar(&mut scalars, "chsh_std_err", std_err);
    scalar(&mut scalars, "p_ab", estimates[0].value);
    scalar(&mut scalars, "p_ab_prime", estimates[1].value);
    scalar(&mut scalars, "p_a_prime_b_prime", estimates[2].value);
    scalar(&mut scalars, "p_a_prime_b", estimates[3].value);
    Ok((result_table_csv(&rows), scalars))
}

fn window_sweep_experiment(config: &ExperimentConfig) -> Result<(String, Scalars)> {
    let base = config.window_value();
    if !base.is_finite() || base <= 0.0 {
        return Err(Error::config(format!(
            "window-sweep needs a positive base window, got {base}"
        )));
    }
    let windows: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 10.0].iter().map(|m| m * base).collect();
    let accidental = window_sweep(
        SweepSource::Accidentals,
        &windows,
        config.mean_rate,
        config.n_events,
        rng::sub_seed(config.seed, 0),
        config.jitter,
    )?;
    let pairs = window_sweep(
        SweepSource::Pairs(config.model),
        &windows,
        config.mean_rate,
        config.n_events,
        rng::sub_seed(config.seed, 1),
        config.jitter,
    )?;

    // Through-origin least squares on the accidental points: rate = slope * window.
    let sww: f64 = accidental.iter().map(|(w, _)| w * w).sum();
    let swr: f64 = accidental.iter().map(|(w, r)| w * r).sum();
    let slope = swr / sww;
    let ss_res: f64 = accidental.iter().map(|(w, r)| (r - slope * w).powi(2)).sum();
    let ss_tot: f64 = accidental.iter().map(|(_, r)| r * r).sum();
    if ss_tot == 0.0 {
        return Err(Error::degenerate(
            "no accidental coincidences at any window; increase n_events or the window".to_string(),
        ));
    }
    let r_squared = 1.0 - ss_res / ss_tot;
    if accidental[0].1 == 0.0 {
        return Err(Error::degenerate(
            "no accidental coincidences at the base window".to_string(),
        ));
    }
    let doubling_ratio = accidental[1].1 / accidental[0].1;

    let pair_rates: Vec<f64> = pairs.iter().map(|(_, r)| *r).collect();
    let mean_pair = pair_rates.iter().sum::<f64>() / pair_rates.len() as f64;
    if mean_pair == 0.0 {
        return Err(Error::degenerate("no matched pairs at any window".to_string()));
    }
    let spread = pair_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - pair_rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let flatness = spread / mean_pair;

    let mut csv = String::from("window,source,pair_rate\n");
    for (w, r) in &accidental {
        csv.push_str(&format!("{w},accidentals,{r}\n"));
    }
    for (w, r) in &pairs {
        csv.push_str(&format!("{w},{},{r}\n", config.model.id()));
    }
    let mut scalars = Scalars::new();
    scalar(&mut scalars, "accidental_slope", slope);
    scalar(&mut scalars, "accidental_r_squared", r_squared);
    scalar(&mut scalars, "accidental_doubling_ratio", doubling_ratio);
    scalar(&mut scalars, "pair_rate_flatness", flatness);
    Ok((csv, scalars))
}

fn sica_fuzz(config: &ExperimentConfig) -> Result<(String, Scalars)> {
    let mut rng = rng::stream(config.seed, role::FUZZ);
    let mut csv = String::from("trial,lhs,bound\n");
    let mut violations = 0u64;
    let mut max_lhs = 0.0f64;
    for trial in 0..config.n_events {
        let n = rng.random_range(1..=64usize);
        let mut draw = |label: SettingLabel| -> Result<DichotomicSequence> {
            let values: Vec<i8> =
                (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            DichotomicSequence::new(label, values)
        };
        let a = draw(SettingLabel::A)?;
        let ap = draw(SettingLabel::APrime)?;
        let b = draw(SettingLabel::B)?;
        let bp = draw(SettingLabel::BPrime)?;
        let check = sica_check(&a, &ap, &b, &bp)?;
        max_lhs = max_lhs.max(check.lhs);
        if !check.holds {
            violations += 1;
            csv.push_str(&format!("{trial},{},{}\n", check.lhs, check.bound));
        }
    }
    let mut scalars = Scalars::new();
    scalars.insert("trials".to_string(), json!(config.n_events));
    scalars.insert("violations".to_string(), json!(violations));
    scalar(&mut scalars, "max_lhs", max_lhs);
    Ok((csv, scalars))
}

fn dichotomic_demo(_config: &ExperimentConfig) -> Result<(String, Scalars)> {
    let square = StepFunction::symmetric_square();
    let grid = uniform_grid(0.0, PI, 721);
    let corr = shifted_autocorrelation(&square, &grid, 1024)?;
    let (max_dev, max_dev_at) = harmonic_deviation(&corr)?;
    let linearity = piecewise_linearity_report(&square, 720)?;
    let discriminator = harmonic_argument_check(0.0, &uniform_grid(-PI, PI, 257))?;

    let mut csv = String::from("theta,autocorr,harmonic_ref,deviation\n");
    for (theta, value) in &corr {
        let reference = -(2.0 * theta).cos();
        csv.push_str(&format!("{theta},{value},{reference},{}\n", (value - reference).abs()));
    }
    let mut scalars = Scalars::new();
    scalar(&mut scalars, "max_deviation", max_dev);
    scalar(&mut scalars, "max_deviation_at", max_dev_at);
    scalar(&mut scalars, "max_second_difference", linearity.max_second_difference);
    scalars.insert("linearity_checked_points".to_string(), json!(linearity.checked_points));
    scalar(&mut scalars, "discriminator_max_deviation", discriminator.max_deviation);
    Ok((csv, scalars))
}

fn barut_quadrature_sweep(config: &ExperimentConfig) -> Result<(String, Scalars)> {
    const N_NODES: usize = 256;
    let thetas = config.resolved_angles()?;
    let mut rows = Vec::with_capacity(thetas.len());
    let mut max_dev = 0.0f64;
    let mut max_dev_at = thetas[0];
    for &theta in &thetas {
        let value = barut_quadrature(theta, N_NODES)?;
        let dev = (value - analytic_correlation(Model::Barut, theta)?).abs();
        if dev > max_dev {
            max_dev = dev;
            max_dev_at = theta;
        }
        rows.push(ResultRow {
            theta,
            model: Model::Barut.id().to_string(),
            estimator: "quadrature".to_string(),
            value,
            std_err: 0.0,
            n: N_NODES as u64,
        });
    }
    let mut scalars = Scalars::new();
    scalar(&mut scalars, "max_abs_deviation", max_dev);
    scalar(&mut scalars, "max_abs_deviation_at", max_dev_at);
    Ok((result_table_csv(&rows), scalars))
}

/// Everything a run produced: the summary document, the CSV text, and the
/// paths written when the config asked for files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub csv: String,
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

/// Runs one configured experiment.
///
/// The summary echoes the config and carries the seed, library version,
/// wall-clock duration and the experiment's scalars. CSV bytes depend only
/// on the config and seed, never on timing.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let (csv, scalars) = match config.experiment {
        ExperimentKind::CorrelationSweep => correlation_sweep(config)?,
        ExperimentKind::Chsh => chsh_experiment(config)?,
        ExperimentKind::WindowSweep => window_sweep_experiment(config)?,
        ExperimentKind::SicaFuzz => sica_fuzz(config)?,
        ExperimentKind::DichotomicDemo => dichotomic_demo(config)?,
        ExperimentKind::BarutQuadrature => barut_quadrature_sweep(config)?,
    };
    let summary = json!({
        "config": config,
        "seed": config.seed,
        "library_version": env!("CARGO_PKG_VERSION"),
        "duration_seconds": started.elapsed().as_secs_f64(),
        "scalars": scalars,
    });
    let mut csv_path = None;
    let mut summary_path = None;
    if let Some(prefix) = &config.output {
        let csv_file = PathBuf::from(format!("{}.csv", prefix.display()));
        let json_file = PathBuf::from(format!("{}.json", prefix.display()));
        std::fs::write(&csv_file, &csv)?;
        std::fs::write(&json_file, format!("{:#}\n", summary))?;
        csv_path = Some(csv_file);
        summary_path = Some(json_file);
    }
    Ok(RunOutput { summary, csv, csv_path, summary_path })
}

/// Deviation report from joining a result table against an analytic curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: usize,
    pub max_abs_deviation: f64,
    pub at_theta: f64,
    /// Largest |value - reference| / std_err over rows with a positive
    /// standard error; zero when no row carries one.
    pub max_z: f64,
}

/// Joins a CSV result table against the closed-form curve of `oracle`.
pub fn compare(input: &Path, oracle: Model) -> Result<CompareReport> {
    let text = std::fs::read_to_string(input)?;
    let rows = crate::statistics::parse_result_table_csv(&text)?;
    if rows.is_empty() {
        return Err(Error::input("result table has no data rows".to_string()));
    }
    let mut max_abs_deviation = 0.0f64;
    let mut at_theta = rows[0].theta;
    let mut max_z = 0.0f64;
    for row in &rows {
        let reference = analytic_correlation(oracle, row.theta)?;
        let dev = (row.value - reference).abs();
        if dev > max_abs_deviation {
            max_abs_deviation = dev;
            at_theta = row.theta;
        }
        if row.std_err > 0.0 {
            max_z = max_z.max(dev / row.std_err);
        }
    }
    Ok(CompareReport { rows: rows.len(), max_abs_deviation, at_theta, max_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn presets_resolve() {
        assert_eq!(preset_angles("chsh-optimal").unwrap(), CHSH_OPTIMAL.to_vec());
        assert_eq!(preset_angles("sweep-16").unwrap().len(), 16);
        assert_eq!(preset_angles("bogus").unwrap_err().kind(), "config");
    }

    #[test]
    fn config_parses_with_defaults_and_rejects_unknown_fields() {
        let cfg = ExperimentConfig::from_json_str(r#"{"experiment": "chsh"}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Chsh);
        assert_eq!(cfg.model, Model::LockedMode);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.n_events, 100_000);
        assert_eq!(cfg.resolved_angles().unwrap(), CHSH_OPTIMAL.to_vec());
        assert!((cfg.window_value() - 1e-5).abs() < 1e-18);

        let err = ExperimentConfig::from_json_str(r#"{"experiment": "chsh", "widow": 1}"#)
            .unwrap_err();
        assert_eq!(err.kind(), "config");
        assert_eq!(
            ExperimentConfig::from_json_str(r#"{"experiment": "past-lives"}"#).unwrap_err().kind(),
            "config"
        );
    }

    #[test]
    fn config_angle_forms_round_trip() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"experiment": "correlation-sweep", "angles": "sweep-16"}"#,
        )
        .unwrap();
        assert_eq!(cfg.resolved_angles().unwrap().len(), 16);

        let cfg = ExperimentConfig::from_json_str(
            r#"{"experiment": "correlation-sweep", "angles": [0.0, 0.5]}"#,
        )
        .unwrap();
        assert_eq!(cfg.resolved_angles().unwrap(), vec![0.0, 0.5]);

        let cfg = ExperimentConfig::from_json_str(
            r#"{"experiment": "correlation-sweep", "angles": []}"#,
        )
        .unwrap();
        assert_eq!(cfg.resolved_angles().unwrap_err().kind(), "config");
    }

    #[test]
    fn validation_rejects_bad_knobs() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::CorrelationSweep);
        cfg.n_events = 0;
        assert_eq!(cfg.validate().unwrap_err().kind(), "config");

        let mut cfg = ExperimentConfig::new(ExperimentKind::Chsh);
        cfg.efficiency = 0.0;
        assert_eq!(cfg.validate().unwrap_err().kind(), "config");

        let mut cfg = ExperimentConfig::new(ExperimentKind::Chsh);
        cfg.window = Some(-1.0);
        assert_eq!(cfg.validate().unwrap_err().kind(), "config");

        // Deterministic experiments do not need events.
        let mut cfg = ExperimentConfig::new(ExperimentKind::DichotomicDemo);
        cfg.n_events = 0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn locked_mode_estimates_track_the_full_visibility_curve() {
        let params = ExperimentConfig::new(ExperimentKind::CorrelationSweep).mc_params();
        for (i, theta) in [0.0, 0.7, FRAC_PI_2, 2.1].into_iter().enumerate() {
            let (est, name) =
                mc_correlation(Model::LockedMode, theta, 200_000, 7 + i as u64, &params).unwrap();
            assert_eq!(name, "four-channel");
            let want = -(2.0 * theta).cos();
            let gate = 4.0 * est.std_err.max(1e-4);
            assert!((est.value - want).abs() <= gate, "theta={theta}: {} vs {want}", est.value);
        }
    }

    #[test]
    fn furry_estimates_have_one_third_visibility() {
        let params = ExperimentConfig::new(ExperimentKind::CorrelationSweep).mc_params();
        let (est, name) = mc_correlation(Model::Furry, 0.0, 1_000_000, 11, &params).unwrap();
        assert_eq!(name, "normalized-intensity");
        assert!((est.value + 1.0 / 3.0).abs() <= 0.005, "value = {}", est.value);
    }

    #[test]
    fn barut_estimates_track_minus_cos_theta() {
        let params = ExperimentConfig::new(ExperimentKind::CorrelationSweep).mc_params();
        let theta = 1.0;
        let (est, name) = mc_correlation(Model::Barut, theta, 500_000, 13, &params).unwrap();
        assert_eq!(name, "normalized-spin");
        assert!((est.value + theta.cos()).abs() <= 4.0 * est.std_err + 1e-3);
    }

    #[test]
    fn oracle_estimates_are_exact() {
        let params = ExperimentConfig::new(ExperimentKind::CorrelationSweep).mc_params();
        let (est, name) = mc_correlation(Model::QmOracle, 0.3, 10, 1, &params).unwrap();
        assert_eq!(name, "analytic");
        assert_eq!(est.value, -(0.6f64).cos());
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn recording_both_channels_restores_full_visibility() {
        // Single-channel intensities give the one-third curve; the signed
        // difference over both outputs recovers -cos(2 theta).
        let (a, b) = furry_intensity_samples(0.0, 200_000, 3, IntensityObservable::SingleChannel);
        let est = normalized_correlation_estimate(&a, &b).unwrap();
        assert!((est.value + 1.0 / 3.0).abs() <= 0.01, "value = {}", est.value);
        let (a, b) =
            furry_intensity_samples(FRAC_PI_2, 200_000, 3, IntensityObservable::SingleChannel);
        let est = normalized_correlation_estimate(&a, &b).unwrap();
        assert!((est.value - 1.0 / 3.0).abs() <= 0.01, "value = {}", est.value);
        let (a, b) = furry_intensity_samples(0.0, 200_000, 3, IntensityObservable::BothChannels);
        let est = normalized_correlation_estimate(&a, &b).unwrap();
        assert!(est.value < -0.99, "value = {}", est.value);
    }

    #[test]
    fn rotational_average_loses_half_the_range_with_one_channel() {
        for (i, theta) in [0.0, 0.4, FRAC_PI_4, 1.1, FRAC_PI_2].into_iter().enumerate() {
            let seed = 40 + i as u64;
            let double = locked_rotational_correlation(
                theta,
                20_000,
                seed,
                IntensityObservable::BothChannels,
            )
            .unwrap();
            assert!((double.value + (2.0 * theta).cos()).abs() <= 1e-12);
            let single = locked_rotational_correlation(
                theta,
                20_000,
                seed,
                IntensityObservable::SingleChannel,
            )
            .unwrap();
            assert!((single.value + theta.cos().powi(2)).abs() <= 1e-12);
            assert!((-1.0..=0.0).contains(&single.value));
        }
        assert_eq!(
            locked_rotational_correlation(0.0, 10, 1, IntensityObservable::SingleChannel)
                .unwrap()
                .value,
            -1.0
        );
    }

    #[test]
    fn total_intensity_samples_are_unit() {
        let (a, b) = locked_total_intensity_samples(0.9, 500, 5).unwrap();
        assert!(a.iter().chain(&b).all(|v| *v == 1.0));
    }

    #[test]
    fn chsh_run_reaches_the_full_visibility_maximum() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Chsh);
        cfg.n_events = 200_000;
        let (_csv, scalars) = chsh_experiment(&cfg).unwrap();
        let value = scalars["chsh_value"].as_f64().unwrap();
        assert!((value - 2.0 * 2.0f64.sqrt()).abs() <= 0.02, "chsh = {value}");
    }

    #[test]
    fn chsh_rejects_wrong_setting_counts() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Chsh);
        cfg.angles = Some(AngleSpec::List(vec![0.0, 1.0]));
        assert_eq!(run(&cfg).unwrap_err().kind(), "config");
    }

    #[test]
    fn sica_fuzz_reports_no_violations() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::SicaFuzz);
        cfg.n_events = 2_000;
        let (csv, scalars) = sica_fuzz(&cfg).unwrap();
        assert_eq!(scalars["violations"], json!(0));
        assert!(scalars["max_lhs"].as_f64().unwrap() <= 2.0);
        assert_eq!(csv, "trial,lhs,bound\n");
    }

    #[test]
    fn dichotomic_demo_reports_the_exact_gap() {
        let cfg = ExperimentConfig::new(ExperimentKind::DichotomicDemo);
        let (csv, scalars) = dichotomic_demo(&cfg).unwrap();
        assert_eq!(scalars["max_deviation"].as_f64().unwrap(), 2.0);
        assert!(scalars["max_second_difference"].as_f64().unwrap() <= 1e-12);
        assert!(csv.starts_with("theta,autocorr,harmonic_ref,deviation\n"));
        assert_eq!(csv.lines().count(), 722);
    }

    #[test]
    fn barut_quadrature_sweep_is_within_tolerance() {
        let cfg = ExperimentConfig::new(ExperimentKind::BarutQuadrature);
        let (_csv, scalars) = barut_quadrature_sweep(&cfg).unwrap();
        assert!(scalars["max_abs_deviation"].as_f64().unwrap() <= 1e-6);
    }

    #[test]
    fn window_sweep_run_produces_fit_scalars() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::WindowSweep);
        cfg.window = Some(3e-7);
        cfg.n_events = 200_000;
        let (csv, scalars) = window_sweep_experiment(&cfg).unwrap();
        assert!(csv.starts_with("window,source,pair_rate\n"));
        let ratio = scalars["accidental_doubling_ratio"].as_f64().unwrap();
        assert!((ratio - 2.0).abs() < 0.2, "ratio = {ratio}");
        assert!(scalars["accidental_r_squared"].as_f64().unwrap() > 0.99);
        assert!(scalars["pair_rate_flatness"].as_f64().unwrap() < 0.02);
    }

    #[test]
    fn run_writes_prefixed_files_and_echoes_config() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("demo");
        let mut cfg = ExperimentConfig::new(ExperimentKind::DichotomicDemo);
        cfg.output = Some(prefix.clone());
        let out = run(&cfg).unwrap();
        let csv_path = out.csv_path.unwrap();
        assert_eq!(csv_path, PathBuf::from(format!("{}.csv", prefix.display())));
        assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), out.csv);
        let summary_text = std::fs::read_to_string(out.summary_path.unwrap()).unwrap();
        let summary: Value = serde_json::from_str(&summary_text).unwrap();
        assert_eq!(summary["config"]["experiment"], json!("dichotomic-demo"));
        assert_eq!(summary["seed"], json!(DEFAULT_SEED));
        assert_eq!(summary["library_version"], json!(env!("CARGO_PKG_VERSION")));
        assert!(summary["duration_seconds"].as_f64().unwrap() >= 0.0);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::CorrelationSweep);
        cfg.n_events = 20_000;
        cfg.model = Model::Furry;
        let first = run(&cfg).unwrap();
        let second = run(&cfg).unwrap();
        assert_eq!(first.csv, second.csv);

        cfg.seed = 1;
        let third = run(&cfg).unwrap();
        assert_ne!(first.csv, third.csv);
    }

    #[test]
    fn compare_joins_against_the_oracle_curve() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::CorrelationSweep);
        cfg.model = Model::QmOracle;
        cfg.output = Some(dir.path().join("oracle"));
        let out = run(&cfg).unwrap();
        let report = compare(&out.csv_path.unwrap(), Model::QmOracle).unwrap();
        assert_eq!(report.rows, 16);
        assert_eq!(report.max_abs_deviation, 0.0);
        assert_eq!(report.max_z, 0.0);
    }

    #[test]
    fn compare_rejects_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = compare(&path, Model::LockedMode).unwrap_err();
        assert_eq!(err.kind(), "input");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn compare_flags_cross_model_visibility_gap() {
        // A full-visibility table judged against the one-third-visibility
        // curve deviates most at zero separation, by 2/3.
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::CorrelationSweep);
        cfg.model = Model::QmOracle;
        cfg.output = Some(dir.path().join("oracle"));
        let out = run(&cfg).unwrap();
        let report = compare(&out.csv_path.unwrap(), Model::Furry).unwrap();
        assert!((report.max_abs_deviation - 2.0 / 3.0).abs() <= 1e-12);
        assert_eq!(report.at_theta, 0.0);
    }
}
