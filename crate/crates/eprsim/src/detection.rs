//! Square-law detection and coincidence counting.
//!
//! A detector converts the channel intensities of one emission into at most
//! one time-tagged click: the click fires with probability `efficiency`, and
//! a single draw routes it to the channel carrying the matching share of the
//! incident intensity, so the two channels of one analyzer are exclusive.
//! Click streams from the two stations are then paired by nearest time within
//! a coincidence window, mirroring common hardware coincidence logic.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::optics::{project, ChannelIntensities, PolarizerMatrix};
use crate::rng;
use crate::sources::{self, HiddenVariable};

/// Which arm of the apparatus a click belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Station {
    A,
    B,
}

impl fmt::Display for Station {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Station::A => "A",
            Station::B => "B",
        })
    }
}

/// Output port of the analyzer that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Plus,
    Minus,
}

impl Channel {
    pub fn sign(self) -> i8 {
        match self {
            Channel::Plus => 1,
            Channel::Minus => -1,
        }
    }
}

/// One detector click. `lambda_tag` carries the hidden state of the emission
/// that caused it (absent for dark counts), so matched-state analyses stay
/// possible after the fact.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub station: Station,
    pub channel: Channel,
    pub lambda_tag: Option<HiddenVariable>,
}

/// Tallies of matched pairs by channel combination, plus the singles and the
/// counting parameters they were obtained with.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceCounts {
    pub n_pp: u64,
    pub n_mm: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_singles_a: u64,
    pub n_singles_b: u64,
    pub window: f64,
    pub duration: f64,
}

impl CoincidenceCounts {
    pub fn total_pairs(&self) -> u64 {
        self.n_pp + self.n_mm + self.n_pm + self.n_mp
    }
}

/// One station's square-law detector.
#[derive(Debug)]
pub struct Detector {
    station: Station,
    efficiency: f64,
    jitter: f64,
    rng: ChaCha8Rng,
}

impl Detector {
    /// `efficiency` must lie in (0, 1]; `jitter` is the width of the uniform
    /// click-time offset (zero by default in callers, making click times
    /// coincide with emission times).
    pub fn new(station: Station, efficiency: f64, jitter: f64, seed: u64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::config(format!(
                "detector efficiency must lie in (0, 1], got {efficiency}"
            )));
        }
        if !jitter.is_finite() || jitter < 0.0 {
            return Err(Error::config(format!(
                "detector jitter must be a non-negative time, got {jitter}"
            )));
        }
        let role = match station {
            Station::A => rng::role::DETECTOR_A,
            Station::B => rng::role::DETECTOR_B,
        };
        Ok(Detector { station, efficiency, jitter, rng: rng::stream(seed, role) })
    }

    /// Turns one emission's channel intensities into at most one click. Each
    /// channel fires with probability `efficiency * intensity / incident`;
    /// a zero incident intensity never clicks. Three draws are consumed per
    /// emission regardless of the outcome so streams stay aligned and
    /// reproducible.
    pub fn detect(
        &mut self,
        intensities: &ChannelIntensities,
        emission_time: f64,
        lambda: HiddenVariable,
    ) -> Option<EventRecord> {
        let u_click: f64 = self.rng.random();
        let u_channel: f64 = self.rng.random();
        let u_jitter: f64 = self.rng.random();
        let incident = intensities.incident();
        if incident <= 0.0 || u_click >= self.efficiency {
            return None;
        }
        let channel = if u_channel < intensities.i_plus / incident {
            Channel::Plus
        } else {
            Channel::Minus
        };
        Some(EventRecord {
            time: emission_time + u_jitter * self.jitter,
            station: self.station,
            channel,
            lambda_tag: Some(lambda),
        })
    }
}

/// Poisson-timed clicks uncorrelated with any emission, split evenly between
/// the channels. Used for dark counts and for the independent-stream
/// accidentals reference.
pub fn poisson_clicks(
    station: Station,
    rate: f64,
    duration: f64,
    seed: u64,
    role: u64,
) -> Result<Vec<EventRecord>> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::config(format!("click rate must be non-negative, got {rate}")));
    }
    if !duration.is_finite() || duration <= 0.0 {
        return Err(Error::config(format!("duration must be positive, got {duration}")));
    }
    let mut out = Vec::new();
    if rate == 0.0 {
        return Ok(out);
    }
    let mut rng = rng::stream(seed, role);
    let gap = Exp::new(rate).expect("validated rate");
    let mut t = gap.sample(&mut rng);
    while t < duration {
        let channel = if rng.random::<bool>() { Channel::Plus } else { Channel::Minus };
        out.push(EventRecord { time: t, station, channel, lambda_tag: None });
        t += gap.sample(&mut rng);
    }
    Ok(out)
}

fn check_sorted(stream: &[EventRecord], which: Station) -> Result<()> {
    if stream.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::input(format!("station {which} stream is not time-sorted")));
    }
    Ok(())
}

/// Pairs clicks across stations when their times differ by at most `window`.
///
/// Each A-click takes the nearest unused B-click in time, scanning the
/// streams in order; ties are resolved toward the earlier B-click and every
/// click is used at most once. A window of zero pairs only exact time
/// coincidences, so jittered streams produce none.
pub fn count_coincidences(
    stream_a: &[EventRecord],
    stream_b: &[EventRecord],
    window: f64,
    duration: f64,
) -> Result<CoincidenceCounts> {
    if !window.is_finite() || window < 0.0 {
        return Err(Error::input(format!("window must be a non-negative time, got {window}")));
    }
    if !duration.is_finite() || duration <= window {
        return Err(Error::input(format!(
            "duration must exceed the window, got duration {duration} with window {window}"
        )));
    }
    check_sorted(stream_a, Station::A)?;
    check_sorted(stream_b, Station::B)?;

    let mut used = vec![false; stream_b.len()];
    let mut lo = 0usize;
    let (mut n_pp, mut n_mm, mut n_pm, mut n_mp) = (0u64, 0u64, 0u64, 0u64);
    for a in stream_a {
        // B-clicks earlier than this horizon can never match a later A-click.
        while lo < stream_b.len() && stream_b[lo].time < a.time - window {
            lo += 1;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut j = lo;
        while j < stream_b.len() && stream_b[j].time <= a.time + window {
            if !used[j] {
                let dt = (stream_b[j].time - a.time).abs();
                // Strict comparison keeps the earlier B-click on ties.
                if best.is_none_or(|(_, d)| dt < d) {
                    best = Some((j, dt));
                }
            }
            j += 1;
        }
        if let Some((j, _)) = best {
            used[j] = true;
            match (a.channel, stream_b[j].channel) {
                (Channel::Plus, Channel::Plus) => n_pp += 1,
                (Channel::Minus, Channel::Minus) => n_mm += 1,
                (Channel::Plus, Channel::Minus) => n_pm += 1,
                (Channel::Minus, Channel::Plus) => n_mp += 1,
            }
        }
    }
    Ok(CoincidenceCounts {
        n_pp,
        n_mm,
        n_pm,
        n_mp,
        n_singles_a: stream_a.len() as u64,
        n_singles_b: stream_b.len() as u64,
        window,
        duration,
    })
}

/// Source selector for window sweeps: a paired-emission model, or a reference
/// pair of independent Poisson streams that can only coincide accidentally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSource {
    Pairs(Model),
    Accidentals,
}

impl std::str::FromStr for SweepSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "accidentals" {
            Ok(SweepSource::Accidentals)
        } else {
            Ok(SweepSource::Pairs(s.parse()?))
        }
    }
}

/// Both stations' click streams for one run, plus the nominal run length.
pub struct ClickStreams {
    pub a: Vec<EventRecord>,
    pub b: Vec<EventRecord>,
    pub duration: f64,
}

/// Emits `n_events` pairs, splits both arms at analyzers separated by
/// `theta`, and detects at both stations. Station A's analyzer sits at the
/// frame reference (angle zero) and station B's at `theta`; the closed-form
/// coincidence laws depend only on this separation, so runs are parametrized
/// by it directly.
pub fn paired_click_streams(
    model: Model,
    theta: f64,
    n_events: u64,
    mean_rate: f64,
    efficiency: f64,
    jitter: f64,
    seed: u64,
) -> Result<ClickStreams> {
    let pol_a = PolarizerMatrix::new(0.0)?;
    let pol_b = PolarizerMatrix::new(theta)?;
    let mut det_a = Detector::new(Station::A, efficiency, jitter, seed)?;
    let mut det_b = Detector::new(Station::B, efficiency, jitter, seed)?;
    let emissions: Box<dyn Iterator<Item = sources::PairEmission>> = match model {
        Model::LockedMode => Box::new(sources::locked_mode_source(seed, n_events, mean_rate)?),
        Model::Furry => Box::new(sources::furry_source(seed, n_events, mean_rate)?),
        Model::Barut | Model::QmOracle => {
            return Err(Error::config(format!(
                "model {model} has no optical click pipeline"
            )));
        }
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut last_time = 0.0f64;
    for e in emissions {
        last_time = e.emit_time;
        if let Some(rec) = det_a.detect(&project(&pol_a, e.left), e.emit_time, e.lambda) {
            a.push(rec);
        }
        if let Some(rec) = det_b.detect(&project(&pol_b, e.right), e.emit_time, e.lambda) {
            b.push(rec);
        }
    }
    // Jitter can swap clicks from emissions closer together than the jitter
    // width; a detector tags clicks in arrival order.
    if jitter > 0.0 {
        a.sort_by(|x, y| x.time.total_cmp(&y.time));
        b.sort_by(|x, y| x.time.total_cmp(&y.time));
    }
    // Nominal run length: one mean gap past the final emission, plus room for
    // jitter, so every click lies inside it.
    let duration = last_time + 1.0 / mean_rate + jitter;
    Ok(ClickStreams { a, b, duration })
}

/// Matched-pair rate as a function of the coincidence window, for one fixed
/// pair of click streams.
///
/// `windows` must be non-negative and strictly ascending. For paired models
/// the clicks get a uniform jitter of `jitter`; for the accidentals reference
/// two independent Poisson streams at rate `mean_rate` are compared, whose
/// pair rate grows like `2 * window * rate_a * rate_b` for small windows.
/// Spin-pair models carry no emission timing and are rejected.
pub fn window_sweep(
    source: SweepSource,
    windows: &[f64],
    mean_rate: f64,
    n_events: u64,
    seed: u64,
    jitter: f64,
) -> Result<Vec<(f64, f64)>> {
    if windows.is_empty() {
        return Err(Error::input("window sweep needs at least one window".to_string()));
    }
    if windows.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::input("windows must be non-negative times".to_string()));
    }
    if windows.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("windows must be strictly ascending".to_string()));
    }
    let streams = match source {
        SweepSource::Pairs(model) => {
            // A quarter-turn separation keeps all four channel combinations
            // populated; the total pair rate does not depend on it.
            paired_click_streams(
                model,
                std::f64::consts::FRAC_PI_4,
                n_events,
                mean_rate,
                1.0,
                jitter,
                seed,
            )?
        }
        SweepSource::Accidentals => {
            if !mean_rate.is_finite() || mean_rate <= 0.0 {
                return Err(Error::config(format!(
                    "mean_rate must be a positive finite click rate, got {mean_rate}"
                )));
            }
            let duration = n_events as f64 / mean_rate;
            let a = poisson_clicks(Station::A, mean_rate, duration, seed, rng::role::SOURCE)?;
            let b =
                poisson_clicks(Station::B, mean_rate, duration, seed, rng::role::SECOND_SOURCE)?;
            ClickStreams { a, b, duration }
        }
    };
    let mut out = Vec::with_capacity(windows.len());
    for &w in windows {
        let counts = count_coincidences(&streams.a, &streams.b, w, streams.duration)?;
        out.push((w, counts.total_pairs() as f64 / streams.duration));
    }
    Ok(out)
}

fn lambda_field(rec: &EventRecord) -> String {
    match &rec.lambda_tag {
        Some(l) => l.to_string(),
        None => "-".to_string(),
    }
}

/// Renders a click stream as CSV with fixed 9-digit time formatting, so the
/// same stream always serializes to the same bytes.
pub fn event_csv(records: &[EventRecord]) -> String {
    let mut out = String::from("time,station,channel,lambda\n");
    for r in records {
        out.push_str(&format!(
            "{:.9},{},{},{}\n",
            r.time,
            r.station,
            r.channel.sign(),
            lambda_field(r)
        ));
    }
    out
}

pub fn write_event_csv(path: &Path, records: &[EventRecord]) -> Result<()> {
    std::fs::write(path, event_csv(records))?;
    Ok(())
}
