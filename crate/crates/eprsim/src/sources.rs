//! Pair-emission sources.
//!
//! Each source is a single-owner stateful generator: given `(seed, n_events,
//! mean_rate)` it yields a bit-reproducible stream of correlated pairs, every
//! pair tagged with the hidden state that produced it. Emission times follow
//! a homogeneous Poisson process (independent exponential gaps), so detection
//! can reason about windows and accidental coincidences downstream.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::rng;

/// Per-event hidden state, carried along with every emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HiddenVariable {
    /// Discrete mode pair index: 0 keeps the left arm horizontal, 1 vertical.
    ModeIndex(u8),
    /// Shared orientation of an independent-signal pair, in [0, pi).
    Orientation(f64),
    /// Spin axis in spherical coordinates: polar in [0, pi], azimuth in [0, 2pi).
    SpinAxis { polar: f64, azimuth: f64 },
}

impl fmt::Display for HiddenVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HiddenVariable::ModeIndex(n) => write!(f, "{n}"),
            HiddenVariable::Orientation(nu) => write!(f, "{nu:.9}"),
            HiddenVariable::SpinAxis { polar, azimuth } => write!(f, "{polar:.9};{azimuth:.9}"),
        }
    }
}

/// Transverse field amplitude with horizontal and vertical components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub h: f64,
    pub v: f64,
}

impl FieldVector {
    pub fn new(h: f64, v: f64) -> Self {
        FieldVector { h, v }
    }

    /// Unit field polarized along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        FieldVector { h: angle.cos(), v: angle.sin() }
    }

    pub fn dot(self, other: FieldVector) -> f64 {
        self.h * other.h + self.v * other.v
    }

    pub fn norm_sq(self) -> f64 {
        self.h * self.h + self.v * self.v
    }

    /// Polarization angle folded into [0, pi); undefined for the zero field.
    pub fn angle(self) -> f64 {
        self.v.atan2(self.h).rem_euclid(PI)
    }
}

/// One two-arm optical emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEmission {
    pub left: FieldVector,
    pub right: FieldVector,
    pub lambda: HiddenVariable,
    pub emit_time: f64,
}

/// One two-arm spin emission; the partner axis is the exact negation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPairEmission {
    pub s1: [f64; 3],
    pub s2: [f64; 3],
    pub lambda: HiddenVariable,
}

/// Homogeneous Poisson clock: strictly increasing times with exponential gaps.
#[derive(Debug)]
struct PoissonClock {
    gap: Exp<f64>,
    now: f64,
}

impl PoissonClock {
    fn new(mean_rate: f64) -> Result<Self> {
        if !mean_rate.is_finite() || mean_rate <= 0.0 {
            return Err(Error::config(format!(
                "mean_rate must be a positive finite emission rate, got {mean_rate}"
            )));
        }
        Ok(PoissonClock { gap: Exp::new(mean_rate).expect("validated rate"), now: 0.0 })
    }

    fn tick(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let mut next = self.now + self.gap.sample(rng);
        // An underflowing gap must still advance the clock.
        if next <= self.now {
            next = self.now * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE;
        }
        self.now = next;
        next
    }
}

/// Exact field pair for a mode index. Built from literals rather than
/// trigonometry so the two arms are orthogonal exactly, not just to rounding.
pub fn locked_pair(n: u8) -> (FieldVector, FieldVector) {
    if n == 0 {
        (FieldVector::new(1.0, 0.0), FieldVector::new(0.0, -1.0))
    } else {
        (FieldVector::new(0.0, 1.0), FieldVector::new(1.0, 0.0))
    }
}

/// Source of pairs locked to the frame axes: the left arm is horizontal and
/// the right vertical (mode 0) or vice versa (mode 1), with the mode index
/// redrawn independently for every pair.
#[derive(Debug)]
pub struct LockedModeSource {
    rng: ChaCha8Rng,
    clock: PoissonClock,
    remaining: u64,
}

pub fn locked_mode_source(seed: u64, n_events: u64, mean_rate: f64) -> Result<LockedModeSource> {
    Ok(LockedModeSource {
        rng: rng::stream(seed, rng::role::SOURCE),
        clock: PoissonClock::new(mean_rate)?,
        remaining: n_events,
    })
}

impl Iterator for LockedModeSource {
    type Item = PairEmission;

    fn next(&mut self) -> Option<PairEmission> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = u8::from(self.rng.random::<bool>());
        let (left, right) = locked_pair(n);
        Some(PairEmission {
            left,
            right,
            lambda: HiddenVariable::ModeIndex(n),
            emit_time: self.clock.tick(&mut self.rng),
        })
    }
}

/// Source of independent single-mode signals: both arms share one uniformly
/// random orientation nu, the right arm rotated a quarter turn from the left.
#[derive(Debug)]
pub struct FurrySource {
    rng: ChaCha8Rng,
    clock: PoissonClock,
    remaining: u64,
}

pub fn furry_source(seed: u64, n_events: u64, mean_rate: f64) -> Result<FurrySource> {
    Ok(FurrySource {
        rng: rng::stream(seed, rng::role::SOURCE),
        clock: PoissonClock::new(mean_rate)?,
        remaining: n_events,
    })
}

impl Iterator for FurrySource {
    type Item = PairEmission;

    fn next(&mut self) -> Option<PairEmission> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let nu = self.rng.random::<f64>() * PI;
        let left = FieldVector::from_angle(nu);
        // Quarter-turn rotation of `left`; reusing its components makes the
        // dot product cancel exactly.
        let right = FieldVector::new(-left.v, left.h);
        Some(PairEmission {
            left,
            right,
            lambda: HiddenVariable::Orientation(nu),
            emit_time: self.clock.tick(&mut self.rng),
        })
    }
}

/// Source of anti-aligned classical spin pairs with the axis uniform on the
/// sphere: the polar angle comes from inverse-CDF sampling of the sin-weighted
/// measure, the azimuth is uniform. Spin pairs carry no emission timing.
#[derive(Debug)]
pub struct BarutSource {
    rng: ChaCha8Rng,
    remaining: u64,
}

pub fn barut_source(seed: u64, n_events: u64) -> BarutSource {
    BarutSource { rng: rng::stream(seed, rng::role::SOURCE), remaining: n_events }
}

impl Iterator for BarutSource {
    type Item = SpinPairEmission;

    fn next(&mut self) -> Option<SpinPairEmission> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let polar = (1.0 - 2.0 * self.rng.random::<f64>()).acos();
        let azimuth = self.rng.random::<f64>() * TAU;
        let (sp, cp) = polar.sin_cos();
        let s1 = [sp * azimuth.cos(), sp * azimuth.sin(), cp];
        let s2 = [-s1[0], -s1[1], -s1[2]];
        Some(SpinPairEmission {
            s1,
            s2,
            lambda: HiddenVariable::SpinAxis { polar, azimuth },
        })
    }
}
