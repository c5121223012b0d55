//! Per-press waveform characteristics.
//!
//! Six values are taken from every press: peak displacement, press length,
//! plateau length, attack gradient, decay gradient and mean displacement.
//! The plateau is the span between the first and last samples that fall
//! within the three highest codes reached by the press, which absorbs the
//! single-level jitter seen on a held key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{AdcCode, PressWaveform};

/// Codes within this distance of the peak count as plateau.
pub const PLATEAU_BAND: u16 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("press waveform has no samples")]
    EmptyWaveform,
}

/// The six per-press characteristics, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    SMax,
    TMax,
    Plateau,
    Attack,
    Decay,
    Mean,
}

impl Characteristic {
    pub const ALL: [Characteristic; 6] = [
        Characteristic::SMax,
        Characteristic::TMax,
        Characteristic::Plateau,
        Characteristic::Attack,
        Characteristic::Decay,
        Characteristic::Mean,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Characteristic::SMax => "s_max",
            Characteristic::TMax => "t_max",
            Characteristic::Plateau => "plateau",
            Characteristic::Attack => "attack",
            Characteristic::Decay => "decay",
            Characteristic::Mean => "mean",
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Characteristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Characteristic::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown characteristic `{s}`"))
    }
}

/// Where the plateau of a press begins and ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlateauBounds {
    /// Index of the first in-band sample.
    pub t_first: usize,
    /// One past the index of the last in-band sample.
    pub t_after: usize,
    pub s_first: AdcCode,
    pub s_last: AdcCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub s_max: u16,
    pub t_max: usize,
    pub plateau: usize,
    /// Rise gradient, codes per sample.
    pub attack: f64,
    /// Fall gradient, codes per sample.
    pub decay: f64,
    pub mean: f64,
}

impl FeatureVector {
    pub fn get(&self, c: Characteristic) -> f64 {
        match c {
            Characteristic::SMax => f64::from(self.s_max),
            Characteristic::TMax => self.t_max as f64,
            Characteristic::Plateau => self.plateau as f64,
            Characteristic::Attack => self.attack,
            Characteristic::Decay => self.decay,
            Characteristic::Mean => self.mean,
        }
    }

    pub fn to_array(&self) -> [f64; Characteristic::COUNT] {
        Characteristic::ALL.map(|c| self.get(c))
    }
}

/// Locates the plateau of a non-empty sample slice.
pub fn plateau_bounds_of(samples: &[AdcCode]) -> Result<PlateauBounds, FeatureError> {
    let peak = samples.iter().copied().max().ok_or(FeatureError::EmptyWaveform)?;
    let floor = peak.value().saturating_sub(PLATEAU_BAND);
    let in_band = |c: &AdcCode| c.value() >= floor;

    // The peak itself is always in band, so both searches succeed.
    let t_first = samples.iter().position(in_band).ok_or(FeatureError::EmptyWaveform)?;
    let t_last = samples.iter().rposition(in_band).ok_or(FeatureError::EmptyWaveform)?;
    Ok(PlateauBounds {
        t_first,
        t_after: t_last + 1,
        s_first: samples[t_first],
        s_last: samples[t_last],
    })
}

pub fn plateau_bounds(w: &PressWaveform) -> Result<PlateauBounds, FeatureError> {
    plateau_bounds_of(&w.samples)
}

pub fn extract_features(w: &PressWaveform) -> Result<FeatureVector, FeatureError> {
    features_of(&w.samples)
}

/// Computes the six characteristics of a sample slice.
///
/// Attack and decay divide by the sample counts before and after the
/// plateau; a press that starts or ends on its plateau uses a count of 1.
pub fn features_of(samples: &[AdcCode]) -> Result<FeatureVector, FeatureError> {
    let bounds = plateau_bounds_of(samples)?;
    let t_max = samples.len();
    let s_max = samples.iter().map(|c| c.value()).max().unwrap_or(0);
    let total: u64 = samples.iter().map(|c| u64::from(c.value())).sum();

    let rise = bounds.t_first.max(1);
    let fall = (t_max - bounds.t_after).max(1);

    Ok(FeatureVector {
        s_max,
        t_max,
        plateau: bounds.t_after - bounds.t_first,
        attack: f64::from(bounds.s_first.value()) / rise as f64,
        decay: f64::from(bounds.s_last.value()) / fall as f64,
        mean: total as f64 / t_max as f64,
    })
}
