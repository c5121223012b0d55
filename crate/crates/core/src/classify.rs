//! Enrollment and the two verification scorers.
//!
//! The averaging scorer compares an attempt against the per-digit means of
//! the training repetitions and sums percentage differences, so lower is
//! better. The probability scorer bins every characteristic into bands,
//! counts how often background and (normalized) training presses land in
//! each band, and averages the training share of the bands the attempt
//! falls into, so higher is better.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_features, Characteristic, FeatureError, FeatureVector};
use crate::signal::{EntryAttempt, KeyLabel, SignalError, ADC_MAX};

/// Band count used by the probability model unless configured otherwise.
pub const DEFAULT_BANDS: usize = 10;

/// Ratio reported for a band no press has ever landed in.
pub const UNINFORMATIVE_RATIO: f64 = 0.5;

/// Initial probability threshold before calibration.
pub const DEFAULT_PROB_THRESHOLD: f64 = 0.5;

/// Initial averaging threshold as a multiple of the worst training self-score.
pub const DEFAULT_AVG_THRESHOLD_FACTOR: f64 = 1.5;

const N_CHAR: usize = Characteristic::COUNT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("no training entries")]
    EmptyTraining,
    #[error("no background entries")]
    EmptyBackground,
    #[error("entry has no presses")]
    EmptyEntry,
    #[error("entry {index} has key sequence {found}, expected {expected}")]
    InconsistentEntries {
        index: usize,
        expected: Password,
        found: Password,
    },
    #[error("attempt key sequence {found} does not match model sequence {expected}")]
    LabelMismatch { expected: Password, found: Password },
    #[error("band count must be at least 2, got {0}")]
    InvalidBands(usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("invalid password: {0}")]
    InvalidPassword(String),
}

/// A digit passcode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Password(Vec<KeyLabel>);

impl Password {
    pub fn new(keys: Vec<KeyLabel>) -> Self {
        Self(keys)
    }

    pub fn keys(&self) -> &[KeyLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn of(entry: &EntryAttempt) -> Self {
        Self(entry.keys())
    }
}

impl FromStr for Password {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ClassifyError::InvalidPassword("empty".into()));
        }
        s.chars()
            .map(|ch| {
                ch.to_digit(10)
                    .ok_or_else(|| ClassifyError::InvalidPassword(format!("`{ch}` is not a digit")))
                    .and_then(|d| {
                        KeyLabel::new(d as u8).map_err(|e: SignalError| ClassifyError::InvalidPassword(e.to_string()))
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Password)
    }
}

impl TryFrom<String> for Password {
    type Error = ClassifyError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Password> for String {
    fn from(p: Password) -> String {
        p.to_string()
    }
}

impl fmt::Display for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in &self.0 {
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Summed percentage difference from the training means.
    Avg,
    /// Mean band ratio against background data.
    Prob,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Prob, Method::Avg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Avg => "avg",
            Method::Prob => "prob",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avg" => Ok(Method::Avg),
            "prob" => Ok(Method::Prob),
            other => Err(format!("unknown method `{other}` (expected avg or prob)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub method: Method,
    pub value: f64,
    pub per_characteristic: [f64; N_CHAR],
}

/// Features of every press in an entry, in press order.
pub fn entry_features(entry: &EntryAttempt) -> Result<Vec<FeatureVector>, FeatureError> {
    entry.presses().iter().map(extract_features).collect()
}

fn check_consistent(password: &Password, entries: &[EntryAttempt]) -> Result<(), ClassifyError> {
    for (index, e) in entries.iter().enumerate() {
        if e.keys() != password.keys() {
            return Err(ClassifyError::InconsistentEntries {
                index,
                expected: password.clone(),
                found: Password::of(e),
            });
        }
    }
    Ok(())
}

fn check_attempt(password: &Password, attempt: &EntryAttempt) -> Result<(), ClassifyError> {
    if attempt.keys() != password.keys() {
        return Err(ClassifyError::LabelMismatch {
            expected: password.clone(),
            found: Password::of(attempt),
        });
    }
    Ok(())
}

fn training_password(training: &[EntryAttempt]) -> Result<Password, ClassifyError> {
    let first = training.first().ok_or(ClassifyError::EmptyTraining)?;
    if first.is_empty() {
        return Err(ClassifyError::EmptyEntry);
    }
    let password = Password::of(first);
    check_consistent(&password, training)?;
    Ok(password)
}

fn features_all(entries: &[EntryAttempt]) -> Result<Vec<Vec<FeatureVector>>, ClassifyError> {
    entries
        .iter()
        .map(|e| entry_features(e).map_err(ClassifyError::from))
        .collect()
}

/// Per-digit means of the training characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgModel {
    pub password: Password,
    pub means: Vec<[f64; N_CHAR]>,
}

impl AvgModel {
    /// Builds the model from per-repetition feature rows, one row per entry.
    pub fn from_features(password: Password, training: &[Vec<FeatureVector>]) -> Result<Self, ClassifyError> {
        if training.is_empty() {
            return Err(ClassifyError::EmptyTraining);
        }
        let n = training.len() as f64;
        // Summing in sorted order makes the mean independent of entry order.
        let means = (0..password.len())
            .map(|i| {
                Characteristic::ALL.map(|c| {
                    let mut values: Vec<f64> = training.iter().map(|rep| rep[i].get(c)).collect();
                    values.sort_by(f64::total_cmp);
                    values.iter().sum::<f64>() / n
                })
            })
            .collect();
        Ok(Self { password, means })
    }

    pub fn score_features(&self, features: &[FeatureVector]) -> Score {
        let digits = self.means.len() as f64;
        let mut per_characteristic = [0.0; N_CHAR];
        for (mean, x) in self.means.iter().zip(features) {
            for (c, acc) in per_characteristic.iter_mut().enumerate() {
                let m = mean[c];
                *acc += (x.to_array()[c] - m).abs() / m.abs().max(1.0) * 100.0;
            }
        }
        for v in &mut per_characteristic {
            *v /= digits;
        }
        Score {
            method: Method::Avg,
            value: per_characteristic.iter().sum(),
            per_characteristic,
        }
    }
}

pub fn train_avg(training: &[EntryAttempt]) -> Result<AvgModel, ClassifyError> {
    let password = training_password(training)?;
    AvgModel::from_features(password, &features_all(training)?)
}

pub fn score_avg(model: &AvgModel, attempt: &EntryAttempt) -> Result<Score, ClassifyError> {
    check_attempt(&model.password, attempt)?;
    Ok(model.score_features(&entry_features(attempt)?))
}

/// Ascending band edges; the outermost bands extend to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandEdges(Vec<f64>);

impl BandEdges {
    /// Fixed peak-displacement bands: under 100, 100-199, ... , 900 and over.
    pub fn peak_displacement() -> Self {
        let mut edges: Vec<f64> = (0..10).map(|i| f64::from(i * 100)).collect();
        edges.push(f64::from(ADC_MAX) + 1.0);
        Self(edges)
    }

    /// `bands` equal-width bands spanning `[min, max]`.
    pub fn equal_width(min: f64, max: f64, bands: usize) -> Self {
        let (lo, hi) = if min == max { (min - 0.5, max + 0.5) } else { (min, max) };
        let width = hi - lo;
        let mut edges: Vec<f64> = (0..bands).map(|i| lo + width * i as f64 / bands as f64).collect();
        edges.push(hi);
        Self(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn bands(&self) -> usize {
        self.0.len() - 1
    }

    /// Index of the band containing `value`, clamped to the outer bands.
    pub fn band_of(&self, value: f64) -> usize {
        let interior = &self.0[1..self.0.len() - 1];
        interior.partition_point(|&edge| edge <= value)
    }
}

/// Band edges per digit position and characteristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandLayout {
    pub digits: Vec<[BandEdges; N_CHAR]>,
}

impl BandLayout {
    pub fn edges(&self, digit: usize, c: Characteristic) -> &BandEdges {
        &self.digits[digit][c.index()]
    }
}

/// Builds band edges from background feature rows (one row per entry).
///
/// Peak displacement always uses the fixed decade bands; every other
/// characteristic is split into `bands` equal-width bands over its
/// background range at that digit.
pub fn build_layout(background: &[Vec<FeatureVector>], bands: usize) -> Result<BandLayout, ClassifyError> {
    if bands < 2 {
        return Err(ClassifyError::InvalidBands(bands));
    }
    let first = background.first().ok_or(ClassifyError::EmptyBackground)?;
    let digits = (0..first.len())
        .map(|i| {
            Characteristic::ALL.map(|c| {
                if c == Characteristic::SMax {
                    return BandEdges::peak_displacement();
                }
                let (lo, hi) = background
                    .iter()
                    .map(|rep| rep[i].get(c))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                BandEdges::equal_width(lo, hi, bands)
            })
        })
        .collect();
    Ok(BandLayout { digits })
}

type Counts = Vec<[Vec<u32>; N_CHAR]>;

fn count_bands(layout: &BandLayout, rows: &[Vec<FeatureVector>]) -> Counts {
    layout
        .digits
        .iter()
        .enumerate()
        .map(|(i, per_char)| {
            Characteristic::ALL.map(|c| {
                let edges = &per_char[c.index()];
                let mut counts = vec![0u32; edges.bands()];
                for rep in rows {
                    counts[edges.band_of(rep[i].get(c))] += 1;
                }
                counts
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbModel {
    pub password: Password,
    pub layout: BandLayout,
    pub bg_counts: Counts,
    pub train_counts: Counts,
    pub n_background: usize,
    pub n_training: usize,
    /// Weight applied to each training instance so both populations carry equal mass.
    pub norm_factor: f64,
}

impl ProbModel {
    pub fn from_features(
        password: Password,
        background: &[Vec<FeatureVector>],
        training: &[Vec<FeatureVector>],
        bands: usize,
    ) -> Result<Self, ClassifyError> {
        if background.is_empty() {
            return Err(ClassifyError::EmptyBackground);
        }
        if training.is_empty() {
            return Err(ClassifyError::EmptyTraining);
        }
        let layout = build_layout(background, bands)?;
        let bg_counts = count_bands(&layout, background);
        let train_counts = count_bands(&layout, training);
        Ok(Self {
            password,
            layout,
            bg_counts,
            train_counts,
            n_background: background.len(),
            n_training: training.len(),
            norm_factor: background.len() as f64 / training.len() as f64,
        })
    }

    /// Training share of the band `value` falls into.
    pub fn band_ratio(&self, digit: usize, c: Characteristic, value: f64) -> f64 {
        let band = self.layout.edges(digit, c).band_of(value);
        let user = self.norm_factor * f64::from(self.train_counts[digit][c.index()][band]);
        let others = f64::from(self.bg_counts[digit][c.index()][band]);
        if user + others == 0.0 {
            UNINFORMATIVE_RATIO
        } else {
            user / (user + others)
        }
    }

    pub fn score_features(&self, features: &[FeatureVector]) -> Score {
        let digits = features.len() as f64;
        let per_characteristic = Characteristic::ALL.map(|c| {
            features
                .iter()
                .enumerate()
                .map(|(i, f)| self.band_ratio(i, c, f.get(c)))
                .sum::<f64>()
                / digits
        });
        Score {
            method: Method::Prob,
            value: per_characteristic.iter().sum::<f64>() / N_CHAR as f64,
            per_characteristic,
        }
    }
}

pub fn train_prob(
    background: &[EntryAttempt],
    training: &[EntryAttempt],
    bands: usize,
) -> Result<ProbModel, ClassifyError> {
    if background.is_empty() {
        return Err(ClassifyError::EmptyBackground);
    }
    let password = training_password(training)?;
    check_consistent(&password, background)?;
    ProbModel::from_features(password, &features_all(background)?, &features_all(training)?, bands)
}

pub fn score_prob(model: &ProbModel, attempt: &EntryAttempt) -> Result<Score, ClassifyError> {
    check_attempt(&model.password, attempt)?;
    Ok(model.score_features(&entry_features(attempt)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub password: Password,
    pub sample_rate_hz: u32,
    pub training_features: Vec<Vec<FeatureVector>>,
    pub avg_model: AvgModel,
    pub prob_model: ProbModel,
    /// Averaging scores strictly below this are accepted.
    pub threshold_avg: f64,
    /// Probability scores strictly above this are accepted.
    pub threshold_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnrollOptions {
    pub bands: usize,
    pub sample_rate_hz: u32,
}

impl Default for EnrollOptions {
    fn default() -> Self {
        Self {
            bands: DEFAULT_BANDS,
            sample_rate_hz: crate::signal::DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl UserProfile {
    /// Trains both models and sets uncalibrated starting thresholds.
    pub fn enroll(
        user_id: impl Into<String>,
        password: &Password,
        training: &[EntryAttempt],
        background: &[EntryAttempt],
        options: EnrollOptions,
    ) -> Result<Self, ClassifyError> {
        if training.is_empty() {
            return Err(ClassifyError::EmptyTraining);
        }
        if background.is_empty() {
            return Err(ClassifyError::EmptyBackground);
        }
        check_consistent(password, training)?;
        check_consistent(password, background)?;
        let training_features = features_all(training)?;
        let background_features = features_all(background)?;

        let avg_model = AvgModel::from_features(password.clone(), &training_features)?;
        let prob_model = ProbModel::from_features(
            password.clone(),
            &background_features,
            &training_features,
            options.bands,
        )?;
        let worst_self = training_features
            .iter()
            .map(|f| avg_model.score_features(f).value)
            .fold(0.0, f64::max);

        Ok(Self {
            user_id: user_id.into(),
            password: password.clone(),
            sample_rate_hz: options.sample_rate_hz,
            training_features,
            avg_model,
            prob_model,
            threshold_avg: DEFAULT_AVG_THRESHOLD_FACTOR * worst_self,
            threshold_prob: DEFAULT_PROB_THRESHOLD,
        })
    }

    pub fn threshold(&self, method: Method) -> f64 {
        match method {
            Method::Avg => self.threshold_avg,
            Method::Prob => self.threshold_prob,
        }
    }

    pub fn set_threshold(&mut self, method: Method, value: f64) {
        match method {
            Method::Avg => self.threshold_avg = value,
            Method::Prob => self.threshold_prob = value,
        }
    }

    /// Scores an attempt whose key sequence matches the password.
    pub fn score(&self, attempt: &EntryAttempt, method: Method) -> Result<Score, ClassifyError> {
        match method {
            Method::Avg => score_avg(&self.avg_model, attempt),
            Method::Prob => score_prob(&self.prob_model, attempt),
        }
    }

    pub fn accepts(&self, score: &Score) -> bool {
        match score.method {
            Method::Avg => score.value < self.threshold_avg,
            Method::Prob => score.value > self.threshold_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub accepted: bool,
    pub password_ok: bool,
    pub score: Option<Score>,
}

/// Checks the key sequence, then the biometric score against the profile threshold.
pub fn verify(profile: &UserProfile, attempt: &EntryAttempt, method: Method) -> Decision {
    let rejected = Decision {
        accepted: false,
        password_ok: false,
        score: None,
    };
    if attempt.keys() != profile.password.keys() {
        return rejected;
    }
    match profile.score(attempt, method) {
        Ok(score) => Decision {
            accepted: profile.accepts(&score),
            password_ok: true,
            score: Some(score),
        },
        // Only reachable for an empty press, which cannot be scored.
        Err(_) => Decision {
            password_ok: true,
            ..rejected
        },
    }
}
