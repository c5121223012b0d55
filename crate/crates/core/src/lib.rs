//! Keystroke-dynamics authentication for an analog number pad.
//!
//! Each key is sampled by a 10-bit converter while a comparator flags the
//! press. Per-press waveform characteristics feed two scorers: a
//! percentage-difference comparison against training means, and a
//! band-ratio probability estimate against background users. Per-user
//! thresholds are calibrated on labeled attempts and error rates are
//! aggregated across a study.

pub mod calibrate;
pub mod classify;
pub mod eval;
pub mod features;
pub mod signal;
pub mod simulate;
pub mod store;

pub use calibrate::{
    aggregate, far_frr, ideal_threshold, Direction, EvalReport, Rate, ReportRow, ScoreSet, ThresholdResult,
};
pub use classify::{verify, Decision, EnrollOptions, Method, Password, Score, UserProfile};
pub use features::{extract_features, Characteristic, FeatureVector};
pub use signal::{AdcCode, EntryAttempt, KeyChannelStream, KeyLabel, PressWaveform};
