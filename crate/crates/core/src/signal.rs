//! Digitization front end: the per-key comparator, the 10-bit quantizer and
//! segmentation of continuous key channels into discrete presses.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Full-scale code of the 10-bit converter.
pub const ADC_MAX: u16 = 1023;

/// Lowest code reported while a key's comparator output is on.
pub const DEFAULT_COMPARATOR_THRESHOLD: AdcCode = AdcCode(10);

/// Runs shorter than this are treated as jitter, not presses.
pub const DEFAULT_MIN_PRESS_LEN: usize = 3;

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("displacement fraction {0} is outside [0, 1]")]
    Domain(f64),
    #[error("ADC code {0} exceeds the 10-bit range")]
    CodeOutOfRange(u32),
    #[error("key label {0} is not a digit")]
    InvalidKey(u8),
    #[error("stream for key {0} is empty")]
    EmptyStream(u8),
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("streams disagree on sample rate or length")]
    MismatchedStreams,
    #[error("press on key {first_key} at {first_start} overlaps press on key {second_key} at {second_start}")]
    OverlappingPresses {
        first_key: u8,
        first_start: usize,
        second_key: u8,
        second_start: usize,
    },
}

/// A 10-bit displacement code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct AdcCode(u16);

impl AdcCode {
    pub const ZERO: AdcCode = AdcCode(0);
    pub const MAX: AdcCode = AdcCode(ADC_MAX);

    pub fn new(value: u16) -> Result<Self, SignalError> {
        if value > ADC_MAX {
            return Err(SignalError::CodeOutOfRange(value.into()));
        }
        Ok(Self(value))
    }

    /// Clamps `value` into the converter range.
    pub fn saturating(value: i64) -> Self {
        Self(value.clamp(0, ADC_MAX.into()) as u16)
    }

    pub fn value(self) -> u16 {
        self.0
    }
}

impl TryFrom<u16> for AdcCode {
    type Error = SignalError;

    fn try_from(value: u16) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AdcCode> for u16 {
    fn from(code: AdcCode) -> u16 {
        code.0
    }
}

impl fmt::Display for AdcCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A number-pad key, 0 through 9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct KeyLabel(u8);

impl KeyLabel {
    pub fn new(digit: u8) -> Result<Self, SignalError> {
        if digit > 9 {
            return Err(SignalError::InvalidKey(digit));
        }
        Ok(Self(digit))
    }

    pub fn digit(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for KeyLabel {
    type Error = SignalError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<KeyLabel> for u8 {
    fn from(key: KeyLabel) -> u8 {
        key.0
    }
}

impl fmt::Display for KeyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Continuously sampled output of one key's converter channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyChannelStream {
    key: KeyLabel,
    codes: Vec<AdcCode>,
    sample_rate_hz: u32,
}

impl KeyChannelStream {
    pub fn new(key: KeyLabel, codes: Vec<AdcCode>, sample_rate_hz: u32) -> Result<Self, SignalError> {
        if codes.is_empty() {
            return Err(SignalError::EmptyStream(key.digit()));
        }
        if sample_rate_hz == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        Ok(Self {
            key,
            codes,
            sample_rate_hz,
        })
    }

    pub fn key(&self) -> KeyLabel {
        self.key
    }

    pub fn codes(&self) -> &[AdcCode] {
        &self.codes
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }
}

/// One key press: the samples recorded while the comparator was on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PressWaveform {
    pub key: KeyLabel,
    pub samples: Vec<AdcCode>,
    /// Global index of the first sample within the recording.
    pub start_index: usize,
}

impl PressWaveform {
    pub fn new(key: KeyLabel, samples: Vec<AdcCode>, start_index: usize) -> Self {
        Self {
            key,
            samples,
            start_index,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One past the global index of the last sample.
    pub fn end_index(&self) -> usize {
        self.start_index + self.samples.len()
    }
}

/// The presses of one password entry, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EntryAttempt {
    presses: Vec<PressWaveform>,
}

impl EntryAttempt {
    /// Builds an entry, rejecting presses that overlap or are out of order.
    pub fn new(presses: Vec<PressWaveform>) -> Result<Self, SignalError> {
        for pair in presses.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.start_index < a.end_index() {
                return Err(SignalError::OverlappingPresses {
                    first_key: a.key.digit(),
                    first_start: a.start_index,
                    second_key: b.key.digit(),
                    second_start: b.start_index,
                });
            }
        }
        Ok(Self { presses })
    }

    /// Lays presses out back to back starting at sample 0.
    pub fn from_waveforms<I>(presses: I) -> Self
    where
        I: IntoIterator<Item = (KeyLabel, Vec<AdcCode>)>,
    {
        let mut offset = 0;
        let presses = presses
            .into_iter()
            .map(|(key, samples)| {
                let press = PressWaveform::new(key, samples, offset);
                offset = press.end_index();
                press
            })
            .collect();
        Self { presses }
    }

    pub fn presses(&self) -> &[PressWaveform] {
        &self.presses
    }

    pub fn len(&self) -> usize {
        self.presses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.presses.is_empty()
    }

    pub fn keys(&self) -> Vec<KeyLabel> {
        self.presses.iter().map(|p| p.key).collect()
    }

    pub fn into_presses(self) -> Vec<PressWaveform> {
        self.presses
    }
}

/// Comparator output for a single sample.
pub fn comparator_state(code: AdcCode, threshold: AdcCode) -> bool {
    code >= threshold
}

/// Finds every maximal run of on-samples at least `min_len` long.
///
/// `min_len` of 0 is treated as 1.
pub fn segment_presses(stream: &KeyChannelStream, threshold: AdcCode, min_len: usize) -> Vec<PressWaveform> {
    let min_len = min_len.max(1);
    let codes = stream.codes();
    let mut presses = Vec::new();
    let mut run_start: Option<usize> = None;

    let close = |start: usize, end: usize, presses: &mut Vec<PressWaveform>| {
        if end - start >= min_len {
            presses.push(PressWaveform::new(stream.key(), codes[start..end].to_vec(), start));
        }
    };

    for (i, &code) in codes.iter().enumerate() {
        match (comparator_state(code, threshold), run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(start)) => {
                close(start, i, &mut presses);
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(start) = run_start {
        close(start, codes.len(), &mut presses);
    }
    presses
}

/// Segments every channel and merges the presses into one time-ordered entry.
pub fn assemble_entry(
    streams: &[KeyChannelStream],
    threshold: AdcCode,
    min_len: usize,
) -> Result<EntryAttempt, SignalError> {
    if let Some(first) = streams.first() {
        let mismatched = streams
            .iter()
            .any(|s| s.sample_rate_hz() != first.sample_rate_hz() || s.codes().len() != first.codes().len());
        if mismatched {
            return Err(SignalError::MismatchedStreams);
        }
    }

    let mut presses: Vec<PressWaveform> = streams
        .iter()
        .flat_map(|s| segment_presses(s, threshold, min_len))
        .collect();
    presses.sort_by_key(|p| (p.start_index, p.key));
    EntryAttempt::new(presses)
}

/// Maps a fraction of full key travel onto a converter code.
pub fn quantize(displacement_fraction: f64) -> Result<AdcCode, SignalError> {
    if !(0.0..=1.0).contains(&displacement_fraction) {
        return Err(SignalError::Domain(displacement_fraction));
    }
    let code = (displacement_fraction * f64::from(ADC_MAX)).floor();
    Ok(AdcCode::saturating(code as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codes(values: &[u16]) -> Vec<AdcCode> {
        values.iter().map(|&v| AdcCode::new(v).unwrap()).collect()
    }

    fn key(d: u8) -> KeyLabel {
        KeyLabel::new(d).unwrap()
    }

    fn stream(k: u8, values: &[u16]) -> KeyChannelStream {
        KeyChannelStream::new(key(k), codes(values), 1000).unwrap()
    }

    fn th() -> AdcCode {
        DEFAULT_COMPARATOR_THRESHOLD
    }

    #[test]
    fn comparator_examples() {
        assert!(!comparator_state(AdcCode::ZERO, th()));
        assert!(comparator_state(AdcCode::new(10).unwrap(), th()));
        assert!(comparator_state(AdcCode::MAX, th()));
    }

    #[test]
    fn code_range_is_ten_bits() {
        assert!(AdcCode::new(1023).is_ok());
        assert_eq!(AdcCode::new(1024), Err(SignalError::CodeOutOfRange(1024)));
        assert_eq!(KeyLabel::new(10), Err(SignalError::InvalidKey(10)));
    }

    #[test]
    fn segments_single_press() {
        let s = stream(4, &[0, 0, 12, 50, 80, 12, 0, 0]);
        let presses = segment_presses(&s, th(), 2);
        assert_eq!(presses.len(), 1);
        assert_eq!(presses[0].samples, codes(&[12, 50, 80, 12]));
        assert_eq!(presses[0].start_index, 2);
        assert_eq!(presses[0].key, key(4));
    }

    #[test]
    fn resting_stream_has_no_presses() {
        let s = stream(1, &[0; 16]);
        assert!(segment_presses(&s, th(), 3).is_empty());
    }

    #[test]
    fn glitches_are_discarded() {
        let s = stream(1, &[0, 10, 0, 0, 10, 0]);
        assert!(segment_presses(&s, th(), 3).is_empty());
    }

    #[test]
    fn press_running_to_end_of_stream_is_kept() {
        let s = stream(2, &[0, 0, 20, 30, 40]);
        let presses = segment_presses(&s, th(), 3);
        assert_eq!(presses.len(), 1);
        assert_eq!(presses[0].start_index, 2);
        assert_eq!(presses[0].len(), 3);
    }

    #[test]
    fn stream_validation() {
        assert_eq!(
            KeyChannelStream::new(key(3), vec![], 1000),
            Err(SignalError::EmptyStream(3))
        );
        assert_eq!(
            KeyChannelStream::new(key(3), codes(&[0]), 0),
            Err(SignalError::ZeroSampleRate)
        );
    }

    #[test]
    fn assemble_orders_by_start() {
        let mut a = vec![0u16; 60];
        let mut b = vec![0u16; 60];
        for v in &mut b[5..15] {
            *v = 100;
        }
        for v in &mut a[40..50] {
            *v = 100;
        }
        let entry = assemble_entry(&[stream(7, &a), stream(3, &b)], th(), 3).unwrap();
        assert_eq!(entry.keys(), vec![key(3), key(7)]);
        assert_eq!(entry.presses()[0].start_index, 5);
        assert_eq!(entry.presses()[1].start_index, 40);
    }

    #[test]
    fn assemble_empty() {
        let entry = assemble_entry(&[stream(0, &[0, 0, 5, 0])], th(), 3).unwrap();
        assert!(entry.is_empty());
    }

    #[test]
    fn assemble_rejects_overlap() {
        let mut a = vec![0u16; 30];
        let mut b = vec![0u16; 30];
        for v in &mut a[5..=20] {
            *v = 100;
        }
        for v in &mut b[10..=25] {
            *v = 100;
        }
        let err = assemble_entry(&[stream(1, &a), stream(2, &b)], th(), 3).unwrap_err();
        assert!(matches!(
            err,
            SignalError::OverlappingPresses {
                first_key: 1,
                second_key: 2,
                ..
            }
        ));
    }

    #[test]
    fn assemble_rejects_mismatched_streams() {
        let a = KeyChannelStream::new(key(1), codes(&[0, 0, 0]), 1000).unwrap();
        let b = KeyChannelStream::new(key(2), codes(&[0, 0, 0]), 500).unwrap();
        let c = KeyChannelStream::new(key(2), codes(&[0, 0]), 1000).unwrap();
        assert_eq!(
            assemble_entry(&[a.clone(), b], th(), 3),
            Err(SignalError::MismatchedStreams)
        );
        assert_eq!(assemble_entry(&[a, c], th(), 3), Err(SignalError::MismatchedStreams));
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.0).unwrap().value(), 0);
        assert_eq!(quantize(1.0).unwrap().value(), 1023);
        assert_eq!(quantize(0.5).unwrap().value(), 511);
        assert!(matches!(quantize(1.5), Err(SignalError::Domain(_))));
        assert!(matches!(quantize(-0.1), Err(SignalError::Domain(_))));
        assert!(quantize(f64::NAN).is_err());
    }

    #[test]
    fn entry_rejects_out_of_order_presses() {
        let p1 = PressWaveform::new(key(1), codes(&[20, 20, 20]), 10);
        let p2 = PressWaveform::new(key(2), codes(&[20, 20, 20]), 11);
        assert!(EntryAttempt::new(vec![p1.clone(), p2]).is_err());
        let p3 = PressWaveform::new(key(2), codes(&[20, 20, 20]), 13);
        assert!(EntryAttempt::new(vec![p1, p3]).is_ok());
    }

    proptest! {
        #[test]
        fn segmentation_is_a_maximal_partition(
            values in proptest::collection::vec(0u16..=40, 1..300),
            min_len in 1usize..6,
        ) {
            let s = stream(5, &values);
            let presses = segment_presses(&s, th(), min_len);
            let mut last_end = 0;
            for p in &presses {
                prop_assert!(p.start_index >= last_end);
                prop_assert!(p.len() >= min_len);
                prop_assert!(p.samples.iter().all(|&c| comparator_state(c, th())));
                if p.start_index > 0 {
                    prop_assert!(!comparator_state(s.codes()[p.start_index - 1], th()));
                }
                if p.end_index() < values.len() {
                    prop_assert!(!comparator_state(s.codes()[p.end_index()], th()));
                }
                last_end = p.end_index();
            }
        }

        #[test]
        fn resegmenting_a_press_is_identity(
            values in proptest::collection::vec(0u16..=40, 1..300),
        ) {
            let s = stream(8, &values);
            for p in segment_presses(&s, th(), 1) {
                let inner = KeyChannelStream::new(p.key, p.samples.clone(), 1000).unwrap();
                let again = segment_presses(&inner, th(), 1);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].samples, &p.samples);
                prop_assert_eq!(again[0].start_index, 0);
            }
        }

        #[test]
        fn quantize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize(lo).unwrap() <= quantize(hi).unwrap());
        }
    }
}
