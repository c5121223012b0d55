//! Synthetic users and press waveforms for desk-scale studies.
//!
//! Each simulated user is an archetype: per-key distributions of press
//! depth, press length and plateau share. Presses are jittered trapezoids
//! (linear rise, held plateau, linear fall) quantized to 10-bit codes.
//! Every user owns an independent random substream derived from the study
//! seed, so a dataset does not depend on the order users are generated in.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Password;
use crate::signal::{
    quantize, AdcCode, EntryAttempt, KeyChannelStream, KeyLabel, PressWaveform, ADC_MAX, DEFAULT_COMPARATOR_THRESHOLD,
};
use crate::store::Dataset;

/// The password typed in every default study.
pub const DEFAULT_PASSWORD: &str = "6193225307";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("invalid archetype for key {key}: {reason}")]
    InvalidArchetype { key: u8, reason: &'static str },
    #[error("invalid study config: {0}")]
    InvalidConfig(&'static str),
    #[error("dataset user `{0}` does not follow the study naming scheme")]
    UnknownRole(String),
    #[error("subject `{0}` is missing its {1} entries")]
    IncompleteSubject(String, &'static str),
}

/// How one user presses one key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyStyle {
    pub depth_mean: f64,
    pub depth_std: f64,
    pub press_len_mean: f64,
    pub press_len_std: f64,
    pub plateau_frac_mean: f64,
    pub plateau_frac_std: f64,
    /// Share of the press spent rising.
    pub attack_frac: f64,
    /// Plateau jitter amplitude in codes.
    pub jitter_amp: u16,
}

impl KeyStyle {
    fn validate(&self, key: u8) -> Result<(), SimulateError> {
        let fail = |reason| Err(SimulateError::InvalidArchetype { key, reason });
        let floor = f64::from(DEFAULT_COMPARATOR_THRESHOLD.value() + 3);
        if !(floor..=f64::from(ADC_MAX)).contains(&self.depth_mean) {
            return fail("depth_mean outside [threshold + 3, 1023]");
        }
        if self.press_len_mean < 10.0 {
            return fail("press_len_mean below 10 samples");
        }
        if !(self.plateau_frac_mean > 0.0 && self.plateau_frac_mean < 1.0) {
            return fail("plateau_frac_mean outside (0, 1)");
        }
        if !(self.attack_frac > 0.0 && self.attack_frac + self.plateau_frac_mean < 1.0) {
            return fail("attack_frac + plateau_frac_mean must be in (0, 1)");
        }
        if self.depth_std < 0.0 || self.press_len_std < 0.0 || self.plateau_frac_std < 0.0 {
            return fail("negative standard deviation");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserArchetype {
    pub keys: [KeyStyle; 10],
    /// Relative spread of a whole entry's typing speed.
    pub entry_tempo_std: f64,
    /// Relative spread of a whole entry's press depth.
    pub entry_force_std: f64,
    /// Chance that a press is an outlier: pushed to full travel or held far longer.
    pub outlier_rate: f64,
}

impl UserArchetype {
    /// Archetype with no entry-to-entry variation beyond the per-key spreads.
    pub fn new(keys: [KeyStyle; 10]) -> Result<Self, SimulateError> {
        for (k, style) in keys.iter().enumerate() {
            style.validate(k as u8)?;
        }
        Ok(Self {
            keys,
            entry_tempo_std: 0.0,
            entry_force_std: 0.0,
            outlier_rate: 0.0,
        })
    }

    /// Same style on every key.
    pub fn uniform(style: KeyStyle) -> Result<Self, SimulateError> {
        Self::new([style; 10])
    }

    /// Draws an archetype from the default population.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut draw = || KeyStyle {
            depth_mean: rng.random_range(400.0..800.0),
            depth_std: rng.random_range(30.0..70.0),
            press_len_mean: rng.random_range(380.0..620.0),
            press_len_std: rng.random_range(40.0..80.0),
            plateau_frac_mean: rng.random_range(0.25..0.35),
            plateau_frac_std: rng.random_range(0.03..0.06),
            attack_frac: rng.random_range(0.12..0.25),
            jitter_amp: 1,
        };
        let keys = std::array::from_fn(|_| draw());
        Self {
            keys,
            entry_tempo_std: rng.random_range(0.04..0.10),
            entry_force_std: rng.random_range(0.02..0.06),
            outlier_rate: rng.random_range(0.0..0.06),
        }
    }

    pub fn style(&self, key: KeyLabel) -> &KeyStyle {
        &self.keys[usize::from(key.digit())]
    }

    /// Largest gap between two archetypes, in per-key standard deviations of
    /// depth or press length.
    pub fn separation(&self, other: &UserArchetype) -> f64 {
        self.keys
            .iter()
            .zip(&other.keys)
            .flat_map(|(a, b)| {
                [
                    (a.depth_mean - b.depth_mean).abs() / a.depth_std.max(b.depth_std).max(1.0),
                    (a.press_len_mean - b.press_len_mean).abs() / a.press_len_std.max(b.press_len_std).max(1.0),
                ]
            })
            .fold(0.0, f64::max)
    }

    /// Copy of this archetype that always presses to full travel.
    pub fn full_travel(&self) -> Self {
        let mut out = self.clone();
        for style in &mut out.keys {
            style.depth_mean = f64::from(ADC_MAX);
            style.depth_std = 0.0;
        }
        out
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    // std is validated non-negative.
    Normal::new(mean, std).map(|n| n.sample(rng)).unwrap_or(mean)
}

fn to_code(y: f64) -> AdcCode {
    let floor = DEFAULT_COMPARATOR_THRESHOLD;
    let fraction = ((y + 0.5) / f64::from(ADC_MAX)).clamp(0.0, 1.0);
    quantize(fraction).unwrap_or(floor).max(floor)
}

/// Builds the trapezoid for explicit depth, length and plateau share.
pub fn trapezoid(
    depth: f64,
    len: usize,
    attack_frac: f64,
    plateau_frac: f64,
    jitter: impl FnMut() -> i32,
) -> Vec<AdcCode> {
    let mut jitter = jitter;
    let len = len.max(3);
    let rise = ((attack_frac * len as f64).round() as usize).clamp(1, len - 2);
    let plateau = ((plateau_frac * len as f64).round() as usize).clamp(1, len - rise - 1);
    let fall = len - rise - plateau;

    let base = f64::from(DEFAULT_COMPARATOR_THRESHOLD.value());
    let depth = depth.clamp(base, f64::from(ADC_MAX));
    let span = depth - base;

    let mut samples = Vec::with_capacity(len);
    samples.extend((0..rise).map(|i| to_code(base + span * (i + 1) as f64 / (rise + 1) as f64)));
    samples.extend((0..plateau).map(|_| to_code(depth + f64::from(jitter()))));
    samples.extend((0..fall).map(|k| to_code(base + span * (fall - k) as f64 / (fall + 1) as f64)));
    samples
}

/// One simulated press of `key`.
pub fn gen_press<R: Rng + ?Sized>(archetype: &UserArchetype, key: KeyLabel, rng: &mut R) -> Vec<AdcCode> {
    gen_press_scaled(archetype, key, 1.0, 1.0, rng)
}

/// A press with its length scaled by `tempo` and its depth by `force`.
fn gen_press_scaled<R: Rng + ?Sized>(
    archetype: &UserArchetype,
    key: KeyLabel,
    tempo: f64,
    force: f64,
    rng: &mut R,
) -> Vec<AdcCode> {
    let style = archetype.style(key);
    let (tempo, force) = if archetype.outlier_rate > 0.0 && rng.random_bool(archetype.outlier_rate.min(1.0)) {
        if rng.random_bool(0.5) {
            (tempo, 2.0)
        } else {
            (tempo * 1.6, force)
        }
    } else {
        (tempo, force)
    };
    let floor = f64::from(DEFAULT_COMPARATOR_THRESHOLD.value() + 3);
    let depth = (force * normal(rng, style.depth_mean, style.depth_std))
        .round()
        .clamp(floor, f64::from(ADC_MAX));
    let len = (tempo * normal(rng, style.press_len_mean, style.press_len_std))
        .round()
        .max(10.0) as usize;
    let plateau_frac =
        normal(rng, style.plateau_frac_mean, style.plateau_frac_std).clamp(0.01, (0.98 - style.attack_frac).max(0.01));
    let amp = i32::from(style.jitter_amp);
    trapezoid(depth, len, style.attack_frac, plateau_frac, || {
        rng.random_range(-amp..=amp)
    })
}

/// One entry of `password`, presses laid out back to back.
///
/// Speed and depth of the whole entry vary together around the archetype.
pub fn gen_entry<R: Rng + ?Sized>(archetype: &UserArchetype, password: &Password, rng: &mut R) -> EntryAttempt {
    let tempo = normal(rng, 1.0, archetype.entry_tempo_std).max(0.5);
    let force = normal(rng, 1.0, archetype.entry_force_std).max(0.5);
    EntryAttempt::from_waveforms(
        password
            .keys()
            .iter()
            .map(|&k| (k, gen_press_scaled(archetype, k, tempo, force, rng))),
    )
}

/// Renders an entry as per-key channel streams with `gap` rest samples
/// before, between and after presses.
///
/// Returns the streams and the entry as it appears in them.
pub fn render_streams(entry: &EntryAttempt, gap: usize, sample_rate_hz: u32) -> (Vec<KeyChannelStream>, EntryAttempt) {
    let mut placed = Vec::with_capacity(entry.len());
    let mut offset = gap;
    for p in entry.presses() {
        placed.push(PressWaveform::new(p.key, p.samples.clone(), offset));
        offset += p.len() + gap;
    }
    let total = offset.max(1);
    let mut channels: BTreeMap<KeyLabel, Vec<AdcCode>> = BTreeMap::new();
    for p in &placed {
        let codes = channels.entry(p.key).or_insert_with(|| vec![AdcCode::ZERO; total]);
        codes[p.start_index..p.end_index()].copy_from_slice(&p.samples);
    }
    let streams = channels
        .into_iter()
        .filter_map(|(key, codes)| KeyChannelStream::new(key, codes, sample_rate_hz).ok())
        .collect();
    let placed = EntryAttempt::new(placed).unwrap_or_default();
    (streams, placed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub password: Password,
    pub n_background_users: usize,
    pub reps_per_background: usize,
    pub n_genuine_users: usize,
    pub training_reps: usize,
    pub genuine_test_reps: usize,
    pub impostor_test_reps: usize,
    pub seed: u64,
    /// Minimum pairwise separation between genuine archetypes.
    pub min_separation_sigma: f64,
    /// Replace each subject's first training repetition with a full-travel press.
    pub full_travel_anomaly: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            password: DEFAULT_PASSWORD.parse().expect("default password is digits"),
            n_background_users: 10,
            reps_per_background: 10,
            n_genuine_users: 10,
            training_reps: 10,
            genuine_test_reps: 10,
            impostor_test_reps: 10,
            seed: 0,
            min_separation_sigma: 3.0,
            full_travel_anomaly: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), SimulateError> {
        let counts = [
            self.n_background_users,
            self.reps_per_background,
            self.n_genuine_users,
            self.training_reps,
            self.genuine_test_reps,
            self.impostor_test_reps,
        ];
        if counts.contains(&0) {
            return Err(SimulateError::InvalidConfig("all counts must be at least 1"));
        }
        if self.password.is_empty() {
            return Err(SimulateError::InvalidConfig("password must not be empty"));
        }
        Ok(())
    }
}

/// Study-level owner of a random substream.
#[derive(Debug, Clone, Copy)]
enum Stream {
    BackgroundUser(usize),
    GenuineArchetype(usize),
    SubjectEntries(usize),
    ImpostorEntries(usize),
    Outsider(usize),
}

impl Stream {
    fn id(self) -> u64 {
        let (tag, index) = match self {
            Stream::BackgroundUser(i) => (1, i),
            Stream::GenuineArchetype(i) => (2, i),
            Stream::SubjectEntries(i) => (3, i),
            Stream::ImpostorEntries(i) => (4, i),
            Stream::Outsider(i) => (5, i),
        };
        (tag << 32) | index as u64
    }
}

fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub training: Vec<EntryAttempt>,
    pub genuine: Vec<EntryAttempt>,
    /// Attempts at this subject's password typed by other people.
    pub impostor: Vec<EntryAttempt>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyDataset {
    /// Entries per background user.
    pub background: BTreeMap<String, Vec<EntryAttempt>>,
    pub subjects: Vec<Subject>,
}

const TRAIN: &str = "train";
const GENUINE: &str = "genuine";
const IMPOSTOR: &str = "impostor";
const BACKGROUND_PREFIX: &str = "bg-";

pub fn background_id(i: usize) -> String {
    format!("{BACKGROUND_PREFIX}{i:02}")
}

pub fn subject_id(i: usize) -> String {
    format!("user-{i:02}")
}

/// What a dataset user id stands for in a study file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role<'a> {
    Background,
    Training(&'a str),
    Genuine(&'a str),
    Impostor(&'a str),
    Untagged,
}

pub fn role_of(user_id: &str) -> Role<'_> {
    if user_id.starts_with(BACKGROUND_PREFIX) {
        return Role::Background;
    }
    match user_id.rsplit_once('/') {
        Some((who, TRAIN)) => Role::Training(who),
        Some((who, GENUINE)) => Role::Genuine(who),
        Some((who, IMPOSTOR)) => Role::Impostor(who),
        _ => Role::Untagged,
    }
}

impl StudyDataset {
    pub fn background_entries(&self) -> Vec<EntryAttempt> {
        self.background.values().flatten().cloned().collect()
    }

    pub fn entry_count(&self) -> usize {
        self.background.values().map(Vec::len).sum::<usize>()
            + self
                .subjects
                .iter()
                .map(|s| s.training.len() + s.genuine.len() + s.impostor.len())
                .sum::<usize>()
    }

    /// Flattens roles into user ids: `bg-NN` and `<subject>/{train,genuine,impostor}`.
    pub fn to_dataset(&self) -> Dataset {
        let mut data = Dataset::new();
        for (id, entries) in &self.background {
            data.insert(id.clone(), entries.clone());
        }
        for s in &self.subjects {
            data.insert(format!("{}/{TRAIN}", s.id), s.training.clone());
            data.insert(format!("{}/{GENUINE}", s.id), s.genuine.clone());
            data.insert(format!("{}/{IMPOSTOR}", s.id), s.impostor.clone());
        }
        data
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self, SimulateError> {
        let mut background = BTreeMap::new();
        let mut parts: BTreeMap<String, [Option<Vec<EntryAttempt>>; 3]> = BTreeMap::new();
        for (id, entries) in data {
            let slot = match role_of(id) {
                Role::Background => {
                    background.insert(id.clone(), entries.clone());
                    continue;
                }
                Role::Training(who) => (who, 0),
                Role::Genuine(who) => (who, 1),
                Role::Impostor(who) => (who, 2),
                Role::Untagged => return Err(SimulateError::UnknownRole(id.clone())),
            };
            parts.entry(slot.0.to_string()).or_default()[slot.1] = Some(entries.clone());
        }
        let subjects = parts
            .into_iter()
            .map(|(id, [training, genuine, impostor])| {
                let need = |v: Option<Vec<EntryAttempt>>, what| {
                    v.ok_or_else(|| SimulateError::IncompleteSubject(id.clone(), what))
                };
                Ok(Subject {
                    training: need(training, TRAIN)?,
                    genuine: need(genuine, GENUINE)?,
                    impostor: need(impostor, IMPOSTOR)?,
                    id: id.clone(),
                })
            })
            .collect::<Result<_, SimulateError>>()?;
        Ok(Self { background, subjects })
    }
}

fn genuine_archetypes(config: &StudyConfig) -> Vec<UserArchetype> {
    let mut chosen: Vec<UserArchetype> = Vec::with_capacity(config.n_genuine_users);
    for k in 0..config.n_genuine_users {
        let mut rng = substream(config.seed, Stream::GenuineArchetype(k));
        let mut candidate = UserArchetype::random(&mut rng);
        // Bounded so a demanding separation cannot stall generation.
        for _ in 0..1000 {
            if chosen
                .iter()
                .all(|a| a.separation(&candidate) >= config.min_separation_sigma)
            {
                break;
            }
            candidate = UserArchetype::random(&mut rng);
        }
        chosen.push(candidate);
    }
    chosen
}

/// Generates a full study: background users, and per subject training,
/// genuine test and impostor test entries.
///
/// Impostor attempts against a subject are typed by the other subjects in
/// turn; a lone subject is attacked by fresh outsider archetypes. Background
/// users never appear as subjects or impostors.
pub fn gen_study(config: &StudyConfig) -> Result<StudyDataset, SimulateError> {
    config.validate()?;
    let password = &config.password;

    let background = (0..config.n_background_users)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(config.seed, Stream::BackgroundUser(b));
            let archetype = UserArchetype::random(&mut rng);
            let entries = (0..config.reps_per_background)
                .map(|_| gen_entry(&archetype, password, &mut rng))
                .collect();
            (background_id(b), entries)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let archetypes = genuine_archetypes(config);
    let n = archetypes.len();
    let subjects = (0..n)
        .into_par_iter()
        .map(|k| {
            let own = &archetypes[k];
            let mut rng = substream(config.seed, Stream::SubjectEntries(k));
            let mut training: Vec<EntryAttempt> = (0..config.training_reps)
                .map(|_| gen_entry(own, password, &mut rng))
                .collect();
            let genuine = (0..config.genuine_test_reps)
                .map(|_| gen_entry(own, password, &mut rng))
                .collect();
            if config.full_travel_anomaly {
                training[0] = gen_entry(&own.full_travel(), password, &mut rng);
            }

            let mut rng = substream(config.seed, Stream::ImpostorEntries(k));
            let outsiders: Vec<UserArchetype>;
            let attackers: Vec<&UserArchetype> = if n > 1 {
                (1..n).map(|d| &archetypes[(k + d) % n]).collect()
            } else {
                let mut orng = substream(config.seed, Stream::Outsider(k));
                outsiders = (0..4).map(|_| UserArchetype::random(&mut orng)).collect();
                outsiders.iter().collect()
            };
            let impostor = (0..config.impostor_test_reps)
                .map(|j| gen_entry(attackers[j % attackers.len()], password, &mut rng))
                .collect();

            Subject {
                id: subject_id(k),
                training,
                genuine,
                impostor,
            }
        })
        .collect();

    Ok(StudyDataset { background, subjects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, features_of};
    use crate::signal::{segment_presses, DEFAULT_MIN_PRESS_LEN};

    fn style() -> KeyStyle {
        KeyStyle {
            depth_mean: 600.0,
            depth_std: 0.0,
            press_len_mean: 100.0,
            press_len_std: 0.0,
            plateau_frac_mean: 0.3,
            plateau_frac_std: 0.0,
            attack_frac: 0.2,
            jitter_amp: 0,
        }
    }

    fn key(d: u8) -> KeyLabel {
        KeyLabel::new(d).unwrap()
    }

    #[test]
    fn exact_trapezoid() {
        let a = UserArchetype::uniform(style()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = gen_press(&a, key(4), &mut rng);
        assert_eq!(samples.len(), 100);
        let f = features_of(&samples).unwrap();
        assert_eq!(f.s_max, 600);
        assert!((29..=31).contains(&f.plateau), "plateau {}", f.plateau);
    }

    #[test]
    fn zero_spread_is_repeatable() {
        let mut s = style();
        s.jitter_amp = 1;
        let a = UserArchetype::uniform(s).unwrap();
        let first = gen_press(&a, key(2), &mut ChaCha8Rng::seed_from_u64(9));
        let second = gen_press(&a, key(2), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(first, second);
    }

    #[test]
    fn depth_stays_within_five_sigma() {
        let mut s = style();
        s.depth_std = 5.0;
        s.jitter_amp = 1;
        let a = UserArchetype::uniform(s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let f = features_of(&gen_press(&a, key(0), &mut rng)).unwrap();
            assert!((575..=625).contains(&f.s_max), "s_max {}", f.s_max);
        }
    }

    #[test]
    fn archetype_validation() {
        let mut s = style();
        s.depth_mean = 5.0;
        assert!(UserArchetype::uniform(s).is_err());
        let mut s = style();
        s.press_len_mean = 9.0;
        assert!(UserArchetype::uniform(s).is_err());
        let mut s = style();
        s.plateau_frac_mean = 0.9;
        assert!(UserArchetype::uniform(s).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = UserArchetype::random(&mut rng);
            assert!(UserArchetype::new(a.keys).is_ok());
            assert!(a.entry_tempo_std >= 0.0 && a.entry_force_std >= 0.0);
        }
    }

    #[test]
    fn entries_follow_the_password() {
        let a = UserArchetype::random(&mut ChaCha8Rng::seed_from_u64(5));
        let pw: Password = "61".parse().unwrap();
        let e = gen_entry(&a, &pw, &mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(e.keys(), vec![key(6), key(1)]);
        assert_eq!(e, gen_entry(&a, &pw, &mut ChaCha8Rng::seed_from_u64(6)));
        let long: Password = DEFAULT_PASSWORD.parse().unwrap();
        assert_eq!(gen_entry(&a, &long, &mut ChaCha8Rng::seed_from_u64(6)).len(), 10);
    }

    #[test]
    fn generated_presses_survive_resegmentation() {
        let a = UserArchetype::random(&mut ChaCha8Rng::seed_from_u64(11));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in 0..10 {
            let samples = gen_press(&a, key(d), &mut rng);
            assert!(samples.iter().all(|&c| c >= DEFAULT_COMPARATOR_THRESHOLD));
            let s = KeyChannelStream::new(key(d), samples.clone(), 1000).unwrap();
            let again = segment_presses(&s, DEFAULT_COMPARATOR_THRESHOLD, DEFAULT_MIN_PRESS_LEN);
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].samples, samples);
        }
    }

    #[test]
    fn render_and_reassemble() {
        let a = UserArchetype::random(&mut ChaCha8Rng::seed_from_u64(21));
        let pw: Password = DEFAULT_PASSWORD.parse().unwrap();
        let e = gen_entry(&a, &pw, &mut ChaCha8Rng::seed_from_u64(22));
        let (streams, placed) = render_streams(&e, 40, 1000);
        let got = crate::signal::assemble_entry(&streams, DEFAULT_COMPARATOR_THRESHOLD, 3).unwrap();
        assert_eq!(got, placed);
        let samples: Vec<_> = got.presses().iter().map(|p| &p.samples).collect();
        let original: Vec<_> = e.presses().iter().map(|p| &p.samples).collect();
        assert_eq!(samples, original);
    }

    #[test]
    fn default_study_shape() {
        let study = gen_study(&StudyConfig::default()).unwrap();
        assert_eq!(study.background.len(), 10);
        assert_eq!(study.background_entries().len(), 100);
        assert_eq!(study.subjects.len(), 10);
        for s in &study.subjects {
            assert_eq!((s.training.len(), s.genuine.len(), s.impostor.len()), (10, 10, 10));
        }
        assert_eq!(study.entry_count(), 400);
    }

    #[test]
    fn study_is_deterministic_and_round_trips_roles() {
        let config = StudyConfig {
            n_genuine_users: 3,
            seed: 42,
            ..StudyConfig::default()
        };
        let a = gen_study(&config).unwrap();
        let b = gen_study(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(StudyDataset::from_dataset(&a.to_dataset()).unwrap(), a);
        let other = gen_study(&StudyConfig { seed: 43, ..config }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn lone_subject_faces_outsiders() {
        let config = StudyConfig {
            n_genuine_users: 1,
            ..StudyConfig::default()
        };
        let study = gen_study(&config).unwrap();
        assert_eq!(study.subjects.len(), 1);
        assert_eq!(study.subjects[0].impostor.len(), 10);
    }

    #[test]
    fn anomaly_replaces_first_training_rep() {
        let base = StudyConfig {
            n_genuine_users: 2,
            ..StudyConfig::default()
        };
        let plain = gen_study(&base).unwrap();
        let odd = gen_study(&StudyConfig {
            full_travel_anomaly: true,
            ..base
        })
        .unwrap();
        for (p, o) in plain.subjects.iter().zip(&odd.subjects) {
            assert_eq!(p.training[1..], o.training[1..]);
            assert_eq!(p.genuine, o.genuine);
            assert!(o.training[0]
                .presses()
                .iter()
                .all(|w| extract_features(w).unwrap().s_max >= 1021));
        }
    }

    #[test]
    fn config_validation() {
        let bad = StudyConfig {
            training_reps: 0,
            ..StudyConfig::default()
        };
        assert!(gen_study(&bad).is_err());
    }

    #[test]
    fn roles_parse() {
        assert_eq!(role_of("bg-03"), Role::Background);
        assert_eq!(role_of("user-01/train"), Role::Training("user-01"));
        assert_eq!(role_of("user-01/genuine"), Role::Genuine("user-01"));
        assert_eq!(role_of("user-01/impostor"), Role::Impostor("user-01"));
        assert_eq!(role_of("alice"), Role::Untagged);
        let mut data = Dataset::new();
        data.insert("alice".into(), vec![]);
        assert!(StudyDataset::from_dataset(&data).is_err());
        let mut data = Dataset::new();
        data.insert("u/train".into(), vec![]);
        assert!(matches!(
            StudyDataset::from_dataset(&data),
            Err(SimulateError::IncompleteSubject(_, _))
        ));
    }
}
