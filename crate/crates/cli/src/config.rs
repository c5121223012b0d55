//! Optional `key=value` run configuration.

use std::path::Path;

use keypad_auth::classify::DEFAULT_BANDS;
use keypad_auth::signal::{DEFAULT_COMPARATOR_THRESHOLD, DEFAULT_MIN_PRESS_LEN, DEFAULT_SAMPLE_RATE_HZ};
use keypad_auth::{AdcCode, EnrollOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub comparator_threshold: AdcCode,
    pub min_press_len: usize,
    pub bands: usize,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            comparator_threshold: DEFAULT_COMPARATOR_THRESHOLD,
            min_press_len: DEFAULT_MIN_PRESS_LEN,
            bands: DEFAULT_BANDS,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed: 0,
        }
    }
}

impl Config {
    /// Parses `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut config = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| format!("line {}: {key}: {e}", n + 1);
            match key {
                "comparator_threshold" => {
                    let v: u16 = value.parse().map_err(|e| bad(&e))?;
                    config.comparator_threshold = AdcCode::new(v).map_err(|e| bad(&e))?;
                }
                "min_press_len" => config.min_press_len = value.parse().map_err(|e| bad(&e))?,
                "bands" => config.bands = value.parse().map_err(|e| bad(&e))?,
                "sample_rate_hz" => config.sample_rate_hz = value.parse().map_err(|e| bad(&e))?,
                "seed" => config.seed = value.parse().map_err(|e| bad(&e))?,
                other => return Err(format!("line {}: unknown key `{other}`", n + 1)),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                Config::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.comparator_threshold == AdcCode::ZERO {
            return Err("comparator_threshold must be positive".into());
        }
        if self.min_press_len == 0 {
            return Err("min_press_len must be positive".into());
        }
        if self.bands < 2 {
            return Err("bands must be at least 2".into());
        }
        if self.sample_rate_hz == 0 {
            return Err("sample_rate_hz must be positive".into());
        }
        Ok(())
    }

    pub fn enroll_options(&self) -> EnrollOptions {
        EnrollOptions {
            bands: self.bands,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.comparator_threshold.value(), 10);
        assert_eq!((c.min_press_len, c.bands, c.sample_rate_hz), (3, 10, 1000));
    }

    #[test]
    fn parses_overrides() {
        let c = Config::parse("# run\nbands = 12\nseed=7\n\ncomparator_threshold=15\n").unwrap();
        assert_eq!((c.bands, c.seed, c.comparator_threshold.value()), (12, 7, 15));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("bands=1").is_err());
        assert!(Config::parse("bands=x").is_err());
        assert!(Config::parse("colour=blue").is_err());
        assert!(Config::parse("seed").is_err());
        assert!(Config::parse("comparator_threshold=2000").is_err());
        assert!(Config::parse("sample_rate_hz=0").is_err());
    }
}
