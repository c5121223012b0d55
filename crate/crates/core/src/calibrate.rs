//! Per-user threshold selection and study-level error-rate aggregation.
//!
//! Error rates are kept as exact fractions so that averaging them over
//! users introduces no rounding.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Method;

/// An exact error rate: errors over trials.
pub type Rate = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalibrateError {
    #[error("genuine and impostor score sets must both be non-empty")]
    EmptyScores,
    #[error("no rows to aggregate")]
    EmptyRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AcceptIfGreater,
    AcceptIfLess,
}

impl Direction {
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::Prob => Direction::AcceptIfGreater,
            Method::Avg => Direction::AcceptIfLess,
        }
    }

    pub fn accepts(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::AcceptIfGreater => score > threshold,
            Direction::AcceptIfLess => score < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    pub direction: Direction,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, impostor: Vec<f64>, direction: Direction) -> Self {
        Self {
            genuine,
            impostor,
            direction,
        }
    }

    /// False accepts and false rejects at `threshold`.
    pub fn error_counts(&self, threshold: f64) -> (u64, u64) {
        let accepted = |s: &&f64| self.direction.accepts(**s, threshold);
        let false_accepts = self.impostor.iter().filter(accepted).count() as u64;
        let false_rejects = self.genuine.len() as u64 - self.genuine.iter().filter(accepted).count() as u64;
        (false_accepts, false_rejects)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub far: Rate,
    pub frr: Rate,
}

fn rate(errors: u64, trials: usize) -> Rate {
    if trials == 0 {
        Rate::from_integer(0)
    } else {
        Rate::new(errors, trials as u64)
    }
}

/// FAR and FRR at a fixed threshold. Empty sides report a rate of zero.
pub fn far_frr(scores: &ScoreSet, threshold: f64) -> (Rate, Rate) {
    let (fa, fr) = scores.error_counts(threshold);
    (rate(fa, scores.impostor.len()), rate(fr, scores.genuine.len()))
}

/// Every threshold worth trying: midpoints between adjacent distinct scores
/// plus one value beyond each end of the pooled range.
pub fn candidate_thresholds(scores: &ScoreSet) -> Vec<f64> {
    let mut pooled: Vec<f64> = scores.genuine.iter().chain(&scores.impostor).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let (Some(&lo), Some(&hi)) = (pooled.first(), pooled.last()) else {
        return Vec::new();
    };
    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(lo - 1.0);
    candidates.extend(pooled.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.push(hi + 1.0);
    candidates
}

fn pooled_median(scores: &ScoreSet) -> f64 {
    let mut pooled: Vec<f64> = scores.genuine.iter().chain(&scores.impostor).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len();
    if n % 2 == 1 {
        pooled[n / 2]
    } else {
        (pooled[n / 2 - 1] + pooled[n / 2]) / 2.0
    }
}

/// Picks the threshold with the fewest total errors.
///
/// Ties go to the lower FAR, then to the candidate nearest the pooled
/// median, then to the lower threshold.
pub fn ideal_threshold(scores: &ScoreSet) -> Result<ThresholdResult, CalibrateError> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(CalibrateError::EmptyScores);
    }
    let median = pooled_median(scores);
    let key = |t: f64| {
        let (fa, fr) = scores.error_counts(t);
        // Compare FAR as a count; the impostor total is fixed.
        (fa + fr, fa, (t - median).abs(), t)
    };
    let best = candidate_thresholds(scores)
        .into_iter()
        .map(|t| (key(t), t))
        .min_by(|(a, _), (b, _)| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.total_cmp(&b.3))
        })
        .map(|(_, t)| t)
        .ok_or(CalibrateError::EmptyScores)?;
    let (far, frr) = far_frr(scores, best);
    Ok(ThresholdResult {
        threshold: best,
        far,
        frr,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub user_id: String,
    pub method: Method,
    #[serde(with = "rate_text")]
    pub far: Rate,
    #[serde(with = "rate_text")]
    pub frr: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodAverage {
    pub method: Method,
    #[serde(with = "rate_text")]
    pub far: Rate,
    #[serde(with = "rate_text")]
    pub frr: Rate,
    /// Mean of the averaged FAR and FRR.
    #[serde(with = "rate_text")]
    pub error_rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_user: Vec<ReportRow>,
    pub averages: Vec<MethodAverage>,
}

impl EvalReport {
    pub fn average(&self, method: Method) -> Option<&MethodAverage> {
        self.averages.iter().find(|a| a.method == method)
    }
}

/// Column means per method, computed exactly.
///
/// Averages are listed in method order; rows keep their input order.
pub fn aggregate(rows: Vec<ReportRow>) -> Result<EvalReport, CalibrateError> {
    if rows.is_empty() {
        return Err(CalibrateError::EmptyRows);
    }
    let mut per_method: BTreeMap<Method, (Rate, Rate, u64)> = BTreeMap::new();
    for row in &rows {
        let acc = per_method
            .entry(row.method)
            .or_insert((Rate::from_integer(0), Rate::from_integer(0), 0));
        acc.0 += row.far;
        acc.1 += row.frr;
        acc.2 += 1;
    }
    let averages = per_method
        .into_iter()
        .map(|(method, (far_sum, frr_sum, n))| {
            let far = far_sum / n;
            let frr = frr_sum / n;
            MethodAverage {
                method,
                far,
                frr,
                error_rate: (far + frr) / 2,
            }
        })
        .collect();
    Ok(EvalReport {
        per_user: rows,
        averages,
    })
}

/// Parses `n/d`, a decimal fraction such as `0.1`, or a percentage such as
/// `10.00%`, all exactly.
pub fn parse_rate(text: &str) -> Option<Rate> {
    let text = text.trim();
    let rate = if let Some((n, d)) = text.split_once('/') {
        let d: u64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        Rate::new(n.trim().parse().ok()?, d)
    } else if let Some(pct) = text.strip_suffix('%') {
        parse_decimal(pct.trim())? / 100
    } else {
        parse_decimal(text)?
    };
    (rate <= Rate::from_integer(1)).then_some(rate)
}

fn parse_decimal(text: &str) -> Option<Rate> {
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let scale = 10u64.pow(frac.len() as u32);
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Rate::new(whole.checked_mul(scale)?.checked_add(frac)?, scale))
}

/// Rate as a percentage, for display.
pub fn percent(r: Rate) -> f64 {
    *r.numer() as f64 * 100.0 / *r.denom() as f64
}

mod rate_text {
    use super::Rate;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rate, D::Error> {
        let text = String::deserialize(d)?;
        let (n, m) = text
            .split_once('/')
            .ok_or_else(|| de::Error::custom(format!("expected `n/d`, got `{text}`")))?;
        let n: u64 = n.parse().map_err(de::Error::custom)?;
        let m: u64 = m.parse().map_err(de::Error::custom)?;
        if m == 0 || n > m {
            return Err(de::Error::custom(format!("`{text}` is not a rate in [0, 1]")));
        }
        Ok(Rate::new(n, m))
    }
}
