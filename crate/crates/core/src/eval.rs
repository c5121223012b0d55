//! Study pipeline: enroll each subject, score their genuine and impostor
//! attempts with both methods, calibrate ideal thresholds and aggregate.

use rayon::prelude::*;
use thiserror::Error;

use crate::calibrate::{
    aggregate, ideal_threshold, CalibrateError, Direction, EvalReport, ReportRow, ScoreSet, ThresholdResult,
};
use crate::classify::{ClassifyError, EnrollOptions, Method, Password, UserProfile};
use crate::signal::EntryAttempt;
use crate::simulate::{StudyDataset, Subject};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("subject {subject}: {source}")]
    Classify {
        subject: String,
        #[source]
        source: ClassifyError,
    },
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error("study has no background entries")]
    NoBackground,
    #[error("study has no subjects")]
    NoSubjects,
}

/// Scores every attempt with one method.
pub fn score_all(profile: &UserProfile, attempts: &[EntryAttempt], method: Method) -> Result<Vec<f64>, ClassifyError> {
    attempts
        .iter()
        .map(|a| profile.score(a, method).map(|s| s.value))
        .collect()
}

/// Sets the profile's threshold for `method` to the ideal split of the given attempts.
pub fn calibrate_profile(
    profile: &mut UserProfile,
    genuine: &[EntryAttempt],
    impostor: &[EntryAttempt],
    method: Method,
) -> Result<ThresholdResult, EvalError> {
    let wrap = |source| EvalError::Classify {
        subject: profile.user_id.clone(),
        source,
    };
    let scores = ScoreSet::new(
        score_all(profile, genuine, method).map_err(wrap)?,
        score_all(profile, impostor, method).map_err(wrap)?,
        Direction::for_method(method),
    );
    let result = ideal_threshold(&scores)?;
    profile.set_threshold(method, result.threshold);
    Ok(result)
}

fn evaluate_subject(
    subject: &Subject,
    background: &[EntryAttempt],
    options: EnrollOptions,
) -> Result<Vec<ReportRow>, EvalError> {
    let wrap = |source| EvalError::Classify {
        subject: subject.id.clone(),
        source,
    };
    let first = subject.training.first().ok_or(wrap(ClassifyError::EmptyTraining))?;
    let password = Password::of(first);
    let mut profile =
        UserProfile::enroll(&subject.id, &password, &subject.training, background, options).map_err(wrap)?;
    Method::ALL
        .into_iter()
        .map(|method| {
            let t = calibrate_profile(&mut profile, &subject.genuine, &subject.impostor, method)?;
            Ok(ReportRow {
                user_id: subject.id.clone(),
                method,
                far: t.far,
                frr: t.frr,
            })
        })
        .collect()
}

/// Runs the full study. Rows are ordered by subject, then method.
pub fn evaluate_study(study: &StudyDataset, options: EnrollOptions) -> Result<EvalReport, EvalError> {
    let background = study.background_entries();
    if background.is_empty() {
        return Err(EvalError::NoBackground);
    }
    if study.subjects.is_empty() {
        return Err(EvalError::NoSubjects);
    }
    let rows: Vec<Vec<ReportRow>> = study
        .subjects
        .par_iter()
        .map(|s| evaluate_subject(s, &background, options))
        .collect::<Result<_, _>>()?;
    Ok(aggregate(rows.into_iter().flatten().collect())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_study, StudyConfig};

    #[test]
    fn small_study_report_is_consistent() {
        let config = StudyConfig {
            n_genuine_users: 3,
            seed: 5,
            ..StudyConfig::default()
        };
        let study = gen_study(&config).unwrap();
        let report = evaluate_study(&study, EnrollOptions::default()).unwrap();
        assert_eq!(report.per_user.len(), 6);
        for method in Method::ALL {
            let rows: Vec<_> = report.per_user.iter().filter(|r| r.method == method).collect();
            assert_eq!(rows.len(), 3);
            let avg = report.average(method).unwrap();
            let far: crate::calibrate::Rate = rows.iter().map(|r| r.far).sum();
            assert_eq!(avg.far, far / 3);
        }
        assert_eq!(report, evaluate_study(&study, EnrollOptions::default()).unwrap());
    }

    #[test]
    fn single_subject_gives_one_row_per_method() {
        let study = gen_study(&StudyConfig {
            n_genuine_users: 1,
            ..StudyConfig::default()
        })
        .unwrap();
        let report = evaluate_study(&study, EnrollOptions::default()).unwrap();
        assert_eq!(report.per_user.len(), 2);
    }

    #[test]
    fn empty_study_is_an_error() {
        assert_eq!(
            evaluate_study(&StudyDataset::default(), EnrollOptions::default()),
            Err(EvalError::NoBackground)
        );
    }
}
