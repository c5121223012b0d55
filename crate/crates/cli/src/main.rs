//! `keypad-auth` command-line tool.
//!
//! Exit codes: 0 accepted or success, 1 rejected, 2 usage error, 3 data error.

mod config;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use keypad_auth::calibrate::{parse_rate, percent};
use keypad_auth::eval::{calibrate_profile, evaluate_study};
use keypad_auth::simulate::{gen_study, role_of, Role, StudyConfig, StudyDataset, DEFAULT_PASSWORD};
use keypad_auth::store::{self, Dataset};
use keypad_auth::{aggregate, verify, EntryAttempt, EvalReport, Method, Password, ReportRow, UserProfile};

use config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "keypad-auth",
    version,
    about = "Keystroke-dynamics authentication for an analog number pad"
)]
struct Cli {
    /// Optional key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic study dataset.
    Simulate {
        /// Number of enrolled subjects.
        #[arg(long, default_value_t = 10, value_parser = positive)]
        users: usize,
        /// Training, genuine test and impostor test repetitions per subject.
        #[arg(long, default_value_t = 10, value_parser = positive)]
        reps: usize,
        #[arg(long, default_value_t = 10, value_parser = positive)]
        background_users: usize,
        /// Entries per background user.
        #[arg(long, default_value_t = 10, value_parser = positive)]
        background_reps: usize,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = DEFAULT_PASSWORD)]
        password: Password,
        /// Replace each subject's first training entry with a full-travel press.
        #[arg(long)]
        anomaly: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both models for one user and write a profile.
    Enroll {
        /// User id; entries under `<user>/train` are preferred over `<user>`.
        #[arg(long)]
        user: String,
        #[arg(long)]
        password: Password,
        /// Dataset holding the user's training entries.
        #[arg(long)]
        input: PathBuf,
        /// Dataset holding background entries; `bg-` users are used when present.
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        profile: PathBuf,
    },
    /// Check every entry of a dataset against a profile.
    Verify {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        attempt: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Prob)]
        method: MethodArg,
    },
    /// Set profile thresholds from labeled genuine and impostor attempts.
    Calibrate {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        genuine: PathBuf,
        #[arg(long)]
        impostor: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
    },
    /// Run the full study over a dataset, or aggregate precomputed rows.
    Evaluate {
        /// Study dataset using the `bg-NN` and `<subject>/{train,genuine,impostor}` ids.
        #[arg(long, required_unless_present = "rows", conflicts_with = "rows")]
        dataset: Option<PathBuf>,
        /// CSV of `user_id,method,far,frr` rows to aggregate directly.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Avg,
    Prob,
    Both,
}

impl MethodArg {
    fn methods(self) -> &'static [Method] {
        match self {
            MethodArg::Avg => &[Method::Avg],
            MethodArg::Prob => &[Method::Prob],
            MethodArg::Both => &Method::ALL,
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

enum Failure {
    Rejected,
    Data(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command, config: &Config) -> CmdResult {
    match command {
        Command::Simulate {
            users,
            reps,
            background_users,
            background_reps,
            seed,
            password,
            anomaly,
            out,
        } => {
            let study = gen_study(&StudyConfig {
                password,
                n_background_users: background_users,
                reps_per_background: background_reps,
                n_genuine_users: users,
                training_reps: reps,
                genuine_test_reps: reps,
                impostor_test_reps: reps,
                seed: seed.unwrap_or(config.seed),
                full_travel_anomaly: anomaly,
                ..StudyConfig::default()
            })?;
            store::write_dataset(&out, &study.to_dataset()).map_err(|e| in_file(&out, e))?;
            println!("wrote {} entries to {}", study.entry_count(), out.display());
            Ok(())
        }
        Command::Enroll {
            user,
            password,
            input,
            background,
            profile,
        } => enroll(config, &user, &password, &input, &background, &profile),
        Command::Verify {
            profile,
            attempt,
            method,
        } => verify_cmd(config, &profile, &attempt, method),
        Command::Calibrate {
            profile,
            genuine,
            impostor,
            method,
        } => calibrate(config, &profile, &genuine, &impostor, method),
        Command::Evaluate { dataset, rows, report } => {
            let result = match (dataset, rows) {
                (Some(path), _) => {
                    let data = load_dataset(config, &path)?;
                    let study = StudyDataset::from_dataset(&data).map_err(|e| in_file(&path, e))?;
                    evaluate_study(&study, config.enroll_options())?
                }
                (None, Some(path)) => aggregate(read_rows(&path)?)?,
                (None, None) => unreachable!("clap requires one of --dataset or --rows"),
            };
            store::save_report(&result, &report).map_err(|e| in_file(&report, e))?;
            print_summary(&result)?;
            Ok(())
        }
    }
}

fn in_file(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

/// Reads a dataset and rejects presses shorter than the configured minimum.
fn load_dataset(config: &Config, path: &Path) -> Result<Dataset, Failure> {
    let data = store::read_dataset(path, config.comparator_threshold).map_err(|e| in_file(path, e))?;
    for (user, entries) in &data {
        for (rep, entry) in entries.iter().enumerate() {
            if let Some(p) = entry.presses().iter().position(|p| p.len() < config.min_press_len) {
                return Err(in_file(
                    path,
                    format!(
                        "user {user} rep {rep} key {p}: press shorter than {} samples",
                        config.min_press_len
                    ),
                ));
            }
        }
    }
    Ok(data)
}

fn all_entries(data: Dataset) -> Vec<EntryAttempt> {
    data.into_values().flatten().collect()
}

fn enroll(config: &Config, user: &str, password: &Password, input: &Path, background: &Path, out: &Path) -> CmdResult {
    let mut data = load_dataset(config, input)?;
    let training = data
        .remove(&format!("{user}/train"))
        .or_else(|| data.remove(user))
        .ok_or_else(|| in_file(input, format!("no entries for user `{user}`")))?;

    let bg_data = load_dataset(config, background)?;
    let tagged: Vec<EntryAttempt> = bg_data
        .iter()
        .filter(|(id, _)| role_of(id) == Role::Background)
        .flat_map(|(_, e)| e.iter().cloned())
        .collect();
    let background_entries = if tagged.is_empty() {
        all_entries(bg_data)
    } else {
        tagged
    };

    let profile = UserProfile::enroll(user, password, &training, &background_entries, config.enroll_options())?;
    store::save_profile(&profile, out).map_err(|e| in_file(out, e))?;
    println!(
        "enrolled {user}: training={} background={} norm_factor={} threshold_avg={} threshold_prob={}",
        training.len(),
        background_entries.len(),
        profile.prob_model.norm_factor,
        profile.threshold_avg,
        profile.threshold_prob
    );
    Ok(())
}

fn verify_cmd(config: &Config, profile_path: &Path, attempt: &Path, method: MethodArg) -> CmdResult {
    let profile = store::load_profile(profile_path).map_err(|e| in_file(profile_path, e))?;
    let attempts = all_entries(load_dataset(config, attempt)?);
    if attempts.is_empty() {
        return Err(in_file(attempt, "no entries"));
    }
    let mut out = io::stdout().lock();
    let mut all_accepted = true;
    for entry in &attempts {
        for &m in method.methods() {
            let d = verify(&profile, entry, m);
            let score = d.score.map_or_else(|| "none".to_string(), |s| s.value.to_string());
            writeln!(
                out,
                "method={m} score={score} accepted={} password_ok={}",
                d.accepted, d.password_ok
            )?;
            all_accepted &= d.accepted;
        }
    }
    if all_accepted {
        Ok(())
    } else {
        Err(Failure::Rejected)
    }
}

fn calibrate(config: &Config, profile_path: &Path, genuine: &Path, impostor: &Path, method: MethodArg) -> CmdResult {
    let mut profile = store::load_profile(profile_path).map_err(|e| in_file(profile_path, e))?;
    let genuine_entries = all_entries(load_dataset(config, genuine)?);
    let impostor_entries = all_entries(load_dataset(config, impostor)?);
    if genuine_entries.is_empty() {
        return Err(in_file(genuine, "no entries"));
    }
    if impostor_entries.is_empty() {
        return Err(in_file(impostor, "no entries"));
    }
    let mut lines = Vec::new();
    for &m in method.methods() {
        let t = calibrate_profile(&mut profile, &genuine_entries, &impostor_entries, m)?;
        lines.push(format!(
            "method={m} threshold={} far={:.2}% frr={:.2}%",
            t.threshold,
            percent(t.far),
            percent(t.frr)
        ));
    }
    store::save_profile(&profile, profile_path).map_err(|e| in_file(profile_path, e))?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<ReportRow>, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| in_file(path, e))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| in_file(path, e))?;
        if record.len() != 4 {
            return Err(in_file(path, format!("line {line}: expected user_id,method,far,frr")));
        }
        let method: Method = record[1]
            .parse()
            .map_err(|e| in_file(path, format!("line {line}: {e}")))?;
        let rate = |s: &str| parse_rate(s).ok_or_else(|| in_file(path, format!("line {line}: bad rate `{s}`")));
        rows.push(ReportRow {
            user_id: record[0].to_string(),
            method,
            far: rate(&record[2])?,
            frr: rate(&record[3])?,
        });
    }
    Ok(rows)
}

fn print_summary(report: &EvalReport) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{:<16} {:<6} {:>8} {:>8}", "user", "method", "FAR", "FRR")?;
    for row in &report.per_user {
        writeln!(
            out,
            "{:<16} {:<6} {:>7.2}% {:>7.2}%",
            row.user_id,
            row.method.name(),
            percent(row.far),
            percent(row.frr)
        )?;
    }
    for avg in &report.averages {
        writeln!(
            out,
            "{:<16} {:<6} {:>7.2}% {:>7.2}%  error {:.2}%",
            "average",
            avg.method.name(),
            percent(avg.far),
            percent(avg.frr),
            percent(avg.error_rate)
        )?;
    }
    Ok(())
}
