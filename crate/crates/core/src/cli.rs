//! Command-line front end.
//!
//! Every subcommand shares one flag set. Values are resolved flag first, then
//! the TOML file given by `--config`, then built-in defaults; the seed falls
//! back to `ROBUST_COLLAB_SEED` last. The resolved [`CliConfig`] is echoed into
//! every JSON and CSV artifact.
//!
//! Exit status: 0 on success, 1 when a check fails or the learner hits a
//! runtime limit, 2 on usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::conflict::{build_consistency_graph, draw_datasets, EdgeBasis};
use crate::error::Error;
use crate::hypothesis::HypothesisClass;
use crate::learner::{
    assess, run_naive_baseline, run_robust_collaborative, Assessment, ConstantsLedger,
    LearnerConstants, RunParams, RunResult,
};
use crate::oracle::{
    adversary_budget, make_centralized_impossibility_instance, make_lower_bound_instance,
    make_random_instance, DistributionFamily, ImpossibilityCase, Instance, InstanceSpec, OracleSet,
    PretenderKind, RandomInstanceConfig,
};
use crate::verify::{
    check_balls_in_bins, check_candidate_lemma, check_centralized_impossibility,
    check_collaborative, check_lower_bound_cost, check_pac_sample_size, check_test_lemma,
    measure_overhead, BallsInBinsConfig, CandidateLemmaConfig, CollaborativeConfig,
    ImpossibilityVerdict, LowerBoundConfig, LowerBoundReport, OverheadEstimate, PacConfig,
    PassRule, SweepPoint, TestLemmaConfig, TrialReport, OVERHEAD_CSV_HEADER, TRIAL_CSV_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// First line of every CSV artifact.
pub const CSV_SCHEMA_LINE: &str = "# schema=1";
pub const SEED_ENV: &str = "ROBUST_COLLAB_SEED";

pub const RUN_CSV_HEADER: &str = "n,d,eps,delta,eta,total_samples,rounds,success_flags";
pub const LOWER_BOUND_CSV_HEADER: &str =
    "check,trials,mean_total,se_total,bound,success_rate,passed";

#[derive(Parser, Debug)]
#[command(
    name = "robust-collab",
    version,
    about = "Robust collaborative PAC learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the iterative robust learner on one instance.
    Run(Settings),
    /// Learn every user independently on one instance.
    Baseline(Settings),
    /// Run one verification check and exit per its verdict.
    Verify(Settings),
    /// Measure learner overhead over a parameter grid.
    Sweep(Settings),
    /// Emit an instance as JSON, or validate and re-emit one given by --instance.
    Instance(Settings),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandName {
    Run,
    Baseline,
    Verify,
    Sweep,
    Instance,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorName {
    LowerBound,
    Impossibility,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClassName {
    /// All labelings of `d` points plus a ⊥ point fixed to 0.
    Powerset,
    /// Thresholds over `d` ordered points.
    Threshold,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    BallsInBins,
    CandidateLemma,
    TestLemma,
    CentralizedImpossibility,
    Pac,
    Collaborative,
    LowerBound,
}

fn parse_kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Flags shared by every subcommand. The same keys, in snake_case, are
/// accepted by the `--config` TOML file.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file supplying defaults for any flag below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Instance generator: lower-bound, impossibility or random.
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorName>,
    /// Instance JSON file; overrides --generator.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Hypothesis class: powerset or threshold.
    #[arg(long, value_enum)]
    pub class: Option<ClassName>,
    /// Number of users (bins for balls-in-bins, group size for candidate-lemma).
    #[arg(long)]
    pub n: Option<usize>,
    /// VC dimension for powerset, number of points for threshold.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Impossibility world, 0 or 1.
    #[arg(long)]
    pub case: Option<u8>,
    /// User distributions for random instances: uniform or random-weights.
    #[arg(long, value_parser = parse_kebab::<DistributionFamily>)]
    pub family: Option<DistributionFamily>,
    /// Pretender fake targets: random or close.
    #[arg(long, value_parser = parse_kebab::<PretenderKind>)]
    pub pretender: Option<PretenderKind>,
    /// Pretender count; defaults to floor(eta * n).
    #[arg(long)]
    pub adversaries: Option<usize>,

    /// Check for `verify`.
    #[arg(long, value_enum)]
    pub check: Option<CheckName>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for trials.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Sweep axis `key=v1,v2,...` for key n, d or eta; repeatable.
    #[arg(long)]
    pub grid: Option<Vec<String>>,
    /// Round whose confidence the candidate-lemma check uses.
    #[arg(long)]
    pub round: Option<usize>,
    /// Planted candidate errors for test-lemma.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub errors: Option<Vec<f64>>,
    /// Ball-count multiplier for balls-in-bins.
    #[arg(long, allow_negative_numbers = true)]
    pub budget_scale: Option<f64>,
    /// Lower-bound scale; defaults to the constants ledger.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Fixed pass threshold for collaborative; default is target - 3 SE.
    #[arg(long, allow_negative_numbers = true)]
    pub min_rate: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    pub c_pac: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_cand: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_test: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_bins: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_final: Option<f64>,
    #[arg(long)]
    pub max_candidate_group: Option<usize>,
    #[arg(long)]
    pub max_rounds: Option<usize>,

    /// Consistency-graph edge list written by `instance`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Samples drawn per user for the edge list.
    #[arg(long)]
    pub per_user: Option<u64>,
    /// Edge basis: pairwise-labels or oracle-checked.
    #[arg(long, value_parser = parse_kebab::<EdgeBasis>)]
    pub basis: Option<EdgeBasis>,

    /// CSV output path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON output path; stdout when absent.
    #[arg(long, alias = "out")]
    pub json: Option<PathBuf>,
}

macro_rules! fill_from {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field; } )*
    };
}

impl Settings {
    fn fill_from(&mut self, file: Settings) {
        fill_from!(self, file;
            generator, instance, class, n, d, eps, delta, eta, case, family, pretender, adversaries,
            check, trials, seed, jobs, grid, round, errors, budget_scale, gamma, min_rate,
            c_pac, c_cand, c_test, c_bins, c_final, max_candidate_group, max_rounds,
            edges, per_user, basis, csv, json,
        );
    }
}

/// Where a run's instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSource {
    Generator { generator: GeneratorName },
    File { path: PathBuf },
}

/// The fully resolved configuration echoed into outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliConfig {
    pub subcommand: SubcommandName,
    pub instance: InstanceSource,
    pub class: ClassName,
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub case: u8,
    pub family: DistributionFamily,
    pub pretender: PretenderKind,
    pub adversaries: Option<usize>,
    pub check: Option<CheckName>,
    pub trials: usize,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub grid: Vec<String>,
    pub round: usize,
    pub errors: Vec<f64>,
    pub budget_scale: f64,
    pub gamma: f64,
    pub min_rate: Option<f64>,
    pub per_user: u64,
    pub basis: EdgeBasis,
    pub constants: LearnerConstants,
}

/// A JSON artifact: the effective config and the subcommand's result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Output<T> {
    pub config: CliConfig,
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub run: RunResult,
    pub assessment: Assessment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifyOutcome {
    Trial(TrialReport),
    Impossibility(ImpossibilityVerdict),
    LowerBound(LowerBoundReport),
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        match self {
            VerifyOutcome::Trial(r) => r.passed,
            VerifyOutcome::Impossibility(v) => v.passed,
            VerifyOutcome::LowerBound(r) => r.passed,
        }
    }
}

pub type RunArtifact = Output<RunOutput>;
pub type VerifyArtifact = Output<VerifyOutcome>;
pub type SweepArtifact = Output<Vec<OverheadEstimate>>;
pub type InstanceArtifact = Output<InstanceSpec>;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter { name, reason } => {
                Failure::Usage(format!("invalid value for {}: {reason}", flag(name)))
            }
            Error::NoConsistentGroup { .. } | Error::SearchCap { .. } => {
                Failure::Runtime(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn flag(param: &str) -> String {
    match param {
        "planted_errors" => "--errors".into(),
        "bins" | "group_size" => "--n".into(),
        other => format!("--{}", other.replace('_', "-")),
    }
}

fn usage(flag_name: &str, reason: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("invalid value for {flag_name}: {reason}"))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status. JSON goes to `stdout` unless `--json` names a file.
pub fn parse_and_dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let (sub, settings) = match cli.command {
        Command::Run(s) => (SubcommandName::Run, s),
        Command::Baseline(s) => (SubcommandName::Baseline, s),
        Command::Verify(s) => (SubcommandName::Verify, s),
        Command::Sweep(s) => (SubcommandName::Sweep, s),
        Command::Instance(s) => (SubcommandName::Instance, s),
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = resolve(sub, settings).and_then(|(config, outputs)| match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| usage("--jobs", e))?
            .install(|| dispatch(&config, &outputs, &mut out, &mut err)),
        None => dispatch(&config, &outputs, &mut out, &mut err),
    });
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

struct OutputPaths {
    csv: Option<PathBuf>,
    json: Option<PathBuf>,
    edges: Option<PathBuf>,
}

fn resolve(sub: SubcommandName, mut s: Settings) -> Result<(CliConfig, OutputPaths), Failure> {
    if let Some(path) = s.config.clone() {
        let text = fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
        let file: Settings = toml::from_str(&text)
            .map_err(|e| usage("--config", format!("{}: {e}", path.display())))?;
        s.fill_from(file);
    }
    if s.seed.is_none() {
        if let Ok(v) = std::env::var(SEED_ENV) {
            s.seed = Some(v.trim().parse().map_err(|e| usage(SEED_ENV, e))?);
        }
    }

    let defaults = LearnerConstants::calibrated();
    let constants = LearnerConstants {
        c_pac: s.c_pac.unwrap_or(defaults.c_pac),
        c_cand: s.c_cand.unwrap_or(defaults.c_cand),
        c_test: s.c_test.unwrap_or(defaults.c_test),
        c_bins: s.c_bins.unwrap_or(defaults.c_bins),
        c_final: s.c_final.unwrap_or(defaults.c_final),
        max_candidate_group: s
            .max_candidate_group
            .unwrap_or(defaults.max_candidate_group),
        max_rounds: s.max_rounds.unwrap_or(defaults.max_rounds),
    };
    constants.validate()?;

    let config = CliConfig {
        subcommand: sub,
        instance: match &s.instance {
            Some(path) => InstanceSource::File { path: path.clone() },
            None => InstanceSource::Generator {
                generator: s.generator.unwrap_or(GeneratorName::Random),
            },
        },
        class: s.class.unwrap_or(ClassName::Powerset),
        n: s.n.unwrap_or(10),
        d: s.d.unwrap_or(8),
        eps: s.eps.unwrap_or(0.1),
        delta: s.delta.unwrap_or(0.1),
        eta: s.eta.unwrap_or(0.0),
        case: s.case.unwrap_or(0),
        family: s.family.unwrap_or(DistributionFamily::RandomWeights),
        pretender: s.pretender.unwrap_or(PretenderKind::Random),
        adversaries: s.adversaries,
        check: s.check,
        trials: s.trials.unwrap_or(200),
        seed: s.seed,
        jobs: s.jobs,
        grid: s.grid.unwrap_or_default(),
        round: s.round.unwrap_or(1),
        errors: s.errors.unwrap_or_else(|| vec![0.04, 0.15]),
        budget_scale: s.budget_scale.unwrap_or(1.0),
        gamma: s
            .gamma
            .unwrap_or_else(|| ConstantsLedger::load().lower_bound_gamma),
        min_rate: s.min_rate,
        per_user: s.per_user.unwrap_or(10),
        basis: s.basis.unwrap_or(EdgeBasis::OracleChecked),
        constants,
    };
    validate(&config)?;
    Ok((
        config,
        OutputPaths {
            csv: s.csv,
            json: s.json,
            edges: s.edges,
        },
    ))
}

fn validate(c: &CliConfig) -> Result<(), Failure> {
    if !(c.eps > 0.0 && c.eps <= 1.0) {
        return Err(usage(
            "--eps",
            format!("must satisfy 0 < eps <= 1, got {}", c.eps),
        ));
    }
    if !(c.delta > 0.0 && c.delta <= 1.0) {
        return Err(usage(
            "--delta",
            format!("must satisfy 0 < delta <= 1, got {}", c.delta),
        ));
    }
    if !(0.0..=1.0).contains(&c.eta) {
        return Err(usage("--eta", format!("must lie in [0, 1], got {}", c.eta)));
    }
    for (name, v) in [
        ("--n", c.n),
        ("--d", c.d),
        ("--trials", c.trials),
        ("--round", c.round),
    ] {
        if v == 0 {
            return Err(usage(name, "must be at least 1"));
        }
    }
    if c.jobs == Some(0) {
        return Err(usage("--jobs", "must be at least 1"));
    }
    if c.per_user == 0 {
        return Err(usage("--per-user", "must be at least 1"));
    }
    if c.case > 1 {
        return Err(usage("--case", format!("must be 0 or 1, got {}", c.case)));
    }
    if !(c.budget_scale > 0.0 && c.budget_scale.is_finite()) {
        return Err(usage("--budget-scale", "must be positive"));
    }
    if !(c.gamma > 0.0 && c.gamma.is_finite()) {
        return Err(usage("--gamma", "must be positive"));
    }
    if let Some(r) = c.min_rate {
        if !(0.0..=1.0).contains(&r) {
            return Err(usage("--min-rate", format!("must lie in [0, 1], got {r}")));
        }
    }
    if matches!(c.subcommand, SubcommandName::Verify | SubcommandName::Sweep) && c.seed.is_none() {
        return Err(usage(
            "--seed",
            format!("required for this subcommand (or set {SEED_ENV})"),
        ));
    }
    if c.subcommand == SubcommandName::Verify && c.check.is_none() {
        return Err(usage("--check", "required for verify"));
    }
    if c.subcommand == SubcommandName::Sweep && c.grid.is_empty() {
        return Err(usage("--grid", "required for sweep"));
    }
    Ok(())
}

fn class_of(c: &CliConfig) -> Result<HypothesisClass, Failure> {
    Ok(match c.class {
        ClassName::Powerset => HypothesisClass::powerset(c.d)?,
        ClassName::Threshold => HypothesisClass::threshold(c.d)?,
    })
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let spec = match serde_json::from_str::<InstanceArtifact>(&text) {
        Ok(artifact) => artifact.result,
        Err(_) => serde_json::from_str::<InstanceSpec>(&text)
            .map_err(|e| usage("--instance", format!("{}: {e}", path.display())))?,
    };
    Instance::new(spec).map_err(|e| usage("--instance", format!("{}: {e}", path.display())))
}

fn build_instance(c: &mut CliConfig) -> Result<Instance, Failure> {
    let seed = c.seed.unwrap_or(0);
    let instance = match &c.instance {
        InstanceSource::File { path } => load_instance(path)?,
        InstanceSource::Generator { generator } => match generator {
            GeneratorName::LowerBound => make_lower_bound_instance(c.n, c.d, c.eps, c.eta, seed)?,
            GeneratorName::Impossibility => make_centralized_impossibility_instance(
                c.n,
                ImpossibilityCase::from_index(c.case)?,
            )?,
            GeneratorName::Random => make_random_instance(
                &RandomInstanceConfig {
                    class: class_of(c)?,
                    n: c.n,
                    eta: c.eta,
                    adversaries: c.adversaries,
                    family: c.family,
                    pretender: c.pretender,
                },
                seed,
            )?,
        },
    };
    // The learner is told the instance's declared fraction.
    c.eta = instance.spec().eta;
    c.n = instance.spec().oracles.len();
    Ok(instance)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn emit_json<T: Serialize>(
    artifact: &T,
    path: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let mut text = to_json(artifact)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn emit_csv(
    config: &CliConfig,
    header: &str,
    rows: &[String],
    path: Option<&Path>,
) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let echo = serde_json::to_string(config).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut text = format!("{CSV_SCHEMA_LINE}\n# config={echo}\n{header}\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn dispatch(
    config: &CliConfig,
    paths: &OutputPaths,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut config = config.clone();
    match config.subcommand {
        SubcommandName::Run | SubcommandName::Baseline => {
            let mut instance = build_instance(&mut config)?;
            let run = if config.subcommand == SubcommandName::Run {
                let params = RunParams {
                    eps: config.eps,
                    delta: config.delta,
                    eta: config.eta,
                };
                run_robust_collaborative(&mut instance, &params, &config.constants)?
            } else {
                run_naive_baseline(&mut instance, config.eps, config.delta, &config.constants)?
            };
            let assessment = assess(&instance, &run.outputs, config.eps)?;
            let flags: String = assessment
                .accurate
                .iter()
                .map(|a| match a {
                    Some(true) => '1',
                    Some(false) => '0',
                    None => '-',
                })
                .collect();
            let row = format!(
                "{},{},{},{},{},{},{},{}",
                config.n,
                instance.class().vc_dimension(),
                config.eps,
                config.delta,
                config.eta,
                run.ledger.total,
                run.rounds_used,
                flags
            );
            emit_csv(&config, RUN_CSV_HEADER, &[row], paths.csv.as_deref())?;
            let _ = writeln!(
                stderr,
                "{}: {} samples, {} rounds, success {}",
                run.algorithm, run.ledger.total, run.rounds_used, assessment.success
            );
            let artifact = Output {
                config,
                result: RunOutput { run, assessment },
            };
            emit_json(&artifact, paths.json.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        SubcommandName::Verify => {
            let outcome = run_check(&config)?;
            let (header, row) = match &outcome {
                VerifyOutcome::Trial(r) => (TRIAL_CSV_HEADER, r.csv_row()),
                VerifyOutcome::Impossibility(v) => (TRIAL_CSV_HEADER, v.csv_row()),
                VerifyOutcome::LowerBound(r) => (
                    LOWER_BOUND_CSV_HEADER,
                    format!(
                        "lower-bound,{},{:.3},{:.3},{:.3},{:.6},{}",
                        r.trials, r.mean_total, r.se_total, r.bound, r.success_rate, r.passed
                    ),
                ),
            };
            emit_csv(&config, header, std::slice::from_ref(&row), paths.csv.as_deref())?;
            let passed = outcome.passed();
            let _ = writeln!(stderr, "{} {}", if passed { "PASS" } else { "FAIL" }, row);
            emit_json(
                &Output {
                    config,
                    result: outcome,
                },
                paths.json.as_deref(),
                stdout,
            )?;
            Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        SubcommandName::Sweep => {
            let points = parse_grid(&config)?;
            let seed = config.seed.expect("validated");
            let estimates = measure_overhead(&points, config.trials, seed, &config.constants)?;
            let rows: Vec<String> = estimates.iter().map(OverheadEstimate::csv_row).collect();
            emit_csv(&config, OVERHEAD_CSV_HEADER, &rows, paths.csv.as_deref())?;
            emit_json(
                &Output {
                    config,
                    result: estimates,
                },
                paths.json.as_deref(),
                stdout,
            )?;
            Ok(EXIT_OK)
        }
        SubcommandName::Instance => {
            let mut instance = build_instance(&mut config)?;
            if let Some(path) = &paths.edges {
                let datasets = draw_datasets(&mut instance, config.per_user);
                let graph = build_consistency_graph(&datasets, instance.class(), config.basis)?;
                fs::write(path, graph.to_edge_list()).map_err(|e| io_failure(path, e))?;
            }
            let artifact = Output {
                config,
                result: instance.spec().clone(),
            };
            emit_json(&artifact, paths.json.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
    }
}

fn run_check(c: &CliConfig) -> Result<VerifyOutcome, Failure> {
    let seed = c.seed.expect("validated");
    let constants = c.constants.clone();
    let outcome = match c.check.expect("validated") {
        CheckName::BallsInBins => VerifyOutcome::Trial(check_balls_in_bins(
            &BallsInBinsConfig {
                bins: c.n,
                c_bins: constants.c_bins,
                delta: c.delta,
                budget_scale: c.budget_scale,
            },
            c.trials,
            seed,
        )?),
        CheckName::CandidateLemma => VerifyOutcome::Trial(check_candidate_lemma(
            &CandidateLemmaConfig {
                class: class_of(c)?,
                group_size: c.n,
                adversaries: c
                    .adversaries
                    .unwrap_or_else(|| adversary_budget(c.eta, c.n)),
                family: c.family,
                pretender: c.pretender,
                eps: c.eps,
                delta: c.delta,
                round: c.round,
                constants,
            },
            c.trials,
            seed,
        )?),
        CheckName::TestLemma => VerifyOutcome::Trial(check_test_lemma(
            &TestLemmaConfig {
                planted_errors: c.errors.clone(),
                eps: c.eps,
                delta: c.delta,
                constants,
            },
            c.trials,
            seed,
        )?),
        CheckName::CentralizedImpossibility => {
            VerifyOutcome::Impossibility(check_centralized_impossibility(c.n)?)
        }
        CheckName::Pac => VerifyOutcome::Trial(check_pac_sample_size(
            &PacConfig {
                class: class_of(c)?,
                family: c.family,
                eps: c.eps,
                delta: c.delta,
                c_pac: constants.c_pac,
            },
            c.trials,
            seed,
        )?),
        CheckName::Collaborative => VerifyOutcome::Trial(check_collaborative(
            &CollaborativeConfig {
                class: class_of(c)?,
                n: c.n,
                eta: c.eta,
                family: c.family,
                pretender: c.pretender,
                eps: c.eps,
                delta: c.delta,
                constants,
            },
            c.trials,
            seed,
            c.min_rate.map_or(PassRule::ThreeSigma, PassRule::AtLeast),
        )?),
        CheckName::LowerBound => VerifyOutcome::LowerBound(check_lower_bound_cost(
            &LowerBoundConfig {
                n: c.n,
                d: c.d,
                eps: c.eps,
                delta: c.delta,
                eta: c.eta,
                gamma: c.gamma,
                constants,
            },
            c.trials,
            seed,
        )?),
    };
    Ok(outcome)
}

/// Expands `--grid` axes into sweep points. Axes absent from the grid take
/// the scalar flag, except `d`, which follows `n` unless it has its own axis.
fn parse_grid(c: &CliConfig) -> Result<Vec<SweepPoint>, Failure> {
    let (mut ns, mut ds, mut etas) = (vec![c.n], None, vec![c.eta]);
    for axis in &c.grid {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| usage("--grid", format!("expected key=v1,v2,..., got `{axis}`")))?;
        let bad = |v: &str| usage("--grid", format!("cannot parse `{v}` in `{axis}`"));
        match key.trim() {
            "n" | "d" => {
                let parsed = values
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .ok()
                            .filter(|&x| x >= 1)
                            .ok_or_else(|| bad(v))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if key.trim() == "n" {
                    ns = parsed;
                } else {
                    ds = Some(parsed);
                }
            }
            "eta" => {
                etas = values
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| (0.0..=1.0).contains(x))
                            .ok_or_else(|| bad(v))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
            }
            other => {
                return Err(usage(
                    "--grid",
                    format!("unknown axis `{other}`; use n, d or eta"),
                ))
            }
        }
    }
    let mut points = Vec::new();
    for &n in &ns {
        let d_values = ds.clone().unwrap_or_else(|| vec![n]);
        for &d in &d_values {
            for &eta in &etas {
                points.push(SweepPoint { n, d, eta });
            }
        }
    }
    Ok(points)
}
