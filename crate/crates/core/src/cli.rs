//! `platform-trial` command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and input errors, 3 when a computation fails on
//! valid input.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::contrast::{contrast_estimate_platform, Contrast, ContrastEstimate};
use crate::data::{load_coarsening, load_dataset, load_design, Arm, Dataset, DatasetKind};
use crate::error::Error;
use crate::influence::{joint_estimate_separate, JointRREstimate, PluginContext};
use crate::noninferiority::{run_test, NITestConfig, TestMethod, TestOutcome};
use crate::repro::{run_study, Study};
use crate::simulator::{
    monte_carlo, preset, resample_shared_controls, simulate_platform, simulate_separate, Analysis,
    AnalysisSpec, NISpec, ResampleTarget, Scenario, WindowType, PRESET_NAMES,
};
use crate::survival::SurvivalMethod;

#[derive(Parser, Debug)]
#[command(name = "platform-trial", version, about = "Relative-risk estimation, contrasts and noninferiority tests for platform trials")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for Monte Carlo work (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Nelson-Aalen.
    Na,
    /// Kaplan-Meier.
    Km,
}

impl From<MethodArg> for SurvivalMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Na => SurvivalMethod::NelsonAalen,
            MethodArg::Km => SurvivalMethod::KaplanMeier,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Intersection,
    Lrt,
}

impl From<TestArg> for TestMethod {
    fn from(m: TestArg) -> Self {
        match m {
            TestArg::Intersection => TestMethod::Intersection,
            TestArg::Lrt => TestMethod::Lrt,
        }
    }
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Participant CSV (`id,x,delta,arm,window,z`).
    #[arg(long)]
    pub data: PathBuf,
    /// Trial design JSON.
    #[arg(long)]
    pub design: PathBuf,
    /// Covariate coarsening JSON mapping each z label to its stratum.
    #[arg(long)]
    pub coarsening: PathBuf,
    /// Treat the data as the separate two-arm trial of this intervention.
    #[arg(long)]
    pub separate_arm: Option<Arm>,
}

#[derive(Args, Debug)]
pub struct TargetArgs {
    /// Evaluation time since enrollment.
    #[arg(long)]
    pub t: f64,
    /// Stratum label of V.
    #[arg(long)]
    pub v: String,
    /// Survival estimator (default: Nelson-Aalen on platform data, Kaplan-Meier on separate trials).
    #[arg(long, value_enum)]
    pub estimator: Option<MethodArg>,
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scenario: Option<PathBuf>,
    /// Shipped scenario: table3, table3-expanded, section6 or appendixF.
    #[arg(long)]
    pub preset: Option<String>,
    /// Enrollment multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Joint relative-risk estimate with influence-function covariance.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// Active arms (default: all).
        #[arg(long, value_delimiter = ',')]
        arms: Vec<Arm>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative-efficacy contrast of two interventions with a Wald interval.
    Contrast {
        /// Platform data; omit when using --separate-data.
        #[arg(long, conflicts_with = "separate_data", required_unless_present = "separate_data")]
        data: Option<PathBuf>,
        /// Trial design JSON.
        #[arg(long)]
        design: PathBuf,
        /// Covariate coarsening JSON.
        #[arg(long)]
        coarsening: PathBuf,
        /// Separate-trial data as ARM=CSV, one per intervention.
        #[arg(long, value_parser = parse_arm_path)]
        separate_data: Vec<(Arm, PathBuf)>,
        #[command(flatten)]
        target: TargetArgs,
        /// The two interventions, `a1,a2`.
        #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
        pair: Vec<Arm>,
        /// additive, multiplicative or log-ratio.
        #[arg(long, default_value = "additive")]
        contrast: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noninferiority of a reference intervention against the best of the others.
    NiTest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// Arms in the comparison (default: all).
        #[arg(long, value_delimiter = ',')]
        arms: Vec<Arm>,
        /// Candidate intervention.
        #[arg(long = "ref")]
        ref_arm: Arm,
        /// Efficacy threshold.
        #[arg(long)]
        delta: f64,
        /// Noninferiority margin.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.025)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "intersection")]
        method: TestArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a platform trial (and optionally the matched separate trials).
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory receiving platform.csv, design.json, coarsening.json and separate_<a>.csv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write the separate trials.
        #[arg(long)]
        separate: bool,
    },
    /// Resample a two-intervention dataset to a target proportion of shared controls.
    Resample {
        #[command(flatten)]
        data: DataArgs,
        /// Window types in window order, e.g. `L,H,B_all,B_sub`.
        #[arg(long, value_delimiter = ',', required = true)]
        typing: Vec<WindowType>,
        /// Target shared controls over all controls.
        #[arg(long)]
        share: f64,
        /// Target totals on interventions 1 and 2, `n1,n2`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        totals: Vec<usize>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Output design JSON.
        #[arg(long)]
        design_out: PathBuf,
    },
    /// Seeded Monte Carlo study of a scenario.
    Mc {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[command(flatten)]
        target: TargetArgs,
        /// Arms in the joint estimate (default: all).
        #[arg(long, value_delimiter = ',')]
        arms: Vec<Arm>,
        /// Contrast pairs `a1:a2`, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Vec<(Arm, Arm)>,
        #[arg(long, default_value = "additive")]
        contrast: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also simulate and analyze the matched separate trials.
        #[arg(long)]
        separate: bool,
        /// Record interval coverage of the analytic truth.
        #[arg(long)]
        coverage: bool,
        /// Noninferiority candidate; enables the tests.
        #[arg(long = "ni-ref", requires_all = ["delta", "epsilon"])]
        ni_ref: Option<Arm>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0.025)]
        ni_alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a published Monte Carlo study.
    Repro {
        /// table3, section6-efficiency, section6-power or appendixF.
        study: String,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        /// Enrollment multiplier (default: 1 for table3 and appendixF, 0.1 for section6).
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_arm_path(s: &str) -> Result<(Arm, PathBuf), String> {
    let (a, p) = s.split_once('=').ok_or("expected ARM=PATH")?;
    let arm = a.trim().parse().map_err(|_| format!("'{a}' is not an arm label"))?;
    Ok((arm, PathBuf::from(p)))
}

fn parse_pair(s: &str) -> Result<(Arm, Arm), String> {
    let (a, b) = s.split_once(':').ok_or("expected a1:a2")?;
    let parse = |x: &str| x.trim().parse::<Arm>().map_err(|_| format!("'{x}' is not an arm label"));
    Ok((parse(a)?, parse(b)?))
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
impl_failure_from!(
    crate::data::DataError,
    crate::error::EstimationError,
    crate::error::TestError,
    crate::error::SimulationError
);

fn input(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    let design = load_design(open(&args.design)?)?;
    let coarsening = load_coarsening(open(&args.coarsening)?)?;
    let kind = args.separate_arm.map_or(DatasetKind::Platform, DatasetKind::Separate);
    Ok(load_dataset(open(&args.data)?, design, coarsening, kind)?)
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    match (&args.scenario, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
            Ok(Scenario::from_json(&text)?.scaled(args.scale))
        }
        (None, Some(name)) => Ok(preset(name, args.scale)?),
        (None, None) => Err(input(format!(
            "one of --scenario or --preset is required (presets: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure { code: 3, message: format!("write failed: {e}") };
    match out {
        Some(path) => fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(io),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn estimate_csv(est: &JointRREstimate) -> String {
    let mut out = String::from("arm,gamma,se");
    for a in &est.arms {
        out.push_str(&format!(",sigma_{a}"));
    }
    out.push('\n');
    for (i, a) in est.arms.iter().enumerate() {
        let se = (est.sigma_gamma[i][i] / est.n as f64).sqrt();
        out.push_str(&format!("{a},{},{se}", est.gamma[i]));
        for s in &est.sigma_gamma[i] {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    out
}

fn contrast_csv(c: &ContrastEstimate) -> String {
    format!(
        "theta,sigma2,n,lower,upper,se,alpha,a4_satisfied\n{},{},{},{},{},{},{},{}\n",
        c.theta, c.sigma2, c.n, c.ci.lower, c.ci.upper, c.ci.se, c.ci.alpha, c.a4_satisfied
    )
}

fn test_csv(t: &TestOutcome) -> String {
    let mut out = String::from("component,comparator,estimate,bound,threshold,reject\n");
    for m in &t.marginals {
        let who = m.comparator.map_or("threshold".to_string(), |a| a.to_string());
        out.push_str(&format!("marginal,{who},{},{},{},{}\n", m.estimate, m.upper, m.threshold, m.reject));
    }
    if let Some(l) = &t.lrt {
        out.push_str(&format!("lrt,,{},{},,{}\n", l.statistic, l.critical_value, t.reject));
    } else {
        out.push_str(&format!("overall,,,,,{}\n", t.reject));
    }
    out
}

fn arms_or_all(arms: &[Arm], ds: &Dataset) -> Vec<Arm> {
    if !arms.is_empty() {
        arms.to_vec()
    } else if let DatasetKind::Separate(a) = ds.kind {
        vec![a]
    } else {
        ds.design.active_arms().collect()
    }
}

fn estimate_on(ds: &Dataset, arms: &[Arm], target: &TargetArgs) -> Result<JointRREstimate, Failure> {
    let method = target.estimator.map(SurvivalMethod::from);
    if let DatasetKind::Separate(_) = ds.kind {
        return Ok(joint_estimate_separate(std::slice::from_ref(ds), &target.v, target.t, method)?);
    }
    let v = ds.coarsening.require_v(&target.v)?;
    let method = method.unwrap_or(SurvivalMethod::default_for(ds.kind));
    Ok(PluginContext::with_method(ds, arms, v, target.t, method)?.joint_estimate(ds)?)
}

fn execute(cli: &Cli, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let format = cli.format;
    match &cli.command {
        Command::Estimate { data, target, arms, out } => {
            let ds = load(data)?;
            let est = estimate_on(&ds, &arms_or_all(arms, &ds), target)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&est),
                Format::Csv => estimate_csv(&est),
            };
            emit(out, &text, stdout)
        }
        Command::Contrast {
            data,
            design,
            coarsening,
            separate_data,
            target,
            pair,
            contrast,
            alpha,
            out,
        } => {
            if pair.len() != 2 {
                return Err(input("--pair needs exactly two arms"));
            }
            let contrast = contrast.parse::<Contrast>()?;
            let est = match data {
                Some(path) => estimate_on(
                    &load(&DataArgs {
                        data: path.clone(),
                        design: design.clone(),
                        coarsening: coarsening.clone(),
                        separate_arm: None,
                    })?,
                    pair,
                    target,
                )?,
                None => {
                    let design = load_design(open(design)?)?;
                    let coarsening = load_coarsening(open(coarsening)?)?;
                    let mut trials = Vec::new();
                    for (arm, path) in separate_data {
                        trials.push(load_dataset(
                            open(path)?,
                            design.clone(),
                            coarsening.clone(),
                            DatasetKind::Separate(*arm),
                        )?);
                    }
                    let method = target.estimator.map(SurvivalMethod::from);
                    joint_estimate_separate(&trials, &target.v, target.t, method)?
                }
            };
            let c = contrast_estimate_platform(&est, pair[0], pair[1], &contrast, *alpha)?;
            if !c.a4_satisfied {
                let _ = writeln!(stderr, "warning: sign condition fails at the estimated relative risks");
            }
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&c),
                Format::Csv => contrast_csv(&c),
            };
            emit(out, &text, stdout)
        }
        Command::NiTest { data, target, arms, ref_arm, delta, epsilon, alpha, method, out } => {
            let cfg = NITestConfig::new(*ref_arm, *delta, *epsilon, *alpha)?;
            let ds = load(data)?;
            let est = estimate_on(&ds, &arms_or_all(arms, &ds), target)?;
            let outcome = run_test(&est, &cfg, (*method).into())?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&outcome),
                Format::Csv => test_csv(&outcome),
            };
            emit(out, &text, stdout)
        }
        Command::Simulate { scenario, out_dir, separate } => {
            let sc = load_scenario(scenario)?;
            fs::create_dir_all(out_dir).map_err(|e| input(format!("{}: {e}", out_dir.display())))?;
            let write = |name: &str, text: &str| -> Result<PathBuf, Failure> {
                let p = out_dir.join(name);
                fs::write(&p, text).map_err(|e| input(format!("{}: {e}", p.display())))?;
                Ok(p)
            };
            let sim = simulate_platform(&sc, cli.seed)?;
            let mut files = vec![
                write("platform.csv", &sim.dataset.to_csv_string())?,
                write("design.json", &json(&sc.design))?,
                write("coarsening.json", &json(&sc.coarsening))?,
                write("scenario.json", &sc.to_json())?,
            ];
            if *separate {
                for s in simulate_separate(&sc, cli.seed)? {
                    let DatasetKind::Separate(a) = s.dataset.kind else { unreachable!() };
                    files.push(write(&format!("separate_{a}.csv"), &s.dataset.to_csv_string())?);
                }
            }
            #[derive(Serialize)]
            struct Report {
                seed: u64,
                platform_size: usize,
                censored_at_enrollment: usize,
                files: Vec<PathBuf>,
            }
            let report = Report {
                seed: cli.seed,
                platform_size: sim.dataset.n(),
                censored_at_enrollment: sim.report.censored_at_enrollment,
                files,
            };
            if report.censored_at_enrollment > 0 {
                let _ = writeln!(
                    stderr,
                    "warning: {} participants enrolled after administrative censoring",
                    report.censored_at_enrollment
                );
            }
            emit(&None, &json(&report), stdout)
        }
        Command::Resample { data, typing, share, totals, out, design_out } => {
            let ds = load(data)?;
            let arm_totals = match totals.as_slice() {
                [] => None,
                [a, b] => Some((*a, *b)),
                _ => return Err(input("--totals needs two values")),
            };
            let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
            let target = ResampleTarget { share: *share, arm_totals };
            let res = resample_shared_controls(&ds, typing, &target, &mut rng)?;
            fs::write(out, res.dataset.to_csv_string())
                .map_err(|e| input(format!("{}: {e}", out.display())))?;
            fs::write(design_out, json(&res.dataset.design))
                .map_err(|e| input(format!("{}: {e}", design_out.display())))?;
            #[derive(Serialize)]
            struct Report {
                shared_controls: usize,
                total_controls: usize,
                achieved_share: f64,
                records: usize,
            }
            let report = Report {
                shared_controls: res.shared_controls,
                total_controls: res.total_controls,
                achieved_share: res.achieved_share,
                records: res.dataset.n(),
            };
            emit(&None, &json(&report), stdout)
        }
        Command::Mc {
            scenario,
            reps,
            target,
            arms,
            pairs,
            contrast,
            alpha,
            separate,
            coverage,
            ni_ref,
            delta,
            epsilon,
            ni_alpha,
            out,
        } => {
            let sc = load_scenario(scenario)?;
            let mut spec = AnalysisSpec::new(target.t, target.v.clone());
            spec.alpha = *alpha;
            spec.platform_method = target.estimator.map(SurvivalMethod::from);
            spec.separate_method = spec.platform_method;
            spec.arms = arms.clone();
            spec.pairs = pairs.clone();
            spec.contrast = contrast.parse::<Contrast>()?;
            spec.separate = *separate;
            spec.coverage = *coverage;
            if let (Some(r), Some(d), Some(e)) = (ni_ref, delta, epsilon) {
                spec.ni = Some(NISpec {
                    config: NITestConfig::new(*r, *d, *e, *ni_alpha)?,
                    methods: vec![TestMethod::Intersection, TestMethod::Lrt],
                });
            }
            let analysis = Analysis::new(&sc, &spec)?;
            let summary = monte_carlo(*reps, cli.seed, |_, seed| analysis.run(seed))?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => summary.to_json() + "\n",
                Format::Csv => summary.to_csv(),
            };
            emit(out, &text, stdout)
        }
        Command::Repro { study, reps, scale, out } => {
            let study: Study = study.parse().map_err(|e: String| input(e))?;
            if format == Some(Format::Json) {
                return Err(input("repro writes CSV only"));
            }
            let text = run_study(study, *reps, cli.seed, *scale)?;
            emit(out, &text, stdout)
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli, stdout, stderr)),
            Err(e) => Err(input(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(&cli, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_t_is_a_usage_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            ["platform-trial", "estimate", "--data", "d.csv", "--design", "x.json", "--coarsening", "c.json", "--v", "all"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, 2);
        assert!(String::from_utf8(err).unwrap().contains("--t"));
    }

    #[test]
    fn unknown_flag_is_an_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["platform-trial", "repro", "table3", "--bogus"], &mut out, &mut err), 2);
    }

    #[test]
    fn pair_parsers() {
        assert_eq!(parse_pair("7:1").unwrap(), (7, 1));
        assert!(parse_pair("7-1").is_err());
        assert_eq!(parse_arm_path("2=a.csv").unwrap(), (2, PathBuf::from("a.csv")));
    }
}
