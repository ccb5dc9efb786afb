//! `beliefsum` subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{ModelConfigFile, Provenance};
use crate::detector::{self, AlarmMode, DetectorConfig};
use crate::error::{Error, Result};
use crate::ingest::{self, BinUnit, Binning};
use crate::learner::{learn_ladder, LearnerConfig, TrainingSet};
use crate::report::{self, AlarmReport, EvalSummary, SolverReport};
use crate::simulator::{self, DayProfile, EventWindow, ScenarioConfig};
use crate::solver::{
    check_convexity, check_threshold_in_sum, value_iterate, CostModel, SimplexGrid, SolverOptions,
};

#[derive(Debug, Parser)]
#[command(name = "beliefsum", version, about = "Belief-sum change detection for Poisson count streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a rate ladder from a training count CSV and write a model config.
    Learn(LearnArgs),
    /// Run the detector over a count CSV (or every CSV in a directory).
    Detect(DetectArgs),
    /// Sample a count path from the model.
    Simulate(SimulateArgs),
    /// Solve the stopping problem on a belief grid.
    Solve(SolveArgs),
    /// Monte Carlo delay / false-alarm evaluation over a threshold sweep.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Monitor,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Rows,
    Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventStateArg {
    Low,
    High,
}

#[derive(Debug, Args)]
pub struct BinningArgs {
    /// Aggregate input rows into bins of this width.
    #[arg(long)]
    pub bin_width: Option<u64>,
    #[arg(long, value_enum, default_value = "seconds")]
    pub bin_unit: UnitArg,
}

impl BinningArgs {
    fn resolve(&self, fallback: Option<Binning>) -> Option<Binning> {
        match self.bin_width {
            Some(width) => Some(Binning {
                width,
                unit: match self.bin_unit {
                    UnitArg::Rows => BinUnit::Rows,
                    UnitArg::Seconds => BinUnit::Seconds,
                },
            }),
            None => fallback,
        }
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Training CSV; repeat to sum several streams (each binned first).
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Config file to write (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Base config supplying alpha, threshold, a_low, a_high and binning.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub n_normal: usize,
    /// Boundary rates sit this many Poisson sds outside the extreme centroids.
    #[arg(long, default_value_t = 3.0)]
    pub multiplier: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub rate_floor: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[command(flatten)]
    pub binning: BinningArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Count CSV, or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Trajectory CSV (stdout if omitted); a directory when the input is one.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Alarm report file (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Report `π(0) + π(N+1)` instead of its half (only with alpha = 0.5).
    #[arg(long)]
    pub report_sum: bool,
    #[arg(long, value_enum, default_value = "monitor")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub binning: BinningArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Path CSV (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    /// Timestamp of the first row, in seconds.
    #[arg(long, default_value_t = 0)]
    pub start_time: i64,
    /// Seconds between rows.
    #[arg(long, default_value_t = 1)]
    pub step_seconds: i64,
    /// Keep the hidden chain among the normal states (a "day" profile)
    /// instead of letting it be absorbed.
    #[arg(long)]
    pub day: bool,
    /// Inject an abnormal window `START:END` (0-based slots, END exclusive)
    /// into a day profile; implies `--day`.
    #[arg(long, value_parser = parse_window)]
    pub event: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value = "high")]
    pub event_state: EventStateArg,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Policy CSV (omitted if not given).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Solver report file (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Grid resolution M.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// False-alarm cost.
    #[arg(long, default_value_t = 1.0)]
    pub cf: f64,
    /// Delay cost per step.
    #[arg(long, default_value_t = 0.05)]
    pub cd: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Operating-point CSV (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary file (stderr if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated threshold sweep; defaults to 0.1, 0.2, ..., 0.9.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
}

fn parse_window(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let start = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let end = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((start, end))
}

fn load_config(path: &Path) -> Result<ModelConfigFile> {
    if !path.is_file() {
        return Err(Error::Usage(format!("config file {} not found", path.display())));
    }
    ModelConfigFile::load(path).map_err(|e| Error::Usage(e.to_string()))
}

fn write_text(path: Option<&Path>, text: &str, fallback: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => fallback.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn detector_from(
    file: &ModelConfigFile,
    alpha: Option<f64>,
    threshold: Option<f64>,
) -> Result<DetectorConfig> {
    let mut file = file.clone();
    if let Some(a) = alpha {
        file.alpha = a;
    }
    if let Some(t) = threshold {
        file.threshold = t;
    }
    file.detector()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Learn(a) => learn(a),
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
    }
}

fn learn(args: LearnArgs) -> Result<()> {
    let base = args.config.as_deref().map(load_config).transpose()?;
    let binning = args
        .binning
        .resolve(base.as_ref().and_then(|b| b.binning));
    let streams = args
        .input
        .iter()
        .map(|p| ingest::ingest(p, binning))
        .collect::<Result<Vec<_>>>()?;
    let counts = if streams.len() == 1 {
        streams[0].counts.clone()
    } else {
        ingest::sum_streams(&streams)
    };
    let label = args
        .input
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join("+");
    let data = TrainingSet::new(counts, label)?;
    let learner = LearnerConfig {
        n_normal: args.n_normal,
        boundary_multiplier: args.multiplier,
        rate_floor: args.rate_floor,
    };
    let learned = learn_ladder(&data, &learner)?;
    for w in &learned.warnings {
        eprintln!("warning: {w}");
    }

    let mut file = ModelConfigFile::from_ladder(&learned.ladder, 0.5, 0.5);
    if let Some(b) = &base {
        file.alpha = b.alpha;
        file.threshold = b.threshold;
        file.report_sum = b.report_sum;
        file.a_low = b.a_low;
        file.a_high = b.a_high;
    }
    file.alpha = args.alpha.unwrap_or(file.alpha);
    file.threshold = args.threshold.unwrap_or(file.threshold);
    file.binning = binning;
    file.provenance = Some(Provenance {
        source: data.source_label.clone(),
        data_sha256: data.digest(),
        samples: data.counts.len(),
        n_requested: learned.requested_n,
        n_effective: learned.effective_n,
        boundary_multiplier: learner.boundary_multiplier,
        rate_floor: learner.rate_floor,
        warnings: learned.warnings.clone(),
    });
    // Refuse to write something that will not load back.
    file.detector()?;
    write_text(args.output.as_deref(), &file.to_toml()?, &mut std::io::stdout())
}

fn detect_one(
    input: &Path,
    output: Option<&Path>,
    cfg: &DetectorConfig,
    binning: Option<Binning>,
    mode: &str,
) -> Result<AlarmReport> {
    let series = ingest::ingest(input, binning)?;
    if series.counts.is_empty() {
        return Err(Error::Usage(format!(
            "{}: no complete bins after binning",
            input.display()
        )));
    }
    let out = detector::run(&series.counts, cfg)?;
    let mut w = open_output(output)?;
    report::write_trajectory(&mut w, &out.records)?;
    w.flush()?;
    Ok(AlarmReport {
        stream: input.display().to_string(),
        alarmed: out.alarm_step.is_some(),
        alarm_step: out.alarm_step,
        threshold: cfg.threshold,
        alpha: cfg.alpha,
        report_sum: cfg.reports_sum(),
        steps: out.records.len() as u64,
        mode: mode.to_string(),
    })
}

fn detect(args: DetectArgs) -> Result<()> {
    let file = load_config(&args.config)?;
    let (mode, mode_name) = match args.mode {
        ModeArg::Monitor => (AlarmMode::Monitor, "monitor"),
        ModeArg::Stop => (AlarmMode::StopAtAlarm, "stop"),
    };
    let cfg = detector_from(&file, args.alpha, args.threshold)?
        .with_report_sum(file.report_sum || args.report_sum)
        .with_mode(mode);
    let binning = args.binning.resolve(file.binning);

    let reports = if args.input.is_dir() {
        let out_dir = args.output.as_deref().ok_or_else(|| {
            Error::Usage("--output must name a directory when --input is one".into())
        })?;
        fs::create_dir_all(out_dir)?;
        let mut inputs: Vec<PathBuf> = fs::read_dir(&args.input)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        inputs.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
        inputs.sort();
        if inputs.is_empty() {
            return Err(Error::Usage(format!(
                "no .csv files in {}",
                args.input.display()
            )));
        }
        inputs
            .par_iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or_default().to_string_lossy();
                let out = out_dir.join(format!("{stem}.trajectory.csv"));
                detect_one(p, Some(&out), &cfg, binning, mode_name)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![detect_one(
            &args.input,
            args.output.as_deref(),
            &cfg,
            binning,
            mode_name,
        )?]
    };
    let text = report::alarm_reports_toml(&reports)?;
    match args.report.as_deref() {
        Some(p) => fs::write(p, text)?,
        // Keep stdout clean for the trajectory when it goes there.
        None if args.output.is_none() => eprint!("{text}"),
        None => print!("{text}"),
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let file = load_config(&args.config)?;
    let ladder = file.ladder()?;
    let model = file.transition()?;
    let mut rng = simulator::trial_rng(args.seed, 0);
    let path = match (args.day, args.event) {
        (_, Some(_)) | (true, None) => {
            let state = match args.event_state {
                EventStateArg::Low => 0,
                EventStateArg::High => ladder.normal_count() + 1,
            };
            let profile = DayProfile {
                slots: args.horizon,
                event: args.event.map(|(start, end)| EventWindow { start, end, state }),
            };
            simulator::sample_day(&ladder, &model, &profile, &mut rng)?
        }
        (false, None) => {
            let prior = file.prior()?;
            let n = ladder.normal_count();
            let mut scenario = ScenarioConfig::new(ladder, model, args.horizon, args.seed)?;
            scenario.prior = (1..=n).map(|s| prior.state(s)).collect();
            simulator::sample_path(&scenario, &mut rng)?
        }
    };
    if let Some(tc) = path.change_point {
        eprintln!("change point: step {tc}");
    }
    let mut w = open_output(args.output.as_deref())?;
    report::write_path(&mut w, &path, args.start_time, args.step_seconds)?;
    w.flush()?;
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let file = load_config(&args.config)?;
    let ladder = file.ladder()?;
    let model = file.transition()?;
    let grid = SimplexGrid::new(args.grid)?;
    let cost = CostModel::new(args.cf, args.cd)?;
    let options = SolverOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolverOptions::default()
    };
    let sol = value_iterate(&grid, &cost, &ladder, &model, &options)?;
    let convexity = check_convexity(&sol.policy, &grid);
    let threshold = check_threshold_in_sum(&sol.policy, &grid);
    let row = model.shared_row().unwrap_or_default();
    let rep = SolverReport::new(
        ladder.rates(),
        row,
        model.a_low(),
        model.a_high(),
        (cost.false_alarm, cost.delay),
        &grid,
        &options,
        &sol.value,
        &sol.policy,
        &convexity,
        &threshold,
    );
    if !sol.value.converged {
        eprintln!(
            "warning: not converged after {} iterations (residual {})",
            sol.value.iterations, sol.value.sup_norm_residual
        );
    }
    if let Some(p) = &args.output {
        let mut w = open_output(Some(p))?;
        report::write_policy(&mut w, &grid, &sol.value, &sol.policy)?;
        w.flush()?;
    }
    write_text(args.report.as_deref(), &rep.to_toml()?, &mut std::io::stdout())
}

fn eval(args: EvalArgs) -> Result<()> {
    let file = load_config(&args.config)?;
    let det = detector_from(&file, args.alpha, args.threshold)?;
    let n = det.ladder.normal_count();
    let mut scenario =
        ScenarioConfig::new(det.ladder.clone(), det.model.clone(), args.horizon, args.seed)?;
    scenario.prior = (1..=n).map(|s| det.prior.state(s)).collect();
    let thresholds = if args.thresholds.is_empty() {
        (1..10).map(|k| k as f64 / 10.0).collect()
    } else {
        args.thresholds.clone()
    };
    let rep = simulator::evaluate(&scenario, &det, args.trials, &thresholds)?;
    let mut w = open_output(args.output.as_deref())?;
    report::write_eval(&mut w, &rep)?;
    w.flush()?;
    let summary = EvalSummary::new(&rep, det.threshold, det.alpha).to_toml()?;
    write_text(args.report.as_deref(), &summary, &mut std::io::stderr())
}
