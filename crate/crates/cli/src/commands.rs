//! The `test`, `simulate`, `confseq` and `verify-theory` subcommands.

use std::path::PathBuf;

use clap::Args;
use exch_core::calibrate::{log_adjuster, log_calibrator};
use exch_core::confseq::{ConfInterval, ConfidenceSequence};
use exch_core::sim::{sample, sample_rep};
use exch_core::theory::{hull_suite, lemma_suite, nsm_suite};
use exch_core::{EvidenceTrajectory, LogEvidence, Symbol};
use rayon::prelude::*;

use crate::ingest::{ingest, Layout};
use crate::output::{fixed, log10, opt_fixed, sci, thin, Table};
use crate::plot::{Chart, Series};
use crate::{
    output, parse_source, Calibration, CliError, CliResult, EvidenceArgs, InputArgs, OutputArgs,
    EXIT_NOT_REJECTED, EXIT_OK, EXIT_REJECTED, EXIT_SUITE_FAILED,
};

/// Plotted points per series.
const PLOT_POINTS: usize = 2000;

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic source, e.g. `sticky` or `changepoint:0.1,0.4,5000`.
    #[arg(long)]
    pub source: String,
    /// Symbols per rep.
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent repetitions; more than one switches to a per-rep summary.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConfseqArgs {
    /// Miscoverage level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trials for the closure and nonincrease suites; the hull suite runs a
    /// thirtieth of this.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap in an unnormalized combination as a negative control.
    #[arg(long)]
    pub inject_fault: bool,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads the stream named by `input`. Synthetic sources are binary.
pub fn load_stream(input: &InputArgs, alphabet: usize) -> CliResult<Vec<Symbol>> {
    match (&input.input, &input.source) {
        (Some(path), _) => {
            let layout = match &input.column {
                Some(column) => {
                    if alphabet != 2 {
                        return Err(CliError::Config(
                            "--column produces a binary stream; use --alphabet 2".into(),
                        ));
                    }
                    Layout::Threshold {
                        column: column.clone(),
                        threshold: input.threshold,
                    }
                }
                None => Layout::Symbols { alphabet },
            };
            Ok(ingest(path, &layout)?)
        }
        (None, Some(source)) => {
            if alphabet != 2 {
                return Err(CliError::Config(
                    "synthetic sources are binary; use --alphabet 2".into(),
                ));
            }
            if input.length == 0 {
                return Err(CliError::Config("--length must be positive".into()));
            }
            Ok(sample(&parse_source(source)?, input.length, input.seed)?)
        }
        (None, None) => Err(CliError::Config(
            "one of --input or --source is required".into(),
        )),
    }
}

/// A finished run: the reported trajectory plus the raw-evidence confidence
/// intervals when the stream is binary.
struct Evaluated {
    trajectory: EvidenceTrajectory,
    conf: Option<Vec<ConfInterval>>,
}

fn evaluate(stream: &[Symbol], ev: &EvidenceArgs, with_conf: bool) -> CliResult<Evaluated> {
    let calibration = ev.calibration()?;
    let mut process = ev.family()?.build(ev.alphabet)?;
    let mut trajectory = EvidenceTrajectory::new(ev.alpha)?;
    let mut cs = (with_conf && ev.alphabet == 2)
        .then(|| ConfidenceSequence::new(ev.alpha))
        .transpose()?;
    let mut conf = cs.as_ref().map(|_| Vec::with_capacity(stream.len()));
    let mut running = f64::NEG_INFINITY;
    for &a in stream {
        let raw = process.push(a)?.ln();
        running = running.max(raw);
        let reported = match calibration {
            Calibration::Raw => raw,
            Calibration::PProcess => log_calibrator(-running.max(0.0))?,
            Calibration::Adjusted => log_adjuster(running.max(0.0))?,
        };
        trajectory.record(a, LogEvidence(reported));
        if let (Some(cs), Some(conf)) = (cs.as_mut(), conf.as_mut()) {
            conf.push(cs.push(a)?.interval);
        }
    }
    Ok(Evaluated { trajectory, conf })
}

fn trajectory_table(run: &Evaluated) -> Table {
    let mut table = Table::new(&[
        "t",
        "symbol",
        "log10_evidence",
        "p_value",
        "conf_lo",
        "conf_hi",
        "stopped",
    ]);
    for (i, p) in run.trajectory.points.iter().enumerate() {
        let bounds = run.conf.as_ref().and_then(|c| c[i].bounds());
        table.push(vec![
            p.t.to_string(),
            p.symbol.to_string(),
            fixed(log10(p.log_evidence)),
            sci(p.p_value),
            opt_fixed(bounds.map(|b| b.0)),
            opt_fixed(bounds.map(|b| b.1)),
            (p.stopped as u8).to_string(),
        ]);
    }
    table
}

fn trajectory_chart(title: &str, traj: &EvidenceTrajectory) -> Chart {
    let n = traj.len();
    let idx = thin(n, PLOT_POINTS);
    let path = idx
        .iter()
        .map(|&i| (i as f64 + 1.0, traj.points[i].log_evidence))
        .collect();
    let level = (1.0 / traj.alpha).ln();
    Chart::new(title, "t", "ln evidence")
        .with(Series::new("ln R_t", path))
        .with(
            Series::new(
                format!("ln(1/{})", traj.alpha),
                vec![(1.0, level), (n.max(2) as f64, level)],
            )
            .dashed(),
        )
}

fn summarize(traj: &EvidenceTrajectory) {
    let stop = traj
        .stopping_time()
        .map_or("not rejected".to_string(), |t| format!("rejected at t={t}"));
    eprintln!(
        "{} symbols, max log10 evidence {:.3}, {stop}",
        traj.len(),
        log10(traj.max_log_evidence()),
    );
}

fn verdict(traj: &EvidenceTrajectory) -> u8 {
    if traj.stopping_time().is_some() {
        EXIT_REJECTED
    } else {
        EXIT_NOT_REJECTED
    }
}

pub fn test(args: &TestArgs) -> CliResult<u8> {
    let stream = load_stream(&args.input, args.evidence.alphabet)?;
    let run = evaluate(&stream, &args.evidence, true)?;
    trajectory_table(&run).emit(args.output.out.as_deref())?;
    output::emit_plot(
        args.output.plot.as_deref(),
        &trajectory_chart("evidence", &run.trajectory),
    )?;
    summarize(&run.trajectory);
    Ok(verdict(&run.trajectory))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<u8> {
    let spec = parse_source(&args.source)?;
    if args.evidence.alphabet != 2 {
        return Err(CliError::Config(
            "synthetic sources are binary; use --alphabet 2".into(),
        ));
    }
    if args.length == 0 || args.reps == 0 {
        return Err(CliError::Config(
            "--length and --reps must be positive".into(),
        ));
    }
    if args.reps == 1 {
        let stream = sample_rep(&spec, args.length, args.seed, 0)?;
        let run = evaluate(&stream, &args.evidence, true)?;
        trajectory_table(&run).emit(args.output.out.as_deref())?;
        output::emit_plot(
            args.output.plot.as_deref(),
            &trajectory_chart(&spec.to_string(), &run.trajectory),
        )?;
        summarize(&run.trajectory);
        return Ok(verdict(&run.trajectory));
    }

    let runs: Vec<EvidenceTrajectory> = (0..args.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let stream = sample_rep(&spec, args.length, args.seed, rep)?;
            Ok(evaluate(&stream, &args.evidence, false)?.trajectory)
        })
        .collect::<CliResult<_>>()?;

    let mut table = Table::new(&[
        "rep",
        "stopping_time",
        "final_log10_evidence",
        "max_log10_evidence",
        "p_value",
    ]);
    for (rep, traj) in runs.iter().enumerate() {
        let last = traj.points.last().expect("length is positive");
        table.push(vec![
            rep.to_string(),
            traj.stopping_time()
                .map(|t| t.to_string())
                .unwrap_or_default(),
            fixed(log10(last.log_evidence)),
            fixed(log10(traj.max_log_evidence())),
            sci(last.p_value),
        ]);
    }
    table.emit(args.output.out.as_deref())?;

    let idx = thin(args.length, PLOT_POINTS);
    let chart = runs.iter().take(8).enumerate().fold(
        Chart::new(spec.to_string(), "t", "ln evidence"),
        |chart, (rep, traj)| {
            let path = idx
                .iter()
                .map(|&i| (i as f64 + 1.0, traj.points[i].log_evidence))
                .collect();
            chart.with(Series::new(format!("rep {rep}"), path))
        },
    );
    output::emit_plot(args.output.plot.as_deref(), &chart)?;

    let rejected = runs.iter().filter(|t| t.stopping_time().is_some()).count();
    eprintln!(
        "{rejected}/{} reps rejected at alpha={}",
        args.reps, args.evidence.alpha
    );
    Ok(if rejected == args.reps {
        EXIT_REJECTED
    } else {
        EXIT_NOT_REJECTED
    })
}

pub fn confseq(args: &ConfseqArgs) -> CliResult<u8> {
    let stream = load_stream(&args.input, 2)?;
    let mut cs = ConfidenceSequence::new(args.alpha)?;
    let mut table = Table::new(&[
        "t",
        "symbol",
        "log10_evidence",
        "lo",
        "hi",
        "run_lo",
        "run_hi",
        "empty",
    ]);
    let mut ones = 0u64;
    let (mut lo, mut hi, mut run_lo, mut run_hi, mut mean) =
        (vec![], vec![], vec![], vec![], vec![]);
    let mut emptied_at = None;
    for (i, &a) in stream.iter().enumerate() {
        let t = i as u64 + 1;
        let step = cs.push(a)?;
        ones += a as u64;
        let b = step.interval.bounds();
        let r = step.running.bounds();
        if step.running.is_empty() && emptied_at.is_none() {
            emptied_at = Some(t);
        }
        table.push(vec![
            t.to_string(),
            a.to_string(),
            fixed(log10(step.log_evidence.ln())),
            opt_fixed(b.map(|b| b.0)),
            opt_fixed(b.map(|b| b.1)),
            opt_fixed(r.map(|r| r.0)),
            opt_fixed(r.map(|r| r.1)),
            (step.running.is_empty() as u8).to_string(),
        ]);
        let x = t as f64;
        let nan = (f64::NAN, f64::NAN);
        lo.push((x, b.unwrap_or(nan).0));
        hi.push((x, b.unwrap_or(nan).1));
        run_lo.push((x, r.unwrap_or(nan).0));
        run_hi.push((x, r.unwrap_or(nan).1));
        mean.push((x, ones as f64 / x));
    }
    table.emit(args.output.out.as_deref())?;

    let idx = thin(stream.len(), PLOT_POINTS);
    let pick = |v: &[(f64, f64)]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let chart = Chart::new(
        format!("confidence sequence, alpha={}", args.alpha),
        "t",
        "probability of 1",
    )
    .with(Series::new("C_t lower", pick(&lo)).dashed())
    .with(Series::new("C_t upper", pick(&hi)).dashed())
    .with(Series::new("running lower", pick(&run_lo)))
    .with(Series::new("running upper", pick(&run_hi)))
    .with(Series::new("running mean", pick(&mean)));
    output::emit_plot(args.output.plot.as_deref(), &chart)?;

    match emptied_at {
        Some(t) => {
            eprintln!("running intersection empty from t={t}");
            Ok(EXIT_REJECTED)
        }
        None => {
            eprintln!("running intersection non-empty through t={}", stream.len());
            Ok(EXIT_NOT_REJECTED)
        }
    }
}

const LEMMA_HORIZON: usize = 4;
const LEMMA_TOL: f64 = 1e-10;
const HULL_MAX_HORIZON: usize = 6;
const HULL_TOL: f64 = 1e-9;
const NSM_HORIZON: usize = 3;
const NSM_TOL: f64 = 1e-12;

pub fn verify_theory(args: &VerifyArgs) -> CliResult<u8> {
    if args.trials == 0 {
        return Err(CliError::Config("--trials must be positive".into()));
    }
    let reports = [
        lemma_suite(
            args.trials,
            LEMMA_HORIZON,
            args.seed,
            LEMMA_TOL,
            args.inject_fault,
        )?,
        hull_suite(
            args.trials.div_ceil(30),
            HULL_MAX_HORIZON,
            args.seed.wrapping_add(1),
            HULL_TOL,
        )?,
        nsm_suite(args.trials, NSM_HORIZON, args.seed.wrapping_add(2), NSM_TOL)?,
    ];
    let mut text = String::new();
    if args.inject_fault {
        text.push_str("fault injected: closure suite uses the unnormalized combination\n");
    }
    for r in &reports {
        text.push_str(&format!("{r}\n"));
    }
    let passed = reports.iter().all(|r| r.passed());
    text.push_str(if passed {
        "all suites passed\n"
    } else {
        "some suites FAILED\n"
    });
    output::write_bytes(None, text.as_bytes())?;
    if let Some(path) = &args.out {
        output::write_bytes(Some(path), text.as_bytes())?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_SUITE_FAILED })
}
