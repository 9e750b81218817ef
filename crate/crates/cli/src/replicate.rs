//! Canned experiments with pinned seeds.
//!
//! | id    | source                        | horizon | output                          |
//! |-------|-------------------------------|---------|---------------------------------|
//! | fig3a | `Ber(0.5)`                    | 1e4     | quantile band, `-ln t - C`      |
//! | fig3b | `Ber(0.2)`                    | 1e4     | quantile band, `-ln t - C`      |
//! | fig4a | Markov `(0.1, 0.9)`           | 1e4     | quantile band, slope `r*` line  |
//! | fig4b | Markov `(0.4, 0.6)`           | 1e4     | quantile band, slope `r*` line  |
//! | fig5a | sticky chain                  | 1e5     | quantile band, `sqrt(t ln ln t)`|
//! | fig5b | one-sided control             | 1e5     | quantile band, `sqrt(t ln ln t)`|
//! | fig7  | `Ber(0.1)` then `Ber(0.4)`    | 1e4     | quantile band                   |
//! | fig8a | rain CSV, else Markov stand-in| 5000    | confidence sequences            |
//! | fig8b | `Ber(0.2)`                    | 5000    | confidence sequences            |
//!
//! Evidence columns are `log10`.

use std::path::PathBuf;

use clap::Args;
use exch_core::confseq::ConfidenceSequence;
use exch_core::eprocess::REGRET_CONSTANT;
use exch_core::sim::{
    fluctuation_band, quantile_sorted, run_experiment, sample, EvidenceFamily, ExperimentConfig,
    SourceSpec,
};
use exch_core::Symbol;

use crate::ingest::{ingest, Layout};
use crate::output::{self, fixed, log10, thin, Table};
use crate::plot::{Chart, Series};
use crate::{CliError, CliResult, EXIT_OK};

const ROWS: usize = 1000;
const CONFSEQ_ALPHAS: [f64; 3] = [0.01, 0.05, 0.2];

type Points = Vec<(f64, f64)>;

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// fig3a, fig3b, fig4a, fig4b, fig5a, fig5b, fig7, fig8a or fig8b.
    pub figure: String,
    /// Repetitions for the quantile bands.
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Overrides the pinned seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the horizon.
    #[arg(long)]
    pub length: Option<usize>,
    /// Data file for fig8a.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV column for fig8a, binarized as `value > threshold`.
    #[arg(long, requires = "input")]
    pub column: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
enum Reference {
    None,
    /// `-ln t - C`.
    RegretFloor,
    /// `r* t`.
    Slope,
    /// `sqrt(t ln ln t)`.
    Fluctuation,
}

enum Figure {
    Band {
        source: SourceSpec,
        horizon: usize,
        seed: u64,
        reference: Reference,
    },
    Confseq {
        source: SourceSpec,
        horizon: usize,
        seed: u64,
    },
}

fn figure(id: &str) -> CliResult<Figure> {
    let band = |source, horizon, seed, reference| Figure::Band {
        source,
        horizon,
        seed,
        reference,
    };
    Ok(match id {
        "fig3a" => band(
            SourceSpec::Bernoulli { p: 0.5 },
            10_000,
            301,
            Reference::RegretFloor,
        ),
        "fig3b" => band(
            SourceSpec::Bernoulli { p: 0.2 },
            10_000,
            302,
            Reference::RegretFloor,
        ),
        "fig4a" => band(SourceSpec::markov(0.1, 0.9), 10_000, 401, Reference::Slope),
        "fig4b" => band(SourceSpec::markov(0.4, 0.6), 10_000, 402, Reference::Slope),
        "fig5a" => band(SourceSpec::Sticky, 100_000, 501, Reference::Fluctuation),
        "fig5b" => band(SourceSpec::OneSided, 100_000, 502, Reference::Fluctuation),
        "fig7" => band(
            SourceSpec::Changepoint {
                p: 0.1,
                q: 0.4,
                n: 5000,
            },
            10_000,
            701,
            Reference::None,
        ),
        // stationary share of ones is 0.45 / 0.75 = 0.6
        "fig8a" => Figure::Confseq {
            source: SourceSpec::markov(0.45, 0.7),
            horizon: 5000,
            seed: 801,
        },
        "fig8b" => Figure::Confseq {
            source: SourceSpec::Bernoulli { p: 0.2 },
            horizon: 5000,
            seed: 802,
        },
        _ => return Err(CliError::Config(format!(
            "unknown figure {id:?} (fig3a, fig3b, fig4a, fig4b, fig5a, fig5b, fig7, fig8a, fig8b)"
        ))),
    })
}

pub fn replicate(args: &ReplicateArgs) -> CliResult<u8> {
    if args.input.is_some() && args.figure != "fig8a" {
        return Err(CliError::Config("--input applies to fig8a only".into()));
    }
    match figure(&args.figure)? {
        Figure::Band {
            source,
            horizon,
            seed,
            reference,
        } => band(
            args,
            &source,
            args.length.unwrap_or(horizon),
            args.seed.unwrap_or(seed),
            reference,
        ),
        Figure::Confseq {
            source,
            horizon,
            seed,
        } => {
            let stream = match &args.input {
                Some(path) => {
                    let layout = match &args.column {
                        Some(column) => Layout::Threshold {
                            column: column.clone(),
                            threshold: args.threshold,
                        },
                        None => Layout::Symbols { alphabet: 2 },
                    };
                    ingest(path, &layout)?
                }
                None => {
                    let n = args.length.unwrap_or(horizon);
                    if n == 0 {
                        return Err(CliError::Config("--length must be positive".into()));
                    }
                    sample(&source, n, args.seed.unwrap_or(seed))?
                }
            };
            confseq_bands(args, &stream)
        }
    }
}

fn band(
    args: &ReplicateArgs,
    source: &SourceSpec,
    horizon: usize,
    seed: u64,
    reference: Reference,
) -> CliResult<u8> {
    if horizon == 0 || args.reps == 0 {
        return Err(CliError::Config(
            "--length and --reps must be positive".into(),
        ));
    }
    let cfg =
        ExperimentConfig::new(EvidenceFamily::default(), horizon, args.reps, seed).keep_paths(true);
    let result = run_experiment(source, &cfg)?;
    let paths: Vec<&Vec<f64>> = result.reps.iter().filter_map(|r| r.path.as_ref()).collect();
    let rstar = result.rstar;

    let reference_at = |t: f64| -> f64 {
        match reference {
            Reference::None => f64::NAN,
            Reference::RegretFloor => -t.ln() - REGRET_CONSTANT,
            Reference::Slope => rstar.map_or(f64::NAN, |r| r * t),
            Reference::Fluctuation => fluctuation_band(t, 1.0),
        }
    };

    let mut table = Table::new(&["t", "median", "q10", "q90", "reference"]);
    let (mut med, mut lo, mut hi, mut refs) = (vec![], vec![], vec![], vec![]);
    let mut column = Vec::with_capacity(paths.len());
    for i in thin(horizon, ROWS) {
        column.clear();
        column.extend(paths.iter().map(|p| p[i]));
        column.sort_by(f64::total_cmp);
        let t = i as f64 + 1.0;
        let (q10, q50, q90) = (
            quantile_sorted(&column, 0.1),
            quantile_sorted(&column, 0.5),
            quantile_sorted(&column, 0.9),
        );
        let r = reference_at(t);
        table.push(vec![
            (i + 1).to_string(),
            fixed(log10(q50)),
            fixed(log10(q10)),
            fixed(log10(q90)),
            fixed(log10(r)),
        ]);
        med.push((t, log10(q50)));
        lo.push((t, log10(q10)));
        hi.push((t, log10(q90)));
        refs.push((t, log10(r)));
    }
    table.emit(args.out.as_deref())?;

    let mut chart = Chart::new(
        format!("{} ({source}, {} reps)", args.figure, args.reps),
        "t",
        "log10 evidence",
    )
    .with(Series::new("median", med))
    .with(Series::new("10%", lo).dashed())
    .with(Series::new("90%", hi).dashed());
    if !matches!(reference, Reference::None) {
        chart = chart.with(Series::new("reference", refs));
    }
    output::emit_plot(args.plot.as_deref(), &chart)?;
    eprintln!(
        "{}: {} reps of {horizon} symbols from {source}",
        args.figure, args.reps
    );
    Ok(EXIT_OK)
}

fn confseq_bands(args: &ReplicateArgs, stream: &[Symbol]) -> CliResult<u8> {
    let mut seqs = CONFSEQ_ALPHAS
        .iter()
        .map(|&a| ConfidenceSequence::new(a))
        .collect::<Result<Vec<_>, _>>()?;
    let keep = thin(stream.len(), ROWS);
    let mut next = keep.iter().peekable();
    let mut table = Table::new(&["t", "alpha", "running_mean", "run_lo", "run_hi"]);
    let mut mean_series = Vec::new();
    // (lower, upper) series per alpha
    let mut bounds: Vec<(Points, Points)> = vec![(vec![], vec![]); CONFSEQ_ALPHAS.len()];
    let mut ones = 0u64;
    for (i, &a) in stream.iter().enumerate() {
        ones += a as u64;
        let steps = seqs
            .iter_mut()
            .map(|cs| cs.push(a))
            .collect::<Result<Vec<_>, _>>()?;
        if next.peek() != Some(&&i) {
            continue;
        }
        next.next();
        let t = i as f64 + 1.0;
        let mean = ones as f64 / t;
        mean_series.push((t, mean));
        for (k, step) in steps.iter().enumerate() {
            let (l, h) = step.running.bounds().unwrap_or((f64::NAN, f64::NAN));
            table.push(vec![
                (i + 1).to_string(),
                CONFSEQ_ALPHAS[k].to_string(),
                fixed(mean),
                fixed(l),
                fixed(h),
            ]);
            bounds[k].0.push((t, l));
            bounds[k].1.push((t, h));
        }
    }
    table.emit(args.out.as_deref())?;

    let mut chart = Chart::new(
        format!("{}: running confidence sequences", args.figure),
        "t",
        "probability of 1",
    )
    .with(Series::new("running mean", mean_series));
    for (k, (l, h)) in bounds.into_iter().enumerate() {
        let alpha = CONFSEQ_ALPHAS[k];
        chart = chart
            .with(Series::new(format!("alpha={alpha} lower"), l))
            .with(Series::new(format!("alpha={alpha} upper"), h).dashed());
    }
    output::emit_plot(args.plot.as_deref(), &chart)?;
    for (k, cs) in seqs.iter().enumerate() {
        let state = match cs.running().bounds() {
            Some((l, h)) => format!("[{l:.4}, {h:.4}]"),
            None => "empty".to_string(),
        };
        eprintln!(
            "{}: alpha={} running interval {state}",
            args.figure, CONFSEQ_ALPHAS[k]
        );
    }
    Ok(EXIT_OK)
}
