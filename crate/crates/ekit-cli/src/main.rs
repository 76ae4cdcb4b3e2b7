//! `ekit` command-line harness.

// Negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod io;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ekit::betting::Strategy;
use ekit::confset::{self, RandomizedVote, UncertaintySet};
use ekit::core::{calibrate_e_to_p, calibrate_p_to_e, CalibratorSpec};
use ekit::eprocess::{self, BettingProcess, EProcessState, SprtConfig, SprtMode};
use ekit::merging::{self, CombineMode, Combined, EMergeRule, PMergeRule};
use ekit::multitest;
use ekit::risk::{self, EStatSpec, ForecastRecord, LossFunction};
use ekit::seed::rng_for;
use ekit::sim::{self, Study};
use ekit::thresholds::{self, ShapeClass};
use ekit::universal::{self, fit, SplitPlan};
use ekit::{EValue, PValue};
use io::{fmt17, to_csv, to_json, Columns, Sink};
use rand::Rng;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] ekit::Error),
    #[error("input error: {0}")]
    Input(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(ekit::Error::Infeasible(_) | ekit::Error::Degenerate(_) | ekit::Error::NoConvergence(_)) => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ekit", version, about = "E-values, e-processes and multiple testing")]
struct Cli {
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Emit schema-versioned JSON instead of plain text or CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunConfig {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a p-value to an e-value.
    Calibrate {
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum)]
        kind: CalKind,
        /// kappa for `power`, alpha for `all_or_nothing` and `bhy`.
        #[arg(long)]
        param: Option<f64>,
        /// Number of hypotheses for `bhy`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Convert an e-value to the p-value `min(1/e, 1)`.
    Etop {
        #[arg(long)]
        e: f64,
    },
    /// Merge the `e` column of a CSV file.
    MergeE {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ERule::Mean)]
        rule: ERule,
        /// Subset size for `ustat`.
        #[arg(long)]
        n: Option<usize>,
        /// Lambda for `martingale`, cap for `adaptive`.
        #[arg(long)]
        param: Option<f64>,
    },
    /// Merge the `p` column of a CSV file.
    MergeP {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = PRule::Bonferroni)]
        rule: PRule,
        /// Order for `order`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Combine one p-value with one e-value.
    CombinePe {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        e: f64,
        #[arg(long, value_enum, default_value_t = PeMode::Ie)]
        mode: PeMode,
        /// Mixing weight for `emix`.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Run a betting e-process over the `e` column; prints the trajectory.
    Eprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Bet::Adaptive)]
        strategy: Bet,
        /// Lambda for `constant`, cap for `adaptive`.
        #[arg(long, default_value_t = 0.5)]
        param: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Wald's SPRT over the `llr` column of log-likelihood ratios.
    Sprt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = SprtKind::Conservative)]
        mode: SprtKind,
    },
    /// Split and subsampled likelihood-ratio test of `N(mu0, 1)` on the `x` column.
    Ui {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        mu0: f64,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Multiple testing on the `e` (and `p`, `boost`) columns.
    Ebh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Variant::Plain)]
        variant: Variant,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// FWER-adjusted e-values for the `e` column.
    Fwer {
        #[arg(long)]
        input: PathBuf,
    },
    /// e-confidence set for a unit-variance Gaussian mean from the `x` column,
    /// using the normal-mixture e-value on a grid.
    Eci {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Prior scale of the mixture.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
    },
    /// e-BY levels for selected indices.
    Eby {
        /// Comma-separated 0-based indices.
        #[arg(long, value_delimiter = ',')]
        selected: Vec<usize>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Majority vote over the intervals in the `lo`, `hi` (and `w`) columns.
    Mv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Vote::Majority)]
        variant: Vote,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Improved thresholds; the whole table unless `--class` is given.
    Thresholds {
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Sequential backtest over `x`, `r` (and `z`) columns.
    Backtest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        stat: Stat,
        #[arg(long, default_value_t = 0.975)]
        beta: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Seeded simulation studies.
    Simulate {
        #[arg(long)]
        study: String,
        #[command(flatten)]
        run: RunConfig,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CalKind {
    Power,
    Mixture,
    Linear2,
    Sqrtinv,
    Neglog,
    AllOrNothing,
    Bhy,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ERule {
    Mean,
    Product,
    Ustat,
    Martingale,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PRule {
    Bonferroni,
    Order,
    TwiceMean,
    EGeometric,
    Harmonic,
    Hommel,
    Simes,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PeMode {
    Ie,
    Ip,
    Emix,
    Pmin,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Bet {
    Product,
    Constant,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SprtKind {
    Conservative,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Variant {
    Plain,
    Boosted,
    Minadapt,
    Ge,
    De,
    Ue,
    Closed,
    Bhy,
    Epbh,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Vote {
    Majority,
    RandomizedU,
    RandomizedR,
    Exchangeable,
    Weighted,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Stat {
    Mean,
    VarianceMean,
    Quantile,
    ExpectedLoss,
    EsVar,
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| CliError::Usage(format!("{what} is required here")))
}

fn calibrator(kind: CalKind, param: Option<f64>, k: Option<usize>) -> Result<CalibratorSpec> {
    Ok(match kind {
        CalKind::Power => CalibratorSpec::Power { kappa: param.unwrap_or(0.5) },
        CalKind::Mixture => CalibratorSpec::Mixture,
        CalKind::Linear2 => CalibratorSpec::Linear2,
        CalKind::Sqrtinv => CalibratorSpec::Sqrtinv,
        CalKind::Neglog => CalibratorSpec::Neglog,
        CalKind::AllOrNothing => CalibratorSpec::AllOrNothing { alpha: need(param, "--param (alpha)")? },
        CalKind::Bhy => CalibratorSpec::BhyTruncation { k: need(k, "--k")?, alpha: need(param, "--param (alpha)")? },
    })
}

/// A scalar result: plain text or a JSON envelope.
fn scalar(cli: &Cli, sink: &Sink, command: &str, name: &str, v: f64) -> Result<()> {
    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            name: &'a str,
            value: f64,
        }
        sink.write(&to_json(command, &Out { name, value: v })?)
    } else {
        sink.write(&format!("{}\n", fmt17(v)))
    }
}

fn uniforms(seed: u64, label: &str, n: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, label, 0);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn run(cli: &Cli) -> Result<()> {
    let sink = Sink::new(cli.output.clone());
    match &cli.command {
        Command::Calibrate { p, kind, param, k } => {
            let spec = calibrator(*kind, *param, *k)?;
            let e = calibrate_p_to_e(PValue::new(*p)?, &spec)?;
            scalar(cli, &sink, "calibrate", "e", e.get())
        }
        Command::Etop { e } => scalar(cli, &sink, "etop", "p", calibrate_e_to_p(EValue::new(*e)?).get()),
        Command::MergeE { input, rule, n, param } => {
            let cols = Columns::read(input)?;
            let es = cols.get("e")?;
            let k = es.len();
            let rule = match rule {
                ERule::Mean => {
                    let mut w = vec![1.0 / k as f64; k];
                    w.push(0.0);
                    EMergeRule::WeightedMean { weights: w }
                }
                ERule::Product => EMergeRule::Product,
                ERule::Ustat => EMergeRule::Ustat { n: need(*n, "--n")? },
                ERule::Martingale => EMergeRule::Martingale { strategy: Strategy::Constant { lambda: param.unwrap_or(0.5) } },
                ERule::Adaptive => EMergeRule::EmpiricallyAdaptive { gamma: param.unwrap_or(0.5) },
            };
            scalar(cli, &sink, "merge-e", "e", merging::merge_e(es, &rule)?)
        }
        Command::MergeP { input, rule, k } => {
            let cols = Columns::read(input)?;
            let ps = cols.get("p")?;
            let rule = match rule {
                PRule::Bonferroni => PMergeRule::Bonferroni,
                PRule::Order => PMergeRule::Order { k: need(*k, "--k")? },
                PRule::TwiceMean => PMergeRule::TwiceMean,
                PRule::EGeometric => PMergeRule::EGeometric,
                PRule::Harmonic => PMergeRule::HarmonicTk,
                PRule::Hommel => PMergeRule::Hommel,
                PRule::Simes => PMergeRule::SimesUnsafe { assume_prds: true },
            };
            scalar(cli, &sink, "merge-p", "p", merging::merge_p(ps, &rule)?)
        }
        Command::CombinePe { p, e, mode, lambda } => {
            let cal = CalibratorSpec::Power { kappa: 0.5 };
            let mode = match mode {
                PeMode::Ie => CombineMode::Ie { calibrator: cal },
                PeMode::Ip => CombineMode::Ip,
                PeMode::Emix => CombineMode::EMix { lambda: *lambda, calibrator: cal },
                PeMode::Pmin => CombineMode::PMin,
            };
            match merging::combine_pe(*p, *e, &mode)? {
                Combined::E(v) => scalar(cli, &sink, "combine-pe", "e", v),
                Combined::P(v) => scalar(cli, &sink, "combine-pe", "p", v),
            }
        }
        Command::Eprocess { input, strategy, param, alpha } => {
            let cols = Columns::read(input)?;
            let es = cols.get("e")?;
            let strat = match strategy {
                Bet::Product => Strategy::all_in(),
                Bet::Constant => Strategy::Constant { lambda: *param },
                Bet::Adaptive => Strategy::EmpiricallyAdaptive { gamma: *param },
            };
            let mut proc = BettingProcess::new(&strat)?;
            let mut rows = Vec::with_capacity(es.len());
            let mut states: Vec<EProcessState> = Vec::with_capacity(es.len());
            for e in es {
                let lambda = proc.lambda();
                let s = *proc.step(*e)?;
                rows.push(vec![s.t() as f64, *e, lambda, s.wealth(), s.history_max()]);
                states.push(s);
            }
            let crossing = states.iter().find(|s| s.ville_test(*alpha).unwrap_or(false)).map(|s| s.t());
            if cli.json {
                #[derive(Serialize)]
                struct Out {
                    states: Vec<EProcessState>,
                    first_crossing: Option<u64>,
                }
                sink.write(&to_json("eprocess", &Out { states, first_crossing: crossing })?)
            } else {
                sink.write(&to_csv(&["t", "e", "lambda", "wealth", "running_max"], &rows)?)
            }
        }
        Command::Sprt { input, alpha, beta, mode } => {
            let cols = Columns::read(input)?;
            let mode = match mode {
                SprtKind::Conservative => SprtMode::Conservative,
                SprtKind::Classical => SprtMode::Classical,
            };
            let cfg = SprtConfig::new(*alpha, *beta, mode)?;
            let out = eprocess::sprt(cols.get("llr")?.iter().copied(), &cfg);
            sink.write(&to_json("sprt", &out)?)
        }
        Command::Ui { input, mu0, fraction, alpha, run } => {
            let cols = Columns::read(input)?;
            let xs = cols.get("x")?;
            let null = |_: &[f64]| Ok(fit::gaussian_at(*mu0));
            let plan = SplitPlan::coin_flips(xs.len(), *fraction, run.seed, 0)?;
            let split = universal::split_lrt_e(xs, &plan, fit::gaussian_mean, null)?.get();
            let sub = universal::subsampled_e(xs, run.reps.max(1), *fraction, run.seed, fit::gaussian_mean, null)?;
            let (reject, at) = universal::subsampled_lrt_sequential_test(&sub.splits, *alpha)?;
            #[derive(Serialize)]
            struct Out {
                split_e: f64,
                subsampled_e: f64,
                splits: usize,
                reject: bool,
                rejected_at_split: Option<usize>,
            }
            let out =
                Out { split_e: split, subsampled_e: sub.value.get(), splits: sub.splits.len(), reject, rejected_at_split: at };
            sink.write(&to_json("ui", &out)?)
        }
        Command::Ebh { input, alpha, variant, seed } => {
            let cols = Columns::read(input)?;
            let set = match variant {
                Variant::Plain => multitest::ebh(cols.get("e")?, *alpha)?,
                Variant::Boosted => multitest::boosted_ebh(cols.get("e")?, cols.get("boost")?, *alpha)?,
                Variant::Minadapt => multitest::ebh_minimally_adaptive(cols.get("e")?, *alpha)?,
                Variant::Closed => multitest::closed_ebh(cols.get("e")?, *alpha)?,
                Variant::Ge => {
                    let es = cols.get("e")?;
                    multitest::ge_bh(es, *alpha, &uniforms(*seed, "cli/ge", es.len()))?
                }
                Variant::De => {
                    let es = cols.get("e")?;
                    let us = uniforms(*seed, "cli/de", es.len());
                    multitest::de_bh(es, *alpha, &us, &uniforms(*seed, "cli/de-second", es.len()))?
                }
                Variant::Ue => multitest::ue_bh(cols.get("e")?, *alpha, uniforms(*seed, "cli/ue", 1)[0])?,
                Variant::Bhy => multitest::bhy(cols.get("p")?, *alpha)?,
                Variant::Epbh => multitest::ep_bh(cols.get("p")?, cols.get("e")?, *alpha)?,
            };
            sink.write(&to_json("ebh", &set)?)
        }
        Command::Fwer { input } => {
            let cols = Columns::read(input)?;
            let es = cols.get("e")?;
            let adj = multitest::fwer_adjust(es)?;
            let rows: Vec<Vec<f64>> = es.iter().zip(&adj).enumerate().map(|(i, (e, a))| vec![i as f64, *e, *a]).collect();
            if cli.json {
                sink.write(&to_json("fwer", &adj)?)
            } else {
                sink.write(&to_csv(&["index", "e", "adjusted_e"], &rows)?)
            }
        }
        Command::Eci { input, alpha, tau, lo, hi, grid } => {
            let cols = Columns::read(input)?;
            let xs = cols.get("x")?;
            if *grid < 2 || !(lo < hi) {
                return Err(CliError::Usage("need --lo < --hi and --grid >= 2".into()));
            }
            if !(*tau > 0.0) {
                return Err(CliError::Usage("--tau must be positive".into()));
            }
            let n = xs.len() as f64;
            let sum: f64 = xs.iter().sum();
            let t2 = tau * tau;
            // Normal-mixture likelihood ratio of N(theta + m, 1) with m ~ N(0, tau^2).
            let e = |theta: f64, _: f64| {
                let s = sum - n * theta;
                ((t2 * s * s) / (2.0 * (1.0 + n * t2)) - 0.5 * (1.0 + n * t2).ln()).exp()
            };
            let pts: Vec<f64> = (0..*grid).map(|i| lo + (hi - lo) * i as f64 / (*grid - 1) as f64).collect();
            let sel = confset::eci_from_evaluator(&pts, e, *alpha)?;
            sink.write(&to_json("eci", &sel.set)?)
        }
        Command::Eby { selected, k, delta } => {
            let levels = confset::eby_levels(selected, *k, *delta)?;
            if cli.json {
                sink.write(&to_json("eby", &levels)?)
            } else {
                let rows: Vec<Vec<f64>> = levels.iter().map(|(i, l)| vec![*i as f64, *l]).collect();
                sink.write(&to_csv(&["index", "level"], &rows)?)
            }
        }
        Command::Mv { input, variant, tau, seed } => {
            let cols = Columns::read(input)?;
            let (lo, hi) = (cols.get("lo")?, cols.get("hi")?);
            let sets: Vec<UncertaintySet> =
                lo.iter().zip(hi).map(|(a, b)| UncertaintySet::interval(*a, *b, 0.0)).collect::<ekit::Result<_>>()?;
            let u = uniforms(*seed, "cli/mv", 1)[0];
            let set = match variant {
                Vote::Majority => confset::majority_vote(&sets, *tau)?,
                Vote::RandomizedU => confset::mv_randomized(&sets, u, RandomizedVote::Cu)?,
                Vote::RandomizedR => confset::mv_randomized(&sets, u, RandomizedVote::Cr)?,
                Vote::Exchangeable => confset::mv_exchangeable(&sets)?,
                Vote::Weighted => confset::mv_weighted(&sets, cols.get("w")?, u)?,
            };
            sink.write(&to_json("mv", &set)?)
        }
        Command::Thresholds { class, alpha } => match (class, alpha) {
            (Some(c), Some(a)) => {
                let class: ShapeClass = c.parse()?;
                scalar(cli, &sink, "thresholds", "t_alpha", thresholds::t_alpha(class, *a)?)
            }
            (None, None) => emit_table(cli, &sink, &sim::thresholds_study()?),
            _ => Err(CliError::Usage("give both --class and --alpha, or neither".into())),
        },
        Command::Backtest { input, stat, beta, alpha } => {
            let cols = Columns::read(input)?;
            let (xs, rs) = (cols.get("x")?, cols.get("r")?);
            let zs = cols.optional("z");
            let spec = match stat {
                Stat::Mean => EStatSpec::Mean,
                Stat::VarianceMean => EStatSpec::VarianceMean,
                Stat::Quantile => EStatSpec::Quantile { beta: *beta },
                Stat::ExpectedLoss => EStatSpec::ExpectedLoss { a: 0.0, loss: LossFunction::Square },
                Stat::EsVar => EStatSpec::EsVar { beta: *beta },
            };
            let records: Vec<ForecastRecord> = xs
                .iter()
                .zip(rs)
                .enumerate()
                .map(|(t, (x, r))| ForecastRecord { t: t as u64 + 1, x: *x, r: *r, z: zs.map(|z| z[t]) })
                .collect();
            let bt = risk::backtest(&records, &spec, &risk::default_strategy())?;
            let first = bt.first_rejection(*alpha)?;
            if cli.json {
                #[derive(Serialize)]
                struct Out<'a> {
                    e_values: &'a [f64],
                    /// May overflow to infinity (serialised as null); the log stays finite.
                    final_wealth: f64,
                    final_log_wealth: f64,
                    first_rejection: Option<u64>,
                }
                sink.write(&to_json(
                    "backtest",
                    &Out { e_values: &bt.e_values, final_wealth: bt.final_state().wealth(),
                        final_log_wealth: bt.final_state().log_wealth(),
                        first_rejection: first,
                     },
                )?)
            } else {
                let rows: Vec<Vec<f64>> =
                    bt.e_values.iter().zip(&bt.states).map(|(e, s)| vec![s.t() as f64, *e, s.wealth()]).collect();
                sink.write(&to_csv(&["t", "e", "wealth"], &rows)?)
            }
        }
        Command::Simulate { study, run } => {
            let study: Study = study.parse().map_err(|e: ekit::Error| {
                CliError::Usage(format!(
                    "{e}; expected one of wald, thresholds, ebh_power, split_p0, mv_coverage, momom, backtest"
                ))
            })?;
            let table = sim::run_study(study, run.reps, run.seed)?;
            emit_table(cli, &sink, &table)?;
            if let (Some(path), false) = (sink.path(), cli.json) {
                let summary = path.with_extension("summary.json");
                #[derive(Serialize)]
                struct Summary<'a> {
                    study: &'a str,
                    seed: u64,
                    reps: usize,
                    summary: &'a std::collections::BTreeMap<String, f64>,
                }
                let body = to_json("simulate", &Summary { study: &table.name, seed: run.seed, reps: run.reps, summary: &table.summary })?;
                std::fs::write(&summary, body).map_err(|e| CliError::Io(format!("{}: {e}", summary.display())))?;
            }
            Ok(())
        }
    }
}

fn emit_table(cli: &Cli, sink: &Sink, table: &sim::Table) -> Result<()> {
    if cli.json {
        sink.write(&to_json("table", table)?)
    } else {
        let mut header = vec![table.label_column.clone()];
        header.extend(table.columns.iter().cloned());
        sink.write(&io::to_labelled_csv(&header, &table.labels, &table.rows)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ekit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
