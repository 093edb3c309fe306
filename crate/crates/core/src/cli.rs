//! Batch command-line front end. Every subcommand validates its
//! arguments, runs one verification and writes a JSON or CSV report that
//! embeds the resolved configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::selfdecomp::{
    conjecture2_probe, integer_alpha_factorization_mc, verify_invgamma_bellshape, InvGammaPower, LogBetaExample,
};
use crate::sign::{verify_bell_shape, GridOptions};
use crate::stable::sampling::rng_from_seed;
use crate::stable::{sample_stable, Alpha, Precision, SeriesConfig, StableDensity};
use crate::tp::{expsum_kernel, non_tp2_witness, scan_minors, vd_bound_check};
use crate::wbs::{verify_wbs, ChainSpec};
use crate::yamazato::{factorization_residual, SpectralConfig};

/// Environment variable naming the directory reports go to when
/// `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "BELLSHAPE_OUTPUT_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "bellshape", version, about = "Numerical checks of the bell shape of one-sided stable densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Report file; defaults to $BELLSHAPE_OUTPUT_DIR/<subcommand>.<ext>,
    /// or standard output when that is unset.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Add a wall-clock `timestamp` field to the report.
    #[arg(long, global = true)]
    pub timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density or one derivative of f_alpha at given points.
    Eval(EvalArgs),
    /// Derivatives 0..=max-order of f_alpha at given points.
    Derivs(DerivsArgs),
    /// Zero counts of f_alpha^(n) for n = 1..=max-order.
    Bellshape(BellshapeArgs),
    /// Residual of the exponent identity lambda^alpha = Psi_ME + Psi_sum.
    Factorize(FactorizeArgs),
    /// Sign profiles along the exponential convolution chain.
    Wbs(WbsArgs),
    /// Minor scans of convolution kernels.
    TpCheck(TpArgs),
    /// Self-decomposable examples: log-Beta profiles or inverse Gamma powers.
    Conjecture(ConjectureArgs),
    /// Monte Carlo check of X_{1/n} against a product of inverse Gammas.
    FactorCheck(FactorCheckArgs),
    /// Draws from the stable law.
    Sample(SampleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Derivs(_) => "derivs",
            Command::Bellshape(_) => "bellshape",
            Command::Factorize(_) => "factorize",
            Command::Wbs(_) => "wbs",
            Command::TpCheck(_) => "tp-check",
            Command::Conjecture(_) => "conjecture",
            Command::FactorCheck(_) => "factor-check",
            Command::Sample(_) => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionArg {
    Double,
    Extended,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long, value_enum, default_value_t = PrecisionArg::Extended)]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 1e-12)]
    pub rel_accuracy: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_terms: usize,
}

impl SeriesArgs {
    fn resolve(&self) -> Result<SeriesConfig> {
        let cfg = SeriesConfig {
            precision: match self.precision {
                PrecisionArg::Double => Precision::Double,
                PrecisionArg::Extended => Precision::Extended,
            },
            rel_accuracy: self.rel_accuracy,
            max_terms: self.max_terms,
            ..SeriesConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = GridOptions::default().points)]
    pub points: usize,
    #[arg(long, default_value_t = GridOptions::default().refinement_depth)]
    pub refinement_depth: usize,
    #[arg(long, default_value_t = 0.0)]
    pub zero_tolerance: f64,
    /// Left end of a fixed grid; needs --hi.
    #[arg(long, requires = "hi")]
    pub lo: Option<f64>,
    /// Right end of a fixed grid; needs --lo.
    #[arg(long, requires = "lo")]
    pub hi: Option<f64>,
}

impl GridArgs {
    fn resolve(&self) -> Result<GridOptions> {
        if self.points < 2 {
            return Err(Error::InvalidInput("--points must be at least 2".into()));
        }
        if !(self.zero_tolerance >= 0.0) {
            return Err(Error::InvalidInput("--zero-tolerance must be nonnegative".into()));
        }
        let range = match (self.lo, self.hi) {
            (Some(lo), Some(hi)) if lo > 0.0 && hi > lo => Some((lo, hi)),
            (Some(lo), Some(hi)) => return Err(Error::InvalidInput(format!("need 0 < lo < hi, got [{lo}, {hi}]"))),
            _ => None,
        };
        Ok(GridOptions {
            points: self.points,
            refinement_depth: self.refinement_depth,
            zero_tolerance: self.zero_tolerance,
            range,
            ..GridOptions::default()
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Evaluation points (repeatable).
    #[arg(long, required = true, num_args = 1.., allow_negative_numbers = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub order: usize,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DerivsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, required = true, num_args = 1.., allow_negative_numbers = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BellshapeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FactorizeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Transform arguments (repeatable).
    #[arg(long, required = true, num_args = 1.., allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub terms: usize,
    /// Largest accepted |residual|.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = SpectralConfig::default().tolerance)]
    pub spectral_tolerance: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WbsArgs {
    /// Number of exponential factors after the base mixture.
    #[arg(long)]
    pub n: usize,
    /// Highest derivative order examined; defaults to n + 3.
    #[arg(long)]
    pub i_max: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// f_alpha(x - y); a negative 2x2 minor is expected.
    Stable,
    /// Truncated exponential-sum density; all minors are expected nonnegative.
    ExpSum,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TpArgs {
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = KernelKind::ExpSum)]
    pub kernel: KernelKind,
    /// Exponential factors in the exp-sum kernel.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 2.0)]
    pub span: f64,
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    /// Random inputs for the variation-diminishing check.
    #[arg(long, default_value_t = 100)]
    pub vd_trials: usize,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// -log of a Beta(a, b) variable.
    LogBeta,
    /// Gamma(t)^(-a).
    InvGamma,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConjectureArgs {
    #[arg(long, value_enum, default_value_t = Family::LogBeta)]
    pub family: Family,
    /// Beta parameter a, or the power a for the inverse Gamma family.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 4.5)]
    pub b: f64,
    /// Gamma shape for the inverse Gamma family.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Highest derivative order.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FactorCheckArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
}

/// Outcome of one subcommand: the JSON report, its CSV rendering and
/// whether every asserted check passed.
struct Outcome {
    report: Value,
    table: Table,
    pass: bool,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            out.write_record(r).map_err(io)?;
        }
        out.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))
    }
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn alpha(a: f64) -> Result<Alpha> {
    Alpha::new(a)
}

fn positive_points(xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(x) => Err(Error::InvalidInput(format!("evaluation points must be positive, got {x}"))),
        None => Ok(()),
    }
}

/// Validated configuration of a subcommand, with every default spelled out.
fn resolve(cmd: &Command) -> Result<Value> {
    Ok(match cmd {
        Command::Eval(a) => {
            alpha(a.alpha)?;
            positive_points(&a.x)?;
            let series = a.series.resolve()?;
            if a.order > series.max_order {
                return Err(Error::OrderTooLarge { order: a.order, cap: series.max_order });
            }
            json!({ "args": a, "series": series })
        }
        Command::Derivs(a) => {
            alpha(a.alpha)?;
            positive_points(&a.x)?;
            let series = a.series.resolve()?;
            if a.max_order > series.max_order {
                return Err(Error::OrderTooLarge { order: a.max_order, cap: series.max_order });
            }
            json!({ "args": a, "series": series })
        }
        Command::Bellshape(a) => {
            alpha(a.alpha)?;
            let series = a.series.resolve()?;
            if a.max_order == 0 || a.max_order > series.max_order {
                return Err(Error::InvalidInput(format!(
                    "--max-order must lie in 1..={}, got {}",
                    series.max_order, a.max_order
                )));
            }
            json!({ "args": a, "series": series, "grid": a.grid.resolve()? })
        }
        Command::Factorize(a) => {
            alpha(a.alpha)?;
            if let Some(l) = a.lambda.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
                return Err(Error::InvalidInput(format!("lambda must be positive, got {l}")));
            }
            if a.terms == 0 {
                return Err(Error::InvalidInput("--terms must be positive".into()));
            }
            let spectral = SpectralConfig {
                tolerance: a.spectral_tolerance,
                ..SpectralConfig::default()
            };
            json!({ "args": a, "spectral": spectral })
        }
        Command::Wbs(a) => {
            if a.n == 0 {
                return Err(Error::InvalidInput("--n must be at least 1".into()));
            }
            let i_max = a.i_max.unwrap_or(a.n + 3);
            if i_max < a.n {
                return Err(Error::InvalidInput(format!("--i-max must be at least n = {}", a.n)));
            }
            let spec = ChainSpec::default_chain(a.n);
            json!({ "args": a, "i_max": i_max, "chain": spec, "grid": a.grid.resolve()? })
        }
        Command::TpCheck(a) => {
            alpha(a.alpha)?;
            if a.points < 2 || !(a.span > 0.0) || a.n == 0 {
                return Err(Error::InvalidInput("need --points >= 2, --span > 0 and --n >= 1".into()));
            }
            if a.order == 0 || a.order > crate::tp::MAX_MINOR_ORDER || a.order > a.points {
                return Err(Error::InvalidInput(format!(
                    "--order must lie in 1..={}",
                    crate::tp::MAX_MINOR_ORDER.min(a.points)
                )));
            }
            json!({ "args": a, "series": a.series.resolve()? })
        }
        Command::Conjecture(a) => {
            match a.family {
                Family::LogBeta => {
                    LogBetaExample::new(a.a, a.b)?;
                    if !(a.b > a.n as f64 + 1.0) {
                        return Err(Error::InvalidInput(format!("the log-Beta probe needs b > n + 1, got b = {}, n = {}", a.b, a.n)));
                    }
                }
                Family::InvGamma => {
                    InvGammaPower::new(a.t, a.a)?;
                    if a.n == 0 {
                        return Err(Error::InvalidInput("--n must be at least 1".into()));
                    }
                }
            }
            if a.n > crate::selfdecomp::MAX_ORDER {
                return Err(Error::OrderTooLarge { order: a.n, cap: crate::selfdecomp::MAX_ORDER });
            }
            json!({ "args": a, "grid": a.grid.resolve()? })
        }
        Command::FactorCheck(a) => {
            if a.n < 2 || a.samples < 10_000 {
                return Err(Error::InvalidInput("need --n >= 2 and --samples >= 10000".into()));
            }
            json!({ "args": a, "ks_threshold": crate::selfdecomp::KS_THRESHOLD })
        }
        Command::Sample(a) => {
            alpha(a.alpha)?;
            if a.count == 0 {
                return Err(Error::InvalidInput("--count must be positive".into()));
            }
            json!({ "args": a })
        }
    })
}

fn execute(cmd: &Command, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Eval(a) => {
            let d = StableDensity::new(alpha(a.alpha)?, a.series.resolve()?)?;
            let evals = a.x.iter().map(|&x| d.derivative(x, a.order)).collect::<Result<Vec<_>>>()?;
            Ok(density_outcome(evals))
        }
        Command::Derivs(a) => {
            let d = StableDensity::new(alpha(a.alpha)?, a.series.resolve()?)?;
            let mut evals = Vec::new();
            for &x in &a.x {
                for n in 0..=a.max_order {
                    evals.push(d.derivative(x, n)?);
                }
            }
            Ok(density_outcome(evals))
        }
        Command::Bellshape(a) => {
            let rep = verify_bell_shape(alpha(a.alpha)?, a.max_order, &a.grid.resolve()?, &a.series.resolve()?)?;
            Ok(bell_outcome(&rep))
        }
        Command::Factorize(a) => {
            let cfg = SpectralConfig {
                tolerance: a.spectral_tolerance,
                ..SpectralConfig::default()
            };
            let al = alpha(a.alpha)?;
            let reps = a
                .lambda
                .iter()
                .map(|&l| factorization_residual(al, l, a.terms, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let mut table = Table::new(vec![
                "alpha", "lambda", "n_terms", "psi_me", "psi_me_error", "psi_sum", "tail_correction", "residual", "pass",
            ]);
            let mut rows = Vec::new();
            for r in &reps {
                let pass = r.residual.abs() < a.tolerance;
                table.push(vec![
                    r.alpha.to_string(),
                    r.lambda.to_string(),
                    r.n_terms.to_string(),
                    num(r.psi_me),
                    num(r.psi_me_error),
                    num(r.psi_sum),
                    num(r.tail_correction),
                    num(r.residual),
                    pass.to_string(),
                ]);
                rows.push(json!({ "identity": r, "pass": pass }));
            }
            let pass = reps.iter().all(|r| r.residual.abs() < a.tolerance);
            Ok(Outcome {
                report: json!({ "tolerance": a.tolerance, "rows": rows, "pass": pass }),
                table,
                pass,
            })
        }
        Command::Wbs(a) => {
            let rep = verify_wbs(&ChainSpec::default_chain(a.n), a.i_max.unwrap_or(a.n + 3), &a.grid.resolve()?)?;
            let mut table = Table::new(vec!["order", "observed", "expected", "zero_count", "zeros", "pass"]);
            for p in &rep.profiles {
                table.push(vec![
                    p.order.to_string(),
                    p.observed.to_string(),
                    p.expected.to_string(),
                    p.zero_count.to_string(),
                    p.zeros.iter().map(|z| num(*z)).collect::<Vec<_>>().join(";"),
                    p.pass.to_string(),
                ]);
            }
            Ok(Outcome {
                report: to_value(&rep),
                table,
                pass: rep.pass,
            })
        }
        Command::TpCheck(a) => tp_check(a, seed),
        Command::Conjecture(a) => {
            let opts = a.grid.resolve()?;
            match a.family {
                Family::LogBeta => {
                    let e = LogBetaExample::new(a.a, a.b)?;
                    let rep = conjecture2_probe(&e, a.n, &opts)?;
                    let k = e.spectral();
                    let near_zero = k.value(1e-12);
                    let k_ok = (near_zero - k.k_zero_plus).abs() < 1e-9;
                    let mut table = Table::new(vec!["order", "observed", "expected", "zero_count", "zeros", "pass"]);
                    for p in &rep.profiles {
                        table.push(vec![
                            p.order.to_string(),
                            p.observed.to_string(),
                            p.expected.to_string(),
                            p.zero_count.to_string(),
                            p.zeros.iter().map(|z| num(*z)).collect::<Vec<_>>().join(";"),
                            p.pass.to_string(),
                        ]);
                    }
                    let pass = rep.pass && k_ok;
                    Ok(Outcome {
                        report: json!({
                            "profiles": rep,
                            "spectral": { "k_zero_plus": k.k_zero_plus, "k_at_1e-12": near_zero, "pass": k_ok },
                            "pass": pass,
                        }),
                        table,
                        pass,
                    })
                }
                Family::InvGamma => {
                    let rep = verify_invgamma_bellshape(&InvGammaPower::new(a.t, a.a)?, a.n, &opts)?;
                    Ok(bell_outcome(&rep))
                }
            }
        }
        Command::FactorCheck(a) => {
            let r = integer_alpha_factorization_mc(a.n, a.samples, seed)?;
            let mut table = Table::new(vec!["n", "samples", "seed", "ks_distance", "threshold", "pass"]);
            table.push(vec![
                r.n.to_string(),
                r.samples.to_string(),
                r.seed.to_string(),
                num(r.ks_distance),
                r.threshold.to_string(),
                r.pass.to_string(),
            ]);
            Ok(Outcome {
                report: to_value(&r),
                table,
                pass: r.pass,
            })
        }
        Command::Sample(a) => {
            let xs = sample_stable(alpha(a.alpha)?, seed, a.count)?;
            let mut table = Table::new(vec!["index", "value"]);
            for (i, x) in xs.iter().enumerate() {
                table.push(vec![i.to_string(), num(*x)]);
            }
            Ok(Outcome {
                report: json!({ "samples": xs }),
                table,
                pass: true,
            })
        }
    }
}

fn density_outcome(evals: Vec<crate::stable::DensityEval>) -> Outcome {
    let mut table = Table::new(vec!["x", "order", "value", "est_error", "terms", "precision_bits", "method"]);
    for e in &evals {
        table.push(vec![
            num(e.x),
            e.order.to_string(),
            num(e.value),
            num(e.est_error),
            e.terms.to_string(),
            e.precision_bits.to_string(),
            to_value(&e.method).as_str().unwrap_or_default().to_string(),
        ]);
    }
    Outcome {
        report: json!({ "evaluations": evals }),
        table,
        pass: true,
    }
}

fn bell_outcome(rep: &crate::sign::BellShapeReport) -> Outcome {
    let mut table = Table::new(vec!["order", "zero_index", "location", "bracket_width", "pass"]);
    for o in &rep.per_order {
        for (i, z) in o.zero_set.zeros.iter().enumerate() {
            table.push(vec![
                o.n.to_string(),
                i.to_string(),
                num(z.location),
                format!("{:.3e}", z.bracket_width),
                o.pass.to_string(),
            ]);
        }
    }
    Outcome {
        report: to_value(rep),
        table,
        pass: rep.pass,
    }
}

#[derive(Serialize)]
struct VdSummary {
    trials: usize,
    max_input_changes: usize,
    violations: usize,
    pass: bool,
}

fn tp_check(a: &TpArgs, seed: u64) -> Result<Outcome> {
    let al = alpha(a.alpha)?;
    let mut table = Table::new(vec!["kernel", "order_checked", "minors_evaluated", "min_minor", "witness_value", "vd_violations", "pass"]);
    match a.kernel {
        KernelKind::Stable => {
            let (km, rep) = non_tp2_witness(al, &a.series.resolve()?, seed)?;
            let pass = rep.witness.is_some();
            table.push(vec![
                rep.kernel_id.clone(),
                rep.order_checked.to_string(),
                rep.minors_evaluated.to_string(),
                num(rep.min_minor),
                rep.witness.as_ref().map(|w| num(w.value)).unwrap_or_default(),
                String::new(),
                pass.to_string(),
            ]);
            Ok(Outcome {
                report: json!({
                    "expectation": "negative 2x2 minor",
                    "x_points": km.x_points,
                    "y_points": km.y_points,
                    "minors": rep,
                    "pass": pass,
                }),
                table,
                pass,
            })
        }
        KernelKind::ExpSum => {
            let km = expsum_kernel(al, a.n, a.span, a.points)?;
            let rep = scan_minors(&km, a.order, a.budget, seed)?;
            let mut rng = rng_from_seed(seed.wrapping_add(1));
            let mut violations = 0;
            let mut max_in = 0;
            for _ in 0..a.vd_trials {
                let v: Vec<f64> = (0..km.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (s_in, s_out) = vd_bound_check(&km, &v)?;
                max_in = max_in.max(s_in);
                if s_out > s_in {
                    violations += 1;
                }
            }
            let vd = VdSummary {
                trials: a.vd_trials,
                max_input_changes: max_in,
                violations,
                pass: violations == 0,
            };
            let pass = rep.all_nonnegative && vd.pass;
            table.push(vec![
                rep.kernel_id.clone(),
                rep.order_checked.to_string(),
                rep.minors_evaluated.to_string(),
                num(rep.min_minor),
                rep.witness.as_ref().map(|w| num(w.value)).unwrap_or_default(),
                violations.to_string(),
                pass.to_string(),
            ]);
            Ok(Outcome {
                report: json!({
                    "expectation": "all minors nonnegative",
                    "rows": km.rows(),
                    "cols": km.cols(),
                    "minors": rep,
                    "variation_diminishing": vd,
                    "pass": pass,
                }),
                table,
                pass,
            })
        }
    }
}

fn destination(cli: &Cli) -> Option<PathBuf> {
    if let Some(p) = &cli.output {
        return Some(p.clone());
    }
    let dir = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty())?;
    let ext = match cli.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    Some(PathBuf::from(dir).join(format!("{}.{ext}", cli.command.name())))
}

fn emit(cli: &Cli, body: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("cannot write report: {e}"));
    match destination(cli) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&path, body).map_err(io)
        }
        None => std::io::stdout().write_all(body).map_err(io),
    }
}

fn envelope(cli: &Cli, config: Value, outcome: Option<&Outcome>) -> Value {
    let mut v = json!({
        "command": cli.command.name(),
        "seed": cli.seed,
        "format": cli.format,
        "config": config,
    });
    if let Some(o) = outcome {
        v["report"] = o.report.clone();
        v["pass"] = Value::Bool(o.pass);
    }
    if cli.timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        v["timestamp"] = json!(secs);
    }
    v
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("json values serialize");
    s.push(b'\n');
    s
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let name = cli.command.name();
    let config = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{name}: configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.dry_run {
        let mut out = std::io::stdout();
        return match out.write_all(&pretty(&envelope(cli, config, None))) {
            Ok(()) => EXIT_PASS,
            Err(e) => {
                eprintln!("{name}: {e}");
                EXIT_CONFIG
            }
        };
    }
    let outcome = match execute(&cli.command, cli.seed) {
        Ok(o) => o,
        Err(e) if e.is_numerical() => {
            eprintln!("{name}: numerical failure: {e}");
            return EXIT_NUMERICAL;
        }
        Err(e) => {
            eprintln!("{name}: configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    let body = match cli.format {
        Format::Json => Ok(pretty(&envelope(cli, config, Some(&outcome)))),
        Format::Csv => {
            let mut buf = Vec::new();
            outcome.table.write(&mut buf).map(|_| buf)
        }
    };
    if let Err(e) = body.and_then(|b| emit(cli, &b)) {
        eprintln!("{name}: {e}");
        return EXIT_CONFIG;
    }
    if outcome.pass {
        EXIT_PASS
    } else {
        EXIT_FAILED
    }
}

/// Parses `args` (program name first) and runs; usage errors exit with 2,
/// `--help` and `--version` with 0.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("bellshape").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn config_errors_are_caught_before_work() {
        for args in [
            &["eval", "--alpha", "1.2", "--x", "1"][..],
            &["eval", "--alpha", "0.5", "--x", "-1"],
            &["bellshape", "--alpha", "0.5", "--max-order", "0"],
            &["wbs", "--n", "3", "--i-max", "1"],
            &["conjecture", "--b", "3.5", "--n", "3"],
            &["factor-check", "--samples", "10"],
            &["bellshape", "--alpha", "0.5", "--lo", "2", "--hi", "1"],
        ] {
            let cli = parse(args);
            assert!(resolve(&cli.command).is_err(), "{args:?}");
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["bellshape", "eval"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["bellshape", "bogus"]), EXIT_CONFIG);
        assert_eq!(main_with_args(["bellshape", "eval", "--alpha", "0.5", "--x", "1", "--lo", "1"]), EXIT_CONFIG);
    }

    #[test]
    fn resolved_config_spells_out_defaults() {
        let cli = parse(&["bellshape", "--alpha", "0.5", "--max-order", "2"]);
        let c = resolve(&cli.command).unwrap();
        assert_eq!(c["grid"]["points"], json!(GridOptions::default().points));
        assert_eq!(c["series"]["precision"], json!("extended"));
        assert_eq!(c["args"]["max_order"], json!(2));
    }

    #[test]
    fn eval_outcome() {
        let cli = parse(&["eval", "--alpha", "0.5", "--x", "1", "2"]);
        let o = execute(&cli.command, 1).unwrap();
        let v = o.report["evaluations"][0]["value"].as_f64().unwrap();
        assert!((v - 0.21969564473386122).abs() < 1e-12);
        assert_eq!(o.table.rows.len(), 2);
        assert!(o.pass);
    }
}
