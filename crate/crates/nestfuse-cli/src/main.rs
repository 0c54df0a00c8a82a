//! Command-line front end: fuse runs, evaluate them against qrels, compare
//! two runs with a paired t-test, and dump pairwise concordance matrices.
//!
//! Data goes to files or standard output; diagnostics go to standard error.
//! Exit code 0 means no errors.

mod fuse;
mod report;

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nestfuse::kernel::FusionKernel;
use nestfuse::runs::{parse_qrels, parse_run_file};
use nestfuse::Tunables;

#[derive(Parser)]
#[command(
    name = "nestfuse",
    version,
    about = "Rank fusion for metasearch: nested nonlinear score combination, \
             linear baselines, and TREC-style evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse two or more run files into a single run.
    Fuse(FuseArgs),
    /// Score a run against relevance judgments (MAP, MRR, P@n).
    Eval(EvalArgs),
    /// Compare two runs on one metric with a paired t-test.
    Compare(CompareArgs),
    /// Emit per-query pairwise Kendall tau matrices.
    Tau(TauArgs),
}

/// Fusion method, selected by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Greedy nested fusion with the given kernel.
    Nested(FusionKernel),
    CombMnz,
    Isr,
    Rbc,
    /// Fuse every pair with the kernel, then average the pairwise scores.
    PairwiseAvg(FusionKernel),
}

impl Method {
    /// Canonical name; also used as the tag column of the output run.
    pub fn name(self) -> String {
        match self {
            Self::Nested(FusionKernel::Clayton) => "nested-clayton".into(),
            Self::Nested(FusionKernel::Gumbel) => "nested-gumbel".into(),
            Self::Nested(FusionKernel::PowerFunction) => "nfc-pf".into(),
            Self::Nested(FusionKernel::ExpLog) => "nfc-el".into(),
            Self::CombMnz => "combmnz".into(),
            Self::Isr => "isr".into(),
            Self::Rbc => "rbc".into(),
            Self::PairwiseAvg(k) => format!("pairwise-avg:{}", k.name()),
        }
    }

    /// Kernels that modulate `theta_p` need query text (and optionally term
    /// matches) to estimate per-document relevance.
    pub fn needs_query_context(self) -> bool {
        matches!(
            self,
            Self::Nested(FusionKernel::PowerFunction)
                | Self::Nested(FusionKernel::ExpLog)
                | Self::PairwiseAvg(FusionKernel::PowerFunction)
                | Self::PairwiseAvg(FusionKernel::ExpLog)
        )
    }

    /// The concordance fallback gate only applies to nonlinear methods.
    pub fn is_nonlinear(self) -> bool {
        matches!(self, Self::Nested(_) | Self::PairwiseAvg(_))
    }

    /// Nested methods produce a per-cycle trace.
    pub fn has_trace(self) -> bool {
        matches!(self, Self::Nested(_))
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kernel = |name: &str| -> Result<FusionKernel, String> {
            match name {
                "clayton" => Ok(FusionKernel::Clayton),
                "gumbel" => Ok(FusionKernel::Gumbel),
                "pf" => Ok(FusionKernel::PowerFunction),
                "el" => Ok(FusionKernel::ExpLog),
                other => Err(format!(
                    "unknown kernel {other:?} (expected clayton, gumbel, pf, or el)"
                )),
            }
        };
        match s {
            "nested-clayton" => Ok(Self::Nested(FusionKernel::Clayton)),
            "nested-gumbel" => Ok(Self::Nested(FusionKernel::Gumbel)),
            "nfc-pf" => Ok(Self::Nested(FusionKernel::PowerFunction)),
            "nfc-el" => Ok(Self::Nested(FusionKernel::ExpLog)),
            "combmnz" => Ok(Self::CombMnz),
            "isr" => Ok(Self::Isr),
            "rbc" => Ok(Self::Rbc),
            other => match other.strip_prefix("pairwise-avg:") {
                Some(k) => Ok(Self::PairwiseAvg(kernel(k)?)),
                None => Err(format!(
                    "unknown method {other:?} (expected nested-clayton, nested-gumbel, \
                     nfc-pf, nfc-el, combmnz, isr, rbc, or pairwise-avg:<kernel>)"
                )),
            },
        }
    }
}

#[derive(Args)]
pub struct FuseArgs {
    /// Fusion method: nested-clayton, nested-gumbel, nfc-pf, nfc-el,
    /// combmnz, isr, rbc, or pairwise-avg:<clayton|gumbel|pf|el>.
    #[arg(long)]
    method: Method,

    /// Run files to fuse (at least 2).
    #[arg(long, num_args = 2.., required = true)]
    runs: Vec<PathBuf>,

    /// Queries file (`qid<TAB>text`); required by nfc-pf, nfc-el, and the
    /// pairwise-avg variants of those kernels.
    #[arg(long)]
    queries: Option<PathBuf>,

    /// Term-match sidecar (`qid<TAB>docid<TAB>count`); requires --queries.
    #[arg(long)]
    matches: Option<PathBuf>,

    /// Qrels, used only to annotate skipped queries in diagnostics.
    #[arg(long)]
    qrels: Option<PathBuf>,

    /// Output run file.
    #[arg(short, long)]
    output: PathBuf,

    /// Write a per-cycle trace TSV (nested methods only).
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Route a query to CombMNZ when its mean pairwise tau is at or below
    /// this threshold (0.4 when the flag is given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "0.4")]
    tau_fallback: Option<f64>,

    /// Persistence of the rank-biased centroid baseline.
    #[arg(long, default_value_t = 0.98)]
    rbc_phi: f64,

    /// Upper clamp on theta for both kernel families.
    #[arg(long, default_value_t = 50.0)]
    theta_max: f64,

    /// Lower clamp on the Clayton-family theta.
    #[arg(long, default_value_t = 1e-6)]
    epsilon_theta: f64,

    /// Floor on the per-document theta_p of the composition kernels.
    #[arg(long, default_value_t = 1e-3)]
    epsilon_p: f64,

    /// Worker threads for per-query fusion.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Run file to score.
    #[arg(long)]
    run: PathBuf,

    /// Qrels file.
    #[arg(long)]
    qrels: PathBuf,

    /// Precision cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 20])]
    cutoffs: Vec<usize>,

    /// Also write the aggregate report as TSV.
    #[arg(long)]
    tsv: Option<PathBuf>,

    /// Also write per-query metrics as CSV.
    #[arg(long)]
    per_query: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First run (the candidate).
    #[arg(long)]
    run_a: PathBuf,

    /// Second run (the reference).
    #[arg(long)]
    run_b: PathBuf,

    /// Qrels file.
    #[arg(long)]
    qrels: PathBuf,

    /// Metric to compare: map, mrr, or `p@<n>`.
    #[arg(long, default_value = "map")]
    metric: String,

    /// Precision cutoffs evaluated (relevant when comparing `p@<n>`).
    #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 20])]
    cutoffs: Vec<usize>,
}

#[derive(Args)]
struct TauArgs {
    /// Run files (at least 2).
    #[arg(long, num_args = 2.., required = true)]
    runs: Vec<PathBuf>,

    /// Output TSV; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Tau(args) => cmd_tau(args),
    }
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    if args.method.needs_query_context() && args.queries.is_none() {
        bail!(
            "method {} estimates per-document relevance and needs --queries",
            args.method.name()
        );
    }
    if args.matches.is_some() && args.queries.is_none() {
        bail!("--matches requires --queries for validation");
    }
    if args.method == Method::Rbc && !(args.rbc_phi > 0.0 && args.rbc_phi < 1.0) {
        bail!("--rbc-phi must lie in (0, 1), got {}", args.rbc_phi);
    }
    if !(args.theta_max > 0.0 && args.theta_max.is_finite()) {
        bail!(
            "--theta-max must be positive and finite, got {}",
            args.theta_max
        );
    }
    if !(args.epsilon_theta > 0.0 && args.epsilon_theta <= args.theta_max) {
        bail!(
            "--epsilon-theta must lie in (0, theta_max], got {}",
            args.epsilon_theta
        );
    }
    if !(args.epsilon_p > 0.0 && args.epsilon_p.is_finite()) {
        bail!(
            "--epsilon-p must be positive and finite, got {}",
            args.epsilon_p
        );
    }
    if let Some(threshold) = args.tau_fallback {
        if !(-1.0..=1.0).contains(&threshold) {
            bail!("--tau-fallback must lie in [-1, 1], got {threshold}");
        }
    }
    let tunables = Tunables {
        theta_max: args.theta_max,
        epsilon_theta: args.epsilon_theta,
        epsilon_p: args.epsilon_p,
    };
    fuse::run(&args, tunables)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let run = parse_run_file(&args.run)?;
    let qrels = parse_qrels(&args.qrels)?;
    let report = nestfuse::eval::evaluate(&run, &qrels, &args.cutoffs)?;
    print!("{}", report::pretty_table(&report));
    if let Some(path) = &args.tsv {
        std::fs::write(path, report::aggregate_tsv(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.per_query {
        std::fs::write(path, report::per_query_csv(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let run_a = parse_run_file(&args.run_a)?;
    let run_b = parse_run_file(&args.run_b)?;
    let qrels = parse_qrels(&args.qrels)?;
    let text = report::compare(&run_a, &run_b, &qrels, &args.metric, &args.cutoffs)?;
    print!("{text}");
    Ok(())
}

fn cmd_tau(args: TauArgs) -> Result<()> {
    let mut runs = Vec::new();
    for path in &args.runs {
        runs.push(parse_run_file(path)?);
    }
    let text = report::tau_matrix(&runs)?;
    match &args.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
