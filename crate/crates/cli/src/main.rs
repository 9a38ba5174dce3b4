//! Command-line front end: analytic trade-off curves, feasibility tables,
//! latency estimates, and the end-to-end shuffle simulator.
//!
//! Exit codes: 0 success (and, for simulate/verify-example, verified);
//! 2 invalid arguments; 3 infeasible or divisibility-unclean configuration;
//! 4 verification failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use codedmr::engine::{monte_carlo_latency, run, StragglerModel};
use codedmr::placement::{divisibility_check, Divisibility};
use codedmr::ratio::{decimal_string, RatRepr};
use codedmr::scheme::{
    check_feasible, enumerate_feasible, latency, load_breakdown, optimize_rates, tradeoff_csv,
    tradeoff_curve, RatePair, SystemParams,
};
use codedmr::{Error, FieldWidth, Frac};

#[derive(Parser)]
#[command(name = "codedmr", version, about = "Straggler-resilient coded map-shuffle-reduce: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep q and emit the latency/communication-load trade-off curve.
    Tradeoff(TradeoffArgs),
    /// Run the full map-shuffle-reduce pipeline once and report the result.
    Simulate(SimulateArgs),
    /// List all feasible rate pairs with their loads, best first.
    Feasible(FeasibleArgs),
    /// Re-run the built-in K=6 reference scenario and check every number.
    VerifyExample(VerifyExampleArgs),
    /// Tabulate the map-phase latency model, optionally against Monte Carlo.
    Latency(LatencyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct CommonParams {
    /// Total number of servers.
    #[arg(long = "K")]
    servers: u32,
    /// Storage fraction per server, as an exact fraction such as 1/2.
    #[arg(long)]
    mu: Frac,
    /// Number of output columns N.
    #[arg(long = "N")]
    cols: u32,
}

#[derive(Args)]
struct TradeoffArgs {
    #[command(flatten)]
    common: CommonParams,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonParams,
    /// Number of non-straggling servers.
    #[arg(long)]
    q: u32,
    /// Rows of the task matrix.
    #[arg(long)]
    m: u32,
    /// Inner dimension of the product.
    #[arg(long, default_value_t = 8)]
    n: u32,
    /// Field width in bits (8 or 16).
    #[arg(long = "w", default_value_t = 16)]
    width: u32,
    /// Erasure-code numerator (rate r1 = l/q); optimized when omitted.
    #[arg(long)]
    l: Option<u32>,
    /// Repetition rate; optimized when omitted.
    #[arg(long)]
    r2: Option<u32>,
    /// Fix the non-straggler set instead of sampling completion times.
    #[arg(long = "fixed-Q", value_delimiter = ',')]
    fixed_q: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also dump the executed plan, one JSON message per line.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibleArgs {
    #[command(flatten)]
    common: CommonParams,
    #[arg(long)]
    q: u32,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyExampleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LatencyArgs {
    #[command(flatten)]
    common: CommonParams,
    /// Monte Carlo trials per q; analytic-only when omitted.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    fn verification(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Infeasible(_)
            | Error::DivisibilityFailure { .. }
            | Error::ColumnsNotDivisible { .. } => Failure::infeasible(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tradeoff(args) => cmd_tradeoff(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Feasible(args) => cmd_feasible(args),
        Command::VerifyExample(args) => cmd_verify_example(args),
        Command::Latency(args) => cmd_latency(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Failure::usage(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Parameters for analytic commands; q is pinned to K so any swept q stays
/// in range.
fn analytic_params(common: &CommonParams) -> Result<SystemParams, Failure> {
    SystemParams::new(
        common.servers,
        common.servers,
        common.mu,
        1,
        1,
        common.cols,
        FieldWidth::W16,
    )
    .map_err(Failure::from)
}

fn cmd_tradeoff(args: TradeoffArgs) -> Result<(), Failure> {
    let p = analytic_params(&args.common)?;
    let rows = tradeoff_curve(&p);
    let text = match args.format {
        Format::Csv => tradeoff_csv(&p, &rows),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("serializable rows");
            s.push('\n');
            s
        }
    };
    emit(&args.output, &text)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let width = FieldWidth::from_bits(args.width)?;
    let p = SystemParams::new(
        args.common.servers,
        args.q,
        args.common.mu,
        args.m,
        args.n,
        args.common.cols,
        width,
    )?;
    let rates = match (args.l, args.r2) {
        (Some(l), Some(r2)) => RatePair::new(l, r2),
        (None, None) => {
            let (r, _) = optimize_rates(&p)
                .ok_or_else(|| Failure::infeasible("no feasible rate pair"))?;
            r
        }
        _ => return Err(Failure::usage("--l and --r2 must be given together")),
    };

    check_feasible(&p, rates).into_result()?;
    if let Divisibility::NeedsScaling {
        m_multiplier,
        n_multiplier,
    } = divisibility_check(&p, rates)?
    {
        return Err(Failure::infeasible(format!(
            "block or phase splits do not divide evenly for rates {rates}; \
scale m by {m_multiplier} and N by {n_multiplier}"
        )));
    }

    let model = match &args.fixed_q {
        Some(q_set) => StragglerModel::FixedQ(q_set.clone()),
        None => StragglerModel::ShiftedExponential,
    };
    let outcome = run(&p, rates, &model, args.seed)?;
    if let Some(path) = &args.transcript {
        std::fs::write(path, outcome.plan.transcript_jsonl())
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut report = serde_json::to_string_pretty(&outcome.report).expect("serializable report");
    report.push('\n');
    emit(&args.output, &report)?;
    if outcome.report.verified {
        Ok(())
    } else {
        Err(Failure::verification(
            "reconstructed product differs from the direct product",
        ))
    }
}

fn cmd_feasible(args: FeasibleArgs) -> Result<(), Failure> {
    let p = SystemParams::new(
        args.common.servers,
        args.q,
        args.common.mu,
        1,
        1,
        args.common.cols,
        FieldWidth::W16,
    )?;
    let mut table: Vec<(RatePair, codedmr::Rat)> = enumerate_feasible(&p)
        .into_iter()
        .map(|r| {
            let lb = load_breakdown(&p, r).expect("enumerated pair is feasible");
            (r, lb.total)
        })
        .collect();
    table.sort_by(|(ra, la), (rb, lb)| la.cmp(lb).then((ra.l, ra.r2).cmp(&(rb.l, rb.r2))));
    let best = table.first().map(|(r, _)| *r);

    let text = match args.format {
        Format::Csv => {
            let mut s = String::from("l,r2,r1,load,optimal\n");
            for (r, load) in &table {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.l,
                    r.r2,
                    r.r1(&p),
                    decimal_string(load),
                    Some(*r) == best
                ));
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = table
                .iter()
                .map(|(r, load)| {
                    serde_json::json!({
                        "l": r.l,
                        "r2": r.r2,
                        "r1": r.r1(&p).to_string(),
                        "load": RatRepr::of(load),
                        "optimal": Some(*r) == best,
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("serializable rows");
            s.push('\n');
            s
        }
    };
    emit(&args.output, &text)
}

fn cmd_verify_example(args: VerifyExampleArgs) -> Result<(), Failure> {
    let p = SystemParams::new(
        6,
        4,
        Frac::new(1, 2).expect("valid fraction"),
        20,
        8,
        12,
        FieldWidth::W16,
    )?;
    let model = StragglerModel::FixedQ(vec![1, 2, 3, 4]);
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut record = |name: String, ok: bool| {
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
        checks.push((name, ok));
    };

    let proposed = run(&p, RatePair::new(4, 3), &model, args.seed)?;
    let counts: Vec<u64> = proposed
        .plan
        .phase_counts()
        .iter()
        .map(|(_, _, c)| *c)
        .collect();
    record(
        format!(
            "proposed rates (l=4, r2=3): phase counts {counts:?}, {} messages",
            proposed.report.message_count
        ),
        counts == vec![4, 36, 36] && proposed.report.message_count == 76,
    );
    record(
        format!(
            "proposed load = {} (want 19/5 = 3.8)",
            decimal_string(&proposed.report.counted_load)
        ),
        proposed.report.counted_load == codedmr::ratio::rat(19, 5)
            && proposed.report.analytic_load == codedmr::ratio::rat(19, 5),
    );
    record(
        "proposed run reconstructs Y = AX exactly".to_string(),
        proposed.report.verified,
    );

    let reference = run(&p, RatePair::new(6, 2), &model, args.seed)?;
    record(
        format!(
            "reference rates (l=6, r2=2): {} messages (want 84)",
            reference.report.message_count
        ),
        reference.report.message_count == 84,
    );
    record(
        format!(
            "reference load = {} (want 21/5 = 4.2)",
            decimal_string(&reference.report.counted_load)
        ),
        reference.report.counted_load == codedmr::ratio::rat(21, 5),
    );
    record(
        "reference run reconstructs Y = AX exactly".to_string(),
        reference.report.verified,
    );

    let d4 = latency(&p, 4);
    record(
        format!("map latency D(4) = {d4:.4} (want 11.7)"),
        (d4 - 11.7).abs() < 1e-9,
    );

    if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
        return Err(Failure::verification(format!("first failing check: {name}")));
    }
    println!("PASS: all reference-scenario checks hold");
    Ok(())
}

fn cmd_latency(args: LatencyArgs) -> Result<(), Failure> {
    if args.trials == Some(0) {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let p = analytic_params(&args.common)?;
    let qs: Vec<u32> = (1..=p.servers).collect();

    let text = match args.format {
        Format::Csv => {
            let mut s = String::new();
            match args.trials {
                None => {
                    s.push_str("q,D\n");
                    for &q in &qs {
                        s.push_str(&format!("{q},{:.6}\n", latency(&p, q)));
                    }
                }
                Some(trials) => {
                    s.push_str("q,D,empirical,relative_error\n");
                    for &q in &qs {
                        let est = monte_carlo_latency(&p, q, trials, args.seed);
                        s.push_str(&format!(
                            "{q},{:.6},{:.6},{:.6}\n",
                            est.analytic, est.empirical_mean, est.relative_error
                        ));
                    }
                }
            }
            s
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = qs
                .iter()
                .map(|&q| match args.trials {
                    None => serde_json::json!({"q": q, "D": latency(&p, q)}),
                    Some(trials) => {
                        let est = monte_carlo_latency(&p, q, trials, args.seed);
                        serde_json::json!({
                            "q": q,
                            "D": est.analytic,
                            "empirical": est.empirical_mean,
                            "relative_error": est.relative_error,
                        })
                    }
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("serializable rows");
            s.push('\n');
            s
        }
    };
    emit(&args.output, &text)
}
