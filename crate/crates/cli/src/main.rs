use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gtlab::certify::{is_good_code_with, CertifyOptions, DEFAULT_SUBSET_CAP};
use gtlab::decoder::{candidate_edges_with, DecoderOptions, DEFAULT_EDGE_CAP};
use gtlab::design::{gen_matrix, recommended_weight};
use gtlab::experiment::{run_experiment, run_experiment_on, ExperimentConfig, DEFAULT_EXHAUSTIVE_CAP};
use gtlab::numerics::format_sig12;
use gtlab::rates::{rate_bound, RateGrid, RateQuery, RateResult, REFERENCE_OLD, REFERENCE_S};
use gtlab::{Error, Mode, OutcomeVector, TestMatrix};

/// Exit status for usage, parse and parameter errors.
const EXIT_USAGE: u8 = 2;
/// Exit status when a size cap is exceeded.
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "gtlab", version, about = "Two-stage group testing lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a constant-column-weight test matrix.
    Gen(GenArgs),
    /// Run the two-stage algorithm on random or exhaustive hidden sets.
    Simulate(SimulateArgs),
    /// Print the candidate hypergraph for an outcome vector.
    Decode(DecodeArgs),
    /// Check whether a matrix is an (s, L, K)-good code.
    Check(CheckArgs),
    /// Tabulate rate lower bounds as CSV.
    Rates(RatesArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("weight_choice").required(true).args(["weight", "auto_weight"])))]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: usize,
    /// Relative column weight in (0, 1).
    #[arg(long)]
    weight: Option<f64>,
    /// Recommended weight for `s,mode`, e.g. `2,full`.
    #[arg(long, value_parser = parse_auto_weight)]
    auto_weight: Option<(usize, Mode)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("size").args(["n", "rate", "matrix"])))]
struct SimulateArgs {
    #[arg(long)]
    t: usize,
    #[arg(long)]
    s: usize,
    /// Number of first-stage tests.
    #[arg(long)]
    n: Option<usize>,
    /// Target rate; sets N = ceil(log2(t) / rate).
    #[arg(long)]
    rate: Option<f64>,
    /// Use this matrix instead of generating one.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Relative column weight; defaults to the recommended weight.
    #[arg(long)]
    weight: Option<f64>,
    /// Enumerate every hidden set instead of sampling.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    exhaustive_cap: u128,
    #[arg(long, default_value_t = DEFAULT_EDGE_CAP)]
    edge_cap: usize,
    /// Omit the wall-clock field so output is byte-identical across runs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Outcome vector as a 0/1 string of length N.
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = DEFAULT_EDGE_CAP)]
    edge_cap: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    s: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    k_set: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    subset_cap: u128,
}

#[derive(Args)]
struct RatesArgs {
    /// Inclusive range `a..b`.
    #[arg(long, default_value = "3..6", value_parser = parse_range)]
    s_range: (usize, usize),
    #[arg(long, default_value = "full")]
    mode: Mode,
    /// Grid resolution for both w and q.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Append old and new rows for s = 3..6.
    #[arg(long)]
    compare_table1: bool,
}

fn parse_auto_weight(s: &str) -> Result<(usize, Mode), String> {
    let (count, mode) = s.split_once(',').ok_or("expected `s,mode`")?;
    let count = count.trim().parse().map_err(|e| format!("bad s: {e}"))?;
    let mode = mode.trim().parse().map_err(|e: Error| e.to_string())?;
    Ok((count, mode))
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or("expected `a..b`")?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad end: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capacity(_) | Error::EdgeCapExceeded { .. } => EXIT_CAPACITY,
        _ => EXIT_USAGE,
    }
}

fn read_matrix(path: &Path) -> Result<TestMatrix, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::param(format!("cannot read {}: {e}", path.display())))?;
    TestMatrix::from_text(&text)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .map_err(|e| Error::param(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<u8, Error> {
    let w = match (args.weight, args.auto_weight) {
        (Some(w), _) => w,
        (None, Some((s, mode))) => recommended_weight(s, mode)?,
        (None, None) => unreachable!("clap requires one weight flag"),
    };
    let x = gen_matrix(args.n, args.t, w, args.seed)?;
    emit(x.to_text().trim_end(), Some(&args.out))?;
    Ok(0)
}

fn simulate(args: SimulateArgs) -> Result<u8, Error> {
    let matrix = args.matrix.as_deref().map(read_matrix).transpose()?;
    let n = match (&matrix, args.n, args.rate) {
        (Some(x), _, _) => x.rows(),
        (None, Some(n), _) => n,
        (None, None, Some(rate)) => {
            if rate.is_nan() || rate <= 0.0 {
                return Err(Error::param(format!("rate must be positive, got {rate}")));
            }
            ((args.t as f64).log2() / rate).ceil() as usize
        }
        (None, None, None) => return Err(Error::param("one of --n, --rate or --matrix is required")),
    };
    let w = match (&matrix, args.weight) {
        (Some(x), _) => x.relative_weight(),
        (None, Some(w)) => w,
        (None, None) => recommended_weight(args.s, args.mode)?,
    };
    let mut config = ExperimentConfig::new(args.t, args.s, n, w, args.mode);
    config.trials = args.trials;
    config.seed = args.seed;
    config.exhaustive = args.exhaustive;
    config.exhaustive_cap = args.exhaustive_cap;
    config.decoder = DecoderOptions {
        edge_cap: args.edge_cap,
    };
    let mut report = match &matrix {
        Some(x) => {
            if x.cols() != args.t {
                return Err(Error::param(format!(
                    "matrix has {} columns but --t is {}",
                    x.cols(),
                    args.t
                )));
            }
            run_experiment_on(&config, x)?
        }
        None => run_experiment(&config)?,
    };
    if args.deterministic {
        report.wall_time = None;
    }
    emit(&report.to_json(), args.out.as_deref())?;
    Ok(0)
}

fn decode(args: DecodeArgs) -> Result<u8, Error> {
    let x = read_matrix(&args.matrix)?;
    let y = OutcomeVector::parse(&args.outcome)
        .ok_or_else(|| Error::param(format!("outcome must be a 0/1 string, got {:?}", args.outcome)))?;
    let h = candidate_edges_with(
        &x,
        args.s,
        &y,
        DecoderOptions {
            edge_cap: args.edge_cap,
        },
    )?;
    println!("{}", h.to_json());
    Ok(0)
}

fn check(args: CheckArgs) -> Result<u8, Error> {
    let x = read_matrix(&args.matrix)?;
    let opts = CertifyOptions {
        subset_cap: args.subset_cap,
    };
    let report = is_good_code_with(&x, args.s, args.l, &args.k_set, opts)?;
    println!("{}", report.to_json());
    Ok(if report.is_good { 0 } else { 1 })
}

fn query(s: usize, mode: Mode, grid: RateGrid) -> RateQuery {
    match mode {
        Mode::Full => RateQuery::full(s),
        Mode::Partial => RateQuery::partial(s),
    }
    .with_grid(grid)
}

fn rates(args: RatesArgs) -> Result<u8, Error> {
    let grid = RateGrid {
        w_grid: args.grid,
        q_grid: args.grid,
        tol: args.tol,
    };
    let (a, b) = args.s_range;
    let results: Vec<RateResult> = (a..=b)
        .map(|s| rate_bound(&query(s, args.mode, grid)))
        .collect::<Result<_, _>>()?;

    println!("s,value,w_star,k,R1_k,R2_k");
    for r in &results {
        for (k, bounds) in &r.per_k {
            println!(
                "{},{},{},{k},{},{}",
                r.s,
                format_sig12(r.value),
                format_sig12(r.w_star),
                format_sig12(bounds.r1),
                format_sig12(bounds.r2)
            );
        }
    }

    if args.compare_table1 {
        let mut new_row = Vec::new();
        for s in REFERENCE_S {
            let value = match results.iter().find(|r| r.s == s && args.mode == Mode::Full) {
                Some(r) => r.value,
                None => rate_bound(&query(s, Mode::Full, grid))?.value,
            };
            new_row.push(format_sig12(value));
        }
        let header: Vec<String> = REFERENCE_S.iter().map(|s| s.to_string()).collect();
        let old_row: Vec<String> = REFERENCE_OLD.iter().map(|v| v.to_string()).collect();
        println!();
        println!("row,{}", header.join(","));
        println!("old,{}", old_row.join(","));
        println!("new,{}", new_row.join(","));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Decode(a) => decode(a),
        Command::Check(a) => check(a),
        Command::Rates(a) => rates(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
