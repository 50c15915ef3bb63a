//! `anoflip`: batch front-end for building, flipping, comparing and
//! integrating model flows.
//!
//! Structures are read and written as JSON, numeric tables as CSV. Exit codes:
//! 0 on success, 1 on usage or input errors, 2 when the answer is negative
//! (violations, `Differs`, an unexpected search outcome, a failed check).

mod commands;

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use anoflip_core::model_block::DEFAULT_LAMBDA;

#[derive(Parser, Debug)]
#[command(name = "anoflip", version, about = "Model Anosov flows glued from fatgraph pieces")]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a fatgraph, piece or flow document.
    Validate { input: Option<PathBuf> },
    /// Build a piece from a fatgraph, a self-glued flow, or a flow from X_n graphs.
    Build(BuildArgs),
    /// Flip one piece of a flow.
    Flip {
        input: Option<PathBuf>,
        #[arg(long)]
        piece: usize,
    },
    /// Compare free-homotopy data of two flows.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
    /// Group flows into isotopy classes by sign vector.
    Classify {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
    /// Search for a piece-respecting orbit equivalence.
    SearchEquiv {
        first: PathBuf,
        second: PathBuf,
        /// Exit with 2 unless the outcome matches.
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Strong connectivity of the transit graph.
    Transitive { input: Option<PathBuf> },
    /// Periodic itineraries up to a length.
    Itineraries {
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
    /// Integrate one orbit of a block field.
    Integrate(IntegrateArgs),
    /// Cone expansion of block transit composed with a gluing matrix.
    ConeCheck(ConeArgs),
    /// Sampled checklist of the block properties.
    VerifyBlock {
        #[command(flatten)]
        field: FieldArgs,
        /// Points per side of the sample grid.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Print a built-in example.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        /// Index of X_n, or a comma-separated list for `construction`.
        #[arg(long, default_value = "1")]
        n: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Expect {
    Found,
    Exhausted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ExampleName {
    /// The two-vertex fatgraph on a twice-punctured torus.
    TwoHoledTorus,
    /// The fatgraph X_n.
    Xn,
    /// Two two-holed-torus pieces glued to each other.
    TwoTorusFlow,
    /// The cyclic construction on X_n for the listed n.
    Construction,
}

#[derive(Args, Debug)]
struct FieldArgs {
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Block sign, 1 or -1.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    sign: i64,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// A fatgraph document (ignored with --xn).
    input: Option<PathBuf>,
    #[command(flatten)]
    field: FieldArgs,
    /// Glue the piece's Out tori to its In tori and emit a flow.
    #[arg(long)]
    self_glue: bool,
    /// Build the cyclic construction on X_n for these n, e.g. `1,2`.
    #[arg(long)]
    xn: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct IntegrateArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x: f64,
    /// Defaults to the incoming face.
    #[arg(long, allow_negative_numbers = true)]
    y: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    z: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100.0)]
    t_max: f64,
    /// Keep every k-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Emit the samples as CSV instead of a JSON summary.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct ConeArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Gluing matrix `a,b,c,d` for `[[a,b],[c,d]]`.
    #[arg(long, default_value = "0,1,1,0", allow_hyphen_values = true)]
    matrix: String,
    /// `NX` or `NXxNZ` entry points.
    #[arg(long, default_value = "30")]
    grid: String,
    #[arg(long, default_value_t = 0.25)]
    halfwidth: f64,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Emit per-entry expansions as CSV instead of the JSON report.
    #[arg(long)]
    csv: bool,
}

/// Result of a command: text to emit and whether the answer was positive.
pub struct Output {
    pub text: String,
    pub positive: bool,
}

impl Output {
    pub fn ok(text: String) -> Output {
        Output { text, positive: true }
    }
}

pub fn read_input(path: Option<&PathBuf>) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ANOFLIP_THREADS") {
        let n: usize =
            v.trim().parse().with_context(|| format!("ANOFLIP_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("ANOFLIP_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring threads")?;
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<Output> {
    configure_threads()?;
    match cli.command {
        Command::Validate { input } => commands::validate(&read_input(input.as_ref())?),
        Command::Build(a) => commands::build(&a),
        Command::Flip { input, piece } => commands::flip(&read_input(input.as_ref())?, piece),
        Command::Compare { first, second, max_len } => commands::compare(&first, &second, max_len),
        Command::Classify { inputs, max_len } => commands::classify(&inputs, max_len),
        Command::SearchEquiv { first, second, expect } => commands::search(&first, &second, expect),
        Command::Transitive { input } => commands::transitive(&read_input(input.as_ref())?),
        Command::Itineraries { input, max_len } => commands::itineraries(&read_input(input.as_ref())?, max_len),
        Command::Integrate(a) => commands::integrate(&a),
        Command::ConeCheck(a) => commands::cone_check(&a),
        Command::VerifyBlock { field, grid, tol } => commands::verify_block(&field, grid, tol),
        Command::Example { name, n, seed, lambda } => commands::example(name, &n, seed, lambda),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code == 1 {
                eprintln!("\n{}", commands::SCHEMA_HINT);
            }
            return ExitCode::from(code);
        }
    };
    let out = cli.out.clone();
    match run(cli).and_then(|o| emit(&out, &o.text).map(|_| o.positive)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("{}", commands::SCHEMA_HINT);
            ExitCode::from(1)
        }
    }
}
