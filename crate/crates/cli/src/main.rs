mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use dgfib_core::linalg::Field;

/// Hard cap on the simplex level accepted from the command line.
pub const MAX_N: usize = 6;

#[derive(Parser, Debug)]
#[command(name = "dgfib", version, about = "Exact checks for A-infinity functor categories and Reedy fibrancy lifts")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Category file.
    #[arg(long, global = true)]
    pub cat: Option<PathBuf>,
    /// Primary input file.
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    /// Output file (or directory for commands writing several files).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    /// `q` or `fp:P`.
    #[arg(long, global = true, default_value = "q")]
    pub field: Field,
    /// Sign scheme file (defaults to the built-in calibrated scheme).
    #[arg(long, global = true)]
    pub scheme: Option<PathBuf>,
    /// Flip one calibrated sign, by index or name (mutation testing).
    #[arg(long, global = true, hide = true)]
    pub mutate_sign: Option<String>,
    /// Add wall-clock time to the report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenKind {
    Cat,
    Mc,
    Hoequiv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteName {
    Core,
    Ainfty,
    Reedy,
    Pretr,
    All,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a category, MC object, transformation, morphism or twisted complex file.
    Validate,
    /// Write a seeded random category, MC object or homotopy equivalence.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
    },
    /// Check the Maurer–Cartan equation and edge invertibility of an object.
    McCheck,
    /// Apply the A∞ differential to a transformation.
    Dinf,
    /// Decide whether a morphism or transformation is a homotopy equivalence.
    Hoequiv,
    /// Solve for a Kontsevich witness of a closed degree-0 morphism.
    Witness,
    /// Apply the matching map (drop the top component).
    Match,
    /// Lift a closed map out of a truncated object along the matching map.
    Lift {
        /// Full MC object whose truncation is the source of the map.
        #[arg(long)]
        source: PathBuf,
        /// Kontsevich witness for the first component (solved for if absent).
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Cone of a closed degree-0 morphism or twisted-complex map.
    Cone,
    /// Search for a contraction of a twisted complex.
    Contract,
    /// Search for the unique sign scheme making the lift formulas valid.
    Calibrate,
    /// Run the lifting property on generated instances.
    FibrationTest,
    /// Check that constant inclusions are quasi-isomorphisms.
    QuasiEquivTest,
    /// Run an acceptance battery.
    Suite {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteName,
    },
}

/// Why a command did not pass.
#[derive(Debug)]
pub enum Failure {
    /// A checked property does not hold (exit 1).
    Violated(String),
    /// Bad or unreadable input (exit 2).
    Input(String),
}

impl From<dgfib_core::Error> for Failure {
    fn from(e: dgfib_core::Error) -> Failure {
        use dgfib_core::Error as E;
        match e {
            E::Calibration { .. } | E::Generation(_) => Failure::Violated(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

/// A command's verdict and report body.
pub struct Outcome {
    pub passed: bool,
    pub body: Map<String, Value>,
}

impl Outcome {
    pub fn new(passed: bool, body: Value) -> Outcome {
        let body = match body {
            Value::Object(m) => m,
            other => Map::from_iter([("result".to_string(), other)]),
        };
        Outcome { passed, body }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Gen { .. } => "gen",
        Command::McCheck => "mc-check",
        Command::Dinf => "dinf",
        Command::Hoequiv => "hoequiv",
        Command::Witness => "witness",
        Command::Match => "match",
        Command::Lift { .. } => "lift",
        Command::Cone => "cone",
        Command::Contract => "contract",
        Command::Calibrate => "calibrate",
        Command::FibrationTest => "fibration-test",
        Command::QuasiEquivTest => "quasi-equiv-test",
        Command::Suite { .. } => "suite",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let name = command_name(&cli.command);
    let result = if cli.common.n > MAX_N {
        Err(Failure::Input(format!("--n {} exceeds the cap {MAX_N}", cli.common.n)))
    } else if cli.common.trials == 0 {
        Err(Failure::Input("--trials must be at least 1".into()))
    } else {
        commands::run(&cli.common, &cli.command)
    };
    let (status, code, mut body) = match result {
        Ok(o) if o.passed => ("pass", 0, o.body),
        Ok(o) => ("fail", 1, o.body),
        Err(Failure::Violated(msg)) => ("fail", 1, Map::from_iter([("error".to_string(), json!(msg))])),
        Err(Failure::Input(msg)) => ("error", 2, Map::from_iter([("error".to_string(), json!(msg))])),
    };
    let mut report = Map::new();
    report.insert("command".into(), json!(name));
    report.insert("status".into(), json!(status));
    report.append(&mut body);
    if cli.common.timing {
        report.insert("elapsed_ms".into(), json!(start.elapsed().as_millis() as u64));
    }
    println!("{}", serde_json::to_string_pretty(&Value::Object(report)).expect("report serializes"));
    if code != 0 {
        eprintln!("dgfib {name}: {status}");
    }
    ExitCode::from(code)
}
