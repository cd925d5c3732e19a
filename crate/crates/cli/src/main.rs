//! Command-line front end: solve, transform and inspect CHC programs.

use anyhow::{Context, Result};
use chclin::ast::{parse_pred_name, parse_program, print_program, PrintStyle, Program, Query};
use chclin::dimension::{kdim, Interpretation};
use chclin::driver::{check_model, model_arities, solve, Config, Outcome};
use chclin::linear_solver::SolverConfig;
use chclin::linearise::{linearise, Strategy};
use chclin::oracle::{enumerate_feasible_traces, EnumBudget};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// `println!` that stops quietly when stdout is closed, as under `| head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// `print!` counterpart of [`say!`].
macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_SAFE: u8 = 0;
const EXIT_UNSAFE: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "chclin", version, about = "Safety of non-linear Horn clauses via tree dimension and linearisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide safety of a program.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Print the at-most-k-dimension program.
    Kdim {
        file: PathBuf,
        #[arg(short)]
        k: u32,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Print the linearised at-most-k-dimension program and its goal stacks.
    Linearise {
        file: PathBuf,
        #[arg(short)]
        k: u32,
        #[arg(long, value_enum, default_value_t = Order::Permute)]
        strategy: Order,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Check that a model file solves a program. Exit 0 if it does, 1 if not.
    CheckModel { file: PathBuf, model: PathBuf },
    /// List feasible derivations up to a height bound.
    Oracle {
        file: PathBuf,
        /// `false` or a predicate name (`p`, `p_e1`, `p_le1`).
        #[arg(long, default_value = "false")]
        target: String,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 50_000)]
        max_nodes: usize,
        #[arg(long, default_value_t = 10_000)]
        max_trees: usize,
    },
}

#[derive(clap::Args)]
struct SolveOpts {
    #[arg(long, default_value_t = 5)]
    max_k: u32,
    #[arg(long, value_enum, default_value_t = Order::Permute)]
    strategy: Order,
    /// Carry the previous model into the next dimension.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    reuse: Switch,
    #[arg(long, default_value_t = 1)]
    widen_delay: usize,
    #[arg(long, default_value_t = 1)]
    narrow_steps: usize,
    /// Longest abstract path the linear solver replays.
    #[arg(long, default_value_t = 200)]
    depth_bound: usize,
    /// Seconds; 0 for none.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Permute,
    DimOrdered,
}

impl From<Order> for Strategy {
    fn from(o: Order) -> Self {
        match o {
            Order::Permute => Strategy::Permute,
            Order::DimOrdered => Strategy::DimOrdered,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl SolveOpts {
    fn config(&self) -> Config {
        Config {
            max_k: self.max_k,
            strategy: self.strategy.into(),
            reuse: matches!(self.reuse, Switch::On),
            solver: SolverConfig { widen_delay: self.widen_delay, narrow_steps: self.narrow_steps, depth_bound: self.depth_bound },
            timeout: (self.timeout > 0).then(|| Duration::from_secs(self.timeout)),
        }
    }
}

fn read_program(path: &Path) -> Result<Program> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_program(&text).with_context(|| format!("{}", path.display()))
}

fn style(f: Format) -> PrintStyle {
    match f {
        Format::Human => PrintStyle::Human,
        Format::Machine => PrintStyle::Exchange,
    }
}

fn run_solve(file: &Path, opts: &SolveOpts, format: Format) -> Result<u8> {
    let p = read_program(file)?;
    let start = Instant::now();
    let report = solve(&p, &opts.config())?;
    let ms = start.elapsed().as_millis();
    let out = &report.outcome;
    let code = match out {
        Outcome::Safe { .. } => EXIT_SAFE,
        Outcome::Unsafe { .. } => EXIT_UNSAFE,
        Outcome::Unknown { .. } => EXIT_UNKNOWN,
    };
    match format {
        Format::Machine => {
            let mut line = format!("verdict={} k={} time_ms={ms}", out.verdict(), out.k());
            if let Outcome::Unknown { reason, .. } = out {
                line.push_str(&format!(" reason={reason}"));
            }
            say!("{line}");
        }
        Format::Human => {
            say!("{}: {} at k={} ({ms} ms, {} rounds)", file.display(), out.verdict(), out.k(), report.iterations.len());
            if let Outcome::Unknown { reason, .. } = out {
                say!("reason: {reason}");
            }
        }
    }
    match out {
        Outcome::Safe { model, .. } => {
            say_raw!("{}", model.render(&model_arities(&p)?));
            say!("false :- 1=0.");
        }
        Outcome::Unsafe { witness, .. } => say!("{witness}"),
        Outcome::Unknown { .. } => {}
    }
    Ok(code)
}

fn run_check_model(file: &Path, model: &Path) -> Result<u8> {
    let p = read_program(file)?;
    let text = std::fs::read_to_string(model).with_context(|| format!("cannot read {}", model.display()))?;
    // a machine-format solve output may be passed as is
    let body: String = text.lines().filter(|l| !l.starts_with("verdict=")).map(|l| format!("{l}\n")).collect();
    let m = Interpretation::parse(&body).with_context(|| format!("{}", model.display()))?;
    if check_model(&p, &m)? {
        say!("valid=true");
        Ok(0)
    } else {
        say!("valid=false");
        Ok(1)
    }
}

fn run_oracle(file: &Path, target: &str, depth: usize, max_nodes: usize, max_trees: usize) -> Result<u8> {
    let p = read_program(file)?;
    let query = if target == "false" { Query::False } else { Query::Pred(parse_pred_name(target)) };
    let e = enumerate_feasible_traces(&p, &query, EnumBudget::new(depth, max_nodes, max_trees)?)?;
    for t in &e.trees {
        say!("{t}");
    }
    let status = match (e.trees.is_empty(), e.complete) {
        (false, _) => "yes",
        (true, true) => "no-within-budget",
        (true, false) => "budget-exhausted",
    };
    say!("derivable={status} traces={} complete={}", e.trees.len(), e.complete);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { file, opts, format } => run_solve(&file, &opts, format),
        Command::Kdim { file, k, format } => {
            let (pk, _) = kdim(&read_program(&file)?, k)?;
            say_raw!("{}", print_program(&pk, style(format)));
            Ok(0)
        }
        Command::Linearise { file, k, strategy, format } => {
            let (lp, _, _) = linearise(&read_program(&file)?, k, &Interpretation::new(), strategy.into())?;
            for line in lp.state_table().lines() {
                say!("% {line}");
            }
            say_raw!("{}", print_program(&lp.program, style(format)));
            Ok(0)
        }
        Command::CheckModel { file, model } => run_check_model(&file, &model),
        Command::Oracle { file, target, depth, max_nodes, max_trees } => run_oracle(&file, &target, depth, max_nodes, max_trees),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
