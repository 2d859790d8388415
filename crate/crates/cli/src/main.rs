use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ayang_cli::commands::{self, CliError, EvalCheck, RMinusArgs, RMinusVerify, EXIT_CHECK_FAILED, EXIT_USAGE};
use ayang_core::resum::Eta;
use ayang_core::rminus::Mode;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;

#[derive(Parser)]
#[command(name = "ayang", version, about = "Affine Cartan data, q-Cartan determinants and R-matrix evaluation")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Include wall-clock time in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtaArg {
    Up,
    Down,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalCheckArg {
    Unitarity,
    Cabling,
    Rational,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Intertwiner,
    Cocycle,
}

#[derive(Subcommand)]
enum Command {
    /// Cartan datum, mu, augmented rank, zeta and gamma for one affine type.
    Cartan {
        #[arg(long = "type")]
        type_id: String,
    },
    /// Recompute the determinant tables and compare with the stored rows.
    Tables {
        #[arg(long, default_value_t = 8)]
        max_rank: u32,
    },
    /// Exact coefficients of the formal abelian R-matrix.
    FormalR0 {
        #[arg(long = "type")]
        type_id: String,
        #[arg(long, default_value_t = 12)]
        order: usize,
    },
    /// Evaluate a difference-equation solution described by a JSON spec.
    Resum {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Evaluate the diagonal abelian R-matrix on two modules.
    Eval {
        #[arg(long = "type")]
        type_id: String,
        #[arg(long)]
        v1: PathBuf,
        #[arg(long)]
        v2: PathBuf,
        #[arg(long, value_enum, default_value_t = EtaArg::Up)]
        eta: EtaArg,
        /// Spectral parameter as `re,im`.
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true)]
        s: C64,
        #[arg(long, value_enum)]
        check: Option<EvalCheckArg>,
    },
    /// Solve the lower-triangular R-matrix recursion.
    Rminus {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 4)]
        height: i64,
        /// `exact` or `series:N`.
        #[arg(long, default_value = "exact")]
        mode: Mode,
        #[arg(long, value_enum)]
        verify: Option<VerifyArg>,
        /// Evaluation points `re,im`; repeatable. Defaults to a fixed spiral of 20 points.
        #[arg(long = "s", value_parser = commands::parse_complex, allow_hyphen_values = true)]
        points: Vec<C64>,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true, default_value = "2,0.5")]
        s1: C64,
        #[arg(long, value_parser = commands::parse_complex, allow_hyphen_values = true, default_value = "-1.5,1")]
        s2: C64,
    },
    /// Run the acceptance criteria.
    Selftest {
        /// Criterion number 1..=7; repeatable. Defaults to all.
        #[arg(long)]
        criterion: Vec<u32>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AYANG_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("AYANG_THREADS must be a positive integer, got {v:?}")))?;
    if n == 0 {
        return Err(CliError::Usage("AYANG_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure the thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<ayang_cli::report::RunManifest, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Cartan { type_id } => commands::cartan(type_id),
        Command::Tables { max_rank } => commands::tables(*max_rank),
        Command::FormalR0 { type_id, order } => commands::formal_r0(type_id, *order),
        Command::Resum { spec } => commands::resum(spec),
        Command::Eval { type_id, v1, v2, eta, s, check } => {
            let eta = match eta {
                EtaArg::Up => Eta::Up,
                EtaArg::Down => Eta::Down,
            };
            let check = check.map(|c| match c {
                EvalCheckArg::Unitarity => EvalCheck::Unitarity,
                EvalCheckArg::Cabling => EvalCheck::Cabling,
                EvalCheckArg::Rational => EvalCheck::Rational,
            });
            commands::eval(type_id, v1, v2, eta, *s, check)
        }
        Command::Rminus { data, height, mode, verify, points, s1, s2 } => {
            let verify = verify.map(|v| match v {
                VerifyArg::Intertwiner => RMinusVerify::Intertwiner,
                VerifyArg::Cocycle => RMinusVerify::Cocycle,
            });
            let points = if points.is_empty() { commands::default_samples() } else { points.clone() };
            commands::rminus(&RMinusArgs { data, height: *height, mode: *mode, verify, points, s1: *s1, s2: *s2 })
        }
        Command::Selftest { criterion } => {
            let ids: Vec<u32> = if criterion.is_empty() { (1..=7).collect() } else { criterion.clone() };
            commands::selftest(&ids, cli.timing)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    match run(&cli) {
        Ok(mut m) => {
            if cli.timing {
                m.wall_time_s = Some(start.elapsed().as_secs_f64());
            }
            match cli.format {
                Format::Json => println!("{}", m.to_json()),
                Format::Text => print!("{}", m.to_text()),
            }
            if m.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
