use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subshift_lcs::config::{ConfigError, ConfigFile};
use subshift_lcs::entropy::entropy_report;
use subshift_lcs::harness::{convergence_table, run_experiment, to_csv};
use subshift_lcs::{lcs_exact, match_curve, Error, Symbol};

mod seqio;

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "subshift-lcs", version, about = "Longest common substring statistics for random subshifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Longest common substring of two sequences.
    Match(MatchArgs),
    /// Rényi entropy and decay-rate report for a configured system.
    Entropy(EntropyArgs),
    /// Run the growth experiment described by a config.
    Experiment(ExperimentArgs),
    /// Check a config against the schema without running anything.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct MatchArgs {
    /// First sequence (a file path, or the sequence itself with --inline).
    x: String,
    /// Second sequence.
    y: String,
    /// Treat X and Y as sequence text instead of file paths.
    #[arg(long)]
    inline: bool,
    /// Sequences are ACGT letters (A=0, C=1, G=2, T=3).
    #[arg(long)]
    dna: bool,
    /// Also print M_n for these prefix lengths as CSV.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
    /// Truncate both sequences to this length.
    #[arg(long)]
    prefix: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EntropyArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report entropies in bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Add the (biased) empirical k-mer ladder from one sample of this length.
    #[arg(long)]
    empirical_length: Option<usize>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Write the result JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the flat CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_FAILURE,
            _ => EXIT_PARSE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::LengthMismatch { .. } => EXIT_MISMATCH,
            Error::TooDeep { .. } | Error::TooLarge { .. } => EXIT_RESOURCE,
            Error::InvalidParameter(_) => EXIT_PARSE,
            _ => EXIT_FAILURE,
        };
        let mut message = e.to_string();
        if matches!(e, Error::TooDeep { .. }) {
            message.push_str("; lower entropy.k_max");
        }
        Failure::new(code, message)
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn load_sequence(arg: &str, inline: bool, dna: bool) -> Result<Vec<Symbol>, Failure> {
    let (text, source) = if inline {
        (arg.to_string(), "<inline>".to_string())
    } else {
        let text = fs::read_to_string(arg).map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot read {arg}: {e}")))?;
        (text, arg.to_string())
    };
    seqio::parse_sequence(&text, dna, &source).map_err(|e| Failure::new(EXIT_PARSE, e.to_string()))
}

fn cmd_match(args: MatchArgs) -> Result<(), Failure> {
    let mut x = load_sequence(&args.x, args.inline, args.dna)?;
    let mut y = load_sequence(&args.y, args.inline, args.dna)?;
    if let Some(n) = args.prefix {
        if n > x.len() || n > y.len() {
            return Err(Failure::new(
                EXIT_MISMATCH,
                format!("prefix {n} exceeds sequence lengths {} and {}", x.len(), y.len()),
            ));
        }
        x.truncate(n);
        y.truncate(n);
    }
    let m = lcs_exact(&x, &y)?;
    let witness = &x[m.x_pos..m.x_pos + m.length];
    let witness: String = if args.dna {
        witness.iter().map(|&s| seqio::dna_letter(s)).collect()
    } else {
        witness.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    };
    let mut report = format!(
        "n {}\nlength {}\nx_pos {}\ny_pos {}\nwitness {}\n",
        x.len(),
        m.length,
        m.x_pos,
        m.y_pos,
        witness
    );
    if let Some(ladder) = args.ladder {
        let curve = match_curve(&x, &y, &ladder)?;
        report.push_str("n,M_n\n");
        for (n, v) in curve.ladder.iter().zip(&curve.values) {
            report.push_str(&format!("{n},{v}\n"));
        }
    }
    write_output(args.out.as_deref(), &report)
}

fn cmd_entropy(args: EntropyArgs) -> Result<(), Failure> {
    let config = ConfigFile::load(&args.config)?;
    let system = config.system()?;
    let mut settings = config.report_settings()?;
    settings.empirical_length = args.empirical_length;
    let mut report = with_workers(args.workers, || entropy_report(&system, &settings))??;
    if args.bits {
        report = report.into_bits();
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_output(args.out.as_deref(), &(json + "\n"))
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let config = ConfigFile::load(&args.config)?.experiment()?;
    let result = with_workers(args.workers, || run_experiment(&config))??;
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&result).expect("result serializes");
        write_output(Some(path), &(json + "\n"))?;
    }
    if let Some(path) = &args.csv {
        write_output(Some(path), &to_csv(&result))?;
    }
    let mut table = format!("{:>10} {:>12} {:>12} {:>14}\n", "n", "mean_Mn", "Mn/log_n", "2log_n/H2");
    for row in convergence_table(&result)? {
        let theory = row.theoretical_mn.map_or("-".to_string(), |t| format!("{t:.4}"));
        table.push_str(&format!("{:>10} {:>12.4} {:>12.4} {:>14}\n", row.n, row.mean_mn, row.mn_over_logn, theory));
    }
    table.push_str(&format!(
        "pooled slope {:.4} (stderr {:.4}, mc se {:.4})",
        result.pooled_slope, result.pooled_slope_stderr, result.pooled_slope_mc_se
    ));
    match (result.theoretical_slope, result.relative_error) {
        (Some(t), Some(r)) => table.push_str(&format!(", theoretical {t:.4}, relative error {r:.4}\n")),
        _ => table.push('\n'),
    }
    write_output(None, &table)
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    ConfigFile::load(path)?;
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Match(args) => cmd_match(args),
        Command::Entropy(args) => cmd_entropy(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Validate { config } => cmd_validate(&config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
