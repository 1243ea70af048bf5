use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use prior_forge::priors::PriorOptions;
use prior_forge::report::PriorReport;
use prior_forge::sim::{self, SimGrid, MC_DRAWS};
use prior_forge::{build_all_priors, parse_formula, Error, Family, RhoScale, ScaleLabel, Table, TaylorConfig};

#[derive(Parser)]
#[command(name = "prior-forge", version, about = "Default priors for GLM coefficients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute default priors for a model on a CSV dataset.
    Priors(PriorsArgs),
    /// Run the seeded simulation checks and print tab-separated results.
    Simverify(SimArgs),
}

#[derive(Parser)]
struct PriorsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    formula: String,
    #[arg(long, default_value = "gaussian")]
    family: Family,
    /// Named correlation-scale width for all terms.
    #[arg(long, conflicts_with = "sigma_rho")]
    scale: Option<ScaleLabel>,
    /// Numeric correlation-scale SD for all terms.
    #[arg(long)]
    sigma_rho: Option<f64>,
    /// Per-term width, NAME=LABEL or NAME=VALUE; repeatable.
    #[arg(long = "scale-term", value_name = "NAME=SCALE")]
    scale_term: Vec<String>,
    #[arg(long, value_parser = ["1", "3", "5"])]
    taylor_order: Option<String>,
    #[arg(long, value_enum, default_value_t = Output::Json)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Table,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Check {
    Roundtrip,
    TaylorSd,
    All,
}

#[derive(Parser)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = Check::All)]
    check: Check,
    /// Monte Carlo draws per scale in the taylor-sd check.
    #[arg(long, default_value_t = MC_DRAWS)]
    draws: usize,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() || matches!(e, Error::InvalidScale(_) | Error::InvalidTaylor(_)) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Compute(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Priors(args) => run_priors(args),
        Command::Simverify(args) => run_simverify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_scale_terms(items: &[String]) -> Result<BTreeMap<String, RhoScale>, Failure> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--scale-term `{item}` is not NAME=SCALE")))?;
        let scale: RhoScale = value.trim().parse()?;
        if out.insert(name.trim().to_string(), scale).is_some() {
            return Err(Failure::Usage(format!("--scale-term `{name}` given twice")));
        }
    }
    Ok(out)
}

fn run_priors(args: PriorsArgs) -> Result<(), Failure> {
    let spec = parse_formula(&args.formula)?.with_family(args.family);
    let default_scale = match (args.scale, args.sigma_rho) {
        (Some(label), _) => RhoScale::from_label(label),
        (None, Some(s)) => RhoScale::new(s)?,
        (None, None) => RhoScale::default(),
    };
    let term_scales = parse_scale_terms(&args.scale_term)?;
    if let Some(unknown) = term_scales.keys().find(|t| !spec.fixed_terms.contains(t)) {
        return Err(Failure::Usage(format!(
            "--scale-term `{unknown}` is not a fixed term of the formula"
        )));
    }
    let taylor = args
        .taylor_order
        .map(|o| TaylorConfig::with_order(o.parse().expect("validated by clap")))
        .transpose()?;
    let options = PriorOptions {
        default_scale,
        term_scales,
        taylor,
    };
    let table = Table::from_csv_path(&args.data)?;
    let set = build_all_priors(&spec, &table, &options)?;
    let report = PriorReport::from(&set);
    match args.output {
        Output::Json => println!("{}", report.to_json()?),
        Output::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("PRIOR_FORGE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|t| *t > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("PRIOR_FORGE_THREADS=`{v}` is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn run_simverify(args: SimArgs) -> Result<(), Failure> {
    if args.reps == 0 || args.draws < 2 {
        return Err(Failure::Usage("--reps must be positive and --draws at least 2".into()));
    }
    let threads = threads_from_env()?;
    let mut failed = 0;
    if matches!(args.check, Check::Roundtrip | Check::All) {
        let rows = sim::roundtrip(&SimGrid::new(args.seed, args.reps), threads)?;
        print!("{}", sim::roundtrip_tsv(&rows));
        let bad = rows.iter().filter(|r| !r.passed()).count();
        eprintln!("roundtrip: {} of {} cells within threshold", rows.len() - bad, rows.len());
        failed += bad;
    }
    if args.check == Check::All {
        println!();
    }
    if matches!(args.check, Check::TaylorSd | Check::All) {
        let rows = sim::taylor_sd(args.seed, args.draws, threads)?;
        print!("{}", sim::taylor_sd_tsv(&rows));
        let bad = rows.iter().filter(|r| !r.passed()).count();
        eprintln!("taylor-sd: {bad} checked scale(s) outside range");
        failed += bad;
    }
    if failed > 0 {
        return Err(Failure::Compute(format!("{failed} simulation check(s) failed")));
    }
    Ok(())
}
