use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use dpskgd::bench::{
    compare_methods, comparison_table, experiment::synthetic_spec, gen_synthetic, parse_seed_list, plan_method,
    run_experiment, ExperimentConfig, ExperimentOutput, Prepared, Profile, RawConfig, Value,
};
use dpskgd::erm::{LipschitzMap, LossModel};
use dpskgd::linalg::DiagonalMatrix;
use dpskgd::optimizer::{utility_bound, BoundQuery, BoundRow, Regime};
use dpskgd::privacy::PrivacyBudget;
use dpskgd::sampling::{contiguous_blocks, RandomState, SamplingDistribution, SubsetKey};
use dpskgd::{Error, Result};

#[derive(Parser)]
#[command(name = "dpskgd", version, about = "Private sketched gradient descent benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (flat `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds, e.g. `1,2,3` or `0..20`; overrides `seeds`.
    #[arg(long, global = true)]
    seed_list: Option<String>,
    /// Output path; overrides `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rescale every feature column to unit maximum absolute value.
    #[arg(long, global = true)]
    rescale_columns: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV and its constants as JSON.
    Gen,
    /// Print the noise table for each configured method.
    Calibrate,
    /// Run the configured methods over all seeds.
    Run,
    /// Run the configured methods and print the ratio table.
    Compare,
    /// Evaluate one row of the utility-bound table.
    Bound,
}

/// Failure kinds with their exit codes.
enum Failure {
    Config(Error),
    AllDiverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(Failure::AllDiverged) => {
            eprintln!("error: every seed diverged");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RawConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut raw = RawConfig::read(path)?;
    if let Some(s) = &cli.seed_list {
        let seeds = parse_seed_list(s)?;
        raw.set("seeds", Value::Array(seeds.iter().map(u64::to_string).collect()));
    }
    if let Some(out) = &cli.out {
        raw.set("out", Value::Scalar(out.display().to_string()));
    }
    if cli.rescale_columns {
        raw.set("rescale_columns", Value::Scalar("true".into()));
    }
    Ok(raw)
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    let raw = load_config(cli)?;
    match cli.command {
        Command::Gen => gen(raw)?,
        Command::Calibrate => calibrate(raw)?,
        Command::Run => {
            let cfg = ExperimentConfig::from_raw(raw)?;
            let out = run_experiment(&cfg)?;
            emit(&cfg, &out, false)?;
            if out.all_diverged() {
                return Err(Failure::AllDiverged);
            }
        }
        Command::Compare => {
            let cfg = ExperimentConfig::from_raw(raw)?;
            let out = compare_methods(&cfg)?;
            emit(&cfg, &out, true)?;
            if out.all_diverged() {
                return Err(Failure::AllDiverged);
            }
        }
        Command::Bound => bound(raw)?,
    }
    Ok(())
}

fn emit(cfg: &ExperimentConfig, out: &ExperimentOutput, table: bool) -> Result<()> {
    match &cfg.out {
        Some(path) => {
            let json = out.write(path)?;
            eprintln!("wrote {} and {}", path.display(), json.display());
        }
        None if !table => print!("{}", out.csv),
        None => {}
    }
    if table {
        print!("{}", comparison_table(out));
    }
    Ok(())
}

#[derive(Serialize)]
struct Constants<'a> {
    loss: &'a str,
    n: usize,
    d: usize,
    profile: &'a Profile,
    smoothness: &'a [f64],
    mu: Option<f64>,
    lipschitz_full: Option<f64>,
    lipschitz: Option<Vec<f64>>,
    planted: &'a [f64],
    w_star: &'a [f64],
    f_star: f64,
    optimum_note: String,
}

fn gen(mut raw: RawConfig) -> Result<()> {
    let loss: LossModel = raw.required::<String>("loss")?.parse()?;
    let spec = synthetic_spec(&mut raw, loss)?;
    let seed = raw.scalar("data_seed")?.unwrap_or(0);
    let out: PathBuf = raw.required::<String>("out")?.into();
    let rescale = raw.flag("rescale_columns")?;
    raw.finish()?;
    if spec.n < 2 * spec.d {
        eprintln!("warning: n = {} is small relative to d = {}", spec.n, spec.d);
    }

    let s = gen_synthetic(&spec, &mut RandomState::seed_from(seed))?;
    let prep = if rescale {
        Prepared::from_problem(dpskgd::erm::Problem::new(loss, s.problem.data.rescale_columns())?)?
    } else {
        Prepared { problem: s.problem, optimum: s.optimum, smoothness: s.smoothness, mu: s.mu }
    };
    let data = &prep.problem.data;
    let (lipschitz_full, lipschitz) = match loss {
        LossModel::Logistic => {
            let full = SamplingDistribution::full(data.d())?;
            let l = LipschitzMap::compute(loss, data, &full)?;
            let per = (0..data.d()).map(|j| l.get(SubsetKey::Coordinate(j))).collect::<Result<Vec<_>>>()?;
            (Some(l.get(SubsetKey::Full)?), Some(per))
        }
        LossModel::Quadratic => (None, None),
    };
    let constants = Constants {
        loss: loss.name(),
        n: data.n(),
        d: data.d(),
        profile: &spec.profile,
        smoothness: prep.smoothness.as_slice(),
        mu: prep.mu,
        lipschitz_full,
        lipschitz,
        planted: &s.planted,
        w_star: &prep.optimum.w,
        f_star: prep.optimum.value,
        optimum_note: prep.optimum.note(),
    };
    data.write_csv(std::io::BufWriter::new(std::fs::File::create(&out)?))?;
    let json_path = out.with_extension("json");
    let mut json = serde_json::to_string_pretty(&constants).map_err(|e| Error::Io(e.to_string()))?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    eprintln!("wrote {} and {}", out.display(), json_path.display());
    Ok(())
}

fn calibrate(raw: RawConfig) -> Result<()> {
    let cfg = ExperimentConfig::from_raw(raw)?;
    let prep = Prepared::load(&cfg.data, cfg.loss, cfg.rescale_columns)?;
    let mut s = String::from("method,subset,lipschitz,sigma_sq,t,k,audited_eps\n");
    for m in &cfg.methods {
        let plan = plan_method(&prep, m, cfg.budget, cfg.schedule, cfg.w0.as_deref(), cfg.mu)?;
        for (key, var) in plan.noise.entries() {
            let _ = writeln!(
                s,
                "{},{key},{},{var},{},{},{}",
                plan.label,
                plan.lipschitz.get(*key)?,
                plan.schedule.t,
                plan.schedule.k,
                plan.audited_eps
            );
        }
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, s)?,
        None => print!("{s}"),
    }
    Ok(())
}

fn bound(mut raw: RawConfig) -> Result<()> {
    let row: BoundRow = raw.required::<String>("row")?.parse()?;
    let regime: Regime = raw.scalar::<String>("regime")?.as_deref().unwrap_or("convex").parse()?;
    let budget = PrivacyBudget::new(raw.required("epsilon")?, raw.required("delta")?)?;
    let mut q = BoundQuery::new(row, regime, raw.required("n")?, budget);
    q.lipschitz = raw.array("lipschitz")?;
    q.lipschitz_full = raw.scalar("lipschitz_full")?;
    q.smoothness = raw.array("smoothness")?.map(DiagonalMatrix::positive).transpose()?;
    q.probabilities = raw.array("probabilities")?.map(DiagonalMatrix::probabilities).transpose()?;
    q.mu = raw.scalar("mu")?;
    q.radius = raw.scalar("radius")?;
    q.sigma_s_sq = raw.scalar("sigma_s_sq")?;
    q.dim = raw.scalar("dim")?;
    if let Some(size) = raw.scalar::<usize>("block_size")? {
        let d = q.dim.or(q.smoothness.as_ref().map(|m| m.dim())).ok_or(Error::MissingConstant("dim"))?;
        q.blocks = Some(contiguous_blocks(d, size));
    }
    let out: Option<PathBuf> = raw.string("out")?.map(PathBuf::from);
    raw.finish()?;
    let value = utility_bound(&q)?;
    let line = format!("row,regime,value\n{},{},{value}\n", row.name(), raw_regime(regime));
    match out {
        Some(path) => std::fs::write(path, line)?,
        None => print!("{line}"),
    }
    Ok(())
}

fn raw_regime(r: Regime) -> &'static str {
    match r {
        Regime::Convex => "convex",
        Regime::StronglyConvex => "strongly-convex",
    }
}
