//! `fairfit` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairfit::decorrelate::BiasOptions;
use fairfit::frrm::{parse_definition, FitOptions};
use fairfit::glm::fit_fgrrm_with;
use fairfit::model_matrix::load_csv_columns;
use fairfit::{
    bias_ratio_curve, encode, example_schema, kfold_cv, load_csv, predict, profile_sweep,
    synth_example, CvConfig, Distance, Error, ErrorCategory, Execution, FairnessSpec, Family,
    FittedModel, Schema, DEFAULT_R_GRID,
};

const THREADS_VAR: &str = "FAIRFIT_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "fairfit",
    version,
    about = "Fit regression models with a bounded dependence on sensitive attributes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model at bound --r and write it as JSON.
    Fit(FitArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Refit over a grid of bounds and write coefficients and fairness values.
    Profile(ProfileArgs),
    /// Repeated k-fold cross-validation over a grid of bounds.
    Cv(CvArgs),
    /// Decorrelation bias curve on simulated linear data.
    BiasDemo(BiasArgs),
    /// Write one of the simulated example datasets.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DefinitionArg {
    Sp,
    Eo,
    If,
    Max,
    Convex,
}

impl DefinitionArg {
    fn label(self) -> &'static str {
        match self {
            DefinitionArg::Sp => "sp",
            DefinitionArg::Eo => "eo",
            DefinitionArg::If => "if",
            DefinitionArg::Max => "max",
            DefinitionArg::Convex => "convex",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Binomial,
    Poisson,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
            FamilyArg::Poisson => Family::Poisson,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistanceArg {
    Absolute,
    Squared,
}

/// Options shared by every verb that fits models.
#[derive(Args, Debug)]
struct ModelArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column roles as JSON or TOML.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum, default_value = "sp")]
    definition: DefinitionArg,
    /// Weight on statistical parity for `--definition convex`, in (0, 1).
    #[arg(long, value_parser = open_unit, required_if_eq("definition", "convex"))]
    w: Option<f64>,
    /// Ridge penalty on the non-sensitive coefficients.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    lambda2: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    family: FamilyArg,
    /// Pairwise distance used by individual fairness.
    #[arg(long, value_enum, default_value = "absolute")]
    distance: DistanceArg,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fairness bound in [0, 1].
    #[arg(long, value_parser = unit_interval)]
    r: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated bounds; defaults to 0,0.01,0.02,0.05,0.1,0.2,0.5.
    #[arg(long, value_parser = bound_list)]
    r_grid: Option<Values>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = bound_list)]
    r_grid: Option<Values>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-cell results as CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON report with aggregates.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BiasArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated bounds in (0, 1).
    #[arg(long, value_parser = bound_list, default_value = "0.01,0.02,0.1")]
    r_list: Values,
    /// `log:A:B:N` for N penalties from 10^A to 10^B, or a comma list.
    #[arg(long, value_parser = lambda_grid, default_value = "log:-1:4:41")]
    lambda_grid: Values,
    /// Folds of the per-column penalty search.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    example: u32,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A comma list parsed as a single option value.
#[derive(Clone, Debug)]
struct Values(Vec<f64>);

fn parse_real(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{text}` is not finite"))
    }
}

fn unit_interval(text: &str) -> Result<f64, String> {
    let v = parse_real(text)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn open_unit(text: &str) -> Result<f64, String> {
    let v = parse_real(text)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn non_negative(text: &str) -> Result<f64, String> {
    let v = parse_real(text)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

fn bound_list(text: &str) -> Result<Values, String> {
    text.split(',').map(unit_interval).collect::<Result<_, _>>().map(Values)
}

fn lambda_grid(text: &str) -> Result<Values, String> {
    if let Some(rest) = text.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("`{text}` is not of the form log:A:B:N"));
        };
        let (a, b) = (parse_real(a)?, parse_real(b)?);
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| format!("`{n}` is not a point count"))?;
        if n < 2 || a >= b {
            return Err("need A < B and N >= 2".into());
        }
        return Ok(Values(
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect(),
        ));
    }
    text.split(',').map(non_negative).collect::<Result<_, _>>().map(Values)
}

/// A failure with the option or input it concerns.
enum Failure {
    Usage(String),
    Core { context: String, error: Error },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core { error, .. } => match error.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Solver => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core {
                error: Error::InvalidArgument { name, reason },
                ..
            } => format!("invalid value for --{}: {reason}", name.replace('_', "-")),
            Failure::Core { context, error } => format!("{context}: {error}"),
        }
    }
}

trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, Failure>;
}

impl<T> Context<T> for fairfit::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T, Failure> {
        self.map_err(|error| Failure::Core {
            context: what.into(),
            error,
        })
    }
}

fn execution() -> Result<Execution, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(Execution::Auto),
        Ok(v) if v.trim().is_empty() => Ok(Execution::Auto),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|cap| Execution::from_thread_cap(Some(cap)))
            .map_err(|_| {
                Failure::Usage(format!("{THREADS_VAR}=`{v}` is not a non-negative integer"))
            }),
    }
}

struct Prepared {
    schema: Schema,
    raw: fairfit::RawDataset,
    spec: FairnessSpec,
    family: Family,
    options: FitOptions,
}

fn prepare(args: &ModelArgs, r: f64, exec: Execution) -> Result<Prepared, Failure> {
    if args.w.is_some() && !matches!(args.definition, DefinitionArg::Convex) {
        return Err(Failure::Usage(format!(
            "--w is only accepted with --definition convex, not {}",
            args.definition.label()
        )));
    }
    let definition = parse_definition(args.definition.label(), args.w).context("--definition")?;
    let spec = FairnessSpec {
        definition,
        r,
        distance: match args.distance {
            DistanceArg::Absolute => Distance::Absolute,
            DistanceArg::Squared => Distance::Squared,
        },
    };
    let schema = Schema::from_path(&args.schema)
        .context(format!("--schema {}", args.schema.display()))?;
    let raw = load_csv(&args.data, &schema).context(format!("--data {}", args.data.display()))?;
    if raw.dropped_rows > 0 {
        eprintln!(
            "note: dropped {} rows with missing values in schema columns",
            raw.dropped_rows
        );
    }
    let mut options = FitOptions::with_lambda2(args.lambda2);
    options.individual.execution = exec;
    Ok(Prepared {
        schema,
        raw,
        spec,
        family: args.family.into(),
        options,
    })
}

fn run_fit(args: &FitArgs, exec: Execution) -> Result<(), Failure> {
    let p = prepare(&args.model, args.r, exec)?;
    let mm = encode(&p.raw, &p.schema).context(format!("--data {}", args.model.data.display()))?;
    let model = fit_fgrrm_with(&mm, &p.spec, p.family, &p.options)
        .context(format!("fit at --r {}", args.r))?;
    model.save(&args.out).context("--out")?;
    let lambda = if model.lambda_r.is_finite() {
        model.lambda_r.to_string()
    } else {
        "inf".into()
    };
    println!(
        "r={} lambda={} achieved={} n={}",
        args.r,
        lambda,
        model.achieved,
        mm.n()
    );
    Ok(())
}

fn run_predict(args: &PredictArgs) -> Result<(), Failure> {
    let model =
        FittedModel::load(&args.model).context(format!("--model {}", args.model.display()))?;
    let data_ctx = format!("--data {}", args.data.display());
    let raw = load_csv_columns(&args.data, &model.encoder.feature_columns()).context(&data_ctx)?;
    let pred = predict(&model, &raw).context(&data_ctx)?;
    let mut text = String::with_capacity(24 * pred.len() + 16);
    text.push_str("prediction\n");
    for v in pred.iter() {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    write_text(&args.out, &text)?;
    println!("{} predictions written", pred.len());
    Ok(())
}

fn run_profile(args: &ProfileArgs, exec: Execution) -> Result<(), Failure> {
    let p = prepare(&args.model, 0.0, exec)?;
    let grid = args.r_grid.clone().map_or_else(|| DEFAULT_R_GRID.to_vec(), |v| v.0);
    let sweep = profile_sweep(&p.raw, &p.schema, &grid, &p.spec, p.family, &p.options, exec)
        .context("profile")?;
    for (r, point) in sweep.r_grid.iter().zip(&sweep.points) {
        if let Err(e) = point {
            eprintln!("warning: fit at --r-grid value {r} failed: {e}");
        }
    }
    sweep.write_csv_path(&args.out).context("--out")?;
    println!("{} bounds written", sweep.points.len());
    Ok(())
}

fn run_cv(args: &CvArgs, exec: Execution) -> Result<(), Failure> {
    let p = prepare(&args.model, 0.0, exec)?;
    let config = CvConfig {
        folds: args.folds,
        runs: args.runs,
        seed: args.seed,
        r_grid: args.r_grid.clone().map_or_else(|| DEFAULT_R_GRID.to_vec(), |v| v.0),
        family: p.family,
        spec: p.spec,
        fit: p.options,
        execution: exec,
    };
    let report = kfold_cv(&p.raw, &p.schema, &config).context("cv")?;
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} cells failed", report.cells.len());
    }
    report.write_csv_path(&args.out).context("--out")?;
    if let Some(path) = &args.json {
        write_text(path, &report.to_json().context("--json")?)?;
    }
    for agg in &report.aggregates {
        match &agg.valid_metric {
            Some(m) => println!("r={} valid_{}={}", agg.r, report.metric, m.mean),
            None => println!("r={} all cells failed", agg.r),
        }
    }
    Ok(())
}

fn run_bias(args: &BiasArgs, exec: Execution) -> Result<(), Failure> {
    let raw = synth_example(1, args.n, args.seed).context("--n")?;
    let mm = encode(&raw, &example_schema()).context("synthetic data")?;
    let opts = BiasOptions {
        folds: args.folds,
        seed: args.seed,
        execution: exec,
        ..BiasOptions::default()
    };
    let curve = bias_ratio_curve(&mm, &args.r_list.0, &args.lambda_grid.0, &opts).context("bias-demo")?;
    curve.write_csv_path(&args.out).context("--out")?;
    let (lo, hi) = curve.cv_lambda_range;
    println!("cv band: lambda in [{lo}, {hi}]");
    for &r in &curve.r_list {
        let inside: Vec<f64> = curve
            .cells
            .iter()
            .filter(|c| c.r == r && c.in_cv_band)
            .map(|c| c.relative_difference())
            .collect();
        if inside.is_empty() {
            println!("r={r}: no grid point inside the band");
        } else {
            let mean = inside.iter().sum::<f64>() / inside.len() as f64;
            println!("r={r}: mean relative difference {:.4}", mean);
        }
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), Failure> {
    let raw = synth_example(args.example, args.n, args.seed).context("--n")?;
    raw.write_csv_path(&args.out).context("--out")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|source| Failure::Core {
        context: "--out".into(),
        error: Error::Io {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let exec = execution()?;
    match &cli.command {
        Command::Fit(a) => run_fit(a, exec),
        Command::Predict(a) => run_predict(a),
        Command::Profile(a) => run_profile(a, exec),
        Command::Cv(a) => run_cv(a, exec),
        Command::BiasDemo(a) => run_bias(a, exec),
        Command::Synth(a) => run_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
