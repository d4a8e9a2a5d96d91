use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sparse_rasch::design::{diagnose, sample_design, sample_outcomes, DesignDiagnostics};
use sparse_rasch::estimation::{fit_mle, fit_regularized, Existence, SolverConfig};
use sparse_rasch::experiments::{
    draw_truth, qq_export, run_coverage_experiment, run_error_experiment, standard_pairs, write_coverage_csv,
    write_error_csv, write_qq_csv, AlphaDist, BetaDist, ExperimentGrid, Manifest, PairSpec, COVERAGE_HEADER,
    ERROR_HEADER, QQ_HEADER,
};
use sparse_rasch::inference::{fisher_summary, wald_test, WaldReport};
use sparse_rasch::io::{default_ids, ingest, write_mapping, write_responses, write_truth, IdMaps, Role};
use sparse_rasch::model::Identification;
use sparse_rasch::rng::{stream_seed, Stream};

mod report;

const EXIT_ERROR: u8 = 1;
const EXIT_SEPARATION: u8 = 2;
const EXIT_DISCONNECTED: u8 = 3;
const THREADS_VAR: &str = "SPARSE_RASCH_THREADS";

#[derive(Parser)]
#[command(name = "sparse-rasch", version, about = "Rasch model fitting for sparse response data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit abilities and difficulties and report standard errors.
    Fit(FitArgs),
    /// Print connectivity, degree and separation diagnostics as JSON.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic response file and its true parameters.
    Simulate(SimulateArgs),
    /// Run a simulation study from a JSON grid.
    Experiment(ExperimentArgs),
    /// Test whether several abilities (or difficulties) are equal.
    Wald(WaldArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IdentArg {
    Anchor,
    Zerosum,
}

impl From<IdentArg> for Identification {
    fn from(a: IdentArg) -> Self {
        match a {
            IdentArg::Anchor => Identification::AnchorFirst,
            IdentArg::Zerosum => Identification::ZeroSum,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Gradient sup-norm at which the fit stops.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    data: PathBuf,
    #[arg(long, value_enum, default_value = "anchor")]
    identification: IdentArg,
    /// Fit the ridge-penalised likelihood with this weight.
    #[arg(long)]
    ridge: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// `.json` or `.csv`; JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    data: PathBuf,
    /// Sampling probability used to evaluate the degree-concentration event.
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    alpha_uniform: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["MEAN", "SD"], allow_negative_numbers = true)]
    beta_normal: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Error,
    Coverage,
    Qq,
}

impl ExperimentKind {
    fn name(self) -> &'static str {
        match self {
            ExperimentKind::Error => "error",
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Qq => "qq",
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    kind: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Individual,
    Item,
}

#[derive(Args)]
struct WaldArgs {
    data: PathBuf,
    #[arg(long, value_enum)]
    side: SideArg,
    /// One-based positions within the side, as listed in the mapping file.
    #[arg(long, value_delimiter = ',', required = true)]
    indices: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Experiment configuration: a grid plus the pairs and level used by the
/// coverage and QQ studies.
#[derive(Debug, Deserialize)]
struct ExperimentConfig {
    #[serde(flatten)]
    grid: ExperimentGrid,
    #[serde(default)]
    pairs: Option<Vec<PairSpec>>,
    #[serde(default)]
    level: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Diagnose(a) => diagnose_cmd(a).map(|_| 0),
        Command::Simulate(a) => simulate(a).map(|_| 0),
        Command::Experiment(a) => experiment(a).map(|_| 0),
        Command::Wald(a) => wald(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    if n == 0 {
        bail!("{THREADS_VAR} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn solver_config(args: &SolverArgs, identification: Identification) -> Result<SolverConfig> {
    let config = SolverConfig {
        tolerance: args.tol,
        max_iterations: args.max_iter,
        ..SolverConfig::with_identification(identification)
    };
    config.validate()?;
    Ok(config)
}

fn exit_code(existence: Existence) -> u8 {
    match existence {
        Existence::Exists => 0,
        Existence::DivergedSeparation => EXIT_SEPARATION,
        Existence::DisconnectedDesign => EXIT_DISCONNECTED,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn load(path: &Path) -> Result<sparse_rasch::io::Ingested> {
    ingest(path).with_context(|| format!("reading {}", path.display()))
}

fn fit(args: FitArgs) -> Result<u8> {
    if !(args.level > 0.0 && args.level < 1.0) {
        bail!("--level must lie strictly between 0 and 1");
    }
    let data = load(&args.data)?;
    let config = solver_config(&args.solver, args.identification.into())?;
    let result = match args.ridge {
        Some(lambda) => fit_regularized(&data.design, &data.outcomes, Some(lambda), &config)?,
        None => fit_mle(&data.design, &data.outcomes, &config)?,
    };
    let tolerance = config.tolerance_for(&data.design);
    let report = report::build(&data.design, &data.ids, &result, args.ridge, args.level, tolerance)?;

    let mapping_path = sibling(args.out.as_deref().unwrap_or(&args.data), "mapping.csv");
    let mut mapping = create(&mapping_path)?;
    write_mapping(&mut mapping, &data.ids)?;
    mapping.flush()?;

    match &args.out {
        Some(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let mut w = create(path)?;
            report::write_csv(&mut w, &report)?;
            w.flush()?;
        }
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
        }
    }
    if result.existence != Existence::Exists {
        eprintln!("maximum likelihood estimate does not exist: {:?}", result.existence);
    }
    Ok(exit_code(result.existence))
}

#[derive(Serialize)]
struct NodeRef {
    role: Role,
    id: String,
    index: usize,
}

#[derive(Serialize)]
struct DiagnoseOutput {
    schema: &'static str,
    #[serde(flatten)]
    diagnostics: DesignDiagnostics,
    separated: Vec<NodeRef>,
}

fn node_ref(ids: &IdMaps, r: usize, k: usize) -> NodeRef {
    if k < r {
        NodeRef {
            role: Role::Individual,
            id: ids.individuals[k].clone(),
            index: k + 1,
        }
    } else {
        NodeRef {
            role: Role::Item,
            id: ids.items[k - r].clone(),
            index: k - r + 1,
        }
    }
}

fn diagnose_cmd(args: DiagnoseArgs) -> Result<()> {
    if let Some(p) = args.p {
        if !(p > 0.0 && p <= 1.0) {
            bail!("--p must lie in (0, 1]");
        }
    }
    let data = load(&args.data)?;
    let diagnostics = diagnose(&data.design, Some(&data.outcomes), args.p);
    let r = data.design.r();
    let separated = diagnostics
        .separated_nodes
        .iter()
        .flatten()
        .map(|&k| node_ref(&data.ids, r, k))
        .collect();
    let out = DiagnoseOutput {
        schema: report::SCHEMA_VERSION,
        diagnostics,
        separated,
    };
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &out)?;
    writeln!(stdout)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.r == 0 || args.t == 0 {
        bail!("--r and --t must be positive");
    }
    let alpha = match args.alpha_uniform.as_deref() {
        Some(&[lo, hi]) if lo <= hi => AlphaDist::Uniform { lo, hi },
        Some(_) => bail!("--alpha-uniform needs LO <= HI"),
        None => AlphaDist::default(),
    };
    let beta = match args.beta_normal.as_deref() {
        Some(&[mean, sd]) => BetaDist::Normal { mean, sd },
        _ => BetaDist::default(),
    };
    let truth = draw_truth(args.r, args.t, alpha, beta, stream_seed(args.seed, Stream::Truth))?;
    let design = sample_design(args.r, args.t, args.p, stream_seed(args.seed, Stream::Design))?;
    let outcomes = sample_outcomes(&design, &truth, stream_seed(args.seed, Stream::Outcomes))?;
    let ids = default_ids(args.r, args.t);

    let mut w = create(&args.out)?;
    write_responses(&mut w, &design, &outcomes, Some(&ids))?;
    w.flush()?;
    let mut w = create(&sibling(&args.out, "truth.csv"))?;
    write_truth(&mut w, &truth, &ids)?;
    w.flush()?;
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    config.grid.validate()?;
    let pairs = config.pairs.clone().unwrap_or_else(standard_pairs);
    let level = config.level.unwrap_or(0.95);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let name = args.kind.name();
    let csv_name = format!("{name}.csv");
    let mut w = create(&args.out.join(&csv_name))?;
    let mut manifest = match args.kind {
        ExperimentKind::Error => {
            write_error_csv(&mut w, &run_error_experiment(&config.grid)?)?;
            Manifest::new(name, &config.grid, &csv_name, &ERROR_HEADER)
        }
        ExperimentKind::Coverage => {
            write_coverage_csv(&mut w, &run_coverage_experiment(&config.grid, &pairs, level)?)?;
            let mut m = Manifest::new(name, &config.grid, &csv_name, &COVERAGE_HEADER);
            m.level = Some(level);
            m
        }
        ExperimentKind::Qq => {
            write_qq_csv(&mut w, &qq_export(&config.grid, &pairs)?)?;
            Manifest::new(name, &config.grid, &csv_name, &QQ_HEADER)
        }
    };
    w.flush()?;
    if !matches!(args.kind, ExperimentKind::Error) {
        manifest.pairs = pairs;
    }
    let mut m = create(&args.out.join(format!("{name}.manifest.json")))?;
    serde_json::to_writer_pretty(&mut m, &manifest)?;
    writeln!(m)?;
    m.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct WaldOutput {
    schema: &'static str,
    side: Role,
    ids: Vec<String>,
    #[serde(flatten)]
    report: WaldReport,
}

fn wald(args: WaldArgs) -> Result<u8> {
    let data = load(&args.data)?;
    let r = data.design.r();
    let (names, offset, role) = match args.side {
        SideArg::Individual => (&data.ids.individuals, 0, Role::Individual),
        SideArg::Item => (&data.ids.items, r, Role::Item),
    };
    let mut nodes = Vec::with_capacity(args.indices.len());
    for &k in &args.indices {
        if k == 0 || k > names.len() {
            bail!("index {k} is outside 1..={} for this side", names.len());
        }
        if offset + k - 1 == 0 {
            bail!("individual 1 is the anchor of the identification and cannot be tested");
        }
        nodes.push(offset + k - 1);
    }
    let config = solver_config(&args.solver, Identification::AnchorFirst)?;
    let fit = fit_mle(&data.design, &data.outcomes, &config)?;
    if fit.existence != Existence::Exists {
        eprintln!("maximum likelihood estimate does not exist: {:?}", fit.existence);
        return Ok(exit_code(fit.existence));
    }
    let fs = fisher_summary(&data.design, &fit.theta_hat)?;
    let mut report = wald_test(&fs, &fit.theta_hat, &nodes)?;
    report.parameter_indices = args.indices.clone();
    let out = WaldOutput {
        schema: report::SCHEMA_VERSION,
        side: role,
        ids: args.indices.iter().map(|&k| names[k - 1].clone()).collect(),
        report,
    };
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &out)?;
    writeln!(stdout)?;
    Ok(0)
}
