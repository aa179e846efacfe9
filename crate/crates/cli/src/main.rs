use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtdr::io::{self, LoocvReport, RawSubject, ReferenceChoice};
use mtdr::simulation::{
    self, mortality_like, run_replications_with, MortalitySpec, NoiseSpec, ReplicationOptions,
    ScenarioSpec,
};
use mtdr::{fit, Domain, FitConfig, ProbGrid, QuantileGrid, SimplexWeights};

#[derive(Parser)]
#[command(
    name = "mtdr",
    version,
    about = "Multi-transport distributional regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo replications of a simulation scenario.
    Simulate(SimulateArgs),
    /// Write one simulated data set as long-format samples.
    Generate(GenerateArgs),
    /// Fit a model to long-format samples.
    Fit(FitArgs),
    /// Predict response quantiles for new subjects.
    Predict(PredictArgs),
    /// Score a fitted model on data with responses.
    Evaluate(EvaluateArgs),
    /// Leave-one-out cross-validation.
    Loocv(LoocvArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Single,
    Multi,
    Mortality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Rmse,
    Awd,
}

#[derive(Args)]
struct NoiseArgs {
    /// Perturbation indices K, symmetric about zero (e.g. -3,3).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    noise_support: Option<Vec<i32>>,
    /// Turn the perturbation off (K = 0).
    #[arg(long, conflicts_with = "noise_support")]
    no_noise: bool,
}

impl NoiseArgs {
    fn resolve(&self, default: NoiseSpec) -> Result<NoiseSpec> {
        Ok(match (&self.noise_support, self.no_noise) {
            (_, true) => NoiseSpec::off(),
            (Some(k), _) => NoiseSpec::new(k.clone(), false)?,
            (None, false) => default,
        })
    }
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum, default_value = "single")]
    scenario: Scenario,
    /// True weights: α₁ for `single`, α₀,α₁,α₂ for `multi`.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    t: usize,
    /// Use exact quantiles instead of empirical ones.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    noise: NoiseArgs,
}

impl ScenarioArgs {
    fn spec(&self, reps: usize) -> Result<ScenarioSpec> {
        let mut spec = match self.scenario {
            Scenario::Single => {
                let a = match self.alpha.as_deref() {
                    None => 0.5,
                    Some([a]) => *a,
                    Some(_) => bail!("--alpha takes one value for the single scenario"),
                };
                ScenarioSpec::single(a, self.n, self.m)?
            }
            Scenario::Multi => {
                let a = match self.alpha.as_deref() {
                    None => [0.3, 0.35, 0.35],
                    Some(&[a0, a1, a2]) => [a0, a1, a2],
                    Some(_) => bail!("--alpha takes three values for the multi scenario"),
                };
                ScenarioSpec::multi(a, self.n, self.m)?
            }
            Scenario::Mortality => bail!("the mortality design has no replication study"),
        };
        spec.reps = reps;
        spec.seed = self.seed;
        spec.t = self.t;
        spec.exact = self.exact;
        spec.noise = self.noise.resolve(spec.noise.clone())?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    /// Also fit the single-map transport model and report its RMSE.
    #[arg(long)]
    with_ot: bool,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Output directory for summary.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Training samples.
    #[arg(long)]
    out: PathBuf,
    /// Test samples (single and multi scenarios).
    #[arg(long)]
    test_out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Number of predictors.
    #[arg(long)]
    p: usize,
    /// Support interval as `s0,s1`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,1"
    )]
    domain: Vec<f64>,
    /// `uniform`, `frechet`, or a CSV file with a `value` column.
    #[arg(long, default_value = "uniform")]
    reference: String,
    #[arg(long, default_value_t = 1000)]
    t: usize,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn domain(&self) -> Result<Domain> {
        match self.domain.as_slice() {
            &[s0, s1] => Ok(Domain::new(s0, s1)?),
            _ => bail!("--domain expects two values s0,s1"),
        }
    }

    fn config(&self) -> FitConfig {
        FitConfig {
            t: self.t,
            max_outer_iter: self.max_iter,
            rel_tol: self.rel_tol,
            seed: self.seed,
            ..FitConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Keep the weights fixed, e.g. `0,1` for the single-map transport model.
    #[arg(long, value_delimiter = ',')]
    fixed_weights: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "rmse")]
    metric: Metric,
    /// Also write the result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LoocvArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = args.scenario.spec(args.reps)?;
    let cfg = FitConfig {
        t: spec.t,
        max_outer_iter: args.max_iter,
        seed: spec.seed,
        ..FitConfig::default()
    };
    let opts = ReplicationOptions {
        with_ot: args.with_ot,
    };
    let summary = run_replications_with(&spec, &cfg, opts)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("summary.csv"), summary.to_csv())?;
    write_json(&args.out.join("summary.json"), &summary)?;
    print!("{}", summary.to_csv());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let s = &args.scenario;
    let (train, test): (Vec<RawSubject>, Vec<RawSubject>) = match s.scenario {
        Scenario::Mortality => {
            let spec = MortalitySpec {
                n: s.n,
                m: s.m,
                t: s.t,
                seed: s.seed,
                noise: s.noise.resolve(MortalitySpec::default().noise)?,
                ..MortalitySpec::default()
            };
            (mortality_like(&spec)?.1, Vec::new())
        }
        _ => {
            let mut spec = s.spec(1)?;
            spec.exact = false;
            let data = simulation::generate_replication(&spec, 0)?;
            (data.raw_train, data.raw_test)
        }
    };
    io::write_samples_file(&args.out, &train)?;
    if let Some(path) = &args.test_out {
        if test.is_empty() {
            bail!("this scenario has no test split");
        }
        io::write_samples_file(path, &test)?;
    }
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let m = &args.model;
    let domain = m.domain()?;
    let grid = ProbGrid::new(m.t)?;
    let data = io::ingest(&args.data, domain, grid, m.p)?;
    let reference = ReferenceChoice::parse(&m.reference)?.resolve(&data)?;
    let fixed = args
        .fixed_weights
        .as_ref()
        .map(|w| SimplexWeights::new(w.clone()))
        .transpose()?;
    let (model, report) = fit(&data, m.p, &reference, &m.config(), fixed.as_ref())?;
    io::save_model(&args.out, &model, Some(&report))?;
    Ok(())
}

fn load_for_model(
    model: &mtdr::MtdrModel,
    path: &Path,
    require_response: bool,
) -> Result<mtdr::DataSet> {
    let d = model.domain();
    let g = model.prob_grid();
    let data = if require_response {
        io::ingest(path, d, g, model.p())?
    } else {
        io::ingest_predictors(path, d, g, model.p())?
    };
    Ok(data)
}

fn predict(args: &PredictArgs) -> Result<()> {
    let (model, _) = io::load_model(&args.model)?;
    let data = load_for_model(&model, &args.data, false)?;
    let preds = model.predict_all(&data)?;
    let ids: Vec<String> = data.subjects().iter().map(|s| s.id.clone()).collect();
    let f =
        fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    io::write_predictions(std::io::BufWriter::new(f), &ids, &preds)?;
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (model, _) = io::load_model(&args.model)?;
    let data = load_for_model(&model, &args.data, true)?;
    let preds = model.predict_all(&data)?;
    let actual: Vec<QuantileGrid> = data.responses()?.into_iter().cloned().collect();
    let (name, value) = match args.metric {
        Metric::Rmse => ("rmse", simulation::rmse(&preds, &actual)?),
        Metric::Awd => ("awd", simulation::awd(&preds, &actual)?),
    };
    println!("{value:?}");
    if let Some(path) = &args.out {
        write_json(
            path,
            &serde_json::json!({ "metric": name, "value": value, "n": data.len() }),
        )?;
    }
    Ok(())
}

fn loocv(args: &LoocvArgs) -> Result<()> {
    let m = &args.model;
    let domain = m.domain()?;
    let data = io::ingest(&args.data, domain, ProbGrid::new(m.t)?, m.p)?;
    let reference = ReferenceChoice::parse(&m.reference)?;
    let report: LoocvReport = io::loocv(&data, m.p, &reference, &m.config())?;
    write_json(&args.out, &report)?;
    println!("{:?}", report.awd);
    Ok(())
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MTDR_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("MTDR_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<()> {
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Generate(a) => generate(a),
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Loocv(a) => loocv(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
