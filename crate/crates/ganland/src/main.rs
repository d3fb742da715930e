use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ganland::checkpoint::load_mlp;
use ganland::config::{ratio_grid, ExperimentConfig};
use ganland::error::{CliError, Result};
use ganland::{io, pipeline};
use ganland_core::bounds::{
    partition_boundary_lower, phi_inv_lower_crudeman, phi_inv_upper, phi_inv_upper_q, thm2_bound,
    thm2_bound_lambert, thm3_asymptotic, thm3_bound, thm3_bound_general, BoundInputs, PartitionWeights,
};
use ganland_core::jfn::{JbtConfig, JfnMethod, DEFAULT_PROBES, DEFAULT_SIGMA};
use ganland_core::metrics::{default_k_rule, marginal_precision_curve, pr_convergence_experiment, OverlapFamily};
use ganland_core::{GaussianMixtureSpec, Origin, SampleSet};
use serde_json::{json, Value};

/// Train small WGAN-GP models on Gaussian mixtures, truncate their samples
/// by Jacobian norm and evaluate precision/recall and theoretical bounds.
#[derive(Parser)]
#[command(name = "ganland", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator (writes model.json and trace.csv); --full runs the whole pipeline.
    Train(TrainArgs),
    /// Draw generator samples (--model) or real mixture samples (--modes/--distance).
    Sample(SampleArgs),
    /// Jacobian-based truncation of fresh generator samples.
    Jbt(JbtArgs),
    /// Improved precision/recall plus Hausdorff and Fréchet distances between two CSVs.
    Metrics(MetricsArgs),
    /// Marginal precision by JFN rank.
    Marginal(MarginalArgs),
    /// Precision over a grid of mode counts and distances.
    Heatmap(HeatmapArgs),
    /// Theoretical precision bounds.
    Bounds {
        #[command(subcommand)]
        bound: BoundCommand,
    },
    /// Convergence of improved precision on 1-D uniform pairs.
    PrConvergence(ConvergenceArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML (or .json) experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generator steps (overrides the config).
    #[arg(long)]
    steps: Option<usize>,
    /// Also sample, truncate, evaluate and write bounds and a manifest.
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, conflicts_with_all = ["modes", "distance", "std"])]
    model: Option<PathBuf>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    distance: Option<f64>,
    #[arg(long)]
    std: Option<f64>,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Stochastic,
}

#[derive(Args)]
struct JfnArgs {
    #[arg(long, value_enum, default_value_t = Method::Stochastic)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_PROBES)]
    probes: usize,
}

impl JfnArgs {
    fn method(&self) -> JfnMethod {
        match self.method {
            Method::Exact => JfnMethod::Exact,
            Method::Stochastic => JfnMethod::Stochastic { sigma: self.sigma, probes: self.probes },
        }
    }
}

#[derive(Args)]
struct JbtArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    #[arg(long, default_value_t = 0.7)]
    keep_ratio: f64,
    #[command(flatten)]
    jfn: JfnArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    fake: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MarginalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    real: PathBuf,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    buckets: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[command(flatten)]
    jfn: JfnArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "m-list", value_delimiter = ',', default_value = "4,9,25")]
    m_list: Vec<usize>,
    #[arg(long = "d-list", value_delimiter = ',', default_value = "9,18,27")]
    d_list: Vec<f64>,
    /// Base seeds; each cell is trained once per seed.
    #[arg(long, value_delimiter = ',', default_value = "42")]
    seeds: Vec<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundCommand {
    /// Two equally weighted modes (and the Lambert-W approximation).
    Thm2 {
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
    },
    /// Equally weighted modes, partial recall beta_bar.
    Thm3(Thm3Args),
    /// Large-M form of the multi-mode bound.
    Asymptotic(Thm3Args),
    /// Unequal cell measures; uncovered mass is 1 − Σ weights.
    General {
        #[command(flatten)]
        base: Thm3Args,
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
    },
    /// Lower bound on the measure of the shrunk partition boundary.
    Partition {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',', conflicts_with = "k")]
        weights: Option<Vec<f64>>,
        /// Equal weights 1/K.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Bracket of the Gaussian quantile at 1 − 1/K.
    Crude {
        #[arg(long)]
        k: f64,
    },
    /// Multi-mode bound over a grid; CSV `M,D,bound`.
    Heatmap {
        #[arg(long = "m-list", value_delimiter = ',', default_value = "4,9,25")]
        m_list: Vec<usize>,
        #[arg(long = "d-list", value_delimiter = ',', default_value = "9,18,27")]
        d_list: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_bar: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Thm3Args {
    #[arg(long)]
    d: f64,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    beta_bar: f64,
}

impl Thm3Args {
    fn inputs(&self) -> Result<BoundInputs> {
        Ok(BoundInputs::new(self.d, self.l, self.m, self.beta_bar)?)
    }

    fn json(&self) -> Value {
        json!({ "D": self.d, "L": self.l, "M": self.m, "beta_bar": self.beta_bar, "epsilon": self.d / (2.0 * self.l) })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Identical,
    HalfOverlap,
    Disjoint,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, value_enum, default_value_t = Family::HalfOverlap)]
    family: Family,
    #[arg(long = "n-list", value_delimiter = ',', default_value = "100,1000,10000")]
    n_list: Vec<usize>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(s) = a.steps {
        config.train.steps = s;
    }
    if let Some(o) = a.out {
        config.output_dir = o;
    }
    let dir = config.output_dir.clone();
    let log = |r: &ganland_core::train::TraceRow| {
        eprintln!(
            "step {:>7}  disc {:>10.4}  gen {:>10.4}  precision {:.3}  recall {:.3}",
            r.step, r.disc_loss, r.gen_loss, r.precision, r.recall
        )
    };
    if a.full {
        let s = pipeline::run_pipeline(&config, &dir, log)?;
        print_json(&json!({
            "output_dir": dir,
            "precision": s.untruncated.precision,
            "recall": s.untruncated.recall,
            "jbt_precision": s.truncated.precision,
            "jbt_recall": s.truncated.recall,
            "lipschitz_upper": s.outcome.lipschitz_upper,
        }));
    } else {
        let cfg = config.resolve()?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let out = pipeline::run_train(&cfg.mixture, &cfg.train, &dir, log)?;
        print_json(&json!({ "output_dir": dir, "lipschitz_upper": out.lipschitz_upper }));
    }
    Ok(())
}

fn sample_cmd(a: SampleArgs) -> Result<()> {
    let points = match (&a.model, a.modes, a.distance) {
        (Some(model), _, _) => {
            let (gen, _) = load_mlp(model)?;
            let latents = pipeline::eval_latents(gen.input_dim(), a.n, a.seed)?;
            pipeline::generate(&gen, &latents)?.points
        }
        (None, Some(m), Some(d)) => {
            let spec = GaussianMixtureSpec::grid(m, d, a.std)?;
            pipeline::eval_real(&spec, a.n, a.seed)?.points
        }
        _ => return Err(CliError::Config("give either --model or both --modes and --distance".into())),
    };
    io::write_samples(&a.out, &points)
}

fn jbt_cmd(a: JbtArgs) -> Result<()> {
    let (gen, _) = load_mlp(&a.model)?;
    let cfg = JbtConfig { keep_ratio: a.keep_ratio, method: a.jfn.method(), seed: a.seed };
    let r = pipeline::jbt_on_fresh_latents(&gen, a.n, &cfg, a.seed)?;
    io::write_jbt(&a.out, &r)?;
    eprintln!("kept {} of {}", r.kept.len(), a.n);
    Ok(())
}

fn read_set(path: &Path, origin: Origin) -> Result<SampleSet> {
    Ok(SampleSet::new(io::read_samples(path)?, origin, 0)?)
}

fn metrics_cmd(a: MetricsArgs) -> Result<()> {
    let real = read_set(&a.real, Origin::Real)?;
    let fake = read_set(&a.fake, Origin::Generated)?;
    let (_, report) = pipeline::metrics_report(&fake, &real, a.k)?;
    let v = Value::Object(report);
    match a.out {
        Some(p) => io::write_json(&p, &v),
        None => {
            print_json(&v);
            Ok(())
        }
    }
}

fn marginal_cmd(a: MarginalArgs) -> Result<()> {
    let (gen, _) = load_mlp(&a.model)?;
    let real = read_set(&a.real, Origin::Real)?;
    let latents = pipeline::eval_latents(gen.input_dim(), a.n, a.seed)?;
    let curve = marginal_precision_curve(&gen, &real, &latents, &ratio_grid(a.buckets), a.k, a.jfn.method(), a.seed)?;
    io::write_curve(&a.out, &curve)?;
    if let Some(p) = a.svg {
        io::write_atomic(&p, pipeline::marginal_svg(&curve).as_bytes())?;
    }
    Ok(())
}

fn heatmap_cmd(a: HeatmapArgs) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.steps {
        config.train.steps = s;
    }
    let dir = a.out.unwrap_or_else(|| config.output_dir.clone());
    let base = config.resolve()?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let runs = pipeline::run_heatmap(&base, &a.m_list, &a.d_list, &a.seeds, pipeline::thread_cap())?;
    let cells = pipeline::summarize_heatmap(&runs, &a.m_list, &a.d_list)?;
    pipeline::write_heatmap(&dir, &runs, &cells, &a.m_list, &a.d_list)?;
    for c in &cells {
        eprintln!("M {:>3}  D {:>6}  precision {:.3}  bound {:.3}", c.m, c.d, c.precision, c.bound);
    }
    Ok(())
}

fn bound_json(kind: &str, inputs: Value, raw: f64, clamped: f64) -> Value {
    json!({ "bound": kind, "inputs": inputs, "raw": raw, "clamped": clamped })
}

fn bounds_cmd(b: BoundCommand) -> Result<()> {
    let v = match b {
        BoundCommand::Thm2 { d, l } => {
            let mut v = bound_json("two_mode", json!({ "D": d, "L": l, "epsilon": d / (2.0 * l) }), thm2_bound(d, l)?, thm2_bound(d, l)?);
            v["lambert_approximation"] = json!(thm2_bound_lambert(d, l)?);
            v
        }
        BoundCommand::Thm3(t) => {
            let r = thm3_bound(&t.inputs()?)?;
            bound_json("multi_mode", t.json(), r.raw, r.clamped)
        }
        BoundCommand::Asymptotic(t) => {
            let r = thm3_asymptotic(&t.inputs()?);
            bound_json("asymptotic", t.json(), r, r.clamp(0.0, 1.0))
        }
        BoundCommand::General { base, weights } => {
            let w = PartitionWeights::new(weights.clone())?;
            let r = thm3_bound_general(&base.inputs()?, &w)?;
            let mut inputs = base.json();
            inputs["weights"] = json!(weights);
            bound_json("general", inputs, r.raw, r.clamped)
        }
        BoundCommand::Partition { epsilon, weights, k } => {
            let w = match (weights, k) {
                (Some(w), _) => PartitionWeights::new(w)?,
                (None, Some(k)) => PartitionWeights::equal(k)?,
                (None, None) => return Err(CliError::Config("give --weights or --k".into())),
            };
            let r = partition_boundary_lower(epsilon, &w)?;
            bound_json("partition_boundary_lower", json!({ "epsilon": epsilon, "weights": w.weights() }), r.raw, r.clamped)
        }
        BoundCommand::Crude { k } => json!({
            "inputs": { "K": k },
            "lower": phi_inv_lower_crudeman(k)?,
            "phi_inv": phi_inv_upper(1.0 / k)?,
            "upper": phi_inv_upper_q(k),
        }),
        BoundCommand::Heatmap { m_list, d_list, l, beta_bar, out } => {
            let mut rows = Vec::new();
            for &m in &m_list {
                for &d in &d_list {
                    let r = thm3_bound(&BoundInputs::new(d, l, m, beta_bar)?)?;
                    rows.push(vec![m.to_string(), io::fmt_f64(d), io::fmt_f64(r.clamped)]);
                }
            }
            return match out {
                Some(p) => io::write_table(&p, &["M", "D", "bound"], rows),
                None => {
                    println!("M,D,bound");
                    for r in rows {
                        println!("{}", r.join(","));
                    }
                    Ok(())
                }
            };
        }
    };
    print_json(&v);
    Ok(())
}

fn convergence_cmd(a: ConvergenceArgs) -> Result<()> {
    let family = match a.family {
        Family::Identical => OverlapFamily::Identical,
        Family::HalfOverlap => OverlapFamily::HalfOverlap,
        Family::Disjoint => OverlapFamily::Disjoint,
    };
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let rows = pr_convergence_experiment(family, &a.n_list, &seeds, default_k_rule)?;
    match a.out {
        Some(p) => io::write_convergence(&p, &rows),
        None => {
            println!("n,k,seeds,mean_precision,mean_recall,target,abs_error");
            for r in rows {
                println!("{},{},{},{},{},{},{}", r.n, r.k, r.seeds, r.mean_precision, r.mean_recall, r.target, r.abs_error);
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Jbt(a) => jbt_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Marginal(a) => marginal_cmd(a),
        Command::Heatmap(a) => heatmap_cmd(a),
        Command::Bounds { bound } => bounds_cmd(bound),
        Command::PrConvergence(a) => convergence_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
