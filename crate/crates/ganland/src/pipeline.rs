//! Experiment orchestration shared by the CLI and the acceptance suite.

use std::path::Path;

use ganland_core::bounds::{thm2_bound, thm3_bound, BoundInputs};
use ganland_core::data::{sample_latent, sample_mixture};
use ganland_core::jfn::{jbt_filter, JbtConfig, JbtResult};
use ganland_core::metrics::{frechet_gaussian, hausdorff, improved_pr, marginal_precision_curve, MarginalCurve, PrReport};
use ganland_core::rng::{derive_seed, domain};
use ganland_core::train::{train_with, TrainConfig, TrainError, TrainOutcome, TraceRow};
use ganland_core::{GaussianMixtureSpec, LatentSpec, Mlp, Origin, SampleSet};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, Resolved};
use crate::error::{CliError, Result};
use crate::io;
use crate::manifest::RunManifest;
use crate::svg;

/// Real evaluation points for a run seed; the training trace uses the same set.
pub fn eval_real(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<SampleSet> {
    Ok(sample_mixture(spec, n, derive_seed(seed, domain::EVAL_REAL))?)
}

/// Evaluation latents for a run seed; the training trace uses the same set.
pub fn eval_latents(dim: usize, n: usize, seed: u64) -> Result<SampleSet> {
    Ok(sample_latent(LatentSpec::new(dim)?, n, derive_seed(seed, domain::EVAL_LATENT))?)
}

pub fn generate(gen: &Mlp, latents: &SampleSet) -> Result<SampleSet> {
    Ok(SampleSet::new(gen.forward(&latents.points)?, Origin::Generated, latents.seed)?)
}

fn mixture_meta(spec: &GaussianMixtureSpec, cfg: &TrainConfig) -> Map<String, Value> {
    let mut meta = Map::new();
    meta.insert("role".into(), json!("generator"));
    meta.insert("modes".into(), json!(spec.modes()));
    meta.insert("distance".into(), json!(spec.min_distance()));
    meta.insert("component_std".into(), json!(spec.component_std()));
    meta.insert("steps".into(), json!(cfg.steps));
    meta.insert("latent_dim".into(), json!(cfg.latent_dim));
    meta
}

/// Trains and writes `model.json`, `discriminator.json`, `trace.csv` and
/// `trace.svg`. On divergence the last good generator goes to
/// `model.last_good.json`.
pub fn run_train(
    spec: &GaussianMixtureSpec,
    cfg: &TrainConfig,
    dir: &Path,
    on_row: impl FnMut(&TraceRow),
) -> Result<TrainOutcome> {
    let meta = mixture_meta(spec, cfg);
    let outcome = match train_with(spec, cfg, on_row) {
        Ok(o) => o,
        Err(TrainError::Invalid(e)) => return Err(CliError::Config(e.to_string())),
        Err(e @ TrainError::Diverged { .. }) => {
            if let TrainError::Diverged { last_good, .. } = &e {
                Checkpoint::from_mlp(last_good, cfg.seed, meta).save(&dir.join("model.last_good.json"))?;
            }
            return Err(CliError::Diverged(e.to_string()));
        }
    };
    let mut gen_meta = meta.clone();
    gen_meta.insert("lipschitz_upper".into(), json!(outcome.lipschitz_upper));
    Checkpoint::from_mlp(&outcome.generator, cfg.seed, gen_meta).save(&dir.join("model.json"))?;
    let mut disc_meta = meta;
    disc_meta.insert("role".into(), json!("discriminator"));
    Checkpoint::from_mlp(&outcome.discriminator, cfg.seed, disc_meta).save(&dir.join("discriminator.json"))?;
    io::write_trace(&dir.join("trace.csv"), &outcome.trace)?;
    io::write_atomic(&dir.join("trace.svg"), trace_svg(&outcome.trace).as_bytes())?;
    Ok(outcome)
}

fn trace_svg(trace: &[TraceRow]) -> String {
    let p = svg::Series { label: "precision", points: trace.iter().map(|r| (r.step as f64, r.precision)).collect() };
    let r = svg::Series { label: "recall", points: trace.iter().map(|r| (r.step as f64, r.recall)).collect() };
    svg::line_plot("Improved precision and recall during training", "generator step", "value", &[p, r], Some((0.0, 1.0)))
}

pub fn marginal_svg(curve: &MarginalCurve) -> String {
    let m = svg::Series {
        label: "marginal",
        points: curve.kept_ratios.iter().copied().zip(curve.marginal_precision.iter().copied()).collect(),
    };
    let c = svg::Series {
        label: "cumulative",
        points: curve.kept_ratios.iter().copied().zip(curve.cumulative_precision.iter().copied()).collect(),
    };
    svg::line_plot("Precision by JFN rank", "kept ratio", "precision", &[m, c], Some((0.0, 1.0)))
}

/// `{precision, recall, k, n_x, n_y}` plus optional extra fields.
pub fn pr_json(r: &PrReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("precision".into(), json!(r.precision));
    m.insert("recall".into(), json!(r.recall));
    m.insert("k".into(), json!(r.k));
    m.insert("n_x".into(), json!(r.n_x));
    m.insert("n_y".into(), json!(r.n_y));
    m
}

/// Precision/recall of `fake` against `real` with both distances.
pub fn metrics_report(fake: &SampleSet, real: &SampleSet, k: usize) -> Result<(PrReport, Map<String, Value>)> {
    let pr = improved_pr(fake, real, k)?;
    let mut m = pr_json(&pr);
    m.insert("hausdorff".into(), json!(hausdorff(fake, real)?));
    m.insert("frechet".into(), json!(frechet_gaussian(fake, real)?));
    Ok((pr, m))
}

/// Upper bound on precision for `m` modes at distance `d` and generator
/// Lipschitz constant `l`, as `{inputs, raw, clamped}`: the two-mode bound
/// for `m = 2`, the multi-mode bound for `m ≥ 3`, nothing for one mode.
pub fn bound_report(m: usize, d: f64, l: f64, beta_bar: f64) -> Result<Option<Value>> {
    let inputs = json!({ "M": m, "D": d, "L": l, "beta_bar": beta_bar, "epsilon": d / (2.0 * l) });
    let (kind, raw, clamped) = match m {
        0 | 1 => return Ok(None),
        2 => {
            let v = thm2_bound(d, l)?;
            ("two_mode", v, v)
        }
        _ => {
            let v = thm3_bound(&BoundInputs::new(d, l, m, beta_bar)?)?;
            ("multi_mode", v.raw, v.clamped)
        }
    };
    Ok(Some(json!({ "bound": kind, "inputs": inputs, "raw": raw, "clamped": clamped })))
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub outcome: TrainOutcome,
    pub untruncated: PrReport,
    pub truncated: PrReport,
    pub jbt: JbtResult,
    pub curve: MarginalCurve,
}

/// Full run: train, sample, JBT, metrics, marginal curve, bounds and a
/// manifest, all under `dir`.
pub fn run_pipeline(config: &ExperimentConfig, dir: &Path, on_row: impl FnMut(&TraceRow)) -> Result<PipelineSummary> {
    let cfg = config.resolve()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut manifest = RunManifest::new(config);
    io::write_atomic(&dir.join("config.toml"), config.to_toml().as_bytes())?;

    let outcome = manifest.time("train", || run_train(&cfg.mixture, &cfg.train, dir, on_row))?;

    let (real, latents, fake) = manifest.time("sample", || -> Result<_> {
        let real = eval_real(&cfg.mixture, cfg.n_eval, cfg.seed)?;
        let latents = eval_latents(cfg.train.latent_dim, cfg.n_eval, cfg.seed)?;
        let fake = generate(&outcome.generator, &latents)?;
        io::write_samples(&dir.join("real.csv"), &real.points)?;
        io::write_samples(&dir.join("fake.csv"), &fake.points)?;
        Ok((real, latents, fake))
    })?;

    let jbt = manifest.time("jbt", || -> Result<_> {
        let r = jbt_filter(&outcome.generator, &latents, &cfg.jbt)?;
        io::write_jbt(&dir.join("jbt.csv"), &r)?;
        Ok(r)
    })?;

    let (untruncated, truncated) = manifest.time("metrics", || -> Result<_> {
        let (u, mut uj) = metrics_report(&fake, &real, cfg.k)?;
        let (t, mut tj) = metrics_report(&jbt.kept, &real, cfg.k)?;
        uj.insert("keep_ratio".into(), json!(1.0));
        tj.insert("keep_ratio".into(), json!(cfg.jbt.keep_ratio));
        io::write_json(&dir.join("metrics.json"), &json!({ "untruncated": uj, "jbt": tj }))?;
        Ok((u, t))
    })?;

    let curve = manifest.time("marginal", || -> Result<_> {
        let c = marginal_precision_curve(
            &outcome.generator,
            &real,
            &latents,
            &cfg.ratio_grid(),
            cfg.k,
            cfg.jbt.method,
            cfg.jbt.seed,
        )?;
        io::write_curve(&dir.join("marginal.csv"), &c)?;
        io::write_atomic(&dir.join("marginal.svg"), marginal_svg(&c).as_bytes())?;
        Ok(c)
    })?;

    manifest.time("bounds", || -> Result<_> {
        let spec = &cfg.mixture;
        if let Some(b) = bound_report(spec.modes(), spec.min_distance(), outcome.lipschitz_upper, 1.0)? {
            io::write_json(&dir.join("bounds.json"), &b)?;
        }
        Ok(())
    })?;

    for name in [
        "config.toml", "model.json", "discriminator.json", "trace.csv", "real.csv", "fake.csv", "jbt.csv",
        "metrics.json", "marginal.csv", "bounds.json",
    ] {
        let p = dir.join(name);
        if p.exists() {
            manifest.add_artifact(&p)?;
        }
    }
    manifest.write(&dir.join("manifest.json"))?;
    Ok(PipelineSummary { outcome, untruncated, truncated, jbt, curve })
}

/// Per-run seed of a heatmap cell: `seed ⊕ hash(M, D)`.
pub fn cell_seed(seed: u64, m: usize, d: f64) -> u64 {
    seed ^ derive_seed(derive_seed(0x4845_4154_4d41_5021, m as u64), d.to_bits())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapRun {
    pub m: usize,
    pub d: f64,
    pub base_seed: u64,
    pub seed: u64,
    /// NaN when the run diverged.
    pub precision: f64,
    pub recall: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub m: usize,
    pub d: f64,
    /// Seed means; NaN if any run of the cell diverged.
    pub precision: f64,
    pub recall: f64,
    pub lipschitz: f64,
    /// Clamped theoretical bound at the mean Lipschitz constant.
    pub bound: f64,
}

/// One heatmap run. The mixture keeps the base config's component std so
/// that `d` changes only the mode separation.
pub fn heatmap_run(base: &Resolved, m: usize, d: f64, base_seed: u64) -> Result<HeatmapRun> {
    let spec = GaussianMixtureSpec::grid(m, d, Some(base.mixture.component_std()))?;
    let seed = cell_seed(base_seed, m, d);
    let cfg = TrainConfig { seed, eval_interval: 0, ..base.train.clone() };
    let mut run = HeatmapRun { m, d, base_seed, seed, precision: f64::NAN, recall: f64::NAN, lipschitz: f64::NAN };
    match ganland_core::train::train(&spec, &cfg) {
        Ok(out) => {
            let real = eval_real(&spec, base.n_eval, seed)?;
            let fake = generate(&out.generator, &eval_latents(cfg.latent_dim, base.n_eval, seed)?)?;
            let pr = improved_pr(&fake, &real, base.k)?;
            run.precision = pr.precision;
            run.recall = pr.recall;
            run.lipschitz = out.lipschitz_upper;
        }
        Err(TrainError::Diverged { .. }) => {}
        Err(TrainError::Invalid(e)) => return Err(CliError::Config(e.to_string())),
    }
    Ok(run)
}

/// Thread cap from `GANLAND_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("GANLAND_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Trains every `(M, D, seed)` combination, in parallel, returning runs in
/// grid order.
pub fn run_heatmap(base: &Resolved, ms: &[usize], ds: &[f64], seeds: &[u64], threads: Option<usize>) -> Result<Vec<HeatmapRun>> {
    if ms.is_empty() || ds.is_empty() || seeds.is_empty() {
        return Err(CliError::Config("heatmap grids and seed list must be nonempty".into()));
    }
    let jobs: Vec<(usize, f64, u64)> =
        ms.iter().flat_map(|&m| ds.iter().flat_map(move |&d| seeds.iter().map(move |&s| (m, d, s)))).collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(m, d, s)| heatmap_run(base, m, d, s)).collect())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn summarize_heatmap(runs: &[HeatmapRun], ms: &[usize], ds: &[f64]) -> Result<Vec<HeatmapCell>> {
    let mut cells = Vec::new();
    for &m in ms {
        for &d in ds {
            let rs: Vec<&HeatmapRun> = runs.iter().filter(|r| r.m == m && r.d == d).collect();
            let lipschitz = mean(rs.iter().map(|r| r.lipschitz));
            let bound = if lipschitz.is_finite() {
                bound_report(m, d, lipschitz, 1.0)?
                    .and_then(|v| v["clamped"].as_f64())
                    .unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            cells.push(HeatmapCell {
                m,
                d,
                precision: mean(rs.iter().map(|r| r.precision)),
                recall: mean(rs.iter().map(|r| r.recall)),
                lipschitz,
                bound,
            });
        }
    }
    Ok(cells)
}

/// Writes `heatmap.csv` (cell means), `heatmap_runs.csv` and `heatmap.svg`.
pub fn write_heatmap(dir: &Path, runs: &[HeatmapRun], cells: &[HeatmapCell], ms: &[usize], ds: &[f64]) -> Result<()> {
    let f = io::fmt_f64;
    io::write_table(
        &dir.join("heatmap.csv"),
        &["M", "D", "precision", "recall", "lipschitz", "bound"],
        cells
            .iter()
            .map(|c| vec![c.m.to_string(), f(c.d), f(c.precision), f(c.recall), f(c.lipschitz), f(c.bound)])
            .collect(),
    )?;
    io::write_table(
        &dir.join("heatmap_runs.csv"),
        &["M", "D", "base_seed", "seed", "precision", "recall", "lipschitz"],
        runs.iter()
            .map(|r| {
                vec![
                    r.m.to_string(),
                    f(r.d),
                    r.base_seed.to_string(),
                    r.seed.to_string(),
                    f(r.precision),
                    f(r.recall),
                    f(r.lipschitz),
                ]
            })
            .collect(),
    )?;
    let grid: Vec<Vec<f64>> = ms
        .iter()
        .map(|&m| ds.iter().map(|&d| cells.iter().find(|c| c.m == m && c.d == d).map_or(f64::NAN, |c| c.precision)).collect())
        .collect();
    let svg = svg::heatmap(
        "Improved precision",
        "modes M",
        &ms.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "mode distance D",
        &ds.iter().map(|d| format!("{d}")).collect::<Vec<_>>(),
        &grid,
    );
    io::write_atomic(&dir.join("heatmap.svg"), svg.as_bytes())
}

/// JBT over fresh evaluation latents for `seed`.
pub fn jbt_on_fresh_latents(gen: &Mlp, n: usize, cfg: &JbtConfig, latent_seed: u64) -> Result<JbtResult> {
    let latents = eval_latents(gen.input_dim(), n, latent_seed)?;
    Ok(jbt_filter(gen, &latents, cfg)?)
}
