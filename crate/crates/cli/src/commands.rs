//! Command implementations.
//!
//! Each command reads the run configuration, writes its artifacts and a
//! `<command>.jsonl` report under the output directory, and returns a table
//! for standard output. Input artifacts are only ever read.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use discomp_core::eval::{draw_condition_set, run_error_eval, run_negation_eval, EvalSettings};
use discomp_core::rng::seeded;
use discomp_core::vq::{self, learn_codebook, palette_codebook, render_tokens, Codebook, ImageBuffer};
use discomp_core::world::{fit_count_model_with_policy, WorldKind};
use discomp_core::{
    count_evaluations, Composer, ConditionSpec, ConditionalModel, CountModel, CountingModel, ExactModel, MaskedState,
    WorldJoint,
};
use rand::Rng;
use serde_json::json;
use thiserror::Error;

use crate::artifact::{self, Artifact};
use crate::config::{ConfigError, ModelKind, RunConfig};
use crate::container::{Container, ContainerError};
use crate::ppm::Rgb8;
use crate::report::{Report, Table};
use crate::suite;

/// Largest per-condition TV between a fitted factorized model and the
/// world's exact conditionals that still counts as converged.
pub const CONVERGENCE_TV: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    BuildWorld,
    FitModel,
    LearnCodebook,
    Sample,
    Eval { suite: Option<String> },
    Bench,
    Inspect { path: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BuildWorld => "build-world",
            Self::FitModel => "fit-model",
            Self::LearnCodebook => "learn-codebook",
            Self::Sample => "sample",
            Self::Eval { .. } => "eval",
            Self::Bench => "bench",
            Self::Inspect { .. } => "inspect",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Artifact { path: PathBuf, source: ContainerError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Sampling(_) => 3,
            _ => 2,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Errors raised while sampling under a condition set.
fn sampling_error(e: discomp_core::Error, conds: &[ConditionSpec]) -> CliError {
    use discomp_core::Error as E;
    match e {
        E::AllMassZero | E::EmptyIntersection => CliError::Sampling(format!("{e} (conditions: {})", list(conds))),
        other => CliError::Invalid(other.to_string()),
    }
}

fn list(conds: &[ConditionSpec]) -> String {
    let v: Vec<String> = conds.iter().map(ToString::to_string).collect();
    format!("[{}]", v.join(", "))
}

#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self { config, out_dir: out_dir.into() }
    }

    /// Relative paths resolve against the output directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn config_text(&self) -> String {
        self.config.to_toml()
    }
}

/// What a finished command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub report: Report,
    pub table: String,
    pub report_path: Option<PathBuf>,
    /// Asserted properties that did not hold.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            4
        }
    }
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Outcome, CliError> {
    ctx.config.validate()?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| CliError::io(&ctx.out_dir, e))?;
    let mut out = match cmd {
        Command::BuildWorld => build_world(ctx)?,
        Command::FitModel => fit_model(ctx)?,
        Command::LearnCodebook => learn(ctx)?,
        Command::Sample => sample(ctx)?,
        Command::Eval { suite: Some(name) } => run_suite(ctx, name)?,
        Command::Eval { suite: None } => eval(ctx)?,
        Command::Bench => bench(ctx)?,
        Command::Inspect { path } => inspect(ctx, path)?,
    };
    let path = ctx.out_dir.join(format!("{}.jsonl", cmd.name()));
    out.report.write(&path).map_err(|e| CliError::io(&path, e))?;
    out.report_path = Some(path);
    Ok(out)
}

fn build(ctx: &Context) -> Result<WorldJoint, CliError> {
    WorldJoint::build(ctx.config.world_spec()).map_err(|e| ConfigError { field: "world".into(), msg: e.to_string() }.into())
}

fn save(art: &Artifact, path: &Path, config: &str) -> Result<(), CliError> {
    art.save(path, config).map_err(|source| CliError::Artifact { path: path.to_path_buf(), source })
}

fn load(path: &Path) -> Result<Artifact, CliError> {
    if !path.exists() {
        return Err(CliError::Invalid(format!("missing artifact {}", path.display())));
    }
    Artifact::load(path).map(|a| a.0).map_err(|source| CliError::Artifact { path: path.to_path_buf(), source })
}

fn build_world(ctx: &Context) -> Result<Outcome, CliError> {
    let world = build(ctx)?;
    let text = ctx.config_text();
    let path = ctx.resolve(&ctx.config.paths.world);
    save(&Artifact::World { spec: world.spec().clone() }, &path, &text)?;
    let mut report = Report::new("build-world", &text);
    let support = world.support().map(|s| s.count());
    report.push(json!({
        "record": "world",
        "kind": format!("{:?}", world.kind()).to_lowercase(),
        "cells": world.len(),
        "vocab": world.vocab(),
        "states": world.state_count().to_string(),
        "support": support,
        "path": ctx.config.paths.world,
    }));
    let mut t = Table::new(["kind", "cells", "vocab", "states", "support"]);
    t.row([
        format!("{:?}", world.kind()),
        world.len().to_string(),
        world.vocab().to_string(),
        world.state_count().to_string(),
        support.map_or("-".into(), |s| s.to_string()),
    ]);
    Ok(Outcome { report, table: t.render(), ..Outcome::default() })
}

/// Largest TV between the fully masked predictions of `model` and the exact
/// conditionals, over every evaluation condition. The unconditional
/// prediction is left out: training labels are drawn per condition, so it
/// learns their mixture rather than the prior.
pub fn max_conditional_tv<M: ConditionalModel + ?Sized>(model: &M, world: &WorldJoint) -> Result<f64, CliError> {
    let state = MaskedState::fully_masked(world.len());
    let mut worst = 0.0f64;
    for c in world.eval_vocabulary() {
        let truth = world.condition_posterior(std::slice::from_ref(&c)).map_err(|e| CliError::Invalid(e.to_string()))?.marginals();
        let pred = model.predict(&state, Some(&c)).map_err(|e| CliError::Invalid(e.to_string()))?;
        for (d, t) in pred.iter().zip(&truth) {
            let tv = d.probs().iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            worst = worst.max(tv);
        }
    }
    Ok(worst)
}

fn fit_model(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let world = build(ctx)?;
    let text = ctx.config_text();
    let path = ctx.resolve(&cfg.paths.model);
    let mut report = Report::new("fit-model", &text);
    let mut failures = Vec::new();
    let mut t = Table::new(["model", "contexts", "labels", "max_conditional_tv"]);
    match cfg.model.kind {
        ModelKind::Exact => {
            save(&Artifact::ExactModel { world: world.spec().clone() }, &path, &text)?;
            report.push(json!({ "record": "fit", "model": "exact", "path": cfg.paths.model }));
            t.row(["exact", "-", "-", "0"]);
        }
        ModelKind::Count => {
            let start = Instant::now();
            let model = fit_count_model_with_policy(
                &world,
                cfg.model.n_samples,
                cfg.model.dropout_prob,
                cfg.model.alpha,
                cfg.seed,
                cfg.label_policy(),
            )
            .map_err(|e| CliError::Invalid(e.to_string()))?;
            let elapsed = start.elapsed().as_secs_f64();
            let tv = max_conditional_tv(&model, &world)?;
            let converged = world.kind() != WorldKind::Factorized || tv <= CONVERGENCE_TV;
            if !converged {
                failures.push(format!("fitted tables are {tv:.4} TV from the exact conditionals (limit {CONVERGENCE_TV})"));
            }
            let contexts = model.counts().count();
            report.push(json!({
                "record": "fit",
                "model": "count",
                "n_samples": cfg.model.n_samples,
                "contexts": contexts,
                "labels": model.labels().len(),
                "max_conditional_tv": tv,
                "converged": converged,
                "path": cfg.paths.model,
                "wall_time_s": elapsed,
            }));
            t.row(["count".to_string(), contexts.to_string(), model.labels().len().to_string(), format!("{tv:.4}")]);
            save(&Artifact::CountModel { world: world.spec().clone(), model }, &path, &text)?;
        }
    }
    Ok(Outcome { report, table: t.render(), failures, ..Outcome::default() })
}

/// Rendered prior grids with uniform pixel noise, as codebook training data.
fn training_images(world: &WorldJoint, palette: &Codebook, n: usize, noise: f64, seed: u64) -> Result<Vec<ImageBuffer>, CliError> {
    let mut rng = seeded(seed, 1);
    (0..n)
        .map(|_| {
            let grid = world.sample_prior(&mut rng);
            let mut img = render_tokens(&grid, world.layout(), palette).map_err(|e| CliError::Invalid(e.to_string()))?;
            if noise > 0.0 {
                for px in img.pixels_mut() {
                    *px = (*px + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0);
                }
            }
            Ok(img)
        })
        .collect()
}

fn learn(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let cb = &cfg.codebook;
    let world = build(ctx)?;
    let palette = palette_codebook(world.layout(), cb.patch_h, cb.patch_w).map_err(|e| CliError::Invalid(e.to_string()))?;
    let shape = palette.shape();
    let images = training_images(&world, &palette, cb.n_images, cb.noise, cfg.seed)?;
    let patches: Vec<Vec<f64>> = images.iter().flat_map(|im| im.patches(shape).expect("whole patches")).collect();
    let start = Instant::now();
    let fit = learn_codebook(&patches, shape, cb.k, cb.iters, cfg.seed).map_err(|e| match e {
        discomp_core::Error::TooFewPatches { .. } => {
            CliError::Config(ConfigError { field: "codebook.k".into(), msg: e.to_string() })
        }
        other => CliError::Invalid(other.to_string()),
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let roundtrip = images
        .iter()
        .map(|im| {
            let back = vq::decode(&vq::encode(im, &fit.codebook).expect("shape"), &fit.codebook).expect("tokens in range");
            vq::mse(im, &back).expect("same shape")
        })
        .sum::<f64>()
        / images.len() as f64;
    let per_pixel = fit.distortion() / shape.dim() as f64;

    let mut failures = Vec::new();
    if !fit.history.windows(2).all(|w| w[1] <= w[0]) {
        failures.push("k-means objective increased between iterations".to_string());
    }
    if roundtrip > per_pixel + 1e-12 {
        failures.push(format!("roundtrip MSE {roundtrip} exceeds per-pixel distortion {per_pixel}"));
    }

    let text = ctx.config_text();
    let path = ctx.resolve(&cfg.paths.codebook);
    save(&Artifact::Codebook { codebook: fit.codebook.clone(), history: fit.history.clone() }, &path, &text)?;
    let mut report = Report::new("learn-codebook", &text);
    report.push(json!({
        "record": "codebook",
        "k": cb.k,
        "patches": patches.len(),
        "iterations": fit.history.len(),
        "history": fit.history,
        "distortion": fit.distortion(),
        "per_pixel_distortion": per_pixel,
        "roundtrip_mse": roundtrip,
        "path": cfg.paths.codebook,
        "wall_time_s": elapsed,
    }));
    let mut t = Table::new(["k", "patches", "iterations", "distortion", "roundtrip_mse"]);
    t.row([
        cb.k.to_string(),
        patches.len().to_string(),
        fit.history.len().to_string(),
        format!("{:.6}", fit.distortion()),
        format!("{roundtrip:.6}"),
    ]);
    Ok(Outcome { report, table: t.render(), failures, ..Outcome::default() })
}

/// A loaded model together with its world.
pub struct LoadedModel {
    pub world: WorldJoint,
    pub count: Option<CountModel>,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let (spec, count) = match load(path)? {
            Artifact::ExactModel { world } => (world, None),
            Artifact::CountModel { world, model } => (world, Some(model)),
            other => return Err(CliError::Invalid(format!("{} holds a {}, not a model", path.display(), other.kind()))),
        };
        let world = WorldJoint::build(spec).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        Ok(Self { world, count })
    }

    pub fn with<R>(&self, f: impl FnOnce(&dyn ConditionalModel) -> R) -> R {
        match &self.count {
            Some(m) => f(m),
            None => f(&ExactModel::new(&self.world)),
        }
    }
}

fn checked_conditions(ctx: &Context, world: &WorldJoint) -> Result<(Vec<ConditionSpec>, discomp_core::WeightVector), CliError> {
    let (conds, w) = ctx.config.conditions();
    for (i, c) in conds.iter().enumerate() {
        world
            .validate_condition(c)
            .map_err(|e| ConfigError { field: format!("conditions[{i}].spec"), msg: e.to_string() })?;
    }
    Ok((conds, w))
}

fn sample(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let loaded = LoadedModel::load(&ctx.resolve(&cfg.paths.model))?;
    let world = &loaded.world;
    let (conds, weights) = checked_conditions(ctx, world)?;
    if !world.is_satisfiable(&conds).map_err(|e| CliError::Invalid(e.to_string()))? {
        return Err(CliError::Sampling(format!("no grid satisfies every condition in {}", list(&conds))));
    }
    let codebook = if cfg.sample.render {
        match load(&ctx.resolve(&cfg.paths.codebook))? {
            Artifact::Codebook { codebook, .. } => Some(codebook),
            other => return Err(CliError::Invalid(format!("{} holds a {}, not a codebook", cfg.paths.codebook, other.kind()))),
        }
    } else {
        None
    };
    let palette = match &codebook {
        Some(cb) => {
            let s = cb.shape();
            if s.channels != 3 {
                return Err(CliError::Invalid(format!("codebook has {} channels, rendering needs 3", s.channels)));
            }
            Some(palette_codebook(world.layout(), s.patch_h, s.patch_w).map_err(|e| CliError::Invalid(e.to_string()))?)
        }
        None => None,
    };

    let text = ctx.config_text();
    let mut report = Report::new("sample", &text);
    let mut t = Table::new(["index", "tokens", "satisfied"]);
    let start = Instant::now();
    let samples = loaded.with(|m| -> Result<Vec<_>, CliError> {
        let composer = Composer::new(m, &conds, &weights, cfg.schedule()).map_err(|e| CliError::Invalid(e.to_string()))?;
        (0..cfg.sample.n as u64)
            .map(|i| composer.run_stream(MaskedState::fully_masked(world.len()), i).map_err(|e| sampling_error(e, &conds)))
            .collect()
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut all_ok = 0usize;
    for (i, (grid, stats)) in samples.iter().enumerate() {
        let sat = discomp_core::check_conditions(grid, &conds, world.layout());
        let ok = sat.iter().all(|&b| b);
        all_ok += ok as usize;
        let mut rec = json!({
            "record": "sample",
            "index": i,
            "tokens": grid,
            "satisfied": sat,
            "steps": stats.steps,
            "evaluations": stats.evaluations,
        });
        if let (Some(cb), Some(pal)) = (&codebook, &palette) {
            let rendered = render_tokens(grid, world.layout(), pal).map_err(|e| CliError::Invalid(e.to_string()))?;
            let vq_tokens = vq::encode(&rendered, cb).map_err(|e| CliError::Invalid(e.to_string()))?;
            let img = vq::decode(&vq_tokens, cb).map_err(|e| CliError::Invalid(e.to_string()))?;
            let name = format!("sample_{i:04}.ppm");
            let path = ctx.out_dir.join(&name);
            let bytes = Rgb8::from_image(&img).map_err(|e| CliError::Invalid(e.to_string()))?.encode();
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            rec["ppm"] = json!(name);
            rec["codebook_tokens"] = json!(vq_tokens.tokens);
            rec["render_mse"] = json!(vq::mse(&rendered, &img).expect("same shape"));
        }
        report.push(rec);
        let tokens: Vec<String> = grid.iter().map(ToString::to_string).collect();
        t.row([i.to_string(), tokens.join(" "), ok.to_string()]);
    }
    let n = samples.len().max(1);
    report.push(json!({
        "record": "summary",
        "n_samples": samples.len(),
        "conditions": conds.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "weights": weights.as_slice(),
        "all_satisfied_rate": all_ok as f64 / n as f64,
        "wall_time_per_sample": elapsed / n as f64,
    }));
    Ok(Outcome { report, table: t.render(), ..Outcome::default() })
}

fn eval(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let loaded = LoadedModel::load(&ctx.resolve(&cfg.paths.model))?;
    let world = &loaded.world;
    let settings = EvalSettings::new(cfg.eval.n_samples, cfg.schedule());
    let text = ctx.config_text();
    let mut report = Report::new("eval", &text);
    let mut failures = Vec::new();
    let mut t = Table::new(["components", "error_rate", "two_sigma", "tv_distance", "evaluations"]);
    for &n in &cfg.eval.components {
        let start = Instant::now();
        let mut r = loaded
            .with(|m| run_error_eval(m, world, n, &settings, cfg.prompting()))
            .map_err(|e| sampling_error(e, &[]))?;
        r.wall_time_per_sample = start.elapsed().as_secs_f64() / r.n_samples as f64;
        report.push(json!({
            "record": "error_eval",
            "n_components": r.n_components,
            "n_samples": r.n_samples,
            "error_rate": r.error_rate,
            "two_sigma": r.two_sigma,
            "tv_distance": r.tv_distance,
            "evaluations_per_sample": r.evaluations_per_sample,
            "wall_time_per_sample": r.wall_time_per_sample,
        }));
        t.row([
            n.to_string(),
            format!("{:.4}", r.error_rate),
            format!("{:.4}", r.two_sigma),
            format!("{:.4}", r.tv_distance),
            r.evaluations_per_sample.to_string(),
        ]);
    }
    let mut table = t.render();
    if let Some(spec) = &cfg.eval.negation {
        let cond: ConditionSpec = spec.parse().expect("validated");
        world
            .validate_condition(&cond)
            .map_err(|e| ConfigError { field: "eval.negation".into(), msg: e.to_string() })?;
        let r = loaded
            .with(|m| run_negation_eval(m, world, &cond, cfg.eval.n_samples, cfg.schedule()))
            .map_err(|e| sampling_error(e, std::slice::from_ref(&cond)))?;
        if !r.has_headroom() {
            failures.push(format!("unconditional rate {:.4} of {cond} leaves no headroom", r.base_rate));
        }
        if !r.halved() {
            failures.push(format!("rate at w = -1 is {:.4}, above half of {:.4}", r.negated_rate, r.base_rate));
        }
        if !r.monotone_within_noise() {
            failures.push("satisfaction is not monotone in the weight".to_string());
        }
        report.push(json!({
            "record": "negation",
            "condition": cond.to_string(),
            "n_samples": r.n_samples,
            "base_rate": r.base_rate,
            "negated_rate": r.negated_rate,
            "sweep": r.sweep.iter().map(|p| json!({ "weight": p.weight, "satisfaction_rate": p.satisfaction_rate, "two_sigma": p.two_sigma })).collect::<Vec<_>>(),
            "halved": r.halved(),
            "monotone_within_noise": r.monotone_within_noise(),
        }));
        let mut nt = Table::new(["weight", "satisfaction", "two_sigma"]);
        for p in &r.sweep {
            nt.row([format!("{}", p.weight), format!("{:.4}", p.satisfaction_rate), format!("{:.4}", p.two_sigma)]);
        }
        table.push('\n');
        table.push_str(&nt.render());
    }
    Ok(Outcome { report, table, failures, ..Outcome::default() })
}

fn bench(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let loaded = LoadedModel::load(&ctx.resolve(&cfg.paths.model))?;
    let world = &loaded.world;
    let len = world.len();
    let vocab = world.eval_vocabulary();
    let text = ctx.config_text();
    let mut report = Report::new("bench", &text);
    let mut failures = Vec::new();
    let mut headers = vec!["tokens_per_step".to_string(), "n".into(), "steps".into(), "evaluations".into(), "expected".into()];
    headers.extend(cfg.bench.batch_sizes.iter().map(|b| format!("s/img@{b}")));
    let mut t = Table::new(headers);
    let mut rng = seeded(cfg.seed, u64::MAX - 2);

    for &n in &cfg.bench.n_conditions {
        let conds = if n == 0 {
            Vec::new()
        } else {
            draw_condition_set(world, &vocab, n, 1000, &mut rng).map_err(|e| match e {
                discomp_core::Error::InvalidParameter(msg) => {
                    CliError::Config(ConfigError { field: "bench.n_conditions".into(), msg })
                }
                other => sampling_error(other, &[]),
            })?
        };
        let weights = discomp_core::WeightVector::ones(n);
        for &tps in &cfg.bench.tokens_per_step {
            let sched = discomp_core::SamplerSchedule { tokens_per_step: tps, ..cfg.schedule() };
            let expected = count_evaluations(&sched, len, n);
            let (per_sample, times, steps) = loaded.with(|m| -> Result<_, CliError> {
                let counting = CountingModel::new(m);
                let composer = Composer::new(&counting, &conds, &weights, sched).map_err(|e| CliError::Invalid(e.to_string()))?;
                let mut per_sample = Vec::new();
                let mut times = Vec::new();
                let mut steps = 0;
                for &b in &cfg.bench.batch_sizes {
                    let start = Instant::now();
                    for s in 0..b as u64 {
                        counting.reset();
                        let (_, stats) = composer
                            .run_stream(MaskedState::fully_masked(len), s)
                            .map_err(|e| sampling_error(e, &conds))?;
                        per_sample.push((counting.calls(), stats.evaluations));
                        steps = stats.steps;
                    }
                    times.push(start.elapsed().as_secs_f64() / b as f64);
                }
                Ok((per_sample, times, steps))
            })?;
            let exact = per_sample.iter().all(|&(calls, stats)| calls == expected && stats == expected);
            if !exact {
                failures.push(format!("tokens_per_step {tps}, {n} conditions: measured evaluations differ from {expected}"));
            }
            let measured = per_sample.first().map_or(0, |p| p.0);
            let timing: serde_json::Map<String, serde_json::Value> =
                cfg.bench.batch_sizes.iter().zip(&times).map(|(b, t)| (b.to_string(), json!(t))).collect();
            report.push(json!({
                "record": "bench",
                "tokens_per_step": tps,
                "n_conditions": n,
                "conditions": conds.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "steps": steps,
                "expected_steps": sched.steps(len),
                "evaluations_per_sample": measured,
                "expected_evaluations": expected,
                "exact": exact,
                "wall_time_per_sample_by_batch": timing,
            }));
            let mut row = vec![tps.to_string(), n.to_string(), steps.to_string(), measured.to_string(), expected.to_string()];
            row.extend(times.iter().map(|t| format!("{t:.2e}")));
            t.row(row);
        }
    }
    Ok(Outcome { report, table: t.render(), failures, ..Outcome::default() })
}

fn inspect(ctx: &Context, path: &Path) -> Result<Outcome, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let c = Container::from_bytes(&bytes).map_err(|source| CliError::Artifact { path: path.to_path_buf(), source })?;
    let (art, _) = Artifact::from_container(&c).map_err(|source| CliError::Artifact { path: path.to_path_buf(), source })?;
    let mut report = Report::new("inspect", &ctx.config_text());
    report.push(json!({
        "record": "inspect",
        "file": path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "kind": art.kind(),
        "bytes": bytes.len(),
        "sections": c.sections.iter().map(|s| json!({ "tag": s.tag_str(), "bytes": s.payload.len() })).collect::<Vec<_>>(),
    }));
    Ok(Outcome { report, table: artifact::dump(&c), ..Outcome::default() })
}

fn run_suite(ctx: &Context, name: &str) -> Result<Outcome, CliError> {
    if name != "acceptance" {
        return Err(CliError::Invalid(format!("unknown suite {name:?}; the only suite is \"acceptance\"")));
    }
    let mut report = Report::new("eval", &ctx.config_text());
    let mut failures = Vec::new();
    let mut lines = String::new();
    for r in suite::run_all(|r| eprintln!("{}", r.line())) {
        if !r.passed() {
            failures.push(format!("criterion {} ({}) failed: {}", r.id, r.name, r.detail));
        }
        report.push(json!({
            "record": "criterion",
            "id": r.id,
            "name": r.name,
            "passed": r.passed(),
            "property_holds": r.property_holds,
            "detail": r.detail,
            "limit_s": r.limit.as_secs_f64(),
            "wall_time_s": r.elapsed.as_secs_f64(),
        }));
        lines.push_str(&r.line());
        lines.push('\n');
    }
    let passed = report.records.len() - 1 - failures.len();
    lines.push_str(&format!("{passed}/{} criteria passed\n", report.records.len() - 1));
    Ok(Outcome { report, table: lines, failures, ..Outcome::default() })
}
