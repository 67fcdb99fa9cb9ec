//! The acceptance suite.
//!
//! Nine criteria, each an exact oracle or a directional property with a
//! wall-clock limit. A criterion passes when its property holds and it
//! finishes inside its limit.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::{Duration, Instant};

use discomp_core::compose::{compose, ComposeConfig, LogProbVector};
use discomp_core::eval::{run_error_eval, run_negation_eval, run_ood_eval, EvalSettings, FitSettings, Prompting};
use discomp_core::rng::seeded;
use discomp_core::vq::{
    decode, encode, learn_codebook, palette_codebook, quantize_patch, render_tokens, squared_distance, Codebook,
    ImageBuffer, PatchShape, TokenGrid,
};
use discomp_core::world::{fit_count_model, fit_count_model_with_policy, FactorizedWorldSpec, LabelPolicy, SceneWorldSpec};
use discomp_core::{
    count_evaluations, enumerate_posterior, Composer, ConditionSpec, ConditionalModel, CountingModel, ExactModel,
    MaskedState, SamplerSchedule, Token, WeightVector, WorldJoint, WorldSpec,
};
use rand::Rng;

use crate::commands::{run, Command, Context};
use crate::config::RunConfig;
use crate::report::strip_timing_jsonl;

/// Outcome of a criterion's check, before timing is applied.
type Check = Result<(bool, String), String>;

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub limit: Duration,
    pub check: fn() -> Check,
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub property_holds: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        self.property_holds && self.elapsed <= self.limit
    }

    /// One summary line, `PASS` or `FAIL` first.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let over = if self.elapsed > self.limit { " over time" } else { "" };
        format!(
            "{verdict} {}. {}: {} [{:.2} s of {} s{over}]",
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        )
    }
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, secs, check| Criterion { id, name, limit: Duration::from_secs(secs), check };
    vec![
        c(1, "PoE exactness", 10, poe_exactness as fn() -> Check),
        c(2, "shift invariance", 1, shift_invariance),
        c(3, "sampler fidelity", 60, sampler_fidelity),
        c(4, "composition beats joint prompt", 300, composition_beats_joint_prompt),
        c(5, "out-of-distribution composition", 300, ood_composition),
        c(6, "negation", 120, negation),
        c(7, "evaluation-count law", 1, evaluation_count_law),
        c(8, "VQ codec", 30, vq_codec),
        c(9, "determinism", 120, determinism),
    ]
}

pub fn run_criterion(c: &Criterion) -> CriterionResult {
    let start = Instant::now();
    let outcome = (c.check)();
    let elapsed = start.elapsed();
    let (property_holds, detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult { id: c.id, name: c.name, property_holds, detail, elapsed, limit: c.limit }
}

/// Runs every criterion in order, calling `each` as results come in.
pub fn run_all(mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    criteria()
        .iter()
        .map(|c| {
            let r = run_criterion(c);
            each(&r);
            r
        })
        .collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// 3x3 factorized world with K = 5 and skewed tables on two corner cells.
fn factorized_world() -> Result<(WorldJoint, Vec<ConditionSpec>), String> {
    let mut spec = FactorizedWorldSpec::object_presence(3, 3, 5, 0.4);
    spec.prior[4] = vec![0.1, 0.3, 0.2, 0.2, 0.2];
    spec.prior[8] = vec![0.5, 0.05, 0.05, 0.2, 0.2];
    spec.conditions[0].cells[0].1 = vec![0.0, 0.1, 0.2, 0.3, 0.4];
    spec.conditions[8].cells[0].1 = vec![0.0, 0.7, 0.1, 0.1, 0.1];
    let conds = vec![spec.conditions[0].spec.clone(), spec.conditions[8].spec.clone()];
    Ok((WorldJoint::build(WorldSpec::Factorized(spec)).map_err(err)?, conds))
}

fn poe_exactness() -> Check {
    let (world, conds) = factorized_world()?;
    let model = ExactModel::new(&world);
    let state = MaskedState::fully_masked(world.len());
    let u = model.predict(&state, None).map_err(err)?;
    let cs: Vec<Vec<LogProbVector>> = conds.iter().map(|c| model.predict(&state, Some(c))).collect::<Result<_, _>>().map_err(err)?;
    let truth = enumerate_posterior(&world, &conds).map_err(err)?.marginals();
    let mut worst = 0.0f64;
    for p in 0..world.len() {
        let per: Vec<&LogProbVector> = cs.iter().map(|c| &c[p]).collect();
        let got = compose(&u[p], &per, &WeightVector::ones(conds.len()), &ComposeConfig::default()).map_err(err)?.probs();
        for (a, b) in got.iter().zip(&truth[p]) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst < 1e-10, format!("L = 9, K = 5, max deviation {worst:.2e} (tolerance 1e-10)")))
}

fn shift_invariance() -> Check {
    let mut rng = seeded(2024, 0);
    let cfg = ComposeConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=16);
        let n = rng.gen_range(0..=3);
        let mut draw = || (0..k).map(|_| rng.gen_range(1e-3f64..1.0).ln()).collect::<Vec<f64>>();
        let u = draw();
        let cs: Vec<Vec<f64>> = (0..n).map(|_| draw()).collect();
        let w = WeightVector::new((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).map_err(err)?;
        let base = compose(&u, &cs, &w, &cfg).map_err(err)?;
        let shift = |v: &[f64], s: f64| v.iter().map(|x| x + s).collect::<Vec<f64>>();
        let su = shift(&u, rng.gen_range(-50.0..50.0));
        let scs: Vec<Vec<f64>> = cs.iter().map(|c| shift(c, rng.gen_range(-50.0..50.0))).collect();
        let shifted = compose(&su, &scs, &w, &cfg).map_err(err)?;
        for (a, b) in base.as_slice().iter().zip(shifted.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok((worst < 1e-12, format!("1000 trials, max change {worst:.2e} (tolerance 1e-12)")))
}

/// TV between the sampled grid frequencies and the enumerated posterior.
fn sequence_tv(world: &WorldJoint, cond: &ConditionSpec, sched: SamplerSchedule, n: u64) -> Result<f64, String> {
    let model = ExactModel::new(world);
    let conds = [cond.clone()];
    let w = WeightVector::ones(1);
    let composer = Composer::new(&model, &conds, &w, sched).map_err(err)?;
    let mut counts: HashMap<Vec<Token>, u64> = HashMap::new();
    for s in 0..n {
        let (grid, _) = composer.run_stream(MaskedState::fully_masked(world.len()), s).map_err(err)?;
        *counts.entry(grid).or_default() += 1;
    }
    let post = enumerate_posterior(world, &conds).map_err(err)?;
    let mut tv = 0.0;
    for &(code, p) in post.entries() {
        tv += (counts.remove(&post.decode(code)).unwrap_or(0) as f64 / n as f64 - p).abs();
    }
    tv += counts.values().map(|&c| c as f64 / n as f64).sum::<f64>();
    Ok(tv / 2.0)
}

fn sampler_fidelity() -> Check {
    // 2x2 cells, one shape, two colors: K = 3, L = 4
    let world = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(2, 2, 1, 2, 2))).map_err(err)?;
    let n = 100_000;
    let masked = sequence_tv(&world, &ConditionSpec::at(1, 0), SamplerSchedule::masked(1, 17).with_temperature(1.0), n)?;
    let ar = sequence_tv(&world, &ConditionSpec::at(0, 1), SamplerSchedule::autoregressive(23).with_temperature(1.0), n)?;
    Ok((masked <= 0.03 && ar <= 0.03, format!("TV masked {masked:.4}, autoregressive {ar:.4} (limit 0.03, 1e5 samples)")))
}

fn scene_3x3(max_objects: usize) -> SceneWorldSpec {
    SceneWorldSpec::positional(3, 3, 2, 2, max_objects)
}

fn composition_beats_joint_prompt() -> Check {
    let world = WorldJoint::build(WorldSpec::Scene(scene_3x3(3))).map_err(err)?;
    let model = fit_count_model_with_policy(&world, 200_000, 0.1, 0.1, 41, LabelPolicy::Single).map_err(err)?;
    let settings = EvalSettings::new(10_000, SamplerSchedule::masked(1, 43));
    let c = run_error_eval(&model, &world, 2, &settings, Prompting::Composed).map_err(err)?;
    let b = run_error_eval(&model, &world, 2, &settings, Prompting::JointPrompt).map_err(err)?;
    let ok = c.error_rate + c.two_sigma < b.error_rate - b.two_sigma;
    Ok((
        ok,
        format!(
            "2 conditions, 1e4 samples: composed error {:.4} ± {:.4}, joint prompt {:.4} ± {:.4}",
            c.error_rate, c.two_sigma, b.error_rate, b.two_sigma
        ),
    ))
}

fn ood_composition() -> Check {
    let fit = FitSettings { n_samples: 200_000, rng_seed: 51, ..FitSettings::default() };
    let settings = EvalSettings::new(2000, SamplerSchedule::masked(1, 53));
    let r = run_ood_eval(&scene_3x3(3), 2, 3, &fit, &settings, 100).map_err(err)?;
    let (c, b) = (&r.composed, &r.baseline);
    let gap = c.satisfaction_rate() - b.satisfaction_rate();
    let ok = gap >= c.two_sigma + b.two_sigma && r.distinct_outputs >= 10;
    Ok((
        ok,
        format!(
            "train <= 2 objects, 3 conditions: satisfaction composed {:.4} ± {:.4}, baseline {:.4} ± {:.4}; {} distinct of {}",
            c.satisfaction_rate(),
            c.two_sigma,
            b.satisfaction_rate(),
            b.two_sigma,
            r.distinct_outputs,
            r.diversity_runs
        ),
    ))
}

fn negation() -> Check {
    let world = WorldJoint::build(WorldSpec::Factorized(FactorizedWorldSpec::object_presence(3, 3, 5, 0.5))).map_err(err)?;
    let model = fit_count_model(&world, 200_000, 0.1, 0.1, 61).map_err(err)?;
    let r = run_negation_eval(&model, &world, &ConditionSpec::at(1, 1), 4000, SamplerSchedule::masked(1, 63)).map_err(err)?;
    let sweep: Vec<String> = r.sweep.iter().map(|p| format!("{}:{:.3}", p.weight, p.satisfaction_rate)).collect();
    let ok = r.has_headroom() && r.halved() && r.monotone_within_noise();
    Ok((
        ok,
        format!(
            "base {:.4}, at w = -1 {:.4}; sweep {}; {} drop(s)",
            r.base_rate,
            r.negated_rate,
            sweep.join(" "),
            r.monotonicity_violations().len()
        ),
    ))
}

/// Uniform predictions over `k` tokens, whatever the condition.
struct Uniform(usize);

impl ConditionalModel for Uniform {
    fn vocab_size(&self) -> usize {
        self.0
    }

    fn predict(&self, state: &MaskedState, _: Option<&ConditionSpec>) -> discomp_core::Result<Vec<LogProbVector>> {
        state.masked_positions().map(|_| LogProbVector::uniform(self.0)).collect()
    }
}

fn evaluation_count_law() -> Check {
    let model = CountingModel::new(Uniform(4));
    let mut cases = 0;
    let mut bad = Vec::new();
    for len in [1usize, 4, 9, 16, 25] {
        for n in 0..=3usize {
            let conds: Vec<ConditionSpec> = (0..n).map(|i| ConditionSpec::at(i as u8, 0)).collect();
            let w = WeightVector::ones(n);
            let mut scheds: Vec<(SamplerSchedule, usize)> = [1usize, 2, 3, 4, 9, 30]
                .iter()
                .map(|&s| (SamplerSchedule::masked(s, 7), s))
                .collect();
            scheds.push((SamplerSchedule::autoregressive(7), 1));
            for (sched, s) in scheds {
                model.reset();
                let composer = Composer::new(&model, &conds, &w, sched).map_err(err)?;
                let (_, stats) = composer.run_stream(MaskedState::fully_masked(len), 0).map_err(err)?;
                let expected = len.div_ceil(s) * (n + 1);
                cases += 1;
                if model.calls() != expected || stats.evaluations != expected || count_evaluations(&sched, len, n) != expected {
                    bad.push(format!("L {len} s {s} n {n}: {} calls, expected {expected}", model.calls()));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok((true, format!("{cases} (L, s, n) cases, all exact")))
    } else {
        Ok((false, bad.join("; ")))
    }
}

fn scan(z: &[f64], cb: &Codebook) -> usize {
    let d: Vec<f64> = cb.entries().map(|e| squared_distance(z, e)).collect();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    d.iter().position(|&x| x == min).expect("non-empty codebook")
}

fn random_codebook<R: Rng>(rng: &mut R, shape: PatchShape, k: usize) -> Result<Codebook, String> {
    Codebook::new(shape, (0..k).map(|_| (0..shape.dim()).map(|_| rng.gen::<f64>()).collect()).collect()).map_err(err)
}

fn vq_codec() -> Check {
    let mut rng = seeded(808, 0);
    let shape = PatchShape::new(4, 4, 3).map_err(err)?;
    let cb = random_codebook(&mut rng, shape, 64)?;
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let z: Vec<f64> = (0..shape.dim()).map(|_| rng.gen::<f64>()).collect();
        if quantize_patch(&z, &cb).map_err(err)? != scan(&z, &cb) {
            mismatches += 1;
        }
    }

    // random entries in [0, 1] are distinct with probability one
    let mut fixed_point_failures = 0;
    let mut idempotence_failures = 0;
    for _ in 0..200 {
        let small = PatchShape::new(2, 2, 3).map_err(err)?;
        let cb = random_codebook(&mut rng, small, 8)?;
        let tokens: Vec<Token> = (0..12).map(|_| rng.gen_range(0..8)).collect();
        let grid = TokenGrid::new(3, 4, tokens).map_err(err)?;
        let img = decode(&grid, &cb).map_err(err)?;
        if encode(&img, &cb).map_err(err)? != grid {
            fixed_point_failures += 1;
        }
        let px: Vec<f64> = (0..6 * 8 * 3).map(|_| rng.gen::<f64>()).collect();
        let img = ImageBuffer::new(6, 8, 3, px).map_err(err)?;
        let once = decode(&encode(&img, &cb).map_err(err)?, &cb).map_err(err)?;
        let twice = decode(&encode(&once, &cb).map_err(err)?, &cb).map_err(err)?;
        let bits = |im: &ImageBuffer| im.pixels().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(&once) != bits(&twice) {
            idempotence_failures += 1;
        }
    }

    let world = WorldJoint::build(WorldSpec::Scene(scene_3x3(3))).map_err(err)?;
    let palette = palette_codebook(world.layout(), 4, 4).map_err(err)?;
    let mut patches = Vec::new();
    for _ in 0..40 {
        let grid = world.sample_prior(&mut rng);
        let mut img = render_tokens(&grid, world.layout(), &palette).map_err(err)?;
        for px in img.pixels_mut() {
            *px = (*px + rng.gen_range(-0.04..0.04)).clamp(0.0, 1.0);
        }
        patches.extend(img.patches(palette.shape()).map_err(err)?);
    }
    let mut increases = 0;
    for (k, seed) in [(3, 1), (5, 2), (8, 3), (16, 4)] {
        let fit = learn_codebook(&patches, palette.shape(), k, 30, seed).map_err(err)?;
        increases += fit.history.windows(2).filter(|w| w[1] > w[0]).count();
    }
    let ok = mismatches == 0 && fixed_point_failures == 0 && idempotence_failures == 0 && increases == 0;
    Ok((
        ok,
        format!(
            "scan mismatches {mismatches}/10000, fixed-point failures {fixed_point_failures}/200, idempotence failures {idempotence_failures}/200, k-means increases {increases}"
        ),
    ))
}

/// Small configuration touching every command.
pub const DETERMINISM_CONFIG: &str = r#"
seed = 11

[model]
n_samples = 20000

[[conditions]]
spec = "object_at_cell(0,0)"

[[conditions]]
spec = "object_at_cell(2,2)"

[codebook]
k = 8
iters = 10
n_images = 16

[sample]
n = 6
render = true

[eval]
n_samples = 200
components = [1, 2]

[bench]
batch_sizes = [1, 5]
"#;

/// Runs every command once into `dir`.
pub fn run_every_command(config: &RunConfig, dir: &Path) -> Result<(), String> {
    let ctx = Context::new(config.clone(), dir);
    let model = ctx.resolve(&config.paths.model);
    for cmd in [
        Command::BuildWorld,
        Command::FitModel,
        Command::LearnCodebook,
        Command::Sample,
        Command::Eval { suite: None },
        Command::Bench,
        Command::Inspect { path: model },
    ] {
        let out = run(&cmd, &ctx).map_err(|e| format!("{}: {e}", cmd.name()))?;
        if !out.failures.is_empty() {
            return Err(format!("{}: {}", cmd.name(), out.failures.join("; ")));
        }
    }
    Ok(())
}

/// File name to contents, with timing keys removed from reports.
pub fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let entry = entry.map_err(err)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let bytes = std::fs::read(entry.path()).map_err(err)?;
        let bytes = if name.ends_with(".jsonl") {
            strip_timing_jsonl(&String::from_utf8(bytes).map_err(err)?).map_err(err)?.into_bytes()
        } else {
            bytes
        };
        out.insert(name, bytes);
    }
    Ok(out)
}

fn determinism() -> Check {
    let config = RunConfig::from_toml(DETERMINISM_CONFIG).map_err(err)?;
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    run_every_command(&config, a.path())?;
    run_every_command(&config, b.path())?;
    let (sa, sb) = (snapshot(a.path())?, snapshot(b.path())?);
    if sa.keys().ne(sb.keys()) {
        return Ok((false, format!("file sets differ: {:?} vs {:?}", sa.keys(), sb.keys())));
    }
    let differing: Vec<&String> = sa.iter().filter(|(k, v)| sb[*k] != **v).map(|(k, _)| k).collect();
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("7 commands, {} output files identical across two runs", sa.len())
        } else {
            format!("differing files: {differing:?}")
        },
    ))
}
