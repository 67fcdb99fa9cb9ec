//! Evaluation protocol: error rates of composed generation, a histogram
//! distance standing in for image-quality metrics, out-of-distribution
//! composition and negation sweeps.
//!
//! Wall-clock timing is left to callers with a clock; reports carry a
//! `wall_time_per_sample` slot that stays at zero here.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::compose::WeightVector;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::sampler::{count_evaluations, Composer, ConditionalModel, MaskedState, SamplerSchedule};
use crate::world::{
    fit_count_model_with_policy, ConditionSpec, CountModel, LabelPolicy, SceneWorldSpec, WorldJoint, WorldSpec,
};
use crate::Token;

/// Stream of the schedule seed reserved for drawing condition sets.
const CONDITION_STREAM: u64 = u64::MAX;

/// `2 * sqrt(p (1 - p) / n)`.
pub fn two_sigma(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    2.0 * libm::sqrt(p * (1.0 - p) / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_components: usize,
    pub n_samples: usize,
    pub error_rate: f64,
    pub two_sigma: f64,
    /// Mean per-position TV between the sample histograms and the exact
    /// conditioned marginals.
    pub tv_distance: f64,
    pub evaluations_per_sample: usize,
    pub wall_time_per_sample: f64,
}

impl EvalReport {
    pub fn satisfaction_rate(&self) -> f64 {
        1.0 - self.error_rate
    }
}

/// How a condition set reaches the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prompting {
    /// One query per condition, combined by weighted product of experts.
    Composed,
    /// The whole set as a single opaque condition.
    JointPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub n_samples: usize,
    /// Weight given to every condition.
    pub weight: f64,
    pub schedule: SamplerSchedule,
    /// Attempts at drawing a satisfiable condition set before giving up.
    pub max_retries: usize,
}

impl EvalSettings {
    pub fn new(n_samples: usize, schedule: SamplerSchedule) -> Self {
        Self { n_samples, weight: 1.0, schedule, max_retries: 1000 }
    }
}

/// Mean over positions of the total-variation distance between the token
/// histograms of two sample sets.
pub fn tv_proxy(a: &[Vec<Token>], b: &[Vec<Token>]) -> Result<f64> {
    let (ha, hb) = (histograms(a)?, histograms(b)?);
    if ha.len() != hb.len() {
        return Err(Error::ShapeMismatch(format!("sample lengths {} and {}", ha.len(), hb.len())));
    }
    Ok(mean_tv(&ha, &hb))
}

/// [`tv_proxy`] against exact per-position marginals.
pub fn tv_to_marginals(samples: &[Vec<Token>], marginals: &[Vec<f64>]) -> Result<f64> {
    let h = histograms(samples)?;
    if h.len() != marginals.len() {
        return Err(Error::ShapeMismatch(format!("sample length {} vs {} marginals", h.len(), marginals.len())));
    }
    Ok(mean_tv(&h, marginals))
}

fn histograms(samples: &[Vec<Token>]) -> Result<Vec<Vec<f64>>> {
    let first = samples.first().ok_or_else(|| Error::InvalidParameter("empty sample set".into()))?;
    let len = first.len();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); len];
    let inc = 1.0 / samples.len() as f64;
    for s in samples {
        if s.len() != len {
            return Err(Error::ShapeMismatch(format!("sample of length {} among length {len}", s.len())));
        }
        for (row, &t) in out.iter_mut().zip(s) {
            if row.len() <= t as usize {
                row.resize(t as usize + 1, 0.0);
            }
            row[t as usize] += inc;
        }
    }
    Ok(out)
}

fn mean_tv(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let k = x.len().max(y.len());
            let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(0.0);
            (0..k).map(|i| (get(x, i) - get(y, i)).abs()).sum::<f64>() / 2.0
        })
        .sum();
    total / a.len() as f64
}

/// Draws `n` distinct conditions from `vocabulary` that the world can
/// satisfy together.
pub fn draw_condition_set<R: Rng + ?Sized>(
    world: &WorldJoint,
    vocabulary: &[ConditionSpec],
    n: usize,
    max_retries: usize,
    rng: &mut R,
) -> Result<Vec<ConditionSpec>> {
    if n > vocabulary.len() {
        return Err(Error::InvalidParameter(format!(
            "{n} conditions requested from a vocabulary of {}",
            vocabulary.len()
        )));
    }
    let mut idx: Vec<usize> = (0..vocabulary.len()).collect();
    for _ in 0..max_retries.max(1) {
        for i in 0..n {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        let mut set: Vec<ConditionSpec> = idx[..n].iter().map(|&i| vocabulary[i].clone()).collect();
        set.sort();
        if world.is_satisfiable(&set)? {
            return Ok(set);
        }
    }
    Err(Error::EmptyIntersection)
}

/// Composed samples for one fixed condition set, one stream per sample.
pub fn sample_many<M: ConditionalModel + ?Sized>(
    model: &M,
    conds: &[ConditionSpec],
    weight: f64,
    schedule: SamplerSchedule,
    len: usize,
    streams: core::ops::Range<u64>,
) -> Result<Vec<Vec<Token>>> {
    let w = WeightVector::splat(weight, conds.len())?;
    let composer = Composer::new(model, conds, &w, schedule)?;
    streams.map(|s| composer.run_stream(MaskedState::fully_masked(len), s).map(|r| r.0)).collect()
}

struct Tally {
    errors: usize,
    samples: Vec<Vec<Token>>,
    marginal_sum: Vec<Vec<f64>>,
}

fn error_eval_on<M: ConditionalModel + ?Sized>(
    model: &M,
    world: &WorldJoint,
    vocabulary: &[ConditionSpec],
    n_components: usize,
    settings: &EvalSettings,
    prompting: Prompting,
) -> Result<EvalReport> {
    if settings.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let len = world.len();
    let layout = world.layout();
    let mut cond_rng = seeded(settings.schedule.rng_seed, CONDITION_STREAM);
    let mut marginals_cache: BTreeMap<Vec<ConditionSpec>, Vec<Vec<f64>>> = BTreeMap::new();
    let mut tally = Tally { errors: 0, samples: Vec::with_capacity(settings.n_samples), marginal_sum: vec![vec![0.0; world.vocab()]; len] };

    for i in 0..settings.n_samples {
        let conds = draw_condition_set(world, vocabulary, n_components, settings.max_retries, &mut cond_rng)?;
        let prompt = match prompting {
            Prompting::Composed => conds.clone(),
            Prompting::JointPrompt => vec![ConditionSpec::joint(conds.clone())],
        };
        let grid = sample_many(model, &prompt, settings.weight, settings.schedule, len, i as u64..i as u64 + 1)?
            .pop()
            .expect("one sample");
        if !conds.iter().all(|c| c.holds(&grid, layout)) {
            tally.errors += 1;
        }
        if !marginals_cache.contains_key(&conds) {
            let m = world.condition_posterior(&conds)?.marginals();
            marginals_cache.insert(conds.clone(), m);
        }
        for (acc, m) in tally.marginal_sum.iter_mut().zip(&marginals_cache[&conds]) {
            for (a, p) in acc.iter_mut().zip(m) {
                *a += p;
            }
        }
        tally.samples.push(grid);
    }

    let n = settings.n_samples;
    let reference: Vec<Vec<f64>> = tally
        .marginal_sum
        .iter()
        .map(|row| row.iter().map(|x| x / n as f64).collect())
        .collect();
    let error_rate = tally.errors as f64 / n as f64;
    let queried = match prompting {
        Prompting::Composed => n_components,
        Prompting::JointPrompt => 1,
    };
    Ok(EvalReport {
        n_components,
        n_samples: n,
        error_rate,
        two_sigma: two_sigma(error_rate, n),
        tv_distance: tv_to_marginals(&tally.samples, &reference)?,
        evaluations_per_sample: count_evaluations(&settings.schedule, len, queried),
        wall_time_per_sample: 0.0,
    })
}

/// Error rate of generation under `n_components` conditions drawn per
/// sample from the world's evaluation vocabulary (rejection-sampled to be
/// jointly satisfiable). A sample is an error when any of its conditions
/// fails.
pub fn run_error_eval<M: ConditionalModel + ?Sized>(
    model: &M,
    world: &WorldJoint,
    n_components: usize,
    settings: &EvalSettings,
    prompting: Prompting,
) -> Result<EvalReport> {
    if !(1..=3).contains(&n_components) {
        return Err(Error::InvalidParameter(format!("n_components must be 1, 2 or 3, got {n_components}")));
    }
    error_eval_on(model, world, &world.eval_vocabulary(), n_components, settings, prompting)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub n_samples: usize,
    pub dropout_prob: f64,
    pub alpha: f64,
    pub rng_seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { n_samples: 100_000, dropout_prob: 0.1, alpha: 0.1, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OodReport {
    pub train_max_objects: usize,
    pub test_n_conditions: usize,
    pub composed: EvalReport,
    pub baseline: EvalReport,
    /// Distinct grids over `diversity_runs` composed runs of one condition
    /// set.
    pub distinct_outputs: usize,
    pub diversity_runs: usize,
}

/// Out-of-distribution composition. Both models are fitted on scenes with
/// at most `train_max_objects` objects: the composed one on single-condition
/// labels, the baseline on full-caption labels used as opaque ids. Both are
/// then asked for `test_n_conditions` positional conditions at once.
pub fn run_ood_eval(
    scene: &SceneWorldSpec,
    train_max_objects: usize,
    test_n_conditions: usize,
    fit: &FitSettings,
    settings: &EvalSettings,
    diversity_runs: usize,
) -> Result<OodReport> {
    if test_n_conditions < train_max_objects {
        return Err(Error::InvalidParameter(format!(
            "test_n_conditions ({test_n_conditions}) must not be below train_max_objects ({train_max_objects})"
        )));
    }
    if scene.relational {
        return Err(Error::InvalidParameter("out-of-distribution eval needs a positional world".into()));
    }
    let train = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec {
        min_objects: scene.min_objects.min(train_max_objects),
        max_objects: train_max_objects,
        ..scene.clone()
    }))?;
    let test = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec {
        max_objects: scene.max_objects.max(test_n_conditions),
        ..scene.clone()
    }))?;
    let fit_one = |policy| -> Result<CountModel> {
        fit_count_model_with_policy(&train, fit.n_samples, fit.dropout_prob, fit.alpha, fit.rng_seed, policy)
    };
    let composed_model = fit_one(LabelPolicy::Single)?;
    let baseline_model = fit_one(LabelPolicy::FullCaption)?;

    let vocabulary = test.eval_vocabulary();
    let composed = error_eval_on(&composed_model, &test, &vocabulary, test_n_conditions, settings, Prompting::Composed)?;
    let baseline = error_eval_on(&baseline_model, &test, &vocabulary, test_n_conditions, settings, Prompting::JointPrompt)?;

    let mut rng = seeded(settings.schedule.rng_seed, CONDITION_STREAM - 1);
    let conds = draw_condition_set(&test, &vocabulary, test_n_conditions, settings.max_retries, &mut rng)?;
    let runs = sample_many(&composed_model, &conds, settings.weight, settings.schedule, test.len(), 0..diversity_runs as u64)?;
    let mut distinct = runs.clone();
    distinct.sort();
    distinct.dedup();

    Ok(OodReport {
        train_max_objects,
        test_n_conditions,
        composed,
        baseline,
        distinct_outputs: distinct.len(),
        diversity_runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub weight: f64,
    pub satisfaction_rate: f64,
    pub two_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegationReport {
    pub condition: ConditionSpec,
    pub n_samples: usize,
    /// Satisfaction rate of unconditional generation.
    pub base_rate: f64,
    /// Satisfaction rate at `w = -1`.
    pub negated_rate: f64,
    pub sweep: Vec<SweepPoint>,
}

impl NegationReport {
    /// The base rate leaves room to move in both directions.
    pub fn has_headroom(&self) -> bool {
        self.base_rate > 0.05 && self.base_rate < 0.95
    }

    pub fn halved(&self) -> bool {
        self.negated_rate <= self.base_rate / 2.0
    }

    /// Adjacent sweep pairs where the rate drops, with whether the drop is
    /// within two standard errors of the difference.
    pub fn monotonicity_violations(&self) -> Vec<(usize, bool)> {
        let n = self.n_samples as f64;
        self.sweep
            .windows(2)
            .enumerate()
            .filter(|(_, p)| p[1].satisfaction_rate < p[0].satisfaction_rate)
            .map(|(i, p)| {
                let (a, b) = (p[0].satisfaction_rate, p[1].satisfaction_rate);
                let sd = libm::sqrt((a * (1.0 - a) + b * (1.0 - b)) / n);
                (i, a - b <= 2.0 * sd)
            })
            .collect()
    }

    /// At most one drop along the sweep, and that drop within noise.
    pub fn monotone_within_noise(&self) -> bool {
        let v = self.monotonicity_violations();
        v.len() <= 1 && v.iter().all(|&(_, small)| small)
    }
}

pub const NEGATION_SWEEP: [f64; 5] = [-3.0, -1.0, 0.0, 1.0, 3.0];

/// Satisfaction of `cond` when composed with weights across
/// [`NEGATION_SWEEP`]. Every weight reuses the same sample streams, so the
/// runs are paired. Weight zero is unconditional generation.
pub fn run_negation_eval<M: ConditionalModel + ?Sized>(
    model: &M,
    world: &WorldJoint,
    cond: &ConditionSpec,
    n_samples: usize,
    schedule: SamplerSchedule,
) -> Result<NegationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    world.validate_condition(cond)?;
    let conds = [cond.clone()];
    let mut sweep = Vec::with_capacity(NEGATION_SWEEP.len());
    for &w in &NEGATION_SWEEP {
        let samples = sample_many(model, &conds, w, schedule, world.len(), 0..n_samples as u64)?;
        let hits = samples.iter().filter(|g| cond.holds(g, world.layout())).count();
        let rate = hits as f64 / n_samples as f64;
        sweep.push(SweepPoint { weight: w, satisfaction_rate: rate, two_sigma: two_sigma(rate, n_samples) });
    }
    let rate_at = |w: f64| sweep.iter().find(|p| p.weight == w).expect("sweep weight").satisfaction_rate;
    Ok(NegationReport {
        condition: cond.clone(),
        n_samples,
        base_rate: rate_at(0.0),
        negated_rate: rate_at(-1.0),
        sweep,
    })
}
