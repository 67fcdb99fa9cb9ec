//! Iterative generation under composition.
//!
//! Masked mode starts from an all-MASK grid and, at every step, queries the
//! model once without a condition and once per condition, composes the
//! per-position predictions of the fully unmasked grid, and fixes a few
//! masked slots by sampling from the composed distributions. Autoregressive
//! mode is the same loop with one slot per step in left-to-right order.

use alloc::format;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::compose::{apply_temperature, compose, ComposeConfig, LogProbVector, WeightVector, DEFAULT_TEMPERATURE};
use crate::error::{Error, Result};
use crate::rng::{sample_logp, seeded};
use crate::world::ConditionSpec;
use crate::Token;

/// Token grid in which every slot is either fixed or masked.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskedState {
    slots: Vec<Option<Token>>,
    step: usize,
}

impl MaskedState {
    pub fn fully_masked(len: usize) -> Self {
        Self { slots: alloc::vec![None; len], step: 0 }
    }

    pub fn from_slots(slots: Vec<Option<Token>>) -> Self {
        Self { slots, step: 0 }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Option<Token>] {
        &self.slots
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn masked_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(i, _)| i)
    }

    pub fn masked_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    /// The full token grid once nothing is masked.
    pub fn tokens(&self) -> Option<Vec<Token>> {
        self.slots.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Masked,
    Autoregressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPolicy {
    /// A uniform random permutation drawn once per run.
    RandomFixedSeed,
    /// Highest composed max-probability first, lowest position on ties.
    MaxConfidence,
    LeftToRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerSchedule {
    pub mode: SamplingMode,
    pub tokens_per_step: usize,
    pub order_policy: OrderPolicy,
    pub rng_seed: u64,
    pub temperature: f64,
}

impl SamplerSchedule {
    pub fn masked(tokens_per_step: usize, rng_seed: u64) -> Self {
        Self {
            mode: SamplingMode::Masked,
            tokens_per_step,
            order_policy: OrderPolicy::RandomFixedSeed,
            rng_seed,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn autoregressive(rng_seed: u64) -> Self {
        Self {
            mode: SamplingMode::Autoregressive,
            tokens_per_step: 1,
            order_policy: OrderPolicy::LeftToRight,
            rng_seed,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_order(mut self, order_policy: OrderPolicy) -> Self {
        self.order_policy = order_policy;
        self
    }

    /// Autoregressive mode always unmasks one slot, left to right.
    pub fn effective_tokens_per_step(&self) -> usize {
        match self.mode {
            SamplingMode::Masked => self.tokens_per_step,
            SamplingMode::Autoregressive => 1,
        }
    }

    pub fn effective_order(&self) -> OrderPolicy {
        match self.mode {
            SamplingMode::Masked => self.order_policy,
            SamplingMode::Autoregressive => OrderPolicy::LeftToRight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.effective_tokens_per_step() == 0 {
            return Err(Error::InvalidParameter("tokens_per_step must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        Ok(())
    }

    /// Steps needed to unmask `len` slots.
    pub fn steps(&self, len: usize) -> usize {
        len.div_ceil(self.effective_tokens_per_step())
    }
}

/// Model evaluations for one sample of length `len` under `n` conditions.
pub fn count_evaluations(sched: &SamplerSchedule, len: usize, n: usize) -> usize {
    sched.steps(len) * (n + 1)
}

/// A model that predicts the fully unmasked grid from a partial one.
pub trait ConditionalModel {
    fn vocab_size(&self) -> usize;

    /// One normalized distribution per masked slot of `state`, in increasing
    /// position order. `condition = None` gives the unconditional
    /// prediction.
    fn predict(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>>;
}

impl<M: ConditionalModel + ?Sized> ConditionalModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn predict(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>> {
        (**self).predict(state, condition)
    }
}

/// Counts calls to [`ConditionalModel::predict`].
#[derive(Debug, Default)]
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicUsize,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn into_inner(self) -> M {
        self.inner
    }
}

impl<M: ConditionalModel> ConditionalModel for CountingModel<M> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn predict(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict(state, condition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub steps: usize,
    pub evaluations: usize,
}

/// Composed distribution for one masked slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDistribution {
    pub position: usize,
    pub dist: LogProbVector,
}

/// Binds a model, conditions, weights and a schedule for sampling.
#[derive(Debug, Clone)]
pub struct Composer<'a, M: ?Sized> {
    model: &'a M,
    conditions: &'a [ConditionSpec],
    weights: &'a WeightVector,
    schedule: SamplerSchedule,
    config: ComposeConfig,
}

impl<'a, M: ConditionalModel + ?Sized> Composer<'a, M> {
    pub fn new(
        model: &'a M,
        conditions: &'a [ConditionSpec],
        weights: &'a WeightVector,
        schedule: SamplerSchedule,
    ) -> Result<Self> {
        if conditions.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} conditions but {} weights",
                conditions.len(),
                weights.len()
            )));
        }
        schedule.validate()?;
        let config = ComposeConfig { temperature: schedule.temperature, ..ComposeConfig::default() };
        Ok(Self { model, conditions, weights, schedule, config })
    }

    pub fn with_logp_floor(mut self, logp_floor: f64) -> Result<Self> {
        self.config.logp_floor = logp_floor;
        self.config.validate()?;
        Ok(self)
    }

    pub fn schedule(&self) -> &SamplerSchedule {
        &self.schedule
    }

    pub fn conditions(&self) -> &[ConditionSpec] {
        self.conditions
    }

    /// Queries the model `n + 1` times and returns the tempered composed
    /// distribution of every masked slot.
    pub fn composed_distributions(&self, state: &MaskedState) -> Result<Vec<SlotDistribution>> {
        let positions: Vec<usize> = state.masked_positions().collect();
        if positions.is_empty() {
            return Err(Error::NoMaskedSlots);
        }
        let uncond = self.query(state, None, positions.len())?;
        let mut conds = Vec::with_capacity(self.conditions.len());
        for c in self.conditions {
            conds.push(self.query(state, Some(c), positions.len())?);
        }
        let mut per_slot: Vec<&LogProbVector> = Vec::with_capacity(conds.len());
        let mut out = Vec::with_capacity(positions.len());
        for (slot, &position) in positions.iter().enumerate() {
            per_slot.clear();
            per_slot.extend(conds.iter().map(|c| &c[slot]));
            let composed = compose(&uncond[slot], &per_slot, self.weights, &self.config)?;
            out.push(SlotDistribution { position, dist: apply_temperature(&composed, self.schedule.temperature)? });
        }
        Ok(out)
    }

    fn query(&self, state: &MaskedState, cond: Option<&ConditionSpec>, expected: usize) -> Result<Vec<LogProbVector>> {
        let out = self.model.predict(state, cond)?;
        if out.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "model returned {} distributions for {expected} masked slots",
                out.len()
            )));
        }
        Ok(out)
    }

    /// Unmasking order for a run: a seeded permutation for the random
    /// policy, positions in order otherwise (max-confidence ranks per step).
    pub fn initial_order<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let mut order: Vec<usize> = (0..len).collect();
        if self.schedule.effective_order() == OrderPolicy::RandomFixedSeed {
            order.shuffle(rng);
        }
        order
    }

    /// One composed unmasking step. `order` is the run's unmasking order
    /// from [`Composer::initial_order`].
    pub fn composed_step<R: Rng + ?Sized>(&self, state: &MaskedState, order: &[usize], rng: &mut R) -> Result<MaskedState> {
        let dists = self.composed_distributions(state)?;
        let take = self.schedule.effective_tokens_per_step().min(dists.len());

        let mut chosen: Vec<usize> = match self.schedule.effective_order() {
            OrderPolicy::MaxConfidence => {
                let mut ranked: Vec<(usize, f64)> =
                    dists.iter().enumerate().map(|(i, d)| (i, d.dist.max_prob())).collect();
                // stable sort keeps lower positions first on ties
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
                ranked.into_iter().take(take).map(|(i, _)| i).collect()
            }
            OrderPolicy::RandomFixedSeed | OrderPolicy::LeftToRight => order
                .iter()
                .filter(|&&p| state.slots[p].is_none())
                .take(take)
                .map(|&p| dists.iter().position(|d| d.position == p).expect("masked position"))
                .collect(),
        };
        chosen.sort_unstable();

        let mut next = state.clone();
        for i in chosen {
            let d = &dists[i];
            let token = sample_logp(d.dist.as_slice(), rng).ok_or(Error::AllMassZero)?;
            next.slots[d.position] = Some(token as Token);
        }
        next.step += 1;
        Ok(next)
    }

    /// Runs from `initial` until nothing is masked, using stream `stream` of
    /// the schedule's seed.
    pub fn run_stream(&self, initial: MaskedState, stream: u64) -> Result<(Vec<Token>, RunStats)> {
        let mut rng = seeded(self.schedule.rng_seed, stream);
        let order = self.initial_order(initial.len(), &mut rng);
        let per_step = self.conditions.len() + 1;
        let mut stats = RunStats::default();
        let mut state = initial;
        while !state.is_complete() {
            state = self.composed_step(&state, &order, &mut rng)?;
            stats.steps += 1;
            stats.evaluations += per_step;
        }
        Ok((state.tokens().expect("complete state"), stats))
    }

    pub fn run_to_completion(&self, initial: MaskedState) -> Result<(Vec<Token>, RunStats)> {
        self.run_stream(initial, 0)
    }
}
