use std::collections::HashMap;

use discomp_core::compose::{compose, ComposeConfig, LogProbVector, WeightVector};
use discomp_core::eval::tv_to_marginals;
use discomp_core::world::{FactorizedWorldSpec, SceneWorldSpec};
use discomp_core::{
    enumerate_posterior, Composer, ConditionSpec, ConditionalModel, CountingModel, ExactModel, MaskedState,
    SamplerSchedule, Token, WorldJoint, WorldSpec,
};
use proptest::prelude::*;

const N: u64 = 100_000;

fn tiny_scene() -> WorldJoint {
    // 2x2 cells, one shape, two colors: K = 3, L = 4
    WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(2, 2, 1, 2, 2))).unwrap()
}

fn sequence_tv(world: &WorldJoint, cond: &ConditionSpec, sched: SamplerSchedule) -> f64 {
    let model = ExactModel::new(world);
    let conds = [cond.clone()];
    let w = WeightVector::ones(1);
    let composer = Composer::new(&model, &conds, &w, sched).unwrap();
    let mut counts: HashMap<Vec<Token>, u64> = HashMap::new();
    for s in 0..N {
        let (grid, _) = composer.run_stream(MaskedState::fully_masked(world.len()), s).unwrap();
        *counts.entry(grid).or_default() += 1;
    }
    let post = enumerate_posterior(world, &conds).unwrap();
    let mut tv = 0.0;
    for &(code, p) in post.entries() {
        let grid = post.decode(code);
        tv += (counts.remove(&grid).unwrap_or(0) as f64 / N as f64 - p).abs();
    }
    // grids outside the support
    tv += counts.values().map(|&c| c as f64 / N as f64).sum::<f64>();
    tv / 2.0
}

#[test]
fn masked_exact_sampling_matches_posterior() {
    let world = tiny_scene();
    let sched = SamplerSchedule::masked(1, 17).with_temperature(1.0);
    let tv = sequence_tv(&world, &ConditionSpec::at(1, 0), sched);
    assert!(tv <= 0.03, "{tv}");
}

#[test]
fn autoregressive_exact_sampling_matches_posterior() {
    let world = tiny_scene();
    let sched = SamplerSchedule::autoregressive(23).with_temperature(1.0);
    let tv = sequence_tv(&world, &ConditionSpec::at(0, 1), sched);
    assert!(tv <= 0.03, "{tv}");
}

fn factorized_two_conditions() -> (WorldJoint, Vec<ConditionSpec>) {
    let mut spec = FactorizedWorldSpec::object_presence(3, 3, 5, 0.4);
    spec.prior[4] = vec![0.1, 0.3, 0.2, 0.2, 0.2];
    spec.conditions[0].cells[0].1 = vec![0.0, 0.1, 0.2, 0.3, 0.4];
    spec.conditions[8].cells[0].1 = vec![0.0, 0.7, 0.1, 0.1, 0.1];
    let conds = vec![spec.conditions[0].spec.clone(), spec.conditions[8].spec.clone()];
    (WorldJoint::build(WorldSpec::Factorized(spec)).unwrap(), conds)
}

#[test]
fn composed_sampling_on_factorized_world_matches_posterior_marginals() {
    let (world, conds) = factorized_two_conditions();
    let model = ExactModel::new(&world);
    let w = WeightVector::ones(2);
    for tps in [1, 3, 9] {
        let sched = SamplerSchedule::masked(tps, 31).with_temperature(1.0);
        let composer = Composer::new(&model, &conds, &w, sched).unwrap();
        let samples: Vec<Vec<Token>> = (0..N)
            .map(|s| composer.run_stream(MaskedState::fully_masked(9), s).unwrap().0)
            .collect();
        let marg = enumerate_posterior(&world, &conds).unwrap().marginals();
        let tv = tv_to_marginals(&samples, &marg).unwrap();
        assert!(tv <= 0.02, "tps {tps}: {tv}");
    }
}

#[test]
fn poe_exactness_on_factorized_world() {
    let (world, conds) = factorized_two_conditions();
    let model = ExactModel::new(&world);
    let state = MaskedState::fully_masked(9);
    let u = model.predict(&state, None).unwrap();
    let cs: Vec<Vec<LogProbVector>> = conds.iter().map(|c| model.predict(&state, Some(c)).unwrap()).collect();
    let truth = enumerate_posterior(&world, &conds).unwrap().marginals();
    for p in 0..9 {
        let per: Vec<&LogProbVector> = cs.iter().map(|c| &c[p]).collect();
        let got = compose(&u[p], &per, &WeightVector::ones(2), &ComposeConfig::default()).unwrap().probs();
        for (a, b) in got.iter().zip(&truth[p]) {
            assert!((a - b).abs() < 1e-10, "cell {p}: {a} vs {b}");
        }
    }
}

#[test]
fn oracle_consistency_scene() {
    let world = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(3, 3, 2, 2, 3))).unwrap();
    let model = ExactModel::new(&world);
    let conds = [ConditionSpec::at(0, 0), ConditionSpec::at(2, 1)];
    for c in conds.iter().map(Some).chain([None]) {
        let pred = model.predict(&MaskedState::fully_masked(9), c).unwrap();
        let marg = enumerate_posterior(&world, c.map(std::slice::from_ref).unwrap_or(&[])).unwrap().marginals();
        for (d, m) in pred.iter().zip(&marg) {
            for (a, b) in d.probs().iter().zip(m) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn run_stats_count_model_evaluations() {
    let world = tiny_scene();
    let model = CountingModel::new(ExactModel::new(&world));
    let w = WeightVector::ones(0);
    for tps in 1..=4 {
        model.reset();
        let composer = Composer::new(&model, &[], &w, SamplerSchedule::masked(tps, 1)).unwrap();
        let (_, stats) = composer.run_to_completion(MaskedState::fully_masked(4)).unwrap();
        assert_eq!(stats.evaluations, model.calls());
        assert_eq!(stats.steps, 4usize.div_ceil(tps));
    }
}

/// Uniform model over a fixed vocabulary, any length.
struct Uniform(usize);

impl ConditionalModel for Uniform {
    fn vocab_size(&self) -> usize {
        self.0
    }

    fn predict(&self, state: &MaskedState, _: Option<&ConditionSpec>) -> discomp_core::Result<Vec<LogProbVector>> {
        state.masked_positions().map(|_| LogProbVector::uniform(self.0)).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_and_absorbing_invariants(len in 1usize..40, tps in 1usize..12, n in 0usize..4, seed in any::<u64>(), conf in any::<bool>()) {
        let model = CountingModel::new(Uniform(3));
        let conds: Vec<ConditionSpec> = (0..n).map(|i| ConditionSpec::at(i as u8, 0)).collect();
        let w = WeightVector::ones(n);
        let mut sched = SamplerSchedule::masked(tps, seed).with_temperature(1.0);
        if conf {
            sched = sched.with_order(discomp_core::OrderPolicy::MaxConfidence);
        }
        let composer = Composer::new(&model, &conds, &w, sched).unwrap();
        let mut rng = discomp_core::rng::seeded(seed, 0);
        let order = composer.initial_order(len, &mut rng);
        let mut state = MaskedState::fully_masked(len);
        let mut steps = 0;
        while !state.is_complete() {
            let next = composer.composed_step(&state, &order, &mut rng).unwrap();
            for (a, b) in state.slots().iter().zip(next.slots()) {
                if a.is_some() {
                    prop_assert_eq!(a, b);
                }
            }
            prop_assert!(next.masked_count() < state.masked_count());
            state = next;
            steps += 1;
        }
        prop_assert_eq!(steps, len.div_ceil(tps));
        prop_assert_eq!(model.calls(), discomp_core::count_evaluations(&sched, len, n));
    }

    #[test]
    fn runs_replay_bit_identically(len in 1usize..20, tps in 1usize..6, seed in any::<u64>(), stream in any::<u64>()) {
        let model = Uniform(4);
        let w = WeightVector::ones(0);
        let composer = Composer::new(&model, &[], &w, SamplerSchedule::masked(tps, seed)).unwrap();
        let a = composer.run_stream(MaskedState::fully_masked(len), stream).unwrap();
        let b = composer.run_stream(MaskedState::fully_masked(len), stream).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn poe_exact_for_random_factorized_tables(
        tables in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 4), 4),
        c1 in prop::collection::vec(0.05f64..1.0, 4),
        c2 in prop::collection::vec(0.05f64..1.0, 4),
    ) {
        let norm = |t: &Vec<f64>| { let s: f64 = t.iter().sum(); t.iter().map(|x| x / s).collect::<Vec<f64>>() };
        let mut spec = FactorizedWorldSpec::object_presence(2, 2, 4, 0.5);
        spec.prior = tables.iter().map(norm).collect();
        spec.conditions[0].cells[0].1 = norm(&c1);
        spec.conditions[3].cells[0].1 = norm(&c2);
        let conds = vec![spec.conditions[0].spec.clone(), spec.conditions[3].spec.clone()];
        let world = WorldJoint::build(WorldSpec::Factorized(spec)).unwrap();
        let model = ExactModel::new(&world);
        let state = MaskedState::fully_masked(4);
        let u = model.predict(&state, None).unwrap();
        let cs: Vec<Vec<LogProbVector>> = conds.iter().map(|c| model.predict(&state, Some(c)).unwrap()).collect();
        let truth = enumerate_posterior(&world, &conds).unwrap().marginals();
        for p in 0..4 {
            let per: Vec<&LogProbVector> = cs.iter().map(|c| &c[p]).collect();
            let got = compose(&u[p], &per, &WeightVector::ones(2), &ComposeConfig::default()).unwrap().probs();
            for (a, b) in got.iter().zip(&truth[p]) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
