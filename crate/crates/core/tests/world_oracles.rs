use discomp_core::rng::seeded;
use discomp_core::world::{fit_count_model, FactorizedWorldSpec, SceneWorldSpec, STATE_CAP};
use discomp_core::{check_conditions, enumerate_posterior, ConditionSpec, Error, WorldJoint, WorldSpec};
use proptest::prelude::*;

#[test]
fn uniform_factorized_world_is_uniform() {
    let mut spec = FactorizedWorldSpec::object_presence(2, 2, 3, 0.5);
    spec.prior = vec![vec![1.0 / 3.0; 3]; 4];
    spec.conditions.clear();
    let w = WorldJoint::build(WorldSpec::Factorized(spec)).unwrap();
    let post = enumerate_posterior(&w, &[]).unwrap();
    assert_eq!(post.support_size(), 81);
    assert!(post.entries().iter().all(|&(_, p)| (p - 1.0 / 81.0).abs() < 1e-15));
    assert!((post.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn single_condition_marginals_equal_its_table() {
    let mut spec = FactorizedWorldSpec::object_presence(3, 1, 4, 0.25);
    spec.conditions[1].cells[0].1 = vec![0.0, 0.5, 0.25, 0.25];
    let c = spec.conditions[1].spec.clone();
    let w = WorldJoint::build(WorldSpec::Factorized(spec.clone())).unwrap();
    let marg = enumerate_posterior(&w, &[c]).unwrap().marginals();
    assert_eq!(marg[1].len(), 4);
    for (a, b) in marg[1].iter().zip(&spec.conditions[1].cells[0].1) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in marg[0].iter().zip(&spec.prior[0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn malformed_tables_rejected() {
    let mut spec = FactorizedWorldSpec::object_presence(2, 1, 3, 0.5);
    spec.prior[0] = vec![0.5, 0.5, 0.5];
    assert!(matches!(WorldJoint::build(WorldSpec::Factorized(spec)), Err(Error::InvalidTable(_))));
}

#[test]
fn state_cap_enforced() {
    // 6^9 exceeds the enumeration cap, 5^9 does not
    let big = FactorizedWorldSpec::object_presence(3, 3, 6, 0.5);
    assert!(matches!(
        WorldJoint::build(WorldSpec::Factorized(big)),
        Err(Error::StateSpaceTooLarge { .. })
    ));
    assert!(5u128.pow(9) <= STATE_CAP);
    assert!(WorldJoint::build(WorldSpec::Factorized(FactorizedWorldSpec::object_presence(3, 3, 5, 0.5))).is_ok());
}

#[test]
fn compatible_positional_conditions_on_3x3() {
    let w = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(3, 3, 1, 2, 3))).unwrap();
    let conds = [ConditionSpec::at(0, 0), ConditionSpec::at(2, 2)];
    let post = enumerate_posterior(&w, &conds).unwrap();
    assert!((post.total_mass() - 1.0).abs() < 1e-12);
    for &(code, _) in post.entries() {
        let g = post.decode(code);
        assert_eq!(check_conditions(&g, &conds, w.layout()), vec![true, true]);
    }
    // 2 objects: 2*2 colorings, 3 objects: 7 extra cells * 2^3 colorings, masses by object count
    let two = 1.0 / 4.0 / 36.0 / 4.0;
    let three = 1.0 / 4.0 / 84.0 / 8.0;
    let z = 4.0 * two + 56.0 * three;
    assert!((post.prob(&[1, 0, 0, 0, 0, 0, 0, 0, 2]) - two / z).abs() < 1e-12);
}

#[test]
fn contradictory_conditions_are_empty() {
    let w = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(2, 2, 1, 1, 1))).unwrap();
    assert_eq!(
        enumerate_posterior(&w, &[ConditionSpec::at(0, 0), ConditionSpec::at(1, 1)]).unwrap_err(),
        Error::EmptyIntersection
    );
}

#[test]
fn empty_grid_fails_positional_condition() {
    let w = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(2, 2, 1, 1, 2))).unwrap();
    assert_eq!(check_conditions(&[0, 0, 0, 0], &[ConditionSpec::at(0, 0)], w.layout()), vec![false]);
}

#[test]
fn satisfaction_frequency_matches_enumeration() {
    let w = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(3, 3, 2, 2, 3))).unwrap();
    let cond: ConditionSpec = "attribute_present(shape=1,color=0)".parse().unwrap();
    let exact: f64 = w.support().unwrap().filter(|(g, _)| cond.holds(g, w.layout())).map(|(_, p)| p).sum();
    let mut rng = seeded(5, 0);
    let n = 100_000;
    let hits = (0..n).filter(|_| cond.holds(&w.sample_prior(&mut rng), w.layout())).count();
    let f = hits as f64 / n as f64;
    let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((f - exact).abs() < 4.0 * sigma, "{f} vs {exact}");
}

#[test]
fn relational_conditions_need_relational_world() {
    let w = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(3, 2, 1, 2, 3))).unwrap();
    let rel: ConditionSpec = "relation(shape=0,color=0;left_of;shape=0,color=1)".parse().unwrap();
    assert!(matches!(enumerate_posterior(&w, std::slice::from_ref(&rel)), Err(Error::InvalidCondition(_))));
    let spec = SceneWorldSpec { relational: true, ..SceneWorldSpec::positional(3, 2, 1, 2, 3) };
    let w = WorldJoint::build(WorldSpec::Scene(spec)).unwrap();
    let post = enumerate_posterior(&w, std::slice::from_ref(&rel)).unwrap();
    for &(code, _) in post.entries() {
        assert!(rel.holds(&post.decode(code), w.layout()));
    }
}

#[test]
fn count_model_gets_closer_with_more_samples() {
    let mut spec = FactorizedWorldSpec::object_presence(3, 3, 5, 0.5);
    spec.conditions[4].cells[0].1 = vec![0.0, 0.4, 0.3, 0.2, 0.1];
    let cond = spec.conditions[4].spec.clone();
    let world = WorldJoint::build(WorldSpec::Factorized(spec)).unwrap();
    let truth = enumerate_posterior(&world, std::slice::from_ref(&cond)).unwrap().marginals();
    let tv_at = |n| {
        let model = fit_count_model(&world, n, 0.1, 1.0, 77).unwrap();
        let state = discomp_core::MaskedState::fully_masked(9);
        let pred = discomp_core::ConditionalModel::predict(&model, &state, Some(&cond)).unwrap();
        pred.iter()
            .zip(&truth)
            .map(|(d, t)| d.probs().iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
            .fold(0.0, f64::max)
    };
    let (small, large) = (tv_at(2_000), tv_at(100_000));
    assert!(large <= 0.05, "{large}");
    assert!(large < small, "{large} vs {small}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_scene_world_is_normalized(w in 1usize..=3, h in 1usize..=3, shapes in 1usize..=2, colors in 1usize..=2, max in 0usize..=3) {
        let max = max.min(w * h);
        let world = WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(w, h, shapes, colors, max))).unwrap();
        let total: f64 = world.support().unwrap().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condition_text_roundtrip(col in 0u8..3, row in 0u8..3, s in prop::option::of(0u8..2), c in prop::option::of(0u8..2)) {
        let a = discomp_core::Attribute { shape: s, color: c };
        for cond in [
            ConditionSpec::at(col, row),
            ConditionSpec::AttributePresent(a),
            ConditionSpec::Relation { first: a, relation: discomp_core::Relation::Above, second: a },
            ConditionSpec::joint(vec![ConditionSpec::at(col, row), ConditionSpec::AttributePresent(a)]),
        ] {
            let back: ConditionSpec = cond.to_string().parse().unwrap();
            prop_assert_eq!(back, cond);
        }
    }
}
