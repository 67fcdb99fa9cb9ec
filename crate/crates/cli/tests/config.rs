use discomp::config::{ConditionEntry, ModeCfg, ModelKind, OrderCfg, PromptingCfg, RunConfig, WorldKindCfg};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        prop_oneof![Just(WorldKindCfg::Positional), Just(WorldKindCfg::Relational)],
        (0.0f64..=1.0, 0.0f64..5.0, 1usize..200_000),
        (1usize..10, 0.05f64..3.0, any::<bool>(), any::<bool>()),
        prop::collection::vec(((0u8..3, 0u8..3), -3.0f64..3.0), 0..4),
        (prop::collection::vec(1usize..=3, 0..4), any::<bool>(), prop::option::of((0u8..3, 0u8..3))),
    )
        .prop_map(|(seed, kind, (dropout, alpha, n), (tps, temp, ar, conf), conds, (components, joint, neg))| {
            let mut c = RunConfig { seed, ..RunConfig::default() };
            c.world.kind = kind;
            c.model.dropout_prob = dropout;
            c.model.alpha = alpha;
            c.model.n_samples = n;
            c.model.kind = if conf { ModelKind::Exact } else { ModelKind::Count };
            c.schedule.tokens_per_step = tps;
            c.schedule.temperature = temp;
            c.schedule.mode = if ar { ModeCfg::Autoregressive } else { ModeCfg::Masked };
            c.schedule.order_policy = if conf { OrderCfg::MaxConfidence } else { OrderCfg::RandomFixedSeed };
            c.conditions = conds
                .into_iter()
                .map(|((col, row), weight)| ConditionEntry { spec: format!("object_at_cell({col},{row})"), weight })
                .collect();
            c.eval.components = components;
            c.eval.prompting = if joint { PromptingCfg::JointPrompt } else { PromptingCfg::Composed };
            c.eval.negation = neg.map(|(col, row)| format!("object_at_cell({col},{row})"));
            c
        })
}

proptest! {
    #[test]
    fn echo_parses_back_to_the_same_config(c in config()) {
        prop_assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}

#[test]
fn documented_example_parses() {
    let text = r#"
seed = 7

[world]
kind = "positional"
grid_w = 3
grid_h = 3
n_shapes = 2
n_colors = 2
min_objects = 0
max_objects = 3
vocab = 5
empty_prob = 0.5

[model]
kind = "count"
n_samples = 100000
dropout_prob = 0.1
alpha = 0.1
label_policy = "single"

[schedule]
mode = "masked"
tokens_per_step = 1
order_policy = "random_fixed_seed"
temperature = 0.9

[[conditions]]
spec = "object_at_cell(0,0)"
weight = 1.0

[codebook]
k = 64
patch_h = 4
patch_w = 4
iters = 25
n_images = 64
noise = 0.03

[sample]
n = 16
render = false

[eval]
n_samples = 2000
components = [1, 2, 3]
prompting = "composed"
negation = "object_at_cell(1,1)"

[bench]
tokens_per_step = [1, 3, 9]
n_conditions = [0, 1, 2]
batch_sizes = [1, 25]

[paths]
world = "world.dcw"
model = "model.dcw"
codebook = "codebook.dcw"
"#;
    let c = RunConfig::from_toml(text).unwrap();
    let mut expect = RunConfig { seed: 7, ..RunConfig::default() };
    expect.conditions.push(ConditionEntry { spec: "object_at_cell(0,0)".into(), weight: 1.0 });
    expect.eval.negation = Some("object_at_cell(1,1)".into());
    assert_eq!(c, expect);
}

#[test]
fn unknown_keys_rejected_in_every_section() {
    for section in ["world", "model", "schedule", "codebook", "sample", "eval", "bench", "paths"] {
        let e = RunConfig::from_toml(&format!("[{section}]\nbogus = 1\n")).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{section}: {e}");
    }
    assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    assert!(RunConfig::from_toml("[[conditions]]\nspec = \"object_at_cell(0,0)\"\nwieght = 2\n").is_err());
}

#[test]
fn validation_names_fields() {
    let cases = [
        ("[model]\nalpha = -1.0\n", "model.alpha"),
        ("[schedule]\ntemperature = 0.0\n", "schedule.temperature"),
        ("[schedule]\ntokens_per_step = 0\n", "schedule.tokens_per_step"),
        ("[world]\nempty_prob = 2.0\n", "world.empty_prob"),
        ("[world]\nmin_objects = 4\n", "world.min_objects"),
        ("[eval]\ncomponents = [4]\n", "eval.components"),
        ("[eval]\nnegation = \"nowhere\"\n", "eval.negation"),
        ("[codebook]\nk = 0\n", "codebook.k"),
        ("[[conditions]]\nspec = \"object_at_cell(0,0)\"\n[[conditions]]\nspec = \"object_at_cell(0,0\"\n", "conditions[1].spec"),
        ("[world]\ngrid_w = 4\ngrid_h = 4\n", "world"),
    ];
    for (text, field) in cases {
        let e = RunConfig::from_toml(text).unwrap_err();
        assert_eq!(e.field, field, "{text}");
    }
}

#[test]
fn seed_reaches_the_schedule() {
    let c = RunConfig::from_toml("seed = 42\n").unwrap();
    assert_eq!(c.schedule().rng_seed, 42);
    assert_eq!(c.schedule().temperature, 0.9);
}
