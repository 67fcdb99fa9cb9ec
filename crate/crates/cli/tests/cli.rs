use std::path::Path;
use std::process::{Command, Output};

use discomp::ppm::Rgb8;
use serde_json::Value;

fn discomp(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_discomp"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn records(dir: &Path, name: &str) -> Vec<Value> {
    let text = std::fs::read_to_string(dir.join("out").join(name)).unwrap();
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn of_kind<'a>(recs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["record"] == kind).collect()
}

const SMALL: &str = "[model]\nn_samples = 20000\n";

#[test]
fn invalid_dropout_names_the_field() {
    let d = tempfile::tempdir().unwrap();
    let o = discomp(d.path(), "[model]\ndropout_prob = 1.5\n", &["fit-model"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("model.dropout_prob"), "{}", stderr(&o));
    assert!(!d.path().join("out/model.dcw").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = discomp(d.path(), "[sample]\ncount = 3\n", &["build-world"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("count"), "{}", stderr(&o));
}

#[test]
fn missing_model_is_a_validation_error() {
    let d = tempfile::tempdir().unwrap();
    let o = discomp(d.path(), "", &["sample"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing artifact"), "{}", stderr(&o));
}

#[test]
fn contradictory_conditions_exit_with_sampling_failure() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[world]\nmax_objects = 1\n[model]\nkind = \"exact\"\n\
               [[conditions]]\nspec = \"object_at_cell(0,0)\"\n[[conditions]]\nspec = \"object_at_cell(1,1)\"\n";
    assert_eq!(code(&discomp(d.path(), cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), cfg, &["sample"]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("object_at_cell(0,0)") && err.contains("object_at_cell(1,1)"), "{err}");
}

#[test]
fn unconditional_samples_without_conditions() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[sample]\nn = 5\n");
    assert_eq!(code(&discomp(d.path(), &cfg, &["fit-model"])), 0);
    assert_eq!(code(&discomp(d.path(), &cfg, &["sample"])), 0);
    let recs = records(d.path(), "sample.jsonl");
    assert_eq!(recs[0]["record"], "config");
    let samples = of_kind(&recs, "sample");
    assert_eq!(samples.len(), 5);
    for s in samples {
        assert_eq!(s["tokens"].as_array().unwrap().len(), 9);
        assert!(s["satisfied"].as_array().unwrap().is_empty());
    }
}

#[test]
fn composed_samples_satisfy_compatible_conditions() {
    // disjoint cells of a factorized world: the posterior satisfies both
    let d = tempfile::tempdir().unwrap();
    let cfg = "[world]\nkind = \"factorized\"\n[model]\nkind = \"exact\"\n[schedule]\ntokens_per_step = 3\n[sample]\nn = 200\n\
               [[conditions]]\nspec = \"object_at_cell(0,0)\"\n[[conditions]]\nspec = \"object_at_cell(2,2)\"\n";
    assert_eq!(code(&discomp(d.path(), cfg, &["fit-model"])), 0);
    assert_eq!(code(&discomp(d.path(), cfg, &["sample"])), 0);
    let recs = records(d.path(), "sample.jsonl");
    let summary = of_kind(&recs, "summary")[0];
    assert_eq!(summary["all_satisfied_rate"], 1.0);
}

#[test]
fn rendered_samples_are_valid_ppm() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[codebook]\nk = 8\nn_images = 8\n[sample]\nn = 3\nrender = true\n");
    for cmd in ["fit-model", "learn-codebook", "sample"] {
        let o = discomp(d.path(), &cfg, &[cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    for i in 0..3 {
        let bytes = std::fs::read(d.path().join(format!("out/sample_{i:04}.ppm"))).unwrap();
        let img = Rgb8::decode(&bytes).unwrap();
        assert_eq!((img.width, img.height), (12, 12));
        assert_eq!(img.encode(), bytes);
    }
}

#[test]
fn render_without_codebook_fails() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[sample]\nrender = true\n");
    assert_eq!(code(&discomp(d.path(), &cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), &cfg, &["sample"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("codebook.dcw"), "{}", stderr(&o));
}

#[test]
fn eval_emits_one_row_per_component_count() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[eval]\nn_samples = 100\n");
    assert_eq!(code(&discomp(d.path(), &cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), &cfg, &["eval"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(d.path(), "eval.jsonl");
    let rows = of_kind(&recs, "error_eval");
    assert_eq!(rows.iter().map(|r| r["n_components"].as_u64().unwrap()).collect::<Vec<_>>(), vec![1, 2, 3]);
    for r in rows {
        let p = r["error_rate"].as_f64().unwrap();
        let expect = 2.0 * (p * (1.0 - p) / 100.0).sqrt();
        assert!((r["two_sigma"].as_f64().unwrap() - expect).abs() < 1e-15);
        let n = r["n_components"].as_u64().unwrap();
        assert_eq!(r["evaluations_per_sample"].as_u64().unwrap(), 9 * (n + 1));
    }
}

#[test]
fn negation_without_headroom_is_a_property_failure() {
    // every cell is always occupied, so the condition always holds
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[world]\nn_shapes = 1\nn_colors = 1\nmin_objects = 9\nmax_objects = 9\n[eval]\nn_samples = 200\ncomponents = []\nnegation = \"object_at_cell(1,1)\"\n");
    assert_eq!(code(&discomp(d.path(), &cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), &cfg, &["eval"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("headroom"));
}

#[test]
fn negation_on_factorized_world_passes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[world]\nkind = \"factorized\"\n[model]\nn_samples = 100000\n\
               [eval]\nn_samples = 1000\ncomponents = [1]\nnegation = \"object_at_cell(1,1)\"\n";
    assert_eq!(code(&discomp(d.path(), cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), cfg, &["eval"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(d.path(), "eval.jsonl");
    let neg = of_kind(&recs, "negation")[0];
    assert!(neg["negated_rate"].as_f64().unwrap() <= neg["base_rate"].as_f64().unwrap() / 2.0);
    assert_eq!(neg["sweep"].as_array().unwrap().len(), 5);
}

#[test]
fn bench_reports_exact_evaluation_counts() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}[bench]\nbatch_sizes = [1, 4]\n");
    assert_eq!(code(&discomp(d.path(), &cfg, &["fit-model"])), 0);
    let o = discomp(d.path(), &cfg, &["bench"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(d.path(), "bench.jsonl");
    let rows = of_kind(&recs, "bench");
    assert_eq!(rows.len(), 9);
    for r in rows {
        let s = r["tokens_per_step"].as_u64().unwrap();
        let n = r["n_conditions"].as_u64().unwrap();
        assert!([1, 3, 9].contains(&s));
        assert_eq!(r["steps"].as_u64().unwrap(), 9u64.div_ceil(s));
        assert_eq!(r["evaluations_per_sample"].as_u64().unwrap(), 9u64.div_ceil(s) * (n + 1));
        assert_eq!(r["exact"], true);
        assert_eq!(r["wall_time_per_sample_by_batch"].as_object().unwrap().len(), 2);
    }
}

#[test]
fn fit_model_on_factorized_world_converges() {
    let d = tempfile::tempdir().unwrap();
    let cfg = "[world]\nkind = \"factorized\"\n";
    let o = discomp(d.path(), cfg, &["fit-model"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = records(d.path(), "fit-model.jsonl");
    let fit = of_kind(&recs, "fit")[0];
    assert_eq!(fit["converged"], true);
    assert!(fit["max_conditional_tv"].as_f64().unwrap() <= discomp::commands::CONVERGENCE_TV);
}

#[test]
fn same_config_gives_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = format!("{SMALL}[codebook]\nk = 8\nn_images = 8\n");
    for d in [&a, &b] {
        for cmd in ["build-world", "fit-model", "learn-codebook"] {
            assert_eq!(code(&discomp(d.path(), &cfg, &[cmd])), 0);
        }
    }
    for f in ["world.dcw", "model.dcw", "codebook.dcw"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn seed_flag_overrides_config_and_is_echoed() {
    let d = tempfile::tempdir().unwrap();
    let o = discomp(d.path(), "seed = 3\n", &["--seed", "99", "build-world"]);
    assert_eq!(code(&o), 0);
    let recs = records(d.path(), "build-world.jsonl");
    let echoed = discomp::RunConfig::from_toml(recs[0]["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed.seed, 99);
}

#[test]
fn inspect_lists_sections() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&discomp(d.path(), SMALL, &["fit-model"])), 0);
    let model = d.path().join("out/model.dcw");
    let before = std::fs::read(&model).unwrap();
    let o = discomp(d.path(), SMALL, &["inspect", model.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for tag in ["[KIND]", "[CONF]", "[WSPC]", "[CMHD]", "[CLBL]", "[CFUL]", "kind: count_model"] {
        assert!(text.contains(tag), "{tag} missing from\n{text}");
    }
    assert_eq!(std::fs::read(&model).unwrap(), before);
}

#[test]
fn inspect_rejects_garbage() {
    let d = tempfile::tempdir().unwrap();
    let junk = d.path().join("junk.dcw");
    std::fs::write(&junk, b"not a container").unwrap();
    let o = discomp(d.path(), "", &["inspect", junk.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn suite_flag_is_checked() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&discomp(d.path(), "", &["eval", "--suite", "smoke"])), 2);
    assert_eq!(code(&discomp(d.path(), "", &["build-world", "--suite", "acceptance"])), 2);
}
