//! Run configuration.
//!
//! TOML with one top-level `seed` and dotted sections; every key has a
//! default and unknown keys are rejected. The effective configuration
//! (after `--seed`) is echoed into every artifact and report.
//!
//! ```toml
//! seed = 7
//!
//! [world]
//! kind = "positional"        # positional | relational | factorized
//! grid_w = 3
//! grid_h = 3
//! n_shapes = 2               # scene worlds
//! n_colors = 2
//! min_objects = 0
//! max_objects = 3
//! vocab = 5                  # factorized worlds
//! empty_prob = 0.5
//!
//! [model]
//! kind = "count"             # exact | count
//! n_samples = 100000
//! dropout_prob = 0.1
//! alpha = 0.1
//! label_policy = "single"    # single | full_caption
//!
//! [schedule]
//! mode = "masked"            # masked | autoregressive
//! tokens_per_step = 1
//! order_policy = "random_fixed_seed"   # random_fixed_seed | max_confidence
//! temperature = 0.9
//!
//! [[conditions]]
//! spec = "object_at_cell(0,0)"
//! weight = 1.0
//!
//! [codebook]
//! k = 64
//! patch_h = 4
//! patch_w = 4
//! iters = 25
//! n_images = 64
//! noise = 0.03
//!
//! [sample]
//! n = 16
//! render = false
//!
//! [eval]
//! n_samples = 2000
//! components = [1, 2, 3]
//! prompting = "composed"     # composed | joint_prompt
//! negation = "object_at_cell(1,1)"   # optional
//!
//! [bench]
//! tokens_per_step = [1, 3, 9]
//! n_conditions = [0, 1, 2]
//! batch_sizes = [1, 25]
//!
//! [paths]
//! world = "world.dcw"        # relative paths resolve against --out
//! model = "model.dcw"
//! codebook = "codebook.dcw"
//! ```

use std::fmt;

use discomp_core::eval::Prompting;
use discomp_core::world::{FactorizedWorldSpec, LabelPolicy, SceneWorldSpec};
use discomp_core::{ConditionSpec, OrderPolicy, SamplerSchedule, SamplingMode, WeightVector, WorldJoint, WorldSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub msg: String,
}

impl ConfigError {
    fn new(field: &str, msg: impl Into<String>) -> Self {
        Self { field: field.to_string(), msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.msg)
        } else {
            write!(f, "{}: {}", self.field, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKindCfg {
    Positional,
    Relational,
    Factorized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub kind: WorldKindCfg,
    pub grid_w: usize,
    pub grid_h: usize,
    pub n_shapes: usize,
    pub n_colors: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub vocab: usize,
    pub empty_prob: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            kind: WorldKindCfg::Positional,
            grid_w: 3,
            grid_h: 3,
            n_shapes: 2,
            n_colors: 2,
            min_objects: 0,
            max_objects: 3,
            vocab: 5,
            empty_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Exact,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicyCfg {
    Single,
    FullCaption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_samples: usize,
    pub dropout_prob: f64,
    pub alpha: f64,
    pub label_policy: LabelPolicyCfg,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelKind::Count, n_samples: 100_000, dropout_prob: 0.1, alpha: 0.1, label_policy: LabelPolicyCfg::Single }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeCfg {
    Masked,
    Autoregressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderCfg {
    RandomFixedSeed,
    MaxConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub mode: ModeCfg,
    pub tokens_per_step: usize,
    pub order_policy: OrderCfg,
    pub temperature: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { mode: ModeCfg::Masked, tokens_per_step: 1, order_policy: OrderCfg::RandomFixedSeed, temperature: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub spec: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub k: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub iters: usize,
    pub n_images: usize,
    /// Uniform pixel noise added to rendered training images.
    pub noise: f64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { k: 64, patch_h: 4, patch_w: 4, iters: 25, n_images: 64, noise: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub n: usize,
    pub render: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 16, render: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptingCfg {
    Composed,
    JointPrompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_samples: usize,
    pub components: Vec<usize>,
    pub prompting: PromptingCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negation: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_samples: 2000, components: vec![1, 2, 3], prompting: PromptingCfg::Composed, negation: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub tokens_per_step: Vec<usize>,
    pub n_conditions: Vec<usize>,
    pub batch_sizes: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { tokens_per_step: vec![1, 3, 9], n_conditions: vec![0, 1, 2], batch_sizes: vec![1, 25] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub world: String,
    pub model: String,
    pub codebook: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { world: "world.dcw".into(), model: "model.dcw".into(), codebook: "codebook.dcw".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub codebook: CodebookConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
    pub paths: PathsConfig,
    pub conditions: Vec<ConditionEntry>,
}


fn check(ok: bool, field: &str, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(field, msg()))
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::new("", e.message().to_string()).with_span(text, e.span()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let w = &self.world;
        check(w.grid_w >= 1 && w.grid_h >= 1, "world.grid_w", || "grid dimensions must be at least 1".into())?;
        check((0.0..=1.0).contains(&w.empty_prob), "world.empty_prob", || format!("must lie in [0, 1], got {}", w.empty_prob))?;
        check(w.min_objects <= w.max_objects, "world.min_objects", || {
            format!("{} exceeds world.max_objects = {}", w.min_objects, w.max_objects)
        })?;
        let m = &self.model;
        check((0.0..=1.0).contains(&m.dropout_prob), "model.dropout_prob", || format!("must lie in [0, 1], got {}", m.dropout_prob))?;
        check(m.alpha.is_finite() && m.alpha >= 0.0, "model.alpha", || format!("must be finite and non-negative, got {}", m.alpha))?;
        check(m.n_samples >= 1, "model.n_samples", || "must be at least 1".into())?;
        let s = &self.schedule;
        check(s.tokens_per_step >= 1, "schedule.tokens_per_step", || "must be at least 1".into())?;
        check(s.temperature.is_finite() && s.temperature > 0.0, "schedule.temperature", || {
            format!("must be finite and positive, got {}", s.temperature)
        })?;
        for (i, c) in self.conditions.iter().enumerate() {
            c.spec.parse::<ConditionSpec>().map_err(|e| ConfigError::new(&format!("conditions[{i}].spec"), e.to_string()))?;
            check(c.weight.is_finite(), &format!("conditions[{i}].weight"), || format!("must be finite, got {}", c.weight))?;
        }
        let cb = &self.codebook;
        check(cb.k >= 1, "codebook.k", || "must be at least 1".into())?;
        check(cb.patch_h >= 1 && cb.patch_w >= 1, "codebook.patch_h", || "patch dimensions must be at least 1".into())?;
        check(cb.n_images >= 1, "codebook.n_images", || "must be at least 1".into())?;
        check(cb.noise.is_finite() && (0.0..=1.0).contains(&cb.noise), "codebook.noise", || format!("must lie in [0, 1], got {}", cb.noise))?;
        check(self.eval.n_samples >= 1, "eval.n_samples", || "must be at least 1".into())?;
        for &n in &self.eval.components {
            check((1..=3).contains(&n), "eval.components", || format!("entries must be 1, 2 or 3, got {n}"))?;
        }
        if let Some(neg) = &self.eval.negation {
            neg.parse::<ConditionSpec>().map_err(|e| ConfigError::new("eval.negation", e.to_string()))?;
        }
        for &t in &self.bench.tokens_per_step {
            check(t >= 1, "bench.tokens_per_step", || "entries must be at least 1".into())?;
        }
        for &b in &self.bench.batch_sizes {
            check(b >= 1, "bench.batch_sizes", || "entries must be at least 1".into())?;
        }
        WorldJoint::build(self.world_spec()).map_err(|e| ConfigError::new("world", e.to_string()))?;
        Ok(())
    }

    pub fn world_spec(&self) -> WorldSpec {
        let w = &self.world;
        match w.kind {
            WorldKindCfg::Positional | WorldKindCfg::Relational => WorldSpec::Scene(SceneWorldSpec {
                grid_w: w.grid_w,
                grid_h: w.grid_h,
                n_shapes: w.n_shapes,
                n_colors: w.n_colors,
                min_objects: w.min_objects,
                max_objects: w.max_objects,
                relational: w.kind == WorldKindCfg::Relational,
            }),
            WorldKindCfg::Factorized => {
                WorldSpec::Factorized(FactorizedWorldSpec::object_presence(w.grid_w, w.grid_h, w.vocab, w.empty_prob))
            }
        }
    }

    pub fn label_policy(&self) -> LabelPolicy {
        match self.model.label_policy {
            LabelPolicyCfg::Single => LabelPolicy::Single,
            LabelPolicyCfg::FullCaption => LabelPolicy::FullCaption,
        }
    }

    pub fn schedule(&self) -> SamplerSchedule {
        let s = &self.schedule;
        SamplerSchedule {
            mode: match s.mode {
                ModeCfg::Masked => SamplingMode::Masked,
                ModeCfg::Autoregressive => SamplingMode::Autoregressive,
            },
            tokens_per_step: s.tokens_per_step,
            order_policy: match s.order_policy {
                OrderCfg::RandomFixedSeed => OrderPolicy::RandomFixedSeed,
                OrderCfg::MaxConfidence => OrderPolicy::MaxConfidence,
            },
            rng_seed: self.seed,
            temperature: s.temperature,
        }
    }

    pub fn prompting(&self) -> Prompting {
        match self.eval.prompting {
            PromptingCfg::Composed => Prompting::Composed,
            PromptingCfg::JointPrompt => Prompting::JointPrompt,
        }
    }

    /// Conditions and weights; validated configs never fail here.
    pub fn conditions(&self) -> (Vec<ConditionSpec>, WeightVector) {
        let conds = self.conditions.iter().map(|c| c.spec.parse().expect("validated")).collect();
        let w = WeightVector::new(self.conditions.iter().map(|c| c.weight).collect()).expect("validated");
        (conds, w)
    }
}

impl ConfigError {
    fn with_span(mut self, text: &str, span: Option<std::ops::Range<usize>>) -> Self {
        if let Some(span) = span {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            self.msg = format!("line {line}: {}", self.msg.trim_end());
        }
        self
    }
}
