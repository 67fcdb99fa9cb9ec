//! Enumerable toy worlds.
//!
//! A world is a distribution over small token grids together with rule-based
//! conditions. Scene worlds place a few attributed objects on a grid and
//! render one token per cell; factorized worlds make every cell independent
//! given each condition, which is exactly the setting where step-wise
//! composition of per-position marginals recovers the true multi-condition
//! posterior.

mod condition;
mod count;
mod exact;
mod joint;

pub use condition::{check_conditions, Attribute, ConditionSpec, Relation, TokenLayout};
pub use count::{fit_count_model, fit_count_model_with_policy, ContextKey, CountModel};
pub use exact::ExactModel;
pub use joint::{
    build_factorized_world, enumerate_posterior, ConditionPosterior, FactorizedCondition,
    FactorizedWorldSpec, LabelPolicy, Posterior, SceneWorldSpec, WorldJoint, WorldKind, WorldSpec,
    STATE_CAP,
};
