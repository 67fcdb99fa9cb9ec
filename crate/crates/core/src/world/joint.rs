use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::condition::{Attribute, ConditionSpec, Relation, TokenLayout};
use crate::error::{Error, Result};
use crate::rng::sample_weighted;
use crate::Token;

/// Upper bound on `vocab^len` for any constructed world.
pub const STATE_CAP: u128 = 10_000_000;

const TABLE_TOL: f64 = 1e-9;

/// Objects with uniformly drawn attributes placed on distinct cells.
///
/// The object count is uniform on `min_objects..=max_objects`, the occupied
/// cells are a uniform subset of that size and each object's shape and color
/// are uniform and independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneWorldSpec {
    pub grid_w: usize,
    pub grid_h: usize,
    pub n_shapes: usize,
    pub n_colors: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Relational worlds label and evaluate with relation conditions.
    pub relational: bool,
}

impl SceneWorldSpec {
    pub fn positional(grid_w: usize, grid_h: usize, n_shapes: usize, n_colors: usize, max_objects: usize) -> Self {
        Self { grid_w, grid_h, n_shapes, n_colors, min_objects: 0, max_objects, relational: false }
    }
}

/// Per-cell table overrides that define one condition of a factorized world.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedCondition {
    pub spec: ConditionSpec,
    /// `(cell index, distribution over tokens)`; cells not listed keep the
    /// prior table.
    pub cells: Vec<(usize, Vec<f64>)>,
}

/// A world whose cells are independent under the prior and under every
/// single condition.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedWorldSpec {
    pub grid_w: usize,
    pub grid_h: usize,
    pub vocab: usize,
    /// One distribution over tokens per cell.
    pub prior: Vec<Vec<f64>>,
    pub conditions: Vec<FactorizedCondition>,
}

impl FactorizedWorldSpec {
    /// Every cell is empty (token 0) with probability `empty_prob`, otherwise
    /// uniform over the object tokens. Condition `object_at_cell(c, r)`
    /// replaces that cell's table with the uniform object distribution.
    pub fn object_presence(grid_w: usize, grid_h: usize, vocab: usize, empty_prob: f64) -> Self {
        let objects = vocab.saturating_sub(1).max(1) as f64;
        let mut prior_cell = vec![(1.0 - empty_prob) / objects; vocab];
        if let Some(first) = prior_cell.first_mut() {
            *first = empty_prob;
        }
        let mut present = vec![1.0 / objects; vocab];
        if let Some(first) = present.first_mut() {
            *first = 0.0;
        }
        let conditions = (0..grid_h)
            .flat_map(|r| (0..grid_w).map(move |c| (c, r)))
            .map(|(c, r)| FactorizedCondition {
                spec: ConditionSpec::at(c as u8, r as u8),
                cells: vec![(r * grid_w + c, present.clone())],
            })
            .collect();
        Self { grid_w, grid_h, vocab, prior: vec![prior_cell; grid_w * grid_h], conditions }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldSpec {
    Scene(SceneWorldSpec),
    Factorized(FactorizedWorldSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldKind {
    Positional,
    Relational,
    Factorized,
}

/// How training labels are drawn for a sampled grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// One condition chosen uniformly among those the grid satisfies.
    #[default]
    Single,
    /// All evaluation-kind conditions the grid satisfies, as one opaque
    /// [`ConditionSpec::Joint`] id.
    FullCaption,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Explicit support: states flattened `len` tokens at a time.
    Sparse { states: Vec<Token>, probs: Vec<f64> },
    Factorized,
}

/// An enumerable joint distribution over token grids plus its conditions.
#[derive(Debug, Clone)]
pub struct WorldJoint {
    spec: WorldSpec,
    layout: TokenLayout,
    repr: Repr,
}

fn state_space(vocab: usize, len: usize) -> Result<u128> {
    let states = (vocab as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if states > STATE_CAP {
        return Err(Error::StateSpaceTooLarge { states, cap: STATE_CAP });
    }
    Ok(states)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn check_table(table: &[f64], vocab: usize, what: &str) -> Result<()> {
    if table.len() != vocab {
        return Err(Error::InvalidTable(format!("{what} has {} entries, expected {vocab}", table.len())));
    }
    if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidTable(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = table.iter().sum();
    if (sum - 1.0).abs() > TABLE_TOL {
        return Err(Error::InvalidTable(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Builds and validates a factorized world.
pub fn build_factorized_world(spec: FactorizedWorldSpec) -> Result<WorldJoint> {
    WorldJoint::build(WorldSpec::Factorized(spec))
}

impl WorldJoint {
    pub fn build(spec: WorldSpec) -> Result<Self> {
        match &spec {
            WorldSpec::Scene(s) => {
                let layout = TokenLayout::new(s.grid_w, s.grid_h, s.n_shapes, s.n_colors)?;
                state_space(layout.vocab(), layout.len())?;
                if s.min_objects > s.max_objects || s.max_objects > layout.len() {
                    return Err(Error::InvalidParameter(format!(
                        "object count range {}..={} does not fit {} cells",
                        s.min_objects,
                        s.max_objects,
                        layout.len()
                    )));
                }
                let (states, probs) = enumerate_scenes(s, &layout);
                Ok(Self { spec, layout, repr: Repr::Sparse { states, probs } })
            }
            WorldSpec::Factorized(f) => {
                let layout = TokenLayout::plain(f.grid_w, f.grid_h, f.vocab)?;
                state_space(f.vocab, layout.len())?;
                validate_factorized(f, &layout)?;
                Ok(Self { spec, layout, repr: Repr::Factorized })
            }
        }
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn layout(&self) -> &TokenLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn vocab(&self) -> usize {
        self.layout.vocab()
    }

    pub fn kind(&self) -> WorldKind {
        match &self.spec {
            WorldSpec::Scene(s) if s.relational => WorldKind::Relational,
            WorldSpec::Scene(_) => WorldKind::Positional,
            WorldSpec::Factorized(_) => WorldKind::Factorized,
        }
    }

    pub fn allows_relations(&self) -> bool {
        self.kind() == WorldKind::Relational
    }

    /// Number of grids in the full state space, `vocab^len`.
    pub fn state_count(&self) -> u128 {
        (self.vocab() as u128).pow(self.len() as u32)
    }

    /// Explicit support for scene worlds, `None` for factorized worlds.
    pub fn support(&self) -> Option<impl Iterator<Item = (&[Token], f64)> + '_> {
        match &self.repr {
            Repr::Sparse { states, probs } => Some(states.chunks_exact(self.len()).zip(probs.iter().copied())),
            Repr::Factorized => None,
        }
    }

    pub(crate) fn factorized_spec(&self) -> Option<&FactorizedWorldSpec> {
        match &self.spec {
            WorldSpec::Factorized(f) => Some(f),
            WorldSpec::Scene(_) => None,
        }
    }

    /// Factorized worlds accept exactly the conditions they define.
    pub fn validate_condition(&self, cond: &ConditionSpec) -> Result<()> {
        match self.factorized_spec() {
            Some(f) => self.factorized_condition_cells(f, cond).map(|_| ()),
            None => cond.validate(&self.layout, self.allows_relations()),
        }
    }

    /// Prior probability of a full grid.
    pub fn prior_prob(&self, grid: &[Token]) -> f64 {
        match &self.repr {
            Repr::Sparse { states, probs } => states
                .chunks_exact(self.len())
                .zip(probs)
                .find(|(s, _)| *s == grid)
                .map_or(0.0, |(_, p)| *p),
            Repr::Factorized => {
                let f = self.factorized_spec().expect("factorized repr");
                grid.iter().enumerate().map(|(p, &t)| f.prior[p][t as usize]).product()
            }
        }
    }

    /// Collects the `(cell, table)` overrides of a condition, flattening
    /// joints.
    fn factorized_condition_cells<'a>(
        &self,
        f: &'a FactorizedWorldSpec,
        cond: &ConditionSpec,
    ) -> Result<Vec<&'a (usize, Vec<f64>)>> {
        match cond {
            ConditionSpec::Joint(members) => {
                let mut out = Vec::new();
                for m in members {
                    out.extend(self.factorized_condition_cells(f, m)?);
                }
                Ok(out)
            }
            _ => f
                .conditions
                .iter()
                .find(|c| &c.spec == cond)
                .map(|c| c.cells.iter().collect())
                .ok_or_else(|| Error::UnknownCondition(format!("{cond}"))),
        }
    }

    /// Normalized per-cell tables of the product-of-experts posterior of a
    /// factorized world: at each cell the prior times every condition's
    /// likelihood ratio.
    pub(crate) fn factorized_cell_tables(&self, conds: &[ConditionSpec]) -> Result<Vec<Vec<f64>>> {
        let f = self.factorized_spec().ok_or_else(|| Error::InvalidParameter("not a factorized world".into()))?;
        let mut tables = f.prior.clone();
        for cond in conds {
            for (cell, table) in self.factorized_condition_cells(f, cond)? {
                for (k, w) in tables[*cell].iter_mut().enumerate() {
                    let prior = f.prior[*cell][k];
                    *w = if prior > 0.0 { *w * table[k] / prior } else { 0.0 };
                }
            }
        }
        for t in &mut tables {
            let sum: f64 = t.iter().sum();
            if !(sum > 0.0) {
                return Err(Error::EmptyIntersection);
            }
            t.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(tables)
    }

    /// Conditioned distribution in the cheapest exact form: the filtered
    /// support for scene worlds, per-cell tables for factorized worlds.
    pub fn condition_posterior(&self, conds: &[ConditionSpec]) -> Result<ConditionPosterior> {
        match &self.repr {
            Repr::Sparse { .. } => Ok(ConditionPosterior::Enumerated(enumerate_posterior(self, conds)?)),
            Repr::Factorized => Ok(ConditionPosterior::Cells(self.factorized_cell_tables(conds)?)),
        }
    }

    pub fn is_satisfiable(&self, conds: &[ConditionSpec]) -> Result<bool> {
        match self.condition_posterior(conds) {
            Ok(_) => Ok(true),
            Err(Error::EmptyIntersection) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Conditions used to build evaluation prompts: every cell position for
    /// positional worlds, every fully specified attribute pair and relation
    /// for relational worlds, and the defined conditions of a factorized
    /// world.
    pub fn eval_vocabulary(&self) -> Vec<ConditionSpec> {
        match &self.spec {
            WorldSpec::Scene(s) if s.relational => {
                let attrs = full_attributes(&self.layout);
                let mut out = Vec::new();
                for &first in &attrs {
                    for &second in &attrs {
                        for relation in [Relation::LeftOf, Relation::Above] {
                            out.push(ConditionSpec::Relation { first, relation, second });
                        }
                    }
                }
                out
            }
            WorldSpec::Scene(_) => (0..self.layout.grid_h)
                .flat_map(|r| (0..self.layout.grid_w).map(move |c| ConditionSpec::at(c as u8, r as u8)))
                .collect(),
            WorldSpec::Factorized(f) => f.conditions.iter().map(|c| c.spec.clone()).collect(),
        }
    }

    /// Draws a grid from the prior.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Token> {
        match &self.spec {
            WorldSpec::Scene(s) => self.sample_scene(s, rng),
            WorldSpec::Factorized(f) => sample_cells(&f.prior, rng),
        }
    }

    fn sample_scene<R: Rng + ?Sized>(&self, s: &SceneWorldSpec, rng: &mut R) -> Vec<Token> {
        let len = self.len();
        let m = rng.gen_range(s.min_objects..=s.max_objects);
        let mut cells: Vec<usize> = (0..len).collect();
        for i in 0..m {
            let j = rng.gen_range(i..len);
            cells.swap(i, j);
        }
        let mut grid = vec![0; len];
        for &cell in &cells[..m] {
            let shape = rng.gen_range(0..s.n_shapes);
            let color = rng.gen_range(0..s.n_colors);
            grid[cell] = self.layout.object_token(shape, color);
        }
        grid
    }

    /// Draws a training pair. Scene worlds draw the grid from the prior and
    /// label it from the conditions it satisfies (no label for an empty
    /// scene); factorized worlds pick a condition uniformly and draw the
    /// grid from its tables.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, policy: LabelPolicy, rng: &mut R) -> (Vec<Token>, Option<ConditionSpec>) {
        match &self.spec {
            WorldSpec::Scene(s) => {
                let grid = self.sample_scene(s, rng);
                let label = match policy {
                    LabelPolicy::Single => {
                        let candidates = scene_labels(&grid, &self.layout, s.relational);
                        if candidates.is_empty() {
                            None
                        } else {
                            Some(candidates[rng.gen_range(0..candidates.len())].clone())
                        }
                    }
                    LabelPolicy::FullCaption => Some(ConditionSpec::joint(caption(&grid, &self.layout, s.relational))),
                };
                (grid, label)
            }
            WorldSpec::Factorized(f) => {
                if f.conditions.is_empty() {
                    return (sample_cells(&f.prior, rng), None);
                }
                let c = &f.conditions[rng.gen_range(0..f.conditions.len())];
                let tables = self
                    .factorized_cell_tables(core::slice::from_ref(&c.spec))
                    .expect("validated factorized condition");
                let label = match policy {
                    LabelPolicy::Single => c.spec.clone(),
                    LabelPolicy::FullCaption => ConditionSpec::joint(vec![c.spec.clone()]),
                };
                (sample_cells(&tables, rng), Some(label))
            }
        }
    }
}

fn sample_cells<R: Rng + ?Sized>(tables: &[Vec<f64>], rng: &mut R) -> Vec<Token> {
    tables
        .iter()
        .map(|t| sample_weighted(t, rng).expect("normalized table") as Token)
        .collect()
}

fn full_attributes(layout: &TokenLayout) -> Vec<Attribute> {
    (0..layout.n_shapes)
        .flat_map(|s| (0..layout.n_colors).map(move |c| Attribute::new(s as u8, c as u8)))
        .collect()
}

/// Objects of a grid as `(cell, attribute)`.
fn objects(grid: &[Token], layout: &TokenLayout) -> Vec<(usize, Attribute)> {
    grid.iter()
        .enumerate()
        .filter_map(|(i, &t)| layout.object_of(t).map(|(s, c)| (i, Attribute::new(s as u8, c as u8))))
        .collect()
}

fn relations_of(objs: &[(usize, Attribute)], layout: &TokenLayout) -> BTreeSet<ConditionSpec> {
    let mut out = BTreeSet::new();
    for &(i, a) in objs {
        for &(j, b) in objs {
            if i == j {
                continue;
            }
            let (ca, ra) = layout.cell_coords(i);
            let (cb, rb) = layout.cell_coords(j);
            if ca < cb {
                out.insert(ConditionSpec::Relation { first: a, relation: Relation::LeftOf, second: b });
            }
            if ra < rb {
                out.insert(ConditionSpec::Relation { first: a, relation: Relation::Above, second: b });
            }
        }
    }
    out
}

/// Label candidates of a scene, deduplicated and sorted.
fn scene_labels(grid: &[Token], layout: &TokenLayout, relational: bool) -> Vec<ConditionSpec> {
    let objs = objects(grid, layout);
    let mut out: BTreeSet<ConditionSpec> = BTreeSet::new();
    for &(cell, attr) in &objs {
        let (c, r) = layout.cell_coords(cell);
        out.insert(ConditionSpec::at(c as u8, r as u8));
        out.insert(ConditionSpec::AttributePresent(attr));
    }
    if relational {
        out.extend(relations_of(&objs, layout));
    }
    out.into_iter().collect()
}

/// Every evaluation-kind condition a scene satisfies.
fn caption(grid: &[Token], layout: &TokenLayout, relational: bool) -> Vec<ConditionSpec> {
    let objs = objects(grid, layout);
    if relational {
        relations_of(&objs, layout).into_iter().collect()
    } else {
        objs.iter()
            .map(|&(cell, _)| {
                let (c, r) = layout.cell_coords(cell);
                ConditionSpec::at(c as u8, r as u8)
            })
            .collect()
    }
}

fn enumerate_scenes(s: &SceneWorldSpec, layout: &TokenLayout) -> (Vec<Token>, Vec<f64>) {
    let len = layout.len();
    let attrs = s.n_shapes * s.n_colors;
    let counts = (s.max_objects - s.min_objects + 1) as f64;
    let mut states = Vec::new();
    let mut probs = Vec::new();
    for mask in 0u32..(1u32 << len) {
        let m = mask.count_ones() as usize;
        if m < s.min_objects || m > s.max_objects {
            continue;
        }
        let cells: Vec<usize> = (0..len).filter(|i| mask & (1 << i) != 0).collect();
        let p = 1.0 / counts / binomial(len, m) / libm::pow(attrs as f64, m as f64);
        let combos = attrs.pow(m as u32);
        for combo in 0..combos {
            let mut grid = vec![0 as Token; len];
            let mut rest = combo;
            for &cell in &cells {
                grid[cell] = (1 + rest % attrs) as Token;
                rest /= attrs;
            }
            states.extend_from_slice(&grid);
            probs.push(p);
        }
    }
    (states, probs)
}

fn validate_factorized(f: &FactorizedWorldSpec, layout: &TokenLayout) -> Result<()> {
    let len = layout.len();
    if f.prior.len() != len {
        return Err(Error::InvalidTable(format!("{} prior tables for {len} cells", f.prior.len())));
    }
    for (p, t) in f.prior.iter().enumerate() {
        check_table(t, f.vocab, &format!("prior table of cell {p}"))?;
    }
    let mut seen = BTreeSet::new();
    for c in &f.conditions {
        if matches!(c.spec, ConditionSpec::Joint(_)) {
            return Err(Error::InvalidTable(format!("{} cannot key a factorized condition", c.spec)));
        }
        c.spec.validate(layout, true)?;
        if !seen.insert(c.spec.clone()) {
            return Err(Error::InvalidTable(format!("condition {} defined twice", c.spec)));
        }
        let mut cells = BTreeSet::new();
        for (cell, table) in &c.cells {
            if *cell >= len {
                return Err(Error::InvalidTable(format!("{} references cell {cell} of {len}", c.spec)));
            }
            if !cells.insert(*cell) {
                return Err(Error::InvalidTable(format!("{} lists cell {cell} twice", c.spec)));
            }
            check_table(table, f.vocab, &format!("table of {} at cell {cell}", c.spec))?;
            if table.iter().zip(&f.prior[*cell]).any(|(t, q)| *t > 0.0 && *q == 0.0) {
                return Err(Error::InvalidTable(format!(
                    "{} puts mass where the prior of cell {cell} has none",
                    c.spec
                )));
            }
        }
    }
    Ok(())
}

/// Exact distribution over grids, stored sparsely as base-`vocab` codes
/// (cell 0 is the least significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    len: usize,
    vocab: usize,
    entries: Vec<(u64, f64)>,
}

impl Posterior {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn encode(&self, grid: &[Token]) -> u64 {
        grid.iter().rev().fold(0u64, |acc, &t| acc * self.vocab as u64 + t as u64)
    }

    pub fn decode(&self, mut code: u64) -> Vec<Token> {
        let mut grid = Vec::with_capacity(self.len);
        for _ in 0..self.len {
            grid.push((code % self.vocab as u64) as Token);
            code /= self.vocab as u64;
        }
        grid
    }

    /// `(code, probability)` pairs with positive mass, sorted by code.
    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn prob(&self, grid: &[Token]) -> f64 {
        let code = self.encode(grid);
        self.entries
            .binary_search_by_key(&code, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Per-position marginals, `len x vocab`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.vocab]; self.len];
        for &(code, p) in &self.entries {
            let mut c = code;
            for row in out.iter_mut() {
                row[(c % self.vocab as u64) as usize] += p;
                c /= self.vocab as u64;
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Token> {
        let mut target = rng.gen::<f64>();
        for &(code, p) in &self.entries {
            if target < p {
                return self.decode(code);
            }
            target -= p;
        }
        self.decode(self.entries.last().expect("non-empty posterior").0)
    }
}

/// Exact conditioned distribution in whichever form the world supports.
#[derive(Debug, Clone)]
pub enum ConditionPosterior {
    Enumerated(Posterior),
    /// Independent per-cell tables.
    Cells(Vec<Vec<f64>>),
}

impl ConditionPosterior {
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        match self {
            Self::Enumerated(p) => p.marginals(),
            Self::Cells(t) => t.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Token> {
        match self {
            Self::Enumerated(p) => p.sample(rng),
            Self::Cells(t) => sample_cells(t, rng),
        }
    }
}

/// Exact `P(grid | all conditions)` by brute-force enumeration.
///
/// Every grid of the state space (or of the explicit support for scene
/// worlds) is weighted by its prior mass times each condition's likelihood
/// (an indicator for rule-based conditions, a product of per-cell table
/// ratios for factorized conditions) and the result is renormalized.
pub fn enumerate_posterior(world: &WorldJoint, conds: &[ConditionSpec]) -> Result<Posterior> {
    for c in conds {
        world.validate_condition(c)?;
    }
    let len = world.len();
    let vocab = world.vocab();
    let mut entries = Vec::new();
    match &world.repr {
        Repr::Sparse { states, probs } => {
            let tmp = Posterior { len, vocab, entries: Vec::new() };
            for (grid, &p) in states.chunks_exact(len).zip(probs) {
                if conds.iter().all(|c| c.holds(grid, &world.layout)) {
                    entries.push((tmp.encode(grid), p));
                }
            }
        }
        Repr::Factorized => {
            let f = world.factorized_spec().expect("factorized repr");
            let mut overrides: Vec<Vec<&(usize, Vec<f64>)>> = Vec::with_capacity(conds.len());
            for c in conds {
                overrides.push(world.factorized_condition_cells(f, c)?);
            }
            let total = world.state_count() as u64;
            let mut digits = vec![0usize; len];
            for code in 0..total {
                let mut p: f64 = digits.iter().enumerate().map(|(cell, &t)| f.prior[cell][t]).product();
                for cond_cells in &overrides {
                    for (cell, table) in cond_cells {
                        let t = digits[*cell];
                        let q = f.prior[*cell][t];
                        p *= if q > 0.0 { table[t] / q } else { 0.0 };
                    }
                }
                if p > 0.0 {
                    entries.push((code, p));
                }
                for d in digits.iter_mut() {
                    *d += 1;
                    if *d < vocab {
                        break;
                    }
                    *d = 0;
                }
            }
        }
    }
    let total: f64 = entries.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyIntersection);
    }
    entries.sort_unstable_by_key(|e| e.0);
    entries.iter_mut().for_each(|e| e.1 /= total);
    Ok(Posterior { len, vocab, entries })
}
