use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::condition::ConditionSpec;
use super::joint::WorldJoint;
use crate::compose::LogProbVector;
use crate::error::{Error, Result};
use crate::sampler::{ConditionalModel, MaskedState};

/// Exact per-position predictions `P(z0_p | z_t, c)` of a world.
///
/// For scene worlds the explicit support is filtered to the grids that agree
/// with every unmasked slot (and satisfy the condition) and the remaining
/// mass is summed per masked position. Factorized worlds have independent
/// cells, so the prediction for a masked cell is its (conditioned) table as
/// long as the unmasked slots keep positive mass.
#[derive(Debug, Clone, Copy)]
pub struct ExactModel<'w> {
    world: &'w WorldJoint,
}

impl<'w> ExactModel<'w> {
    pub fn new(world: &'w WorldJoint) -> Self {
        Self { world }
    }

    pub fn world(&self) -> &'w WorldJoint {
        self.world
    }

    fn check_len(&self, state: &MaskedState) -> Result<()> {
        if state.len() != self.world.len() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} slots, world has {}",
                state.len(),
                self.world.len()
            )));
        }
        Ok(())
    }

    fn predict_sparse(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>> {
        let layout = self.world.layout();
        let vocab = self.world.vocab();
        let masked: Vec<usize> = state.masked_positions().collect();
        let mut marg = vec![vec![0.0; vocab]; masked.len()];
        let mut total = 0.0;
        let support = self.world.support().expect("scene world");
        for (grid, p) in support {
            let consistent = state
                .slots()
                .iter()
                .zip(grid)
                .all(|(s, &t)| s.is_none_or(|s| s == t));
            if !consistent || condition.is_some_and(|c| !c.holds(grid, layout)) {
                continue;
            }
            total += p;
            for (row, &pos) in marg.iter_mut().zip(&masked) {
                row[grid[pos] as usize] += p;
            }
        }
        if !(total > 0.0) {
            return Err(Error::AllMassZero);
        }
        marg.iter().map(|row| LogProbVector::from_probs(row)).collect()
    }

    fn predict_factorized(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>> {
        let tables = match self.world.factorized_cell_tables(condition.map(core::slice::from_ref).unwrap_or(&[])) {
            Err(Error::EmptyIntersection) => return Err(Error::AllMassZero),
            other => other?,
        };
        for (slot, table) in state.slots().iter().zip(&tables) {
            if let Some(t) = slot {
                if !(table[*t as usize] > 0.0) {
                    return Err(Error::AllMassZero);
                }
            }
        }
        state.masked_positions().map(|p| LogProbVector::from_probs(&tables[p])).collect()
    }
}

impl ConditionalModel for ExactModel<'_> {
    fn vocab_size(&self) -> usize {
        self.world.vocab()
    }

    /// Fails with `AllMassZero` when no grid of the world agrees with the
    /// unmasked slots under the condition.
    fn predict(&self, state: &MaskedState, condition: Option<&ConditionSpec>) -> Result<Vec<LogProbVector>> {
        self.check_len(state)?;
        if let Some(c) = condition {
            self.world.validate_condition(c)?;
        }
        if state.slots().iter().flatten().any(|&t| t as usize >= self.world.vocab()) {
            return Err(Error::AllMassZero);
        }
        if self.world.support().is_some() {
            self.predict_sparse(state, condition)
        } else {
            self.predict_factorized(state, condition)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{enumerate_posterior, FactorizedWorldSpec, SceneWorldSpec, WorldSpec};
    use crate::Token;

    fn scene() -> WorldJoint {
        WorldJoint::build(WorldSpec::Scene(SceneWorldSpec::positional(2, 2, 1, 2, 2))).unwrap()
    }

    /// Brute-force single-slot conditional: sum over every grid of the full
    /// `vocab^len` space that matches the fixed slots.
    fn brute_force_slot(world: &WorldJoint, fixed: &[Option<Token>], pos: usize, cond: Option<&ConditionSpec>) -> Vec<f64> {
        let vocab = world.vocab();
        let len = world.len();
        let mut out = vec![0.0; vocab];
        for code in 0..(vocab as u64).pow(len as u32) {
            let mut c = code;
            let grid: Vec<Token> = (0..len)
                .map(|_| {
                    let t = (c % vocab as u64) as Token;
                    c /= vocab as u64;
                    t
                })
                .collect();
            if fixed.iter().zip(&grid).any(|(f, g)| f.is_some_and(|f| f != *g)) {
                continue;
            }
            let p = enumerate_posterior(world, cond.map(core::slice::from_ref).unwrap_or(&[]))
                .unwrap()
                .prob(&grid);
            out[grid[pos] as usize] += p;
        }
        let s: f64 = out.iter().sum();
        out.iter().map(|x| x / s).collect()
    }

    #[test]
    fn fully_masked_unconditional_is_prior_marginal() {
        let w = scene();
        let model = ExactModel::new(&w);
        let pred = model.predict(&MaskedState::fully_masked(4), None).unwrap();
        let marg = enumerate_posterior(&w, &[]).unwrap().marginals();
        for (d, m) in pred.iter().zip(&marg) {
            for (a, b) in d.probs().iter().zip(m) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_but_one_unmasked_matches_brute_force() {
        let w = scene();
        let model = ExactModel::new(&w);
        let cond = ConditionSpec::at(1, 0);
        let slots = vec![Some(2), None, Some(0), Some(0)];
        let got = model.predict(&MaskedState::from_slots(slots.clone()), Some(&cond)).unwrap();
        let want = brute_force_slot(&w, &slots, 1, Some(&cond));
        for (a, b) in got[0].probs().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(got[0].probs()[0] < 1e-300);
    }

    #[test]
    fn factorized_model_matches_brute_force() {
        let mut spec = FactorizedWorldSpec::object_presence(2, 2, 3, 0.3);
        spec.prior[3] = vec![0.2, 0.5, 0.3];
        spec.conditions[3].cells[0].1 = vec![0.0, 0.9, 0.1];
        let w = WorldJoint::build(WorldSpec::Factorized(spec)).unwrap();
        let model = ExactModel::new(&w);
        let cond = ConditionSpec::at(1, 1);
        let slots = vec![Some(1), None, Some(0), None];
        let got = model.predict(&MaskedState::from_slots(slots.clone()), Some(&cond)).unwrap();
        for (slot, pos) in [1usize, 3].into_iter().enumerate() {
            let want = brute_force_slot(&w, &slots, pos, Some(&cond));
            for (a, b) in got[slot].probs().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incompatible_condition_surfaces_all_mass_zero() {
        let w = scene();
        let model = ExactModel::new(&w);
        let state = MaskedState::from_slots(vec![Some(0), None, None, None]);
        assert_eq!(model.predict(&state, Some(&ConditionSpec::at(0, 0))), Err(Error::AllMassZero));

        let f = WorldJoint::build(WorldSpec::Factorized(FactorizedWorldSpec::object_presence(2, 1, 3, 0.5))).unwrap();
        let model = ExactModel::new(&f);
        let state = MaskedState::from_slots(vec![Some(0), None]);
        assert_eq!(model.predict(&state, Some(&ConditionSpec::at(0, 0))), Err(Error::AllMassZero));
    }

    #[test]
    fn wrong_length_state_rejected() {
        let w = scene();
        let model = ExactModel::new(&w);
        assert!(matches!(
            model.predict(&MaskedState::fully_masked(3), None),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
