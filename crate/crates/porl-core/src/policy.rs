//! Memory-window policies, mixtures, roll-in mixing, and episode sampling.

use crate::error::{Error, Result};
use crate::pomdp::{
    ExtendedPomdp, MemoryIndexer, MemoryLayout, MemoryState, Trajectory, DEFAULT_ENUM_CAP,
};
use crate::rng::RandomStream;
use ndarray::Array2;
use std::sync::Arc;

/// Per-step action rule over the memory states of that step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// Uniform over the real actions.
    Uniform,
    /// Deterministic table indexed by the step's memory-state index.
    Greedy(Vec<u16>),
    /// Distribution table, rows indexed by memory state, columns by action.
    Stochastic(Array2<f64>),
}

/// How a policy acts at one `(step, memory state)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionChoice {
    Fixed(u16),
    /// Weights over the real actions; must sum to 1.
    Weights(Vec<f64>),
}

/// An L-memory policy: one [`StepRule`] per real step. Rules are reference
/// counted so roll-in mixes and iterate snapshots stay cheap.
#[derive(Debug, Clone)]
pub struct LMemoryPolicy {
    layout: MemoryLayout,
    steps: Vec<Arc<StepRule>>,
    indexers: Arc<Vec<MemoryIndexer>>,
}

fn build_indexers(layout: &MemoryLayout) -> Result<Vec<MemoryIndexer>> {
    (0..layout.real_horizon)
        .map(|r| layout.indexer_at_real(r, DEFAULT_ENUM_CAP))
        .collect()
}

impl LMemoryPolicy {
    /// Uniform-random policy at every step.
    pub fn uniform(layout: MemoryLayout) -> Result<Self> {
        let steps = vec![Arc::new(StepRule::Uniform); layout.real_horizon];
        Ok(LMemoryPolicy {
            indexers: Arc::new(build_indexers(&layout)?),
            layout,
            steps,
        })
    }

    /// Policy from explicit per-step rules; validates table shapes against
    /// the layout's per-step memory-state counts.
    pub fn from_rules(layout: MemoryLayout, steps: Vec<StepRule>) -> Result<Self> {
        if steps.len() != layout.real_horizon {
            return Err(Error::InvalidModel(format!(
                "policy has {} step rules for horizon {}",
                steps.len(),
                layout.real_horizon
            )));
        }
        let indexers = build_indexers(&layout)?;
        let num_actions = layout.num_real_actions;
        for (r, rule) in steps.iter().enumerate() {
            let expected = indexers[r].len();
            match rule {
                StepRule::Uniform => {}
                StepRule::Greedy(table) => {
                    if table.len() != expected {
                        return Err(Error::InvalidModel(format!(
                            "greedy table at step {r}: {} entries, expected {expected}",
                            table.len()
                        )));
                    }
                    if table.iter().any(|&a| a >= num_actions) {
                        return Err(Error::InvalidModel(format!(
                            "greedy table at step {r} references an out-of-range action"
                        )));
                    }
                }
                StepRule::Stochastic(table) => {
                    if table.nrows() != expected || table.ncols() != num_actions as usize {
                        return Err(Error::InvalidModel(format!(
                            "stochastic table shape mismatch at step {r}"
                        )));
                    }
                    for (z, row) in table.rows().into_iter().enumerate() {
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&w| w < 0.0) {
                            return Err(Error::InvalidModel(format!(
                                "stochastic row {z} at step {r} sums to {sum}"
                            )));
                        }
                    }
                }
            }
        }
        let steps = steps.into_iter().map(Arc::new).collect();
        Ok(LMemoryPolicy {
            indexers: Arc::new(indexers),
            layout,
            steps,
        })
    }

    pub fn layout(&self) -> MemoryLayout {
        self.layout
    }

    pub fn rules(&self) -> &[Arc<StepRule>] {
        &self.steps
    }

    pub fn indexer(&self, real_step: usize) -> &MemoryIndexer {
        &self.indexers[real_step]
    }

    fn memory_index(&self, real_step: usize, z: &MemoryState) -> Result<usize> {
        self.indexers[real_step].index_of(z).ok_or_else(|| {
            Error::InvalidModel(format!(
                "policy undefined at step {real_step} for window {z:?}"
            ))
        })
    }

    /// How the policy acts at `(real_step, z)`.
    pub fn choice(&self, real_step: usize, z: &MemoryState) -> Result<ActionChoice> {
        match self.steps[real_step].as_ref() {
            StepRule::Uniform => {
                let a = self.layout.num_real_actions as usize;
                Ok(ActionChoice::Weights(vec![1.0 / a as f64; a]))
            }
            StepRule::Greedy(table) => {
                Ok(ActionChoice::Fixed(table[self.memory_index(real_step, z)?]))
            }
            StepRule::Stochastic(table) => {
                let idx = self.memory_index(real_step, z)?;
                Ok(ActionChoice::Weights(table.row(idx).to_vec()))
            }
        }
    }

    /// Sample an action at `(real_step, z)`.
    pub fn action(&self, real_step: usize, z: &MemoryState, rng: &mut RandomStream) -> Result<u16> {
        match self.steps[real_step].as_ref() {
            StepRule::Uniform => Ok(rng.index(self.layout.num_real_actions as usize) as u16),
            StepRule::Greedy(table) => Ok(table[self.memory_index(real_step, z)?]),
            StepRule::Stochastic(table) => {
                let idx = self.memory_index(real_step, z)?;
                Ok(rng.weighted(table.row(idx).as_slice().expect("contiguous row")) as u16)
            }
        }
    }

    /// Roll-in mix: follow this policy up to step `target − n` and act
    /// uniformly from step `target − n + 1` on (1-based step arithmetic;
    /// `target_real_step` is 0-based).
    pub fn rollin_mix(&self, n: usize, target_real_step: usize) -> LMemoryPolicy {
        let uniform_from = (target_real_step + 1).saturating_sub(n);
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(r, rule)| {
                if r >= uniform_from {
                    Arc::new(StepRule::Uniform)
                } else {
                    Arc::clone(rule)
                }
            })
            .collect();
        LMemoryPolicy {
            layout: self.layout,
            steps,
            indexers: Arc::clone(&self.indexers),
        }
    }
}

/// Uniform mixture over policies, drawn once per episode.
#[derive(Debug, Clone)]
pub struct MixturePolicy {
    members: Vec<LMemoryPolicy>,
}

impl MixturePolicy {
    pub fn new(members: Vec<LMemoryPolicy>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidModel("mixture policy needs at least one member".into()));
        }
        Ok(MixturePolicy { members })
    }

    pub fn members(&self) -> &[LMemoryPolicy] {
        &self.members
    }

    pub fn draw_member(&self, rng: &mut RandomStream) -> &LMemoryPolicy {
        &self.members[rng.index(self.members.len())]
    }
}

/// Borrowed handle over the two policy kinds the crate works with.
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a> {
    LMemory(&'a LMemoryPolicy),
    Mixture(&'a MixturePolicy),
}

impl<'a> From<&'a LMemoryPolicy> for PolicyRef<'a> {
    fn from(p: &'a LMemoryPolicy) -> Self {
        PolicyRef::LMemory(p)
    }
}

impl<'a> From<&'a MixturePolicy> for PolicyRef<'a> {
    fn from(p: &'a MixturePolicy) -> Self {
        PolicyRef::Mixture(p)
    }
}

/// Roll one episode. Mixture members are drawn up front; prefix steps force
/// the dummy action and never consult the policy.
pub fn sample_episode<'a>(
    env: &ExtendedPomdp,
    policy: impl Into<PolicyRef<'a>>,
    rng: &mut RandomStream,
) -> Result<Trajectory> {
    let policy = match policy.into() {
        PolicyRef::LMemory(p) => p,
        PolicyRef::Mixture(m) => m.draw_member(rng),
    };
    let layout = env.layout();
    let model = env.model();
    let horizon = model.horizon;
    let l = layout.l;

    let mut observations = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut hidden = Vec::with_capacity(horizon);

    let mut state = rng.weighted(model.init_dist.as_slice().expect("contiguous")) as u16;
    for t in 0..horizon {
        hidden.push(state);
        let obs_row = model.emissions[t].row(state as usize);
        let obs = rng.weighted(obs_row.as_slice().expect("contiguous row")) as u16;
        observations.push(obs);
        rewards.push(model.rewards[t][obs as usize]);

        let action = if env.is_prefix_step(t) {
            layout.dummy_action.expect("prefix implies dummy action")
        } else {
            let z = window_at(&observations, &actions, t, l);
            policy.action(t - layout.prefix_len, &z, rng)?
        };
        actions.push(action);

        if t + 1 < horizon {
            let row = model.transitions[t][action as usize].row(state as usize);
            state = rng.weighted(row.as_slice().expect("contiguous row")) as u16;
        }
    }
    Ok(Trajectory::new(
        layout.prefix_len,
        observations,
        actions,
        rewards,
        hidden,
    ))
}

/// Memory window ending at step `t` built from the in-flight episode
/// buffers (observations already include step `t`).
fn window_at(observations: &[u16], actions: &[u16], t: usize, l: usize) -> MemoryState {
    debug_assert!(t + 1 >= l);
    let obs = observations[t + 1 - l..=t].to_vec();
    let acts = if l > 1 {
        actions[t + 1 - l..t].to_vec()
    } else {
        Vec::new()
    };
    MemoryState::new(obs, acts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{extend_pomdp, Pomdp};
    use ndarray::{array, Array1};

    fn one_state_unit_reward(horizon: usize) -> Pomdp {
        let init = array![1.0];
        let kernel = array![[1.0]];
        let transitions = vec![vec![kernel.clone(), kernel.clone()]; horizon - 1];
        let emissions = vec![array![[1.0]]; horizon];
        let rewards = vec![Array1::from(vec![1.0]); horizon];
        Pomdp::new(init, transitions, emissions, rewards).unwrap()
    }

    fn two_state_chain() -> Pomdp {
        // Deterministic chain with identity emissions, reward on state 1.
        let init = array![1.0, 0.0];
        let swap = array![[0.0, 1.0], [1.0, 0.0]];
        let stay = array![[1.0, 0.0], [0.0, 1.0]];
        let transitions = vec![
            vec![swap.clone(), stay.clone()],
            vec![swap.clone(), stay.clone()],
        ];
        let eye = array![[1.0, 0.0], [0.0, 1.0]];
        let emissions = vec![eye.clone(), eye.clone(), eye.clone()];
        let rewards = vec![array![0.0, 1.0]; 3];
        Pomdp::new(init, transitions, emissions, rewards).unwrap()
    }

    #[test]
    fn deterministic_unit_reward_sums_to_horizon() {
        let env = extend_pomdp(&one_state_unit_reward(5), 1).unwrap();
        let policy = LMemoryPolicy::uniform(env.layout()).unwrap();
        let mut rng = RandomStream::from_seed(3);
        let traj = sample_episode(&env, &policy, &mut rng).unwrap();
        assert_eq!(traj.return_sum(), 5.0);
    }

    #[test]
    fn fixed_seed_replays_bit_identical() {
        let env = extend_pomdp(&two_state_chain(), 2).unwrap();
        let policy = LMemoryPolicy::uniform(env.layout()).unwrap();
        let t1 = sample_episode(&env, &policy, &mut RandomStream::from_seed(11)).unwrap();
        let t2 = sample_episode(&env, &policy, &mut RandomStream::from_seed(11)).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(
            t1.serialize_learner_records(),
            t2.serialize_learner_records()
        );
    }

    #[test]
    fn window_consistency_with_advance() {
        // Sliding the window step by step equals direct suffix extraction.
        let env = extend_pomdp(&two_state_chain(), 2).unwrap();
        let policy = LMemoryPolicy::uniform(env.layout()).unwrap();
        let mut rng = RandomStream::from_seed(5);
        for _ in 0..20 {
            let traj = sample_episode(&env, &policy, &mut rng).unwrap();
            let view = traj.learner_view();
            let l = env.l();
            let first_real = env.prefix_len();
            let mut z = view.memory_state_at(first_real, l);
            for t in first_real..traj.ext_len() - 1 {
                let direct = view.memory_state_at(t, l);
                assert_eq!(z, direct, "window drifted at step {t}");
                z = z.advance(view.actions[t], view.observations[t + 1]);
            }
        }
    }

    #[test]
    fn rollin_mix_zero_means_unchanged_prefix() {
        let env = extend_pomdp(&two_state_chain(), 2).unwrap();
        let layout = env.layout();
        // Greedy policy: always action 1 ("stay").
        let rules = (0..layout.real_horizon)
            .map(|r| {
                let n = layout.indexer_at_real(r, DEFAULT_ENUM_CAP).unwrap().len();
                StepRule::Greedy(vec![1u16; n])
            })
            .collect();
        let policy = LMemoryPolicy::from_rules(layout, rules).unwrap();
        let target = 2;
        let mixed = policy.rollin_mix(0, target);

        let base = sample_episode(&env, &policy, &mut RandomStream::from_seed(9)).unwrap();
        let mix = sample_episode(&env, &mixed, &mut RandomStream::from_seed(9)).unwrap();
        for t in 0..=env.prefix_len() + target {
            assert_eq!(base.actions[t], mix.actions[t]);
        }
    }

    #[test]
    fn rollin_mix_matches_direct_two_phase_sampler() {
        // n = L on a deterministic policy: the action log shows the policy's
        // actions strictly before step h−L+1 and uniform draws afterwards.
        let env = extend_pomdp(&two_state_chain(), 2).unwrap();
        let layout = env.layout();
        let l = env.l();
        let rules: Vec<StepRule> = (0..layout.real_horizon)
            .map(|r| {
                let n = layout.indexer_at_real(r, DEFAULT_ENUM_CAP).unwrap().len();
                StepRule::Greedy(vec![0u16; n])
            })
            .collect();
        let policy = LMemoryPolicy::from_rules(layout, rules.clone()).unwrap();
        let target = 2usize;
        let mixed = policy.rollin_mix(l, target);

        // Direct two-phase reference: greedy before the cutoff, uniform after.
        let cutoff = target + 1 - l;
        let reference_rules: Vec<StepRule> = rules
            .into_iter()
            .enumerate()
            .map(|(r, rule)| if r >= cutoff { StepRule::Uniform } else { rule })
            .collect();
        let reference = LMemoryPolicy::from_rules(layout, reference_rules).unwrap();

        let a = sample_episode(&env, &mixed, &mut RandomStream::from_seed(21)).unwrap();
        let b = sample_episode(&env, &reference, &mut RandomStream::from_seed(21)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_draws_members_uniformly() {
        let env = extend_pomdp(&two_state_chain(), 1).unwrap();
        let layout = env.layout();
        let always = |a: u16| {
            let rules = (0..layout.real_horizon)
                .map(|r| {
                    let n = layout.indexer_at_real(r, DEFAULT_ENUM_CAP).unwrap().len();
                    StepRule::Greedy(vec![a; n])
                })
                .collect();
            LMemoryPolicy::from_rules(layout, rules).unwrap()
        };
        let mixture = MixturePolicy::new(vec![always(0), always(1)]).unwrap();
        let mut rng = RandomStream::from_seed(1234);
        let mut counts = [0usize; 2];
        for _ in 0..4000 {
            let traj = sample_episode(&env, &mixture, &mut rng).unwrap();
            counts[traj.actions[0] as usize] += 1;
        }
        let freq = counts[0] as f64 / 4000.0;
        assert!((freq - 0.5).abs() < 0.05, "member frequency {freq}");
    }
}
