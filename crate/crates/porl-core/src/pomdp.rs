//! Tabular POMDP substrate: models, low-rank factorizations, memory states,
//! the dummy-prefixed extension, and trajectories.
//!
//! Step indexing convention: a model with `horizon` T runs steps
//! `t = 0..T`. At step `t` the agent observes `o_t ~ emissions[t](· | s_t)`,
//! collects `rewards[t][o_t]`, picks `a_t`, and (for `t < T−1`) the state
//! moves by `transitions[t][a_t]`. The last step has no outgoing transition,
//! so `transitions.len() == T − 1`.

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use ndarray::{Array1, Array2};

/// Row sums of stochastic kernels must match 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Low-rank reconstruction must match the tables within this tolerance.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Default cap on memory-state enumeration.
pub const DEFAULT_ENUM_CAP: usize = 1_000_000;

fn check_row_stochastic(m: &Array2<f64>, what: &str) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        let mut sum = 0.0;
        for &v in row.iter() {
            if !(v >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "{what}: negative entry {v} in row {i}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!(
                "{what}: row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Finite tabular POMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_observations: usize,
    /// Number of steps T.
    pub horizon: usize,
    /// Initial state distribution, length `num_states`.
    pub init_dist: Array1<f64>,
    /// `transitions[t][a]` is the S×S kernel for step `t`, `t = 0..T−1`.
    pub transitions: Vec<Vec<Array2<f64>>>,
    /// `emissions[t]` is the S×O kernel for step `t`, `t = 0..T`.
    pub emissions: Vec<Array2<f64>>,
    /// `rewards[t][o]` in `[0, 1]`, `t = 0..T`.
    pub rewards: Vec<Array1<f64>>,
}

impl Pomdp {
    pub fn new(
        init_dist: Array1<f64>,
        transitions: Vec<Vec<Array2<f64>>>,
        emissions: Vec<Array2<f64>>,
        rewards: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let num_states = init_dist.len();
        let horizon = emissions.len();
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        if transitions.len() + 1 != horizon {
            return Err(Error::InvalidModel(format!(
                "expected {} transition steps for horizon {}, got {}",
                horizon - 1,
                horizon,
                transitions.len()
            )));
        }
        let num_actions = transitions.first().map_or(1, Vec::len);
        let num_observations = emissions[0].ncols();
        let model = Pomdp {
            num_states,
            num_actions,
            num_observations,
            horizon,
            init_dist,
            transitions,
            emissions,
            rewards,
        };
        model.validate()?;
        Ok(model)
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 || self.num_observations == 0 {
            return Err(Error::InvalidModel("empty state/action/observation space".into()));
        }
        let init_sum: f64 = self.init_dist.iter().sum();
        if (init_sum - 1.0).abs() > STOCHASTIC_TOL || self.init_dist.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidModel(format!(
                "initial distribution sums to {init_sum} or has negative mass"
            )));
        }
        if self.emissions.len() != self.horizon || self.rewards.len() != self.horizon {
            return Err(Error::InvalidModel("emission/reward table count mismatch".into()));
        }
        for (t, per_action) in self.transitions.iter().enumerate() {
            if per_action.len() != self.num_actions {
                return Err(Error::InvalidModel(format!(
                    "step {t}: expected {} actions, got {}",
                    self.num_actions,
                    per_action.len()
                )));
            }
            for (a, kernel) in per_action.iter().enumerate() {
                if kernel.nrows() != self.num_states || kernel.ncols() != self.num_states {
                    return Err(Error::InvalidModel(format!(
                        "transition kernel shape mismatch at step {t}, action {a}"
                    )));
                }
                check_row_stochastic(kernel, &format!("transition[{t}][{a}]"))?;
            }
        }
        for (t, emission) in self.emissions.iter().enumerate() {
            if emission.nrows() != self.num_states || emission.ncols() != self.num_observations {
                return Err(Error::InvalidModel(format!("emission shape mismatch at step {t}")));
            }
            check_row_stochastic(emission, &format!("emission[{t}]"))?;
        }
        for (t, reward) in self.rewards.iter().enumerate() {
            if reward.len() != self.num_observations {
                return Err(Error::InvalidModel(format!("reward length mismatch at step {t}")));
            }
            if reward.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                return Err(Error::InvalidModel(format!(
                    "reward outside [0,1] at step {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Low-rank factorization of the transition kernels:
/// `P_t(s' | s, a) = omega[t].row(s') · psi[t].row(s·A + a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactorization {
    pub rank: usize,
    /// Arrival-state embeddings, `omega[t]`: S×d for `t = 0..T−1`.
    pub omega: Vec<Array2<f64>>,
    /// Source features, `psi[t]`: (S·A)×d, row layout `s·A + a`.
    pub psi: Vec<Array2<f64>>,
}

impl LowRankFactorization {
    /// Identity-style full-rank factorization of an arbitrary model:
    /// `omega = I`, `psi.row(s·A+a) = P_t(· | s, a)`.
    pub fn full_rank(model: &Pomdp) -> Self {
        let s = model.num_states;
        let a = model.num_actions;
        let omega = vec![Array2::<f64>::eye(s); model.horizon - 1];
        let psi = model
            .transitions
            .iter()
            .map(|per_action| {
                let mut m = Array2::<f64>::zeros((s * a, s));
                for (act, kernel) in per_action.iter().enumerate() {
                    for src in 0..s {
                        for dst in 0..s {
                            m[[src * a + act, dst]] = kernel[[src, dst]];
                        }
                    }
                }
                m
            })
            .collect();
        LowRankFactorization { rank: s, omega, psi }
    }

    /// Verifies that `omegaᵀpsi` reproduces the model's transition tables
    /// within [`RECONSTRUCTION_TOL`] and that the reconstructed rows are
    /// distributions. `skip` lets callers exclude (step, action) pairs that
    /// carry placeholder features (the dummy action of an extended model).
    pub fn check_against(
        &self,
        model: &Pomdp,
        skip: impl Fn(usize, usize) -> bool,
    ) -> Result<()> {
        if self.omega.len() != model.horizon - 1 || self.psi.len() != model.horizon - 1 {
            return Err(Error::InvalidModel("factorization step count mismatch".into()));
        }
        let s = model.num_states;
        let a = model.num_actions;
        for t in 0..model.horizon - 1 {
            if self.omega[t].nrows() != s
                || self.omega[t].ncols() != self.rank
                || self.psi[t].nrows() != s * a
                || self.psi[t].ncols() != self.rank
            {
                return Err(Error::InvalidModel(format!(
                    "factorization shape mismatch at step {t}"
                )));
            }
            for act in 0..a {
                if skip(t, act) {
                    continue;
                }
                for src in 0..s {
                    let feat = self.psi[t].row(src * a + act);
                    let mut row_sum = 0.0;
                    for dst in 0..s {
                        let value = self.omega[t].row(dst).dot(&feat);
                        let table = model.transitions[t][act][[src, dst]];
                        if (value - table).abs() > RECONSTRUCTION_TOL {
                            return Err(Error::InvalidModel(format!(
                                "reconstruction off by {} at t={t} a={act} s={src} s'={dst}",
                                (value - table).abs()
                            )));
                        }
                        if value < -RECONSTRUCTION_TOL {
                            return Err(Error::InvalidModel(format!(
                                "reconstructed probability {value} negative at t={t}"
                            )));
                        }
                        row_sum += value;
                    }
                    if (row_sum - 1.0).abs() > 100.0 * RECONSTRUCTION_TOL {
                        return Err(Error::InvalidModel(format!(
                            "reconstructed row sums to {row_sum} at t={t} a={act} s={src}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The last `L` observations and `L−1` actions: the state of the
/// memory-state MDP.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MemoryState {
    pub obs: Vec<u16>,
    pub acts: Vec<u16>,
}

impl MemoryState {
    pub fn new(obs: Vec<u16>, acts: Vec<u16>) -> Self {
        debug_assert_eq!(obs.len(), acts.len() + 1);
        MemoryState { obs, acts }
    }

    pub fn window_len(&self) -> usize {
        self.obs.len()
    }

    /// Most recent observation in the window.
    pub fn last_obs(&self) -> u16 {
        *self.obs.last().expect("non-empty window")
    }

    /// Slide the window: drop the oldest observation/action, append the
    /// executed action and the next observation.
    pub fn advance(&self, action: u16, next_obs: u16) -> MemoryState {
        let mut obs = Vec::with_capacity(self.obs.len());
        obs.extend_from_slice(&self.obs[1..]);
        obs.push(next_obs);
        let mut acts = Vec::with_capacity(self.acts.len());
        if !self.acts.is_empty() {
            acts.extend_from_slice(&self.acts[1..]);
            acts.push(action);
        }
        MemoryState { obs, acts }
    }
}

/// Window-slot alphabet: either pinned to the dummy symbol (positions that
/// fall inside the extended prefix) or free over the real alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Fixed(u16),
    Free(u16),
}

impl Slot {
    fn radix(self) -> usize {
        match self {
            Slot::Fixed(_) => 1,
            Slot::Free(r) => r as usize,
        }
    }
}

/// Bijection between the valid memory states at one step and `0..len()`,
/// ordered lexicographically by `(obs, acts)`.
#[derive(Debug, Clone)]
pub struct MemoryIndexer {
    obs_slots: Vec<Slot>,
    act_slots: Vec<Slot>,
    len: usize,
}

impl MemoryIndexer {
    fn new(obs_slots: Vec<Slot>, act_slots: Vec<Slot>, cap: usize) -> Result<Self> {
        let mut len: u128 = 1;
        for slot in obs_slots.iter().chain(act_slots.iter()) {
            len = len.saturating_mul(slot.radix() as u128);
        }
        if len > cap as u128 {
            return Err(Error::CapExceeded {
                what: "memory-state enumeration",
                needed: len,
                cap: cap as u128,
            });
        }
        Ok(MemoryIndexer {
            obs_slots,
            act_slots,
            len: len as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Dense index of a memory state; `None` when a slot is out of range or
    /// violates a pinned dummy position.
    pub fn index_of(&self, z: &MemoryState) -> Option<usize> {
        if z.obs.len() != self.obs_slots.len() || z.acts.len() != self.act_slots.len() {
            return None;
        }
        let mut idx = 0usize;
        for (slot, &sym) in self
            .obs_slots
            .iter()
            .zip(z.obs.iter())
            .chain(self.act_slots.iter().zip(z.acts.iter()))
        {
            match *slot {
                Slot::Fixed(expected) => {
                    if sym != expected {
                        return None;
                    }
                }
                Slot::Free(radix) => {
                    if sym >= radix {
                        return None;
                    }
                    idx = idx * radix as usize + sym as usize;
                }
            }
        }
        Some(idx)
    }

    /// Memory state for a dense index.
    pub fn state_of(&self, mut idx: usize) -> MemoryState {
        assert!(idx < self.len, "memory index out of range");
        let total = self.obs_slots.len() + self.act_slots.len();
        let mut symbols = vec![0u16; total];
        for (pos, slot) in self
            .obs_slots
            .iter()
            .chain(self.act_slots.iter())
            .enumerate()
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
        {
            match *slot {
                Slot::Fixed(sym) => symbols[pos] = sym,
                Slot::Free(radix) => {
                    symbols[pos] = (idx % radix as usize) as u16;
                    idx /= radix as usize;
                }
            }
        }
        let acts = symbols.split_off(self.obs_slots.len());
        MemoryState {
            obs: symbols,
            acts,
        }
    }

    /// All valid memory states in index (= lexicographic) order.
    pub fn enumerate(&self) -> Vec<MemoryState> {
        (0..self.len).map(|i| self.state_of(i)).collect()
    }
}

/// Shape data for building memory-state indexers: window length, prefix
/// length, real alphabet sizes, and the dummy symbols (when a prefix exists).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryLayout {
    pub l: usize,
    pub prefix_len: usize,
    pub real_horizon: usize,
    pub num_real_obs: u16,
    pub num_real_actions: u16,
    pub dummy_obs: Option<u16>,
    pub dummy_action: Option<u16>,
}

impl MemoryLayout {
    pub fn ext_horizon(&self) -> usize {
        self.prefix_len + self.real_horizon
    }

    pub fn real_to_ext(&self, real_step: usize) -> usize {
        self.prefix_len + real_step
    }

    /// Indexer for the valid windows at extended step `t` (must be a real
    /// step). Positions that land inside the prefix are pinned to the dummy
    /// symbols.
    pub fn indexer_at_ext(&self, t: usize, cap: usize) -> Result<MemoryIndexer> {
        assert!(t >= self.prefix_len, "indexer requested at a prefix step");
        assert!(t + 1 >= self.l, "window reaches before the episode start");
        let obs_slots = (0..self.l)
            .map(|i| {
                let step = t + 1 - self.l + i;
                if step < self.prefix_len {
                    Slot::Fixed(self.dummy_obs.expect("prefix implies dummy symbols"))
                } else {
                    Slot::Free(self.num_real_obs)
                }
            })
            .collect();
        let act_slots = (0..self.l.saturating_sub(1))
            .map(|i| {
                let step = t + 1 - self.l + i;
                if step < self.prefix_len {
                    Slot::Fixed(self.dummy_action.expect("prefix implies dummy symbols"))
                } else {
                    Slot::Free(self.num_real_actions)
                }
            })
            .collect();
        MemoryIndexer::new(obs_slots, act_slots, cap)
    }

    pub fn indexer_at_real(&self, real_step: usize, cap: usize) -> Result<MemoryIndexer> {
        self.indexer_at_ext(self.real_to_ext(real_step), cap)
    }

    /// Checked window slide: validates the action/observation against the
    /// real alphabets before delegating to [`MemoryState::advance`].
    pub fn advance(&self, z: &MemoryState, action: u16, next_obs: u16) -> Result<MemoryState> {
        if action >= self.num_real_actions {
            return Err(Error::InvalidModel(format!(
                "action {action} out of range (A = {})",
                self.num_real_actions
            )));
        }
        if next_obs >= self.num_real_obs {
            return Err(Error::InvalidModel(format!(
                "observation {next_obs} out of range (O = {})",
                self.num_real_obs
            )));
        }
        Ok(z.advance(action, next_obs))
    }
}

/// A POMDP wrapped with the `2L−2`-step dummy prefix so that every real step
/// has a full-length memory window. For `L = 1` the wrapper is a no-op.
///
/// During prefix steps the only available action is the dummy action, every
/// state emits the dummy observation with certainty, rewards are zero, and
/// each transition resets the state to the initial distribution — so any
/// dummy prefix leaves the first real step distributed exactly as `d0`.
#[derive(Debug, Clone)]
pub struct ExtendedPomdp {
    model: Pomdp,
    layout: MemoryLayout,
}

impl ExtendedPomdp {
    pub fn model(&self) -> &Pomdp {
        &self.model
    }

    pub fn layout(&self) -> MemoryLayout {
        self.layout
    }

    pub fn l(&self) -> usize {
        self.layout.l
    }

    pub fn prefix_len(&self) -> usize {
        self.layout.prefix_len
    }

    pub fn real_horizon(&self) -> usize {
        self.layout.real_horizon
    }

    pub fn ext_horizon(&self) -> usize {
        self.model.horizon
    }

    pub fn num_real_actions(&self) -> usize {
        self.layout.num_real_actions as usize
    }

    pub fn num_real_obs(&self) -> usize {
        self.layout.num_real_obs as usize
    }

    pub fn is_prefix_step(&self, t: usize) -> bool {
        t < self.layout.prefix_len
    }

    /// Reward for observation `o` at extended step `t`.
    pub fn reward(&self, t: usize, o: u16) -> f64 {
        self.model.rewards[t][o as usize]
    }
}

/// Prepend `2L−2` dummy steps to `model`. Adds one dummy observation and one
/// dummy action symbol when the prefix is non-empty; `L = 1` returns the
/// model unchanged.
pub fn extend_pomdp(model: &Pomdp, l: usize) -> Result<ExtendedPomdp> {
    if l == 0 {
        return Err(Error::Config("memory length L must be at least 1".into()));
    }
    let prefix_len = 2 * l - 2;
    if prefix_len == 0 {
        let layout = MemoryLayout {
            l,
            prefix_len: 0,
            real_horizon: model.horizon,
            num_real_obs: model.num_observations as u16,
            num_real_actions: model.num_actions as u16,
            dummy_obs: None,
            dummy_action: None,
        };
        return Ok(ExtendedPomdp {
            model: model.clone(),
            layout,
        });
    }

    let s = model.num_states;
    let a_ext = model.num_actions + 1;
    let o_ext = model.num_observations + 1;
    let dummy_obs = model.num_observations as u16;
    let dummy_action = model.num_actions as u16;
    let ext_horizon = prefix_len + model.horizon;

    // Reset kernel: every (state, action) redraws from the initial
    // distribution. Used for all prefix transitions and as the placeholder
    // row of the dummy action at real steps.
    let reset_kernel = {
        let mut m = Array2::<f64>::zeros((s, s));
        for src in 0..s {
            for dst in 0..s {
                m[[src, dst]] = model.init_dist[dst];
            }
        }
        m
    };

    let mut transitions = Vec::with_capacity(ext_horizon - 1);
    for t in 0..ext_horizon - 1 {
        if t < prefix_len {
            transitions.push(vec![reset_kernel.clone(); a_ext]);
        } else {
            let real_t = t - prefix_len;
            let mut per_action: Vec<Array2<f64>> = model.transitions[real_t].clone();
            per_action.push(reset_kernel.clone());
            transitions.push(per_action);
        }
    }

    let mut emissions = Vec::with_capacity(ext_horizon);
    let mut rewards = Vec::with_capacity(ext_horizon);
    for t in 0..ext_horizon {
        if t < prefix_len {
            let mut e = Array2::<f64>::zeros((s, o_ext));
            for src in 0..s {
                e[[src, dummy_obs as usize]] = 1.0;
            }
            emissions.push(e);
            rewards.push(Array1::<f64>::zeros(o_ext));
        } else {
            let real_t = t - prefix_len;
            let mut e = Array2::<f64>::zeros((s, o_ext));
            for src in 0..s {
                for obs in 0..model.num_observations {
                    e[[src, obs]] = model.emissions[real_t][[src, obs]];
                }
            }
            emissions.push(e);
            let mut r = Array1::<f64>::zeros(o_ext);
            for obs in 0..model.num_observations {
                r[obs] = model.rewards[real_t][obs];
            }
            rewards.push(r);
        }
    }

    let extended = Pomdp::new(model.init_dist.clone(), transitions, emissions, rewards)?;
    let layout = MemoryLayout {
        l,
        prefix_len,
        real_horizon: model.horizon,
        num_real_obs: model.num_observations as u16,
        num_real_actions: model.num_actions as u16,
        dummy_obs: Some(dummy_obs),
        dummy_action: Some(dummy_action),
    };
    Ok(ExtendedPomdp {
        model: extended,
        layout,
    })
}

/// Extend a factorization alongside [`extend_pomdp`]: prefix steps carry the
/// fixed features `psi = e₁` and `omega(s') = d0(s')·e₁`, and the dummy
/// action at real steps carries the `e₁` placeholder (excluded from the
/// reconstruction check).
pub fn extend_factors(
    factors: &LowRankFactorization,
    model: &Pomdp,
    l: usize,
) -> LowRankFactorization {
    let prefix_len = 2 * l - 2;
    if prefix_len == 0 {
        return factors.clone();
    }
    let s = model.num_states;
    let a_ext = model.num_actions + 1;
    let d = factors.rank;
    let ext_transition_steps = prefix_len + model.horizon - 1;

    let mut omega = Vec::with_capacity(ext_transition_steps);
    let mut psi = Vec::with_capacity(ext_transition_steps);
    for t in 0..ext_transition_steps {
        if t < prefix_len {
            let mut om = Array2::<f64>::zeros((s, d));
            for dst in 0..s {
                om[[dst, 0]] = model.init_dist[dst];
            }
            omega.push(om);
            let mut ps = Array2::<f64>::zeros((s * a_ext, d));
            for row in 0..s * a_ext {
                ps[[row, 0]] = 1.0;
            }
            psi.push(ps);
        } else {
            let real_t = t - prefix_len;
            omega.push(factors.omega[real_t].clone());
            let mut ps = Array2::<f64>::zeros((s * a_ext, d));
            for src in 0..s {
                for act in 0..model.num_actions {
                    let orig = factors.psi[real_t].row(src * model.num_actions + act);
                    for j in 0..d {
                        ps[[src * a_ext + act, j]] = orig[j];
                    }
                }
                // Placeholder features for the never-taken dummy action.
                ps[[src * a_ext + model.num_actions, 0]] = 1.0;
            }
            psi.push(ps);
        }
    }
    LowRankFactorization {
        rank: d,
        omega,
        psi,
    }
}

/// One sampled episode over the extended step range. Hidden states are
/// retained for oracles and diagnostics but are deliberately kept out of the
/// learner-facing view.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub prefix_len: usize,
    pub observations: Vec<u16>,
    pub actions: Vec<u16>,
    pub rewards: Vec<f64>,
    hidden_states: Vec<u16>,
}

impl Trajectory {
    pub fn new(
        prefix_len: usize,
        observations: Vec<u16>,
        actions: Vec<u16>,
        rewards: Vec<f64>,
        hidden_states: Vec<u16>,
    ) -> Self {
        debug_assert_eq!(observations.len(), actions.len());
        debug_assert_eq!(observations.len(), rewards.len());
        debug_assert_eq!(observations.len(), hidden_states.len());
        Trajectory {
            prefix_len,
            observations,
            actions,
            rewards,
            hidden_states,
        }
    }

    pub fn ext_len(&self) -> usize {
        self.observations.len()
    }

    /// Total reward (prefix steps contribute zero by construction).
    pub fn return_sum(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// What a learner is allowed to see: observations, actions, rewards.
    pub fn learner_view(&self) -> LearnerView<'_> {
        LearnerView {
            prefix_len: self.prefix_len,
            observations: &self.observations,
            actions: &self.actions,
            rewards: &self.rewards,
        }
    }

    /// Hidden state sequence — for oracles and tests only; learner code must
    /// go through [`Trajectory::learner_view`].
    pub fn oracle_hidden_states(&self) -> &[u16] {
        &self.hidden_states
    }

    /// Line-delimited `h,o,a,r` records over the real steps.
    pub fn serialize_learner_records(&self) -> String {
        let view = self.learner_view();
        let mut out = String::new();
        for real_t in 0..view.observations.len() - view.prefix_len {
            let t = view.prefix_len + real_t;
            out.push_str(&format!(
                "{},{},{},{}\n",
                real_t, view.observations[t], view.actions[t], view.rewards[t]
            ));
        }
        out
    }
}

/// Learner-facing slice of a trajectory: no hidden states.
#[derive(Debug, Clone, Copy)]
pub struct LearnerView<'a> {
    pub prefix_len: usize,
    pub observations: &'a [u16],
    pub actions: &'a [u16],
    pub rewards: &'a [f64],
}

impl<'a> LearnerView<'a> {
    /// Memory window ending at extended step `t`.
    pub fn memory_state_at(&self, t: usize, l: usize) -> MemoryState {
        assert!(t + 1 >= l, "window reaches before the episode start");
        let obs = self.observations[t + 1 - l..=t].to_vec();
        let acts = if l > 1 {
            self.actions[t + 1 - l..t].to_vec()
        } else {
            Vec::new()
        };
        MemoryState::new(obs, acts)
    }
}

/// Occupancy of the hidden state at every step under explicit forward
/// dynamic programming, for a fixed sequence of per-step action
/// distributions that do not depend on history. Used by tests as an
/// independent oracle for the episode sampler.
pub fn state_occupancy(
    model: &Pomdp,
    action_dist: impl Fn(usize) -> Vec<f64>,
) -> Vec<Array1<f64>> {
    let mut dists = Vec::with_capacity(model.horizon);
    let mut current = model.init_dist.clone();
    dists.push(current.clone());
    for t in 0..model.horizon - 1 {
        let weights = action_dist(t);
        let mut next = Array1::<f64>::zeros(model.num_states);
        for (a, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for src in 0..model.num_states {
                let mass = current[src] * w;
                if mass == 0.0 {
                    continue;
                }
                for dst in 0..model.num_states {
                    next[dst] += mass * model.transitions[t][a][[src, dst]];
                }
            }
        }
        current = next;
        dists.push(current.clone());
    }
    dists
}

/// `sample_episode` lives in [`crate::policy`]; re-exported here because it
/// is part of the substrate's surface.
pub use crate::policy::sample_episode;

/// Deterministic helper: derive `num_states` i.i.d.-ish probability rows for
/// tests and generators.
pub fn random_distribution(rng: &mut RandomStream, len: usize) -> Array1<f64> {
    // Normalized Exp(1) draws give a flat Dirichlet sample.
    let mut v = Array1::<f64>::zeros(len);
    let mut total = 0.0;
    for i in 0..len {
        let e = -(1.0 - rng.uniform()).ln();
        v[i] = e;
        total += e;
    }
    v.mapv_inplace(|x| x / total);
    // Repair rounding so validation at 1e-12 never trips.
    let sum: f64 = v.iter().sum();
    v[len - 1] += 1.0 - sum;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> Pomdp {
        // 2 states, 2 actions, 2 observations, 3 steps.
        let init = ndarray::array![0.7, 0.3];
        let k0 = ndarray::array![[0.9, 0.1], [0.2, 0.8]];
        let k1 = ndarray::array![[0.5, 0.5], [0.4, 0.6]];
        let transitions = vec![
            vec![k0.clone(), k1.clone()],
            vec![k1.clone(), k0.clone()],
        ];
        let emission = ndarray::array![[0.6, 0.4], [0.25, 0.75]];
        let emissions = vec![emission.clone(), emission.clone(), emission.clone()];
        let rewards = vec![
            ndarray::array![0.0, 1.0],
            ndarray::array![0.5, 0.0],
            ndarray::array![1.0, 0.25],
        ];
        Pomdp::new(init, transitions, emissions, rewards).unwrap()
    }

    #[test]
    fn validation_rejects_bad_rows() {
        let mut model = tiny_model();
        model.transitions[0][0][[0, 0]] = 0.95;
        assert!(model.validate().is_err());
    }

    #[test]
    fn validation_rejects_reward_range() {
        let mut model = tiny_model();
        model.rewards[1][0] = 1.5;
        assert!(model.validate().is_err());
    }

    #[test]
    fn full_rank_factorization_reconstructs() {
        let model = tiny_model();
        let factors = LowRankFactorization::full_rank(&model);
        factors.check_against(&model, |_, _| false).unwrap();
    }

    #[test]
    fn advance_memory_slides_window() {
        // L=2: z=((o1,o2),(a1)), advance with a2, o3 -> ((o2,o3),(a2)).
        let z = MemoryState::new(vec![5, 6], vec![1]);
        let next = z.advance(2, 7);
        assert_eq!(next, MemoryState::new(vec![6, 7], vec![2]));
    }

    #[test]
    fn advance_memory_l1_keeps_newest() {
        let z = MemoryState::new(vec![4], vec![]);
        let next = z.advance(0, 9);
        assert_eq!(next, MemoryState::new(vec![9], vec![]));
    }

    #[test]
    fn advance_memory_out_of_prefix_lengths() {
        // L=3 with dummy symbols: advancing keeps lengths 3 and 2.
        let layout = MemoryLayout {
            l: 3,
            prefix_len: 4,
            real_horizon: 3,
            num_real_obs: 2,
            num_real_actions: 2,
            dummy_obs: Some(2),
            dummy_action: Some(2),
        };
        let z = MemoryState::new(vec![2, 2, 1], vec![2, 2]);
        let next = layout.advance(&z, 1, 0).unwrap();
        assert_eq!(next.obs.len(), 3);
        assert_eq!(next.acts.len(), 2);
        assert_eq!(next, MemoryState::new(vec![2, 1, 0], vec![2, 1]));
        assert!(layout.advance(&z, 5, 0).is_err());
        assert!(layout.advance(&z, 0, 9).is_err());
    }

    #[test]
    fn extend_l1_is_identity() {
        let model = tiny_model();
        let ext = extend_pomdp(&model, 1).unwrap();
        assert_eq!(ext.prefix_len(), 0);
        assert_eq!(ext.model(), &model);
        assert_eq!(ext.num_real_actions(), 2);
    }

    #[test]
    fn extend_l2_prepends_two_dummy_steps() {
        let model = tiny_model();
        let ext = extend_pomdp(&model, 2).unwrap();
        assert_eq!(ext.prefix_len(), 2);
        assert_eq!(ext.ext_horizon(), 5);
        assert_eq!(ext.model().num_actions, 3);
        assert_eq!(ext.model().num_observations, 3);
        // Prefix emissions are a point mass on the dummy observation.
        assert_eq!(ext.model().emissions[0][[0, 2]], 1.0);
        // Prefix rewards are zero everywhere.
        assert!(ext.model().rewards[0].iter().all(|&r| r == 0.0));
        // Prefix transition resets to the initial distribution.
        assert_eq!(ext.model().transitions[1][0][[1, 0]], model.init_dist[0]);
        ext.model().validate().unwrap();
    }

    #[test]
    fn extended_factors_check_out() {
        let model = tiny_model();
        let ext = extend_pomdp(&model, 2).unwrap();
        let factors = extend_factors(&LowRankFactorization::full_rank(&model), &model, 2);
        let dummy_action = ext.layout().dummy_action.unwrap() as usize;
        let prefix = ext.prefix_len();
        factors
            .check_against(ext.model(), |t, a| t >= prefix && a == dummy_action)
            .unwrap();
    }

    #[test]
    fn indexer_counts_match_spec_examples() {
        // O=3, A=10, L=2, interior step: 3^2 * 10 = 90 states.
        let layout = MemoryLayout {
            l: 2,
            prefix_len: 2,
            real_horizon: 5,
            num_real_obs: 3,
            num_real_actions: 10,
            dummy_obs: Some(3),
            dummy_action: Some(10),
        };
        let idx = layout.indexer_at_real(3, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(idx.len(), 90);

        // First real step: window is (dummy, o), (dummy) -> O states.
        let idx0 = layout.indexer_at_real(0, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(idx0.len(), 3);

        // L=1: O states at every step.
        let layout1 = MemoryLayout {
            l: 1,
            prefix_len: 0,
            real_horizon: 5,
            num_real_obs: 7,
            num_real_actions: 4,
            dummy_obs: None,
            dummy_action: None,
        };
        assert_eq!(layout1.indexer_at_real(2, DEFAULT_ENUM_CAP).unwrap().len(), 7);
    }

    #[test]
    fn indexer_roundtrip_and_lexicographic_order() {
        let layout = MemoryLayout {
            l: 2,
            prefix_len: 2,
            real_horizon: 4,
            num_real_obs: 3,
            num_real_actions: 2,
            dummy_obs: Some(3),
            dummy_action: Some(2),
        };
        let idx = layout.indexer_at_real(2, DEFAULT_ENUM_CAP).unwrap();
        let states = idx.enumerate();
        assert_eq!(states.len(), idx.len());
        let mut sorted = states.clone();
        sorted.sort();
        assert_eq!(states, sorted, "enumeration must be lexicographic");
        for (i, z) in states.iter().enumerate() {
            assert_eq!(idx.index_of(z), Some(i));
        }
        // Wrong dummy position is rejected.
        let idx0 = layout.indexer_at_real(0, DEFAULT_ENUM_CAP).unwrap();
        let bad = MemoryState::new(vec![0, 1], vec![0]);
        assert_eq!(idx0.index_of(&bad), None);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let layout = MemoryLayout {
            l: 4,
            prefix_len: 6,
            real_horizon: 8,
            num_real_obs: 100,
            num_real_actions: 100,
            dummy_obs: Some(100),
            dummy_action: Some(100),
        };
        let err = layout.indexer_at_real(7, DEFAULT_ENUM_CAP).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }
}
