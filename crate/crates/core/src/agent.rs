//! Agents: the adaptive-temperature free-will agent and a decaying
//! epsilon-greedy baseline.
//!
//! Both implement [`Agent`]: `select_action` for a state, then `observe` the
//! transition. Tables are keyed by [`StateId`]; in [`StateMode::Single`] the
//! whole bandit is one state, in [`StateMode::Time`] the state is the step
//! index, so every step starts from a fresh zero row.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{argmax, sample_categorical, softmax, ActionId, PolicyDistribution};
use crate::rng::RngStream;

pub type StateId = usize;

/// How the intrinsic bonus and temperature enter the softmax scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// `(Q + alpha * I) / T`
    Formula,
    /// `Q + T * alpha * I`
    Code,
}

/// What drives exploration resets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerVariant {
    /// Temperature follows the surprise rule only.
    Endogenous,
    /// Temperature follows the surprise rule, and an external change signal
    /// additionally resets temperature and epsilon to their initial values.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    Single,
    Time,
}

impl StateMode {
    pub fn state_at(self, t: usize) -> StateId {
        match self {
            StateMode::Single => 0,
            StateMode::Time => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeWillParams {
    pub alpha: f64,
    pub eta: f64,
    pub tau: f64,
    pub t_init: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub gamma_inc: f64,
    pub gamma_dec: f64,
    pub discount: f64,
    pub surprise_window: usize,
    pub eps_init: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
    pub score_variant: ScoreVariant,
    pub trigger_variant: TriggerVariant,
}

impl Default for FreeWillParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eta: 0.1,
            tau: 0.4,
            t_init: 0.5,
            t_min: 0.01,
            t_max: 2.0,
            gamma_inc: 1.05,
            gamma_dec: 0.85,
            discount: 0.9,
            surprise_window: 50,
            eps_init: 0.5,
            eps_decay: 0.001,
            eps_floor: 0.01,
            score_variant: ScoreVariant::Formula,
            trigger_variant: TriggerVariant::Endogenous,
        }
    }
}

fn check(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message()))
    }
}

fn check_finite(values: &[(&str, f64)]) -> Result<()> {
    for (key, v) in values {
        check(v.is_finite(), key, || format!("{v} is not finite"))?;
    }
    Ok(())
}

fn check_epsilon(prefix: &str, init: f64, decay: f64, floor: f64) -> Result<()> {
    check(
        0.0 <= floor && floor <= init && init <= 1.0,
        &format!("{prefix}.eps_init"),
        || format!("need 0 <= eps_floor ({floor}) <= eps_init ({init}) <= 1"),
    )?;
    check(decay >= 0.0, &format!("{prefix}.eps_decay"), || {
        format!("{decay} is negative")
    })
}

impl FreeWillParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(&[
            ("freewill.alpha", self.alpha),
            ("freewill.eta", self.eta),
            ("freewill.tau", self.tau),
            ("freewill.t_init", self.t_init),
            ("freewill.t_min", self.t_min),
            ("freewill.t_max", self.t_max),
            ("freewill.gamma_inc", self.gamma_inc),
            ("freewill.gamma_dec", self.gamma_dec),
            ("freewill.discount", self.discount),
            ("freewill.eps_init", self.eps_init),
            ("freewill.eps_decay", self.eps_decay),
            ("freewill.eps_floor", self.eps_floor),
        ])?;
        check(self.alpha >= 0.0, "freewill.alpha", || format!("{} is negative", self.alpha))?;
        check(self.eta > 0.0 && self.eta <= 1.0, "freewill.eta", || {
            format!("{} outside (0, 1]", self.eta)
        })?;
        check(self.tau >= 0.0, "freewill.tau", || format!("{} is negative", self.tau))?;
        check(self.t_min > 0.0, "freewill.t_min", || format!("{} must be positive", self.t_min))?;
        check(
            self.t_min <= self.t_init && self.t_init <= self.t_max,
            "freewill.t_init",
            || format!("need t_min ({}) <= t_init ({}) <= t_max ({})", self.t_min, self.t_init, self.t_max),
        )?;
        check(self.gamma_inc > 1.0, "freewill.gamma_inc", || {
            format!("{} must exceed 1", self.gamma_inc)
        })?;
        check(self.gamma_dec > 0.0 && self.gamma_dec < 1.0, "freewill.gamma_dec", || {
            format!("{} outside (0, 1)", self.gamma_dec)
        })?;
        check((0.0..1.0).contains(&self.discount), "freewill.discount", || {
            format!("{} outside [0, 1)", self.discount)
        })?;
        check(self.surprise_window >= 1, "freewill.surprise_window", || {
            "must be at least 1".into()
        })?;
        check_epsilon("freewill", self.eps_init, self.eps_decay, self.eps_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub eta: f64,
    pub discount: f64,
    pub eps_init: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            eta: 0.1,
            discount: 0.9,
            eps_init: 0.5,
            eps_decay: 0.001,
            eps_floor: 0.01,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        check_finite(&[
            ("baseline.eta", self.eta),
            ("baseline.discount", self.discount),
            ("baseline.eps_init", self.eps_init),
            ("baseline.eps_decay", self.eps_decay),
            ("baseline.eps_floor", self.eps_floor),
        ])?;
        check(self.eta > 0.0 && self.eta <= 1.0, "baseline.eta", || {
            format!("{} outside (0, 1]", self.eta)
        })?;
        check((0.0..1.0).contains(&self.discount), "baseline.discount", || {
            format!("{} outside [0, 1)", self.discount)
        })?;
        check_epsilon("baseline", self.eps_init, self.eps_decay, self.eps_floor)
    }
}

/// Count-based novelty bonus `1 / sqrt(1 + n)`.
pub fn intrinsic_bonus(n: u64) -> f64 {
    1.0 / (1.0 + n as f64).sqrt()
}

pub fn action_scores(
    q_row: &[f64],
    n_row: &[u64],
    temperature: f64,
    alpha: f64,
    variant: ScoreVariant,
) -> Result<Vec<f64>> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::invalid(format!("temperature {temperature} must be positive")));
    }
    if q_row.len() != n_row.len() {
        return Err(Error::invalid(format!(
            "q row has {} entries, count row has {}",
            q_row.len(),
            n_row.len()
        )));
    }
    let scores = q_row.iter().zip(n_row).map(|(q, n)| {
        let bonus = intrinsic_bonus(*n);
        match variant {
            ScoreVariant::Formula => (q + alpha * bonus) / temperature,
            ScoreVariant::Code => q + temperature * alpha * bonus,
        }
    });
    Ok(scores.collect())
}

/// Fixed-capacity buffer of the most recent rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWindow {
    buf: VecDeque<f64>,
    capacity: usize,
}

impl RewardWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reward window needs capacity");
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, r: f64) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(r);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.buf.is_empty() {
            None
        } else {
            Some(self.buf.iter().sum::<f64>() / self.buf.len() as f64)
        }
    }
}

/// `|r - mean(history)|`, or 0 when there is no history yet.
pub fn surprise(r: f64, history: &RewardWindow) -> f64 {
    history.mean().map_or(0.0, |m| (r - m).abs())
}

pub fn temperature_update(temperature: f64, surprise_value: f64, params: &FreeWillParams) -> f64 {
    if surprise_value > params.tau {
        (temperature * params.gamma_inc).min(params.t_max)
    } else {
        (temperature * params.gamma_dec).max(params.t_min)
    }
}

/// Exponential-moving-average update of the propensity row: every entry moves
/// toward `alpha * I[a]`, the chosen entry additionally toward `r`.
pub fn psi_update(
    psi_row: &[f64],
    chosen: ActionId,
    r: f64,
    i_row: &[f64],
    params: &FreeWillParams,
) -> Result<Vec<f64>> {
    if psi_row.len() != i_row.len() {
        return Err(Error::invalid(format!(
            "psi row has {} entries, bonus row has {}",
            psi_row.len(),
            i_row.len()
        )));
    }
    if chosen >= psi_row.len() {
        return Err(Error::invalid(format!("action {chosen} out of range")));
    }
    Ok(psi_row
        .iter()
        .zip(i_row)
        .enumerate()
        .map(|(a, (psi, bonus))| {
            let hit = if a == chosen { r } else { 0.0 };
            psi + params.eta * (hit + params.alpha * bonus - psi)
        })
        .collect())
}

/// Per-state rows of a fixed width; missing rows read as zeros.
#[derive(Debug, Clone)]
pub struct Table<T> {
    rows: HashMap<StateId, Vec<T>>,
    zeros: Vec<T>,
}

impl<T: Clone + Default> Table<T> {
    pub fn new(width: usize) -> Self {
        Self {
            rows: HashMap::new(),
            zeros: vec![T::default(); width],
        }
    }

    pub fn row(&self, state: StateId) -> &[T] {
        self.rows.get(&state).unwrap_or(&self.zeros)
    }

    pub fn row_mut(&mut self, state: StateId) -> &mut Vec<T> {
        let zeros = &self.zeros;
        self.rows.entry(state).or_insert_with(|| zeros.clone())
    }

    pub fn width(&self) -> usize {
        self.zeros.len()
    }

    pub fn states(&self) -> impl Iterator<Item = (&StateId, &Vec<T>)> {
        self.rows.iter()
    }
}

fn max_of(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn td_update(q: &mut [f64], action: ActionId, r: f64, next_max: f64, eta: f64, discount: f64) {
    q[action] += eta * (r + discount * next_max - q[action]);
}

/// Agent-side values recorded alongside each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub temperature: Option<f64>,
    pub eps: f64,
    pub psi_chosen: Option<f64>,
}

pub trait Agent {
    fn num_arms(&self) -> usize;

    fn select_action(&mut self, state: StateId, rng: &mut RngStream) -> Result<ActionId>;

    fn observe(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: u8,
        next_state: StateId,
        change_signal: bool,
    ) -> Result<()>;

    /// The agent's reported policy at `state` (the quantity entropy and KL are
    /// measured on).
    fn policy(&self, state: StateId) -> Result<PolicyDistribution>;

    fn snapshot(&self, state: StateId, action: ActionId) -> Snapshot;
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub q: Table<f64>,
    pub n: Table<u64>,
    pub psi: Table<f64>,
    pub temperature: f64,
    pub eps: f64,
    pub rewards: RewardWindow,
}

#[derive(Debug, Clone)]
pub struct FreeWillAgent {
    params: FreeWillParams,
    state: AgentState,
}

impl FreeWillAgent {
    pub fn new(num_arms: usize, params: FreeWillParams) -> Result<Self> {
        params.validate()?;
        if num_arms == 0 {
            return Err(Error::invalid("agent needs at least one arm"));
        }
        let state = AgentState {
            q: Table::new(num_arms),
            n: Table::new(num_arms),
            psi: Table::new(num_arms),
            temperature: params.t_init,
            eps: params.eps_init,
            rewards: RewardWindow::new(params.surprise_window),
        };
        Ok(Self { params, state })
    }

    pub fn params(&self) -> &FreeWillParams {
        &self.params
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut AgentState {
        &mut self.state
    }

    /// Softmax policy at `state`, without the epsilon overlay.
    pub fn softmax_policy(&self, state: StateId) -> Result<PolicyDistribution> {
        let scores = action_scores(
            self.state.q.row(state),
            self.state.n.row(state),
            self.state.temperature,
            self.params.alpha,
            self.params.score_variant,
        )?;
        softmax(&scores)
    }

    /// Picks an action: with probability `eps` uniformly at random, otherwise
    /// from the softmax policy. The exploration coin is always drawn first.
    pub fn select(&self, state: StateId, rng: &mut RngStream) -> Result<(ActionId, PolicyDistribution)> {
        let policy = self.softmax_policy(state)?;
        let action = if rng.uniform() < self.state.eps {
            rng.index(policy.len())
        } else {
            sample_categorical(&policy, rng)
        };
        Ok((action, policy))
    }

    pub fn update(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: f64,
        next_state: StateId,
        change_signal: bool,
    ) -> Result<()> {
        let width = self.state.q.width();
        if action >= width {
            return Err(Error::invalid(format!("action {action} out of range for {width} arms")));
        }
        let p = &self.params;
        let st = &mut self.state;

        st.rewards.push(reward);
        let s = surprise(reward, &st.rewards);
        st.temperature = temperature_update(st.temperature, s, p);
        let reset = p.trigger_variant == TriggerVariant::Oracle && change_signal;
        if reset {
            st.temperature = p.t_init;
        }

        let next_max = max_of(st.q.row(next_state));
        td_update(st.q.row_mut(state), action, reward, next_max, p.eta, p.discount);

        st.n.row_mut(state)[action] += 1;

        let bonus: Vec<f64> = st.n.row(state).iter().map(|n| intrinsic_bonus(*n)).collect();
        let psi = psi_update(st.psi.row(state), action, reward, &bonus, p)?;
        *st.psi.row_mut(state) = psi;

        if reset {
            st.eps = p.eps_init;
        }
        st.eps = (st.eps - p.eps_decay).max(p.eps_floor);
        Ok(())
    }
}

impl Agent for FreeWillAgent {
    fn num_arms(&self) -> usize {
        self.state.q.width()
    }

    fn select_action(&mut self, state: StateId, rng: &mut RngStream) -> Result<ActionId> {
        self.select(state, rng).map(|(a, _)| a)
    }

    fn observe(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: u8,
        next_state: StateId,
        change_signal: bool,
    ) -> Result<()> {
        self.update(state, action, f64::from(reward), next_state, change_signal)
    }

    fn policy(&self, state: StateId) -> Result<PolicyDistribution> {
        self.softmax_policy(state)
    }

    fn snapshot(&self, state: StateId, action: ActionId) -> Snapshot {
        Snapshot {
            temperature: Some(self.state.temperature),
            eps: self.state.eps,
            psi_chosen: self.state.psi.row(state).get(action).copied(),
        }
    }
}

/// Epsilon-greedy choice: the coin is drawn first, then at most one uniform
/// index. Greedy ties go to the lowest index.
pub fn baseline_select(q_row: &[f64], eps: f64, rng: &mut RngStream) -> ActionId {
    if rng.uniform() < eps {
        rng.index(q_row.len())
    } else {
        argmax(q_row)
    }
}

/// `eps / |A|` on every arm plus `1 - eps` on the greedy arm.
pub fn baseline_policy_distribution(q_row: &[f64], eps: f64) -> Result<PolicyDistribution> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("epsilon {eps} outside [0, 1]")));
    }
    if q_row.is_empty() {
        return Err(Error::invalid("empty q row"));
    }
    let mut probs = vec![eps / q_row.len() as f64; q_row.len()];
    probs[argmax(q_row)] += 1.0 - eps;
    PolicyDistribution::new(probs)
}

#[derive(Debug, Clone)]
pub struct BaselineAgent {
    params: BaselineParams,
    q: Table<f64>,
    eps: f64,
}

impl BaselineAgent {
    pub fn new(num_arms: usize, params: BaselineParams) -> Result<Self> {
        params.validate()?;
        if num_arms == 0 {
            return Err(Error::invalid("agent needs at least one arm"));
        }
        Ok(Self {
            eps: params.eps_init,
            q: Table::new(num_arms),
            params,
        })
    }

    pub fn q(&self) -> &Table<f64> {
        &self.q
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
    }
}

impl Agent for BaselineAgent {
    fn num_arms(&self) -> usize {
        self.q.width()
    }

    fn select_action(&mut self, state: StateId, rng: &mut RngStream) -> Result<ActionId> {
        Ok(baseline_select(self.q.row(state), self.eps, rng))
    }

    fn observe(
        &mut self,
        state: StateId,
        action: ActionId,
        reward: u8,
        next_state: StateId,
        _change_signal: bool,
    ) -> Result<()> {
        let width = self.q.width();
        if action >= width {
            return Err(Error::invalid(format!("action {action} out of range for {width} arms")));
        }
        let next_max = max_of(self.q.row(next_state));
        let p = &self.params;
        td_update(self.q.row_mut(state), action, f64::from(reward), next_max, p.eta, p.discount);
        self.eps = (self.eps - p.eps_decay).max(p.eps_floor);
        Ok(())
    }

    fn policy(&self, state: StateId) -> Result<PolicyDistribution> {
        baseline_policy_distribution(self.q.row(state), self.eps)
    }

    fn snapshot(&self, _state: StateId, _action: ActionId) -> Snapshot {
        Snapshot {
            temperature: None,
            eps: self.eps,
            psi_chosen: None,
        }
    }
}
