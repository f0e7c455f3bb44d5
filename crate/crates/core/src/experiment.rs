//! Seeded experiment runs and cross-seed aggregation.
//!
//! A run pits the free-will agent and the baseline against two bandits that
//! share a schedule but draw rewards from independent streams. Every random
//! stream of a run is derived from the run seed (see [`crate::rng::lanes`]),
//! so a run is a pure function of `(config, seed)` and runs can execute in
//! any order or in parallel.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, BaselineAgent, BaselineParams, FreeWillAgent, FreeWillParams, StateMode};
use crate::env::{BanditEnv, PhaseSchedule, Step};
use crate::error::{Error, Result};
use crate::metrics::{
    cumulative_regret, kl_divergence, moving_average, novelty_series, shannon_entropy, LogBase,
    StepRecord,
};
use crate::rng::{lanes, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schedule: PhaseSchedule,
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub freewill: FreeWillParams,
    pub baseline: BaselineParams,
    pub metrics_window: usize,
    pub state_mode: StateMode,
    /// Steps at which the free-will agent receives a change signal. `None`
    /// means every phase boundary of the schedule.
    pub oracle_steps: Option<Vec<Step>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.freewill.validate()?;
        self.baseline.validate()?;
        if self.metrics_window == 0 {
            return Err(Error::config("experiment.metrics_window", "must be positive"));
        }
        if self.total_steps <= self.metrics_window {
            return Err(Error::config(
                "experiment.total_steps",
                format!(
                    "{} must exceed metrics_window {}",
                    self.total_steps, self.metrics_window
                ),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "no seeds given"));
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::config("experiment.seeds", "seeds must be distinct"));
        }
        Ok(())
    }

    pub fn change_signal_steps(&self) -> BTreeSet<Step> {
        match &self.oracle_steps {
            Some(steps) => steps.iter().copied().collect(),
            None => self.schedule.change_steps().collect(),
        }
    }

    pub fn num_arms(&self) -> usize {
        self.schedule.num_arms()
    }
}

/// Both agents' step records for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTraces {
    pub seed: u64,
    pub freewill: Vec<StepRecord>,
    pub baseline: Vec<StepRecord>,
}

fn step_agent<A: Agent>(
    agent: &mut A,
    env: &mut BanditEnv,
    rng: &mut RngStream,
    t: Step,
    mode: StateMode,
    change_signal: bool,
) -> Result<StepRecord> {
    let state = mode.state_at(t);
    let next_state = mode.state_at(t + 1);
    let action = agent.select_action(state, rng)?;
    let reward = env.step(action)?;
    agent.observe(state, action, reward, next_state, change_signal)?;
    let snap = agent.snapshot(state, action);
    Ok(StepRecord {
        t,
        action,
        reward,
        policy: agent.policy(state)?,
        temperature: snap.temperature,
        eps: snap.eps,
        psi_chosen: snap.psi_chosen,
    })
}

/// One seeded run of both agents for `total_steps`.
///
/// Policy snapshots are taken after the agent has observed the step's reward.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunTraces> {
    config.validate()?;
    let arms = config.num_arms();
    let mut fw = FreeWillAgent::new(arms, config.freewill.clone())?;
    let mut base = BaselineAgent::new(arms, config.baseline.clone())?;
    let mut fw_env = BanditEnv::new(
        config.schedule.clone(),
        RngStream::for_lane(seed, lanes::FREEWILL_ENV),
    );
    let mut base_env = BanditEnv::new(
        config.schedule.clone(),
        RngStream::for_lane(seed, lanes::BASELINE_ENV),
    );
    let mut fw_rng = RngStream::for_lane(seed, lanes::FREEWILL_AGENT);
    let mut base_rng = RngStream::for_lane(seed, lanes::BASELINE_AGENT);
    let signals = config.change_signal_steps();

    let mut out = RunTraces {
        seed,
        freewill: Vec::with_capacity(config.total_steps),
        baseline: Vec::with_capacity(config.total_steps),
    };
    for t in 0..config.total_steps {
        let signal = signals.contains(&t);
        out.baseline.push(step_agent(
            &mut base,
            &mut base_env,
            &mut base_rng,
            t,
            config.state_mode,
            false,
        )?);
        out.freewill.push(step_agent(
            &mut fw,
            &mut fw_env,
            &mut fw_rng,
            t,
            config.state_mode,
            signal,
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RollingReward,
    EntropyBits,
    EntropyNats,
    Kl,
    Novelty,
    Regret,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::RollingReward,
        Metric::EntropyBits,
        Metric::EntropyNats,
        Metric::Kl,
        Metric::Novelty,
        Metric::Regret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RollingReward => "rolling_reward",
            Metric::EntropyBits => "entropy_bits",
            Metric::EntropyNats => "entropy_nats",
            Metric::Kl => "kl",
            Metric::Novelty => "novelty",
            Metric::Regret => "regret",
        }
    }

    /// KL compares the free-will policy against the baseline, so it has a
    /// single series reported under the free-will agent.
    pub fn agents(self) -> &'static [AgentKind] {
        match self {
            Metric::Kl => &[AgentKind::FreeWill],
            _ => &[AgentKind::FreeWill, AgentKind::Baseline],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    FreeWill,
    Baseline,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::FreeWill => "freewill",
            AgentKind::Baseline => "baseline",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgentKind::FreeWill => "Free-Will Agent",
            AgentKind::Baseline => "Baseline Agent",
        }
    }
}

/// Every metric series of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub series: Vec<(Metric, AgentKind, Vec<f64>)>,
}

impl RunMetrics {
    pub fn compute(traces: &RunTraces, schedule: &PhaseSchedule, window: usize) -> Result<Self> {
        let arms = schedule.num_arms();
        let mut series = Vec::new();
        for metric in Metric::ALL {
            for agent in metric.agents() {
                let recs = match agent {
                    AgentKind::FreeWill => &traces.freewill,
                    AgentKind::Baseline => &traces.baseline,
                };
                let values = match metric {
                    Metric::RollingReward => {
                        let rewards: Vec<f64> = recs.iter().map(|r| f64::from(r.reward)).collect();
                        moving_average(&rewards, window)?
                    }
                    Metric::EntropyBits => recs
                        .iter()
                        .map(|r| shannon_entropy(&r.policy, LogBase::Two))
                        .collect(),
                    Metric::EntropyNats => recs
                        .iter()
                        .map(|r| shannon_entropy(&r.policy, LogBase::E))
                        .collect(),
                    Metric::Kl => traces
                        .freewill
                        .iter()
                        .zip(&traces.baseline)
                        .map(|(f, b)| kl_divergence(&f.policy, &b.policy))
                        .collect::<Result<_>>()?,
                    Metric::Novelty => {
                        let actions: Vec<_> = recs.iter().map(|r| r.action).collect();
                        novelty_series(&actions, arms)?
                    }
                    Metric::Regret => cumulative_regret(recs, schedule)?,
                };
                series.push((metric, *agent, values));
            }
        }
        Ok(Self {
            seed: traces.seed,
            series,
        })
    }

    pub fn get(&self, metric: Metric, agent: AgentKind) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(m, a, _)| *m == metric && *a == agent)
            .map(|(_, _, v)| v.as_slice())
    }
}

/// Cross-seed mean and population standard deviation of one metric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub metric: Metric,
    pub agent: AgentKind,
    /// Step index of the first entry; rolling series start at `window - 1`.
    pub offset: Step,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub total_steps: usize,
    pub window: usize,
    pub series: Vec<SeriesStats>,
    pub runs: Vec<RunTraces>,
    pub run_metrics: Vec<RunMetrics>,
}

impl AggregateResult {
    pub fn get(&self, metric: Metric, agent: AgentKind) -> Option<&SeriesStats> {
        self.series
            .iter()
            .find(|s| s.metric == metric && s.agent == agent)
    }
}

/// Elementwise mean and population standard deviation (divisor N), computed
/// with Welford's update.
pub fn aggregate(series_set: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = series_set
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate zero series"))?;
    let len = first.len();
    if let Some(i) = series_set.iter().position(|s| s.len() != len) {
        return Err(Error::invalid(format!(
            "series {i} has length {}, expected {len}",
            series_set[i].len()
        )));
    }
    let mut mean = vec![0.0; len];
    let mut m2 = vec![0.0; len];
    for (k, s) in series_set.iter().enumerate() {
        let count = (k + 1) as f64;
        for ((m, acc), x) in mean.iter_mut().zip(m2.iter_mut()).zip(s) {
            let delta = x - *m;
            *m += delta / count;
            *acc += delta * (x - *m);
        }
    }
    let n = series_set.len() as f64;
    let std = m2.into_iter().map(|v| (v / n).max(0.0).sqrt()).collect();
    Ok((mean, std))
}

fn tag(seed: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Run {
        seed,
        source: Box::new(e),
    }
}

/// Runs every seed (in parallel on the current rayon pool), then aggregates.
/// Results are joined in seed-list order.
pub fn run_many(config: &ExperimentConfig) -> Result<AggregateResult> {
    config.validate()?;
    let per_run: Vec<(RunTraces, RunMetrics)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let traces = run_single(config, seed).map_err(tag(seed))?;
            let metrics = RunMetrics::compute(&traces, &config.schedule, config.metrics_window)
                .map_err(tag(seed))?;
            Ok((traces, metrics))
        })
        .collect::<Result<_>>()?;
    let (runs, run_metrics): (Vec<_>, Vec<_>) = per_run.into_iter().unzip();
    aggregate_runs(config, runs, run_metrics)
}

/// Same as [`run_many`] with parallelism capped at `jobs` threads.
pub fn run_many_with_jobs(config: &ExperimentConfig, jobs: Option<usize>) -> Result<AggregateResult> {
    match jobs {
        None => run_many(config),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| run_many(config))
        }
    }
}

fn aggregate_runs(
    config: &ExperimentConfig,
    runs: Vec<RunTraces>,
    run_metrics: Vec<RunMetrics>,
) -> Result<AggregateResult> {
    let mut series = Vec::new();
    for metric in Metric::ALL {
        for agent in metric.agents() {
            let set: Vec<Vec<f64>> = run_metrics
                .iter()
                .map(|m| m.get(metric, *agent).unwrap_or_default().to_vec())
                .collect();
            let (mean, std) = aggregate(&set)?;
            let offset = match metric {
                Metric::RollingReward => config.metrics_window - 1,
                _ => 0,
            };
            series.push(SeriesStats {
                metric,
                agent: *agent,
                offset,
                mean,
                std,
            });
        }
    }
    Ok(AggregateResult {
        total_steps: config.total_steps,
        window: config.metrics_window,
        series,
        runs,
        run_metrics,
    })
}

/// Mean over runs of each run's average raw reward in its final `tail` steps.
pub fn final_reward(result: &AggregateResult, agent: AgentKind, tail: usize) -> (f64, f64) {
    let per_run: Vec<Vec<f64>> = result
        .runs
        .iter()
        .map(|r| {
            let recs = match agent {
                AgentKind::FreeWill => &r.freewill,
                AgentKind::Baseline => &r.baseline,
            };
            let start = recs.len().saturating_sub(tail);
            let slice = &recs[start..];
            vec![slice.iter().map(|x| f64::from(x.reward)).sum::<f64>() / slice.len() as f64]
        })
        .collect();
    let (m, s) = aggregate(&per_run).expect("at least one run");
    (m[0], s[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ten_arm_schedule, four_arm_schedule};

    fn config(schedule: PhaseSchedule, seeds: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            schedule,
            total_steps: 2000,
            seeds,
            freewill: FreeWillParams::default(),
            baseline: BaselineParams::default(),
            metrics_window: 50,
            state_mode: StateMode::Single,
            oracle_steps: None,
        }
    }

    #[test]
    fn aggregate_examples() {
        let (m, s) = aggregate(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(m, vec![2.0, 2.0]);
        assert_eq!(s, vec![1.0, 1.0]);
        let (m, s) = aggregate(&[vec![0.3, 0.7, 1e6]]).unwrap();
        assert_eq!(m, vec![0.3, 0.7, 1e6]);
        assert_eq!(s, vec![0.0; 3]);
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn run_lengths_and_determinism() {
        let cfg = config(four_arm_schedule(), vec![3]);
        let a = run_single(&cfg, 3).unwrap();
        let b = run_single(&cfg, 3).unwrap();
        assert_eq!(a.freewill.len(), 2000);
        assert_eq!(a.baseline.len(), 2000);
        assert_eq!(a, b);
        let c = run_single(&cfg, 4).unwrap();
        assert_ne!(a.freewill, c.freewill);
    }

    #[test]
    fn degenerate_bandit_always_pays() {
        let cfg = config(PhaseSchedule::stationary(vec![1.0]).unwrap(), vec![0]);
        let run = run_single(&cfg, 0).unwrap();
        assert!(run.freewill.iter().chain(&run.baseline).all(|r| r.reward == 1));
    }

    #[test]
    fn single_seed_has_zero_std() {
        let mut cfg = config(ten_arm_schedule(), vec![5]);
        cfg.total_steps = 300;
        let res = run_many(&cfg).unwrap();
        for s in &res.series {
            assert!(s.std.iter().all(|x| *x == 0.0), "{:?}", s.metric);
        }
        let rr = res.get(Metric::RollingReward, AgentKind::FreeWill).unwrap();
        assert_eq!(rr.mean.len(), 251);
        assert_eq!(rr.offset, 49);
    }

    #[test]
    fn oracle_signal_resets_epsilon_at_change() {
        let mut cfg = config(four_arm_schedule(), vec![0]);
        cfg.freewill.trigger_variant = crate::agent::TriggerVariant::Oracle;
        let run = run_single(&cfg, 0).unwrap();
        assert_eq!(run.freewill[999].eps, 0.01);
        assert!((run.freewill[1000].eps - 0.499).abs() < 1e-15);
        assert_eq!(run.freewill[1000].temperature, Some(0.5));
        assert_eq!(run.baseline[1000].eps, 0.01);
    }

    #[test]
    fn validation_errors_name_keys() {
        let mut cfg = config(four_arm_schedule(), vec![]);
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "experiment.seeds"));
        cfg.seeds = vec![1, 1];
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "experiment.seeds"));
        cfg.seeds = vec![1];
        cfg.total_steps = 50;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "experiment.total_steps"));
    }

    #[test]
    fn kl_error_is_tagged_with_seed() {
        let mut cfg = config(four_arm_schedule(), vec![7]);
        cfg.total_steps = 100;
        cfg.baseline.eps_init = 0.0;
        cfg.baseline.eps_floor = 0.0;
        match run_many(&cfg) {
            Err(Error::Run { seed: 7, source }) => {
                assert!(matches!(*source, Error::DivergenceUndefined { .. }))
            }
            other => panic!("{other:?}"),
        }
    }
}
