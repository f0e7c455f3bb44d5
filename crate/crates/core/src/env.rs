//! Non-stationary Bernoulli bandits driven by phase schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ActionId;
use crate::rng::{bernoulli, RngStream};

pub type Step = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub start_step: Step,
    pub probs: Vec<f64>,
}

/// Time-indexed arm reward probabilities.
///
/// The first phase starts at step 0, start steps strictly increase, and every
/// phase has the same number of arms with probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Phase>", into = "Vec<Phase>")]
pub struct PhaseSchedule {
    phases: Vec<Phase>,
}

impl PhaseSchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        let first = phases
            .first()
            .ok_or_else(|| Error::invalid("schedule has no phases"))?;
        if first.start_step != 0 {
            return Err(Error::invalid(format!(
                "first phase starts at step {}, expected 0",
                first.start_step
            )));
        }
        let arms = first.probs.len();
        if arms == 0 {
            return Err(Error::invalid("phase 0 has no arms"));
        }
        for (i, phase) in phases.iter().enumerate() {
            if phase.probs.len() != arms {
                return Err(Error::invalid(format!(
                    "phase {i} has {} arms, expected {arms}",
                    phase.probs.len()
                )));
            }
            if let Some(p) = phase.probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::invalid(format!("phase {i} probability {p} outside [0, 1]")));
            }
            if i > 0 && phase.start_step <= phases[i - 1].start_step {
                return Err(Error::invalid(format!(
                    "phase {i} start step {} does not follow {}",
                    phase.start_step,
                    phases[i - 1].start_step
                )));
            }
        }
        Ok(Self { phases })
    }

    pub fn stationary(probs: Vec<f64>) -> Result<Self> {
        Self::new(vec![Phase {
            start_step: 0,
            probs,
        }])
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn num_arms(&self) -> usize {
        self.phases[0].probs.len()
    }

    /// Steps at which a new phase begins (excluding step 0).
    pub fn change_steps(&self) -> impl Iterator<Item = Step> + '_ {
        self.phases.iter().skip(1).map(|p| p.start_step)
    }

    /// Arm probabilities of the last phase whose start step is `<= t`.
    pub fn active_probs(&self, t: Step) -> &[f64] {
        let idx = self.phases.partition_point(|p| p.start_step <= t);
        &self.phases[idx - 1].probs
    }

    /// Best expected reward available at step `t`.
    pub fn optimal_expected(&self, t: Step) -> f64 {
        self.active_probs(t)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<Phase>> for PhaseSchedule {
    type Error = Error;

    fn try_from(phases: Vec<Phase>) -> Result<Self> {
        Self::new(phases)
    }
}

impl From<PhaseSchedule> for Vec<Phase> {
    fn from(s: PhaseSchedule) -> Self {
        s.phases
    }
}

/// Step at which both built-in schedules switch phase.
pub const CHANGE_STEP: Step = 1000;

/// Four arms; arm 0 is best until step 1000, then arm 2.
pub fn four_arm_schedule() -> PhaseSchedule {
    PhaseSchedule::new(vec![
        Phase {
            start_step: 0,
            probs: vec![0.8, 0.5, 0.3, 0.2],
        },
        Phase {
            start_step: CHANGE_STEP,
            probs: vec![0.2, 0.3, 0.8, 0.2],
        },
    ])
    .expect("built-in schedule is valid")
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    // numpy: start + i * step, with the last entry pinned to `stop`.
    let step = (stop - start) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
    v[n - 1] = stop;
    v
}

/// Ten arms laid out as `linspace(0.1, 0.8, 10)` with the top arm overwritten
/// to 0.2, so arm 8 is best; after step 1000 the spacing is reversed and
/// arm 0 overwritten to 0.2, so arm 1 is best. The overwrites mean the end
/// arms (9, then 0) are never the optimum, even though they sit at the top of
/// the unmodified spacing.
pub fn ten_arm_schedule() -> PhaseSchedule {
    let n = 10;
    let mut first = linspace(0.1, 0.8, n);
    first[n - 1] = 0.2;
    let mut second: Vec<f64> = linspace(0.1, 0.8, n).into_iter().rev().collect();
    second[0] = 0.2;
    PhaseSchedule::new(vec![
        Phase {
            start_step: 0,
            probs: first,
        },
        Phase {
            start_step: CHANGE_STEP,
            probs: second,
        },
    ])
    .expect("built-in schedule is valid")
}

/// One bandit instance: a schedule, a step clock and its own reward stream.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    schedule: PhaseSchedule,
    clock: Step,
    rng: RngStream,
}

impl BanditEnv {
    pub fn new(schedule: PhaseSchedule, rng: RngStream) -> Self {
        Self {
            schedule,
            clock: 0,
            rng,
        }
    }

    pub fn clock(&self) -> Step {
        self.clock
    }

    pub fn schedule(&self) -> &PhaseSchedule {
        &self.schedule
    }

    pub fn num_arms(&self) -> usize {
        self.schedule.num_arms()
    }

    pub fn active_probs(&self, t: Step) -> &[f64] {
        self.schedule.active_probs(t)
    }

    pub fn optimal_expected(&self, t: Step) -> f64 {
        self.schedule.optimal_expected(t)
    }

    /// Pulls `action` at the current clock and advances the clock by one.
    pub fn step(&mut self, action: ActionId) -> Result<u8> {
        let probs = self.schedule.active_probs(self.clock);
        let p = *probs.get(action).ok_or_else(|| {
            Error::invalid(format!("action {action} out of range for {} arms", probs.len()))
        })?;
        let reward = bernoulli(p, &mut self.rng)?;
        self.clock += 1;
        Ok(reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_arm_phases() {
        let s = four_arm_schedule();
        assert_eq!(s.active_probs(0)[0], 0.8);
        assert_eq!(s.active_probs(999)[0], 0.8);
        assert_eq!(s.active_probs(1000)[2], 0.8);
        assert_eq!(crate::policy::argmax(s.active_probs(0)), 0);
        assert_eq!(crate::policy::argmax(s.active_probs(1000)), 2);
        assert_eq!(s.change_steps().collect::<Vec<_>>(), vec![1000]);
    }

    #[test]
    fn ten_arm_layout() {
        let s = ten_arm_schedule();
        let p1 = s.active_probs(0);
        // 0.1 + 8 * (0.7 / 9)
        assert!((p1[8] - 0.722_222_222_222_222_2).abs() < 1e-12);
        assert_eq!(p1[9], 0.2);
        assert_eq!(crate::policy::argmax(p1), 8);
        let p2 = s.active_probs(1000);
        assert_eq!(p2[0], 0.2);
        assert!((p2[1] - 0.722_222_222_222_222_2).abs() < 1e-12);
        assert_eq!(crate::policy::argmax(p2), 1);
        assert_eq!(p2[9], 0.1);
    }

    #[test]
    fn optimal_expected_values() {
        let s4 = four_arm_schedule();
        assert_eq!(s4.optimal_expected(10), 0.8);
        assert_eq!(s4.optimal_expected(1500), 0.8);
        let s10 = ten_arm_schedule();
        assert!((s10.optimal_expected(0) - 0.722_222_222_222_222_2).abs() < 1e-12);
    }

    #[test]
    fn single_phase_is_constant() {
        let s = PhaseSchedule::stationary(vec![0.3, 0.6]).unwrap();
        for t in [0, 1, 999, 1_000_000] {
            assert_eq!(s.active_probs(t), &[0.3, 0.6]);
        }
    }

    #[test]
    fn right_continuous_at_boundaries() {
        let s = PhaseSchedule::new(vec![
            Phase { start_step: 0, probs: vec![0.1] },
            Phase { start_step: 5, probs: vec![0.2] },
            Phase { start_step: 9, probs: vec![0.3] },
        ])
        .unwrap();
        assert_eq!(s.active_probs(4), &[0.1]);
        assert_eq!(s.active_probs(5), &[0.2]);
        assert_eq!(s.active_probs(8), &[0.2]);
        assert_eq!(s.active_probs(9), &[0.3]);
    }

    #[test]
    fn schedule_validation() {
        let p = |start_step, probs: &[f64]| Phase { start_step, probs: probs.to_vec() };
        assert!(PhaseSchedule::new(vec![]).is_err());
        assert!(PhaseSchedule::new(vec![p(1, &[0.5])]).is_err());
        assert!(PhaseSchedule::new(vec![p(0, &[0.5]), p(0, &[0.5])]).is_err());
        assert!(PhaseSchedule::new(vec![p(0, &[0.5]), p(3, &[0.5, 0.1])]).is_err());
        assert!(PhaseSchedule::new(vec![p(0, &[1.2])]).is_err());
        assert!(PhaseSchedule::new(vec![p(0, &[])]).is_err());
    }

    #[test]
    fn certain_and_impossible_arms() {
        let s = PhaseSchedule::stationary(vec![1.0, 0.0]).unwrap();
        let mut env = BanditEnv::new(s, RngStream::new(0));
        for _ in 0..50 {
            assert_eq!(env.step(0).unwrap(), 1);
            assert_eq!(env.step(1).unwrap(), 0);
        }
        assert_eq!(env.clock(), 100);
    }

    #[test]
    fn out_of_range_action() {
        let mut env = BanditEnv::new(four_arm_schedule(), RngStream::new(0));
        assert!(matches!(env.step(4), Err(Error::InvalidInput(_))));
        assert_eq!(env.clock(), 0);
    }

    #[test]
    fn arm_means_follow_the_active_phase() {
        let mut env = BanditEnv::new(four_arm_schedule(), RngStream::new(17));
        let mut mean = |n: u32| {
            let hits: u32 = (0..n).map(|_| u32::from(env.step(0).unwrap())).sum();
            f64::from(hits) / f64::from(n)
        };
        // 1000 draws at p = 0.8 have a standard error of about 0.013.
        let before = mean(1000);
        assert!((0.75..=0.85).contains(&before), "{before}");
        let after = mean(20_000);
        assert!((0.19..=0.21).contains(&after), "{after}");
        assert_eq!(env.clock(), 21_000);
    }

    #[test]
    fn fixed_arm_converges_to_scheduled_probability() {
        let sched = PhaseSchedule::stationary(vec![0.37, 0.61, 0.05]).unwrap();
        for arm in 0..3 {
            let mut env = BanditEnv::new(sched.clone(), RngStream::new(100 + arm as u64));
            let hits: u32 = (0..100_000).map(|_| u32::from(env.step(arm).unwrap())).sum();
            let mean = f64::from(hits) / 100_000.0;
            assert!((mean - sched.active_probs(0)[arm]).abs() <= 0.01);
        }
    }

    #[test]
    fn reward_sequence_is_deterministic() {
        let mut a = BanditEnv::new(ten_arm_schedule(), RngStream::new(8));
        let mut b = BanditEnv::new(ten_arm_schedule(), RngStream::new(8));
        for t in 0..2000 {
            let arm = (t * 7) % 10;
            assert_eq!(a.step(arm).unwrap(), b.step(arm).unwrap());
        }
    }

    #[test]
    fn schedule_serde_validates() {
        let ok: PhaseSchedule =
            serde_json::from_str(r#"[{"start_step":0,"probs":[0.5,0.5]}]"#).unwrap();
        assert_eq!(ok.num_arms(), 2);
        let bad = serde_json::from_str::<PhaseSchedule>(r#"[{"start_step":2,"probs":[0.5]}]"#);
        assert!(bad.is_err());
    }
}
