//! Time-series metrics over step traces.

use serde::{Deserialize, Serialize};

use crate::env::{PhaseSchedule, Step};
use crate::error::{Error, Result};
use crate::policy::{ActionId, PolicyDistribution};

/// One step of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: Step,
    pub action: ActionId,
    pub reward: u8,
    pub policy: PolicyDistribution,
    /// Softmax temperature; `None` for agents without one.
    pub temperature: Option<f64>,
    pub eps: f64,
    pub psi_chosen: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Two,
    E,
}

/// Windowed mean via a running sum. Output index `i` covers
/// `series[i..i + window]`.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    if series.len() < window {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than window {window}",
            series.len()
        )));
    }
    let w = window as f64;
    let mut sum: f64 = series[..window].iter().sum();
    let mut out = Vec::with_capacity(series.len() - window + 1);
    out.push(sum / w);
    for i in window..series.len() {
        sum += series[i] - series[i - window];
        out.push(sum / w);
    }
    Ok(out)
}

pub fn shannon_entropy(dist: &PolicyDistribution, base: LogBase) -> f64 {
    let nats: f64 = dist
        .probs()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let h = match base {
        LogBase::Two => nats / std::f64::consts::LN_2,
        LogBase::E => nats,
    };
    // Rounding can leave a deterministic policy at -0.0 or a hair below zero.
    h.max(0.0)
}

/// `KL(p || q)` in nats. Refuses to smooth: a zero in `q` under mass in `p`
/// is an error.
pub fn kl_divergence(p: &PolicyDistribution, q: &PolicyDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distributions have {} and {} entries",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (index, (pi, qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if *pi > 0.0 {
            if *qi <= 0.0 {
                return Err(Error::DivergenceUndefined { index, p: *pi });
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Fraction of distinct arms seen in each prefix of `actions`.
pub fn novelty_series(actions: &[ActionId], num_arms: usize) -> Result<Vec<f64>> {
    if num_arms == 0 {
        return Err(Error::invalid("num_arms must be positive"));
    }
    let mut seen = vec![false; num_arms];
    let mut distinct = 0usize;
    actions
        .iter()
        .map(|a| {
            let slot = seen
                .get_mut(*a)
                .ok_or_else(|| Error::invalid(format!("action {a} out of range")))?;
            if !*slot {
                *slot = true;
                distinct += 1;
            }
            Ok(distinct as f64 / num_arms as f64)
        })
        .collect()
}

/// Running sum of expected-reward gaps between the best arm and the chosen arm.
pub fn cumulative_regret(records: &[StepRecord], schedule: &PhaseSchedule) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::invalid("no records"));
    }
    let mut acc = 0.0;
    records
        .iter()
        .map(|r| {
            let probs = schedule.active_probs(r.t);
            let chosen = probs
                .get(r.action)
                .ok_or_else(|| Error::invalid(format!("action {} out of range", r.action)))?;
            acc += schedule.optimal_expected(r.t) - chosen;
            Ok(acc)
        })
        .collect()
}
