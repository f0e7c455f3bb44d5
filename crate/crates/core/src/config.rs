//! The JSON run-config file, `key=value` overrides and built-in presets.
//!
//! ```json
//! {
//!   "schedule": [{"start_step": 0, "probs": [0.8, 0.5, 0.3, 0.2]},
//!                {"start_step": 1000, "probs": [0.2, 0.3, 0.8, 0.2]}],
//!   "agents": {"freewill": {"alpha": 0.1}, "baseline": {}},
//!   "experiment": {"total_steps": 2000, "seeds": [0, 1, 2]},
//!   "report": {"novelty_zoom": 250}
//! }
//! ```
//!
//! Omitted agent, experiment and report fields take their defaults. Override
//! keys are dotted paths; `freewill.*` and `baseline.*` are shorthands for
//! `agents.freewill.*` and `agents.baseline.*`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::{BaselineParams, FreeWillParams, ScoreVariant, StateMode, TriggerVariant};
use crate::env::{ten_arm_schedule, four_arm_schedule, PhaseSchedule, Step};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsSection {
    pub freewill: FreeWillParams,
    pub baseline: BaselineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_total_steps")]
    pub total_steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_window")]
    pub metrics_window: usize,
    #[serde(default = "default_state_mode")]
    pub state_mode: StateMode,
    #[serde(default)]
    pub oracle_steps: Option<Vec<Step>>,
}

fn default_total_steps() -> usize {
    2000
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_window() -> usize {
    50
}

fn default_state_mode() -> StateMode {
    StateMode::Single
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            total_steps: default_total_steps(),
            seeds: default_seeds(),
            metrics_window: default_window(),
            state_mode: default_state_mode(),
            oracle_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// Number of leading steps shown in the novelty plot; 0 shows everything.
    pub novelty_zoom: usize,
    pub write_traces: bool,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            novelty_zoom: 250,
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: PhaseSchedule,
    #[serde(default)]
    pub agents: AgentsSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub report: ReportSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(display_key(&path), e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("config serializes")
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            schedule: self.schedule.clone(),
            total_steps: self.experiment.total_steps,
            seeds: self.experiment.seeds.clone(),
            freewill: self.agents.freewill.clone(),
            baseline: self.agents.baseline.clone(),
            metrics_window: self.experiment.metrics_window,
            state_mode: self.experiment.state_mode,
            oracle_steps: self.experiment.oracle_steps.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment_config().validate()
    }

    /// Applies `key=value` overrides. Values parse as JSON where possible and
    /// fall back to bare strings, so `freewill.score_variant=code` works.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut value = self.to_value();
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, val) = raw
                .split_once('=')
                .ok_or_else(|| Error::config(raw, "override must look like KEY=VALUE"))?;
            let parsed = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
            set_path(&mut value, key.trim(), parsed)?;
        }
        Self::from_value(value)
    }

    /// Adds `base` to every seed (wrapping).
    pub fn offset_seeds(&mut self, base: u64) {
        for s in &mut self.experiment.seeds {
            *s = s.wrapping_add(base);
        }
    }
}

fn display_key(path: &str) -> String {
    let p = path
        .strip_prefix("agents.")
        .filter(|rest| rest.starts_with("freewill") || rest.starts_with("baseline"))
        .unwrap_or(path);
    if p.is_empty() || p == "." {
        "<root>".to_string()
    } else {
        p.to_string()
    }
}

fn canonical_path(key: &str) -> Vec<&str> {
    let parts: Vec<&str> = key.split('.').collect();
    match parts.first() {
        Some(&"freewill") | Some(&"baseline") => std::iter::once("agents").chain(parts).collect(),
        _ => parts,
    }
}

/// Replaces an existing entry; unknown keys are rejected.
pub fn set_path(root: &mut Value, key: &str, new: Value) -> Result<()> {
    let path = canonical_path(key);
    let mut cursor = root;
    for (i, part) in path.iter().enumerate() {
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| Error::config(key, "path does not name a config section"))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::config(key, "unknown config key"))?;
        if i + 1 == path.len() {
            *slot = new;
            return Ok(());
        }
        cursor = slot;
    }
    Err(Error::config(key, "empty key"))
}

pub fn get_path<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    canonical_path(key)
        .into_iter()
        .try_fold(root, |v, part| v.as_object()?.get(part))
}

/// Parses `0..9` (inclusive), `3` or `1,4,7` into a seed list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = |msg: String| Error::config("--seeds", msg);
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: u64 = lo.trim().parse().map_err(|_| bad(format!("bad range start in `{part}`")))?;
            let hi: u64 = hi.trim().parse().map_err(|_| bad(format!("bad range end in `{part}`")))?;
            if hi < lo {
                return Err(bad(format!("empty range `{part}`")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad(format!("bad seed `{part}`")))?);
        }
    }
    if out.is_empty() {
        return Err(bad("no seeds".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    FourArm,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "fig3" => Some(Preset::Fig3),
            "fig4" => Some(Preset::Fig4),
            "fig5" => Some(Preset::Fig5),
            "fourarm" => Some(Preset::FourArm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::FourArm => "fourarm",
        }
    }

    /// Frozen configuration for the preset. All presets use the oracle
    /// trigger with the change signal at the schedule's phase boundary.
    /// `fourarm` keys every step to one state and uses the formula scores;
    /// the ten-arm presets use code scores and one state per step.
    pub fn config(self) -> RunConfig {
        let (schedule, score_variant, state_mode) = match self {
            Preset::FourArm => (four_arm_schedule(), ScoreVariant::Formula, StateMode::Single),
            Preset::Fig3 | Preset::Fig4 | Preset::Fig5 => {
                (ten_arm_schedule(), ScoreVariant::Code, StateMode::Time)
            }
        };
        RunConfig {
            schedule,
            agents: AgentsSection {
                freewill: FreeWillParams {
                    score_variant,
                    trigger_variant: TriggerVariant::Oracle,
                    ..FreeWillParams::default()
                },
                baseline: BaselineParams::default(),
            },
            experiment: ExperimentSection {
                state_mode,
                ..ExperimentSection::default()
            },
            report: ReportSettings::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schedule": [{"start_step": 0, "probs": [0.2, 0.7]}]}"#;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.agents.freewill, FreeWillParams::default());
        assert_eq!(cfg.experiment.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(cfg.report.novelty_zoom, 250);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = Preset::FourArm.config();
        let back = RunConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let cfg = cfg
            .with_overrides(&[
                "freewill.alpha=0.2",
                "freewill.score_variant=code",
                "experiment.seeds=[4,5]",
                "baseline.eps_floor=0.02",
            ])
            .unwrap();
        assert_eq!(cfg.agents.freewill.alpha, 0.2);
        assert_eq!(cfg.agents.freewill.score_variant, ScoreVariant::Code);
        assert_eq!(cfg.experiment.seeds, vec![4, 5]);
        assert_eq!(cfg.agents.baseline.eps_floor, 0.02);
    }

    #[test]
    fn unknown_override_key_is_config_error() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        for bad in ["freewill.beta=1", "nope=1", "freewill.alpha.x=1", "freewill.alpha"] {
            assert!(matches!(cfg.with_overrides(&[bad]), Err(Error::Config { .. })), "{bad}");
        }
    }

    #[test]
    fn bad_values_name_the_key() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        match cfg.with_overrides(&["freewill.alpha=\"x\""]) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "freewill.alpha"),
            other => panic!("{other:?}"),
        }
        match cfg.with_overrides(&["freewill.t_max=0.1"]) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "freewill.t_init"),
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"schedule": [{"start_step": 0, "probs": [0.5]}], "agents": {"freewill": {"beta": 1}}}"#;
        assert!(matches!(RunConfig::from_json(unknown), Err(Error::Config { key, .. }) if key.starts_with("freewill")));
        let bad_sched = r#"{"schedule": [{"start_step": 3, "probs": [0.5]}]}"#;
        assert!(matches!(RunConfig::from_json(bad_sched), Err(Error::Config { .. })));
    }

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("0..=2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("1, 4,7").unwrap(), vec![1, 4, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn seed_offset_wraps() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.experiment.seeds = vec![0, u64::MAX];
        cfg.offset_seeds(2);
        assert_eq!(cfg.experiment.seeds, vec![2, 1]);
    }

    #[test]
    fn presets_validate() {
        for p in [Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::FourArm] {
            p.config().validate().unwrap();
            assert_eq!(Preset::parse(p.name()), Some(p));
        }
        let four = Preset::FourArm.config();
        assert_eq!(four.schedule.change_steps().collect::<Vec<_>>(), vec![1000]);
        assert_eq!(four.agents.freewill.trigger_variant, TriggerVariant::Oracle);
        let fig = Preset::Fig4.config();
        assert_eq!(fig.schedule.num_arms(), 10);
        assert_eq!(fig.agents.freewill.score_variant, ScoreVariant::Code);
        assert_eq!(fig.experiment.state_mode, StateMode::Time);
        assert_eq!(four.experiment.state_mode, StateMode::Single);
        assert_eq!(four.agents.freewill.discount, 0.9);
        assert_eq!(four.agents.baseline.discount, 0.9);
    }

    #[test]
    fn get_path_reads_shorthand() {
        let v = Preset::Fig3.config().to_value();
        assert_eq!(get_path(&v, "freewill.alpha"), Some(&Value::from(0.1)));
        assert!(get_path(&v, "freewill.nope").is_none());
    }
}
