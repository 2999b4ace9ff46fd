//! Simulation configuration: TOML parsing with aggregated validation.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{RhsOptions, StepControl};
use crate::interface::{DomainSpec, MIN_GRID};
use crate::scenarios::ScenarioSpec;

/// Run-ending conditions besides reaching `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationOptions {
    /// Stop as blowup suspected once `dx * max|f_xx| > resolution_limit * max|f_x|`,
    /// i.e. once the curvature scale drops below the grid spacing.
    pub resolution_limit: f64,
    /// Wall-clock cap in seconds.
    pub wall_clock_seconds: Option<f64>,
}

impl Default for TerminationOptions {
    fn default() -> Self {
        Self {
            resolution_limit: 1.0,
            wall_clock_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub scenario: ScenarioSpec,
    pub domain: DomainSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub step: StepControl,
    pub rhs: RhsOptions,
    pub termination: TerminationOptions,
    pub t_end: f64,
    pub record_every: usize,
    pub gamma_prime: f64,
    pub output_dir: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
}

impl SimConfig {
    /// Config with documented defaults for everything but the required parts.
    pub fn new(scenario: ScenarioSpec, domain: DomainSpec, n: usize, t_end: f64) -> Self {
        Self {
            scenario,
            domain,
            n,
            step: StepControl::default(),
            rhs: RhsOptions::default(),
            termination: TerminationOptions::default(),
            t_end,
            record_every: 1,
            gamma_prime: 0.5,
            output_dir: None,
            snapshot_times: Vec::new(),
        }
    }

    /// Every violated invariant, including those of the generated profile.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.domain.validate() {
            out.push(format!("domain: {e}"));
        }
        if self.n < MIN_GRID {
            out.push(format!("N must be at least {MIN_GRID}, got {}", self.n));
        } else if self.domain.is_periodic() && !self.n.is_power_of_two() {
            out.push(format!("N must be a power of two for periodic domains, got {}", self.n));
        }
        out.extend(self.step.problems().into_iter().map(|p| format!("step: {p}")));
        if let Err(e) = self.rhs.validate() {
            out.push(format!("rhs: {e}"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            out.push(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if self.record_every == 0 {
            out.push("record_every must be at least 1".into());
        }
        if !(self.gamma_prime > 0.0 && self.gamma_prime <= 1.0) {
            out.push(format!("gamma_prime must lie in (0, 1], got {}", self.gamma_prime));
        }
        let limit = self.termination.resolution_limit;
        if !(limit.is_finite() && limit > 0.0) {
            out.push(format!("termination.resolution_limit must be positive, got {limit}"));
        }
        if let Some(w) = self.termination.wall_clock_seconds {
            if !(w.is_finite() && w > 0.0) {
                out.push(format!("termination.wall_clock_seconds must be positive, got {w}"));
            }
        }
        for &s in &self.snapshot_times {
            if !(s.is_finite() && s >= 0.0 && s <= self.t_end) {
                out.push(format!("snapshot time {s} outside [0, t_end]"));
            }
        }
        if out.is_empty() {
            if let Err(e) = self.scenario.build(&self.domain, self.n) {
                out.push(format!("scenario: {e}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

const TOP_KEYS: [&str; 11] = [
    "scenario",
    "domain",
    "N",
    "step",
    "rhs",
    "termination",
    "t_end",
    "record_every",
    "gamma_prime",
    "output_dir",
    "snapshot_times",
];

/// Parse and validate a TOML config. All problems found are reported
/// together in [`Error::Config`].
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut problems = Vec::new();
    for key in table.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())) {
        problems.push(format!("unknown key `{key}`"));
    }

    fn section<T: DeserializeOwned>(
        table: &toml::Table,
        key: &str,
        problems: &mut Vec<String>,
    ) -> Option<T> {
        let value = table.get(key)?;
        match value.clone().try_into::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                problems.push(format!("{key}: {}", e.to_string().trim()));
                None
            }
        }
    }
    let required = |key: &str, problems: &mut Vec<String>| {
        if !table.contains_key(key) {
            problems.push(format!("missing {key}"));
        }
    };
    required("scenario", &mut problems);
    required("domain", &mut problems);
    required("N", &mut problems);
    required("t_end", &mut problems);

    let scenario: Option<ScenarioSpec> = section(&table, "scenario", &mut problems);
    let domain: Option<DomainSpec> = section(&table, "domain", &mut problems);
    let n: Option<usize> = section(&table, "N", &mut problems);
    let t_end: Option<f64> = section(&table, "t_end", &mut problems);
    let step = section(&table, "step", &mut problems);
    let rhs = section(&table, "rhs", &mut problems);
    let termination = section(&table, "termination", &mut problems);
    let record_every = section(&table, "record_every", &mut problems);
    let gamma_prime = section(&table, "gamma_prime", &mut problems);
    let output_dir = section(&table, "output_dir", &mut problems);
    let snapshot_times = section(&table, "snapshot_times", &mut problems);

    let (Some(scenario), Some(domain), Some(n), Some(t_end)) = (scenario, domain, n, t_end) else {
        return Err(Error::Config(problems));
    };
    let mut cfg = SimConfig::new(scenario, domain, n, t_end);
    cfg.step = step.unwrap_or_default();
    cfg.rhs = rhs.unwrap_or_default();
    cfg.termination = termination.unwrap_or_default();
    cfg.record_every = record_every.unwrap_or(cfg.record_every);
    cfg.gamma_prime = gamma_prime.unwrap_or(cfg.gamma_prime);
    cfg.output_dir = output_dir;
    cfg.snapshot_times = snapshot_times.unwrap_or_default();
    problems.extend(cfg.problems());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(problems))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::TouchRule;
    use crate::interface::{Boundary, PlaneKind};

    const MINIMAL: &str = r#"
N = 256
t_end = 0.5

[domain]
plane = "half_plane"
boundary = { kind = "periodic", period = 1.0 }

[scenario]
kind = "periodic_touching_bump"
epsilon = 0.05
"#;

    fn messages(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(p)) => p,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n, 256);
        assert_eq!(c.domain.boundary, Boundary::Periodic { period: 1.0 });
        assert_eq!(c.domain.plane, PlaneKind::HalfPlane);
        assert_eq!(c.step, StepControl::default());
        assert_eq!(c.rhs.touch_rule, TouchRule::Cell { window: 4 });
        assert_eq!(c.record_every, 1);
        assert_eq!(c.gamma_prime, 0.5);
        assert_eq!(c.termination.resolution_limit, 1.0);
        assert!(c.snapshot_times.is_empty());
    }

    #[test]
    fn sections_override_defaults() {
        let text = format!(
            "{MINIMAL}\n[step]\nrtol = 1e-6\n\n[rhs]\ntouch_rule = {{ kind = \"node\" }}\n\n[termination]\nwall_clock_seconds = 30.0\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.step.rtol, 1e-6);
        assert_eq!(c.step.atol, StepControl::default().atol);
        assert_eq!(c.rhs.touch_rule, TouchRule::Node);
        assert_eq!(c.termination.wall_clock_seconds, Some(30.0));
    }

    #[test]
    fn empty_input_reports_missing_scenario() {
        let p = messages("");
        assert!(p.iter().any(|m| m == "missing scenario"), "{p:?}");
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn steep_epsilon_cites_slope_rule() {
        let p = messages(&MINIMAL.replace("epsilon = 0.05", "epsilon = 0.5"));
        assert_eq!(p.len(), 1);
        assert!(p[0].contains("3/10"), "{p:?}");
    }

    #[test]
    fn problems_are_aggregated() {
        let text = MINIMAL.replace("N = 256", "N = 100\nbogus = 1\nrecord_every = 0\ngamma_prime = 2.0")
            + "\n[step]\nrtol = -1.0\nfoo = 2\n";
        let p = messages(&text);
        assert!(p.iter().any(|m| m.contains("unknown key `bogus`")), "{p:?}");
        assert!(p.iter().any(|m| m.starts_with("step:") && m.contains("foo")), "{p:?}");
        assert!(p.iter().any(|m| m.contains("power of two")), "{p:?}");
        assert!(p.iter().any(|m| m.contains("record_every")), "{p:?}");
        assert!(p.iter().any(|m| m.contains("gamma_prime")), "{p:?}");
    }

    #[test]
    fn unknown_scenario_field_is_fatal() {
        let p = messages(&MINIMAL.replace("epsilon = 0.05", "epsilon = 0.05\namplitude = 1.0"));
        assert!(p.iter().any(|m| m.starts_with("scenario:")), "{p:?}");
    }

    #[test]
    fn snapshot_times_checked_against_t_end() {
        let p = messages(&MINIMAL.replace("t_end = 0.5", "t_end = 0.5\nsnapshot_times = [0.1, 0.7]"));
        assert!(p.iter().any(|m| m.contains("0.7")), "{p:?}");
    }
}
