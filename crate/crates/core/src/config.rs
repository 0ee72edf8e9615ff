//! Scenario configuration files.
//!
//! A config is a flat list of `key = value` lines; `#` starts a comment.
//! The `mode` key (`groups` or `network`) picks the defaults, which follow
//! the null-hypothesis simulation protocol for that design. Every other key
//! overrides one field. Unknown keys are errors.
//!
//! ```text
//! mode = network
//! num_groups = 1600
//! p_vaccinated = 0.01
//! delta = 0.2
//! hypothesis = alternative
//! ```

use std::fmt;
use std::str::FromStr;

use crate::effects::{EvalPoint, ModelSpec};
use crate::epidemic::OutsideMode;
use crate::extract::{ContactCutoff, Field};
use crate::inference::{AltReading, Hypothesis, ScenarioConfig, StudyDesign};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, 0 when the problem is not tied to a line.
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.msg)
        } else {
            write!(f, "config line {}: {}", self.line, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError { line, msg: msg.into() }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| err(line, format!("bad value {raw:?} for {key}")))
}

fn flag(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("bad value {raw:?} for {key}; expected true or false"))),
    }
}

fn entries(text: &str) -> Result<Vec<(usize, &str, &str)>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key = value, got {content:?}")))?;
        let (key, val) = (key.trim(), val.trim());
        if out.iter().any(|&(_, k, _)| k == key) {
            return Err(err(line, format!("duplicate key {key}")));
        }
        out.push((line, key, val));
    }
    Ok(out)
}

/// Parses a config; the result is validated before it is returned.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let entries = entries(text)?;
    let mode = entries
        .iter()
        .find(|&&(_, k, _)| k == "mode")
        .map(|&(line, _, v)| (line, v));
    let mut cfg = match mode {
        None | Some((_, "groups")) => ScenarioConfig::independent_groups(500, Hypothesis::Null, AltReading::Swapped),
        Some((_, "network")) => ScenarioConfig::family_network(10_000, Hypothesis::Null),
        Some((line, other)) => return Err(err(line, format!("unknown mode {other:?}; expected groups or network"))),
    };

    let has_label = entries.iter().any(|&(_, k, _)| k == "label");
    for (line, key, raw) in entries {
        match key {
            "mode" => {}
            "label" => cfg.label = raw.to_string(),
            "num_groups" => {
                let n = value(line, key, raw)?;
                match &mut cfg.design {
                    StudyDesign::Groups { num_groups, .. } | StudyDesign::Network { num_groups, .. } => *num_groups = n,
                }
            }
            "mean_contacts" => match &mut cfg.design {
                StudyDesign::Groups { mean_contacts, .. } => *mean_contacts = value(line, key, raw)?,
                StudyDesign::Network { .. } => return Err(err(line, "mean_contacts applies to mode = groups")),
            },
            "group_size" => match &mut cfg.design {
                StudyDesign::Network { group_size, .. } => *group_size = value(line, key, raw)?,
                StudyDesign::Groups { .. } => return Err(err(line, "group_size applies to mode = network")),
            },
            "out_tie_prob" => match &mut cfg.design {
                StudyDesign::Network { out_tie_prob, .. } => *out_tie_prob = value(line, key, raw)?,
                StudyDesign::Groups { .. } => return Err(err(line, "out_tie_prob applies to mode = network")),
            },
            "vacc_prob" => cfg.vacc_prob = value(line, key, raw)?,
            "p_outside" => cfg.disease.p_outside = value(line, key, raw)?,
            "p_unvaccinated" => cfg.disease.p_unvaccinated = value(line, key, raw)?,
            "p_vaccinated" => cfg.disease.p_vaccinated = value(line, key, raw)?,
            "delta" => cfg.disease.delta = value(line, key, raw)?,
            "incubation" => cfg.disease.incubation = value(line, key, raw)?,
            "infectious_period" => cfg.disease.infectious_period = value(line, key, raw)?,
            "follow_up" => cfg.disease.follow_up = value(line, key, raw)?,
            "outside_mode" => {
                cfg.disease.outside_mode = match raw {
                    "every_day" => OutsideMode::EveryDay,
                    "first_day_only" => OutsideMode::FirstDayOnly,
                    _ => return Err(err(line, format!("bad outside_mode {raw:?}; expected every_day or first_day_only"))),
                }
            }
            "hypothesis" => {
                cfg.hypothesis = match raw {
                    "null" => Hypothesis::Null,
                    "alternative" => Hypothesis::Alternative,
                    _ => return Err(err(line, format!("bad hypothesis {raw:?}; expected null or alternative"))),
                }
            }
            "n_sims" => cfg.n_sims = value(line, key, raw)?,
            "n_bootstrap" => cfg.estimation.n_bootstrap = value(line, key, raw)?,
            "seed" => cfg.seed = value(line, key, raw)?,
            "covariates" => {
                let mut covariates = Vec::new();
                for name in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let field = Field::parse(name).ok_or_else(|| err(line, format!("unknown covariate {name:?}")))?;
                    if field == Field::VA {
                        return Err(err(line, "V_a is the exposure and is always in the model"));
                    }
                    covariates.push(field);
                }
                cfg.estimation.spec = ModelSpec { covariates };
            }
            "exclude_partner" => cfg.summaries.exclude_partner = flag(line, key, raw)?,
            "contact_cutoff" => {
                cfg.summaries.cutoff = match raw {
                    "sick_by" => ContactCutoff::SickBy,
                    "infectious_at" => ContactCutoff::InfectiousAt,
                    _ => return Err(err(line, format!("bad contact_cutoff {raw:?}; expected sick_by or infectious_at"))),
                }
            }
            "eval_point" => {
                cfg.estimation.eval = match raw {
                    "all" => EvalPoint::AllRecords,
                    "mediator_positive" => EvalPoint::MediatorPositive,
                    _ => return Err(err(line, format!("bad eval_point {raw:?}; expected all or mediator_positive"))),
                }
            }
            "tol" => cfg.estimation.fit.tol = value(line, key, raw)?,
            "max_iter" => cfg.estimation.fit.max_iter = value(line, key, raw)?,
            _ => return Err(err(line, format!("unknown key {key:?}"))),
        }
    }

    if !has_label {
        let kind = match cfg.design {
            StudyDesign::Groups { .. } => "groups",
            StudyDesign::Network { .. } => "network",
        };
        cfg.label = format!("{kind}-{}", cfg.hypothesis.name());
    }
    check(&cfg)?;
    Ok(cfg)
}

fn check(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    cfg.validate().map_err(|e| err(0, e.to_string()))?;
    let size = match cfg.design {
        StudyDesign::Groups { num_groups, .. } => num_groups,
        StudyDesign::Network { num_groups, group_size, .. } => num_groups.min(group_size),
    };
    if size == 0 {
        return Err(err(0, "the design has no nodes"));
    }
    if cfg.n_sims == 0 {
        return Err(err(0, "n_sims must be at least 1"));
    }
    if cfg.estimation.n_bootstrap == 0 {
        return Err(err(0, "n_bootstrap must be at least 1"));
    }
    if cfg.estimation.fit.max_iter == 0 || !(cfg.estimation.fit.tol > 0.0) {
        return Err(err(0, "tol must be positive and max_iter at least 1"));
    }
    Ok(())
}
