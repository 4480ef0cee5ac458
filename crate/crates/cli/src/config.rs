//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use meanfield::emissions::EmissionsModel;
use meanfield::lqmodel::LQModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveMfg,
    SolveMkv,
    Compare,
    Examples,
    Emissions,
    Simulate,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveMfg => "solve-mfg",
            Command::SolveMkv => "solve-mkv",
            Command::Compare => "compare",
            Command::Examples => "examples",
            Command::Emissions => "emissions",
            Command::Simulate => "simulate",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Mfg,
    Mkv,
}

/// `dx = α dt + σ dW`, running cost `α²/2 + x μ̄`, no terminal cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: f64,
    pub sigma: f64,
    pub n_steps: usize,
}

/// Parameters of the scalar terminal-cost examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: f64,
}

impl Default for ScalarSpec {
    fn default() -> Self {
        Self {
            r: -1.0,
            horizon: 1.0,
            x0: 1.0 / 12.0,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_x: usize,
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub N: usize,
    pub n_repeats: usize,
    pub paths: usize,
    /// Attempt MFG solves outside the existence hypotheses.
    pub short_horizon: bool,
    pub policy: PolicyChoice,
    /// `simulate`: number of random affine deviations to test against the policy.
    pub deviations: usize,
    pub deviation_width: f64,
    pub deviation_seed: u64,
    /// `simulate`: also compare the MFG and MKV policies on the social cost.
    pub social_cost: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n_x: 400,
            tol: 1e-6,
            damping: 0.5,
            max_iter: 50,
            seed: 0,
            N: 1000,
            n_repeats: 20,
            paths: 100_000,
            short_horizon: true,
            policy: PolicyChoice::Mfg,
            deviations: 0,
            deviation_width: 0.5,
            deviation_seed: 99,
            social_cost: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub model: Option<LQModelSpec>,
    pub emissions: Option<EmissionsModel>,
    pub additive: Option<AdditiveSpec>,
    pub scalar: Option<ScalarSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Range checks on the numerics that the solvers would otherwise reject
    /// deep inside a run.
    pub fn validate(&self, command: Command) -> Result<(), String> {
        if let Some(c) = self.command {
            if c != command {
                return Err(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                ));
            }
        }
        let n = &self.numerics;
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        match command {
            Command::SolveMfg | Command::SolveMkv | Command::Compare => {
                need(self.model.is_some(), "`model` is required")?;
            }
            Command::Simulate => {
                need(self.model.is_some(), "`model` is required")?;
                need(n.N >= 2, "numerics.N must be at least 2")?;
                need(n.n_repeats >= 1, "numerics.n_repeats must be at least 1")?;
                need(
                    n.deviation_width >= 0.0 && n.deviation_width.is_finite(),
                    "numerics.deviation_width must be finite and non-negative",
                )?;
            }
            Command::Oracle => {
                let count = [self.model.is_some(), self.additive.is_some(), self.emissions.is_some()]
                    .iter()
                    .filter(|&&b| b)
                    .count();
                need(count == 1, "oracle needs exactly one of `model`, `additive`, `emissions`")?;
                need(n.n_x >= 50, "numerics.n_x must be at least 50")?;
                need(n.tol > 0.0, "numerics.tol must be positive")?;
                need(n.damping > 0.0 && n.damping <= 1.0, "numerics.damping must lie in (0, 1]")?;
                need(n.max_iter >= 1, "numerics.max_iter must be at least 1")?;
            }
            Command::Emissions => {
                need(n.paths >= 1000, "numerics.paths must be at least 1000")?;
            }
            Command::Examples => {}
        }
        if let Some(a) = &self.additive {
            need(a.horizon > 0.0 && a.horizon.is_finite(), "additive.T must be positive")?;
            need(a.sigma > 0.0 && a.sigma.is_finite(), "additive.sigma must be positive")?;
            need(a.n_steps >= 2, "additive.n_steps must be at least 2")?;
        }
        Ok(())
    }
}
