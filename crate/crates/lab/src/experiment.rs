//! Experiment specifications: a scenario plus the sweep run over it.

use anyhow::{bail, ensure, Context, Result};
use influence_core::game::{Alg2Config, InfoMode};
use influence_core::scenario::{Num, ScenarioDoc};
use influence_core::{OnlineConfig, Scenario};
use serde::{Deserialize, Serialize};

use crate::assets;

pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_BR_TOL: f64 = 1e-12;

/// Which strategy a curve of the opponent-budget sweep reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Offline,
    Full,
    Partial,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Offline => "offline",
            Column::Full => "full",
            Column::Partial => "partial",
        }
    }
}

pub(crate) fn mode_name(mode: InfoMode) -> &'static str {
    match mode {
        InfoMode::Full => "full",
        InfoMode::Partial => "partial",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// Single-influencer regret per stage against `K`, one curve per average budget.
    Regret { horizons: Vec<usize>, alphas: Vec<f64> },
    /// Online and offline utilities against `K` at the scenario's average budgets.
    Game { horizons: Vec<usize>, modes: Vec<InfoMode> },
    /// First influencer's utility against the opponents' total budget, shared
    /// equally, for each number of influencers.
    OpponentBudget {
        influencers: Vec<usize>,
        opponent_totals: Vec<f64>,
        modes: Vec<Column>,
    },
}

impl Sweep {
    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::Regret { .. } | Sweep::Game { .. } => "K",
            Sweep::OpponentBudget { .. } => "opponent_total",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Regret { horizons, .. } | Sweep::Game { horizons, .. } => {
                horizons.iter().map(|&k| k as f64).collect()
            }
            Sweep::OpponentBudget { opponent_totals, .. } => opponent_totals.clone(),
        }
    }
}

/// The `experiment` block of a scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDoc {
    #[serde(flatten)]
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Base seed of the trials; the scenario's seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub online: OnlineConfig,
    #[serde(default)]
    pub alg2: Alg2Config,
    /// Sweep tolerance of two-player best-response dynamics.
    #[serde(default = "default_br_tol")]
    pub br_tol: f64,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_br_tol() -> f64 {
    DEFAULT_BR_TOL
}

/// A validated experiment: the scenario without its `experiment` block and the
/// resolved experiment with an explicit seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub figure: String,
    pub scenario: ScenarioDoc,
    pub experiment: ExperimentDoc,
}

impl ExperimentSpec {
    pub fn from_doc(mut doc: ScenarioDoc) -> Result<Self> {
        let block = doc
            .experiment
            .take()
            .with_context(|| format!("scenario {:?} has no experiment block", doc.name))?;
        let mut experiment: ExperimentDoc =
            serde_json::from_value(block).context("invalid experiment block")?;
        experiment.seed.get_or_insert(doc.seed);
        let spec = Self {
            figure: doc.name.clone(),
            scenario: doc,
            experiment,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a scenario document with an experiment block, or a manifest
    /// written by a previous run.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).context("not valid JSON")?;
        if let Some(spec) = value.get("spec") {
            let spec: Self = serde_json::from_value(spec.clone()).context("invalid manifest spec")?;
            spec.validate()?;
            return Ok(spec);
        }
        Self::from_doc(ScenarioDoc::from_json(text)?)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = assets::bundled(name).with_context(|| {
            format!(
                "unknown figure {name:?}; bundled figures are {}",
                assets::names().collect::<Vec<_>>().join(", ")
            )
        })?;
        Self::from_json(text).with_context(|| format!("bundled figure {name}"))
    }

    pub fn with_trials(mut self, trials: usize) -> Result<Self> {
        self.experiment.trials = trials;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed.unwrap_or(self.scenario.seed)
    }

    pub fn trials(&self) -> usize {
        self.experiment.trials
    }

    pub fn sweep(&self) -> &Sweep {
        &self.experiment.sweep
    }

    pub fn base_scenario(&self) -> Result<Scenario<f64>> {
        Ok(self.scenario.build()?)
    }

    /// Scenario with `m` influencers: the first keeps its budget and cap, the
    /// other `m − 1` share `opponent_total` equally under the first's cap.
    pub fn opponent_scenario(&self, m: usize, opponent_total: f64) -> Result<Scenario<f64>> {
        let base = self.base_scenario()?;
        let (b1, cap) = (base.budgets()[0], base.caps()[0]);
        let share = opponent_total / (m - 1) as f64;
        let mut doc = self.scenario.clone();
        doc.average_budgets = None;
        doc.budgets = Some(
            std::iter::once(b1)
                .chain(std::iter::repeat_n(share, m - 1))
                .map(Num::Value)
                .collect(),
        );
        doc.caps = vec![Num::Value(cap); m];
        Ok(doc.build()?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.experiment.trials >= 1, "trials must be at least 1");
        ensure!(self.experiment.br_tol > 0.0, "br_tol must be positive");
        let base = self.base_scenario()?;
        let values = self.sweep().values();
        ensure!(!values.is_empty(), "the sweep over {} is empty", self.sweep().axis());
        ensure!(
            values.windows(2).all(|w| w[0] < w[1]),
            "sweep values over {} must be strictly increasing",
            self.sweep().axis()
        );
        match self.sweep() {
            Sweep::Regret { horizons, alphas } => {
                ensure!(base.m() == 1, "a regret sweep needs one influencer, scenario has {}", base.m());
                ensure!(!alphas.is_empty(), "no average budgets to sweep");
                ensure!(horizons[0] >= 1, "horizons must be positive");
                for &a in alphas {
                    ensure!(a > 0.0 && a.is_finite(), "average budget {a} must be positive");
                }
            }
            Sweep::Game { horizons, modes } => {
                ensure!(base.m() >= 2, "a game sweep needs at least two influencers");
                ensure!(!modes.is_empty(), "no information modes to run");
                ensure!(horizons[0] >= 1, "horizons must be positive");
            }
            Sweep::OpponentBudget {
                influencers,
                opponent_totals,
                modes,
            } => {
                ensure!(!influencers.is_empty(), "no influencer counts to sweep");
                ensure!(!modes.is_empty(), "no columns to report");
                if let Some(&m) = influencers.iter().find(|&&m| m < 2) {
                    bail!("{m} influencers leave no opponents");
                }
                ensure!(opponent_totals[0] >= 0.0, "opponent budgets must be nonnegative");
                for &m in influencers {
                    for &total in opponent_totals {
                        self.opponent_scenario(m, total)
                            .with_context(|| format!("m={m}, opponent_total={total}"))?;
                    }
                }
            }
        }
        Ok(())
    }
}
