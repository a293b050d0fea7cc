//! JSON scenario documents.
//!
//! ```json
//! {
//!   "name": "two-player",
//!   "network": { "laplacian": [[1, -1], [-1, 1]] },
//!   "opinions": {
//!     "kind": "product",
//!     "marginal": { "rows": [[0.2], [0.5], [0.8]] },
//!     "completion": "last"
//!   },
//!   "durations": { "values": [2, 4, 6, 8] },
//!   "horizon": 40,
//!   "average_budgets": [0.7, 0.5],
//!   "caps": [1, 1],
//!   "seed": 7
//! }
//! ```
//!
//! Numbers may be written as JSON numbers or as `"p/q"` fraction strings.
//! Omitted `probs` mean uniform. Exactly one of `budgets` (totals `B_j`) and
//! `average_budgets` (`α_j`, with `B_j = α_j K`) must be given. The optional
//! `experiment` block is carried through untouched for experiment drivers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DurationDistribution, OpinionDistribution, RowDistribution, Scenario};
use crate::dynamics::{Network, OpinionMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A number written either as a JSON number or as a `"p/q"` fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Text(String),
}

impl Num {
    fn resolve(&self, path: &str, out: &mut Vec<String>) -> f64 {
        match self {
            Num::Value(v) => *v,
            Num::Text(s) => match parse_fraction(s) {
                Some(v) => v,
                None => {
                    out.push(format!("{path}: cannot read {s:?} as a number"));
                    f64::NAN
                }
            },
        }
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (p.trim().parse::<f64>().ok()?, q.trim().parse::<f64>().ok()?);
            (q != 0.0).then(|| p / q)
        }
        None => s.parse().ok(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub laplacian: Vec<Vec<Num>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowDistributionDoc {
    pub rows: Vec<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Num>>,
}

/// How rows listing fewer than `m` opinions are completed to the simplex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    /// Rows are given in full.
    #[default]
    None,
    /// The last entry is `1 − Σ` of the others.
    Last,
    /// The missing entries share `1 − Σ` equally.
    Spread,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpinionsDoc {
    Explicit {
        support: Vec<Vec<Vec<Num>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<Num>>,
        #[serde(default)]
        completion: Completion,
    },
    Product {
        /// Shared law of every individual.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marginal: Option<RowDistributionDoc>,
        /// One law per individual.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        marginals: Option<Vec<RowDistributionDoc>>,
        #[serde(default)]
        completion: Completion,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationsDoc {
    pub values: Vec<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Num>>,
}

/// Scenario document as written on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub network: NetworkDoc,
    pub opinions: OpinionsDoc,
    pub durations: DurationsDoc,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_budgets: Option<Vec<Num>>,
    pub caps: Vec<Num>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<serde_json::Value>,
}

impl ScenarioDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Resolve and validate into a scenario; every violated constraint is reported.
    pub fn build(&self) -> Result<Scenario<f64>> {
        let mut problems = Vec::new();
        let caps = nums("caps", &self.caps, &mut problems);
        let m = caps.len();

        let laplacian: Vec<Vec<f64>> = self
            .network
            .laplacian
            .iter()
            .enumerate()
            .map(|(i, row)| nums(&format!("network.laplacian[{i}]"), row, &mut problems))
            .collect();
        let network = match Matrix::from_rows(&laplacian).and_then(Network::new) {
            Ok(net) => Some(net),
            Err(e) => {
                problems.push(format!("network.laplacian: {e}"));
                None
            }
        };
        let n = laplacian.len();

        let opinions = self.opinions_distribution(n, m, &mut problems);

        let values = nums("durations.values", &self.durations.values, &mut problems);
        let dprobs = probs_or_uniform("durations.probs", self.durations.probs.as_deref(), values.len(), &mut problems);
        let durations = DurationDistribution { values, probs: dprobs };

        let horizon = self.horizon as f64;
        let budgets = match (&self.budgets, &self.average_budgets) {
            (Some(b), None) => nums("budgets", b, &mut problems),
            (None, Some(a)) => nums("average_budgets", a, &mut problems)
                .into_iter()
                .map(|alpha| alpha * horizon)
                .collect(),
            (Some(_), Some(_)) => {
                problems.push("budgets: give either budgets or average_budgets, not both".into());
                Vec::new()
            }
            (None, None) => {
                problems.push("budgets: one of budgets or average_budgets is required".into());
                Vec::new()
            }
        };

        if !problems.is_empty() {
            return Err(Error::InvalidScenario(problems));
        }
        let network = network.expect("network validated");
        let opinions = opinions.expect("opinions validated");
        Scenario::new(network, opinions, durations, self.horizon, budgets, caps, self.seed)
            .map(|sc| sc.with_name(self.name.clone()))
    }

    fn opinions_distribution(
        &self,
        n: usize,
        m: usize,
        problems: &mut Vec<String>,
    ) -> Option<OpinionDistribution<f64>> {
        let before = problems.len();
        let dist = match &self.opinions {
            OpinionsDoc::Explicit {
                support,
                probs,
                completion,
            } => {
                let mut atoms = Vec::new();
                for (r, atom) in support.iter().enumerate() {
                    let rows: Vec<Vec<f64>> = atom
                        .iter()
                        .enumerate()
                        .map(|(i, row)| {
                            let path = format!("opinions.support[{r}][{i}]");
                            let raw = nums(&path, row, problems);
                            complete(&path, raw, m, *completion, problems)
                        })
                        .collect();
                    match OpinionMatrix::new(rows) {
                        Ok(x) => atoms.push(x),
                        Err(e) => problems.push(format!("opinions.support[{r}]: {e}")),
                    }
                }
                let probs = probs_or_uniform("opinions.probs", probs.as_deref(), support.len(), problems);
                OpinionDistribution::Explicit { support: atoms, probs }
            }
            OpinionsDoc::Product {
                marginal,
                marginals,
                completion,
            } => {
                let docs: Vec<(String, &RowDistributionDoc)> = match (marginal, marginals) {
                    (Some(d), None) => (0..n).map(|_| ("opinions.marginal".to_string(), d)).collect(),
                    (None, Some(ds)) => {
                        if ds.len() != n {
                            problems.push(format!("opinions.marginals: {} laws for {n} individuals", ds.len()));
                        }
                        ds.iter()
                            .enumerate()
                            .map(|(i, d)| (format!("opinions.marginals[{i}]"), d))
                            .collect()
                    }
                    _ => {
                        problems.push("opinions: product form needs exactly one of marginal or marginals".into());
                        Vec::new()
                    }
                };
                let mut laws = Vec::new();
                for (idx, (path, d)) in docs.iter().enumerate() {
                    // A shared marginal is validated once.
                    let report = marginals.is_some() || idx == 0;
                    let mut sink = Vec::new();
                    let errs = if report { &mut *problems } else { &mut sink };
                    let rows = d
                        .rows
                        .iter()
                        .enumerate()
                        .map(|(r, row)| {
                            let p = format!("{path}.rows[{r}]");
                            let raw = nums(&p, row, errs);
                            complete(&p, raw, m, *completion, errs)
                        })
                        .collect::<Vec<_>>();
                    let probs = probs_or_uniform(&format!("{path}.probs"), d.probs.as_deref(), rows.len(), errs);
                    laws.push(RowDistribution { rows, probs });
                }
                OpinionDistribution::Product { marginals: laws }
            }
        };
        if problems.len() > before {
            return None;
        }
        let mut own = Vec::new();
        dist.problems(&mut own);
        if let OpinionsDoc::Product { marginal: Some(_), .. } = &self.opinions {
            // Expanded copies of a shared marginal would repeat each problem.
            own = own
                .into_iter()
                .filter(|p| !p.starts_with("opinions.marginals[") || p.starts_with("opinions.marginals[0]"))
                .map(|p| p.replacen("opinions.marginals[0]", "opinions.marginal", 1))
                .collect();
        }
        if own.is_empty() {
            Some(dist)
        } else {
            problems.extend(own);
            None
        }
    }
}

fn nums(path: &str, values: &[Num], out: &mut Vec<String>) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.resolve(&format!("{path}[{i}]"), out))
        .collect()
}

fn probs_or_uniform(path: &str, probs: Option<&[Num]>, len: usize, out: &mut Vec<String>) -> Vec<f64> {
    match probs {
        Some(p) => nums(path, p, out),
        None if len > 0 => vec![1.0 / len as f64; len],
        None => Vec::new(),
    }
}

fn complete(path: &str, mut row: Vec<f64>, m: usize, completion: Completion, out: &mut Vec<String>) -> Vec<f64> {
    let given: f64 = row.iter().sum();
    let missing = m.saturating_sub(row.len());
    match completion {
        Completion::None => {}
        Completion::Last if row.len() + 1 == m => row.push(1.0 - given),
        Completion::Spread if missing > 0 => {
            let share = (1.0 - given) / missing as f64;
            row.extend(std::iter::repeat_n(share, missing));
        }
        _ => {
            out.push(format!(
                "{path}: {} entries cannot be completed to {m} with {completion:?}",
                row.len()
            ));
        }
    }
    row
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario<f64>> {
    ScenarioDoc::from_json(text)?.build()
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario<f64>> {
    parse_scenario(&std::fs::read_to_string(path)?)
}
