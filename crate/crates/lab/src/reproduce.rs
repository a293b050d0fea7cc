//! Running an experiment and writing its curves.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use influence_core::game::{offline_equilibrium, player_params, run_online_game, InfoMode};
use influence_core::regret::{path_regret, regret_bound};
use influence_core::stats::{summarize, with_workers};
use influence_core::{sample_path, trial_seed, OnlineParams, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::experiment::{mode_name, Column, ExperimentSpec, Sweep};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    /// Header of the sweep column.
    pub axis: String,
    pub points: Vec<Point>,
}

impl Curve {
    fn new(name: impl Into<String>, axis: &str) -> Self {
        Self {
            name: name.into(),
            axis: axis.to_string(),
            points: Vec::new(),
        }
    }

    fn push(&mut self, x: f64, samples: &[f64]) {
        let s = summarize(samples);
        self.points.push(Point {
            x,
            mean: s.mean,
            stderr: s.stderr,
        });
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.axis.as_str(), "mean", "stderr"])?;
        for p in &self.points {
            w.write_record([p.x.to_string(), p.mean.to_string(), p.stderr.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveEntry {
    pub name: String,
    pub file: String,
}

/// Everything needed to recompute the CSVs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub figure: String,
    pub library_version: String,
    pub lab_version: String,
    /// Trial `t` samples its path with seed `trial_seeds[t]` at every sweep point.
    pub trial_seeds: Vec<u64>,
    pub spec: ExperimentSpec,
    pub curves: Vec<CurveEntry>,
}

#[derive(Clone, Debug)]
pub struct Reproduction {
    pub curves: Vec<Curve>,
    pub manifest: Manifest,
}

impl Reproduction {
    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }
}

/// Run `f` for every (point, trial) pair on the current pool; results come back
/// grouped by point, in trial order.
fn trials<P: Sync, R: Send>(
    points: &[P],
    seeds: &[u64],
    label: impl Fn(&P) -> String + Sync,
    f: impl Fn(&P, u64) -> Result<R> + Sync,
) -> Result<Vec<Vec<R>>> {
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let mut flat = jobs
        .par_iter()
        .map(|&(p, seed)| {
            f(&points[p], seed).with_context(|| format!("sweep point {} (trial seed {seed})", label(&points[p])))
        })
        .collect::<Result<Vec<R>>>()?
        .into_iter();
    Ok(points.iter().map(|_| flat.by_ref().take(seeds.len()).collect()).collect())
}

fn regret_curves(spec: &ExperimentSpec, horizons: &[usize], alphas: &[f64], seeds: &[u64]) -> Result<Vec<Curve>> {
    let base = spec.base_scenario()?;
    let online = spec.experiment.online;
    let points = alphas
        .iter()
        .flat_map(|&a| horizons.iter().map(move |&k| (a, k)))
        .map(|(a, k)| {
            let sc = base.with_average_budgets(k, &[a])?;
            let params = OnlineParams::for_scenario(&sc, &online)?;
            Ok((a, k, sc, params))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = trials(
        &points,
        seeds,
        |(a, k, ..)| format!("alpha={a}, K={k}"),
        |(_, k, sc, params), seed| Ok(path_regret(&sample_path(sc, seed), params)? / *k as f64),
    )?;
    let mut curves = Vec::new();
    for &a in alphas {
        let mut regret = Curve::new(format!("regret_alpha_{a}"), "K");
        let mut bound = Curve::new(format!("bound_alpha_{a}"), "K");
        for ((pa, k, sc, _), samples) in points.iter().zip(&results) {
            if *pa != a {
                continue;
            }
            regret.push(*k as f64, samples);
            let b = regret_bound(sc.n(), sc.caps()[0], a, sc.max_stage_weight(), *k)?;
            bound.push(*k as f64, &[b / *k as f64]);
        }
        curves.push(regret);
        curves.push(bound);
    }
    Ok(curves)
}

struct GameTrial {
    offline: Vec<f64>,
    /// `[mode][player]`.
    online: Vec<Vec<f64>>,
}

fn game_curves(spec: &ExperimentSpec, horizons: &[usize], modes: &[InfoMode], seeds: &[u64]) -> Result<Vec<Curve>> {
    let base = spec.base_scenario()?;
    let exp = &spec.experiment;
    let m = base.m();
    let points = horizons
        .iter()
        .map(|&k| {
            let sc = base.with_average_budgets(k, &base.average_budgets())?;
            let params = player_params(&sc, &exp.online)?;
            Ok((k, sc, params))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = trials(
        &points,
        seeds,
        |(k, ..)| format!("K={k}"),
        |(k, sc, params), seed| {
            let path = sample_path(sc, seed);
            let kf = *k as f64;
            let offline = offline_equilibrium(&path, sc.budgets(), sc.caps(), &exp.alg2, exp.br_tol)?;
            let online = modes
                .iter()
                .map(|&mode| {
                    let run = run_online_game(&path, params, mode)?;
                    Ok(run.utilities.iter().map(|u| u / kf).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            Ok(GameTrial {
                offline: offline.utilities.iter().map(|u| u / kf).collect(),
                online,
            })
        },
    )?;
    let mut curves = Vec::new();
    for j in 0..m {
        let mut curve = Curve::new(format!("offline_u{}", j + 1), "K");
        for ((k, ..), rs) in points.iter().zip(&results) {
            curve.push(*k as f64, &rs.iter().map(|r| r.offline[j]).collect::<Vec<_>>());
        }
        curves.push(curve);
    }
    for (mi, &mode) in modes.iter().enumerate() {
        for j in 0..m {
            let mut utility = Curve::new(format!("{}_u{}", mode_name(mode), j + 1), "K");
            let mut gap = Curve::new(format!("{}_gap_u{}", mode_name(mode), j + 1), "K");
            for ((k, ..), rs) in points.iter().zip(&results) {
                let u: Vec<f64> = rs.iter().map(|r| r.online[mi][j]).collect();
                let g: Vec<f64> = rs.iter().map(|r| (r.online[mi][j] - r.offline[j]).abs()).collect();
                utility.push(*k as f64, &u);
                gap.push(*k as f64, &g);
            }
            curves.push(utility);
            curves.push(gap);
        }
    }
    Ok(curves)
}

fn first_player_utility(
    sc: &Scenario<f64>,
    params: &[OnlineParams<f64>],
    column: Column,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<f64> {
    let path = sample_path(sc, seed);
    let k = sc.horizon() as f64;
    let u = match column {
        Column::Offline => {
            let exp = &spec.experiment;
            offline_equilibrium(&path, sc.budgets(), sc.caps(), &exp.alg2, exp.br_tol)?.utilities[0]
        }
        Column::Full => run_online_game(&path, params, InfoMode::Full)?.utilities[0],
        Column::Partial => run_online_game(&path, params, InfoMode::Partial)?.utilities[0],
    };
    Ok(u / k)
}

fn opponent_curves(
    spec: &ExperimentSpec,
    influencers: &[usize],
    totals: &[f64],
    columns: &[Column],
    seeds: &[u64],
) -> Result<Vec<Curve>> {
    let points = influencers
        .iter()
        .flat_map(|&m| totals.iter().map(move |&t| (m, t)))
        .map(|(m, t)| {
            let sc = spec.opponent_scenario(m, t)?;
            let params = player_params(&sc, &spec.experiment.online)?;
            Ok((m, t, sc, params))
        })
        .collect::<Result<Vec<_>>>()?;
    let results = trials(
        &points,
        seeds,
        |(m, t, ..)| format!("m={m}, opponent_total={t}"),
        |(_, _, sc, params), seed| {
            columns
                .iter()
                .map(|&c| first_player_utility(sc, params, c, seed, spec))
                .collect::<Result<Vec<f64>>>()
        },
    )?;
    let mut curves = Vec::new();
    for &m in influencers {
        for (ci, &c) in columns.iter().enumerate() {
            let mut curve = Curve::new(format!("m{m}_{}_u1", c.name()), "opponent_total");
            for ((pm, t, ..), rs) in points.iter().zip(&results) {
                if *pm == m {
                    curve.push(*t, &rs.iter().map(|r| r[ci]).collect::<Vec<_>>());
                }
            }
            curves.push(curve);
        }
    }
    Ok(curves)
}

/// Run every sweep point of `spec` on `workers` threads (the global pool when `None`).
pub fn reproduce(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Reproduction> {
    spec.validate()?;
    let seeds: Vec<u64> = (0..spec.trials() as u64).map(|t| trial_seed(spec.seed(), t)).collect();
    let curves = with_workers(workers, || match spec.sweep() {
        Sweep::Regret { horizons, alphas } => regret_curves(spec, horizons, alphas, &seeds),
        Sweep::Game { horizons, modes } => game_curves(spec, horizons, modes, &seeds),
        Sweep::OpponentBudget {
            influencers,
            opponent_totals,
            modes,
        } => opponent_curves(spec, influencers, opponent_totals, modes, &seeds),
    })
    .with_context(|| format!("figure {}", spec.figure))?;
    let manifest = Manifest {
        figure: spec.figure.clone(),
        library_version: influence_core::VERSION.to_string(),
        lab_version: env!("CARGO_PKG_VERSION").to_string(),
        trial_seeds: seeds,
        spec: spec.clone(),
        curves: curves
            .iter()
            .map(|c| CurveEntry {
                name: c.name.clone(),
                file: c.file_name(),
            })
            .collect(),
    };
    Ok(Reproduction { curves, manifest })
}

/// Write every curve and `manifest.json` into `dir`, creating it if needed.
pub fn write_outputs(rep: &Reproduction, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for curve in &rep.curves {
        let path = dir.join(curve.file_name());
        fs::write(&path, curve.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&rep.manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}
