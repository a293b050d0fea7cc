//! CSV renderings of single runs.

use anyhow::Result;
use influence_core::game::OnlineGameRun;
use influence_core::{OfflineSolution, OnlineRunTrace, StrategyProfile};

fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// One row per stage: multiplier, subgradient, spend, budget left after the
/// stage and the stage utility above the no-investment baseline.
pub fn online_trace(trace: &OnlineRunTrace<f64>) -> Result<String> {
    render(
        &["k", "theta", "g", "spent_k", "remaining", "stage_utility_adjusted"],
        trace.stages.iter().map(|s| {
            vec![
                s.k.to_string(),
                s.theta.to_string(),
                s.g.to_string(),
                s.spent.to_string(),
                (s.remaining - s.spent).to_string(),
                s.utility_adjusted.to_string(),
            ]
        }),
    )
}

/// One row per (stage, individual); indices are 1-based throughout.
pub fn offline_single(sol: &OfflineSolution<f64>) -> Result<String> {
    render(
        &["k", "i", "b"],
        sol.b.iter().enumerate().flat_map(|(k, stage)| {
            stage
                .iter()
                .enumerate()
                .map(move |(i, b)| vec![(k + 1).to_string(), (i + 1).to_string(), b.to_string()])
        }),
    )
}

/// One row per (stage, individual, influencer).
pub fn profile(p: &StrategyProfile<f64>) -> Result<String> {
    let mut rows = Vec::new();
    for (k, stage) in p.stages.iter().enumerate() {
        for i in 0..stage.n() {
            for j in 0..p.m() {
                rows.push(vec![
                    (k + 1).to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    stage.get(i, j).to_string(),
                ]);
            }
        }
    }
    render(&["k", "i", "j", "b"], rows)
}

/// One row per (stage, influencer) of an online game.
pub fn online_game(run: &OnlineGameRun<f64>) -> Result<String> {
    let mut rows = Vec::new();
    for s in &run.stages {
        for j in 0..s.theta.len() {
            let spent: f64 = s.b_hat[j].iter().sum();
            rows.push(vec![
                s.k.to_string(),
                (j + 1).to_string(),
                s.theta[j].to_string(),
                s.g[j].to_string(),
                spent.to_string(),
                (s.remaining[j] - spent).to_string(),
                s.utilities[j].to_string(),
                s.converged.to_string(),
            ]);
        }
    }
    render(
        &["k", "j", "theta", "g", "spent_k", "remaining", "stage_utility", "converged"],
        rows,
    )
}
