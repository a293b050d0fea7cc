use influence_core::game::{player_params, run_online_game, InfoMode};
use influence_core::{
    de_groot_weights, opinion_update, run_online_on_path, solve_offline_single, stage_gradient,
    stage_utilities, stage_utility, Allocation, CampaignWeights, Network, OnlineConfig,
    OnlineParams, OpinionMatrix, Regularizer, StageRealization,
};
use proptest::prelude::*;

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    })
}

type StageCase = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>);

/// `(rho, x rows, b rows, caps)` for one stage with `m ≥ 2` influencers.
fn stage_instance() -> impl Strategy<Value = StageCase> {
    (1usize..6, 2usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.0f64..4.0, n),
            prop::collection::vec(simplex(m), n),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, m), n),
            prop::collection::vec(0.1f64..3.0, m),
        )
            .prop_map(|(rho, x, frac, caps)| {
                let b = frac
                    .iter()
                    .map(|row| row.iter().zip(&caps).map(|(f, c)| f * c).collect())
                    .collect();
                (rho, x, b, caps)
            })
    })
}

fn laplacian() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7).prop_flat_map(|n| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], n * n).prop_map(move |w| {
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        rows[i][j] = -w[i * n + j];
                        rows[i][i] += w[i * n + j];
                    }
                }
            }
            rows
        })
    })
}

/// A single-influencer path of 1..25 stages over 1..5 individuals.
fn single_path() -> impl Strategy<Value = (Vec<StageRealization<f64>>, f64, f64)> {
    (1usize..6, 1usize..25).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(
                (prop::collection::vec(0.0f64..3.0, n), prop::collection::vec(0.0f64..1.0, n)),
                k,
            ),
            0.1f64..2.0,
            0.0f64..1.0,
        )
            .prop_map(move |(stages, cap, frac)| {
                let path = stages
                    .into_iter()
                    .enumerate()
                    .map(|(s, (rho, x))| StageRealization {
                        k: s + 1,
                        x: OpinionMatrix::single(x).unwrap(),
                        weights: CampaignWeights::from_rho(rho, 1.0).unwrap(),
                    })
                    .collect();
                (path, cap, frac * (n * k) as f64 * cap)
            })
    })
}

fn u_bar(path: &[StageRealization<f64>]) -> f64 {
    path.iter().map(|s| s.weights.total()).fold(1e-3, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn utilities_are_constant_sum((rho, x, b, caps) in stage_instance()) {
        let w = CampaignWeights::from_rho(rho.clone(), 1.0).unwrap();
        let x = OpinionMatrix::new(x).unwrap();
        let b = Allocation::new(b, caps).unwrap();
        let total: f64 = stage_utilities(&w, &x, &b).unwrap().iter().sum();
        let expected: f64 = rho.iter().sum();
        prop_assert!((total - expected).abs() <= 1e-9, "{total} vs {expected}");
    }

    #[test]
    fn weights_sum_to_population(rows in laplacian(), tau in 0.01f64..10.0) {
        let n = rows.len();
        let w = de_groot_weights(&Network::from_rows(&rows).unwrap(), tau).unwrap();
        let total = w.total();
        prop_assert!((total - n as f64).abs() <= 1e-9, "{total} for n = {n}");
        prop_assert!(w.rho.iter().all(|&r| r >= -1e-12));
    }

    #[test]
    fn opinion_update_stays_on_simplex(row in (1usize..6).prop_flat_map(simplex), extra in prop::collection::vec(0.0f64..5.0, 6)) {
        let b: Vec<f64> = extra[..row.len()].to_vec();
        let y = opinion_update(&row, &b);
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn gradient_matches_finite_differences((rho, x, b, caps) in stage_instance(), j in 0usize..4) {
        let m = caps.len();
        let j = j % m;
        let w = CampaignWeights::from_rho(rho, 1.0).unwrap();
        let x = OpinionMatrix::new(x).unwrap();
        let h = 1e-6;
        // Keep the probe inside the box.
        let b: Vec<Vec<f64>> = b
            .iter()
            .map(|row| row.iter().zip(&caps).map(|(&v, &c)| v.clamp(h, c - h)).collect())
            .collect();
        let base = Allocation::new(b.clone(), caps.clone()).unwrap();
        let g = stage_gradient(&w, &x, &base, j).unwrap();
        for i in 0..x.n() {
            let shifted = |d: f64| {
                let mut rows = b.clone();
                rows[i][j] += d;
                stage_utility(&w, &x, &Allocation::new(rows, caps.clone()).unwrap(), j).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "coord {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn online_run_respects_budget((path, cap, budget) in single_path(), squared in any::<bool>()) {
        let n = path[0].x.n();
        let config = OnlineConfig {
            regularizer: if squared { Regularizer::Squared } else { Regularizer::Entropy },
            ..OnlineConfig::default()
        };
        let params = OnlineParams::new(budget, cap, path.len(), u_bar(&path), n, &config).unwrap();
        let trace = run_online_on_path(&path, &params).unwrap();
        let mut remaining = budget;
        for s in &trace.stages {
            prop_assert_eq!(s.remaining, remaining);
            prop_assert!(s.b_hat.iter().all(|&b| (0.0..=cap).contains(&b)));
            prop_assert!(s.spent <= s.remaining);
            remaining -= s.spent;
            prop_assert!(remaining >= 0.0);
        }
        prop_assert!(trace.total_spent <= budget * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn multiplier_stays_below_its_ceiling((path, cap, budget) in single_path()) {
        let n = path[0].x.n();
        let params = OnlineParams::new(budget, cap, path.len(), u_bar(&path), n, &OnlineConfig::default()).unwrap();
        let theta_max = params.theta_max();
        let trace = run_online_on_path(&path, &params).unwrap();
        let alpha = params.alpha();
        for pair in trace.stages.windows(2) {
            let (now, next) = (&pair[0], &pair[1]);
            prop_assert!(next.theta <= theta_max * (1.0 + 1e-12), "{} > {theta_max}", next.theta);
            // Overspending raises the multiplier, underspending lowers it.
            let demand: f64 = now.b_tilde.iter().sum();
            if demand > alpha {
                prop_assert!(next.theta >= now.theta);
            } else if demand < alpha {
                prop_assert!(next.theta <= now.theta);
            }
        }
        prop_assert!(trace.final_theta <= theta_max * (1.0 + 1e-12));
    }

    #[test]
    fn offline_solution_is_feasible((path, cap, budget) in single_path()) {
        let sol = solve_offline_single(&path, budget, cap).unwrap();
        prop_assert!(sol.spent <= budget * (1.0 + 1e-12) + 1e-12);
        prop_assert!(sol.b.iter().flatten().all(|&b| (0.0..=cap).contains(&b)));
        prop_assert!(sol.adjusted_objective >= -1e-12);
    }

    #[test]
    fn online_game_is_feasible_and_constant_sum(
        stages in prop::collection::vec((prop::collection::vec(0.0f64..3.0, 3), prop::collection::vec(simplex(3), 3)), 1..12),
        fracs in prop::collection::vec(0.0f64..1.0, 3),
        partial in any::<bool>(),
    ) {
        let k = stages.len();
        let path: Vec<StageRealization<f64>> = stages
            .into_iter()
            .enumerate()
            .map(|(s, (rho, rows))| StageRealization {
                k: s + 1,
                x: OpinionMatrix::new(rows).unwrap(),
                weights: CampaignWeights::from_rho(rho, 1.0).unwrap(),
            })
            .collect();
        let caps = [1.0, 0.5, 2.0];
        let params: Vec<OnlineParams<f64>> = (0..3)
            .map(|j| OnlineParams::new(fracs[j] * 3.0 * k as f64 * caps[j], caps[j], k, u_bar(&path), 3, &OnlineConfig::default()).unwrap())
            .collect();
        let mode = if partial { InfoMode::Partial } else { InfoMode::Full };
        let run = run_online_game(&path, &params, mode).unwrap();
        for (j, p) in params.iter().enumerate() {
            prop_assert!(run.profile.spent[j] <= p.budget * (1.0 + 1e-12) + 1e-12);
        }
        for (s, stage) in run.stages.iter().zip(&path) {
            let total: f64 = s.utilities.iter().sum();
            prop_assert!((total - stage.weights.total()).abs() <= 1e-9);
            for (row, cap) in s.b_hat.iter().zip(caps) {
                prop_assert!(row.iter().all(|&b| (0.0..=cap).contains(&b)));
            }
        }
    }
}

#[test]
fn player_params_match_single_params() {
    let sc = influence_core::parse_scenario(
        r#"{
            "network": { "laplacian": [[1, -1], [-1, 1]] },
            "opinions": { "kind": "product", "marginal": { "rows": [[0.3], [0.6]] }, "completion": "last" },
            "durations": { "values": [1] },
            "horizon": 5,
            "average_budgets": [0.4, 0.2],
            "caps": [1, 1]
        }"#,
    )
    .unwrap();
    let all = player_params(&sc, &OnlineConfig::default()).unwrap();
    let first = OnlineParams::for_scenario(&sc.influencer_view(0).unwrap(), &OnlineConfig::default()).unwrap();
    assert_eq!(all[0], first);
}
