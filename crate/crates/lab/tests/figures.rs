use influence_core::game::{compare_online_offline, Alg2Config, InfoMode};
use influence_core::stats::summarize;
use influence_core::{trial_seed, OnlineConfig};
use influence_game_lab::{reproduce, ExperimentSpec, Sweep};

#[test]
fn fig2_uses_the_four_node_network() {
    let sc = ExperimentSpec::bundled("fig2").unwrap().base_scenario().unwrap();
    assert_eq!((sc.n(), sc.m()), (4, 1));
    let l = sc.network().laplacian();
    let expected = [
        [3.0, -1.0, -1.0, -1.0],
        [-1.0 / 3.0, 2.0, -2.0 / 3.0, -1.0],
        [0.0, -1.0, 1.0, 0.0],
        [-1.0, -2.0, 0.0, 3.0],
    ];
    for (i, row) in expected.iter().enumerate() {
        assert_eq!(l.row(i), row);
    }
}

#[test]
fn fig4_and_fig5_parameters() {
    let fig4 = ExperimentSpec::bundled("fig4").unwrap().base_scenario().unwrap();
    let alphas = fig4.average_budgets();
    for (a, e) in alphas.iter().zip([0.7, 0.5, 0.3]) {
        assert!((a - e).abs() < 1e-12);
    }
    let fig5 = ExperimentSpec::bundled("fig5").unwrap().base_scenario().unwrap();
    assert_eq!(fig5.horizon(), 100);
    assert_eq!(fig5.budgets()[0], 50.0);
    assert_eq!(fig5.caps(), &[1.0, 1.0, 1.0]);
    assert_eq!(fig5.durations().values, vec![5.0]);
}

#[test]
fn richer_influencer_keeps_more_utility() {
    let spec = ExperimentSpec::bundled("fig3").unwrap().with_trials(10).unwrap();
    let rep = reproduce(&spec, None).unwrap();
    for col in ["offline", "full"] {
        let u1 = rep.curve(&format!("{col}_u1")).unwrap().means();
        let u2 = rep.curve(&format!("{col}_u2")).unwrap().means();
        assert!(u1.iter().zip(&u2).all(|(a, b)| a > b), "{col}: {u1:?} vs {u2:?}");
    }
}

#[test]
fn online_epsilon_decays_with_horizon() {
    let spec = ExperimentSpec::bundled("fig3").unwrap();
    let base = spec.base_scenario().unwrap();
    let eps: Vec<f64> = [10, 20, 40, 80]
        .iter()
        .map(|&k| {
            let sc = base.with_average_budgets(k, &base.average_budgets()).unwrap();
            let per_seed: Vec<f64> = (0..50)
                .map(|t| {
                    let cmp = compare_online_offline(
                        &sc,
                        trial_seed(7, t),
                        InfoMode::Full,
                        &OnlineConfig::default(),
                        &Alg2Config::default(),
                        1e-12,
                    )
                    .unwrap();
                    cmp.online_epsilon.iter().copied().fold(0.0, f64::max)
                })
                .collect();
            summarize(&per_seed).mean
        })
        .collect();
    assert!(eps.windows(2).all(|w| w[1] <= w[0]), "{eps:?}");
    assert!(eps[3] <= 0.5 * eps[0], "{eps:?}");
}

#[test]
fn manifest_round_trips_into_the_same_curves() {
    let spec = ExperimentSpec::bundled("fig4").unwrap().with_trials(3).unwrap();
    let rep = reproduce(&spec, None).unwrap();
    let text = serde_json::to_string(&rep.manifest).unwrap();
    let again = reproduce(&ExperimentSpec::from_json(&text).unwrap(), None).unwrap();
    assert_eq!(rep.curves, again.curves);
    assert_eq!(rep.manifest.trial_seeds.len(), 3);
}

#[test]
fn sweep_errors_name_the_point() {
    let mut spec = ExperimentSpec::bundled("fig3").unwrap().with_trials(2).unwrap();
    spec.experiment.alg2.max_outer = 0;
    spec.experiment.sweep = Sweep::Game {
        horizons: vec![10],
        modes: vec![InfoMode::Full],
    };
    // Two players use best responses, so dual-ascent settings do not matter here.
    assert!(reproduce(&spec, None).is_ok());

    let mut spec = ExperimentSpec::bundled("fig4").unwrap().with_trials(1).unwrap();
    spec.experiment.alg2.max_outer = 1;
    spec.experiment.sweep = Sweep::Game {
        horizons: vec![10, 20],
        modes: vec![InfoMode::Full],
    };
    let err = format!("{:#}", reproduce(&spec, None).unwrap_err());
    assert!(err.contains("K=10") || err.contains("K=20"), "{err}");
}
