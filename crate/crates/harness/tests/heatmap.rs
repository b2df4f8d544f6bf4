use edgecollab_harness::{heatmap, octile_band, write_heatmap, MetricsRow, Phase, Status};
use proptest::prelude::*;

fn eval_row(algorithm: &str, seed: u64, costs: &[f64]) -> MetricsRow {
    MetricsRow {
        run_id: format!("{algorithm}_s{seed}"),
        algorithm: algorithm.to_string(),
        axis: String::new(),
        axis_value: None,
        seed,
        phase: Phase::Eval,
        iteration: 0,
        status: Status::Ok,
        mean_user_cost: Some(costs.iter().sum::<f64>() / costs.len() as f64),
        mean_delay: Some(1.0),
        mean_energy: Some(0.1),
        mean_privacy: Some(0.5),
        hit_rate: Some(1.0),
        success_rate: Some(1.0),
        lambda_before: None,
        lambda: None,
        user_reward: None,
        alloc_reward: None,
        deploy_reward: None,
        per_user_cost: costs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
        message: String::new(),
    }
}

#[test]
fn uniform_costs_share_the_lowest_band() {
    let cells = heatmap(&[eval_row("a", 0, &[2.0; 8]), eval_row("b", 0, &[2.0; 8])]).unwrap();
    assert_eq!(cells.len(), 16);
    assert!(cells.iter().all(|c| c.band == 1));
}

#[test]
fn increasing_costs_over_eight_users_rank_one_to_eight() {
    let costs: Vec<f64> = (0..8).map(|k| 1.0 + k as f64 * 0.5).collect();
    let cells = heatmap(&[eval_row("a", 0, &costs)]).unwrap();
    let bands: Vec<usize> = cells.iter().map(|c| c.band).collect();
    assert_eq!(bands, (1..=8).collect::<Vec<_>>());
}

#[test]
fn one_row_per_user_per_algorithm() {
    let rows: Vec<MetricsRow> = ["a", "b", "c"]
        .iter()
        .flat_map(|a| (0..3).map(move |s| eval_row(a, s, &[1.0, 2.0, 3.0, 4.0, 5.0])))
        .collect();
    let cells = heatmap(&rows).unwrap();
    assert_eq!(cells.len(), 5 * 3);
    let mut out = Vec::new();
    write_heatmap(&mut out, &cells).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 15);
    assert_eq!(text.lines().next(), Some("algorithm,user,cost,band"));
}

#[test]
fn costs_are_averaged_over_seeds_and_pooled_across_algorithms() {
    let rows = [
        eval_row("cheap", 0, &[1.0, 3.0]),
        eval_row("cheap", 1, &[3.0, 5.0]),
        eval_row("dear", 0, &[10.0, 20.0]),
    ];
    let cells = heatmap(&rows).unwrap();
    let got: Vec<(&str, usize, f64, usize)> = cells.iter().map(|c| (c.algorithm.as_str(), c.user, c.cost, c.band)).collect();
    assert_eq!(got, [("cheap", 0, 2.0, 1), ("cheap", 1, 4.0, 3), ("dear", 0, 10.0, 5), ("dear", 1, 20.0, 7)]);
}

#[test]
fn training_and_failed_rows_are_ignored() {
    let mut train = eval_row("a", 0, &[100.0]);
    train.phase = Phase::Train;
    let mut failed = eval_row("a", 1, &[100.0]);
    failed.status = Status::Failed;
    let cells = heatmap(&[train, failed, eval_row("a", 2, &[1.0])]).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].cost, 1.0);
    assert!(heatmap(&[]).is_err());
}

#[test]
fn mismatched_user_counts_are_rejected() {
    assert!(heatmap(&[eval_row("a", 0, &[1.0, 2.0]), eval_row("a", 1, &[1.0])]).is_err());
}

proptest! {
    #[test]
    fn bands_are_monotone_and_in_range(costs in prop::collection::vec(0.0f64..100.0, 1..40)) {
        for &a in &costs {
            let ba = octile_band(a, &costs);
            prop_assert!((1..=8).contains(&ba));
            for &b in &costs {
                if a < b {
                    prop_assert!(ba <= octile_band(b, &costs));
                }
            }
        }
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(octile_band(min, &costs), 1);
    }
}
