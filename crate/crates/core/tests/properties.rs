use proptest::prelude::*;
use softrank::datagen::{read_csv, write_csv};
use softrank::detector::detect_peaks_with;
use softrank::metrics::{cp_auc, f1_score, match_detections};
use softrank::ot::{cost_matrix, solve_sinkhorn, SinkhornConfig};
use softrank::ranks::{energy_statistic, hard_ranks, soft_ranks};
use softrank::{DetectorConfig, Detections, GroundTruth, HaltonGrid, Matrix, StatisticTrace, TimeSeries, TwoSample};

fn points(rows: usize, dim: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-5.0f64..5.0, rows * dim).prop_map(move |v| Matrix::from_vec(rows, dim, v).unwrap())
}

fn sample() -> impl Strategy<Value = TwoSample<f64>> {
    (1usize..8, 1usize..8, 1usize..4)
        .prop_flat_map(|(m, n, d)| (points(m, d), points(n, d)))
        .prop_map(|(x, y)| TwoSample::new(x, y).unwrap())
}

fn sorted_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    let mut rows = m.to_rows();
    rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows
}

fn trace_of(values: Vec<f64>) -> StatisticTrace {
    StatisticTrace { times: (0..values.len()).collect(), values, config: DetectorConfig::new(1, 0.0, 1, 0.0) }
}

fn increasing(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0usize..500, 0..max_len).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hard_ranks_are_a_permutation_of_the_grid(s in sample()) {
        let grid = s.default_grid().unwrap();
        let ranks = hard_ranks(&s, &grid).unwrap();
        let all = ranks.x_ranks.vstack(&ranks.y_ranks).unwrap();
        prop_assert_eq!(sorted_rows(&all), sorted_rows(grid.points()));
    }

    #[test]
    fn rank_energy_is_symmetric_and_nonnegative(s in sample()) {
        let grid = s.default_grid().unwrap();
        let a = energy_statistic(&hard_ranks(&s, &grid).unwrap()).unwrap();
        let b = energy_statistic(&hard_ranks(&s.swapped(), &grid).unwrap()).unwrap();
        prop_assert!(a.raw >= 0.0);
        prop_assert_eq!(a.raw, b.raw);
        let (m, n) = (s.m() as f64, s.n() as f64);
        prop_assert!((a.scaled - a.raw * m * n / (m + n)).abs() <= 1e-12 * a.scaled.abs().max(1.0));
    }

    #[test]
    fn soft_ranks_stay_inside_the_grid_box(s in sample(), eps in 0.01f64..10.0) {
        let grid = s.default_grid().unwrap();
        let ranks = soft_ranks(&s, &grid, &SinkhornConfig::new(eps)).unwrap();
        let bounds = grid.bounds();
        for row in ranks.x_ranks.iter_rows().chain(ranks.y_ranks.iter_rows()) {
            for (&v, &(lo, hi)) in row.iter().zip(&bounds) {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        prop_assert!(energy_statistic(&ranks).unwrap().raw >= 0.0);
    }

    #[test]
    fn sinkhorn_meets_its_tolerance(x in points(12, 2), eps in 0.005f64..5.0) {
        let grid = HaltonGrid::generate(12, 2).unwrap();
        let cost = cost_matrix(&x, &grid).unwrap();
        let sol = solve_sinkhorn(&cost, &SinkhornConfig::new(eps)).unwrap();
        prop_assert!(sol.converged);
        prop_assert!(sol.plan.measured_violation() <= 1e-9);
        prop_assert!(sol.plan.coupling.as_slice().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn match_counts_add_up(dets in increasing(12), truth in increasing(8), margin in 1usize..40) {
        let c = match_detections(&dets, &truth, margin);
        prop_assert_eq!(c.true_positives + c.false_negatives, truth.len());
        prop_assert_eq!(c.true_positives + c.false_positives, dets.len());
        let mut reversed = dets.clone();
        reversed.reverse();
        prop_assert_eq!(match_detections(&reversed, &truth, margin), c);
    }

    #[test]
    fn wider_margin_never_loses_matches(dets in increasing(12), truth in increasing(8), margin in 1usize..40, extra in 0usize..40) {
        let narrow = match_detections(&dets, &truth, margin).true_positives;
        let wide = match_detections(&dets, &truth, margin + extra).true_positives;
        prop_assert!(wide >= narrow);
    }

    #[test]
    fn scores_are_probabilities(values in prop::collection::vec(0.0f64..1.0, 5..60), truth in increasing(4), delta in 1usize..6) {
        let len = values.len();
        let truth: Vec<usize> = truth.into_iter().filter(|&t| t < len).collect();
        let truth = GroundTruth::new(truth, Some(len)).unwrap();
        let trace = trace_of(values);
        let auc = cp_auc(&trace, &truth, delta, delta);
        prop_assert!((0.0..=1.0).contains(&auc));
        let report = f1_score(&detect_peaks_with(&trace, 0.5, delta), &truth, delta);
        for v in [report.f1, report.precision, report.recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn detections_are_separated_thresholded_maxima(values in prop::collection::vec(0.0f64..4.0, 1..80), delta in 1usize..8, eta in 0.0f64..3.0) {
        let trace = trace_of(values.clone());
        let Detections { change_points } = detect_peaks_with(&trace, eta, delta);
        for w in change_points.windows(2) {
            prop_assert!(w[1] - w[0] > delta);
        }
        for &t in &change_points {
            prop_assert!(values[t] > eta);
            let lo = t.saturating_sub(delta);
            let hi = (t + delta).min(values.len() - 1);
            prop_assert!(values[lo..=hi].iter().all(|&v| v <= values[t]));
        }
    }

    #[test]
    fn csv_round_trip_is_exact(x in points(7, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let series = TimeSeries::new(x).unwrap();
        write_csv(&path, &series).unwrap();
        let back: TimeSeries<f64> = read_csv(std::fs::File::open(&path).unwrap(), false).unwrap();
        prop_assert_eq!(back, series);
    }
}
