use super::*;

fn set_from(pairs: &[(u32, f64)]) -> PredictionSet {
    let items = pairs
        .iter()
        .enumerate()
        .map(|(i, &(t, p))| Prediction::new(format!("p{i}"), 2018, t, p))
        .collect();
    PredictionSet::new("test", items).unwrap()
}

#[test]
fn rounding_half_away_from_zero_clamped() {
    assert_eq!(round_prediction(2.5), 3);
    assert_eq!(round_prediction(2.4999), 2);
    assert_eq!(round_prediction(-0.5), 0);
    assert_eq!(round_prediction(-7.0), 0);
    assert_eq!(round_prediction(0.5), 1);
}

#[test]
fn mae_rmse_hand_values() {
    let s = set_from(&[(0, 3.0), (10, 5.0)]);
    assert_eq!(mae(&s).unwrap(), 4.0);
    assert!((rmse(&s).unwrap() - 17f64.sqrt()).abs() < 1e-12);
    let exact = set_from(&[(4, 4.0), (9, 9.0)]);
    assert_eq!((mae(&exact).unwrap(), rmse(&exact).unwrap()), (0.0, 0.0));
    let equal = set_from(&[(4, 6.0), (9, 7.0), (1, 3.0)]);
    assert!((mae(&equal).unwrap() - rmse(&equal).unwrap()).abs() < 1e-12);
}

#[test]
fn metrics_use_raw_predictions() {
    let s = set_from(&[(10, 10.4)]);
    assert!((mae(&s).unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(interval_accuracy(&s, 0).unwrap(), 100.0);
}

#[test]
fn worked_interval_example() {
    let s = set_from(&[(20, 23.0)]);
    assert_eq!(interval_accuracy(&s, 3).unwrap(), 100.0);
    assert_eq!(interval_accuracy(&s, 1).unwrap(), 0.0);
}

fn accuracies(diffs: [i32; 10]) -> Vec<f64> {
    let s = set_from(&diffs.map(|d| (20, 20.0 + d as f64)));
    HALF_WIDTHS.iter().map(|&k| interval_accuracy(&s, k).unwrap()).collect()
}

#[test]
fn crafted_ten_sample_accuracies() {
    // Hand count: |d| ≤ 3 holds for 0, 0, 1, 2, 3 and |d| ≤ 5 adds 4 and 5.
    assert_eq!(accuracies([0, 0, 1, 2, 3, 4, 5, 6, 10, 11]), vec![20.0, 30.0, 50.0, 70.0, 90.0]);
    assert_eq!(accuracies([0, 0, 1, 2, 2, 3, 4, 5, 10, 11]), vec![20.0, 30.0, 60.0, 80.0, 90.0]);
    // Sign does not matter.
    assert_eq!(accuracies([0, 0, -1, 2, -2, 3, -4, 5, -10, 11]), vec![20.0, 30.0, 60.0, 80.0, 90.0]);
}

#[test]
fn bucket_tables_crafted() {
    // True values span every bucket; rounded diffs are +0, -2, +4, -12, +11, +1.
    let s = set_from(&[(5, 5.0), (15, 13.0), (25, 29.0), (35, 23.0), (45, 56.0), (41, 42.0)]);
    assert_eq!(ground_truth_counts(&s).unwrap(), BucketCounts([1, 1, 1, 1, 2]));
    assert_eq!(class_bucket_table(&s, 1).unwrap(), BucketCounts([1, 0, 0, 0, 1]));
    assert_eq!(class_bucket_table(&s, 3).unwrap(), BucketCounts([1, 1, 0, 0, 1]));
    assert_eq!(overflow_table(&s).unwrap(), BucketCounts([0, 0, 0, 1, 1]));
    assert_eq!(class_bucket_table(&s, u32::MAX).unwrap(), ground_truth_counts(&s).unwrap());
}

#[test]
fn perfect_predictions() {
    let s = set_from(&[(0, 0.0), (12, 12.0), (44, 44.0)]);
    for k in HALF_WIDTHS {
        assert_eq!(interval_accuracy(&s, k).unwrap(), 100.0);
        assert_eq!(class_bucket_table(&s, k).unwrap(), ground_truth_counts(&s).unwrap());
    }
    assert_eq!(overflow_table(&s).unwrap(), BucketCounts([0; 5]));
    assert_eq!(
        estimation_overview(&s).unwrap(),
        Overview {
            over: 0,
            exact: 3,
            under: 0
        }
    );
}

#[test]
fn overview_crafted() {
    let s = set_from(&[(10, 12.0), (10, 10.0), (10, 9.0), (10, 9.0)]);
    assert_eq!(
        estimation_overview(&s).unwrap(),
        Overview {
            over: 1,
            exact: 1,
            under: 2
        }
    );
}

#[test]
fn empty_set_errors() {
    let s = PredictionSet::new("none", vec![]).unwrap();
    assert!(mae(&s).is_err());
    assert!(rmse(&s).is_err());
    assert!(interval_accuracy(&s, 1).is_err());
    assert!(class_bucket_table(&s, 1).is_err());
    assert!(overflow_table(&s).is_err());
    assert!(estimation_overview(&s).is_err());
}

fn truth(ids: &[&str]) -> Vec<WindowSample> {
    ids.iter()
        .enumerate()
        .map(|(i, id)| {
            let mut x = [[0.0; 21]; 5];
            for (t, row) in x.iter_mut().enumerate() {
                row[crate::ingest::feature::SEASON] = 2013.0 + t as f64;
                row[crate::ingest::feature::HR] = (10 * i + t) as f64;
                row[crate::ingest::feature::PA] = 600.0;
                row[crate::ingest::feature::BB] = 50.0;
            }
            WindowSample {
                player_id: id.to_string(),
                target_year: 2018,
                x,
                y: 20 + i as u32,
            }
        })
        .collect()
}

#[test]
fn external_join_counts_unmatched() {
    let csv = "player_id,target_year,prediction\na,2018,21\nb,2018,19.6\nzz,2018,30\n";
    let ext = ingest_external_predictions(csv.as_bytes(), "ZiPS").unwrap();
    let joined = ext.join(&truth(&["a", "b", "c"])).unwrap();
    assert_eq!(joined.set.len(), 2);
    assert_eq!(joined.unmatched, vec![("zz".to_string(), 2018)]);
    assert_eq!(joined.missing, vec!["c".to_string()]);
    assert_eq!(joined.set.get("b").unwrap().y_rounded, 20);
    // Hand-joined oracle: truths 20, 21; predictions 21, 19.6.
    assert!((mae(&joined.set).unwrap() - (1.0 + 1.4) / 2.0).abs() < 1e-12);
}

#[test]
fn external_errors() {
    let empty = "player_id,target_year,prediction\n";
    assert!(matches!(ingest_external_predictions(empty.as_bytes(), "x"), Err(EvalError::Empty(_))));
    let bad_header = "id,year,pred\na,2018,1\n";
    assert!(matches!(ingest_external_predictions(bad_header.as_bytes(), "x"), Err(EvalError::Schema(_))));
    let bad_row = "player_id,target_year,prediction\na,2018,1\nb,20x8,2\n";
    match ingest_external_predictions(bad_row.as_bytes(), "x") {
        Err(EvalError::Row { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let dup = "player_id,target_year,prediction\na,2018,1\na,2018,2\n";
    assert!(ingest_external_predictions(dup.as_bytes(), "x").is_err());
}

#[test]
fn case_view_marks_missing_source() {
    let t = truth(&["a", "b"]);
    let model = PredictionSet::from_samples("E", &t, &[18.2, 25.0]).unwrap();
    let ext = ingest_external_predictions("player_id,target_year,prediction\na,2018,22\n".as_bytes(), "ZiPS")
        .unwrap()
        .join(&t)
        .unwrap();
    let view = case_view(&[&model, &ext.set], &t, &["a".into(), "b".into()]).unwrap();
    assert_eq!(view.rows[1].predictions, vec![Some(25), None]);
    let text = view.render();
    assert!(text.contains(MISSING));
    assert_eq!(view.rows[0].at_bats, [550; 5]);
    assert!(matches!(
        case_view(&[&model], &t, &["nobody".into()]),
        Err(EvalError::UnknownPlayer(_))
    ));
}

#[test]
fn case_view_golden_text() {
    let t = truth(&["ortizda01"]);
    let model = PredictionSet::from_samples("E", &t, &[23.6]).unwrap();
    let view = case_view(&[&model], &t, &["ortizda01".into()]).unwrap();
    let want = "\
player       GT     E
ortizda01    20    24

Previous performance
ortizda01  year  2013  2014  2015  2016  2017
             HR     0     1     2     3     4
             AB   550   550   550   550   550
";
    assert_eq!(view.render(), want);
}

#[test]
fn report_is_pure_and_consistent() {
    let s = set_from(&[(5, 5.2), (15, 13.0), (25, 29.4), (35, 23.0), (45, 56.0), (41, 42.0)]);
    let a = EvalReport::build(&s, 2018).unwrap();
    let b = EvalReport::build(&s, 2018).unwrap();
    assert_eq!(a.render_text(), b.render_text());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let o = a.overview;
    assert_eq!(o.over + o.exact + o.under, a.n);
    let table = comparison_table(&[a.clone(), a]);
    assert_eq!(table.lines().count(), 3);
}
