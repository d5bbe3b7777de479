mod common;

use embdebias::evaluation::{
    build_report, format_with_delta, render_table, roc_auc, CellKey, Layout, RawResults,
};
use embdebias::Error;
use proptest::prelude::*;

/// Fraction of (pos, neg) pairs ranked correctly, ties counting one half.
fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

#[test]
fn auc_examples() {
    assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.4; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    let (s, y) = ([0.3, 0.7, 0.3, 0.1], [true, true, false, false]);
    assert_eq!(roc_auc(&s, &y).unwrap(), 0.875);
    assert_eq!(pairwise_auc(&s, &y), 0.875);
    assert!(matches!(roc_auc(&[0.1, 0.2], &[false, false]), Err(Error::SingleClass)));
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=50).prop_flat_map(|n| {
        (
            // a coarse grid forces ties
            proptest::collection::vec((0i32..8).prop_map(|v| v as f64 / 4.0), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pair_counting((scores, mut labels) in scored_labels()) {
        labels[0] = true;
        labels[1] = false;
        let got = roc_auc(&scores, &labels).unwrap();
        prop_assert!((got - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert_eq!(got + roc_auc(&scores, &flipped).unwrap(), 1.0);
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, mut labels) in scored_labels()) {
        labels[0] = true;
        labels[1] = false;
        let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&t, &labels).unwrap());
    }
}

fn raw(classes: &[&str], cells: &[(CellKey, Vec<f64>)]) -> RawResults {
    RawResults {
        classes: classes.iter().map(|c| c.to_string()).collect(),
        declared: cells.iter().map(|(k, _)| k.clone()).collect(),
        cells: cells
            .iter()
            .map(|(k, v)| (k.clone(), classes.iter().map(|c| c.to_string()).zip(v.iter().copied()).collect()))
            .collect(),
        ..Default::default()
    }
}

#[test]
fn report_means() {
    let k = CellKey::new("A", "A", "none", "global");
    let r = build_report(raw(&["organ"], &[(k.clone(), vec![0.9])])).unwrap();
    assert_eq!(r.cells[0].mean, 0.9);

    let names: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let vals: Vec<f64> = (0..10).map(|i| 0.5 + 0.037 * i as f64).collect();
    let r = build_report(raw(&refs, &[(k, vals.clone())])).unwrap();
    let mut s = 0.0;
    for v in &vals {
        s += v;
    }
    assert!((r.cells[0].mean - s / 10.0).abs() <= 1e-15);
    let recomputed = r.cells[0].per_class.values().sum::<f64>() / 10.0;
    assert_eq!(r.cells[0].mean, recomputed);
}

#[test]
fn missing_cell_is_named() {
    let present = CellKey::new("A", "A", "none", "global");
    let missing = CellKey::new("A", "B", "none", "global");
    let mut input = raw(&["organ"], &[(present, vec![0.9])]);
    input.declared.push(missing);
    match build_report(input) {
        Err(Error::IncompleteMatrix(msg)) => assert!(msg.contains("A->B"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn delta_formatting() {
    assert_eq!(format_with_delta(0.8587, 0.8501), ("85.87 (+0.86)".to_string(), true));
    assert_eq!(format_with_delta(0.8456, 0.8547), ("84.56 (-0.91)".to_string(), true));
    assert_eq!(format_with_delta(0.8547, 0.85468), ("85.47 (0.0)".to_string(), false));
}

#[test]
fn table1_rendering_and_layout_errors() {
    let mut cells = Vec::new();
    for (s, base) in [("none", 0.85), ("LDA", 0.86)] {
        for (t, u) in [("A", "A"), ("B", "B"), ("A", "B"), ("B", "A")] {
            cells.push((CellKey::new(t, u, s, "global"), vec![base]));
        }
    }
    let r = build_report(raw(&["organ"], &cells)).unwrap();
    let out = render_table(&r, Layout::Table1).unwrap();
    assert!(out.text.contains("86.00 (+1.00)*"), "{}", out.text);
    assert!(out.csv.starts_with("strategy,scope,train,test,mean_auc,delta"));
    assert!(matches!("table9".parse::<Layout>(), Err(Error::Layout(_))));
    let empty = build_report(RawResults::default()).unwrap();
    assert!(matches!(render_table(&empty, Layout::Fig3), Err(Error::Layout(_))));
}
