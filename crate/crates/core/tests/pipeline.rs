mod common;

use std::fs;

use common::{config, synth_corpus, synth_on_disk};
use embdebias::classifier::predict_scores;
use embdebias::debias::apply_debias;
use embdebias::evaluation::roc_auc;
use embdebias::pipeline::{
    bias_samples, fit_classifier, fit_debias, run_matrix, run_matrix_on, run_strategy_on, test_set, training_sets, Access,
    ClassSeeds, DebiasKind, ExperimentConfig, FeatureMap, Phase, Scope, Strategy,
};
use embdebias::synth::{PlantedBias, SynthSpec};
use embdebias::Error;

fn small(seed: u64) -> SynthSpec {
    SynthSpec {
        dim: 16,
        n_classes: 3,
        samples_per_cell: 60,
        seed,
        ..Default::default()
    }
}

fn quick(cfg: &mut ExperimentConfig) {
    cfg.c_grid = vec![0.01, 0.1, 1.0];
}

#[test]
fn baseline_matches_plain_training_bit_exact() {
    let (_, corpus) = synth_corpus(&small(1));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    quick(&mut cfg);
    let report = run_strategy_on(&corpus, &cfg).unwrap().report;

    let names = corpus.names();
    let mut access = Access::new(&corpus, false);
    for class in &corpus.classes {
        let cs = ClassSeeds::new(&cfg.resolved_seeds(), class);
        let sets = training_sets(&corpus, class, &cs).unwrap();
        let models: Vec<_> = (0..2)
            .map(|d| {
                let x = access.rows(d, &sets[d].0, Phase::Fit).unwrap();
                fit_classifier(&x, &sets[d].1, &cfg, cs.cv_for(names[d]), class).unwrap()
            })
            .collect();
        for s in 0..2 {
            let (idx, y) = test_set(&corpus, s, class);
            let x = access.rows(s, &idx, Phase::Evaluate).unwrap();
            for (t, m) in models.iter().enumerate() {
                let auc = roc_auc(&predict_scores(m, &x).unwrap(), &y).unwrap();
                let cell = report.cell(names[t], names[s], "none", "global").unwrap();
                assert_eq!(cell.per_class[class].to_bits(), auc.to_bits(), "{class} {}->{}", names[t], names[s]);
            }
        }
    }
}

#[test]
#[ignore = "a uniform planted shift leaves the undebiased classifiers without a bias component, so LDA has no cross-domain gap to close"]
fn lda_improves_cross_domain_on_default_corpus() {
    let (_, corpus) = synth_corpus(&SynthSpec::default());
    let dir = tempfile::tempdir().unwrap();
    let out = run_matrix_on(&corpus, &config(dir.path()), &[Strategy::Lda], &[Scope::Global]).unwrap();
    let r = &out.combined;
    let cross = |s| r.mean_auc(s, "global", false).unwrap();
    let within = |s| r.mean_auc(s, "global", true).unwrap();
    assert!(cross("LDA") - cross("none") >= 0.05, "{} vs {}", cross("LDA"), cross("none"));
    assert!((within("LDA") - within("none")).abs() <= 0.02);
}

#[test]
fn kernel_debias_is_inert_without_bias() {
    let spec = SynthSpec {
        biases: vec![PlantedBias {
            direction: None,
            magnitude: 0.0,
            genre: None,
        }],
        ..small(2)
    };
    let (_, corpus) = synth_corpus(&spec);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    quick(&mut cfg);
    let out = run_matrix_on(&corpus, &cfg, &[Strategy::K, Strategy::Klda], &[Scope::Global]).unwrap();
    let r = &out.combined;
    for c in r.cells.iter().filter(|c| c.key.strategy == "K") {
        let other = r.cell(&c.key.train, &c.key.test, "KLDA", "global").unwrap();
        for (class, auc) in &c.per_class {
            let d = (auc - other.per_class[class]).abs();
            assert!(d <= 0.02, "{class} {}->{}: {d}", c.key.train, c.key.test);
        }
    }
}

#[test]
fn global_and_classwise_fits_agree_on_identical_samples() {
    let (_, corpus) = synth_corpus(&small(3));
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let samples = bias_samples(&corpus, Scope::Global, "c0");
    let mut access = Access::new(&corpus, true);
    for kind in [DebiasKind::Single, DebiasKind::Genre] {
        let fit = |access: &mut Access, scope| {
            fit_debias(access, &FeatureMap::Identity, &cfg, kind, scope, "c0", &samples)
                .unwrap()
                .unwrap()
        };
        let g = fit(&mut access, Scope::Global);
        let c = fit(&mut access, Scope::Classwise);
        assert_eq!(g.operator.basis(), c.operator.basis());
        assert_eq!(g.operator.singular_values(), c.operator.singular_values());
        let (idx, _) = test_set(&corpus, 1, "c0");
        let x = access.rows(1, &idx, Phase::Evaluate).unwrap();
        assert_eq!(apply_debias(&g.operator, &x).unwrap(), apply_debias(&c.operator, &x).unwrap());
        let vectors = |f: &embdebias::pipeline::FittedDebias| f.directions.iter().map(|d| d.vector.clone()).collect::<Vec<_>>();
        assert_eq!(vectors(&g), vectors(&c));
    }
}

#[test]
fn baseline_only_matrix_is_one_report() {
    let (_, corpus) = synth_corpus(&small(4));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    quick(&mut cfg);
    let out = run_matrix_on(&corpus, &cfg, &[Strategy::None], &[Scope::Global]).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert_eq!(out.reports[0].0, Strategy::None);
    assert_eq!(out.combined.cells.len(), 4);
}

#[test]
fn matrix_rerun_writes_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synth_on_disk(&small(5), dir.path());
    quick(&mut cfg);
    let strategies = [Strategy::Lda, Strategy::Mlda];
    let scopes = [Scope::Global, Scope::Classwise];
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        cfg.output_dir = dir.path().join(run);
        run_matrix(&cfg, &strategies, &scopes).unwrap();
        outputs.push(["table1.csv", "fig3.csv", "fig2.csv"].map(|f| fs::read(cfg.output_dir.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0][0].is_empty());
}

#[test]
fn instrumented_run_reads_no_test_rows_while_fitting() {
    let (_, corpus) = synth_corpus(&small(6));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    quick(&mut cfg);
    cfg.instrument = true;
    cfg.strategy = Strategy::Mklda;
    cfg.scope = Scope::Classwise;
    let out = run_strategy_on(&corpus, &cfg).unwrap();
    assert_eq!(out.audit.len(), corpus.classes.len());
    for (label, a) in &out.audit {
        assert!(a.fit_train > 0 && a.evaluate_test > 0, "{label}: {a:?}");
        assert_eq!(a.evaluate_train, 0, "{label}");
    }

    let (idx, _) = test_set(&corpus, 0, "c0");
    let mut access = Access::new(&corpus, true);
    assert!(matches!(access.rows(0, &idx[..1], Phase::Fit), Err(Error::Leakage { .. })));
    assert!(access.rows(0, &idx[..1], Phase::Evaluate).is_ok());
}

#[test]
fn failing_matrix_leaves_partial_results() {
    let (_, corpus) = synth_corpus(&small(7));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    quick(&mut cfg);
    cfg.min_genre_samples = 100_000;
    let err = run_matrix_on(&corpus, &cfg, &[Strategy::Mlda], &[Scope::Global]).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("strategy=mLDA") && msg.contains("class=c0"), "{msg}");
    assert!(matches!(err.root(), Error::InsufficientSamples { .. }));
    let partial: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("partial.json")).unwrap()).unwrap();
    assert_eq!(partial["completed"], serde_json::json!([["none", "global"]]));
    assert_eq!(partial["failed"], serde_json::json!(["mLDA", "global"]));
    assert!(dir.path().join("runs/none-global.json").is_file());
}

#[test]
fn fingerprint_tracks_settings_not_location() {
    let a = config("/tmp/a".as_ref());
    let mut b = config("/tmp/b".as_ref());
    b.instrument = true;
    assert_eq!(a.fingerprint(&[]), b.fingerprint(&[]));
    b.seed = 1;
    assert_ne!(a.fingerprint(&[]), b.fingerprint(&[]));
    assert_ne!(a.fingerprint(&[]), a.fingerprint(&["probe"]));
}
