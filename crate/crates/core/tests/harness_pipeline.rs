use std::path::Path;

use hybridq::datapipe::{select_eval_subset, synthetic};
use hybridq::harness::{
    evaluate_streaming, render_table, run_dir, run_matrix, run_pipeline, ArtifactBundle, Backend, DatasetKind,
    ExperimentConfig, Manifest, ModelKind, StopAfter, Store, TrainedModel,
};
use hybridq::metrics::StreamingConfusion;
use hybridq::qsim::NoiseSpec;
use hybridq::vqc::Execution;
use hybridq::Error;

fn nslkdd_dir(dir: &Path, seed: u64) {
    synthetic::write_nslkdd(dir, 900, 400, 0.6, seed).unwrap();
}

fn small(id: &str, model: ModelKind, qubits: usize, root: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(id, DatasetKind::Nslkdd, model, root);
    c.qubits = qubits;
    c.reps = 1;
    c.vqc_reps = 1;
    c.encoder.hidden_sizes = Some(vec![24, 12]);
    c.encoder.embed_dim = 6;
    c.schedule.epochs = 3;
    c.schedule.batch_size = 64;
    c.schedule.patience = 3;
    c.data.train_limit = Some(60);
    c.data.val_limit = Some(40);
    c.data.test_limit = Some(120);
    c.qsvm.c_grid = vec![0.1, 1.0, 10.0];
    c.qsvm.folds = 3;
    c.seeds.split = 3;
    c.seeds.encoder = 5;
    c.seeds.quantum = 7;
    c
}

fn manifest_bytes(run: &Path) -> Vec<u8> {
    std::fs::read(run.join("manifest.json")).unwrap()
}

#[test]
fn identical_configs_give_identical_manifests_and_streams() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 1);
    for model in [ModelKind::Qsvm, ModelKind::Vqc] {
        let c = small("det", model, 2, data.path());
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (sa, sb) = (Store::new(a.path()).unwrap(), Store::new(b.path()).unwrap());
        let ra = run_pipeline(&c, &sa, StopAfter::Evaluate).unwrap();
        let rb = run_pipeline(&c, &sb, StopAfter::Evaluate).unwrap();
        assert!(ra.manifest.complete);
        assert_eq!(manifest_bytes(&ra.run_dir), manifest_bytes(&rb.run_dir));
        let idx: Vec<usize> = (0..30).collect();
        let mut stream_a = Vec::new();
        let mut stream_b = Vec::new();
        let ba = ArtifactBundle::open(&ra.run_dir, &sa).unwrap();
        let bb = ArtifactBundle::open(&rb.run_dir, &sb).unwrap();
        evaluate_streaming(&ba, &idx, Backend::Shots, &mut stream_a).unwrap();
        evaluate_streaming(&bb, &idx, Backend::Shots, &mut stream_b).unwrap();
        assert_eq!(stream_a, stream_b);
    }
}

#[test]
fn replacing_test_rows_changes_no_fitted_artifact() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    nslkdd_dir(d1.path(), 1);
    nslkdd_dir(d2.path(), 99);
    std::fs::copy(d1.path().join("KDDTrain+.txt"), d2.path().join("KDDTrain+.txt")).unwrap();
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    for model in [ModelKind::Qsvm, ModelKind::Vqc, ModelKind::ClassicalBaseline] {
        let m1 = run_pipeline(&small("leak", model, 2, d1.path()), &store, StopAfter::Evaluate).unwrap().manifest;
        let m2 = run_pipeline(&small("leak", model, 2, d2.path()), &store, StopAfter::Evaluate).unwrap().manifest;
        assert_ne!(m1.source_digest, m2.source_digest);
        assert!(!m1.fitted_hashes().is_empty());
        assert_eq!(m1.fitted_hashes(), m2.fitted_hashes(), "{model:?}");
        assert_ne!(m1.evaluation.unwrap().test, m2.evaluation.unwrap().test);
    }
}

#[test]
fn reopened_bundle_reproduces_stored_metrics_and_thresholds() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 2);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    for model in [ModelKind::Qsvm, ModelKind::Vqc, ModelKind::ClassicalBaseline] {
        let out = run_pipeline(&small("rt", model, 2, data.path()), &store, StopAfter::Evaluate).unwrap();
        let bundle = ArtifactBundle::open(&out.run_dir, &store).unwrap();
        let stored = out.manifest.evaluation.clone().unwrap();
        assert_eq!(bundle.evaluate().unwrap(), stored);
        assert_eq!(stored.test.threshold, stored.val.threshold);
        assert_eq!(stored.test.threshold, bundle.threshold());
    }
}

#[test]
fn tampered_artifact_is_rejected_on_open() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 2);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let out = run_pipeline(&small("tamper", ModelKind::ClassicalBaseline, 2, data.path()), &store, StopAfter::Evaluate)
        .unwrap();
    let rec = out.manifest.stage("baseline").unwrap();
    let path = store.resolve(rec).join("threshold.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("\"beta\"", "\"beta\" ")).unwrap();
    assert!(matches!(ArtifactBundle::open(&out.run_dir, &store), Err(Error::Integrity(_))));
    std::fs::write(out.run_dir.join("manifest.json"), b"{}").unwrap();
    assert!(Manifest::load(&out.run_dir).is_err());
}

#[test]
fn qubits_above_embedding_fail_before_any_compute() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 1);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let mut c = small("big", ModelKind::Qsvm, 4, data.path());
    c.encoder.embed_dim = 3;
    assert!(matches!(run_pipeline(&c, &store, StopAfter::Evaluate), Err(Error::Config(_))));
    assert_eq!(std::fs::read_dir(s.path()).unwrap().count(), 0);
}

#[test]
fn failing_stage_is_named_and_flagged_incomplete() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 1);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let c = small("broken", ModelKind::Qsvm, 2, data.path());
    std::fs::write(data.path().join("KDDTest+.txt"), "1,2,3\n").unwrap();
    match run_pipeline(&c, &store, StopAfter::Evaluate) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "preprocess"),
        other => panic!("{other:?}"),
    }
    let m = Manifest::load(&run_dir(&store, &c).unwrap()).unwrap();
    assert!(!m.complete);
    assert_eq!(m.failed_stage.as_deref(), Some("preprocess"));
}

#[test]
fn matrix_bookkeeping_and_resume() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 4);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let mut configs = vec![
        small("C0", ModelKind::ClassicalBaseline, 2, data.path()),
        small("C1", ModelKind::Qsvm, 2, data.path()),
        small("C2", ModelKind::Qsvm, 4, data.path()),
        small("C3", ModelKind::Vqc, 2, data.path()),
        small("C4", ModelKind::Vqc, 4, data.path()),
    ];
    for c in &mut configs[3..] {
        c.data.train_limit = Some(30);
        c.data.val_limit = Some(20);
        c.schedule.epochs = 2;
        c.schedule.patience = 2;
    }
    let result = run_matrix(&configs, 3, &store, 2).unwrap();
    assert_eq!(result.rows.len(), 15);
    assert_eq!(result.means.len(), 5);
    assert!(result.rows.iter().all(|r| r.error.is_none()), "{:?}", result.rows);
    let c0 = &result.means[0];
    assert_eq!(c0.id, "C0");
    assert!(c0.accuracy.is_some() && c0.auroc.is_some());
    let c1: Vec<f64> = result.rows.iter().filter(|r| r.id == "C1").map(|r| r.accuracy.unwrap()).collect();
    assert!((result.means[1].accuracy.unwrap() - c1.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    let table = render_table(&result);
    assert_eq!(table.lines().count(), 2 + 20);

    let runs = s.path().join("runs");
    let stamp = |p: &Path| std::fs::metadata(p.join("manifest.json")).unwrap().modified().unwrap();
    let before: Vec<_> =
        std::fs::read_dir(&runs).unwrap().map(|e| (e.as_ref().unwrap().path(), stamp(&e.unwrap().path()))).collect();
    assert_eq!(before.len(), 15);
    let again = run_matrix(&configs, 3, &store, 2).unwrap();
    assert_eq!(again, result);
    for (p, t) in before {
        assert_eq!(stamp(&p), t, "{} was recomputed", p.display());
    }
}

#[test]
fn streaming_audit_lines_match_confusion_and_batch_metrics() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 5);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let mut c = small("stream", ModelKind::Qsvm, 2, data.path());
    c.data.test_limit = None;
    c.stream.reference_limit = 64;
    let out = run_pipeline(&c, &store, StopAfter::Evaluate).unwrap();
    let bundle = ArtifactBundle::open(&out.run_dir, &store).unwrap();

    let subset = select_eval_subset(&bundle.split.test.categories, 100, 11).unwrap();
    let mut sink = Vec::new();
    let o = evaluate_streaming(&bundle, &subset, Backend::Exact, &mut sink).unwrap();
    let text = String::from_utf8(sink).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], StreamingConfusion::HEADER);
    assert_eq!(lines.len(), 101);
    assert_eq!(o.lines.len(), 100);
    assert_eq!(o.counts, o.report.confusion);
    assert_eq!(o.counts.total(), 100);
    let last: Vec<u64> = lines[100].split(',').skip(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(last, vec![o.counts.tp, o.counts.tn, o.counts.fp, o.counts.fn_]);

    // reference limit covers the whole training subset, so streaming equals batch
    let all: Vec<usize> = (0..bundle.split.test.len()).collect();
    let o = evaluate_streaming(&bundle, &all, Backend::Exact, &mut std::io::sink()).unwrap();
    assert!(!o.reference.as_ref().unwrap().refit);
    assert_eq!(o.report, out.manifest.evaluation.as_ref().unwrap().test);

    let mut c = c.clone();
    c.data.train_limit = Some(150);
    c.stream.reference_limit = 64;
    let out = run_pipeline(&c, &store, StopAfter::Evaluate).unwrap();
    let bundle = ArtifactBundle::open(&out.run_dir, &store).unwrap();
    let o = evaluate_streaming(&bundle, &subset, Backend::Shots, &mut std::io::sink()).unwrap();
    let r = o.reference.unwrap();
    assert!(r.size <= 64 && r.refit);
    assert_eq!(o.counts.total(), 100);
}

#[test]
fn vqc_noiseless_infinite_shot_limit_matches_exact_evaluation() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 6);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let out = run_pipeline(&small("vqc", ModelKind::Vqc, 2, data.path()), &store, StopAfter::Evaluate).unwrap();
    let bundle = ArtifactBundle::open(&out.run_dir, &store).unwrap();
    let TrainedModel::Vqc { model, .. } = &bundle.model else { panic!("not a VQC bundle") };
    let rows: Vec<usize> = (0..40).collect();
    let analytic = Execution::Analytic { noise: NoiseSpec::noiseless(), mitigate: false };
    let exact = bundle.test_scores(&rows).unwrap();
    for (a, e) in bundle.test_angles(&rows).unwrap().iter().zip(&exact) {
        assert!((model.forward_logit(a, &analytic).unwrap() - e).abs() < 1e-9);
    }
}

#[test]
fn angle_range_change_invalidates_quantum_stages_only() {
    let data = tempfile::tempdir().unwrap();
    nslkdd_dir(data.path(), 8);
    let s = tempfile::tempdir().unwrap();
    let store = Store::new(s.path()).unwrap();
    let mut c = small("range", ModelKind::Qsvm, 2, data.path());
    let a = run_pipeline(&c, &store, StopAfter::Evaluate).unwrap().manifest;
    c.angle_range = std::f64::consts::FRAC_PI_8;
    let b = run_pipeline(&c, &store, StopAfter::Evaluate).unwrap().manifest;
    assert_eq!(a.stage("encoder").unwrap().key, b.stage("encoder").unwrap().key);
    assert_ne!(a.stage("kernel").unwrap().key, b.stage("kernel").unwrap().key);
    assert_ne!(a.stage("qsvm").unwrap().key, b.stage("qsvm").unwrap().key);
}
