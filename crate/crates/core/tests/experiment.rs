use noisy_ar::experiment::{run_experiment, Command, ExperimentConfig};
use noisy_ar::io::RunReport;
use noisy_ar::model::{ArSimulationSpec, TimeSeries};
use noisy_ar::preprocess::inject_artefact;
use noisy_ar::Error;

fn config(cmd: Command, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::for_command(cmd);
    c.out_dir = dir.to_path_buf();
    c
}

fn without_timings(mut r: RunReport) -> RunReport {
    r.timings.clear();
    r
}

#[test]
fn artefact_sample_std() {
    let y = TimeSeries::scalar(&vec![0.0; 10_000]).unwrap();
    let out = inject_artefact(&y, 1, 1, 10_000, 20.0, 7).unwrap();
    let v = out.scalar_values().unwrap();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    assert!((sd / 20.0 - 1.0).abs() < 0.03, "sample std {sd}");
}

#[test]
fn artefact_replaces_only_window() {
    let (_, y) = ArSimulationSpec::unit_circle_order5().generate(3).unwrap();
    let out = inject_artefact(&y, 1, 150, 160, 0.0, 1).unwrap();
    for t in 0..y.len() {
        let want = if (149..160).contains(&t) {
            0.0
        } else {
            y.row(t)[0]
        };
        assert_eq!(out.row(t)[0], want);
    }
    assert!(matches!(
        inject_artefact(&y, 1, 150, 201, 1.0, 1),
        Err(Error::IndexOutOfRange(_))
    ));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = config(Command::Simulate, a.path());
    ca.seed = 42;
    let mut cb = ca.clone();
    cb.out_dir = b.path().to_path_buf();
    run_experiment(&ca).unwrap();
    run_experiment(&cb).unwrap();
    let read = |d: &std::path::Path| std::fs::read(d.join("measurements.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));

    let mut cc = ca.clone();
    cc.seed = 43;
    let c = tempfile::tempdir().unwrap();
    cc.out_dir = c.path().to_path_buf();
    run_experiment(&cc).unwrap();
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn report_regenerates_from_its_echo() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::FitAr, dir.path());
    c.seed = 5;
    c.iterations = Some(30);
    let first = run_experiment(&c).unwrap();
    let saved = RunReport::load(dir.path().join("report.json")).unwrap();
    assert_eq!(
        without_timings(saved.clone()),
        without_timings(first.clone())
    );

    let again = tempfile::tempdir().unwrap();
    let mut echo = saved.config.clone();
    echo.out_dir = again.path().to_path_buf();
    let second = run_experiment(&echo).unwrap();
    let mut a = without_timings(first);
    let mut b = without_timings(second);
    a.config.out_dir.clear();
    b.config.out_dir.clear();
    assert_eq!(a, b);
    for f in ["denoised.csv", "loss_history.csv", "coefficients.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn results_independent_of_thread_count() {
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(Command::ConvergenceStudy, dir.path());
        c.trials = 12;
        c.iterations = Some(20);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let spec = ArSimulationSpec::unit_circle_order5();
        let fit = noisy_ar::linear::FitConfig::new(5).max_iterations(20);
        let trials = pool
            .install(|| noisy_ar::experiment::convergence_study(&spec, &fit, 12))
            .unwrap();
        let report = without_timings(run_experiment(&c).unwrap());
        (trials, report.metrics)
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn fit_nar_reports_both_test_errors() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(Command::FitNar, dir.path());
    let report = run_experiment(&c).unwrap();
    for key in [
        "test_mse_first",
        "test_mse_final",
        "rmse_raw",
        "rmse_denoised",
    ] {
        let v = report.metrics[key];
        assert!(v.is_finite() && v > 0.0, "{key} = {v}");
    }
    assert!(dir.path().join("predictions.csv").exists());
    let loaded = RunReport::load(dir.path().join("report.json")).unwrap();
    assert!(matches!(
        loaded.model,
        Some(noisy_ar::io::FittedModel::Nar(_))
    ));
}

#[test]
fn predict_reuses_a_saved_model() {
    let fit_dir = tempfile::tempdir().unwrap();
    let mut c = config(Command::FitAr, fit_dir.path());
    c.iterations = Some(10);
    run_experiment(&c).unwrap();
    let sim = tempfile::tempdir().unwrap();
    run_experiment(&config(Command::Simulate, sim.path())).unwrap();

    let out = tempfile::tempdir().unwrap();
    let mut p = config(Command::Predict, out.path());
    p.model = Some(fit_dir.path().join("report.json"));
    p.input = Some(sim.path().join("measurements.csv"));
    p.has_header = true;
    let report = run_experiment(&p).unwrap();
    assert!(report.metrics["one_step_mse"].is_finite());
}

#[test]
fn bad_input_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "1\n2\nx\n").unwrap();
    let mut c = config(Command::FitAr, dir.path());
    c.input = Some(input);
    match run_experiment(&c) {
        Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 1)),
        other => panic!("{other:?}"),
    }
    c.input = Some(dir.path().join("missing.csv"));
    assert!(matches!(run_experiment(&c), Err(Error::Io(_))));
}

#[test]
fn schema_version_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(Command::Simulate, dir.path())).unwrap();
    let text = report
        .to_json()
        .unwrap()
        .replace("\"schema_version\": 1", "\"schema_version\": 99");
    assert!(matches!(
        RunReport::from_json(&text),
        Err(Error::InvalidConfig(_))
    ));
}
