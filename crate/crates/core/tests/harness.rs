use std::fs;
use std::path::Path;

use heavytraffic::exec::Execution;
use heavytraffic::harness::*;
use heavytraffic::stein::FiniteDimTestFunction;

const BASE: &str = r#"
model = "mgi"
T = 1.0
n = [100, 400]
replications = 2000
seed = 7
grid = {from = 0.0, to = 1.0, points = 101}
covariance_grid = [0.5, 1.0]
arrival = {kind = "lebesgue"}
service = {kind = "exp", rate = 1.0}
x = 0.0
eps = [0.05, 0.1]
theta = [0.25, 0.5]
"#;

fn base() -> ExperimentConfig {
    ExperimentConfig::from_toml(BASE).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_reproducible_across_execution_modes() {
    let config = base();
    let tmp = tempfile::tempdir().unwrap();
    for command in [
        Command::Simulate,
        Command::CovarianceCheck,
        Command::RateStudy,
    ] {
        let a = tmp.path().join(format!("{command}-a"));
        let b = tmp.path().join(format!("{command}-b"));
        let c = tmp.path().join(format!("{command}-seq"));
        run(&config, command, &a, Execution::Parallel).unwrap();
        run(&config, command, &b, Execution::Parallel).unwrap();
        run(&config, command, &c, Execution::Sequential).unwrap();
        let fa = csv_files(&a);
        assert!(!fa.is_empty());
        assert_eq!(fa, csv_files(&b), "{command}");
        assert_eq!(fa, csv_files(&c), "{command}");
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], command.name());
        assert_eq!(manifest["seed"], 7);
    }
}

#[test]
fn missing_output_directory_is_created() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("deep/nested/out");
    let summary = run(&base(), Command::Bounds, &out, Execution::Sequential).unwrap();
    assert!(out.join("bounds.csv").exists());
    assert!(out.join("manifest.json").exists());
    assert!(summary.files.iter().any(|f| f.ends_with("bounds.csv")));
}

#[test]
fn constant_queue_has_no_modulus_tail() {
    let mut config = base();
    config.arrival = Some(ArrivalSpec::None);
    config.service = ServiceSpec::Never;
    config.x = 1.0;
    let rows = modulus_tail(&config, Execution::default()).unwrap();
    assert!(rows
        .iter()
        .filter(|r| r.source == "queue")
        .all(|r| r.hits == 0));
}

#[test]
fn gaussian_tail_decreases_in_theta() {
    let mut config = ExperimentConfig::from_toml(BASE).unwrap();
    config.grid = GridSpec::Range(GridRange {
        from: 0.0,
        to: 1.0,
        points: 401,
    });
    config.eps = vec![0.01];
    config.theta = vec![0.05, 0.1, 0.2, 0.3];
    config.n = vec![400];
    let rows = modulus_tail(&config, Execution::default()).unwrap();
    assert!(tail_is_monotone(&rows));
    let z: Vec<_> = rows.iter().filter(|r| r.source == "gaussian").collect();
    assert!(z.windows(2).all(|w| w[1].p <= w[0].p));
    assert!(z[0].p > z[3].p);
    let mut buf = Vec::new();
    write_tail_csv(&rows, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap().lines().count(),
        rows.len() + 1
    );
}

#[test]
fn queue_tail_shrinks_with_eps() {
    let mut config = base();
    config.n = vec![400];
    config.eps = vec![0.05, 0.1, 0.2];
    config.theta = vec![0.3];
    let rows = modulus_tail(&config, Execution::default()).unwrap();
    let q: Vec<_> = rows.iter().filter(|r| r.source == "queue").collect();
    assert!(q.windows(2).all(|w| w[0].hits <= w[1].hits));
    config.eps = vec![0.001];
    assert!(modulus_tail(&config, Execution::default()).is_err());
}

#[test]
fn linear_gap_vanishes_and_square_matches_variance() {
    let config = base();
    let gs = [
        FiniteDimTestFunction::linear(vec![0.5, 1.0], vec![1.0, -2.0]).unwrap(),
        FiniteDimTestFunction::square(vec![1.0], 0).unwrap(),
    ];
    let est = estimate_expectation_gap(&config, &gs, Execution::default()).unwrap();
    assert_eq!(est.len(), 4);
    let k11 = QueueModel::from_config(&config)
        .unwrap()
        .kernel()
        .unwrap()
        .eval(1.0, 1.0);
    for e in &est {
        assert!(!e.significant(4.0), "{e:?}");
        assert!(e.gaussian_consistent(4.0), "{e:?}");
    }
    assert!(est[0].gaussian.value.abs() < 1e-12);
    assert!((est[1].gaussian.value - k11).abs() < 1e-10);
    // M/M/∞ on [0, 1]: K(1,1) = 1 − e^{−1}.
    assert!((k11 - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
}

#[test]
fn initial_customers_alone_have_no_variance_at_zero() {
    let mut config = base();
    config.arrival = Some(ArrivalSpec::None);
    config.x = 1.0;
    config.covariance_grid = Some(GridSpec::Points(vec![0.0]));
    let check = empirical_covariance(&config, 100, Execution::default()).unwrap();
    assert_eq!(check.queue[0].value, 0.0);
    assert!(check.theory[0].abs() < 1e-15);
    assert!(check.pass);
}

#[test]
fn config_errors_are_reported() {
    let bad = [
        BASE.replace("replications = 2000", "replications = 10"),
        BASE.replace("n = [100, 400]", "n = [400, 100]"),
        BASE.replace("points = 101", "points = 101, extra = 1"),
        BASE.replace("model = \"mgi\"", "model = \"gg1\""),
        BASE.replace(
            "covariance_grid = [0.5, 1.0]",
            "covariance_grid = [1.0, 0.5]",
        ),
    ];
    for text in &bad {
        let err = ExperimentConfig::from_toml(text).and_then(|c| c.validate().map(|_| c));
        assert!(err.is_err(), "{text}");
    }
    let round = ExperimentConfig::from_toml(&base().to_toml()).unwrap();
    assert_eq!(round, base());
}
