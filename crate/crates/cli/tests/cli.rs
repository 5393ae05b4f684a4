use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use trajsense::io::{read_scores, read_sensors, read_tracks, read_truth};
use trajsense::signals::{prepare_dataset, PreprocessConfig};

const SCENE: &str = r#"
seed = 4
[scenario]
duration = 150.0
participants = 3
non_participants = 1
arena = [12.0, 8.0]
min_track_duration = 70.0
fragmentation_rate = 0.0
[train]
epochs = 2
batch_size = 64
learning_rate = 0.05
stride_train = 20
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajsense"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
    config: PathBuf,
    data: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("scene.toml");
    fs::write(&config, SCENE).unwrap();
    let data = root.join("data");
    ok(&["simulate", "--config", p(&config), "--out", p(&data)]);
    Fixture {
        _dir: dir,
        root,
        config,
        data,
    }
}

fn metric(metrics: &str, name: &str, weighted: bool) -> String {
    let flag = if weighted { "true" } else { "false" };
    metrics
        .lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == name && f[2] == flag)
        .map(|f| f[1].to_owned())
        .unwrap_or_else(|| panic!("metric {name} missing"))
}

#[test]
fn simulate_writes_dataset_deterministically() {
    let f = fixture();
    for name in ["tracks.csv", "sensors.csv", "truth.csv", "simulate.manifest.toml"] {
        assert!(f.data.join(name).exists(), "{name}");
    }
    let again = f.root.join("again");
    ok(&["simulate", "--config", p(&f.config), "--out", p(&again)]);
    for name in ["tracks.csv", "sensors.csv", "truth.csv"] {
        assert_eq!(fs::read(f.data.join(name)).unwrap(), fs::read(again.join(name)).unwrap(), "{name}");
    }
    let other = f.root.join("other");
    ok(&["simulate", "--config", p(&f.config), "--seed", "5", "--out", p(&other)]);
    assert_ne!(
        fs::read(f.data.join("sensors.csv")).unwrap(),
        fs::read(other.join("sensors.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = run(&["simulate", "--config", p(&missing), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[scenario]\nparticipants = 3\nwalk_sped = 1.0\n").unwrap();
    let out = run(&["simulate", "--config", p(&bad), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("walk_sped"));

    let out = run(&["simulate", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_scores_cover_every_window_and_match_perfectly() {
    let f = fixture();
    let scored = f.root.join("scored");
    ok(&[
        "score",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--estimator",
        "oracle",
        "--window",
        "300",
        "--out",
        p(&scored),
    ]);
    let scores = read_scores::<f64>(fs::File::open(scored.join("scores.csv")).unwrap(), 10.0).unwrap();
    let truth = read_truth(fs::File::open(f.data.join("truth.csv")).unwrap()).unwrap();

    // independent count: overlap − W + 1 per pair
    let tracks = read_tracks::<f64>(fs::File::open(f.data.join("tracks.csv")).unwrap()).unwrap();
    let sensors = read_sensors::<f64>(fs::File::open(f.data.join("sensors.csv")).unwrap()).unwrap();
    let ds = prepare_dataset(&tracks, &sensors, &PreprocessConfig::default()).unwrap();
    let mut expected = 0i64;
    for t in &ds.tracks {
        for s in &ds.sensors {
            let lo = t.start_step.max(s.start_step);
            let hi = (t.start_step + t.len() as i64).min(s.start_step + s.len() as i64);
            expected += (hi - lo - 300 + 1).max(0);
        }
    }
    assert_eq!(scores.len() as i64, expected);
    assert!(expected > 0);
    for s in &scores {
        let same = truth[&*s.track_id].as_deref() == Some(&*s.sensor_id);
        assert_eq!(s.p, if same { 1.0 } else { 0.0 });
    }

    let eval = f.root.join("eval");
    ok(&[
        "match-eval",
        "--scores",
        p(&scored.join("scores.csv")),
        "--truth",
        p(&f.data.join("truth.csv")),
        "--out",
        p(&eval),
    ]);
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(metric(&metrics, "pf", false), "1");
    assert_eq!(metric(&metrics, "pp", false), "1");
    let manifest = fs::read_to_string(eval.join("match-eval.manifest.toml")).unwrap();
    assert!(manifest.contains("window = \"300\""), "{manifest}");

    let again = f.root.join("scored2");
    ok(&[
        "score",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--estimator",
        "oracle",
        "--window",
        "300",
        "--out",
        p(&again),
    ]);
    assert_eq!(
        fs::read(scored.join("scores.csv")).unwrap(),
        fs::read(again.join("scores.csv")).unwrap()
    );
}

#[test]
fn window_600_selects_strict_acceptance_by_default() {
    let f = fixture();
    let scored = f.root.join("scored");
    ok(&[
        "score",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--estimator",
        "oracle",
        "--window",
        "600",
        "--out",
        p(&scored),
    ]);
    let eval = f.root.join("eval");
    ok(&[
        "match-eval",
        "--scores",
        p(&scored.join("scores.csv")),
        "--truth",
        p(&f.data.join("truth.csv")),
        "--out",
        p(&eval),
    ]);
    let manifest = fs::read_to_string(eval.join("match-eval.manifest.toml")).unwrap();
    assert!(manifest.contains("p_acpt = \"0.9\""), "{manifest}");
    assert!(manifest.contains("r_csdr = \"0.1\""), "{manifest}");

    let eval = f.root.join("eval100");
    ok(&[
        "match-eval",
        "--scores",
        p(&scored.join("scores.csv")),
        "--truth",
        p(&f.data.join("truth.csv")),
        "--window",
        "100",
        "--out",
        p(&eval),
    ]);
    let manifest = fs::read_to_string(eval.join("match-eval.manifest.toml")).unwrap();
    assert!(manifest.contains("r_csdr = \"0.3\""), "{manifest}");
}

#[test]
fn empty_scores_leave_every_track_undefined() {
    let f = fixture();
    let empty = f.root.join("empty.csv");
    fs::write(&empty, "").unwrap();
    let eval = f.root.join("eval");
    ok(&[
        "match-eval",
        "--scores",
        p(&empty),
        "--truth",
        p(&f.data.join("truth.csv")),
        "--window",
        "300",
        "--out",
        p(&eval),
    ]);
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(metric(&metrics, "pr", false), "0");
    let assignments = fs::read_to_string(eval.join("assignments.csv")).unwrap();
    assert!(assignments.lines().skip(1).all(|l| l.ends_with(",undefined")));
}

#[test]
fn scores_for_unknown_tracks_are_a_data_error() {
    let f = fixture();
    let scores = f.root.join("scores.csv");
    fs::write(&scores, "step,track_id,sensor_id,p,r\n0,ghost,P00,0.9,0.9\n").unwrap();
    let out = run(&[
        "match-eval",
        "--scores",
        p(&scores),
        "--truth",
        p(&f.data.join("truth.csv")),
        "--out",
        p(&f.root),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["train", "--data", p(&dir.path().join("nothing")), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_resume_and_score_round_trip() {
    let f = fixture();
    let model = f.root.join("model");
    ok(&[
        "train",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--window",
        "100",
        "--out",
        p(&model),
    ]);
    let ckpt = model.join("checkpoint.txt");
    assert!(ckpt.exists());
    let first = fs::read_to_string(model.join("loss.csv")).unwrap();
    assert_eq!(first.lines().count(), 3);

    // the epoch budget is a total, so resuming after 2 runs epochs 3 and 4
    ok(&[
        "train",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--resume",
        p(&ckpt),
        "--epochs",
        "4",
        "--out",
        p(&model),
    ]);
    let history = fs::read_to_string(model.join("loss.csv")).unwrap();
    let epochs: Vec<usize> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(epochs, vec![1, 2, 3, 4]);

    let out = run(&[
        "train",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--resume",
        p(&ckpt),
        "--estimator",
        "nn",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let scored = f.root.join("scored");
    ok(&[
        "score",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&scored),
    ]);
    let rows = fs::read_to_string(scored.join("scores.csv")).unwrap();
    assert!(rows.lines().count() > 1);

    let out = run(&[
        "score",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--checkpoint",
        p(&ckpt),
        "--window",
        "300",
        "--out",
        p(&scored),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn grid_mode_emits_fifteen_cells() {
    let f = fixture();
    let grid = f.root.join("grid");
    ok(&[
        "train",
        "--config",
        p(&f.config),
        "--data",
        p(&f.data),
        "--grid",
        "--epochs",
        "1",
        "--out",
        p(&grid),
    ]);
    let table = fs::read_to_string(grid.join("loss_grid.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["window", "rho_1", "rho_4", "rho_16", "rho_64", "rho_256"]);
    assert_eq!(rows.len(), 4);
    for (row, w) in rows[1..].iter().zip(["100", "300", "600"]) {
        assert_eq!(row[0], w);
        assert_eq!(row.len(), 6);
        // empty marks a cell whose validation split holds no full window
        assert!(row[1..].iter().all(|v| v.is_empty() || v.parse::<f64>().is_ok()), "{row:?}");
    }
    assert!(rows[1][1..].iter().all(|v| v.parse::<f64>().is_ok()), "{:?}", rows[1]);
    assert_eq!(fs::read_dir(grid.join("grid")).unwrap().count(), 15);
}
