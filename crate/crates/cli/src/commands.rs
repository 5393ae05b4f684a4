use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::Args;
use trajsense::config::ExperimentConfig;
use trajsense::estimator::{
    load_checkpoint, save_checkpoint, Architecture, Checkpoint, ConvAttentionNet, Estimator, EstimatorKind, FeatureLogistic,
    OracleEstimator, RunningStats, Trainable,
};
use trajsense::io::{self, GridCell, TruthTable};
use trajsense::matching::MatchConfig;
use trajsense::pipeline::{self, Experiment};
use trajsense::signals::{prepare_dataset, PreparedDataset};
use trajsense::simulator::generate_scenario;
use trajsense::training::{EpochLoss, TrainConfig, TrainReport};
use trajsense::{Error, Result};

use crate::manifest::RunManifest;
use crate::Common;

const TRACKS: &str = "tracks.csv";
const SENSORS: &str = "sensors.csv";
const TRUTH: &str = "truth.csv";
const LOSS: &str = "loss.csv";
const CHECKPOINT: &str = "checkpoint.txt";

/// Window lengths and negative ratios of the grid runner.
pub const GRID_WINDOWS: [usize; 3] = [100, 300, 600];
pub const GRID_RHO_NEG: [f64; 5] = [1.0, 4.0, 16.0, 64.0, 256.0];

/// Config plus whether it names a `[match]` section explicitly.
struct LoadedConfig {
    config: ExperimentConfig,
    explicit_match: bool,
}

fn load_config(common: &Common) -> Result<LoadedConfig> {
    let (mut config, explicit_match) = match &common.config {
        None => (ExperimentConfig::default(), false),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                key: path.display().to_string(),
                message: e.to_string(),
            })?;
            let explicit = text.parse::<toml::Table>().map(|t| t.contains_key("match")).unwrap_or(false);
            (ExperimentConfig::from_toml(&text)?, explicit)
        }
    };
    if let Some(seed) = common.seed {
        config.set_seed(seed);
        config.validate()?;
    }
    Ok(LoadedConfig { config, explicit_match })
}

fn out_dir(common: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&common.out)?;
    Ok(&common.out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn manifest(name: &str, common: &Common, cfg: &ExperimentConfig) -> RunManifest {
    RunManifest::new(name, cfg.seed, common.config.as_deref())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = load_config(&args.common)?.config;
    let out = out_dir(&args.common)?;
    let mut m = manifest("simulate", &args.common, &cfg);
    if let Some(path) = &args.common.config {
        m.input("config", path)?;
    }
    let scene = generate_scenario(&cfg.scenario)?;
    io::write_tracks(create(&m.output("tracks", &out.join(TRACKS)))?, &scene.tracks)?;
    io::write_sensors(create(&m.output("sensors", &out.join(SENSORS)))?, &scene.sensors)?;
    io::write_truth(create(&m.output("truth", &out.join(TRUTH)))?, &scene.truth.labels)?;
    m.param("tracks", scene.tracks.len());
    m.param("sensors", scene.sensors.len());
    m.write(out)
}

fn parse_kind(s: &str) -> std::result::Result<EstimatorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_dataset(m: &mut RunManifest, dir: &Path, cfg: &ExperimentConfig) -> Result<PreparedDataset<f64>> {
    let tracks = io::read_tracks(open(&m.input("tracks", &dir.join(TRACKS))?)?)?;
    let sensors = io::read_sensors(open(&m.input("sensors", &dir.join(SENSORS))?)?)?;
    let ds = prepare_dataset(&tracks, &sensors, &cfg.preprocess)?;
    if !ds.skipped.is_empty() {
        tracing::warn!(count = ds.skipped.len(), "tracks skipped during preparation");
    }
    Ok(ds)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory holding tracks.csv and sensors.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// `logistic` or `nn`.
    #[arg(long, value_parser = parse_kind)]
    pub estimator: Option<EstimatorKind>,
    /// Window length; overrides `train.window`.
    #[arg(long)]
    pub window: Option<usize>,
    /// Negative ratio cap; overrides `train.rho_neg`.
    #[arg(long)]
    pub rho_neg: Option<f64>,
    /// Epoch budget; overrides `train.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Train every window × negative-ratio cell and write loss_grid.csv.
    #[arg(long, conflicts_with = "resume")]
    pub grid: bool,
    /// Continue from a checkpoint; its loss.csv sibling is extended.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

/// A fresh or resumed learned model.
enum Learner {
    Logistic(FeatureLogistic<f64>),
    Network(ConvAttentionNet<f64>),
}

impl Learner {
    fn fresh(kind: EstimatorKind, cfg: &TrainConfig) -> Result<Self> {
        let stats = RunningStats::new(cfg.stats_momentum);
        Ok(match kind {
            EstimatorKind::Logistic => Learner::Logistic(FeatureLogistic::zeros(cfg.window, stats)),
            EstimatorKind::Network => Learner::Network(ConvAttentionNet::new(Architecture::with_window(cfg.window), stats, cfg.seed)?),
        })
    }

    fn resumed(ckpt: &Checkpoint<f64>) -> Result<Self> {
        Ok(match ckpt.kind {
            EstimatorKind::Logistic => Learner::Logistic(ckpt.to_logistic()?),
            EstimatorKind::Network => Learner::Network(ckpt.to_network()?),
        })
    }

    fn fit(&mut self, exp: &Experiment<f64>, cfg: &TrainConfig, done: usize) -> Result<TrainReport<f64>> {
        match self {
            Learner::Logistic(m) => pipeline::fit(m, exp, cfg, done),
            Learner::Network(m) => pipeline::fit(m, exp, cfg, done),
        }
    }

    fn checkpoint(&self, epoch: usize) -> Checkpoint<f64> {
        match self {
            Learner::Logistic(m) => Checkpoint::from_logistic(m, epoch),
            Learner::Network(m) => Checkpoint::from_network(m, epoch),
        }
    }

    fn window(&self) -> usize {
        match self {
            Learner::Logistic(m) => m.window_len(),
            Learner::Network(m) => m.window_len(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Learner::Logistic(m) => m.params().len(),
            Learner::Network(m) => m.params().len(),
        }
    }
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let loaded = load_config(&args.common)?;
    let mut cfg = loaded.config;
    if let Some(w) = args.window {
        cfg.train.window = w;
    }
    if let Some(r) = args.rho_neg {
        cfg.train.rho_neg = r;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let out = out_dir(&args.common)?;
    let mut m = manifest("train", &args.common, &cfg);
    let ds = load_dataset(&mut m, &args.data, &cfg)?;

    if args.grid {
        return train_grid(args, &cfg, &ds, m, out);
    }

    let (mut learner, done, mut history) = match &args.resume {
        None => (
            Learner::fresh(args.estimator.unwrap_or(EstimatorKind::Logistic), &cfg.train)?,
            0,
            Vec::new(),
        ),
        Some(path) => {
            let ckpt = load_checkpoint::<f64>(m.input("resume", path)?)?;
            if let Some(kind) = args.estimator {
                if kind != ckpt.kind {
                    return Err(Error::InvalidInput(format!(
                        "checkpoint holds a {} model, not {}",
                        ckpt.kind.name(),
                        kind.name()
                    )));
                }
            }
            let learner = Learner::resumed(&ckpt)?;
            if args.window.is_some() && learner.window() != cfg.train.window {
                return Err(Error::Shape {
                    expected: learner.window(),
                    got: cfg.train.window,
                });
            }
            cfg.train.window = learner.window();
            let history_path = path.with_file_name(LOSS);
            let history: Vec<EpochLoss<f64>> = if history_path.exists() {
                io::read_loss_history(open(&history_path)?)?
                    .into_iter()
                    .filter(|e| e.epoch <= ckpt.epoch)
                    .collect()
            } else {
                Vec::new()
            };
            (learner, ckpt.epoch, history)
        }
    };

    let exp = pipeline::build_experiment(&ds, &cfg.train)?;
    let report = learner.fit(&exp, &cfg.train, done)?;
    let last_epoch = report.history.last().map_or(done, |e| e.epoch);
    history.extend(report.history.iter().copied());

    save_checkpoint(m.output("checkpoint", &out.join(CHECKPOINT)), &learner.checkpoint(last_epoch))?;
    io::write_loss_history(create(&m.output("loss", &out.join(LOSS)))?, &history)?;
    m.param("estimator", learner_kind(&learner).name());
    m.param("window", cfg.train.window);
    m.param("rho_neg", cfg.train.rho_neg);
    m.param("parameters", learner.param_count());
    m.param("train_pairs", exp.train_pairs.len());
    m.param("validation_pairs", exp.val_pairs.len());
    m.param("best_epoch", report.best_epoch);
    m.param("stopped_early", report.stopped_early);
    m.write(out)
}

fn learner_kind(l: &Learner) -> EstimatorKind {
    match l {
        Learner::Logistic(_) => EstimatorKind::Logistic,
        Learner::Network(_) => EstimatorKind::Network,
    }
}

fn train_grid(args: &TrainArgs, cfg: &ExperimentConfig, ds: &PreparedDataset<f64>, mut m: RunManifest, out: &Path) -> Result<()> {
    let kind = args.estimator.unwrap_or(EstimatorKind::Logistic);
    let grid_dir = out.join("grid");
    std::fs::create_dir_all(&grid_dir)?;
    let mut cells = Vec::new();
    for window in GRID_WINDOWS {
        for rho_neg in GRID_RHO_NEG {
            let tc = TrainConfig {
                window,
                rho_neg,
                ..cfg.train.clone()
            };
            let exp = pipeline::build_experiment(ds, &tc)?;
            let mut learner = Learner::fresh(kind, &tc)?;
            let report = learner.fit(&exp, &tc, 0)?;
            let last = report.history.last().map_or(0, |e| e.epoch);
            let name = format!("w{window}_rho{rho_neg}");
            save_checkpoint(
                m.output(&format!("checkpoint_{name}"), &grid_dir.join(format!("{name}.txt"))),
                &learner.checkpoint(last),
            )?;
            cells.push(GridCell {
                window,
                rho_neg,
                val_loss: report.best_val_loss,
            });
        }
    }
    io::write_loss_grid(create(&m.output("loss_grid", &out.join("loss_grid.csv")))?, &cells)?;
    m.param("estimator", kind.name());
    m.param("cells", cells.len());
    m.write(out)
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory holding tracks.csv and sensors.csv (and truth.csv
    /// for the oracle).
    #[arg(long)]
    pub data: PathBuf,
    /// Trained model; required unless the estimator is `oracle`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// `oracle`, `logistic` or `nn`; defaults to the checkpoint's kind.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Window length; must agree with the checkpoint.
    #[arg(long)]
    pub window: Option<usize>,
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let cfg = load_config(&args.common)?.config;
    let out = out_dir(&args.common)?;
    let mut m = manifest("score", &args.common, &cfg);
    let ds = load_dataset(&mut m, &args.data, &cfg)?;

    let oracle = args.estimator.as_deref() == Some("oracle");
    let model: Box<dyn Estimator<f64>> = if oracle {
        let window = args.window.unwrap_or(cfg.train.window);
        let truth = io::read_truth(open(&m.input("truth", &args.data.join(TRUTH))?)?)?;
        let stats = pipeline::population_stats(&ds, window, cfg.train.stride_train)?;
        Box::new(OracleEstimator::new(pipeline::label_table(&truth), stats, window))
    } else {
        let path = args.checkpoint.as_ref().ok_or_else(|| Error::Config {
            key: "checkpoint".into(),
            message: "learned estimators need --checkpoint".into(),
        })?;
        let ckpt = load_checkpoint::<f64>(m.input("checkpoint", path)?)?;
        if let Some(name) = &args.estimator {
            let kind: EstimatorKind = name.parse().map_err(|_| Error::Config {
                key: "estimator".into(),
                message: format!("unknown estimator `{name}`"),
            })?;
            if kind != ckpt.kind {
                return Err(Error::InvalidInput(format!(
                    "checkpoint holds a {} model, not {}",
                    ckpt.kind.name(),
                    kind.name()
                )));
            }
        }
        let model = ckpt.to_model()?;
        if let Some(w) = args.window {
            if w != model.window_len() {
                return Err(Error::Shape {
                    expected: model.window_len(),
                    got: w,
                });
            }
        }
        Box::new(model)
    };

    let scores = pipeline::score_dataset(&ds, model.as_ref(), 1)?;
    io::write_scores(create(&m.output("scores", &out.join("scores.csv")))?, &scores)?;
    m.param("estimator", args.estimator.as_deref().unwrap_or("checkpoint"));
    m.param("window", model.window_len());
    m.param("rows", scores.len());
    m.write(out)
}

#[derive(Args, Debug)]
pub struct MatchEvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Scores CSV from the score stage.
    #[arg(long)]
    pub scores: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Tracks CSV for duration weights; defaults to tracks.csv beside the
    /// truth file.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// Window length the scores were computed with; selects default
    /// thresholds. Read from the score manifest when omitted.
    #[arg(long)]
    pub window: Option<usize>,
    /// Reliability threshold; scores with r above it are counted.
    #[arg(long)]
    pub r_csdr: Option<f64>,
    /// Acceptance threshold; pairs below 1 - p_acpt are rejected.
    #[arg(long)]
    pub p_acpt: Option<f64>,
    /// Counted scores required before a pair is judged.
    #[arg(long)]
    pub n_min: Option<usize>,
}

fn window_from_manifest(scores: &Path) -> Option<usize> {
    let path = scores.with_file_name("score.manifest.toml");
    let table: toml::Table = std::fs::read_to_string(path).ok()?.parse().ok()?;
    table.get("parameters")?.get("window")?.as_str()?.parse().ok()
}

/// Flags, then an explicit `[match]` section, then the per-window defaults.
fn match_config(args: &MatchEvalArgs, loaded: &LoadedConfig) -> Result<(MatchConfig, Option<usize>)> {
    let window = args.window.or_else(|| window_from_manifest(&args.scores));
    let base = if loaded.explicit_match {
        loaded.config.matching
    } else {
        window
            .and_then(MatchConfig::for_window)
            .map(|c| MatchConfig {
                n_min: loaded.config.matching.n_min,
                ..c
            })
            .unwrap_or(loaded.config.matching)
    };
    let cfg = MatchConfig {
        r_csdr: args.r_csdr.unwrap_or(base.r_csdr),
        p_acpt: args.p_acpt.unwrap_or(base.p_acpt),
        n_min: args.n_min.unwrap_or(base.n_min),
    };
    cfg.validate()?;
    Ok((cfg, window))
}

pub fn match_eval(args: &MatchEvalArgs) -> Result<()> {
    let loaded = load_config(&args.common)?;
    let (mc, window) = match_config(args, &loaded)?;
    let out = out_dir(&args.common)?;
    let mut m = manifest("match-eval", &args.common, &loaded.config);

    let scores_path = m.input("scores", &args.scores)?;
    let scores = if std::fs::metadata(&scores_path)?.len() == 0 {
        Vec::new()
    } else {
        io::read_scores(open(&scores_path)?, loaded.config.preprocess.rate)?
    };
    let truth: TruthTable = io::read_truth(open(&m.input("truth", &args.truth)?)?)?;
    let tracks_path = args.tracks.clone().unwrap_or_else(|| args.truth.with_file_name(TRACKS));
    let tracks = io::read_tracks::<f64>(open(&m.input("tracks", &tracks_path)?)?)?;

    let outcome = pipeline::match_scores(&scores, &truth, mc)?;
    let mut participants: BTreeSet<String> = truth.values().flatten().cloned().collect();
    participants.extend(scores.iter().map(|s| s.sensor_id.to_string()));
    let eval = pipeline::evaluate(&outcome, &truth, &tracks, &participants)?;

    io::write_decisions(create(&m.output("decisions", &out.join("decisions.csv")))?, &outcome.log)?;
    io::write_metrics(
        create(&m.output("metrics", &out.join("metrics.csv")))?,
        &eval.plain,
        &eval.weighted,
        &eval.counts,
    )?;
    {
        use std::io::Write;
        let mut w = create(&m.output("assignments", &out.join("assignments.csv")))?;
        writeln!(w, "track_id,assignment")?;
        for (track, a) in &eval.assignments {
            writeln!(w, "{track},{a}")?;
        }
        w.flush()?;
    }
    if let Some(w) = window {
        m.param("window", w);
    }
    m.param("r_csdr", mc.r_csdr);
    m.param("p_acpt", mc.p_acpt);
    m.param("n_min", mc.n_min);
    m.param("ignored_scores", outcome.state.ignored());
    m.write(out)
}
