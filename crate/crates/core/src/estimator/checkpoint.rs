use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Architecture, ConvAttentionNet, Estimator, FeatureLogistic, RunningStats, Trainable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::{FeatureWindow, PreparedSensor, PreparedTrack};

const MAGIC: &str = "# trajsense checkpoint v1";

/// Learned estimator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Logistic,
    Network,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Logistic => "logistic",
            EstimatorKind::Network => "network",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(EstimatorKind::Logistic),
            "network" | "nn" => Ok(EstimatorKind::Network),
            other => Err(Error::invalid(format!("unknown estimator kind `{other}`"))),
        }
    }
}

/// Parameters, frozen statistics and progress of a trained estimator.
///
/// The text form writes every value with its shortest round-trip
/// representation, so save followed by load is bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub kind: EstimatorKind,
    /// For the logistic model only `window` is meaningful.
    pub architecture: Architecture,
    pub stats: RunningStats<T>,
    pub params: Vec<T>,
    /// Completed training epochs.
    pub epoch: usize,
}

/// A restored estimator of either family.
#[derive(Debug, Clone)]
pub enum TrainedModel<T> {
    Logistic(FeatureLogistic<T>),
    Network(ConvAttentionNet<T>),
}

impl<T: Scalar> Estimator<T> for TrainedModel<T> {
    fn window_len(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.window_len(),
            TrainedModel::Network(m) => m.window_len(),
        }
    }

    fn stats(&self) -> &RunningStats<T> {
        match self {
            TrainedModel::Logistic(m) => m.stats(),
            TrainedModel::Network(m) => m.stats(),
        }
    }

    fn probability(&self, window: &FeatureWindow<'_, T>) -> Result<T> {
        match self {
            TrainedModel::Logistic(m) => m.probability(window),
            TrainedModel::Network(m) => m.probability(window),
        }
    }

    fn score_pair(&self, track: &PreparedTrack<T>, sensor: &PreparedSensor<T>, stride: usize) -> Result<Vec<(i64, T)>> {
        match self {
            TrainedModel::Logistic(m) => m.score_pair(track, sensor, stride),
            TrainedModel::Network(m) => m.score_pair(track, sensor, stride),
        }
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn from_logistic(model: &FeatureLogistic<T>, epoch: usize) -> Self {
        Self {
            kind: EstimatorKind::Logistic,
            architecture: Architecture::with_window(model.window_len()),
            stats: model.stats().clone(),
            params: model.params().to_vec(),
            epoch,
        }
    }

    pub fn from_network(model: &ConvAttentionNet<T>, epoch: usize) -> Self {
        Self {
            kind: EstimatorKind::Network,
            architecture: *model.architecture(),
            stats: model.stats().clone(),
            params: model.params().to_vec(),
            epoch,
        }
    }

    pub fn to_logistic(&self) -> Result<FeatureLogistic<T>> {
        self.expect_kind(EstimatorKind::Logistic)?;
        FeatureLogistic::with_weights(self.architecture.window, self.stats.clone(), self.params.clone())
    }

    pub fn to_network(&self) -> Result<ConvAttentionNet<T>> {
        self.expect_kind(EstimatorKind::Network)?;
        ConvAttentionNet::from_params(self.architecture, self.stats.clone(), self.params.clone())
    }

    pub fn to_model(&self) -> Result<TrainedModel<T>> {
        Ok(match self.kind {
            EstimatorKind::Logistic => TrainedModel::Logistic(self.to_logistic()?),
            EstimatorKind::Network => TrainedModel::Network(self.to_network()?),
        })
    }

    fn expect_kind(&self, kind: EstimatorKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::invalid(format!(
                "checkpoint holds a {} model, not {}",
                self.kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let a = &self.architecture;
        let mut out = String::new();
        let join = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "kind {}", self.kind.name()).unwrap();
        writeln!(out, "epoch {}", self.epoch).unwrap();
        writeln!(
            out,
            "arch {} {} {} {} {} {}",
            a.window, a.kernel_short, a.kernel_long, a.maps, a.attention, a.hidden
        )
        .unwrap();
        writeln!(out, "momentum {}", self.stats.momentum()).unwrap();
        writeln!(out, "updates {}", self.stats.updates()).unwrap();
        writeln!(out, "frozen {}", self.stats.is_frozen()).unwrap();
        writeln!(out, "mean {}", join(self.stats.means())).unwrap();
        writeln!(out, "var {}", join(self.stats.vars())).unwrap();
        writeln!(out, "params {}", self.params.len()).unwrap();
        for p in &self.params {
            writeln!(out, "{p}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(Error::parse("checkpoint", "missing header line"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("checkpoint", format!("missing `{name}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(Error::parse("checkpoint", format!("expected `{name}`, found `{line}`")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let kind: EstimatorKind = single(&field("kind")?, "kind")?;
        let epoch: usize = single(&field("epoch")?, "epoch")?;
        let arch: Vec<usize> = values(&field("arch")?, "arch")?;
        if arch.len() != 6 {
            return Err(Error::parse("checkpoint", "arch needs six sizes"));
        }
        let architecture = Architecture {
            window: arch[0],
            kernel_short: arch[1],
            kernel_long: arch[2],
            maps: arch[3],
            attention: arch[4],
            hidden: arch[5],
        };
        let momentum: T = single(&field("momentum")?, "momentum")?;
        let updates: u64 = single(&field("updates")?, "updates")?;
        let frozen: bool = single(&field("frozen")?, "frozen")?;
        let mean = nine(values(&field("mean")?, "mean")?, "mean")?;
        let var = nine(values(&field("var")?, "var")?, "var")?;
        let count: usize = single(&field("params")?, "params")?;
        let params: Vec<T> = lines
            .map(|l| {
                l.trim()
                    .parse::<T>()
                    .map_err(|_| Error::parse("checkpoint", format!("bad parameter `{l}`")))
            })
            .collect::<Result<_>>()?;
        if params.len() != count {
            return Err(Error::Shape {
                expected: count,
                got: params.len(),
            });
        }
        let ckpt = Self {
            kind,
            architecture,
            stats: RunningStats::from_parts(mean, var, momentum, updates, frozen),
            params,
            epoch,
        };
        ckpt.to_model()?;
        Ok(ckpt)
    }
}

fn values<V: FromStr>(parts: &[String], name: &str) -> Result<Vec<V>> {
    parts
        .iter()
        .map(|p| {
            p.parse::<V>()
                .map_err(|_| Error::parse("checkpoint", format!("bad `{name}` value `{p}`")))
        })
        .collect()
}

fn single<V: FromStr>(parts: &[String], name: &str) -> Result<V> {
    let mut v = values::<V>(parts, name)?;
    if v.len() != 1 {
        return Err(Error::parse("checkpoint", format!("`{name}` takes one value")));
    }
    Ok(v.remove(0))
}

fn nine<T: Scalar>(v: Vec<T>, name: &str) -> Result<[T; 9]> {
    v.try_into()
        .map_err(|_| Error::parse("checkpoint", format!("`{name}` needs nine values")))
}

pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, ckpt: &Checkpoint<T>) -> Result<()> {
    std::fs::write(path, ckpt.to_text())?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    Checkpoint::from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> RunningStats<f64> {
        RunningStats::from_moments(
            std::array::from_fn(|i| i as f64 / 7.0),
            std::array::from_fn(|i| 1.0 + i as f64 / 3.0),
        )
    }

    #[test]
    fn network_round_trip_is_bit_exact() {
        let arch = Architecture {
            window: 12,
            kernel_short: 3,
            kernel_long: 5,
            maps: 2,
            attention: 3,
            hidden: 3,
        };
        let net = ConvAttentionNet::new(arch, stats(), 3).unwrap();
        let ckpt = Checkpoint::from_network(&net, 17);
        let back = Checkpoint::<f64>::from_text(&ckpt.to_text()).unwrap();
        assert_eq!(back, ckpt);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.params), bits(net.params()));
        assert_eq!(back.to_network().unwrap(), net);
    }

    #[test]
    fn logistic_round_trip_through_file() {
        let m = FeatureLogistic::with_weights(
            100,
            stats(),
            vec![0.1, -1.0 / 3.0, 2.5e-17, 4.0, 5.0, 6.0, 7.0, -8.5, 9.0, f64::MIN_POSITIVE],
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("trajsense-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.ckpt");
        save_checkpoint(&path, &Checkpoint::from_logistic(&m, 2)).unwrap();
        let back: Checkpoint<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(back.to_logistic().unwrap(), m);
        assert!(back.to_network().is_err());
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn truncated_text_is_rejected() {
        let m = FeatureLogistic::zeros(100, stats());
        let text = Checkpoint::from_logistic(&m, 0).to_text();
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(Checkpoint::<f64>::from_text(&cut).is_err());
        assert!(Checkpoint::<f64>::from_text("garbage").is_err());
    }
}
