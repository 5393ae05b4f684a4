//! CSV formats shared by the pipeline stages.
//!
//! | file | header |
//! |---|---|
//! | tracks | `track_id,t,x,y,label` |
//! | sensors | `participant_id,t,ax,ay,az,gx,gy,gz,wx,wy,wz` |
//! | truth | `track_id,participant_id` |
//! | scores | `step,track_id,sensor_id,p,r` |
//! | decisions | `step,kind,track_id,sensor_id` |
//! | metrics | `metric,value,weighted` |
//! | loss history | `epoch,train_loss,val_loss` |
//!
//! Empty `label` / `participant_id` cells mean null. Numbers are written in
//! their shortest round-trip form.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::CorrespondenceScore;
use crate::matching::{Decision, DecisionRecord};
use crate::metrics::{Metrics, OutcomeCounts};
use crate::scalar::Scalar;
use crate::signals::{SensorRecord, SensorSample, Track, TrackSample};
use crate::training::EpochLoss;

fn num<T: Scalar>(s: &str, context: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::parse(context, format!("`{s}` is not a number")))
}

fn opt(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_owned())
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str], context: &str) -> Result<()> {
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != expected {
        return Err(Error::parse(
            context,
            format!("header `{}`, expected `{}`", header.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

const TRACK_HEADER: [&str; 5] = ["track_id", "t", "x", "y", "label"];
const SENSOR_HEADER: [&str; 11] = ["participant_id", "t", "ax", "ay", "az", "gx", "gy", "gz", "wx", "wy", "wz"];
const TRUTH_HEADER: [&str; 2] = ["track_id", "participant_id"];
const SCORE_HEADER: [&str; 5] = ["step", "track_id", "sensor_id", "p", "r"];

pub fn write_tracks<T: Scalar>(out: impl Write, tracks: &[Track<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACK_HEADER)?;
    for track in tracks {
        let label = track.label.as_deref().unwrap_or("");
        for s in &track.samples {
            w.write_record([&track.track_id, &s.t.to_string(), &s.x.to_string(), &s.y.to_string(), label])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Tracks in order of first appearance; rows of one track must be contiguous
/// in time order.
pub fn read_tracks<T: Scalar>(input: impl Read) -> Result<Vec<Track<T>>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TRACK_HEADER, "tracks")?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Track<T>> = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = format!("tracks row {}", line + 2);
        if rec.len() != 5 {
            return Err(Error::parse(ctx, "expected 5 fields"));
        }
        let id = rec[0].trim().to_owned();
        let sample = TrackSample {
            t: num(&rec[1], &ctx)?,
            x: num(&rec[2], &ctx)?,
            y: num(&rec[3], &ctx)?,
        };
        let label = opt(&rec[4]);
        let track = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Track {
                track_id: id.clone(),
                samples: Vec::new(),
                label: label.clone(),
            }
        });
        if track.label != label {
            return Err(Error::parse(ctx, format!("track {id} changes label")));
        }
        track.samples.push(sample);
    }
    order
        .into_iter()
        .map(|id| {
            let t = by_id.remove(&id).expect("recorded id");
            t.validate()?;
            Ok(t)
        })
        .collect()
}

pub fn write_sensors<T: Scalar>(out: impl Write, records: &[SensorRecord<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SENSOR_HEADER)?;
    for rec in records {
        for s in &rec.samples {
            let mut row = vec![rec.participant_id.clone(), s.t.to_string()];
            row.extend(s.accel.iter().chain(&s.gravity).chain(&s.gyro).map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sensors<T: Scalar>(input: impl Read) -> Result<Vec<SensorRecord<T>>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &SENSOR_HEADER, "sensors")?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Vec<SensorSample<T>>> = BTreeMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = format!("sensors row {}", line + 2);
        if rec.len() != 11 {
            return Err(Error::parse(ctx, "expected 11 fields"));
        }
        let v = (1..11).map(|i| num::<T>(&rec[i], &ctx)).collect::<Result<Vec<T>>>()?;
        let id = rec[0].trim().to_owned();
        by_id
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(SensorSample {
                t: v[0],
                accel: [v[1], v[2], v[3]],
                gravity: [v[4], v[5], v[6]],
                gyro: [v[7], v[8], v[9]],
            });
    }
    order
        .into_iter()
        .map(|id| {
            let samples = by_id.remove(&id).expect("recorded id");
            SensorRecord::new(id, samples)
        })
        .collect()
}

/// Track id to participant id (`None` for non-participants).
pub type TruthTable = BTreeMap<String, Option<String>>;

pub fn write_truth(out: impl Write, truth: &TruthTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_HEADER)?;
    for (track, label) in truth {
        w.write_record([track.as_str(), label.as_deref().unwrap_or("")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth(input: impl Read) -> Result<TruthTable> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &TRUTH_HEADER, "truth")?;
    let mut out = TruthTable::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::parse(format!("truth row {}", line + 2), "expected 2 fields"));
        }
        if out.insert(rec[0].trim().to_owned(), opt(&rec[1])).is_some() {
            return Err(Error::parse(
                format!("truth row {}", line + 2),
                format!("duplicate track {}", &rec[0]),
            ));
        }
    }
    Ok(out)
}

pub fn write_scores<T: Scalar>(out: impl Write, scores: &[CorrespondenceScore<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER)?;
    for s in scores {
        w.write_record([&s.step.to_string(), &*s.track_id, &*s.sensor_id, &s.p.to_string(), &s.r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Scores with `start_t = step / rate`.
pub fn read_scores<T: Scalar>(input: impl Read, rate: T) -> Result<Vec<CorrespondenceScore<T>>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &SCORE_HEADER, "scores")?;
    let mut ids: BTreeMap<String, Arc<str>> = BTreeMap::new();
    let mut intern = |s: &str| ids.entry(s.to_owned()).or_insert_with(|| Arc::from(s)).clone();
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = format!("scores row {}", line + 2);
        if rec.len() != 5 {
            return Err(Error::parse(ctx, "expected 5 fields"));
        }
        let step: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&ctx, format!("`{}` is not a step index", &rec[0])))?;
        out.push(CorrespondenceScore {
            track_id: intern(rec[1].trim()),
            sensor_id: intern(rec[2].trim()),
            step,
            start_t: T::from_i64(step).ok_or_else(|| Error::parse(&ctx, "step out of range"))? / rate,
            p: num(&rec[3], &ctx)?,
            r: num(&rec[4], &ctx)?,
        });
    }
    Ok(out)
}

pub fn write_decisions(out: impl Write, log: &[DecisionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "kind", "track_id", "sensor_id"])?;
    for rec in log {
        let (kind, track, sensor) = match &rec.decision {
            Decision::Positive { track, sensor } => ("positive", &**track, &**sensor),
            Decision::Negative { track, sensor } => ("negative", &**track, &**sensor),
            Decision::Deferred { track } => ("deferred", &**track, ""),
        };
        w.write_record([&rec.step.to_string(), kind, track, sensor])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain and time-weighted metrics plus prediction counts.
pub fn write_metrics<T: Scalar>(out: impl Write, plain: &Metrics<T>, weighted: &Metrics<T>, counts: &OutcomeCounts) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value", "weighted"])?;
    let show = |v: Option<T>| v.map_or_else(|| "undefined".to_owned(), |x| x.to_string());
    for (m, flag) in [(plain, "false"), (weighted, "true")] {
        w.write_record(["pp", &show(m.pp), flag])?;
        w.write_record(["pr", &show(m.pr), flag])?;
        w.write_record(["pf", &show(m.pf), flag])?;
    }
    for (name, v) in [
        ("tracks", counts.tracks),
        ("participant_tracks", counts.participant_tracks),
        ("predicted_participant", counts.predicted_participant),
        ("correct", counts.correct),
        ("null_predictions", counts.null),
        ("undefined_predictions", counts.undefined),
    ] {
        w.write_record([name, &v.to_string(), "false"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_loss_history<T: Scalar>(out: impl Write, history: &[EpochLoss<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "val_loss"])?;
    for e in history {
        let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([&e.epoch.to_string(), &e.train_loss.to_string(), &val])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_history<T: Scalar>(input: impl Read) -> Result<Vec<EpochLoss<T>>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&mut r, &["epoch", "train_loss", "val_loss"], "loss history")?;
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec?;
            let ctx = format!("loss row {}", line + 2);
            Ok(EpochLoss {
                epoch: rec[0].trim().parse().map_err(|_| Error::parse(&ctx, "bad epoch"))?,
                train_loss: num(&rec[1], &ctx)?,
                val_loss: opt(&rec[2]).map(|v| num(&v, &ctx)).transpose()?,
            })
        })
        .collect()
}

/// One cell of a window × negative-ratio grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub window: usize,
    pub rho_neg: f64,
    pub val_loss: Option<f64>,
}

/// Rows per window, one column per negative ratio.
pub fn write_loss_grid(out: impl Write, cells: &[GridCell]) -> Result<()> {
    let mut windows: Vec<usize> = cells.iter().map(|c| c.window).collect();
    windows.sort_unstable();
    windows.dedup();
    let mut rhos: Vec<f64> = cells.iter().map(|c| c.rho_neg).collect();
    rhos.sort_by(f64::total_cmp);
    rhos.dedup();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window".to_owned()];
    header.extend(rhos.iter().map(|r| format!("rho_{r}")));
    w.write_record(&header)?;
    for win in windows {
        let mut row = vec![win.to_string()];
        for rho in &rhos {
            let cell = cells.iter().find(|c| c.window == win && c.rho_neg == *rho);
            row.push(cell.and_then(|c| c.val_loss).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(id: &str, label: Option<&str>) -> Track<f64> {
        Track::new(
            id,
            (0..4)
                .map(|k| TrackSample {
                    t: k as f64 * 0.2,
                    x: 0.1 * k as f64,
                    y: -1.0 / 3.0,
                })
                .collect(),
            label.map(str::to_owned),
        )
        .unwrap()
    }

    #[test]
    fn tracks_round_trip() {
        let tracks = vec![track("b", Some("P1")), track("a", None)];
        let mut buf = Vec::new();
        write_tracks(&mut buf, &tracks).unwrap();
        assert!(buf.starts_with(b"track_id,t,x,y,label\n"));
        assert_eq!(read_tracks::<f64>(&buf[..]).unwrap(), tracks);
    }

    #[test]
    fn sensors_round_trip() {
        let rec = SensorRecord::new(
            "P1",
            (0..3)
                .map(|k| SensorSample {
                    t: k as f64 * 0.02,
                    accel: [0.1, 0.2, 9.9],
                    gravity: [0.0, 0.0, 9.81],
                    gyro: [0.0, 1e-3, -0.5],
                })
                .collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sensors(&mut buf, std::slice::from_ref(&rec)).unwrap();
        assert_eq!(read_sensors::<f64>(&buf[..]).unwrap(), vec![rec]);
    }

    #[test]
    fn truth_and_scores_round_trip() {
        let truth: TruthTable = [("t1".into(), Some("P".into())), ("t2".into(), None)].into();
        let mut buf = Vec::new();
        write_truth(&mut buf, &truth).unwrap();
        assert_eq!(read_truth(&buf[..]).unwrap(), truth);

        let scores = vec![CorrespondenceScore {
            track_id: Arc::from("t1"),
            sensor_id: Arc::from("P"),
            step: 42,
            start_t: 4.2,
            p: 0.25,
            r: 1.0 / 3.0,
        }];
        let mut buf = Vec::new();
        write_scores(&mut buf, &scores).unwrap();
        assert_eq!(read_scores::<f64>(&buf[..], 10.0).unwrap(), scores);
    }

    #[test]
    fn wrong_header_is_a_parse_error() {
        let text = "id,t,x,y,label\na,0,0,0,\n";
        assert!(matches!(read_tracks::<f64>(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn unsorted_track_rows_are_rejected() {
        let text = "track_id,t,x,y,label\na,1,0,0,\na,0,0,0,\n";
        assert!(read_tracks::<f64>(text.as_bytes()).is_err());
    }

    #[test]
    fn grid_has_one_row_per_window() {
        let cells: Vec<GridCell> = [100, 300]
            .iter()
            .flat_map(|&w| {
                [1.0, 4.0].iter().map(move |&r| GridCell {
                    window: w,
                    rho_neg: r,
                    val_loss: Some(w as f64 + r),
                })
            })
            .collect();
        let mut buf = Vec::new();
        write_loss_grid(&mut buf, &cells).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "window,rho_1,rho_4\n100,101,104\n300,301,304\n");
    }
}
