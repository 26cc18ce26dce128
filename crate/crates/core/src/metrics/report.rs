//! Prediction records and the aggregate metric report.

use super::detection::{match_detections, pr_curve_pooled, DetectionSample, MatchCounts, PrF1, PrPoint, ScoredDetection, DETECTION_THRESHOLDS};
use super::lane::{match_lanes, LaneF1, LANE_THRESHOLDS};
use super::planning::{horizon_collisions, l2_horizons, waypoint_collisions, EgoFootprint, Horizons, L2Convention};
use super::MetricError;
use crate::bev::BevPoint;
use crate::qa::{
    detection_ground_truth, lane_ground_truth, parse_detection_answer, parse_lane_answer, parse_planning_answer,
    parse_planning_answer_any, planning_target, ChainSpec, DetectionAnswer, LaneAnswer, PlanningAnswer, Task,
};
use crate::scene::{Category, Scene, PLAN_LEN};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// One model output. Either `answer_text` in the answer grammar or one of the
/// pre-structured fields must be present for the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scene_id: u64,
    pub frame: usize,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<BevPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<ScoredDetection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lanes: Option<Vec<Vec<BevPoint>>>,
}

impl PredictionRecord {
    pub fn from_text(scene_id: u64, frame: usize, task: Task, answer_text: String, chain: Option<ChainSpec>) -> Self {
        PredictionRecord {
            scene_id,
            frame,
            task,
            answer_text: Some(answer_text),
            chain,
            waypoints: None,
            detections: None,
            lanes: None,
        }
    }
}

pub fn write_predictions<W: Write>(records: &[PredictionRecord], mut out: W) -> Result<(), MetricError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<PredictionRecord>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| MetricError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub method: String,
    pub l2_convention: L2Convention,
    pub footprint: EgoFootprint,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            method: "atlasbench".into(),
            l2_convention: L2Convention::Stp3,
            footprint: EgoFootprint::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Row {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub predictions: usize,
    pub ground_truth: usize,
}

impl F1Row {
    fn new(threshold: f64, c: MatchCounts) -> Self {
        let s = c.scores();
        F1Row {
            threshold,
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            tp: c.tp,
            predictions: c.predictions,
            ground_truth: c.ground_truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct F1Tables {
    pub detection: Vec<F1Row>,
    pub lane: Vec<F1Row>,
    pub lane_mean: Option<PrF1>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub threshold: f64,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleCounts {
    pub planning: usize,
    pub detection: usize,
    pub lane: usize,
    pub caption: usize,
    /// Answers that failed to parse; planning ones are scored as zero waypoints.
    pub malformed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub l2_convention: L2Convention,
    pub ego_footprint: EgoFootprint,
    pub samples: SampleCounts,
    pub l2: Option<Horizons>,
    pub collision: Option<Horizons>,
    pub f1_tables: F1Tables,
    pub pr_curves: Vec<PrCurve>,
}

pub const CSV_HEADER: &str = "method,l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg";

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn csv_row(&self) -> String {
        let cells = |h: &Option<Horizons>, digits: usize| match h {
            Some(h) => [h.h1, h.h2, h.h3, h.avg].map(|v| format!("{v:.digits$}")).join(","),
            None => ",,,".to_string(),
        };
        format!("{},{},{}", self.method, cells(&self.l2, 2), cells(&self.collision, 2))
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }
}

enum Scored {
    Planning { l2: Horizons, collided: [bool; 3], malformed: bool },
    Detection { sample: DetectionSample, malformed: bool },
    Lane { counts: [MatchCounts; 3], malformed: bool },
    Caption,
}

fn sample_err(p: &PredictionRecord, message: impl ToString) -> MetricError {
    MetricError::Sample {
        scene_id: p.scene_id,
        frame: p.frame,
        message: message.to_string(),
    }
}

fn missing(p: &PredictionRecord, what: &str) -> MetricError {
    sample_err(p, format!("{} prediction has neither answer_text nor {what}", p.task.name()))
}

/// Waypoints of a planning prediction and whether its text was malformed
/// (in which case the plan is six points at the origin).
pub fn planning_prediction(p: &PredictionRecord) -> Result<(Vec<BevPoint>, bool), MetricError> {
    match (&p.waypoints, &p.answer_text) {
        (Some(w), _) => {
            if w.len() != PLAN_LEN {
                return Err(sample_err(p, format!("expected {PLAN_LEN} waypoints, got {}", w.len())));
            }
            Ok((w.clone(), false))
        }
        (None, Some(text)) => {
            let parsed = match &p.chain {
                Some(c) => parse_planning_answer(text, c),
                None => parse_planning_answer_any(text).map(|(_, a)| a),
            };
            Ok(match parsed {
                Ok(a) => (a.waypoints_m().to_vec(), false),
                Err(_) => (vec![BevPoint::ORIGIN; PLAN_LEN], true),
            })
        }
        (None, None) => Err(missing(p, "waypoints")),
    }
}

fn score(p: &PredictionRecord, scene: &Scene, opts: &EvalOptions) -> Result<Scored, MetricError> {
    let frame = scene
        .frames
        .get(p.frame)
        .ok_or_else(|| sample_err(p, format!("frame outside scene of {} frames", scene.frames.len())))?;
    match p.task {
        Task::Planning => {
            let (pred, malformed) = planning_prediction(p)?;
            let target = planning_target(scene, p.frame).map_err(|e| sample_err(p, e))?;
            let gt = PlanningAnswer::from_target(&target, &ChainSpec::vap()).waypoints_m();
            let l2 = l2_horizons(&pred, &gt, opts.l2_convention)?;
            let flags = waypoint_collisions(&pred, scene, p.frame, &opts.footprint).map_err(|e| sample_err(p, e))?;
            Ok(Scored::Planning {
                l2,
                collided: horizon_collisions(&flags),
                malformed,
            })
        }
        Task::Detection => {
            let (preds, malformed) = match (&p.detections, &p.answer_text) {
                (Some(d), _) => (d.clone(), false),
                (None, Some(text)) => match parse_detection_answer(text) {
                    Ok(a) => (
                        a.objects_m().into_iter().map(|(c, x)| ScoredDetection::new(c, x, None)).collect(),
                        false,
                    ),
                    Err(_) => (Vec::new(), true),
                },
                (None, None) => return Err(missing(p, "detections")),
            };
            let gts: Vec<(Category, BevPoint)> = DetectionAnswer::from_objects(&detection_ground_truth(frame)).objects_m();
            Ok(Scored::Detection {
                sample: (preds, gts),
                malformed,
            })
        }
        Task::Lane => {
            let (preds, malformed) = match (&p.lanes, &p.answer_text) {
                (Some(l), _) => {
                    if l.iter().any(|x| x.is_empty()) {
                        return Err(sample_err(p, "empty lane polyline"));
                    }
                    (l.clone(), false)
                }
                (None, Some(text)) => match parse_lane_answer(text) {
                    Ok(a) => (a.lanes_m().into_iter().map(|l| l.to_vec()).collect(), false),
                    Err(_) => (Vec::new(), true),
                },
                (None, None) => return Err(missing(p, "lanes")),
            };
            let gts: Vec<Vec<BevPoint>> = LaneAnswer::from_lanes(&lane_ground_truth(frame))
                .lanes_m()
                .into_iter()
                .map(|l| l.to_vec())
                .collect();
            Ok(Scored::Lane {
                counts: match_lanes(&preds, &gts),
                malformed,
            })
        }
        Task::Caption => Ok(Scored::Caption),
    }
}

/// Score predictions against the scenes they index (by position). Ground
/// truth is taken at the answer grammar's resolution, so a prediction equal
/// to the encoded target scores exactly zero error.
pub fn evaluate(preds: &[PredictionRecord], scenes: &[Scene], opts: &EvalOptions) -> Result<MetricReport, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut order: Vec<&PredictionRecord> = preds.iter().collect();
    order.sort_by_key(|p| (p.scene_id, p.frame, p.task));
    let scored: Vec<Scored> = order
        .par_iter()
        .map(|p| {
            let scene = scenes
                .get(p.scene_id as usize)
                .ok_or_else(|| sample_err(p, format!("unknown scene (have {})", scenes.len())))?;
            score(p, scene, opts)
        })
        .collect::<Result<_, _>>()?;

    let mut counts = SampleCounts::default();
    let mut l2s = Vec::new();
    let mut hits = [0usize; 3];
    let mut det_samples: Vec<DetectionSample> = Vec::new();
    let mut lane_counts = [MatchCounts::default(); 3];
    for s in scored {
        match s {
            Scored::Planning { l2, collided, malformed } => {
                counts.planning += 1;
                counts.malformed += malformed as usize;
                l2s.push(l2);
                for (h, c) in hits.iter_mut().zip(collided) {
                    *h += c as usize;
                }
            }
            Scored::Detection { sample, malformed } => {
                counts.detection += 1;
                counts.malformed += malformed as usize;
                det_samples.push(sample);
            }
            Scored::Lane { counts: c, malformed } => {
                counts.lane += 1;
                counts.malformed += malformed as usize;
                for (acc, x) in lane_counts.iter_mut().zip(c) {
                    acc.add(x);
                }
            }
            Scored::Caption => counts.caption += 1,
        }
    }

    let (l2, collision) = if counts.planning > 0 {
        let n = counts.planning as f64;
        (
            Some(Horizons::mean(&l2s)),
            Some(Horizons::from_values(hits.map(|h| 100.0 * h as f64 / n))),
        )
    } else {
        (None, None)
    };

    let mut tables = F1Tables::default();
    let mut pr_curves = Vec::new();
    if counts.detection > 0 {
        for t in DETECTION_THRESHOLDS {
            let mut c = MatchCounts::default();
            for (preds, gts) in &det_samples {
                let plain: Vec<(Category, BevPoint)> = preds.iter().map(|d| (d.category, d.center)).collect();
                c.add(match_detections(&plain, gts, t));
            }
            tables.detection.push(F1Row::new(t, c));
            pr_curves.push(PrCurve {
                threshold: t,
                points: pr_curve_pooled(&det_samples, t)?,
            });
        }
    }
    if counts.lane > 0 {
        tables.lane = LANE_THRESHOLDS
            .iter()
            .zip(lane_counts)
            .map(|(&t, c)| F1Row::new(t, c))
            .collect();
        tables.lane_mean = Some(LaneF1::from_counts(&lane_counts).mean);
    }

    Ok(MetricReport {
        method: opts.method.clone(),
        l2_convention: opts.l2_convention,
        ego_footprint: opts.footprint,
        samples: counts,
        l2,
        collision,
        f1_tables: tables,
        pr_curves,
    })
}
