//! Scene → QA pair conversion and the QA JSONL format.

use super::grammar::{
    parse_detection_answer, parse_lane_answer, parse_planning_answer, ChainSpec, DetectionAnswer,
    LaneAnswer, PlanningAnswer, PlanningTarget,
};
use super::templates::{build_question_with, Task, ViewLayout};
use crate::bev::BevPoint;
use crate::scene::{ground_truth_plan, Category, Frame, Scene, SceneError, HISTORY_LEN};
use crate::util::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QaError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("frame {frame} of scene {scene_id} cannot be used for planning: {reason}")]
    Unusable {
        scene_id: u64,
        frame: usize,
        reason: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaMeta {
    pub scene_id: u64,
    pub frame: usize,
    pub chain: Option<ChainSpec>,
}

/// One line of the QA JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub task: Task,
    pub question: String,
    pub answer: String,
    pub meta: QaMeta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuredAnswer {
    Planning(PlanningAnswer),
    Detection(DetectionAnswer),
    Lane(LaneAnswer),
    Caption(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub record: QaRecord,
    pub structured: StructuredAnswer,
}

impl QaRecord {
    /// Re-parse the answer text into its structured form.
    pub fn structured(&self) -> Result<StructuredAnswer, super::grammar::ParseError> {
        Ok(match self.task {
            Task::Planning => {
                let chain = self.meta.chain.clone().unwrap_or_default();
                StructuredAnswer::Planning(parse_planning_answer(&self.answer, &chain)?)
            }
            Task::Detection => StructuredAnswer::Detection(parse_detection_answer(&self.answer)?),
            Task::Lane => StructuredAnswer::Lane(parse_lane_answer(&self.answer)?),
            Task::Caption => StructuredAnswer::Caption(self.answer.clone()),
        })
    }
}

fn in_range(p: BevPoint) -> bool {
    p.x.abs() < 50.0 && p.y.abs() < 50.0
}

/// Agents visible from the ego pose at `frame`, nearest first, in the ego frame.
pub fn detection_ground_truth(frame: &Frame) -> Vec<(Category, BevPoint)> {
    let pose = frame.ego.pose();
    let mut objs: Vec<(f64, u32, Category, BevPoint)> = frame
        .agents
        .iter()
        .map(|a| {
            let p = pose.to_local(a.center);
            (p.norm(), a.id, a.category, p)
        })
        .filter(|o| in_range(o.3))
        .collect();
    objs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    objs.into_iter().map(|(_, _, c, p)| (c, p)).collect()
}

/// Lane centerlines fully inside the detection range, in the ego frame.
pub fn lane_ground_truth(frame: &Frame) -> Vec<[BevPoint; 4]> {
    let pose = frame.ego.pose();
    frame
        .lanes
        .iter()
        .map(|l| l.points.map(|p| pose.to_local(p)))
        .filter(|l| l.iter().all(|&p| in_range(p)))
        .collect()
}

pub fn planning_target(scene: &Scene, frame: usize) -> Result<PlanningTarget, SceneError> {
    let waypoints = ground_truth_plan(scene, frame)?;
    let f = &scene.frames[frame];
    let history = &f.ego.history;
    if history.len() < HISTORY_LEN {
        return Err(SceneError::Range {
            t0: frame,
            needed: HISTORY_LEN,
            available: history.len(),
        });
    }
    let pose = f.ego.pose();
    let tail = &history[history.len() - HISTORY_LEN..];
    Ok(PlanningTarget {
        velocity: pose.vector_to_local(f.ego.velocity),
        acceleration: pose.vector_to_local(f.ego.acceleration),
        yaw: f.ego.yaw,
        history: std::array::from_fn(|i| pose.to_local(tail[i])),
        waypoints,
    })
}

fn caption_answer(frame: &Frame) -> String {
    let objs = detection_ground_truth(frame);
    let speed = frame.ego.velocity.norm();
    let mut counts = [0usize; Category::ALL.len()];
    for (c, _) in &objs {
        counts[c.index()] += 1;
    }
    let listed: Vec<String> = Category::ALL
        .iter()
        .filter(|c| counts[c.index()] > 0)
        .map(|c| format!("{} {}", counts[c.index()], c.name().replace('_', " ")))
        .collect();
    let scene = if listed.is_empty() {
        "The road around the ego car is empty.".to_string()
    } else {
        format!("Around the ego car there are: {}.", listed.join(", "))
    };
    format!(
        "The ego car drives at {speed:.1} m/s and will {}. {scene} There are no traffic lights or traffic signs.",
        frame.command.phrase()
    )
}

fn task_key(task: Task) -> u64 {
    Task::ALL.iter().position(|&t| t == task).unwrap() as u64
}

/// Build the QA pair for a single (scene, frame, task).
pub fn build_pair(
    scene: &Scene,
    scene_id: u64,
    frame: usize,
    task: Task,
    chain: &ChainSpec,
    seed: u64,
) -> Result<QaPair, QaError> {
    let f = scene.frames.get(frame).ok_or(SceneError::Range {
        t0: frame,
        needed: 1,
        available: scene.frames.len(),
    })?;
    let template_seed = derive_seed(seed, &[scene_id, frame as u64, task_key(task)]);
    let question = build_question_with(task, template_seed, f.command, ViewLayout::Unified);
    let (structured, answer, chain_meta) = match task {
        Task::Planning => {
            let target = planning_target(scene, frame).map_err(|e| QaError::Unusable {
                scene_id,
                frame,
                reason: e.to_string(),
            })?;
            let a = PlanningAnswer::from_target(&target, chain);
            let text = a.to_text(chain);
            (StructuredAnswer::Planning(a), text, Some(chain.clone()))
        }
        Task::Detection => {
            let a = DetectionAnswer::from_objects(&detection_ground_truth(f));
            let text = a.to_text();
            (StructuredAnswer::Detection(a), text, None)
        }
        Task::Lane => {
            let a = LaneAnswer::from_lanes(&lane_ground_truth(f));
            let text = a.to_text();
            (StructuredAnswer::Lane(a), text, None)
        }
        Task::Caption => {
            let text = caption_answer(f);
            (StructuredAnswer::Caption(text.clone()), text, None)
        }
    };
    Ok(QaPair {
        record: QaRecord {
            task,
            question,
            answer,
            meta: QaMeta {
                scene_id,
                frame,
                chain: chain_meta,
            },
        },
        structured,
    })
}

/// Frames of `scene` that yield a pair for `task`.
pub fn task_frames(scene: &Scene, task: Task) -> std::ops::Range<usize> {
    match task {
        Task::Planning => scene.planning_frames(),
        _ => 0..scene.frames.len(),
    }
}

/// One pair per (scene, usable frame, task), ordered by scene id, frame, then
/// the order of `tasks`. Scene ids are positions in `scenes`.
pub fn build_dataset(
    scenes: &[Scene],
    tasks: &[Task],
    chain: &ChainSpec,
    seed: u64,
) -> Result<Vec<QaPair>, QaError> {
    let per_scene: Vec<Result<Vec<QaPair>, QaError>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            let mut frames: Vec<(usize, Task)> = Vec::new();
            for frame in 0..scene.frames.len() {
                for &task in tasks {
                    if task_frames(scene, task).contains(&frame) {
                        frames.push((frame, task));
                    }
                }
            }
            frames
                .into_iter()
                .map(|(frame, task)| build_pair(scene, i as u64, frame, task, chain, seed))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_scene {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_records<W: Write>(records: &[QaRecord], mut out: W) -> Result<(), QaError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<QaRecord>, QaError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| QaError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
