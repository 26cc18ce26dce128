//! Evaluation: planning L2 and collision rate, detection and lane F1,
//! precision/recall curves, and the aggregate report.

pub mod detection;
pub mod lane;
pub mod planning;
pub mod report;

use thiserror::Error;

pub use detection::{
    detection_f1, f1_from_pr, greedy_match, match_detections, pr_curve, pr_curve_pooled, MatchCounts,
    PrF1, PrPoint, ScoredDetection, DETECTION_THRESHOLDS,
};
pub use lane::{frechet, lane_f1, match_lanes, resample_polyline, LaneF1, LANE_RESAMPLE, LANE_THRESHOLDS};
pub use planning::{
    collision_rate, horizon_collisions, l2_horizons, plan_footprints, waypoint_collisions, EgoFootprint,
    Horizons, L2Convention, HORIZON_WAYPOINTS,
};
pub use report::{
    evaluate, planning_prediction, read_predictions, write_predictions, EvalOptions, F1Row, F1Tables, MetricReport,
    PrCurve, PredictionRecord, SampleCounts, CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("no agent data at frame {0}")]
    MissingFrame(usize),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("prediction for scene {scene_id} frame {frame}: {message}")]
    Sample {
        scene_id: u64,
        frame: usize,
        message: String,
    },
    #[error("no predictions to evaluate")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
