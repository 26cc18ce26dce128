//! Question/answer text protocol.

pub mod dataset;
pub mod grammar;
pub mod templates;

pub use dataset::{
    build_dataset, build_pair, detection_ground_truth, lane_ground_truth, planning_target,
    read_records, write_records, QaError, QaMeta, QaPair, QaRecord, StructuredAnswer,
};
pub use grammar::{
    encode_detection_answer, encode_lane_answer, encode_planning_answer, parse_detection_answer,
    parse_lane_answer, parse_planning_answer, parse_planning_answer_any, BinPair, ChainElement,
    ChainError, ChainSpec, DetectionAnswer, LaneAnswer, ParseError, PlanningAnswer,
    PlanningTarget,
};
pub use templates::{build_question, segment_question, QuestionPiece, Task, ViewLayout, QUERY_SLOT};
