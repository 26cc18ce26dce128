//! Embedded question pools and `<query>` slot handling.

use crate::scene::HighLevelCommand;
use crate::util::mix64;
use serde::{Deserialize, Serialize};

pub const QUERY_SLOT: &str = "<query>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Detection,
    Lane,
    Planning,
    Caption,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Detection, Task::Lane, Task::Planning, Task::Caption];

    pub fn name(self) -> &'static str {
        match self {
            Task::Detection => "detection",
            Task::Lane => "lane",
            Task::Planning => "planning",
            Task::Caption => "caption",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::from_name(s).ok_or_else(|| format!("unknown task {s:?}; expected detection, lane, planning or caption"))
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the camera tokens are presented in perception questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewLayout {
    /// One slot for the fused query set.
    #[default]
    Unified,
    /// One slot per surround camera.
    SixView,
}

const UNIFIED_SENTENCE: &str = "They are uniformly represented as queries embeddings<query>.";
const SIX_VIEW_SENTENCE: &str = "They represent left rear image<query>, left front image<query>, \
direct front image<query>, right front image<query>, right rear image<query>, \
and direct rear image<query>.";

const DETECTION_POOL: [&str; 3] = [
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>. Define the positive y-axis as the forward direction and the positive x-axis as the right direction. Please complete the visual detection task under the Bird's Eye View (BEV) perspective. Ensure that the detection range does not exceed 50 meters.",
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>.  Establish the positive y-axis as the frontward direction and the positive x-axis as the rightward direction. Kindly execute the visual detection task within the Bird's Eye View (BEV) framework. Be mindful not to exceed a detection range of 50 meters.",
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>. Set the forward direction as the positive y-axis and the right direction as the positive x-axis. Please carry out the visual detection task within the Bird's Eye View (BEV) context. Ensure that the detection range remains within 50 meters.",
];

const LANE_POOL: [&str; 3] = [
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>. Please complete the centerline detection task under the Bird's Eye View (BEV) perspective. Ensure that the detection range does not exceed 50 meters.",
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>.   Be mindful not to exceed a detection range of 50 meters.",
    "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>. Could you complete the task of detecting the centerline from the Bird's Eye View (BEV) perspective? Ensure that the detection range remains within 50 meters.",
];

const PLANNING_HEAD: &str = "The six images include objects that are uniformly represented as 3D detection query embeddings<query> and map query embeddings<query>. Define the positive y-axis as the forward direction and the positive x-axis as the right direction.
The speed of the vehicle is defined as [velocity along the x-axis, velocity along the y-axis].
The acceleration of the vehicle is defined as [acceleration along the x-axis, acceleration along the y-axis].";

const PLANNING_REQUESTS: [&str; 3] = [
    "Kindly furnish suitable waypoints for the vehicle's trajectory based on the provided particulars. Waypoints ought to adhere to the [x, y] format, with each waypoint spaced at 0.5-second intervals within a continuous 3.0-second timeframe.",
    "We request your provision of pertinent waypoints for the vehicle's route in accordance with the given information. Waypoints should conform to the format [x, y], with spacing set at 0.5-second intervals over a continuous duration of 3.0 seconds.",
    "Please submit fitting waypoints for the vehicle's course based on the supplied data. Ensure waypoints are structured as [x, y] and spaced at intervals of 0.5 seconds across a continuous 3.0-second period.",
];

const PLANNING_TAIL: &str =
    "For planning tasks, please pay attention to driving safety and avoid vehicle collisions during driving in continous time.";

const CAPTION_PROMPT: &str = "Describe the current traffic conditions. If there are traffic lights in the image, describe the status of all the traffic lights, including any countdowns; if there are none, please do not respond.  If there are traffic signs in the picture, identify and explain each one; if there are none, no explanation is necessary. If there are other vehicles in the picture, describe them in more detail.  Please ensure the answer does not exceed 600 words. Answers must be in English.";

const CAPTION_HEAD: &str = "There are six images captured by the surround view cameras in driving vehicle. They are uniformly represented as queries embeddings<query>.";

pub fn pool_size(task: Task) -> usize {
    match task {
        Task::Detection => DETECTION_POOL.len(),
        Task::Lane => LANE_POOL.len(),
        Task::Planning => PLANNING_REQUESTS.len(),
        Task::Caption => 1,
    }
}

fn pick(task: Task, template_seed: u64) -> usize {
    (mix64(template_seed) % pool_size(task) as u64) as usize
}

pub fn command_sentence(command: HighLevelCommand) -> String {
    format!("The ego car will {} in future.", command.phrase())
}

/// A question from the embedded pool for `task`, chosen deterministically by
/// `template_seed`. Planning questions default to the go-straight command.
pub fn build_question(task: Task, template_seed: u64) -> String {
    build_question_with(task, template_seed, HighLevelCommand::GoStraight, ViewLayout::Unified)
}

pub fn build_question_with(
    task: Task,
    template_seed: u64,
    command: HighLevelCommand,
    layout: ViewLayout,
) -> String {
    question_from_index(task, pick(task, template_seed), command, layout)
}

/// The `index`-th template of the pool, fully instantiated.
pub fn question_from_index(
    task: Task,
    index: usize,
    command: HighLevelCommand,
    layout: ViewLayout,
) -> String {
    let text = match task {
        Task::Detection => DETECTION_POOL[index].to_string(),
        Task::Lane => LANE_POOL[index].to_string(),
        Task::Caption => format!("{CAPTION_HEAD} {CAPTION_PROMPT}"),
        Task::Planning => {
            return format!(
                "{PLANNING_HEAD}\n{}\n{}\n{PLANNING_TAIL}",
                command_sentence(command),
                PLANNING_REQUESTS[index]
            )
        }
    };
    match layout {
        ViewLayout::Unified => text,
        ViewLayout::SixView => text.replacen(UNIFIED_SENTENCE, SIX_VIEW_SENTENCE, 1),
    }
}

/// Every question the pools can produce; used to build a closed vocabulary.
pub fn all_questions() -> Vec<String> {
    let mut out = Vec::new();
    for task in Task::ALL {
        for index in 0..pool_size(task) {
            for command in HighLevelCommand::ALL {
                for layout in [ViewLayout::Unified, ViewLayout::SixView] {
                    out.push(question_from_index(task, index, command, layout));
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

pub fn count_slots(question: &str) -> usize {
    question.matches(QUERY_SLOT).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuestionPiece {
    Text(String),
    Query,
}

/// Split a question into sentence-level text pieces and query slots.
///
/// Sentences end at `.`, `?` or `:` followed by whitespace or end of text;
/// internal runs of whitespace collapse to one space.
pub fn segment_question(question: &str) -> Vec<QuestionPiece> {
    let mut out = Vec::new();
    let mut parts = question.split(QUERY_SLOT).peekable();
    while let Some(part) = parts.next() {
        split_sentences(part, &mut out);
        if parts.peek().is_some() {
            out.push(QuestionPiece::Query);
        }
    }
    out
}

fn split_sentences(text: &str, out: &mut Vec<QuestionPiece>) {
    let chars: Vec<char> = text.chars().collect();
    let mut start = 0;
    for i in 0..chars.len() {
        let terminal = matches!(chars[i], '.' | '?' | ':');
        let boundary = chars.get(i + 1).is_none_or(|c| c.is_whitespace());
        if terminal && boundary {
            push_piece(&chars[start..=i], out);
            start = i + 1;
        }
    }
    push_piece(&chars[start..], out);
}

fn push_piece(chars: &[char], out: &mut Vec<QuestionPiece>) {
    let s: String = chars.iter().collect();
    let norm = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if !norm.is_empty() {
        out.push(QuestionPiece::Text(norm));
    }
}
