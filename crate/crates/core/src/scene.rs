//! Deterministic synthetic driving scenes.
//!
//! A scene is a short clip sampled at 2 Hz. The ego vehicle follows a road of
//! constant curvature (the curvature sign matches the high-level command) with
//! constant longitudinal acceleration. Other agents are either parked roadside
//! objects or move with constant velocity / constant turn rate. Every
//! generated scene keeps its geometry inside `[-50, 50]` m and keeps agents
//! clear of the ego footprint so ground-truth plans are collision free.

use crate::bev::{wrap_angle, BevPoint};
use crate::geom::{rect_intersects, OrientedRect, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Seconds between consecutive frames.
pub const FRAME_DT: f64 = 0.5;
/// Past ego waypoints carried in [`EgoState::history`].
pub const HISTORY_LEN: usize = 3;
/// Future waypoints in a plan (3 s at 0.5 s spacing).
pub const PLAN_LEN: usize = 6;
/// Frames a scene needs so that at least one frame has full history and future.
pub const MIN_FRAMES: usize = HISTORY_LEN + 1 + PLAN_LEN;

/// Default ego footprint (length, width) in meters.
pub const EGO_LENGTH: f64 = 4.084;
pub const EGO_WIDTH: f64 = 1.85;

const WORLD_LIMIT: f64 = 49.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error("frame {t0} needs {needed} future frames, scene has {available}")]
    Range {
        t0: usize,
        needed: usize,
        available: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Car,
    Truck,
    Bus,
    Trailer,
    ConstructionVehicle,
    Pedestrian,
    Motorcycle,
    Bicycle,
    TrafficCone,
    Barrier,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Car,
        Category::Truck,
        Category::Bus,
        Category::Trailer,
        Category::ConstructionVehicle,
        Category::Pedestrian,
        Category::Motorcycle,
        Category::Bicycle,
        Category::TrafficCone,
        Category::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Car => "car",
            Category::Truck => "truck",
            Category::Bus => "bus",
            Category::Trailer => "trailer",
            Category::ConstructionVehicle => "construction_vehicle",
            Category::Pedestrian => "pedestrian",
            Category::Motorcycle => "motorcycle",
            Category::Bicycle => "bicycle",
            Category::TrafficCone => "traffic_cone",
            Category::Barrier => "barrier",
        }
    }

    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn index(self) -> usize {
        Category::ALL.iter().position(|&c| c == self).unwrap()
    }

    /// Nominal (length, width) in meters.
    fn nominal_size(self) -> (f64, f64) {
        match self {
            Category::Car => (4.6, 1.9),
            Category::Truck => (6.8, 2.5),
            Category::Bus => (11.0, 2.9),
            Category::Trailer => (9.0, 2.7),
            Category::ConstructionVehicle => (6.2, 2.7),
            Category::Pedestrian => (0.7, 0.7),
            Category::Motorcycle => (2.1, 0.8),
            Category::Bicycle => (1.7, 0.6),
            Category::TrafficCone => (0.4, 0.4),
            Category::Barrier => (2.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighLevelCommand {
    GoStraight,
    TurnLeft,
    TurnRight,
}

impl HighLevelCommand {
    pub const ALL: [HighLevelCommand; 3] = [
        HighLevelCommand::GoStraight,
        HighLevelCommand::TurnLeft,
        HighLevelCommand::TurnRight,
    ];

    /// Phrase used in planning questions, e.g. "turn left".
    pub fn phrase(self) -> &'static str {
        match self {
            HighLevelCommand::GoStraight => "go straight",
            HighLevelCommand::TurnLeft => "turn left",
            HighLevelCommand::TurnRight => "turn right",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            HighLevelCommand::GoStraight => HighLevelCommand::GoStraight,
            HighLevelCommand::TurnLeft => HighLevelCommand::TurnRight,
            HighLevelCommand::TurnRight => HighLevelCommand::TurnLeft,
        }
    }
}

/// Ego vehicle state in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    #[serde(rename = "pos")]
    pub position: BevPoint,
    #[serde(rename = "vel")]
    pub velocity: BevPoint,
    #[serde(rename = "acc")]
    pub acceleration: BevPoint,
    pub yaw: f64,
    /// Past positions at 0.5 s spacing, oldest first.
    pub history: Vec<BevPoint>,
}

impl EgoState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBox {
    pub center: BevPoint,
    #[serde(rename = "len")]
    pub length: f64,
    #[serde(rename = "wid")]
    pub width: f64,
    pub heading: f64,
    #[serde(rename = "cat")]
    pub category: Category,
    pub id: u32,
}

impl AgentBox {
    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(self.center, self.length, self.width, self.heading)
    }
}

/// Four consecutive centerline points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneCenterline {
    pub points: [BevPoint; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub ego: EgoState,
    pub agents: Vec<AgentBox>,
    pub lanes: Vec<LaneCenterline>,
    pub command: HighLevelCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub frames: Vec<Frame>,
}

/// Knobs for [`generate_scene`]. Counts are signed so that a negative value in
/// a config file is reported as a config error rather than a parse failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub frames: i64,
    pub static_agents: [i64; 2],
    pub moving_agents: [i64; 2],
    /// Ego initial speed range, m/s.
    pub ego_speed: [f64; 2],
    /// Ego longitudinal acceleration range, m/s².
    pub ego_accel: [f64; 2],
    /// Road curvature magnitude range for turning scenes, 1/m.
    pub curvature: [f64; 2],
    /// Probability that a go-straight scene has a stationary ego.
    pub stationary_prob: f64,
    pub agent_speed: [f64; 2],
    /// Clearance kept between agents and the ego footprint, m.
    pub clearance: f64,
    /// Force every scene to this command instead of sampling one.
    pub command: Option<HighLevelCommand>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            frames: MIN_FRAMES as i64,
            static_agents: [4, 8],
            moving_agents: [2, 5],
            ego_speed: [0.0, 10.0],
            ego_accel: [-1.0, 1.0],
            curvature: [0.01, 0.035],
            stationary_prob: 0.1,
            agent_speed: [2.0, 9.0],
            clearance: 1.0,
            command: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Config(m));
        if self.frames < MIN_FRAMES as i64 {
            return bad(format!("frames must be ≥ {MIN_FRAMES}, got {}", self.frames));
        }
        for (name, [lo, hi]) in [
            ("static_agents", self.static_agents),
            ("moving_agents", self.moving_agents),
        ] {
            if lo < 0 || hi < lo {
                return bad(format!("{name} must satisfy 0 ≤ min ≤ max, got [{lo}, {hi}]"));
            }
        }
        for (name, [lo, hi]) in [
            ("ego_speed", self.ego_speed),
            ("curvature", self.curvature),
            ("agent_speed", self.agent_speed),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
                return bad(format!("{name} must satisfy 0 ≤ min ≤ max, got [{lo}, {hi}]"));
            }
        }
        let [alo, ahi] = self.ego_accel;
        if !(alo.is_finite() && ahi.is_finite()) || ahi < alo {
            return bad(format!("ego_accel must satisfy min ≤ max, got [{alo}, {ahi}]"));
        }
        if !(0.0..=1.0).contains(&self.stationary_prob) {
            return bad(format!("stationary_prob must be in [0, 1], got {}", self.stationary_prob));
        }
        if !(self.clearance.is_finite() && self.clearance >= 0.0) {
            return bad(format!("clearance must be ≥ 0, got {}", self.clearance));
        }
        let duration = (self.frames - 1) as f64 * FRAME_DT;
        let reach = self.ego_speed[1] * duration + 0.5 * self.ego_accel[1].max(0.0) * duration * duration;
        if reach > 80.0 {
            return bad(format!(
                "ego can travel {reach:.1} m, which does not fit inside the ±50 m world"
            ));
        }
        if self.curvature[1] > 0.1 {
            return bad("curvature above 0.1 1/m leaves no room for adjacent lanes".into());
        }
        Ok(())
    }
}

/// Longitudinal motion with constant acceleration, stopping at zero speed.
#[derive(Debug, Clone, Copy)]
struct Longitudinal {
    v0: f64,
    a: f64,
}

impl Longitudinal {
    fn stop_time(&self) -> f64 {
        if self.a < 0.0 {
            -self.v0 / self.a
        } else {
            f64::INFINITY
        }
    }

    fn distance(&self, t: f64) -> f64 {
        let t = t.min(self.stop_time());
        self.v0 * t + 0.5 * self.a * t * t
    }

    fn speed(&self, t: f64) -> f64 {
        (self.v0 + self.a * t).max(0.0)
    }

    fn accel(&self, t: f64) -> f64 {
        if t < self.stop_time() {
            self.a
        } else {
            0.0
        }
    }
}

/// Constant-curvature road through `origin` with initial heading `yaw0`.
#[derive(Debug, Clone, Copy)]
struct Road {
    origin: BevPoint,
    yaw0: f64,
    curvature: f64,
}

impl Road {
    fn heading(&self, s: f64) -> f64 {
        self.yaw0 + self.curvature * s
    }

    fn point(&self, s: f64) -> BevPoint {
        let k = self.curvature;
        let (s0, c0) = self.yaw0.sin_cos();
        if k.abs() < 1e-12 {
            return self.origin + BevPoint::new(c0, s0) * s;
        }
        let (s1, c1) = self.heading(s).sin_cos();
        self.origin + BevPoint::new((s1 - s0) / k, (c0 - c1) / k)
    }

    /// Point at arc length `s`, shifted `offset` meters to the left.
    fn point_offset(&self, s: f64, offset: f64) -> BevPoint {
        let h = self.heading(s);
        self.point(s) + BevPoint::new(-h.sin(), h.cos()) * offset
    }
}

/// Agent motion: constant speed with constant turn rate (zero for straight).
#[derive(Debug, Clone, Copy)]
pub struct AgentMotion {
    pub start: BevPoint,
    pub heading: f64,
    pub speed: f64,
    pub turn_rate: f64,
}

impl AgentMotion {
    /// Pose after `t` seconds.
    pub fn at(&self, t: f64) -> (BevPoint, f64) {
        let w = self.turn_rate;
        let h = self.heading + w * t;
        if w.abs() < 1e-12 {
            let (s, c) = self.heading.sin_cos();
            return (self.start + BevPoint::new(c, s) * (self.speed * t), h);
        }
        let r = self.speed / w;
        let (s0, c0) = self.heading.sin_cos();
        let (s1, c1) = h.sin_cos();
        (self.start + BevPoint::new(r * (s1 - s0), r * (c0 - c1)), h)
    }
}

struct AgentPlan {
    category: Category,
    length: f64,
    width: f64,
    motion: AgentMotion,
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn count(rng: &mut ChaCha8Rng, range: [i64; 2]) -> usize {
    rng.random_range(range[0]..=range[1]) as usize
}

fn in_world(p: BevPoint) -> bool {
    p.x.abs() <= WORLD_LIMIT && p.y.abs() <= WORLD_LIMIT
}

/// Generate one scene. Identical `(seed, config)` pairs give identical scenes.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<Scene, SceneError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_frames = config.frames as usize;
    let duration = (n_frames - 1) as f64 * FRAME_DT;

    let command = match config.command {
        Some(c) => c,
        None => HighLevelCommand::ALL[rng.random_range(0..3)],
    };
    let turning = command != HighLevelCommand::GoStraight;
    let stationary = !turning && rng.random::<f64>() < config.stationary_prob;
    let lon = if stationary {
        Longitudinal { v0: 0.0, a: 0.0 }
    } else {
        let lo = if turning {
            config.ego_speed[0].max(2.0).min(config.ego_speed[1])
        } else {
            config.ego_speed[0]
        };
        let v0 = uniform(&mut rng, [lo, config.ego_speed[1]]);
        let mut a = uniform(&mut rng, config.ego_accel);
        if turning && v0 + a * duration < 1.0 {
            // keep turning scenes moving so the heading actually changes
            a = a.max((1.0 - v0) / duration);
        }
        Longitudinal { v0, a }
    };
    let curvature = match command {
        HighLevelCommand::GoStraight => 0.0,
        HighLevelCommand::TurnLeft => uniform(&mut rng, config.curvature),
        HighLevelCommand::TurnRight => -uniform(&mut rng, config.curvature),
    };
    // pick the initial heading so the yaw never wraps across ±π during the clip
    let total_turn = (curvature * lon.distance(duration)).abs();
    let span = 2.0 * PI - total_turn - 2e-6;
    let u: f64 = rng.random();
    let yaw0 = match command {
        HighLevelCommand::TurnRight => -PI + total_turn + 1e-6 + u * span,
        _ => -PI + 1e-6 + u * span,
    };

    // center the ego path in the world
    let raw = Road {
        origin: BevPoint::ORIGIN,
        yaw0,
        curvature,
    };
    let path: Vec<BevPoint> = (0..n_frames)
        .map(|k| raw.point(lon.distance(k as f64 * FRAME_DT)))
        .collect();
    let (min_x, max_x) = path.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (min_y, max_y) = path.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.y), b.max(p.y)));
    let road = Road {
        origin: BevPoint::new(-(min_x + max_x) / 2.0, -(min_y + max_y) / 2.0),
        ..raw
    };

    let ego_poses: Vec<Pose> = (0..n_frames)
        .map(|k| {
            let s = lon.distance(k as f64 * FRAME_DT);
            Pose::new(road.point(s), road.heading(s))
        })
        .collect();

    let mut lanes = Vec::new();
    for start in [-30.0, 0.0, 30.0, 60.0] {
        for offset in [-3.5, 0.0, 3.5] {
            let points: [BevPoint; 4] =
                std::array::from_fn(|i| road.point_offset(start + 10.0 * i as f64, offset));
            if points.iter().all(|&p| in_world(p)) {
                lanes.push(LaneCenterline { points });
            }
        }
    }

    let ego_rects: Vec<OrientedRect> = ego_poses
        .iter()
        .map(|p| OrientedRect::new(p.position, EGO_LENGTH, EGO_WIDTH, p.yaw).inflated(config.clearance))
        .collect();
    let times: Vec<f64> = (0..n_frames).map(|k| k as f64 * FRAME_DT).collect();

    let mut plans: Vec<AgentPlan> = Vec::new();
    let n_static = count(&mut rng, config.static_agents);
    let n_moving = count(&mut rng, config.moving_agents);
    let max_travel = lon.distance(duration);
    for slot in 0..(n_static + n_moving) {
        let moving = slot >= n_static;
        for _attempt in 0..64 {
            let candidate = if moving {
                sample_moving(&mut rng, &road, max_travel, config)
            } else {
                sample_static(&mut rng, &road, max_travel)
            };
            let ok = times.iter().enumerate().all(|(k, &t)| {
                let (c, h) = candidate.motion.at(t);
                let rect = OrientedRect::new(c, candidate.length, candidate.width, h);
                in_world(c)
                    && !rect_intersects(&rect, &ego_rects[k])
                    && plans.iter().all(|other| {
                        let (oc, oh) = other.motion.at(t);
                        !rect_intersects(&rect, &OrientedRect::new(oc, other.length, other.width, oh))
                    })
            });
            if ok {
                plans.push(candidate);
                break;
            }
        }
    }

    let frames = (0..n_frames)
        .map(|k| {
            let t = times[k];
            let pose = ego_poses[k];
            let speed = lon.speed(t);
            let (sh, ch) = pose.yaw.sin_cos();
            let tangent = BevPoint::new(ch, sh);
            let normal = BevPoint::new(-sh, ch);
            let ego = EgoState {
                position: pose.position,
                velocity: tangent * speed,
                acceleration: tangent * lon.accel(t) + normal * (curvature * speed * speed),
                yaw: wrap_angle(pose.yaw),
                history: ego_poses[k.saturating_sub(HISTORY_LEN)..k]
                    .iter()
                    .map(|p| p.position)
                    .collect(),
            };
            let agents = plans
                .iter()
                .enumerate()
                .map(|(id, a)| {
                    let (center, heading) = a.motion.at(t);
                    AgentBox {
                        center,
                        length: a.length,
                        width: a.width,
                        heading: wrap_angle(heading),
                        category: a.category,
                        id: id as u32,
                    }
                })
                .collect();
            Frame {
                timestamp: t,
                ego,
                agents,
                lanes: lanes.clone(),
                command,
            }
        })
        .collect();
    Ok(Scene { frames })
}

fn sized(rng: &mut ChaCha8Rng, category: Category) -> (f64, f64) {
    let (l, w) = category.nominal_size();
    let j = rng.random_range(0.9..1.1);
    (l * j, w * j)
}

fn sample_static(rng: &mut ChaCha8Rng, road: &Road, max_travel: f64) -> AgentPlan {
    const KINDS: [Category; 5] = [
        Category::TrafficCone,
        Category::Barrier,
        Category::Car,
        Category::Car,
        Category::Truck,
    ];
    let category = KINDS[rng.random_range(0..KINDS.len())];
    let (length, width) = sized(rng, category);
    let s = rng.random_range(-20.0..max_travel + 25.0);
    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let lateral = side * rng.random_range(6.0..10.0);
    let heading = match category {
        Category::TrafficCone | Category::Barrier => rng.random_range(-PI..PI),
        _ => road.heading(s) + rng.random_range(-0.1..0.1),
    };
    AgentPlan {
        category,
        length,
        width,
        motion: AgentMotion {
            start: road.point_offset(s, lateral),
            heading,
            speed: 0.0,
            turn_rate: 0.0,
        },
    }
}

fn sample_moving(rng: &mut ChaCha8Rng, road: &Road, max_travel: f64, config: &SceneConfig) -> AgentPlan {
    const KINDS: [Category; 8] = [
        Category::Car,
        Category::Car,
        Category::Car,
        Category::Truck,
        Category::Bus,
        Category::Pedestrian,
        Category::Motorcycle,
        Category::Bicycle,
    ];
    let category = KINDS[rng.random_range(0..KINDS.len())];
    let (length, width) = sized(rng, category);
    let s = rng.random_range(-20.0..max_travel + 30.0);
    let reverse = rng.random::<bool>();
    let (lateral, speed) = match category {
        Category::Pedestrian => {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (side * rng.random_range(6.0..10.0), rng.random_range(0.5..1.6))
        }
        Category::Bicycle => (if reverse { 6.0 } else { -6.0 }, rng.random_range(2.0..5.0)),
        _ => {
            // same-direction traffic on the adjacent right lane, oncoming on the left
            let lane = if reverse { 3.5 } else { -3.5 };
            (lane, uniform(rng, config.agent_speed))
        }
    };
    let heading = road.heading(s) + if reverse { PI } else { 0.0 };
    // concentric with the road: an offset lane has curvature κ / (1 - κ·offset)
    let turn_rate = match category {
        Category::Pedestrian => rng.random_range(-0.05..0.05),
        _ => {
            let k = road.curvature / (1.0 - road.curvature * lateral);
            k * speed * if reverse { -1.0 } else { 1.0 }
        }
    };
    let start = road.point_offset(s, lateral);
    AgentPlan {
        category,
        length,
        width,
        motion: AgentMotion {
            start,
            heading,
            speed,
            turn_rate,
        },
    }
}

impl Scene {
    pub fn frame(&self, index: usize) -> Option<&Frame> {
        self.frames.get(index)
    }

    /// Frame indices with full history and six future frames.
    pub fn planning_frames(&self) -> std::ops::Range<usize> {
        let n = self.frames.len();
        if n < MIN_FRAMES {
            return 0..0;
        }
        HISTORY_LEN..n - PLAN_LEN
    }

    /// Reflect the whole scene across the world `y` axis (`x → -x`).
    pub fn mirror_x(&self) -> Scene {
        let m = |p: BevPoint| BevPoint::new(-p.x, p.y);
        let h = |a: f64| wrap_angle(PI - a);
        Scene {
            frames: self
                .frames
                .iter()
                .map(|f| Frame {
                    timestamp: f.timestamp,
                    ego: EgoState {
                        position: m(f.ego.position),
                        velocity: m(f.ego.velocity),
                        acceleration: m(f.ego.acceleration),
                        yaw: h(f.ego.yaw),
                        history: f.ego.history.iter().copied().map(m).collect(),
                    },
                    agents: f
                        .agents
                        .iter()
                        .map(|a| AgentBox {
                            center: m(a.center),
                            heading: h(a.heading),
                            ..a.clone()
                        })
                        .collect(),
                    lanes: f
                        .lanes
                        .iter()
                        .map(|l| LaneCenterline {
                            points: l.points.map(m),
                        })
                        .collect(),
                    command: f.command.mirrored(),
                })
                .collect(),
        }
    }

    /// Structural checks applied after import.
    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, w) in self.frames.windows(2).enumerate() {
            let dt = w[1].timestamp - w[0].timestamp;
            if (dt - FRAME_DT).abs() > 1e-9 {
                return Err(SceneError::Invalid(format!(
                    "frames {i} and {} are {dt} s apart, expected {FRAME_DT}",
                    i + 1
                )));
            }
        }
        for (i, f) in self.frames.iter().enumerate() {
            for a in &f.agents {
                if !(a.length > 0.0 && a.width > 0.0) {
                    return Err(SceneError::Invalid(format!(
                        "frame {i}: agent {} has non-positive size",
                        a.id
                    )));
                }
            }
            for lane in &f.lanes {
                if lane.points.windows(2).any(|p| p[0] == p[1]) {
                    return Err(SceneError::Invalid(format!(
                        "frame {i}: lane has repeated consecutive points"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The six future ego positions after `t0`, in the ego frame at `t0`.
pub fn ground_truth_plan(scene: &Scene, t0: usize) -> Result<[BevPoint; PLAN_LEN], SceneError> {
    let available = scene.frames.len().saturating_sub(t0 + 1);
    if t0 >= scene.frames.len() || available < PLAN_LEN {
        return Err(SceneError::Range {
            t0,
            needed: PLAN_LEN,
            available,
        });
    }
    let pose = scene.frames[t0].ego.pose();
    Ok(std::array::from_fn(|k| {
        pose.to_local(scene.frames[t0 + 1 + k].ego.position)
    }))
}

pub fn write_scenes<W: Write>(scenes: &[Scene], mut out: W) -> Result<(), SceneError> {
    for s in scenes {
        serde_json::to_writer(&mut out, s).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_scenes<R: BufRead>(input: R) -> Result<Vec<Scene>, SceneError> {
    let mut scenes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line).map_err(|e| SceneError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        scene.validate().map_err(|e| SceneError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn export_scenes(scenes: &[Scene], path: &Path) -> Result<(), SceneError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_scenes(scenes, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn import_scenes(path: &Path) -> Result<Vec<Scene>, SceneError> {
    let file = std::fs::File::open(path)?;
    read_scenes(std::io::BufReader::new(file))
}

/// Per-scene seed so scene `i` of a batch does not depend on the batch size.
pub fn scene_seed(seed: u64, index: u64) -> u64 {
    crate::util::mix64(seed ^ crate::util::mix64(index.wrapping_add(0x5CE4E)))
}

pub fn generate_scenes(seed: u64, n: usize, config: &SceneConfig) -> Result<Vec<Scene>, SceneError> {
    (0..n as u64)
        .map(|i| generate_scene(scene_seed(seed, i), config))
        .collect()
}
