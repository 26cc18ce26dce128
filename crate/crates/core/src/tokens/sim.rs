//! Simulated 3D tokenizers: ground truth plus Gaussian noise pushed through a
//! fixed random featurizer.

use super::{MemoryQueue, QueryToken};
use crate::bev::BevPoint;
use crate::geom::Pose;
use crate::qa::lane_ground_truth;
use crate::scene::{Category, Frame, Scene, FRAME_DT};
use crate::tensor::Matrix;
use crate::util::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

const DET_FEATURES: usize = 8 + Category::ALL.len();
const MAP_FEATURES: usize = 8;
const STREAM_DET: u64 = 0;
const STREAM_MAP: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySimConfig {
    pub d_q: usize,
    /// Std of the position noise, meters.
    pub position_noise: f64,
    /// Std of the velocity noise, m/s.
    pub velocity_noise: f64,
    /// Past frames of detection queries to keep; 0 disables the memory queue.
    pub memory_depth: usize,
    pub top_k: usize,
    pub featurizer_seed: u64,
}

impl Default for QuerySimConfig {
    fn default() -> Self {
        QuerySimConfig {
            d_q: 32,
            position_noise: 0.3,
            velocity_noise: 0.3,
            memory_depth: 3,
            top_k: 256,
            featurizer_seed: 7,
        }
    }
}

/// Query sets for the two `<query>` slots of a planning question.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotTokens {
    pub detection: Vec<QueryToken>,
    pub map: Vec<QueryToken>,
}

#[derive(Debug, Clone)]
pub struct QueryGenerator {
    config: QuerySimConfig,
    det_weight: Matrix,
    map_weight: Matrix,
}

fn random_weight(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let s = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized above")
}

fn featurize(w: &Matrix, f: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|i| crate::tensor::dot(w.row(i), f).tanh())
        .collect()
}

/// World-frame velocity of agent `id` at `frame`, by finite difference.
fn agent_velocity(scene: &Scene, frame: usize, id: u32) -> BevPoint {
    let find = |k: usize| {
        scene
            .frames
            .get(k)
            .and_then(|f| f.agents.iter().find(|a| a.id == id))
            .map(|a| a.center)
    };
    let here = match find(frame) {
        Some(p) => p,
        None => return BevPoint::ORIGIN,
    };
    if let Some(next) = find(frame + 1) {
        return (next - here) * (1.0 / FRAME_DT);
    }
    if let Some(prev) = frame.checked_sub(1).and_then(find) {
        return (here - prev) * (1.0 / FRAME_DT);
    }
    BevPoint::ORIGIN
}

impl QueryGenerator {
    pub fn new(config: QuerySimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.featurizer_seed);
        let det_weight = random_weight(config.d_q, DET_FEATURES, &mut rng);
        let map_weight = random_weight(config.d_q, MAP_FEATURES, &mut rng);
        QueryGenerator {
            config,
            det_weight,
            map_weight,
        }
    }

    pub fn config(&self) -> &QuerySimConfig {
        &self.config
    }

    /// Detection queries for the agents of frame `observed`, expressed in the
    /// ego frame of `reference`.
    pub fn detection_queries(
        &self,
        scene: &Scene,
        scene_id: u64,
        observed: usize,
        reference: &Pose,
        seed: u64,
    ) -> Vec<QueryToken> {
        let frame: &Frame = &scene.frames[observed];
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &[scene_id, observed as u64, STREAM_DET]));
        let pn = Normal::new(0.0, self.config.position_noise.max(0.0)).expect("finite std");
        let vn = Normal::new(0.0, self.config.velocity_noise.max(0.0)).expect("finite std");
        let ego_vel = reference.vector_to_local(frame.ego.velocity);
        let mut out = Vec::new();
        for agent in &frame.agents {
            // draw noise for every agent so the stream does not depend on the range filter
            let dp = BevPoint::new(pn.sample(&mut rng), pn.sample(&mut rng));
            let dv = BevPoint::new(vn.sample(&mut rng), vn.sample(&mut rng));
            let local = reference.to_local(agent.center);
            if local.x.abs() >= 50.0 || local.y.abs() >= 50.0 {
                continue;
            }
            let p = local + dp;
            let v = reference.vector_to_local(agent_velocity(scene, observed, agent.id)) - ego_vel + dv;
            let h = reference.heading_to_local(agent.heading);
            let mut f = vec![
                p.x / 50.0,
                p.y / 50.0,
                v.x / 10.0,
                v.y / 10.0,
                h.cos(),
                h.sin(),
                agent.length / 10.0,
                agent.width / 5.0,
            ];
            f.extend(Category::ALL.iter().map(|&c| if c == agent.category { 1.0 } else { 0.0 }));
            out.push(QueryToken::new(
                featurize(&self.det_weight, &f),
                [p.x, p.y, 0.0],
                Some(1.0 / (1.0 + dp.norm())),
            ));
        }
        out
    }

    /// Map queries for the in-range lanes of `frame`, referenced at each
    /// lane's mean point.
    pub fn map_queries(&self, scene: &Scene, scene_id: u64, frame: usize, seed: u64) -> Vec<QueryToken> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &[scene_id, frame as u64, STREAM_MAP]));
        let pn = Normal::new(0.0, self.config.position_noise.max(0.0)).expect("finite std");
        lane_ground_truth(&scene.frames[frame])
            .into_iter()
            .map(|lane| {
                let d = BevPoint::new(pn.sample(&mut rng), pn.sample(&mut rng));
                let pts = lane.map(|p| p + d);
                let f: Vec<f64> = pts.iter().flat_map(|p| [p.x / 50.0, p.y / 50.0]).collect();
                let mid = pts.iter().fold(BevPoint::ORIGIN, |a, &p| a + p) * 0.25;
                QueryToken::new(featurize(&self.map_weight, &f), [mid.x, mid.y, 0.0], None)
            })
            .collect()
    }

    /// Detection context (memory frames, then current) and map queries for a
    /// planning question at `frame`. Past detections are motion-compensated
    /// into the current ego frame.
    pub fn planning_tokens(&self, scene: &Scene, scene_id: u64, frame: usize, seed: u64) -> SlotTokens {
        let pose = scene.frames[frame].ego.pose();
        let mut queue = MemoryQueue::new(self.config.memory_depth, self.config.top_k);
        for past in frame.saturating_sub(self.config.memory_depth)..frame {
            queue.push(self.detection_queries(scene, scene_id, past, &pose, seed));
        }
        let current = super::memory::top_k(
            self.detection_queries(scene, scene_id, frame, &pose, seed),
            self.config.top_k,
        );
        SlotTokens {
            detection: queue.context(&current),
            map: self.map_queries(scene, scene_id, frame, seed),
        }
    }
}
