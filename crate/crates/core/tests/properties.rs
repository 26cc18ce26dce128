use atlasbench_core::bev::{decode_point, encode_point, BevPoint, BinIndex, BinSpec};
use atlasbench_core::qa::*;
use atlasbench_core::scene::{generate_scene, ground_truth_plan, Category, HighLevelCommand, SceneConfig};
use atlasbench_core::tokens::memory::MemoryQueue;
use atlasbench_core::tokens::sim::{QueryGenerator, QuerySimConfig};
use atlasbench_core::tokens::{embed_tokens, stack_embeddings, QueryToken, RefPointProjector};
use proptest::prelude::*;

fn bin() -> impl Strategy<Value = BinIndex> {
    (0u32..1000).prop_map(BinIndex)
}

fn pair() -> impl Strategy<Value = BinPair> {
    (bin(), bin())
}

fn planning(chain: ChainSpec) -> impl Strategy<Value = (ChainSpec, PlanningAnswer)> {
    (
        pair(),
        pair(),
        bin(),
        prop::array::uniform3(pair()),
        prop::array::uniform6(pair()),
    )
        .prop_map(move |(v, a, y, h, w)| {
            let ans = PlanningAnswer {
                velocity: chain.contains(ChainElement::V).then_some(v),
                acceleration: chain.contains(ChainElement::A).then_some(a),
                yaw: chain.contains(ChainElement::Y).then_some(y),
                history: chain.contains(ChainElement::T).then_some(h),
                waypoints: w,
            };
            (chain.clone(), ans)
        })
}

fn any_planning() -> impl Strategy<Value = (ChainSpec, PlanningAnswer)> {
    prop::sample::select(ChainSpec::ablation_set()).prop_flat_map(planning)
}

fn detection() -> impl Strategy<Value = DetectionAnswer> {
    prop::collection::vec((prop::sample::select(Category::ALL.to_vec()), pair()), 0..8)
        .prop_map(|objects| DetectionAnswer { objects })
}

fn lanes() -> impl Strategy<Value = LaneAnswer> {
    prop::collection::vec(prop::array::uniform4(pair()), 0..5).prop_map(|lanes| LaneAnswer { lanes })
}

#[derive(Debug, Clone)]
enum Mutation {
    Delete(usize),
    Insert(usize, char),
    Swap(usize, usize),
    Truncate(usize),
}

fn mutation() -> impl Strategy<Value = Mutation> {
    let ch = prop::sample::select(vec!['[', ']', ',', ' ', '0', '5', '9', 'W', 'P', 'V', '\n', 'é', '\u{0}']);
    prop_oneof![
        any::<usize>().prop_map(Mutation::Delete),
        (any::<usize>(), ch).prop_map(|(i, c)| Mutation::Insert(i, c)),
        (any::<usize>(), any::<usize>()).prop_map(|(i, j)| Mutation::Swap(i, j)),
        any::<usize>().prop_map(Mutation::Truncate),
    ]
}

fn mutate(text: &str, muts: &[Mutation]) -> String {
    let mut c: Vec<char> = text.chars().collect();
    for m in muts {
        let n = c.len().max(1);
        match *m {
            Mutation::Delete(i) if !c.is_empty() => {
                c.remove(i % c.len());
            }
            Mutation::Insert(i, ch) => c.insert(i % (c.len() + 1), ch),
            Mutation::Swap(i, j) if !c.is_empty() => c.swap(i % n, j % n),
            Mutation::Truncate(i) => c.truncate(i % (c.len() + 1)),
            _ => {}
        }
    }
    c.into_iter().collect()
}

fn check_error(text: &str, e: &ParseError) -> Result<(), TestCaseError> {
    prop_assert!(e.offset <= text.len(), "offset {} past {}", e.offset, text.len());
    prop_assert!(!e.expected.is_empty());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn planning_round_trip((chain, ans) in any_planning()) {
        let text = ans.to_text(&chain);
        prop_assert_eq!(&parse_planning_answer(&text, &chain).unwrap(), &ans);
        let (inferred, again) = parse_planning_answer_any(&text).unwrap();
        prop_assert_eq!(inferred, chain);
        prop_assert_eq!(again, ans);
    }

    #[test]
    fn detection_and_lane_round_trip(d in detection(), l in lanes()) {
        prop_assert_eq!(parse_detection_answer(&d.to_text()).unwrap(), d);
        prop_assert_eq!(parse_lane_answer(&l.to_text()).unwrap(), l);
    }

    #[test]
    fn mutated_planning_is_total(
        (chain, ans) in any_planning(),
        muts in prop::collection::vec(mutation(), 1..4),
    ) {
        let text = mutate(&ans.to_text(&chain), &muts);
        match parse_planning_answer(&text, &chain) {
            Ok(a) => prop_assert_eq!(parse_planning_answer(&a.to_text(&chain), &chain).unwrap(), a),
            Err(e) => check_error(&text, &e)?,
        }
        if let Err(e) = parse_planning_answer_any(&text) {
            check_error(&text, &e)?;
        }
    }

    #[test]
    fn mutated_detection_and_lane_are_total(
        d in detection(),
        l in lanes(),
        muts in prop::collection::vec(mutation(), 1..4),
    ) {
        let dt = mutate(&d.to_text(), &muts);
        if let Err(e) = parse_detection_answer(&dt) {
            check_error(&dt, &e)?;
        }
        let lt = mutate(&l.to_text(), &muts);
        if let Err(e) = parse_lane_answer(&lt) {
            check_error(&lt, &e)?;
        }
    }

    #[test]
    fn arbitrary_bytes_are_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let text = String::from_utf8_lossy(&bytes);
        for chain in ChainSpec::ablation_set() {
            if let Err(e) = parse_planning_answer(&text, &chain) {
                check_error(&text, &e)?;
            }
        }
        if let Err(e) = parse_detection_answer(&text) {
            check_error(&text, &e)?;
        }
        if let Err(e) = parse_lane_answer(&text) {
            check_error(&text, &e)?;
        }
    }

    #[test]
    fn plan_quantization_bound(seed in 0u64..10_000) {
        let scene = generate_scene(seed, &SceneConfig::default()).unwrap();
        for t0 in scene.planning_frames() {
            let target = planning_target(&scene, t0).unwrap();
            let decoded = PlanningAnswer::from_target(&target, &ChainSpec::vap()).waypoints_m();
            for (d, s) in decoded.iter().zip(&target.waypoints) {
                prop_assert!((d.x - s.x).abs() <= 0.05 + 1e-9 && (d.y - s.y).abs() <= 0.05 + 1e-9);
            }
        }
    }

    #[test]
    fn history_is_previous_positions(seed in 0u64..10_000) {
        let scene = generate_scene(seed, &SceneConfig::default()).unwrap();
        for (t, f) in scene.frames.iter().enumerate() {
            let h = &f.ego.history;
            prop_assert_eq!(h.len(), t.min(3));
            for (k, p) in h.iter().rev().enumerate() {
                prop_assert_eq!(*p, scene.frames[t - 1 - k].ego.position);
            }
        }
    }

    #[test]
    fn constant_velocity_plan_is_collinear(seed in 0u64..10_000) {
        let config = SceneConfig {
            ego_accel: [0.0, 0.0],
            command: Some(HighLevelCommand::GoStraight),
            stationary_prob: 0.0,
            ..SceneConfig::default()
        };
        let scene = generate_scene(seed, &config).unwrap();
        let t0 = scene.planning_frames().start;
        let speed = scene.frames[t0].ego.velocity.norm();
        let plan = ground_truth_plan(&scene, t0).unwrap();
        let mut prev = BevPoint::ORIGIN;
        for p in plan {
            prop_assert!(p.x.abs() < 1e-6);
            prop_assert!((p.distance(&prev) - speed * 0.5).abs() < 1e-6);
            prev = p;
        }
    }

    #[test]
    fn scene_geometry_survives_binning(seed in 0u64..10_000) {
        let scene = generate_scene(seed, &SceneConfig::default()).unwrap();
        let f = &scene.frames[3];
        let pose = f.ego.pose();
        let pts = f.agents.iter().map(|a| a.center)
            .chain(f.lanes.iter().flat_map(|l| l.points))
            .map(|p| pose.to_local(p))
            .filter(|p| p.x.abs() < 50.0 && p.y.abs() < 50.0);
        for p in pts {
            let back = decode_point(encode_point(p, &BinSpec::SPATIAL).unwrap(), &BinSpec::SPATIAL).unwrap();
            prop_assert!((back.x - p.x).abs() <= 0.05 + 1e-12 && (back.y - p.y).abs() <= 0.05 + 1e-12);
        }
    }
}

fn token(tag: usize, conf: Option<f64>) -> QueryToken {
    QueryToken::new(vec![tag as f64; 4], [tag as f64, 0.0, 0.0], conf)
}

/// FIFO of per-frame sorted prefixes, kept as plain vectors.
fn queue_oracle(frames: &[Vec<QueryToken>], depth: usize, k: usize) -> Vec<Vec<QueryToken>> {
    let mut kept: Vec<Vec<QueryToken>> = Vec::new();
    for f in frames {
        let mut idx: Vec<usize> = (0..f.len()).collect();
        let conf = |i: usize| f[i].confidence.unwrap_or(0.0);
        // selection by repeated maximum, earliest index on ties
        let mut chosen = Vec::new();
        while chosen.len() < k && !idx.is_empty() {
            let mut best = 0;
            for (pos, &i) in idx.iter().enumerate() {
                if conf(i) > conf(idx[best]) {
                    best = pos;
                }
            }
            chosen.push(f[idx.remove(best)].clone());
        }
        kept.push(chosen);
        if kept.len() > depth {
            kept.remove(0);
        }
    }
    kept
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn memory_queue_matches_oracle(
        frames in prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.95, (0u8..6).prop_map(|c| c as f64 / 5.0)), 0..40),
            0..7,
        ),
        depth in 1usize..5,
        k in 1usize..12,
    ) {
        let mut tag = 0;
        let frames: Vec<Vec<QueryToken>> = frames
            .into_iter()
            .map(|f| f.into_iter().map(|c| { tag += 1; token(tag, c) }).collect())
            .collect();
        let mut q = MemoryQueue::new(depth, k);
        let mut twin = MemoryQueue::new(depth, k);
        for f in &frames {
            q.push(f.clone());
            twin.push(f.clone());
        }
        prop_assert_eq!(&q, &twin);
        let expected = queue_oracle(&frames, depth, k);
        let got: Vec<Vec<QueryToken>> = q.slots().map(|s| s.to_vec()).collect();
        prop_assert_eq!(&got, &expected);
        let current = vec![token(0, Some(0.5))];
        let mut flat: Vec<QueryToken> = expected.into_iter().flatten().collect();
        flat.extend(current.clone());
        prop_assert_eq!(q.context(&current), flat);
    }

    #[test]
    fn zero_rp_ignores_reference_points(
        emb in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 0..10),
        rps in prop::collection::vec(prop::array::uniform3(-1e6f64..1e6), 10),
    ) {
        let rp = RefPointProjector::zeros(6);
        let a: Vec<QueryToken> = emb.iter().map(|e| QueryToken::new(e.clone(), [0.0; 3], None)).collect();
        let b: Vec<QueryToken> = emb.iter().zip(&rps).map(|(e, r)| QueryToken::new(e.clone(), *r, None)).collect();
        let ea = embed_tokens(&a, &rp).unwrap();
        prop_assert_eq!(&ea, &embed_tokens(&b, &rp).unwrap());
        prop_assert_eq!(ea, stack_embeddings(&a, 6).unwrap());
    }
}

#[test]
fn default_token_budget_fits_prompt_cap() {
    let cfg = QuerySimConfig::default();
    let per_frame = cfg.top_k;
    let total = 2 * (cfg.memory_depth + 1) * per_frame;
    assert!(total <= 2048, "{total}");
    let generator = QueryGenerator::new(cfg);
    for seed in 0..5 {
        let scene = generate_scene(seed, &SceneConfig::default()).unwrap();
        let t = scene.planning_frames().end - 1;
        let slots = generator.planning_tokens(&scene, seed, t, 0);
        assert!(slots.detection.len() + slots.map.len() <= total);
    }
}
