//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! straight to stdout so the summary survives output capture.

use atlasbench_core::bev::{decode_bin, encode_bin, BevPoint, BinSpec};
use atlasbench_core::geom::{rect_intersects, OrientedRect};
use atlasbench_core::metrics::{evaluate, f1_from_pr, l2_horizons, EvalOptions, L2Convention, PredictionRecord};
use atlasbench_core::planner::{
    build_examples, gradient_check, train, DecodeMode, Model, PlannerConfig, TrainConfig, Vocab,
};
use atlasbench_core::qa::{
    build_dataset, parse_planning_answer, ChainElement, ChainSpec, PlanningAnswer, QaRecord, Task,
};
use atlasbench_core::scene::{generate_scenes, Scene, SceneConfig};
use atlasbench_core::tokens::memory::MemoryQueue;
use atlasbench_core::tokens::{embed_tokens, QuerySimConfig, QueryToken, RefPointProjector, RpEmbedding};
use atlasbench_cli::Cli;
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance criterion {n:>2} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

/// Published (P, R, F1) triples: seven detection rows at four thresholds,
/// then five lane rows.
const PUBLISHED: [(&str, f64, f64, f64); 33] = [
    ("PETR@0.5", 12.4, 21.5, 15.8),
    ("PETR@1.0", 20.0, 30.5, 24.1),
    ("PETR@2.0", 27.5, 37.7, 31.8),
    ("PETR@4.0", 33.8, 42.6, 37.7),
    ("StreamPETR@0.5", 22.7, 41.3, 29.3),
    ("StreamPETR@1.0", 31.6, 49.5, 38.6),
    ("StreamPETR@2.0", 38.1, 54.2, 44.7),
    ("StreamPETR@4.0", 42.5, 56.9, 48.7),
    ("LLaMA@0.5", 0.3, 1.1, 0.4),
    ("LLaMA@1.0", 0.6, 2.6, 1.0),
    ("LLaMA@2.0", 1.5, 5.8, 2.4),
    ("LLaMA@4.0", 3.5, 12.8, 5.5),
    ("LLaVA@0.5", 2.0, 20.3, 3.0),
    ("LLaVA@1.0", 3.6, 35.7, 6.5),
    ("LLaVA@2.0", 6.5, 50.3, 11.6),
    ("LLaVA@4.0", 10.9, 62.8, 18.9),
    ("Vicuna@0.5", 2.0, 20.1, 2.5),
    ("Vicuna@1.0", 2.9, 35.6, 5.4),
    ("Vicuna@2.0", 5.9, 51.1, 10.1),
    ("Vicuna@4.0", 9.4, 63.8, 16.4),
    ("Merlin@0.5", 3.0, 22.5, 5.3),
    ("Merlin@1.0", 4.1, 36.1, 7.4),
    ("Merlin@2.0", 6.6, 52.6, 11.7),
    ("Merlin@4.0", 12.1, 64.3, 20.4),
    ("Atlas@0.5", 15.0, 61.2, 24.1),
    ("Atlas@1.0", 27.2, 74.0, 39.8),
    ("Atlas@2.0", 36.2, 79.2, 49.7),
    ("Atlas@4.0", 41.2, 81.2, 54.6),
    ("lane TopoMLP", 50.6, 55.7, 53.0),
    ("lane LLaVA", 10.4, 9.8, 10.0),
    ("lane Vicuna", 11.7, 10.3, 10.9),
    ("lane Merlin", 22.1, 22.4, 22.2),
    ("lane Atlas", 45.7, 39.1, 42.2),
];

#[test]
fn criterion_01_f1_arithmetic() {
    let t = Instant::now();
    let misses: Vec<String> = PUBLISHED
        .iter()
        .filter_map(|&(name, p, r, f1)| {
            let got = f1_from_pr(p, r);
            ((got - f1).abs() > 0.05).then(|| format!("{name} {p}/{r} -> {got:.3} vs {f1}"))
        })
        .collect();
    let elapsed = t.elapsed();
    let pass = misses.is_empty() && elapsed < Duration::from_secs(1);
    let detail = format!(
        "{}/{} published triples within ±0.05 in {}{}",
        PUBLISHED.len() - misses.len(),
        PUBLISHED.len(),
        secs(elapsed),
        if misses.is_empty() { String::new() } else { format!("; off: {}", misses.join("; ")) }
    );
    report(1, "F1 arithmetic", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_discretization() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for spec in [BinSpec::SPATIAL, BinSpec::VELOCITY, BinSpec::ACCELERATION] {
        for _ in 0..100_000 {
            let v: f64 = rng.random_range(-50.0..50.0);
            let back = decode_bin(encode_bin(v, &spec).unwrap(), &spec).unwrap();
            worst = worst.max((back - v).abs());
        }
    }
    let elapsed = t.elapsed();
    let pass = worst <= 0.05 + 1e-12 && elapsed < Duration::from_secs(1);
    report(
        2,
        "discretization",
        pass,
        &format!("max round-trip error {worst:.6} over 3x10^5 values in {}", secs(elapsed)),
    );
    assert!(pass);
}

fn random_answer(rng: &mut ChaCha8Rng, chain: &ChainSpec) -> PlanningAnswer {
    let mut bin = || atlasbench_core::bev::BinIndex(rng.random_range(0..1000));
    let mut pair = || (bin(), bin());
    let v = pair();
    let a = pair();
    let h = [pair(), pair(), pair()];
    let w = [pair(), pair(), pair(), pair(), pair(), pair()];
    let y = atlasbench_core::bev::BinIndex(rng.random_range(0..1000));
    PlanningAnswer {
        velocity: chain.contains(ChainElement::V).then_some(v),
        acceleration: chain.contains(ChainElement::A).then_some(a),
        yaw: chain.contains(ChainElement::Y).then_some(y),
        history: chain.contains(ChainElement::T).then_some(h),
        waypoints: w,
    }
}

fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    const ALPHABET: [char; 14] = ['[', ']', ',', ' ', '0', '1', '9', 'W', 'P', 'V', 'A', '\n', 'ß', '\u{7f}'];
    let mut c: Vec<char> = text.chars().collect();
    for _ in 0..rng.random_range(1..4) {
        let n = c.len();
        match rng.random_range(0..4) {
            0 if n > 0 => {
                c.remove(rng.random_range(0..n));
            }
            1 => c.insert(rng.random_range(0..=n), ALPHABET[rng.random_range(0..ALPHABET.len())]),
            2 if n > 1 => c.swap(rng.random_range(0..n), rng.random_range(0..n)),
            _ => c.truncate(rng.random_range(0..=n)),
        }
    }
    c.into_iter().collect()
}

#[test]
fn criterion_03_qa_grammar() {
    let t = Instant::now();
    let chains = ChainSpec::ablation_set();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut round_trip_failures = 0;
    let mut positioned_errors = 0;
    let mut valid = 0;
    let mut bad_errors = 0;
    for i in 0..10_000 {
        let chain = &chains[i % chains.len()];
        let ans = random_answer(&mut rng, chain);
        let text = ans.to_text(chain);
        if parse_planning_answer(&text, chain).ok().as_ref() != Some(&ans) {
            round_trip_failures += 1;
        }
        let mutated = mutate(&mut rng, &text);
        let outcome = std::panic::catch_unwind(|| parse_planning_answer(&mutated, chain));
        match outcome {
            Ok(Ok(_)) => valid += 1,
            Ok(Err(e)) if e.offset <= mutated.len() && !e.expected.is_empty() => positioned_errors += 1,
            _ => bad_errors += 1,
        }
    }
    let elapsed = t.elapsed();
    let pass = round_trip_failures == 0 && bad_errors == 0 && elapsed < Duration::from_secs(10);
    report(
        3,
        "QA grammar",
        pass,
        &format!(
            "{} chains, 10^4 round trips ({round_trip_failures} failed); 10^4 mutations: {positioned_errors} positioned errors, {valid} valid parses, {bad_errors} crashes or unpositioned; {}",
            chains.len(),
            secs(elapsed)
        ),
    );
    assert!(pass);
}

fn planning_records(scenes: &[Scene], chain: &ChainSpec) -> Vec<QaRecord> {
    build_dataset(scenes, &[Task::Planning], chain, 0)
        .unwrap()
        .into_iter()
        .map(|p| p.record)
        .collect()
}

#[test]
fn criterion_04_zero_init_neutrality() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d_q = QuerySimConfig::default().d_q;
    let rp = RefPointProjector::zeros(d_q);
    let mut embed_equal = true;
    for _ in 0..200 {
        let n = rng.random_range(0..20);
        let tokens: Vec<QueryToken> = (0..n)
            .map(|_| {
                QueryToken::new(
                    (0..d_q).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), 0.0],
                    Some(rng.random()),
                )
            })
            .collect();
        let moved: Vec<QueryToken> = tokens
            .iter()
            .map(|q| QueryToken {
                reference_point: [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3)],
                ..q.clone()
            })
            .collect();
        embed_equal &= embed_tokens(&tokens, &rp).unwrap() == embed_tokens(&moved, &rp).unwrap();
    }
    let scenes = generate_scenes(4, 6, &SceneConfig::default()).unwrap();
    let records = planning_records(&scenes, &ChainSpec::vap());
    let with = PlannerConfig::default();
    let without = PlannerConfig {
        rp_embedding: RpEmbedding::None,
        ..PlannerConfig::default()
    };
    let a = Model::new(with.clone(), 11).unwrap();
    let b = Model::new(without.clone(), 11).unwrap();
    let ex_a = build_examples(&records, &scenes, &with, &a.vocab).unwrap();
    let ex_b = build_examples(&records, &scenes, &without, &b.vocab).unwrap();
    let mut loss_equal = true;
    for (x, y) in ex_a.iter().zip(&ex_b) {
        loss_equal &= a.loss(x).unwrap().to_bits() == b.loss(y).unwrap().to_bits();
    }
    let elapsed = t.elapsed();
    let pass = embed_equal && loss_equal && elapsed < Duration::from_secs(5);
    report(
        4,
        "zero-init neutrality",
        pass,
        &format!(
            "embeddings identical under perturbation: {embed_equal}; rp vs none loss bit-identical on {} examples: {loss_equal}; {}",
            ex_a.len(),
            secs(elapsed)
        ),
    );
    assert!(pass);
}

/// Per-frame selection by repeated maximum (earliest on ties), then a plain
/// FIFO window.
fn queue_oracle(frames: &[Vec<QueryToken>], depth: usize, k: usize) -> Vec<Vec<QueryToken>> {
    let mut window: Vec<Vec<QueryToken>> = Vec::new();
    for f in frames {
        let mut rest: Vec<&QueryToken> = f.iter().collect();
        let mut kept = Vec::new();
        while kept.len() < k && !rest.is_empty() {
            let mut best = 0;
            for i in 1..rest.len() {
                if rest[i].confidence.unwrap_or(0.0) > rest[best].confidence.unwrap_or(0.0) {
                    best = i;
                }
            }
            kept.push(rest.remove(best).clone());
        }
        window.push(kept);
        if window.len() > depth {
            window.remove(0);
        }
    }
    window
}

#[test]
fn criterion_05_memory_queue() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut tag = 0.0;
    for _ in 0..1000 {
        let frames: Vec<Vec<QueryToken>> = (0..rng.random_range(0..7))
            .map(|_| {
                (0..rng.random_range(0..400))
                    .map(|_| {
                        tag += 1.0;
                        // 21 confidence levels so ties are common
                        let c = rng.random_range(0..=20) as f64 / 20.0;
                        QueryToken::new(vec![tag], [tag, 0.0, 0.0], Some(c))
                    })
                    .collect()
            })
            .collect();
        let mut q = MemoryQueue::new(3, 256);
        for f in &frames {
            q.push(f.clone());
        }
        let got: Vec<Vec<QueryToken>> = q.slots().map(|s| s.to_vec()).collect();
        mismatches += (got != queue_oracle(&frames, 3, 256)) as usize;
    }
    let elapsed = t.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(5);
    report(
        5,
        "memory queue",
        pass,
        &format!("{mismatches}/1000 sequences differ from the FIFO/top-K oracle; {}", secs(elapsed)),
    );
    assert!(pass);
}

fn raster_intersects(a: &OrientedRect, b: &OrientedRect) -> bool {
    const PITCH: f64 = 0.01;
    let bounds = |r: &OrientedRect| {
        let c = r.corners();
        let f = |g: fn(&BevPoint) -> f64, lo: bool| {
            c.iter().map(g).fold(if lo { f64::INFINITY } else { f64::NEG_INFINITY }, |acc, v| {
                if lo {
                    acc.min(v)
                } else {
                    acc.max(v)
                }
            })
        };
        (f(|p| p.x, true), f(|p| p.x, false), f(|p| p.y, true), f(|p| p.y, false))
    };
    let (a0, a1, a2, a3) = bounds(a);
    let (b0, b1, b2, b3) = bounds(b);
    let (x0, x1, y0, y1) = (a0.max(b0), a1.min(b1), a2.max(b2), a3.min(b3));
    let mut i = (x0 / PITCH).floor() as i64;
    while (i as f64) * PITCH <= x1 {
        let mut j = (y0 / PITCH).floor() as i64;
        while (j as f64) * PITCH <= y1 {
            let p = BevPoint::new(i as f64 * PITCH, j as f64 * PITCH);
            if a.contains(p) && b.contains(p) {
                return true;
            }
            j += 1;
        }
        i += 1;
    }
    false
}

/// Largest projection gap over the four edge normals; negative values give
/// the overlap depth.
fn signed_separation(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let proj = |r: &OrientedRect, ax: BevPoint| {
        let d = r.corners().map(|p| p.x * ax.x + p.y * ax.y);
        (d.iter().copied().fold(f64::INFINITY, f64::min), d.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    a.axes()
        .into_iter()
        .chain(b.axes())
        .map(|ax| {
            let (a0, a1) = proj(a, ax);
            let (b0, b1) = proj(b, ax);
            (b0 - a1).max(a0 - b1)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_06_collision_kernel() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rect = || {
        OrientedRect::new(
            BevPoint::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)),
            rng.random_range(0.3..5.0),
            rng.random_range(0.3..2.5),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    };
    let (mut agree, mut counted, mut banded, mut hits) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let (a, b) = (rect(), rect());
        if signed_separation(&a, &b).abs() < 0.02 {
            banded += 1;
            continue;
        }
        let sat = rect_intersects(&a, &b);
        hits += sat as usize;
        counted += 1;
        agree += (sat == raster_intersects(&a, &b)) as usize;
    }
    let elapsed = t.elapsed();
    let rate = agree as f64 / counted as f64;
    let pass = rate >= 0.999 && elapsed < Duration::from_secs(30);
    report(
        6,
        "collision kernel",
        pass,
        &format!(
            "SAT vs 1 cm raster agree on {agree}/{counted} pairs ({:.2}%), {hits} intersecting, {banded} in the ±2 cm band; {}",
            100.0 * rate,
            secs(elapsed)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_l2_closed_forms() {
    let gt: Vec<BevPoint> = (1..=6).map(|k| BevPoint::new(0.2 * k as f64, 2.5 * k as f64)).collect();
    let shifted: Vec<BevPoint> = gt.iter().map(|&p| p + BevPoint::new(0.3, 0.4)).collect();
    let a = l2_horizons(&shifted, &gt, L2Convention::Stp3).unwrap();
    let mut last = gt.clone();
    last[5] = last[5] + BevPoint::new(0.0, -0.6);
    let b = l2_horizons(&last, &gt, L2Convention::Stp3).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let pass = [a.h1, a.h2, a.h3, a.avg].iter().all(|&v| close(v, 0.5))
        && close(b.h1, 0.0)
        && close(b.h2, 0.0)
        && close(b.h3, 0.1);
    report(
        7,
        "L2 closed forms",
        pass,
        &format!(
            "offset (0.3,0.4): {:.15}/{:.15}/{:.15}/avg {:.15}; 0.6 m at 3 s: {:.15}/{:.15}/{:.15}",
            a.h1, a.h2, a.h3, a.avg, b.h1, b.h2, b.h3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_gradient_check() {
    let t = Instant::now();
    let config = PlannerConfig {
        d_q: 4,
        d_llm: 8,
        layers: 1,
        heads: 2,
        context: 160,
        queries: QuerySimConfig {
            d_q: 4,
            top_k: 4,
            memory_depth: 1,
            ..QuerySimConfig::default()
        },
        ..PlannerConfig::default()
    };
    let scenes = generate_scenes(8, 1, &SceneConfig::default()).unwrap();
    let records = planning_records(&scenes, &ChainSpec::new(vec![ChainElement::V, ChainElement::P]).unwrap());
    let mut model = Model::new(config.clone(), 8).unwrap();
    // move the zero-initialized reference-point projectors off zero so
    // their gradients flow into every other tensor too
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    for s in model.params.slots.iter_mut() {
        for x in s.rp_w.data_mut().iter_mut().chain(s.rp_b.data_mut().iter_mut()) {
            *x = rng.random_range(-0.1..0.1);
        }
    }
    let ex = build_examples(&records, &scenes, &config, &model.vocab).unwrap().remove(0);
    let checks = gradient_check(&model, &ex, 1e-5).unwrap();
    let worst = checks
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .unwrap();
    let covers = ["det.proj_w", "det.rp_w", "map.proj_w", "map.rp_w"]
        .iter()
        .all(|n| checks.iter().any(|c| c.name == *n && c.analytic_norm > 0.0));
    let elapsed = t.elapsed();
    let pass = worst.rel_error <= 1e-4 && covers && elapsed < Duration::from_secs(60);
    report(
        8,
        "gradient check",
        pass,
        &format!(
            "{} tensors, worst relative error {:.2e} ({}), projector and reference-point projector covered: {covers}; {}",
            checks.len(),
            worst.rel_error,
            worst.name,
            secs(elapsed)
        ),
    );
    assert!(pass);
}

fn mean_l2(
    model: Option<&Model>,
    records: &[QaRecord],
    scenes: &[Scene],
    config: &PlannerConfig,
) -> (f64, usize) {
    let preds: Vec<PredictionRecord> = match model {
        Some(m) => {
            let examples = build_examples(records, scenes, config, &m.vocab).unwrap();
            use rayon::prelude::*;
            records
                .par_iter()
                .zip(examples.par_iter())
                .map(|(r, ex)| {
                    let g = m.generate(ex, DecodeMode::Greedy, 96).unwrap();
                    PredictionRecord::from_text(r.meta.scene_id, r.meta.frame, r.task, g.text, r.meta.chain.clone())
                })
                .collect()
        }
        None => records
            .iter()
            .map(|r| PredictionRecord {
                waypoints: Some(vec![BevPoint::ORIGIN; 6]),
                answer_text: None,
                ..PredictionRecord::from_text(r.meta.scene_id, r.meta.frame, r.task, String::new(), None)
            })
            .collect(),
    };
    let report = evaluate(&preds, scenes, &EvalOptions::default()).unwrap();
    (report.l2.unwrap().avg, report.samples.malformed)
}

#[test]
fn criterion_09_learning_signal() {
    let t = Instant::now();
    let all = generate_scenes(1, 2200, &SceneConfig::default()).unwrap();
    let (train_scenes, test_scenes) = all.split_at(2000);
    let chain = ChainSpec::vap();
    let train_records = planning_records(train_scenes, &chain);
    let test_records = planning_records(test_scenes, &chain);
    let train_cfg = TrainConfig {
        learning_rate: 1e-3,
        epochs: 2,
        ..TrainConfig::default()
    };
    let run = |inject: bool| {
        let config = PlannerConfig {
            inject_queries: inject,
            ..PlannerConfig::default()
        };
        let examples = build_examples(&train_records, train_scenes, &config, &Vocab::build()).unwrap();
        let (model, _) = train(&examples, config.clone(), &train_cfg, 0).unwrap();
        mean_l2(Some(&model), &test_records, test_scenes, &config)
    };
    let ((l2_3d, bad_3d), (l2_text, bad_text)) =
        std::thread::scope(|s| {
            let a = s.spawn(|| run(true));
            let b = s.spawn(|| run(false));
            (a.join().unwrap(), b.join().unwrap())
        });
    let (baseline, _) = mean_l2(None, &test_records, test_scenes, &PlannerConfig::default());
    let elapsed = t.elapsed();
    let pass = l2_3d < baseline && l2_3d < l2_text && elapsed < Duration::from_secs(900);
    report(
        9,
        "end-to-end learning signal",
        pass,
        &format!(
            "avg L2 on {} held-out samples: 3D tokens {l2_3d:.3} m ({bad_3d} malformed), text only {l2_text:.3} m ({bad_text} malformed), constant position {baseline:.3} m; {}",
            test_records.len(),
            secs(elapsed)
        ),
    );
    assert!(pass);
}

const DETERMINISM_CONFIG: &str = r#"
seed = 10
[planner]
d_llm = 32
layers = 1
heads = 2
[planner.queries]
top_k = 32
memory_depth = 2
[train]
learning_rate = 1e-3
"#;

fn run_pipeline(dir: &Path, out: &str) {
    let config = dir.join("run.toml");
    let out = dir.join(out);
    let path = |f: &str| out.join(f).to_string_lossy().into_owned();
    let (scenes, qa, ckpt, preds) = (path("scenes.jsonl"), path("qa.jsonl"), path("checkpoint.json"), path("predictions.jsonl"));
    let steps: [Vec<&str>; 5] = [
        vec!["gen", "--n", "40"],
        vec!["encode", "--scenes", &scenes],
        vec!["train", "--dataset", &qa, "--scenes", &scenes],
        vec!["infer", "--dataset", &qa, "--scenes", &scenes, "--checkpoint", &ckpt],
        vec!["eval", "--predictions", &preds, "--scenes", &scenes],
    ];
    for step in steps {
        let mut args = vec!["atlasbench", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend(&step);
        let cli = Cli::try_parse_from(&args).unwrap();
        if let Err(e) = atlasbench_cli::run(&cli) {
            panic!("{step:?}: {e}");
        }
    }
}

#[test]
fn criterion_10_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), DETERMINISM_CONFIG).unwrap();
    run_pipeline(dir.path(), "first");
    run_pipeline(dir.path(), "second");
    let same = ["report.json", "report.csv"].iter().all(|f| {
        std::fs::read(dir.path().join("first").join(f)).unwrap() == std::fs::read(dir.path().join("second").join(f)).unwrap()
    });
    let csv = std::fs::read_to_string(dir.path().join("first/report.csv")).unwrap();
    report(
        10,
        "determinism",
        same,
        &format!(
            "gen→encode→train→infer→eval twice, reports byte-identical: {same} (row {}); {}",
            csv.lines().nth(1).unwrap_or(""),
            secs(t.elapsed())
        ),
    );
    assert!(same);
}
