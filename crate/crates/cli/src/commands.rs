use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::plot;
use crate::{Cli, Command, Mode};
use atlasbench_core::metrics::{
    evaluate, planning_prediction, read_predictions, write_predictions, MetricReport, PredictionRecord,
};
use atlasbench_core::planner::{build_examples, train, Checkpoint, DecodeMode, Vocab};
use atlasbench_core::qa::{build_dataset, planning_target, read_records, write_records, ChainSpec, PlanningAnswer, QaRecord, Task};
use atlasbench_core::scene::{generate_scenes, import_scenes, export_scenes, Scene};
use atlasbench_core::util::derive_seed;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

struct Ctx {
    config: RunConfig,
    config_path: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn manifest(&self, sub: &str) -> RunManifest {
        RunManifest::new(sub, self.config_path.as_deref(), self.seed)
    }

    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, sub: &str, inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
        let mut all: Vec<&Path> = inputs.to_vec();
        if let Some(c) = &self.config_path {
            all.push(c);
        }
        self.manifest(sub).write(&self.out, &all, outputs)
    }
}

fn context(cli: &Cli) -> Result<Ctx, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cli.chain {
        config.planner.chain = c.clone();
    }
    if let Some(r) = cli.rp_embedding {
        config.planner.rp_embedding = r;
    }
    if let Some(d) = cli.ego_dims {
        config.eval.ego_dims = d;
    }
    if let Some(l) = cli.l2_convention {
        config.eval.l2_convention = l;
    }
    let seed = cli.seed.unwrap_or(config.seed);
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    Ok(Ctx {
        config,
        config_path: cli.config.clone(),
        seed,
        out: cli.out.clone(),
    })
}

fn load_scenes(path: &Path) -> Result<Vec<Scene>, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("{}: no such file", path.display())));
    }
    let scenes = import_scenes(path)?;
    if scenes.is_empty() {
        return Err(CliError::Data(format!("{}: no scenes", path.display())));
    }
    Ok(scenes)
}

fn load_records(path: &Path, tasks: &[Task]) -> Result<Vec<QaRecord>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let records: Vec<QaRecord> = read_records(BufReader::new(f))?
        .into_iter()
        .filter(|r| tasks.contains(&r.task))
        .collect();
    if records.is_empty() {
        let names: Vec<&str> = tasks.iter().map(|t| t.name()).collect();
        return Err(CliError::Data(format!(
            "{}: no records for tasks {}",
            path.display(),
            names.join(",")
        )));
    }
    Ok(records)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = context(cli)?;
    match &cli.command {
        Command::Gen { n } => gen(&ctx, *n),
        Command::Encode { scenes, tasks } => encode(&ctx, scenes, tasks),
        Command::Train {
            dataset,
            scenes,
            tasks,
            epochs,
            learning_rate,
            no_queries,
        } => {
            let mut ctx = ctx;
            if let Some(e) = epochs {
                ctx.config.train.epochs = *e;
            }
            if let Some(lr) = learning_rate {
                ctx.config.train.learning_rate = *lr;
            }
            if *no_queries {
                ctx.config.planner.inject_queries = false;
            }
            cmd_train(&ctx, dataset, scenes, tasks)
        }
        Command::Infer {
            dataset,
            scenes,
            checkpoint,
            mode,
            temperature,
            max_new,
            tasks,
        } => infer(&ctx, dataset, scenes, checkpoint, *mode, *temperature, *max_new, tasks),
        Command::Eval {
            predictions,
            scenes,
            method,
        } => eval(&ctx, predictions, scenes, method.as_deref()),
        Command::Plot {
            report,
            predictions,
            scenes,
            max_plots,
        } => cmd_plot(&ctx, report.as_deref(), predictions.as_deref(), scenes.as_deref(), *max_plots),
    }
}

fn gen(ctx: &Ctx, n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let scenes = generate_scenes(ctx.seed, n, &ctx.config.scene)?;
    let out = ctx.output("scenes.jsonl");
    export_scenes(&scenes, &out)?;
    ctx.finish("gen", &[], &[&out])
}

fn encode(ctx: &Ctx, scenes_path: &Path, tasks: &[Task]) -> Result<(), CliError> {
    if tasks.is_empty() {
        return Err(CliError::Usage("--tasks must name at least one task".into()));
    }
    let scenes = load_scenes(scenes_path)?;
    let pairs = build_dataset(&scenes, tasks, &ctx.config.planner.chain, ctx.seed)?;
    let records: Vec<QaRecord> = pairs.into_iter().map(|p| p.record).collect();
    let out = ctx.output("qa.jsonl");
    let mut w = create(&out)?;
    write_records(&records, &mut w)?;
    w.flush().map_err(|e| CliError::io(&out, e))?;
    drop(w);
    ctx.finish("encode", &[scenes_path], &[&out])
}

fn cmd_train(ctx: &Ctx, dataset: &Path, scenes_path: &Path, tasks: &[Task]) -> Result<(), CliError> {
    let config = ctx.config.planner.clone();
    config.validate()?;
    ctx.config.train.validate()?;
    let scenes = load_scenes(scenes_path)?;
    let records = load_records(dataset, tasks)?;
    let examples = build_examples(&records, &scenes, &config, &Vocab::build())?;
    let (model, report) = train(&examples, config, &ctx.config.train, ctx.seed)?;
    let ckpt_path = ctx.output("checkpoint.json");
    Checkpoint::from_model(&model, ctx.seed, report.steps as u64).save(&ckpt_path)?;
    let report_path = ctx.output("train_report.json");
    write_text(
        &report_path,
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    eprintln!(
        "trained {} steps: probe loss {:.4} -> {:.4}",
        report.steps, report.initial_loss, report.final_loss
    );
    ctx.finish("train", &[dataset, scenes_path], &[&ckpt_path, &report_path])
}

#[allow(clippy::too_many_arguments)]
fn infer(
    ctx: &Ctx,
    dataset: &Path,
    scenes_path: &Path,
    checkpoint: &Path,
    mode: Mode,
    temperature: f64,
    max_new: usize,
    tasks: &[Task],
) -> Result<(), CliError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(CliError::Usage(format!("--temperature must be positive, got {temperature}")));
    }
    if !checkpoint.exists() {
        return Err(CliError::Data(format!("{}: no such file", checkpoint.display())));
    }
    let model = Checkpoint::load(checkpoint)?.to_model()?;
    let scenes = load_scenes(scenes_path)?;
    let records = load_records(dataset, tasks)?;
    let examples = build_examples(&records, &scenes, &model.config, &model.vocab)?;
    let preds: Vec<PredictionRecord> = records
        .par_iter()
        .zip(examples.par_iter())
        .map(|(r, ex)| {
            let decode = match mode {
                Mode::Greedy => DecodeMode::Greedy,
                Mode::Sample => DecodeMode::Sample {
                    temperature,
                    seed: derive_seed(ctx.seed, &[r.meta.scene_id, r.meta.frame as u64, r.task as u64]),
                },
            };
            let g = model.generate(ex, decode, max_new)?;
            Ok(PredictionRecord::from_text(
                r.meta.scene_id,
                r.meta.frame,
                r.task,
                g.text,
                r.meta.chain.clone(),
            ))
        })
        .collect::<Result<_, atlasbench_core::planner::PlannerError>>()?;
    let out = ctx.output("predictions.jsonl");
    let mut w = create(&out)?;
    write_predictions(&preds, &mut w)?;
    w.flush().map_err(|e| CliError::io(&out, e))?;
    drop(w);
    ctx.finish("infer", &[dataset, scenes_path, checkpoint], &[&out])
}

fn eval(ctx: &Ctx, predictions: &Path, scenes_path: &Path, method: Option<&str>) -> Result<(), CliError> {
    let f = File::open(predictions).map_err(|e| CliError::io(predictions, e))?;
    let preds = read_predictions(BufReader::new(f))?;
    let scenes = load_scenes(scenes_path)?;
    let mut opts = ctx.config.eval_options()?;
    if let Some(m) = method {
        opts.method = m.to_string();
    }
    let report = evaluate(&preds, &scenes, &opts)?;
    let json = ctx.output("report.json");
    let csv = ctx.output("report.csv");
    write_text(&json, &report.to_json())?;
    write_text(&csv, &report.to_csv())?;
    ctx.finish("eval", &[predictions, scenes_path], &[&json, &csv])
}

fn cmd_plot(
    ctx: &Ctx,
    report: Option<&Path>,
    predictions: Option<&Path>,
    scenes: Option<&Path>,
    max_plots: usize,
) -> Result<(), CliError> {
    if report.is_none() && predictions.is_none() {
        return Err(CliError::Usage("plot needs --report or --predictions with --scenes".into()));
    }
    let mut inputs: Vec<&Path> = Vec::new();
    let mut outputs: Vec<PathBuf> = Vec::new();
    if let Some(path) = report {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let r: MetricReport =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let table = ctx.output("planning.csv");
        write_text(&table, &r.to_csv())?;
        outputs.push(table);
        if !r.pr_curves.is_empty() {
            let pr = ctx.output("pr_curves.svg");
            write_text(&pr, &plot::pr_svg(&r.pr_curves))?;
            outputs.push(pr);
        }
        inputs.push(path);
    }
    if let (Some(pred_path), Some(scene_path)) = (predictions, scenes) {
        let f = File::open(pred_path).map_err(|e| CliError::io(pred_path, e))?;
        let mut preds: Vec<PredictionRecord> = read_predictions(BufReader::new(f))?
            .into_iter()
            .filter(|p| p.task == Task::Planning)
            .collect();
        if preds.is_empty() {
            return Err(CliError::Data(format!("{}: no planning predictions", pred_path.display())));
        }
        preds.sort_by_key(|p| (p.scene_id, p.frame));
        let scenes = load_scenes(scene_path)?;
        let footprint = ctx.config.eval_options()?.footprint;
        for p in preds.iter().take(max_plots) {
            let scene = scenes
                .get(p.scene_id as usize)
                .ok_or_else(|| CliError::Data(format!("prediction names unknown scene {}", p.scene_id)))?;
            let (pred, _) = planning_prediction(p)?;
            let target = planning_target(scene, p.frame)?;
            let gt = PlanningAnswer::from_target(&target, &ChainSpec::vap()).waypoints_m();
            let path = ctx.output(&format!("plan_s{}_f{}.svg", p.scene_id, p.frame));
            write_text(&path, &plot::bev_svg(scene, p.frame, &pred, &gt, &footprint))?;
            outputs.push(path);
        }
        inputs.push(pred_path);
        inputs.push(scene_path);
    }
    let outs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    ctx.finish("plot", &inputs, &outs)
}
