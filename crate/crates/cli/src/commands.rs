use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use unobstruct::agents::{run_agent, Agent};
use unobstruct::gen::{generate_scenes, generate_suite, ShapeFamily};
use unobstruct::graph::SceneRelations;
use unobstruct::io::{read_json, read_jsonl, write_json, write_jsonl};
use unobstruct::manifest::{Manifest, PredictionRecord};
use unobstruct::metrics::{evaluate_dataset, StratifiedReport};
use unobstruct::rewards::{reward_batch, RewardConfig};
use unobstruct::scene::{load_scene, ObjectId};
use unobstruct::vqa::{synth_nlp, synth_som, Cues, VqaRecord};
use unobstruct::{
    Difficulty, Error, Execution, GraphRecord, RelationGraph, Result, SceneRecord, Setting, SCHEMA_VERSION,
};

use crate::config::RunConfig;
use crate::{
    AgentArg, BuildGraphsArgs, Command, CueArgs, EvaluateArgs, GenScenesArgs, ReportArgs, ReportFormat,
    RewardArgs, RunAgentArgs, SettingArg, Shape, SynthVqaArgs,
};

pub struct Context {
    pub cfg: RunConfig,
    pub exec: Execution,
    pub out_dir: PathBuf,
}

impl Context {
    fn output(&self, explicit: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
        let path = explicit.unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(path)
    }
}

pub fn run(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::GenScenes(a) => gen_scenes(ctx, a),
        Command::BuildGraphs(a) => build_graphs(ctx, a),
        Command::SynthVqa(a) => synth_vqa(ctx, a),
        Command::RunAgent(a) => agent(ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
        Command::Reward(a) => reward(ctx, a),
        Command::Report(a) => report(a),
    }
}

/// One line of a scene manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneEntry {
    #[serde(default = "schema_version")]
    schema_version: u32,
    scene_id: String,
    /// Relative to the manifest's directory.
    scene_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficulty: Option<Difficulty>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn base_dir(file: &Path) -> &Path {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// `path` relative to `base` when it lies below it, otherwise absolute.
fn relative_to(path: &Path, base: &Path) -> String {
    let (Ok(p), Ok(b)) = (path.canonicalize(), base.canonicalize()) else {
        return path.display().to_string();
    };
    match p.strip_prefix(&b) {
        Ok(rel) => rel.display().to_string(),
        Err(_) => p.display().to_string(),
    }
}

fn scene_file_name(scene_id: &str) -> String {
    let stem: String = scene_id
        .rsplit('/')
        .next()
        .unwrap_or(scene_id)
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}.json")
}

fn gen_scenes(ctx: &Context, a: GenScenesArgs) -> Result<()> {
    let mut g = ctx.cfg.gen_config();
    if let Some(v) = a.seed {
        g.seed = v;
    }
    if let Some(v) = a.min_objects {
        g.min_objects = v;
    }
    if let Some(v) = a.max_objects {
        g.max_objects = v;
    }
    if let Some(v) = a.width {
        g.width = v;
    }
    if let Some(v) = a.height {
        g.height = v;
    }
    if let Some(v) = a.overlap_bias {
        g.overlap_bias = v;
    }
    if let Some(s) = a.shape {
        g.shape = match s {
            Shape::Rectangles => ShapeFamily::Rectangles,
            Shape::ConvexPolygons => ShapeFamily::ConvexPolygons,
        };
    }
    let buckets: BTreeMap<Difficulty, usize> = [
        (Difficulty::NoOcc, a.no_occ),
        (Difficulty::Easy, a.easy),
        (Difficulty::Medium, a.medium),
        (Difficulty::Hard, a.hard),
    ]
    .into_iter()
    .filter_map(|(d, n)| n.map(|n| (d, n)))
    .collect();

    let manifest = ctx.output(a.out, "scenes.jsonl")?;
    let scene_dir = base_dir(&manifest).join("scenes");
    std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;

    let mut scenes: Vec<SceneRecord> = Vec::new();
    let mut entries = Vec::new();
    let entry = |s: &SceneRecord, target, difficulty| SceneEntry {
        schema_version: SCHEMA_VERSION,
        scene_id: s.scene_id.clone(),
        scene_path: format!("scenes/{}", scene_file_name(&s.scene_id)),
        target,
        difficulty,
    };
    if buckets.is_empty() {
        scenes = generate_scenes(&g, a.count, ctx.exec)?;
        entries.extend(scenes.iter().map(|s| entry(s, None, None)));
    } else {
        for item in generate_suite(&g, &buckets, a.max_scenes)? {
            entries.push(entry(&item.scene, Some(item.target), Some(item.difficulty)));
            if scenes.last().map(|s| &s.scene_id) != Some(&item.scene.scene_id) {
                scenes.push(item.scene);
            }
        }
    }
    for s in &scenes {
        s.save(&scene_dir.join(scene_file_name(&s.scene_id)))?;
    }
    write_jsonl(&manifest, &entries)?;
    info!(
        "wrote {} scenes and {} manifest lines to {}",
        scenes.len(),
        entries.len(),
        manifest.display()
    );
    Ok(())
}

/// Scenes to process and, per scene, the targets asked for (`None` = all).
fn collect_scene_inputs(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, Option<BTreeSet<ObjectId>>)>> {
    let mut jobs: Vec<(PathBuf, Option<BTreeSet<ObjectId>>)> = Vec::new();
    let mut index: HashMap<PathBuf, usize> = HashMap::new();
    let mut add = |path: PathBuf, target: Option<ObjectId>| {
        let i = *index.entry(path.clone()).or_insert_with(|| {
            jobs.push((path, Some(BTreeSet::new())));
            jobs.len() - 1
        });
        match (target, &mut jobs[i].1) {
            (Some(t), Some(set)) => {
                set.insert(t);
            }
            (None, slot) => *slot = None,
            _ => {}
        }
    };
    for input in inputs {
        if input.extension().is_some_and(|e| e == "jsonl") {
            let base = base_dir(input);
            for e in read_jsonl::<SceneEntry>(input)? {
                add(base.join(&e.scene_path), e.target);
            }
        } else {
            add(input.clone(), None);
        }
    }
    Ok(jobs)
}

fn build_graphs(ctx: &Context, a: BuildGraphsArgs) -> Result<()> {
    let cap = a.path_cap.unwrap_or(ctx.cfg.path_cap);
    let geometry = ctx.cfg.geometry;
    let out = ctx.output(a.out, "graphs.jsonl")?;

    if let Some(rel_path) = a.relations {
        let docs: Vec<SceneRelations> = read_jsonl(&rel_path)?;
        let per_scene = ctx.exec.map(&docs, |d| d.graph_records(&geometry.degrees, cap));
        let records: Vec<GraphRecord> = per_scene.into_iter().collect::<Result<Vec<_>>>()?.concat();
        write_jsonl(&out, &records)?;
        info!("wrote {} graph records to {}", records.len(), out.display());
        return Ok(());
    }

    if a.inputs.is_empty() {
        return Err(Error::Validation(
            "build-graphs needs scene files, a scene manifest or --relations".into(),
        ));
    }
    let jobs = collect_scene_inputs(&a.inputs)?;
    let out_base = base_dir(&out).to_path_buf();
    let results = ctx.exec.map(
        &jobs,
        |(path, targets)| -> Result<(Vec<GraphRecord>, SceneRelations)> {
            let scene = load_scene(path)?;
            let rg = RelationGraph::from_scene(&scene, &geometry)?;
            let rel_path = relative_to(path, &out_base);
            let mut records = Vec::new();
            for &t in rg.ids() {
                if targets.as_ref().is_some_and(|set| !set.contains(&t)) {
                    continue;
                }
                let mut r = GraphRecord::new(&scene.scene_id, &scene.view_id, &rg.target_graph(t)?, cap)?;
                r.scene_path = Some(rel_path.clone());
                records.push(r);
            }
            if let Some(set) = targets {
                if let Some(missing) = set.iter().find(|t| !rg.ids().contains(t)) {
                    return Err(Error::UnknownObject(*missing));
                }
            }
            debug!("{}: {} records", path.display(), records.len());
            Ok((
                records,
                SceneRelations::from_graph(&scene.scene_id, &scene.view_id, &rg),
            ))
        },
    );
    let mut records = Vec::new();
    let mut relations = Vec::new();
    for r in results {
        let (recs, rel) = r?;
        records.extend(recs);
        relations.push(rel);
    }
    write_jsonl(&out, &records)?;
    // Relations land next to the graph records unless placed explicitly.
    let rel_out = ctx.output(
        a.relations_out.or_else(|| Some(out_base.join("relations.jsonl"))),
        "relations.jsonl",
    )?;
    write_jsonl(&rel_out, &relations)?;
    info!("wrote {} graph records to {}", records.len(), out.display());
    Ok(())
}

fn merge_cues(base: Cues, a: &CueArgs) -> Cues {
    Cues {
        ratio: a.ratio.unwrap_or(base.ratio),
        contact_point: a.contact_point.unwrap_or(base.contact_point),
        degree_word: a.degree_word.unwrap_or(base.degree_word),
        short: a.short.unwrap_or(base.short),
    }
}

fn synth_vqa(ctx: &Context, a: SynthVqaArgs) -> Result<()> {
    let settings: &[Setting] = match a.setting {
        SettingArg::Som => &[Setting::OracleSom],
        SettingArg::Nlp => &[Setting::Nlp],
        SettingArg::Both => &[Setting::OracleSom, Setting::Nlp],
    };
    let cues = merge_cues(ctx.cfg.cues, &a.cues);
    let records: Vec<GraphRecord> = read_jsonl(&a.graphs)?;
    let base = base_dir(&a.graphs);
    let out = ctx.output(a.out, "vqa.jsonl")?;
    let out_base = base_dir(&out).to_path_buf();

    let mut scene_paths: Vec<&str> = Vec::new();
    for r in &records {
        let p = r.scene_path.as_deref().ok_or_else(|| {
            Error::Validation(format!(
                "graph record {} target {} has no scene_path; synth-vqa needs the scene",
                r.scene_id, r.target_object
            ))
        })?;
        if !scene_paths.contains(&p) {
            scene_paths.push(p);
        }
    }
    let loaded = ctx
        .exec
        .map(&scene_paths, |p| -> Result<(SceneRecord, RelationGraph)> {
            let scene = load_scene(&base.join(p))?;
            let rg = RelationGraph::from_scene(&scene, &ctx.cfg.geometry)?;
            Ok((scene, rg))
        });
    let mut scenes = HashMap::new();
    for (p, s) in scene_paths.iter().zip(loaded) {
        scenes.insert(*p, s?);
    }

    let cap = ctx.cfg.path_cap;
    let per_record = ctx.exec.map(&records, |rec| -> Result<Vec<VqaRecord>> {
        let sp = rec.scene_path.as_deref().expect("checked above");
        let (scene, rg) = &scenes[sp];
        let graph = rg.target_graph(rec.target_object)?;
        let fresh = GraphRecord::new(&rec.scene_id, &rec.view_id, &graph, cap)?;
        let stored = GraphRecord {
            scene_path: None,
            schema_version: SCHEMA_VERSION,
            ..rec.clone()
        };
        if fresh != stored {
            return Err(Error::Validation(format!(
                "graph record {} target {} does not match its scene; rebuild the graphs",
                rec.scene_id, rec.target_object
            )));
        }
        let scene_ref = relative_to(&base.join(sp), &out_base);
        let mut out = Vec::new();
        for &setting in settings {
            let sample = match setting {
                Setting::OracleSom => Some(synth_som(&graph, rg, rec, &cues)),
                Setting::Nlp => synth_nlp(&graph, rg, rec, scene, &cues)?,
            };
            match sample {
                Some(s) => out.push(VqaRecord::new(s, Some(scene_ref.clone()))),
                None => debug!(
                    "skipped {} target {} (indescribable object)",
                    rec.scene_id, rec.target_object
                ),
            }
        }
        Ok(out)
    });
    let vqa: Vec<VqaRecord> = per_record.into_iter().collect::<Result<Vec<_>>>()?.concat();
    let expected = records.len() * settings.len();
    if vqa.len() < expected {
        warn!(
            "skipped {} natural-language samples with indescribable objects",
            expected - vqa.len()
        );
    }
    write_jsonl(&out, &vqa)?;
    info!("wrote {} VQA records to {}", vqa.len(), out.display());
    Ok(())
}

fn agent(ctx: &Context, a: RunAgentArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let mut opts = ctx.cfg.agent_options();
    opts.cues = merge_cues(opts.cues, &a.cues);
    let agent = match a.agent {
        AgentArg::Oracle => Agent::Oracle,
        AgentArg::Corrupted => {
            let mut n = ctx.cfg.noise;
            n.seed = a.noise_seed.unwrap_or(n.seed);
            n.p_drop_path = a.p_drop_path.unwrap_or(n.p_drop_path);
            n.p_drop_answer = a.p_drop_answer.unwrap_or(n.p_drop_answer);
            n.p_swap = a.p_swap.unwrap_or(n.p_swap);
            n.p_break_format = a.p_break_format.unwrap_or(n.p_break_format);
            Agent::Corrupted(n)
        }
    };
    let preds = run_agent(&manifest, &agent, &opts, ctx.exec)?;
    let out = ctx.output(a.out, "predictions.jsonl")?;
    write_jsonl(&out, &preds)?;
    info!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(())
}

fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let preds: Vec<PredictionRecord> = read_jsonl(&a.predictions)?;
    let radius = a.radius.unwrap_or(ctx.cfg.radius);
    let ev = evaluate_dataset(&preds, &manifest, radius, ctx.exec)?;
    let table = ev.report.to_table();
    write_json(&ctx.output(None, "report.json")?, &ev.report)?;
    let txt = ctx.output(None, "report.txt")?;
    std::fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
    write_jsonl(&ctx.output(None, "samples.jsonl")?, &ev.samples)?;
    print!("{table}");
    Ok(())
}

fn reward(ctx: &Context, a: RewardArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let preds: Vec<PredictionRecord> = read_jsonl(&a.predictions)?;
    let cfg = RewardConfig::new(
        a.lambda_fmt.unwrap_or(ctx.cfg.reward.lambda_fmt),
        a.lambda_task.unwrap_or(ctx.cfg.reward.lambda_task),
    )?;
    let radius = a.radius.unwrap_or(ctx.cfg.radius);
    let rewards = reward_batch(&preds, &manifest, &cfg, radius, ctx.exec)?;
    let out = ctx.output(a.out, "rewards.jsonl")?;
    write_jsonl(&out, &rewards)?;
    let mean = if rewards.is_empty() {
        0.0
    } else {
        rewards.iter().map(|r| r.r).sum::<f64>() / rewards.len() as f64
    };
    println!(
        "samples {}  mean reward {:.4}  max {:.4}",
        rewards.len(),
        mean,
        cfg.max_reward()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let report: StratifiedReport = read_json(&a.input)?;
    match a.format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("reports serialize")
        ),
    }
    Ok(())
}
