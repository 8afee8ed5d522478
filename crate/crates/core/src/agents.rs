//! Reference agents: an oracle that emits the ground-truth trace and a
//! corrupted oracle with controlled noise.
//!
//! Noise is applied to the structured ground truth (paths and answer set)
//! before rendering, so corrupted outputs use the same templates as the
//! oracle. Every random decision draws its uniform variate whether or not it
//! fires, and fires iff the variate is below its probability. Raising a
//! probability therefore only adds corruptions on top of those already made.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gen::derive_seed;
use crate::geometry::GeometryConfig;
use crate::graph::{GraphRecord, RelationGraph, DEFAULT_PATH_CAP};
use crate::manifest::{Manifest, PredictionRecord};
use crate::scene::{ObjectId, SceneRecord};
use crate::trace::Setting;
use crate::vqa::{render_nlp, render_som, Cues};

/// Rendering options shared by both agents. They must match the options
/// used to synthesize the ground truth for the oracle to be exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentOptions {
    pub geometry: GeometryConfig,
    pub cues: Cues,
    pub path_cap: usize,
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            geometry: GeometryConfig::default(),
            cues: Cues::default(),
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub seed: u64,
    /// Drop a whole reasoning path.
    pub p_drop_path: f64,
    /// Drop one answer element.
    pub p_drop_answer: f64,
    /// Replace an object id with one outside the target's graph.
    pub p_swap: f64,
    /// Remove the closing answer tag.
    pub p_break_format: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_drop_path", self.p_drop_path),
            ("p_drop_answer", self.p_drop_answer),
            ("p_swap", self.p_swap),
            ("p_break_format", self.p_break_format),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agent {
    Oracle,
    Corrupted(NoiseSpec),
}

struct Structure {
    paths: Vec<Vec<ObjectId>>,
    answer: Vec<ObjectId>,
}

fn ground_truth(
    scene: &SceneRecord,
    relations: &RelationGraph,
    target: ObjectId,
    cap: usize,
) -> Result<GraphRecord> {
    GraphRecord::new(
        &scene.scene_id,
        &scene.view_id,
        &relations.target_graph(target)?,
        cap,
    )
}

fn render(
    scene: &SceneRecord,
    relations: &RelationGraph,
    target: ObjectId,
    setting: Setting,
    s: &Structure,
    cues: &Cues,
) -> Result<String> {
    match setting {
        Setting::OracleSom => Ok(render_som(target, &s.paths, &s.answer, relations, cues)),
        Setting::Nlp => render_nlp(target, &s.paths, &s.answer, scene, relations, cues),
    }
}

/// The ground-truth answer text for `target`.
pub fn oracle_predict(
    scene: &SceneRecord,
    target: ObjectId,
    setting: Setting,
    opts: &AgentOptions,
) -> Result<String> {
    let relations = RelationGraph::from_scene(scene, &opts.geometry)?;
    oracle_with(scene, &relations, target, setting, opts)
}

fn oracle_with(
    scene: &SceneRecord,
    relations: &RelationGraph,
    target: ObjectId,
    setting: Setting,
    opts: &AgentOptions,
) -> Result<String> {
    let gt = ground_truth(scene, relations, target, opts.path_cap)?;
    let s = Structure {
        answer: gt.answer_set().into_iter().collect(),
        paths: gt.obstruction_paths,
    };
    render(scene, relations, target, setting, &s, &opts.cues)
}

/// FNV-1a, used to give each sample its own stream.
fn stable_hash(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Oracle output after noise. `key` (usually the sample id) selects the
/// random stream, so results do not depend on evaluation order.
pub fn corrupted_predict(
    scene: &SceneRecord,
    target: ObjectId,
    setting: Setting,
    opts: &AgentOptions,
    noise: &NoiseSpec,
    key: &str,
) -> Result<String> {
    noise.validate()?;
    let relations = RelationGraph::from_scene(scene, &opts.geometry)?;
    corrupted_with(scene, &relations, target, setting, opts, noise, key)
}

fn corrupted_with(
    scene: &SceneRecord,
    relations: &RelationGraph,
    target: ObjectId,
    setting: Setting,
    opts: &AgentOptions,
    noise: &NoiseSpec,
    key: &str,
) -> Result<String> {
    let gt = ground_truth(scene, relations, target, opts.path_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(noise.seed, stable_hash(key)));
    let graph_nodes = gt.graph().nodes;
    let outside: Vec<ObjectId> = scene.ids().filter(|id| !graph_nodes.contains(id)).collect();

    let mut paths = Vec::new();
    for path in &gt.obstruction_paths {
        let dropped = rng.gen::<f64>() < noise.p_drop_path;
        let mut pool = outside.clone();
        pool.shuffle(&mut rng);
        let mut out = Vec::with_capacity(path.len());
        for (j, &id) in path.iter().enumerate() {
            let swap = rng.gen::<f64>() < noise.p_swap;
            out.push(match pool.get(j) {
                Some(&r) if swap => r,
                _ => id,
            });
        }
        if !dropped {
            paths.push(out);
        }
    }

    let mut pool = outside;
    pool.shuffle(&mut rng);
    let mut answer = Vec::new();
    for (k, id) in gt.answer_set().into_iter().enumerate() {
        let dropped = rng.gen::<f64>() < noise.p_drop_answer;
        let swap = rng.gen::<f64>() < noise.p_swap;
        if dropped {
            continue;
        }
        answer.push(match pool.get(k) {
            Some(&r) if swap => r,
            _ => id,
        });
    }
    let broken = rng.gen::<f64>() < noise.p_break_format;

    let text = render(
        scene,
        relations,
        target,
        setting,
        &Structure { paths, answer },
        &opts.cues,
    )?;
    Ok(if broken {
        text.replace("</answer>", "")
    } else {
        text
    })
}

/// Runs an agent over every sample of a manifest, in manifest order.
pub fn run_agent(
    manifest: &Manifest,
    agent: &Agent,
    opts: &AgentOptions,
    exec: Execution,
) -> Result<Vec<PredictionRecord>> {
    if let Agent::Corrupted(noise) = agent {
        noise.validate()?;
    }
    // Scenes are shared between samples; build each relation graph once.
    let mut scenes: Vec<&Arc<SceneRecord>> = Vec::new();
    let mut slot = Vec::with_capacity(manifest.len());
    let mut seen: HashMap<*const SceneRecord, usize> = HashMap::new();
    for gt in manifest.samples() {
        let scene = gt
            .scene
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("sample {} has no scene", gt.sample_id)))?;
        let i = *seen.entry(Arc::as_ptr(scene)).or_insert_with(|| {
            scenes.push(scene);
            scenes.len() - 1
        });
        slot.push(i);
    }
    let graphs = exec
        .map(&scenes, |s| RelationGraph::from_scene(s, &opts.geometry))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<_> = manifest.samples().iter().zip(slot).collect();
    exec.map(&jobs, |(gt, i)| {
        let (scene, relations) = (scenes[*i].as_ref(), &graphs[*i]);
        let target = gt.record.target_object;
        let output = match agent {
            Agent::Oracle => oracle_with(scene, relations, target, gt.setting, opts)?,
            Agent::Corrupted(noise) => {
                corrupted_with(scene, relations, target, gt.setting, opts, noise, &gt.sample_id)?
            }
        };
        Ok(PredictionRecord {
            sample_id: gt.sample_id.clone(),
            output,
        })
    })
    .into_iter()
    .collect()
}
