//! Rendering ground-truth graphs into VQA samples with reasoning traces.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{render_ratio_percent, GeometryConfig, OcclusionRelation};
use crate::graph::{Difficulty, GraphRecord, RelationGraph, TargetGraph};
use crate::scene::{ObjectId, SceneRecord};
use crate::trace::Setting;
use crate::SCHEMA_VERSION;

pub const SOM_SYSTEM_PROMPT: &str = "You are an assistant for robotic grasp planning. When asked which object must be removed first to grasp a specific object:
- If the target object is not obstructed, return the target object's ID itself.
- If there is one obstruction path, reason step-by-step along that path, include occlusion ratios when available, and end with the top-most object.
- If multiple obstruction paths exist, reason step-by-step for each path separately.
- In the <answer>...</answer> tag, output ALL distinct top-most objects as a JSON list.
Use <think>...</think> for reasoning, and put ONLY final object IDs inside <answer>...</answer>.";

pub const NLP_SYSTEM_PROMPT: &str = "You are an assistant specialized in robotic grasp planning based on obstruction reasoning.
When asked which object must be removed first to grasp a specific target object in a single image:
- If the target object is not obstructed, return the target object's name/description and its coordinates.
- If the object has one obstruction path, reason step-by-step along that path, include the occlusion ratio for each obstruction relation when available, and end with the top-most object. Each reasoning step must reference explicit (x,y) coordinates.
- If the object has multiple obstruction paths, reason step-by-step for each path separately, and include ALL distinct top-most occluding objects in the final answer.
- All reasoning must be enclosed inside a single pair of <think>...</think>.
- The final answer must be enclosed in <answer>...</answer> and must follow the format:
  <answer>[<points x y>object name</points>, ...]</answer>";

/// Optional obstruction cues added to every reasoning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Cues {
    pub ratio: bool,
    pub contact_point: bool,
    pub degree_word: bool,
    /// Compact `A obstructed by B (cues)` steps instead of full sentences.
    pub short: bool,
}

impl Default for Cues {
    fn default() -> Self {
        Cues {
            ratio: true,
            contact_point: false,
            degree_word: false,
            short: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqaSample {
    pub setting: Setting,
    pub image_ref: String,
    pub system_prompt: String,
    pub question: String,
    pub answer_text: String,
    pub difficulty: Difficulty,
    pub gt: GraphRecord,
}

/// One relation of a path, as rendered in a think step.
struct Step<'a> {
    below: ObjectId,
    above: ObjectId,
    relation: Option<&'a OcclusionRelation>,
}

fn steps<'a>(path: &[ObjectId], relations: &'a RelationGraph) -> Vec<Step<'a>> {
    // Paths are stored top-first; steps run from the target upwards.
    path.windows(2)
        .rev()
        .map(|w| Step {
            below: w[1],
            above: w[0],
            relation: relations.relation(w[1], w[0]),
        })
        .collect()
}

fn cue_suffix(step: &Step<'_>, cues: &Cues) -> String {
    let Some(rel) = step.relation else {
        return String::new();
    };
    if cues.short {
        let mut parts = Vec::new();
        if cues.ratio {
            parts.push(format!("{}%", render_ratio_percent(rel.ratio)));
        }
        if cues.contact_point {
            parts.push(format!("({}, {})", rel.contact.0, rel.contact.1));
        }
        if parts.is_empty() {
            String::new()
        } else {
            format!(" ({})", parts.join(", "))
        }
    } else {
        let mut s = String::new();
        if cues.ratio {
            s += &format!(
                " with the occlusion ratio of {}%",
                render_ratio_percent(rel.ratio)
            );
        }
        if cues.contact_point {
            s += &format!(" at contact point ({}, {})", rel.contact.0, rel.contact.1);
        }
        s
    }
}

fn verb(step: &Step<'_>, cues: &Cues) -> String {
    let degree = match (cues.degree_word, step.relation) {
        (true, Some(r)) => format!("{} ", r.degree.word()),
        _ => String::new(),
    };
    if cues.short {
        format!("{degree}obstructed by")
    } else {
        format!("is {degree}obstructed by")
    }
}

fn image_stem(scene_id: &str) -> &str {
    scene_id.rsplit('/').next().unwrap_or(scene_id)
}

/// Think and answer text for an arbitrary path set and answer set in the
/// Set-of-Mark dialect. Steps without a stored relation carry no cues.
pub fn render_som(
    target: ObjectId,
    paths: &[Vec<ObjectId>],
    answer: &[ObjectId],
    relations: &RelationGraph,
    cues: &Cues,
) -> String {
    let mut lines = Vec::new();
    for (k, path) in paths.iter().enumerate() {
        for step in steps(path, relations) {
            let (b, a) = (step.below, step.above);
            let line = if cues.short {
                format!(
                    "Path{}: {b} {} {a}{}",
                    k + 1,
                    verb(&step, cues),
                    cue_suffix(&step, cues)
                )
            } else {
                format!(
                    "Path{}: Object {b} {} object {a}{}",
                    k + 1,
                    verb(&step, cues),
                    cue_suffix(&step, cues)
                )
            };
            lines.push(line);
        }
    }
    if lines.is_empty() {
        lines.push(format!("Object {target} is not obstructed."));
    }
    let mut ids = answer.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let ids: Vec<String> = ids.iter().map(|id| id.to_string()).collect();
    format!(
        "<think>\n{}\n</think>\n<answer>[{}]</answer>",
        lines.join("\n"),
        ids.join(", ")
    )
}

/// Natural-language counterpart of [`render_som`]. Answer points are ordered
/// by object name, then id.
pub fn render_nlp(
    target: ObjectId,
    paths: &[Vec<ObjectId>],
    answer: &[ObjectId],
    scene: &SceneRecord,
    relations: &RelationGraph,
    cues: &Cues,
) -> Result<String> {
    let at = |id: ObjectId| -> Result<String> {
        let o = scene.object(id)?;
        Ok(format!("{} at ({}, {})", o.name, o.centroid.0, o.centroid.1))
    };
    let mut lines = Vec::new();
    for (k, path) in paths.iter().enumerate() {
        for step in steps(path, relations) {
            lines.push(format!(
                "Path{}: {} {} {}{}",
                k + 1,
                at(step.below)?,
                verb(&step, cues),
                at(step.above)?,
                cue_suffix(&step, cues)
            ));
        }
    }
    if lines.is_empty() {
        lines.push(format!("{} is not obstructed.", at(target)?));
    }
    let mut tops = answer
        .iter()
        .map(|id| scene.object(*id))
        .collect::<Result<Vec<_>>>()?;
    tops.sort_by(|a, b| a.name.cmp(&b.name).then(a.id.cmp(&b.id)));
    tops.dedup_by_key(|o| o.id);
    let points: Vec<String> = tops
        .iter()
        .map(|o| format!("<points {} {}>{}</points>", o.centroid.0, o.centroid.1, o.name))
        .collect();
    Ok(format!(
        "<think>{}\n</think>\n<answer>[{}]</answer>",
        lines.join("\n"),
        points.join(", ")
    ))
}

/// Ground-truth sample in the Set-of-Mark setting.
pub fn synth_som(graph: &TargetGraph, relations: &RelationGraph, gt: &GraphRecord, cues: &Cues) -> VqaSample {
    let t = graph.target;
    let answer: Vec<ObjectId> = gt.answer_set().into_iter().collect();
    VqaSample {
        setting: Setting::OracleSom,
        image_ref: format!("{}_{}_labeled.png", image_stem(&gt.scene_id), gt.view_id),
        system_prompt: SOM_SYSTEM_PROMPT.to_string(),
        question: format!("<image>\nTo grasp object {t}, which object is on top of it?"),
        answer_text: render_som(t, &gt.obstruction_paths, &answer, relations, cues),
        difficulty: gt.new_difficulty,
        gt: gt.clone(),
    }
}

/// Ground-truth sample in the natural-language setting, or `None` when any
/// object the sample would mention is indescribable (the sample is skipped).
pub fn synth_nlp(
    graph: &TargetGraph,
    relations: &RelationGraph,
    gt: &GraphRecord,
    scene: &SceneRecord,
    cues: &Cues,
) -> Result<Option<VqaSample>> {
    for id in &graph.nodes {
        if !scene.object(*id)?.is_describable() {
            return Ok(None);
        }
    }
    let target = scene.object(graph.target)?;
    let answer: Vec<ObjectId> = gt.answer_set().into_iter().collect();
    Ok(Some(VqaSample {
        setting: Setting::Nlp,
        image_ref: format!("{}_view{}_ori.png", image_stem(&gt.scene_id), gt.view_id),
        system_prompt: NLP_SYSTEM_PROMPT.to_string(),
        question: format!("<image>\nTo grasp {}, which object is on top of it?", target.name),
        answer_text: render_nlp(
            graph.target,
            &gt.obstruction_paths,
            &answer,
            scene,
            relations,
            cues,
        )?,
        difficulty: gt.new_difficulty,
        gt: gt.clone(),
    }))
}

pub fn sample_id(scene_id: &str, view_id: &str, target: ObjectId, setting: Setting) -> String {
    format!("{scene_id}/{view_id}/{target}/{setting}")
}

/// One line of a VQA file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaRecord {
    pub image: String,
    pub system: String,
    pub question: String,
    pub answer: String,
    pub setting: Setting,
    pub difficulty: Difficulty,
    pub scene_id: String,
    pub view_id: String,
    pub target: ObjectId,
    pub sample_id: String,
    pub gt: GraphRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_path: Option<String>,
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
}

impl VqaRecord {
    pub fn new(sample: VqaSample, scene_path: Option<String>) -> Self {
        let gt = sample.gt;
        VqaRecord {
            image: sample.image_ref,
            system: sample.system_prompt,
            question: sample.question,
            answer: sample.answer_text,
            setting: sample.setting,
            difficulty: sample.difficulty,
            sample_id: sample_id(&gt.scene_id, &gt.view_id, gt.target_object, sample.setting),
            scene_id: gt.scene_id.clone(),
            view_id: gt.view_id.clone(),
            target: gt.target_object,
            gt,
            scene_path,
            schema_version: SCHEMA_VERSION,
        }
    }
}

/// Renders one target of a scene in `setting`. `None` means the NLP sample was skipped.
pub fn synth_for_target(
    scene: &SceneRecord,
    relations: &RelationGraph,
    target: ObjectId,
    setting: Setting,
    cues: &Cues,
    path_cap: usize,
) -> Result<Option<VqaSample>> {
    let graph = relations.target_graph(target)?;
    let gt = GraphRecord::new(&scene.scene_id, &scene.view_id, &graph, path_cap)?;
    match setting {
        Setting::OracleSom => Ok(Some(synth_som(&graph, relations, &gt, cues))),
        Setting::Nlp => synth_nlp(&graph, relations, &gt, scene, cues),
    }
}

/// Samples for every target of a scene, in id order, one per requested
/// setting. Skipped NLP samples are left out.
pub fn synth_scene(
    scene: &SceneRecord,
    settings: &[Setting],
    geometry: &GeometryConfig,
    cues: &Cues,
    path_cap: usize,
) -> Result<Vec<VqaSample>> {
    let relations = RelationGraph::from_scene(scene, geometry)?;
    let mut ids: Vec<ObjectId> = scene.ids().collect();
    ids.sort_unstable();
    let mut out = Vec::new();
    for t in ids {
        for &setting in settings {
            if let Some(s) = synth_for_target(scene, &relations, t, setting, cues, path_cap)? {
                out.push(s);
            }
        }
    }
    Ok(out)
}
