//! Ground-truth manifests and prediction records.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphRecord;
use crate::io::read_jsonl;
use crate::metrics::{evaluate_sample, SampleReport};
use crate::scene::{load_scene, SceneRecord};
use crate::trace::{ResolvedTrace, Setting};
use crate::vqa::VqaRecord;

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub output: String,
}

#[derive(Debug, Clone)]
pub struct GroundTruthSample {
    pub sample_id: String,
    pub setting: Setting,
    pub record: GraphRecord,
    /// Needed to resolve NLP mentions and to run agents.
    pub scene: Option<Arc<SceneRecord>>,
}

impl GroundTruthSample {
    pub fn resolve(&self, output: &str, radius: f64) -> ResolvedTrace {
        ResolvedTrace::from_output(output, self.setting, self.scene.as_deref(), radius)
    }

    pub fn score(&self, output: &str, radius: f64) -> SampleReport {
        evaluate_sample(&self.sample_id, &self.resolve(output, radius), &self.record)
    }
}

/// Ground truth keyed by sample id, in file order.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    samples: Vec<GroundTruthSample>,
    index: HashMap<String, usize>,
}

impl Manifest {
    pub fn new(samples: Vec<GroundTruthSample>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.sample_id.clone(), i).is_some() {
                return Err(Error::Manifest(format!("duplicate sample id {}", s.sample_id)));
            }
        }
        Ok(Manifest { samples, index })
    }

    /// Builds a manifest from VQA records, loading each referenced scene once.
    /// Relative scene paths are taken relative to `base`.
    pub fn from_vqa(records: Vec<VqaRecord>, base: &Path) -> Result<Self> {
        let mut scenes: BTreeMap<PathBuf, Arc<SceneRecord>> = BTreeMap::new();
        let mut samples = Vec::with_capacity(records.len());
        for r in records {
            let scene = match &r.scene_path {
                Some(p) => {
                    let path = base.join(p);
                    if !scenes.contains_key(&path) {
                        let s = Arc::new(load_scene(&path)?);
                        scenes.insert(path.clone(), s);
                    }
                    Some(scenes[&path].clone())
                }
                None => None,
            };
            samples.push(GroundTruthSample {
                sample_id: r.sample_id,
                setting: r.setting,
                record: r.gt,
                scene,
            });
        }
        Manifest::new(samples)
    }

    /// Builds a manifest from VQA records whose scenes are already in memory,
    /// looked up by scene id.
    pub fn from_vqa_in_memory(records: Vec<VqaRecord>, scenes: &[Arc<SceneRecord>]) -> Result<Self> {
        let by_id: HashMap<&str, &Arc<SceneRecord>> =
            scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
        let samples = records
            .into_iter()
            .map(|r| GroundTruthSample {
                scene: by_id.get(r.scene_id.as_str()).map(|s| Arc::clone(s)),
                sample_id: r.sample_id,
                setting: r.setting,
                record: r.gt,
            })
            .collect();
        Manifest::new(samples)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let records: Vec<VqaRecord> = read_jsonl(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Manifest::from_vqa(records, base)
    }

    pub fn samples(&self) -> &[GroundTruthSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&GroundTruthSample> {
        self.index.get(sample_id).map(|&i| &self.samples[i])
    }

    /// Rejects unknown or repeated prediction ids and returns, for every
    /// manifest sample in order, the matching prediction if there is one.
    pub fn align<'p>(
        &self,
        predictions: &'p [PredictionRecord],
    ) -> Result<Vec<Option<&'p PredictionRecord>>> {
        let mut unknown = Vec::new();
        let mut seen = HashSet::new();
        let mut aligned = vec![None; self.samples.len()];
        for p in predictions {
            match self.index.get(&p.sample_id) {
                Some(&i) => {
                    if !seen.insert(i) {
                        return Err(Error::Manifest(format!(
                            "duplicate prediction for sample {}",
                            p.sample_id
                        )));
                    }
                    aligned[i] = Some(p);
                }
                None => unknown.push(p.sample_id.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Manifest(format!(
                "{} prediction(s) not in the manifest: {}",
                unknown.len(),
                unknown.join(", ")
            )));
        }
        Ok(aligned)
    }
}
