//! Scene records: object instances with amodal and modal masks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::SCHEMA_VERSION;

/// Set-of-Mark id of an object inside a scene.
pub type ObjectId = u32;

/// Largest id a scene may carry. Ids at or above this are reserved for
/// placeholder tokens produced while scoring unresolved mentions.
pub const MAX_OBJECT_ID: ObjectId = 0x7fff_ffff;

/// Reserved name for objects annotators could not describe. Samples that
/// would need to mention such an object are skipped in the NLP setting.
pub const INDESCRIBABLE: &str = "indescribable object";

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub name: String,
    /// Reference point in absolute pixels, origin top-left.
    pub centroid: (u32, u32),
    /// Larger is nearer to the camera.
    pub z_rank: i32,
    pub amodal: Mask,
    pub modal: Mask,
}

impl ObjectInstance {
    pub fn is_describable(&self) -> bool {
        self.name != INDESCRIBABLE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<ObjectInstance>,
}

/// Free-form instruction carried with its ground-truth target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionQuery {
    pub text: String,
    pub target_id: ObjectId,
}

impl InstructionQuery {
    pub fn new(scene: &SceneRecord, text: impl Into<String>, target_id: ObjectId) -> Result<Self> {
        scene.object(target_id)?;
        Ok(InstructionQuery {
            text: text.into(),
            target_id,
        })
    }
}

impl SceneRecord {
    pub fn object(&self, id: ObjectId) -> Result<&ObjectInstance> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or(Error::UnknownObject(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects.iter().map(|o| o.id)
    }

    /// Checks every structural invariant of a scene.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "image dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.objects.is_empty() {
            return Err(Error::Validation("scene has no objects".into()));
        }
        let mut ids = BTreeSet::new();
        let mut ranks = BTreeSet::new();
        for o in &self.objects {
            if o.id == 0 || o.id > MAX_OBJECT_ID {
                return Err(Error::Validation(format!("object id {} out of range", o.id)));
            }
            if !ids.insert(o.id) {
                return Err(Error::Validation(format!("duplicate object id {}", o.id)));
            }
            if !ranks.insert(o.z_rank) {
                return Err(Error::Validation(format!(
                    "duplicate z_rank {} (object {})",
                    o.z_rank, o.id
                )));
            }
            for (label, m) in [("amodal", &o.amodal), ("modal", &o.modal)] {
                if m.width() != self.width || m.height() != self.height {
                    return Err(Error::Validation(format!(
                        "object {} {label} mask is {}x{}, image is {}x{}",
                        o.id,
                        m.width(),
                        m.height(),
                        self.width,
                        self.height
                    )));
                }
            }
            if !o.modal.is_subset_of(&o.amodal) {
                return Err(Error::Validation(format!(
                    "object {} modal mask is not contained in its amodal mask",
                    o.id
                )));
            }
            let (x, y) = o.centroid;
            if x >= self.width || y >= self.height {
                return Err(Error::Validation(format!(
                    "object {} centroid ({x}, {y}) outside {}x{} image",
                    o.id, self.width, self.height
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SceneDoc::from(self)).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDoc = serde_json::from_str(text).map_err(|e| schema_error(&e))?;
        let scene = doc.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates one scene document.
pub fn load_scene(path: &Path) -> Result<SceneRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SceneRecord::from_json(&text)
}

fn schema_error(e: &serde_json::Error) -> Error {
    // serde_json reports the offending field inside its message ("missing field `x`").
    let msg = e.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| format!("line {} column {}", e.line(), e.column()));
    Error::schema(field, msg)
}

/// Old-id to new-id pairs for every object whose id changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdRemap(pub BTreeMap<ObjectId, ObjectId>);

impl IdRemap {
    pub fn apply(&self, id: ObjectId) -> ObjectId {
        self.0.get(&id).copied().unwrap_or(id)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }
}

/// Renumbers objects to `1..=N` by ascending original id. Object order in the
/// list is left untouched, so z-order and every mask are preserved.
pub fn normalize_ids(scene: &SceneRecord) -> (SceneRecord, IdRemap) {
    let mut sorted: Vec<ObjectId> = scene.ids().collect();
    sorted.sort_unstable();
    let remap: BTreeMap<_, _> = sorted
        .iter()
        .enumerate()
        .map(|(i, &old)| (old, i as ObjectId + 1))
        .filter(|(old, new)| old != new)
        .collect();
    let remap = IdRemap(remap);
    let mut out = scene.clone();
    for o in &mut out.objects {
        o.id = remap.apply(o.id);
    }
    (out, remap)
}

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    #[serde(default = "default_schema")]
    schema_version: u32,
    scene_id: String,
    view_id: String,
    width: u32,
    height: u32,
    objects: Vec<ObjectDoc>,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    id: ObjectId,
    name: String,
    centroid: [u32; 2],
    z_rank: i32,
    amodal: Vec<u32>,
    modal: Vec<u32>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl From<&SceneRecord> for SceneDoc {
    fn from(s: &SceneRecord) -> Self {
        SceneDoc {
            schema_version: SCHEMA_VERSION,
            scene_id: s.scene_id.clone(),
            view_id: s.view_id.clone(),
            width: s.width,
            height: s.height,
            objects: s
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id,
                    name: o.name.clone(),
                    centroid: [o.centroid.0, o.centroid.1],
                    z_rank: o.z_rank,
                    amodal: o.amodal.to_rle(),
                    modal: o.modal.to_rle(),
                })
                .collect(),
        }
    }
}

impl SceneDoc {
    fn into_scene(self) -> Result<SceneRecord> {
        if self.schema_version > SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::schema("width", "image dimensions must be positive"));
        }
        let objects = self
            .objects
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                let mask = |runs: &[u32], which: &str| {
                    Mask::from_rle(self.width, self.height, runs)
                        .map_err(|e| Error::schema(format!("objects[{i}].{which}"), e.to_string()))
                };
                Ok(ObjectInstance {
                    id: o.id,
                    name: o.name,
                    centroid: (o.centroid[0], o.centroid[1]),
                    z_rank: o.z_rank,
                    amodal: mask(&o.amodal, "amodal")?,
                    modal: mask(&o.modal, "modal")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneRecord {
            scene_id: self.scene_id,
            view_id: self.view_id,
            width: self.width,
            height: self.height,
            objects,
        })
    }
}
