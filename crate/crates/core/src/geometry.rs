//! Pairwise occlusion evidence: ratios, contact points and degree words.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ObjectId, ObjectInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Degree {
    Slightly,
    Partially,
    Mostly,
    Heavily,
}

impl Degree {
    pub fn word(self) -> &'static str {
        match self {
            Degree::Slightly => "slightly",
            Degree::Partially => "partially",
            Degree::Mostly => "mostly",
            Degree::Heavily => "heavily",
        }
    }
}

/// Lower-inclusive cut points between the four degree words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegreeThresholds {
    pub partially: f64,
    pub mostly: f64,
    pub heavily: f64,
}

impl Default for DegreeThresholds {
    fn default() -> Self {
        DegreeThresholds {
            partially: 0.25,
            mostly: 0.50,
            heavily: 0.75,
        }
    }
}

/// Which mask of the upper object counts as covering the lower one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstructorMask {
    #[default]
    Modal,
    Amodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Relations with a ratio below this are dropped.
    pub min_ratio: f64,
    /// Relations with a ratio above this are dropped.
    pub max_ratio: f64,
    pub obstructor_mask: ObstructorMask,
    pub degrees: DegreeThresholds,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            min_ratio: 0.01,
            max_ratio: 0.95,
            obstructor_mask: ObstructorMask::Modal,
            degrees: DegreeThresholds::default(),
        }
    }
}

/// `below` is obstructed by `above`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionRelation {
    pub below: ObjectId,
    pub above: ObjectId,
    pub ratio: f64,
    pub contact: (u32, u32),
    pub degree: Degree,
}

/// Occlusion evidence of `upper` over `lower`. `upper` must be nearer to the camera.
pub fn pairwise_occlusion(
    lower: &ObjectInstance,
    upper: &ObjectInstance,
    cfg: &GeometryConfig,
) -> Result<Option<OcclusionRelation>> {
    if lower.z_rank >= upper.z_rank {
        return Err(Error::Domain(format!(
            "object {} (z {}) is not above object {} (z {})",
            upper.id, upper.z_rank, lower.id, lower.z_rank
        )));
    }
    let cover = match cfg.obstructor_mask {
        ObstructorMask::Modal => &upper.modal,
        ObstructorMask::Amodal => &upper.amodal,
    };
    let overlap = lower.amodal.intersection(cover)?;
    let hidden = overlap.area();
    let total = lower.amodal.area();
    if hidden == 0 || total == 0 {
        return Ok(None);
    }
    let ratio = hidden as f64 / total as f64;
    if ratio < cfg.min_ratio || ratio > cfg.max_ratio {
        return Ok(None);
    }
    let (cx, cy) = overlap.centroid().expect("overlap is non-empty");
    let rounded = (cx.round() as u32, cy.round() as u32);
    let contact = if overlap.get(rounded.0, rounded.1) {
        rounded
    } else {
        overlap.nearest_pixel(cx, cy).expect("overlap is non-empty")
    };
    Ok(Some(OcclusionRelation {
        below: lower.id,
        above: upper.id,
        ratio,
        contact,
        degree: degree_word_with(ratio, &cfg.degrees)?,
    }))
}

/// Degree word under the default thresholds.
pub fn degree_word(ratio: f64) -> Result<Degree> {
    degree_word_with(ratio, &DegreeThresholds::default())
}

pub fn degree_word_with(ratio: f64, t: &DegreeThresholds) -> Result<Degree> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("ratio {ratio} outside (0, 1)")));
    }
    Ok(if ratio >= t.heavily {
        Degree::Heavily
    } else if ratio >= t.mostly {
        Degree::Mostly
    } else if ratio >= t.partially {
        Degree::Partially
    } else {
        Degree::Slightly
    })
}

/// Integer percentage, rounded half away from zero.
pub fn render_ratio_percent(ratio: f64) -> u32 {
    (ratio * 100.0).round() as u32
}

/// On-disk relation record: `obj1` occludes `obj2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub obj1: ObjectId,
    pub obj2: ObjectId,
    pub relation: String,
    pub mask_ratio: f64,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl From<&OcclusionRelation> for RelationRecord {
    fn from(r: &OcclusionRelation) -> Self {
        RelationRecord {
            obj1: r.above,
            obj2: r.below,
            relation: format!("{} occludes {}", r.above, r.below),
            mask_ratio: r.ratio,
            point: Point {
                x: r.contact.0,
                y: r.contact.1,
            },
        }
    }
}

impl RelationRecord {
    pub fn to_relation(&self, degrees: &DegreeThresholds) -> Result<OcclusionRelation> {
        if self.obj1 == self.obj2 {
            return Err(Error::Validation(format!(
                "relation {} occludes itself",
                self.obj1
            )));
        }
        Ok(OcclusionRelation {
            below: self.obj2,
            above: self.obj1,
            ratio: self.mask_ratio,
            contact: (self.point.x, self.point.y),
            degree: degree_word_with(self.mask_ratio, degrees)?,
        })
    }
}
