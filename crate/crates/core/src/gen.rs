//! Procedural layered-clutter scenes with exact ground truth.
//!
//! Objects are placed bottom to top, one z-rank each. Modal masks follow the
//! painter's algorithm: every object hides whatever lies under its amodal
//! extent. A strict z-order makes the relation graph acyclic by construction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::GeometryConfig;
use crate::graph::{scene_graph_records, Difficulty, DEFAULT_PATH_CAP};
use crate::mask::Mask;
use crate::scene::{ObjectId, ObjectInstance, SceneRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    #[default]
    Rectangles,
    ConvexPolygons,
}

const DEFAULT_NAMES: &[&str] = &[
    "sugar box",
    "canned meat",
    "mustard bottle",
    "soup can",
    "cracker box",
    "mug",
    "banana",
    "cleanser bottle",
    "bowl",
    "power drill",
    "wood block",
    "scissors",
    "marker",
    "tennis ball",
    "gelatin box",
    "tuna can",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub width: u32,
    pub height: u32,
    pub shape: ShapeFamily,
    /// 0 places every object on free space; larger values stack more often.
    pub overlap_bias: f64,
    pub name_pool: Vec<String>,
    /// Smallest visible fraction of its own amodal area any object may keep.
    pub min_visible: f64,
    pub placement_attempts: u32,
    pub scene_attempts: u32,
    pub geometry: GeometryConfig,
    pub path_cap: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            min_objects: 4,
            max_objects: 12,
            width: 320,
            height: 240,
            shape: ShapeFamily::Rectangles,
            overlap_bias: 3.0,
            name_pool: DEFAULT_NAMES.iter().map(|s| s.to_string()).collect(),
            min_visible: 0.2,
            placement_attempts: 60,
            scene_attempts: 20,
            geometry: GeometryConfig::default(),
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_objects < 1 || self.max_objects < self.min_objects {
            return Err(Error::Validation(format!(
                "object range {}..={} is empty or starts below 1",
                self.min_objects, self.max_objects
            )));
        }
        if self.width < 32 || self.height < 32 {
            return Err(Error::Validation(format!(
                "image {}x{} smaller than 32x32",
                self.width, self.height
            )));
        }
        if !(self.overlap_bias >= 0.0 && self.overlap_bias.is_finite()) {
            return Err(Error::Validation(format!(
                "overlap bias {} must be finite and >= 0",
                self.overlap_bias
            )));
        }
        if self.name_pool.is_empty() {
            return Err(Error::Validation("name pool is empty".into()));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> GenConfig {
        GenConfig { seed, ..self.clone() }
    }
}

/// Seed of the `index`-th scene of a batch rooted at `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Placed {
    amodal: Mask,
    modal: Mask,
    center: (f64, f64),
    radius: f64,
}

pub fn generate_scene(cfg: &GenConfig) -> Result<SceneRecord> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last = None;
    for _ in 0..cfg.scene_attempts.max(1) {
        match try_scene(cfg, &mut rng) {
            Ok(scene) => return Ok(scene),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Generation(format!(
        "seed {}: no valid scene after {} attempts ({})",
        cfg.seed,
        cfg.scene_attempts,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// `count` scenes with seeds derived from `cfg.seed`, in index order.
pub fn generate_scenes(cfg: &GenConfig, count: u64, exec: Execution) -> Result<Vec<SceneRecord>> {
    cfg.validate()?;
    exec.map_range(0..count, |i| {
        let mut scene = generate_scene(&cfg.with_seed(derive_seed(cfg.seed, i)))?;
        scene.scene_id = format!("gen-{}/scene{i:05}", cfg.seed);
        Ok(scene)
    })
    .into_iter()
    .collect()
}

fn try_scene(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<SceneRecord> {
    let (w, h) = (cfg.width, cfg.height);
    let n = rng.gen_range(cfg.min_objects..=cfg.max_objects);
    let stack_prob = cfg.overlap_bias / (1.0 + cfg.overlap_bias);
    let short = w.min(h) as f64;
    let mut placed: Vec<Placed> = Vec::with_capacity(n);

    for k in 0..n {
        let mut accepted = None;
        for _ in 0..cfg.placement_attempts {
            let sw = rng.gen_range(0.18..0.42) * short;
            let sh = rng.gen_range(0.18..0.42) * short;
            let stack = k > 0 && rng.gen_bool(stack_prob);
            let (cx, cy) = if stack {
                let anchor = &placed[rng.gen_range(0..placed.len())];
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let reach = rng.gen_range(0.45..0.95) * (anchor.radius + 0.5 * sw.min(sh));
                (
                    anchor.center.0 + reach * angle.cos(),
                    anchor.center.1 + reach * angle.sin(),
                )
            } else {
                (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64))
            };
            let cx = cx.clamp(sw / 2.0, w as f64 - sw / 2.0);
            let cy = cy.clamp(sh / 2.0, h as f64 - sh / 2.0);
            let amodal = match cfg.shape {
                ShapeFamily::Rectangles => Mask::rect(
                    w,
                    h,
                    (cx - sw / 2.0).round() as i64,
                    (cy - sh / 2.0).round() as i64,
                    (cx + sw / 2.0).round() as i64,
                    (cy + sh / 2.0).round() as i64,
                )?,
                ShapeFamily::ConvexPolygons => convex_polygon(w, h, (cx, cy), sw / 2.0, sh / 2.0, rng)?,
            };
            if amodal.area() == 0 {
                continue;
            }
            if !stack
                && placed
                    .iter()
                    .any(|p| p.amodal.intersection_area(&amodal).unwrap_or(1) > 0)
            {
                continue;
            }
            let ok = placed.iter().all(|p| {
                let remaining = p.modal.difference(&amodal).expect("same shape").area();
                remaining as f64 >= cfg.min_visible * p.amodal.area() as f64
            });
            if ok {
                accepted = Some(Placed {
                    modal: amodal.clone(),
                    amodal,
                    center: (cx, cy),
                    radius: 0.5 * sw.max(sh),
                });
                break;
            }
        }
        let new =
            accepted.ok_or_else(|| Error::Generation(format!("could not place object {} of {n}", k + 1)))?;
        for p in &mut placed {
            p.modal = p.modal.difference(&new.amodal)?;
        }
        placed.push(new);
    }

    let names = assign_names(cfg, &placed, rng);
    let objects = placed
        .into_iter()
        .zip(names)
        .enumerate()
        .map(|(k, (p, name))| {
            let (ax, ay) = p.amodal.centroid().expect("non-empty amodal");
            let rounded = (ax.round() as u32, ay.round() as u32);
            let centroid = if p.modal.get(rounded.0, rounded.1) {
                rounded
            } else {
                p.modal.nearest_pixel(ax, ay).expect("visible pixels remain")
            };
            ObjectInstance {
                id: k as ObjectId + 1,
                name,
                centroid,
                z_rank: k as i32,
                amodal: p.amodal,
                modal: p.modal,
            }
        })
        .collect();
    let scene = SceneRecord {
        scene_id: format!("gen/{:016x}", cfg.seed),
        view_id: "0".into(),
        width: w,
        height: h,
        objects,
    };
    scene.validate()?;
    // Rejects scenes whose graphs would exceed the path cap.
    scene_graph_records(&scene, &cfg.geometry, cfg.path_cap)?;
    Ok(scene)
}

fn convex_polygon(
    w: u32,
    h: u32,
    center: (f64, f64),
    rx: f64,
    ry: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Mask> {
    let k = rng.gen_range(5..=8);
    let mut angles: Vec<f64> = (0..k)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let verts: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| (center.0 + rx * a.cos(), center.1 + ry * a.sin()))
        .collect();
    let mut mask = Mask::empty(w, h)?;
    let x0 = (center.0 - rx).floor().max(0.0) as u32;
    let x1 = ((center.0 + rx).ceil() as u32).min(w - 1);
    let y0 = (center.1 - ry).floor().max(0.0) as u32;
    let y1 = ((center.1 + ry).ceil() as u32).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            // Vertices on an ellipse in angular order are counter-clockwise in image space.
            let inside = (0..k).all(|i| {
                let (ax, ay) = verts[i];
                let (bx, by) = verts[(i + 1) % k];
                (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0
            });
            if inside {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

const ORDINALS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth",
];

/// Picks labels from a small per-scene subset of the pool so repeats occur,
/// then disambiguates repeats with spatial qualifiers.
fn assign_names(cfg: &GenConfig, placed: &[Placed], rng: &mut ChaCha8Rng) -> Vec<String> {
    let subset: Vec<&String> = cfg
        .name_pool
        .choose_multiple(rng, (placed.len() / 2).clamp(1, cfg.name_pool.len()))
        .collect();
    let labels: Vec<&String> = placed
        .iter()
        .map(|_| *subset.choose(rng).expect("non-empty"))
        .collect();
    let mut groups: BTreeMap<&String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut names: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    for (label, mut members) in groups {
        if members.len() < 2 {
            continue;
        }
        let horizontal_spread = spread(&members, placed, |p| p.center.0);
        let vertical_spread = spread(&members, placed, |p| p.center.1);
        let by_x = horizontal_spread >= vertical_spread;
        members.sort_by(|&a, &b| {
            let key = |i: usize| {
                if by_x {
                    placed[i].center.0
                } else {
                    placed[i].center.1
                }
            };
            key(a).total_cmp(&key(b)).then(a.cmp(&b))
        });
        let (first, last, mid) = if by_x {
            ("left", "right", "middle")
        } else {
            ("top", "bottom", "middle")
        };
        let m = members.len();
        for (rank, &i) in members.iter().enumerate() {
            let q = match (m, rank) {
                (_, 0) if m <= 3 => first.to_string(),
                (_, r) if r == m - 1 && m <= 3 => last.to_string(),
                (3, 1) => mid.to_string(),
                (_, r) => format!("{} from {first}", ORDINALS.get(r).copied().unwrap_or("next")),
            };
            names[i] = format!("{q} {label}");
        }
    }
    names
}

fn spread(members: &[usize], placed: &[Placed], f: impl Fn(&Placed) -> f64) -> f64 {
    let vals: Vec<f64> = members.iter().map(|&i| f(&placed[i])).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// One `(scene, target)` pick of a difficulty-stratified suite.
#[derive(Debug, Clone)]
pub struct SuiteItem {
    pub scene: SceneRecord,
    pub target: ObjectId,
    pub difficulty: Difficulty,
}

/// Rejection-samples scenes until every requested bucket is full.
/// Scenes are scanned in seed order, targets in id order, so the result is
/// deterministic for a fixed config.
pub fn generate_suite(
    cfg: &GenConfig,
    counts: &BTreeMap<Difficulty, usize>,
    max_scenes: u64,
) -> Result<Vec<SuiteItem>> {
    cfg.validate()?;
    let mut remaining: BTreeMap<Difficulty, usize> = counts
        .iter()
        .filter(|(_, n)| **n > 0)
        .map(|(d, n)| (*d, *n))
        .collect();
    let mut out = Vec::new();
    let mut index = 0u64;
    while !remaining.is_empty() && index < max_scenes {
        let mut scene = generate_scene(&cfg.with_seed(derive_seed(cfg.seed, index)))?;
        scene.scene_id = format!("gen-{}/scene{index:05}", cfg.seed);
        index += 1;
        let records = scene_graph_records(&scene, &cfg.geometry, cfg.path_cap)?;
        for rec in records {
            if let Some(left) = remaining.get_mut(&rec.new_difficulty) {
                out.push(SuiteItem {
                    scene: scene.clone(),
                    target: rec.target_object,
                    difficulty: rec.new_difficulty,
                });
                *left -= 1;
                if *left == 0 {
                    remaining.remove(&rec.new_difficulty);
                }
            }
        }
    }
    if remaining.is_empty() {
        Ok(out)
    } else {
        let missing: Vec<String> = remaining
            .iter()
            .map(|(d, n)| format!("{d} (short by {n})"))
            .collect();
        Err(Error::Generation(format!(
            "bucket unfillable within {max_scenes} scenes: {}",
            missing.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_relations, validate_relations};

    #[test]
    fn single_object_scene() {
        let cfg = GenConfig {
            seed: 11,
            min_objects: 1,
            max_objects: 1,
            ..GenConfig::default()
        };
        let s = generate_scene(&cfg).unwrap();
        assert_eq!(s.objects.len(), 1);
        let recs = scene_graph_records(&s, &cfg.geometry, 64).unwrap();
        assert_eq!(recs[0].new_difficulty, Difficulty::NoOcc);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GenConfig {
            seed: 42,
            ..GenConfig::default()
        };
        assert_eq!(
            generate_scene(&cfg).unwrap().to_json(),
            generate_scene(&cfg).unwrap().to_json()
        );
        let other = generate_scene(&cfg.with_seed(43)).unwrap();
        assert_ne!(generate_scene(&cfg).unwrap().to_json(), other.to_json());
    }

    #[test]
    fn zero_bias_has_no_relations() {
        let cfg = GenConfig {
            overlap_bias: 0.0,
            min_objects: 3,
            max_objects: 5,
            ..GenConfig::default()
        };
        for s in generate_scenes(&cfg, 30, Execution::Sequential).unwrap() {
            assert!(build_relations(&s, &cfg.geometry).unwrap().is_empty());
        }
    }

    #[test]
    fn polygons_are_valid() {
        let cfg = GenConfig {
            shape: ShapeFamily::ConvexPolygons,
            seed: 5,
            ..GenConfig::default()
        };
        for s in generate_scenes(&cfg, 20, Execution::Parallel).unwrap() {
            s.validate().unwrap();
            let rels = build_relations(&s, &cfg.geometry).unwrap();
            let edges: Vec<_> = rels.iter().map(|r| (r.below, r.above)).collect();
            assert!(validate_relations(&edges).accepted());
        }
    }

    #[test]
    fn repeated_labels_get_qualifiers() {
        let cfg = GenConfig {
            name_pool: vec!["box".into()],
            min_objects: 3,
            max_objects: 3,
            ..GenConfig::default()
        };
        let s = generate_scene(&cfg).unwrap();
        let mut names: Vec<_> = s.objects.iter().map(|o| o.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 3, "{names:?}");
        assert!(names.iter().all(|n| n.ends_with(" box")));
    }

    #[test]
    fn invalid_configs() {
        let bad = GenConfig {
            width: 16,
            ..GenConfig::default()
        };
        assert!(generate_scene(&bad).is_err());
        let bad = GenConfig {
            min_objects: 0,
            ..GenConfig::default()
        };
        assert!(generate_scene(&bad).is_err());
    }

    #[test]
    fn unfillable_bucket_names_itself() {
        let cfg = GenConfig {
            min_objects: 1,
            max_objects: 2,
            ..GenConfig::default()
        };
        let err = generate_suite(&cfg, &BTreeMap::from([(Difficulty::Hard, 3)]), 20).unwrap_err();
        assert!(err.to_string().contains("Hard"), "{err}");
    }
}
