//! Parsing of `<think>`/`<answer>` model outputs.
//!
//! Parsing never fails: malformed input yields `format_ok == false` and
//! whatever could still be recovered, plus a diagnostic per skipped line or
//! fragment. The strict predicate [`check_format`] backs the format reward.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::scene::{ObjectId, SceneRecord, MAX_OBJECT_ID};

/// Prompting scheme of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// Objects referenced by Set-of-Mark ids.
    #[serde(rename = "som", alias = "OracleSoM")]
    OracleSom,
    /// Objects referenced by name plus pixel coordinates.
    #[serde(rename = "nlp", alias = "NLP")]
    Nlp,
}

impl Setting {
    pub fn label(self) -> &'static str {
        match self {
            Setting::OracleSom => "som",
            Setting::Nlp => "nlp",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Setting {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "som" | "oraclesom" | "oracle" => Ok(Setting::OracleSom),
            "nlp" => Ok(Setting::Nlp),
            _ => Err(crate::Error::Domain(format!("unknown setting {s:?}"))),
        }
    }
}

/// A `name at (x, y)` reference in the NLP dialect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub name: String,
    pub x: u32,
    pub y: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTrace<R> {
    pub format_ok: bool,
    /// Reasoning paths, top-first.
    pub think_paths: Vec<Vec<R>>,
    /// Answer elements in output order.
    pub answer: Vec<R>,
    pub diagnostics: Vec<String>,
    pub raw: String,
}

static SOM_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[\s*(?:\d+\s*(?:,\s*\d+\s*)*)?\]\s*$").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());
static NLP_ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    let point = r"<points\s+\d+\s+\d+\s*>[^<]*</points>";
    Regex::new(&format!(r"^\s*\[\s*(?:{point}\s*(?:,\s*{point}\s*)*)?\]\s*$")).unwrap()
});
static POINT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<points\s+(\d+)\s+(\d+)\s*>([^<]*)</points>").unwrap());
static SOM_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:path\s*(\d+)\s*[:.]\s*)?(?:object\s+)?(\d+)\s+(?:is\s+)?(?:(?:slightly|partially|mostly|heavily)\s+)?obstructed\s+by\s+(?:object\s+)?(\d+)\b",
    )
    .unwrap()
});
static NLP_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^(?:path\s*(\d+)\s*[:.]\s*)?(.+?)\s+at\s+\(\s*(\d+)\s*,\s*(\d+)\s*\)\s+(?:is\s+)?(?:(?:slightly|partially|mostly|heavily)\s+)?obstructed\s+by\s+(.+?)\s+at\s+\(\s*(\d+)\s*,\s*(\d+)\s*\)",
    )
    .unwrap()
});
static NOT_OBSTRUCTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:not|no|un)\s*-?\s*obstruct").unwrap());

struct Blocks<'a> {
    think: &'a str,
    answer: &'a str,
    well_formed: bool,
}

/// Locates think and answer bodies. `well_formed` holds iff exactly one pair
/// of each tag appears, in order, with only whitespace outside them.
fn split_blocks(text: &str) -> Blocks<'_> {
    let count = |tag: &str| text.matches(tag).count();
    let counts_ok = ["<think>", "</think>", "<answer>", "</answer>"]
        .iter()
        .all(|t| count(t) == 1);
    let find = |tag: &str| text.find(tag);
    let (ts, te, as_, ae) = (
        find("<think>"),
        find("</think>"),
        find("<answer>"),
        find("</answer>"),
    );

    let think_start = ts.map(|i| i + "<think>".len()).unwrap_or(0);
    let think_end = te
        .filter(|&e| e >= think_start)
        .or(as_.filter(|&a| a >= think_start))
        .unwrap_or(text.len());
    let think = if ts.is_some() {
        &text[think_start..think_end]
    } else {
        ""
    };
    let answer = match as_ {
        Some(a) => {
            let start = a + "<answer>".len();
            let end = ae.filter(|&e| e >= start).unwrap_or(text.len());
            &text[start..end]
        }
        None => "",
    };

    let well_formed = counts_ok
        && match (ts, te, as_, ae) {
            (Some(ts), Some(te), Some(as_), Some(ae)) => {
                ts < te
                    && te < as_
                    && as_ < ae
                    && text[..ts].trim().is_empty()
                    && text[te + "</think>".len()..as_].trim().is_empty()
                    && text[ae + "</answer>".len()..].trim().is_empty()
            }
            _ => false,
        };
    Blocks {
        think,
        answer,
        well_formed,
    }
}

/// Strict structural check: one think block followed by one answer block whose
/// payload parses in the setting's answer grammar.
pub fn check_format(text: &str, setting: Setting) -> bool {
    let b = split_blocks(text);
    b.well_formed
        && match setting {
            Setting::OracleSom => SOM_ANSWER.is_match(b.answer),
            Setting::Nlp => NLP_ANSWER.is_match(b.answer),
        }
}

/// Relation steps `(below, above)` sharing one path label.
type StepGroup<R> = (Option<u32>, Vec<(R, R)>);

/// Groups labelled relation lines into paths and chains each into a top-first sequence.
fn chain_paths<R: Clone + PartialEq + fmt::Debug>(
    lines: Vec<(Option<u32>, R, R)>,
    diagnostics: &mut Vec<String>,
) -> Vec<Vec<R>> {
    let mut groups: Vec<StepGroup<R>> = Vec::new();
    for (label, below, above) in lines {
        let idx = match label {
            Some(l) => match groups.iter().position(|(g, _)| *g == Some(l)) {
                Some(i) => i,
                None => {
                    groups.push((Some(l), Vec::new()));
                    groups.len() - 1
                }
            },
            None => {
                if groups.is_empty() {
                    groups.push((None, Vec::new()));
                }
                groups.len() - 1
            }
        };
        groups[idx].1.push((below, above));
    }

    let mut paths = Vec::new();
    for (label, steps) in groups {
        let mut chain: Vec<R> = Vec::new();
        for (below, above) in steps {
            if below == above {
                diagnostics.push(format!("path {label:?}: {below:?} obstructed by itself, skipped"));
                continue;
            }
            if chain.last() == Some(&below) {
                if chain.contains(&above) {
                    diagnostics.push(format!(
                        "path {label:?}: {above:?} repeats within the path, skipped"
                    ));
                } else {
                    chain.push(above);
                }
            } else {
                if !chain.is_empty() {
                    diagnostics.push(format!(
                        "path {label:?}: step from {below:?} does not continue the chain, starting a new path"
                    ));
                    paths.push(std::mem::take(&mut chain));
                }
                chain = vec![below, above];
            }
        }
        if !chain.is_empty() {
            paths.push(chain);
        }
    }
    for p in &mut paths {
        p.reverse();
    }
    paths
}

fn think_lines(think: &str) -> impl Iterator<Item = &str> {
    think.lines().map(str::trim).filter(|l| !l.is_empty())
}

pub fn parse_som(text: &str) -> ParsedTrace<ObjectId> {
    let blocks = split_blocks(text);
    let mut diagnostics = Vec::new();
    let mut lines = Vec::new();
    for line in think_lines(blocks.think) {
        match SOM_LINE.captures(line) {
            Some(c) => {
                let num = |i: usize| c.get(i).and_then(|m| m.as_str().parse::<u32>().ok());
                match (num(2), num(3)) {
                    (Some(b), Some(a)) => lines.push((num(1), b, a)),
                    _ => diagnostics.push(format!("id out of range in think line: {line}")),
                }
            }
            None if NOT_OBSTRUCTED.is_match(line) => {}
            None => diagnostics.push(format!("unparsed think line: {line}")),
        }
    }
    let think_paths = chain_paths(lines, &mut diagnostics);

    let answer_ok = SOM_ANSWER.is_match(blocks.answer);
    if !answer_ok {
        diagnostics.push(format!("answer is not an id list: {:?}", blocks.answer.trim()));
    }
    let answer = INTEGER
        .find_iter(blocks.answer)
        .filter_map(|m| m.as_str().parse().ok())
        .collect();
    ParsedTrace {
        format_ok: blocks.well_formed && answer_ok,
        think_paths,
        answer,
        diagnostics,
        raw: text.to_string(),
    }
}

pub fn parse_nlp(text: &str) -> ParsedTrace<Mention> {
    let blocks = split_blocks(text);
    let mut diagnostics = Vec::new();
    let mut lines = Vec::new();
    for line in think_lines(blocks.think) {
        match NLP_LINE.captures(line) {
            Some(c) => {
                let num = |i: usize| c.get(i).and_then(|m| m.as_str().parse::<u32>().ok());
                let text = |i: usize| {
                    c.get(i)
                        .map(|m| m.as_str().trim().to_string())
                        .unwrap_or_default()
                };
                match (num(3), num(4), num(6), num(7)) {
                    (Some(bx), Some(by), Some(ax), Some(ay)) => lines.push((
                        num(1),
                        Mention {
                            name: text(2),
                            x: bx,
                            y: by,
                        },
                        Mention {
                            name: text(5),
                            x: ax,
                            y: ay,
                        },
                    )),
                    _ => diagnostics.push(format!("coordinate out of range in think line: {line}")),
                }
            }
            None if NOT_OBSTRUCTED.is_match(line) => {}
            None => diagnostics.push(format!("unparsed think line: {line}")),
        }
    }
    let think_paths = chain_paths(lines, &mut diagnostics);

    let answer_ok = NLP_ANSWER.is_match(blocks.answer);
    let mut answer = Vec::new();
    for c in POINT.captures_iter(blocks.answer) {
        match (c[1].parse(), c[2].parse()) {
            (Ok(x), Ok(y)) => answer.push(Mention {
                name: c[3].trim().to_string(),
                x,
                y,
            }),
            _ => diagnostics.push(format!("coordinate out of range in {:?}", &c[0])),
        }
    }
    if !answer_ok {
        let leftover = POINT.replace_all(blocks.answer, "");
        diagnostics.push(format!(
            "answer does not follow the points-list grammar; unmatched text {:?}",
            leftover.trim()
        ));
    }
    ParsedTrace {
        format_ok: blocks.well_formed && answer_ok,
        think_paths,
        answer,
        diagnostics,
        raw: text.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionMethod {
    InsideModal,
    NearestCentroid,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionResolution {
    pub mention: Mention,
    pub resolved: Option<ObjectId>,
    pub method: ResolutionMethod,
}

/// Default nearest-centroid radius in pixels.
pub const DEFAULT_RESOLVE_RADIUS: f64 = 50.0;

/// Maps mentions to scene objects by coordinates only. A point inside exactly
/// one modal mask resolves to that object; otherwise the nearest reference
/// point within `radius` wins (ties to the lower id); otherwise unresolved.
pub fn resolve_mentions(mentions: &[Mention], scene: &SceneRecord, radius: f64) -> Vec<MentionResolution> {
    mentions
        .iter()
        .map(|m| {
            let inside: Vec<ObjectId> = scene
                .objects
                .iter()
                .filter(|o| o.modal.get(m.x, m.y))
                .map(|o| o.id)
                .collect();
            if let [id] = inside[..] {
                return MentionResolution {
                    mention: m.clone(),
                    resolved: Some(id),
                    method: ResolutionMethod::InsideModal,
                };
            }
            let nearest = scene
                .objects
                .iter()
                .map(|o| {
                    let dx = o.centroid.0 as f64 - m.x as f64;
                    let dy = o.centroid.1 as f64 - m.y as f64;
                    ((dx * dx + dy * dy).sqrt(), o.id)
                })
                .filter(|(d, _)| *d <= radius)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match nearest {
                Some((_, id)) => MentionResolution {
                    mention: m.clone(),
                    resolved: Some(id),
                    method: ResolutionMethod::NearestCentroid,
                },
                None => MentionResolution {
                    mention: m.clone(),
                    resolved: None,
                    method: ResolutionMethod::Unresolved,
                },
            }
        })
        .collect()
}

/// A prediction reduced to id tokens, ready for scoring. Unresolved NLP
/// mentions become placeholder tokens above [`MAX_OBJECT_ID`], distinct from
/// every real id, one per distinct mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedTrace {
    pub format_ok: bool,
    pub think_paths: Vec<Vec<ObjectId>>,
    pub answer: BTreeSet<ObjectId>,
    pub diagnostics: Vec<String>,
}

impl From<ParsedTrace<ObjectId>> for ResolvedTrace {
    fn from(p: ParsedTrace<ObjectId>) -> Self {
        ResolvedTrace {
            format_ok: p.format_ok,
            think_paths: p.think_paths,
            answer: p.answer.into_iter().collect(),
            diagnostics: p.diagnostics,
        }
    }
}

impl ResolvedTrace {
    pub fn resolve(parsed: ParsedTrace<Mention>, scene: &SceneRecord, radius: f64) -> Self {
        let mut distinct: Vec<Mention> = parsed
            .think_paths
            .iter()
            .flatten()
            .chain(&parsed.answer)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        distinct.sort();
        let mut diagnostics = parsed.diagnostics;
        let mut tokens: BTreeMap<Mention, ObjectId> = BTreeMap::new();
        let mut next_placeholder = MAX_OBJECT_ID + 1;
        for r in resolve_mentions(&distinct, scene, radius) {
            let token = match r.resolved {
                Some(id) => id,
                None => {
                    diagnostics.push(format!(
                        "unresolved mention {:?} at ({}, {})",
                        r.mention.name, r.mention.x, r.mention.y
                    ));
                    next_placeholder += 1;
                    next_placeholder - 1
                }
            };
            tokens.insert(r.mention, token);
        }
        let think_paths = parsed
            .think_paths
            .iter()
            .map(|path| {
                let mut out: Vec<ObjectId> = Vec::with_capacity(path.len());
                for m in path {
                    let t = tokens[m];
                    if out.contains(&t) {
                        diagnostics.push(format!(
                            "mention {:?} resolves to an id already on its path",
                            m.name
                        ));
                    } else {
                        out.push(t);
                    }
                }
                out
            })
            .collect();
        ResolvedTrace {
            format_ok: parsed.format_ok,
            think_paths,
            answer: parsed.answer.iter().map(|m| tokens[m]).collect(),
            diagnostics,
        }
    }

    /// Parses `text` in `setting` and resolves it. NLP resolution needs the scene;
    /// without one every mention is unresolved.
    pub fn from_output(text: &str, setting: Setting, scene: Option<&SceneRecord>, radius: f64) -> Self {
        match setting {
            Setting::OracleSom => parse_som(text).into(),
            Setting::Nlp => {
                let parsed = parse_nlp(text);
                match scene {
                    Some(s) => ResolvedTrace::resolve(parsed, s, radius),
                    None => {
                        let empty = SceneRecord {
                            scene_id: String::new(),
                            view_id: String::new(),
                            width: 1,
                            height: 1,
                            objects: Vec::new(),
                        };
                        ResolvedTrace::resolve(parsed, &empty, radius)
                    }
                }
            }
        }
    }
}
