//! Domain types shared by every stage of the pipeline, plus scene validation
//! and newline-delimited JSON dataset I/O.
//!
//! All coordinates are normalized to the image size. Boxes are stored in
//! center-size form `(cx, cy, w, h)` because group member points are box
//! centers.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in normalized center-size form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            cx: 0.5 * (x1 + x2),
            cy: 0.5 * (y1 + y2),
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    /// Corners `[x1, y1, x2, y2]` clipped to the unit square.
    pub fn clipped_corners(&self) -> [f64; 4] {
        let [x1, y1, x2, y2] = self.corners();
        [
            x1.clamp(0.0, 1.0),
            y1.clamp(0.0, 1.0),
            x2.clamp(0.0, 1.0),
            y2.clamp(0.0, 1.0),
        ]
    }

    /// Unclipped corners `[x1, y1, x2, y2]`.
    pub fn corners(&self) -> [f64; 4] {
        [
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        ]
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && self.w > 0.0
            && self.w <= 1.0
            && self.h > 0.0
            && self.h <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn l1(&self, other: &Point2) -> f64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn l2(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPerson {
    #[serde(rename = "box")]
    pub bbox: BBox,
    /// Binary action label, one entry per action class.
    pub action: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthGroup {
    /// Binary activity label, one entry per activity class.
    pub activity: Vec<u8>,
    /// Number of members.
    pub size: usize,
    pub member_indices: Vec<usize>,
    /// Member box centers, sorted by the configured [`PointOrder`].
    pub member_points: Vec<Point2>,
}

impl GroundTruthGroup {
    /// Group size normalized by the maximum group size.
    pub fn size_norm(&self, max_group_size: usize) -> f64 {
        self.size as f64 / max_group_size as f64
    }

    /// Index of the first active class, if any.
    pub fn activity_class(&self) -> Option<usize> {
        self.activity.iter().position(|&a| a == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrediction {
    pub activity_probs: Vec<f64>,
    pub size_norm: f64,
    pub member_points: Vec<Point2>,
}

impl GroupPrediction {
    /// `(class, probability)` of the most probable activity; lowest class wins ties.
    pub fn top_activity(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &p) in self.activity_probs.iter().enumerate() {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((k, p));
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualPrediction {
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub action_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub persons: Vec<GroundTruthPerson>,
    pub groups: Vec<GroundTruthGroup>,
    /// One token per person (same order as `persons`) followed by any
    /// background tokens.
    pub tokens: Vec<Vec<f64>>,
}

/// Ordering applied to ground-truth member points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PointOrder {
    #[default]
    AscX,
    AscY,
}

impl PointOrder {
    pub fn compare(self, a: &Point2, b: &Point2) -> Ordering {
        let (pa, sa, pb, sb) = match self {
            PointOrder::AscX => (a.x, a.y, b.x, b.y),
            PointOrder::AscY => (a.y, a.x, b.y, b.x),
        };
        pa.total_cmp(&pb).then(sa.total_cmp(&sb))
    }
}

impl std::str::FromStr for PointOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ascx" | "x" => Ok(PointOrder::AscX),
            "ascy" | "y" => Ok(PointOrder::AscY),
            other => Err(Error::Config(format!("unknown point order '{other}'"))),
        }
    }
}

/// Model, matching and loss hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N_a")]
    pub n_a: usize,
    #[serde(rename = "N_q")]
    pub n_q: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "D_tok")]
    pub d_tok: usize,
    #[serde(rename = "D_emb")]
    pub d_emb: usize,
    pub eta_v: f64,
    pub eta_s: f64,
    pub eta_u: f64,
    pub eta_c: f64,
    pub eta_b: f64,
    pub eta_o: f64,
    pub eta_a: f64,
    pub lambda_v: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub lambda_c: f64,
    pub lambda_b: f64,
    pub lambda_o: f64,
    pub lambda_a: f64,
    /// Divide each group's point loss by its size.
    #[serde(default)]
    pub normalize_lu: bool,
    #[serde(default)]
    pub point_order: PointOrder,
}

impl Default for HyperParams {
    /// Full-scale settings: 300 queries, maximum group size 12.
    fn default() -> Self {
        Self {
            n_v: 8,
            n_a: 9,
            n_q: 300,
            m: 12,
            d_tok: 256,
            d_emb: 256,
            eta_v: 2.0,
            eta_s: 1.0,
            eta_u: 5.0,
            eta_c: 1.0,
            eta_b: 5.0,
            eta_o: 2.0,
            eta_a: 2.0,
            lambda_v: 2.0,
            lambda_s: 1.0,
            lambda_u: 5.0,
            lambda_c: 1.0,
            lambda_b: 5.0,
            lambda_o: 2.0,
            lambda_a: 2.0,
            normalize_lu: false,
            point_order: PointOrder::AscX,
        }
    }
}

impl HyperParams {
    /// Small settings used for the synthetic end-to-end runs.
    pub fn desk() -> Self {
        Self {
            n_v: 4,
            n_a: 4,
            n_q: 16,
            m: 6,
            d_tok: 24,
            d_emb: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("N_v", self.n_v),
            ("N_a", self.n_a),
            ("N_q", self.n_q),
            ("M", self.m),
            ("D_tok", self.d_tok),
            ("D_emb", self.d_emb),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        let weights = [
            self.eta_v,
            self.eta_s,
            self.eta_u,
            self.eta_c,
            self.eta_b,
            self.eta_o,
            self.eta_a,
            self.lambda_v,
            self.lambda_s,
            self.lambda_u,
            self.lambda_c,
            self.lambda_b,
            self.lambda_o,
            self.lambda_a,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(
                "cost and loss weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Sorts member points by the primary coordinate of `order`, breaking ties by
/// the other coordinate.
pub fn sort_member_points(points: &[Point2], order: PointOrder) -> Result<Vec<Point2>> {
    if points.is_empty() {
        return Err(Error::EmptyPoints);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| order.compare(a, b));
    Ok(sorted)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MemberIndexOutOfRange { group: usize, index: usize },
    DuplicateMember { group: usize, index: usize },
    OverlappingMembership { person: usize },
    GroupSizeExceedsM { group: usize, size: usize },
    EmptyGroup { group: usize },
    SizeMismatch { group: usize },
    UnsortedPoints { group: usize },
    PointOutOfRange { group: usize },
    ActivityLength { group: usize, len: usize },
    ActionLength { person: usize, len: usize },
    ActionNotOneHot { person: usize },
    InvalidBox { person: usize },
    TooFewTokens { tokens: usize, persons: usize },
    TokenDimension { token: usize, len: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MemberIndexOutOfRange { group, index } => {
                write!(f, "group {group}: member index {index} out of range")
            }
            Violation::DuplicateMember { group, index } => {
                write!(f, "group {group}: duplicate member index {index}")
            }
            Violation::OverlappingMembership { person } => {
                write!(f, "person {person}: overlapping membership")
            }
            Violation::GroupSizeExceedsM { group, size } => {
                write!(f, "group {group}: group size exceeds M ({size})")
            }
            Violation::EmptyGroup { group } => write!(f, "group {group}: empty group"),
            Violation::SizeMismatch { group } => write!(
                f,
                "group {group}: size, member_indices and member_points disagree"
            ),
            Violation::UnsortedPoints { group } => {
                write!(f, "group {group}: unsorted member points")
            }
            Violation::PointOutOfRange { group } => {
                write!(f, "group {group}: member point outside the unit square")
            }
            Violation::ActivityLength { group, len } => {
                write!(f, "group {group}: activity has length {len}")
            }
            Violation::ActionLength { person, len } => {
                write!(f, "person {person}: action has length {len}")
            }
            Violation::ActionNotOneHot { person } => {
                write!(f, "person {person}: action is not one-hot")
            }
            Violation::InvalidBox { person } => write!(f, "person {person}: invalid box"),
            Violation::TooFewTokens { tokens, persons } => {
                write!(f, "{tokens} tokens for {persons} persons")
            }
            Violation::TokenDimension { token, len } => {
                write!(f, "token {token}: dimension {len}")
            }
        }
    }
}

/// Returns every invariant violation in `scene`; an empty list means the
/// scene is well formed.
pub fn validate_scene(scene: &Scene, hp: &HyperParams) -> Vec<Violation> {
    let mut out = Vec::new();

    for (p, person) in scene.persons.iter().enumerate() {
        if !person.bbox.is_valid() {
            out.push(Violation::InvalidBox { person: p });
        }
        if person.action.len() != hp.n_a {
            out.push(Violation::ActionLength {
                person: p,
                len: person.action.len(),
            });
        }
        let ones = person.action.iter().filter(|&&a| a == 1).count();
        let others = person.action.iter().filter(|&&a| a > 1).count();
        if ones != 1 || others != 0 {
            out.push(Violation::ActionNotOneHot { person: p });
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; scene.persons.len()];
    for (g, group) in scene.groups.iter().enumerate() {
        if group.activity.len() != hp.n_v {
            out.push(Violation::ActivityLength {
                group: g,
                len: group.activity.len(),
            });
        }
        if group.size == 0 {
            out.push(Violation::EmptyGroup { group: g });
        }
        if group.size > hp.m {
            out.push(Violation::GroupSizeExceedsM {
                group: g,
                size: group.size,
            });
        }
        if group.member_indices.len() != group.size || group.member_points.len() != group.size {
            out.push(Violation::SizeMismatch { group: g });
        }
        let mut seen = Vec::with_capacity(group.member_indices.len());
        for &idx in &group.member_indices {
            if idx >= scene.persons.len() {
                out.push(Violation::MemberIndexOutOfRange {
                    group: g,
                    index: idx,
                });
                continue;
            }
            if seen.contains(&idx) {
                out.push(Violation::DuplicateMember {
                    group: g,
                    index: idx,
                });
                continue;
            }
            seen.push(idx);
            match owner[idx] {
                Some(other) if other != g => {
                    out.push(Violation::OverlappingMembership { person: idx })
                }
                _ => owner[idx] = Some(g),
            }
        }
        if group.member_points.iter().any(|p| !p.in_unit_square()) {
            out.push(Violation::PointOutOfRange { group: g });
        }
        let sorted = group
            .member_points
            .windows(2)
            .all(|w| hp.point_order.compare(&w[0], &w[1]) != Ordering::Greater);
        if !sorted {
            out.push(Violation::UnsortedPoints { group: g });
        }
    }

    if scene.tokens.len() < scene.persons.len() {
        out.push(Violation::TooFewTokens {
            tokens: scene.tokens.len(),
            persons: scene.persons.len(),
        });
    }
    for (t, token) in scene.tokens.iter().enumerate() {
        if token.len() != hp.d_tok {
            out.push(Violation::TokenDimension {
                token: t,
                len: token.len(),
            });
        }
    }
    out
}

/// Writes scenes as newline-delimited JSON, one scene per line.
pub fn write_scenes_jsonl(path: &Path, scenes: &[Scene]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for scene in scenes {
        serde_json::to_writer(&mut writer, scene)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scenes_jsonl(path: &Path) -> Result<Vec<Scene>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scenes = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let scene = serde_json::from_str(&line)
            .map_err(|e| Error::json(format!("{}:{}", path.display(), lineno + 1), e))?;
        scenes.push(scene);
    }
    Ok(scenes)
}
