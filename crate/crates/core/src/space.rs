//! Arena map model and coordinate-free location descriptions.
//!
//! Poses are resolved against axis-aligned room and furniture rectangles
//! into [`SemanticLocation`]s; raw coordinates never leave this module in
//! textual form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn is_well_formed(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite()) && self.x0 <= self.x1 && self.y0 <= self.y1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(self.x0 - by, self.y0 - by, self.x1 + by, self.y1 + by)
    }

    /// Closed-set intersection test.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x0 - x).max(0.0).max(x - self.x1);
        let dy = (self.y0 - y).max(0.0).max(y - self.y1);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub name: String,
    pub room: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArea {
    pub name: String,
    pub rect: Rect,
}

pub const DEFAULT_FURNITURE_INFLATION: f64 = 0.5;
pub const DEFAULT_NEAR_THRESHOLD: f64 = 1.0;

fn default_inflation() -> f64 {
    DEFAULT_FURNITURE_INFLATION
}

fn default_near() -> f64 {
    DEFAULT_NEAR_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaMap {
    pub bounds: Rect,
    #[serde(default)]
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub furniture: Vec<Furniture>,
    #[serde(default)]
    pub named_areas: Vec<NamedArea>,
    #[serde(default = "default_inflation")]
    pub furniture_inflation: f64,
    #[serde(default = "default_near")]
    pub near_threshold: f64,
}

const DEFAULT_ARENA_JSON: &str = include_str!("../fixtures/arena.json");

fn is_slug(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
        && s.as_bytes()[0].is_ascii_lowercase()
}

impl ArenaMap {
    /// The apartment arena shipped with the crate.
    pub fn default_arena() -> ArenaMap {
        Self::from_json(DEFAULT_ARENA_JSON).expect("bundled arena fixture is valid")
    }

    pub fn from_json(text: &str) -> Result<ArenaMap, MapError> {
        let map: ArenaMap = serde_json::from_str(text).map_err(|e| MapError::InvalidMap(e.to_string()))?;
        map.check()?;
        Ok(map)
    }

    pub fn check(&self) -> Result<(), MapError> {
        let bad = |msg: String| Err(MapError::InvalidMap(msg));
        if !self.bounds.is_well_formed() {
            return bad("bounds are not a well-formed rectangle".into());
        }
        if !(self.furniture_inflation >= 0.0 && self.near_threshold >= 0.0) {
            return bad("inflation and near threshold must be non-negative".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for room in &self.rooms {
            if !is_slug(&room.name) {
                return bad(format!("room name {:?} is not a lowercase slug", room.name));
            }
            if !seen.insert(room.name.as_str()) {
                return bad(format!("duplicate room name {:?}", room.name));
            }
            if !room.rect.is_well_formed() {
                return bad(format!("room {:?} has a malformed rectangle", room.name));
            }
        }
        for f in &self.furniture {
            if !is_slug(&f.name) {
                return bad(format!("furniture name {:?} is not a lowercase slug", f.name));
            }
            if !f.rect.is_well_formed() {
                return bad(format!("furniture {:?} has a malformed rectangle", f.name));
            }
            match self.room(&f.room) {
                None => return bad(format!("furniture {:?} references unknown room {:?}", f.name, f.room)),
                Some(room) if !room.rect.intersects(&f.rect) => {
                    return bad(format!("furniture {:?} lies outside room {:?}", f.name, f.room))
                }
                Some(_) => {}
            }
        }
        for a in &self.named_areas {
            if !is_slug(&a.name) || !a.rect.is_well_formed() {
                return bad(format!("named area {:?} is invalid", a.name));
            }
        }
        Ok(())
    }

    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn furniture_named(&self, name: &str) -> Option<&Furniture> {
        self.furniture.iter().find(|f| f.name == name)
    }

    /// Rectangle of any named map element: furniture, then room, then area.
    pub fn anchor_rect(&self, name: &str) -> Option<Rect> {
        self.furniture_named(name)
            .map(|f| f.rect)
            .or_else(|| self.room(name).map(|r| r.rect))
            .or_else(|| self.named_areas.iter().find(|a| a.name == name).map(|a| a.rect))
    }

    /// Smallest-area room containing the point; ties go to the first listed.
    fn room_at(&self, x: f64, y: f64) -> Option<&Room> {
        let mut best: Option<&Room> = None;
        for room in self.rooms.iter().filter(|r| r.rect.contains(x, y)) {
            if best.is_none_or(|b| room.rect.area() < b.rect.area()) {
                best = Some(room);
            }
        }
        best
    }
}

pub fn load_map(path: &Path) -> Result<ArenaMap, MapError> {
    let text = fs::read_to_string(path).map_err(|e| MapError::Io(format!("{}: {e}", path.display())))?;
    ArenaMap::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    InsideArena,
    OutsideArena,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    LeftOf,
    RightOf,
    Over,
    Under,
    Near,
}

impl Predicate {
    pub fn phrase(self) -> &'static str {
        match self {
            Predicate::LeftOf => "at the left of",
            Predicate::RightOf => "at the right of",
            Predicate::Over => "over",
            Predicate::Under => "under",
            Predicate::Near => "near",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub predicate: Predicate,
    pub anchor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticLocation {
    pub scope: Scope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub furniture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
}

/// Map slugs read as words in text ("living_room" -> "living room").
pub fn spoken_name(slug: &str) -> String {
    slug.replace(['_', '-'], " ")
}

impl SemanticLocation {
    pub fn outside() -> Self {
        SemanticLocation { scope: Scope::OutsideArena, room: None, furniture: None, area: None, relation: None }
    }

    pub fn inside() -> Self {
        SemanticLocation { scope: Scope::InsideArena, ..Self::outside() }
    }

    pub fn in_room(room: &str) -> Self {
        SemanticLocation { room: Some(room.to_string()), ..Self::inside() }
    }

    pub fn is_inside(&self) -> bool {
        self.scope == Scope::InsideArena
    }

    /// Whether `name` is any of the places this location refers to.
    pub fn mentions(&self, name: &str) -> bool {
        self.room.as_deref() == Some(name)
            || self.furniture.as_deref() == Some(name)
            || self.area.as_deref() == Some(name)
            || self.relation.as_ref().is_some_and(|r| r.anchor == name)
    }

    /// Human-readable description, e.g. "kitchen" or "fridge in the kitchen".
    pub fn describe(&self) -> String {
        if self.scope == Scope::OutsideArena {
            return "outside the arena".to_string();
        }
        let place = match (&self.room, &self.area) {
            (Some(room), _) => Some(spoken_name(room)),
            (None, Some(area)) => Some(spoken_name(area)),
            (None, None) => None,
        };
        let detail = if let Some(rel) = &self.relation {
            Some(format!("{} the {}", rel.predicate.phrase(), spoken_name(&rel.anchor)))
        } else {
            self.furniture.as_ref().map(|f| format!("by the {}", spoken_name(f)))
        };
        match (detail, place) {
            (Some(d), Some(p)) => format!("{d} in the {p}"),
            (Some(d), None) => d,
            (None, Some(p)) => p,
            (None, None) => "inside the arena".to_string(),
        }
    }
}

/// Total: every point maps to some location.
pub fn resolve_pose(map: &ArenaMap, x: f64, y: f64) -> SemanticLocation {
    if !map.bounds.contains(x, y) {
        return SemanticLocation::outside();
    }
    let mut loc = SemanticLocation::inside();
    let mut best_area: Option<&NamedArea> = None;
    for a in map.named_areas.iter().filter(|a| a.rect.contains(x, y)) {
        if best_area.is_none_or(|b| a.rect.area() < b.rect.area()) {
            best_area = Some(a);
        }
    }
    loc.area = best_area.map(|a| a.name.clone());
    if let Some(room) = map.room_at(x, y) {
        loc.room = Some(room.name.clone());
        let mut nearest: Option<(&Furniture, f64)> = None;
        for f in map.furniture.iter().filter(|f| f.room == room.name) {
            if !f.rect.inflate(map.furniture_inflation).contains(x, y) {
                continue;
            }
            let d = f.rect.distance_to(x, y);
            if nearest.is_none_or(|(_, bd)| d < bd) {
                nearest = Some((f, d));
            }
        }
        loc.furniture = nearest.map(|(f, _)| f.name.clone());
    }
    loc
}

/// Spatial predicate of `subject` relative to the named anchor.
///
/// Stacking (x-ranges overlapping with positive length, y-ranges disjoint)
/// yields over/under. Otherwise centroids closer than the map's near
/// threshold give near, and the centroid x decides left/right. Coincident
/// centroid x with no stacking also reads as near.
pub fn relative_position(map: &ArenaMap, subject: &Rect, anchor: &str) -> Result<Predicate, MapError> {
    let a = map.anchor_rect(anchor).ok_or_else(|| MapError::UnknownAnchor(anchor.to_string()))?;
    let x_overlap = subject.x0.max(a.x0) < subject.x1.min(a.x1);
    if x_overlap {
        if subject.y0 >= a.y1 {
            return Ok(Predicate::Over);
        }
        if subject.y1 <= a.y0 {
            return Ok(Predicate::Under);
        }
    }
    let (sx, sy) = subject.centroid();
    let (ax, ay) = a.centroid();
    if (sx - ax).hypot(sy - ay) < map.near_threshold {
        return Ok(Predicate::Near);
    }
    if sx < ax {
        Ok(Predicate::LeftOf)
    } else if sx > ax {
        Ok(Predicate::RightOf)
    } else {
        Ok(Predicate::Near)
    }
}

const PX_PER_M: f64 = 50.0;
const MARGIN: f64 = 20.0;
const ROOM_STROKE: &str = "#444444";
const ROOM_FILL: &str = "#f4f4f4";
const HIGHLIGHT_FILL: &str = "#ffd166";
const FURNITURE_FILL: &str = "#cfd8dc";
const MARKER_FILL: &str = "#d62828";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG document highlighting the location's room with a marker dot.
pub fn map_marker_svg(map: &ArenaMap, loc: &SemanticLocation) -> Result<String, MapError> {
    if !loc.is_inside() {
        return Err(MapError::OutsideArena);
    }
    let b = map.bounds;
    let w = (b.x1 - b.x0) * PX_PER_M + 2.0 * MARGIN;
    let h = (b.y1 - b.y0) * PX_PER_M + 2.0 * MARGIN;
    // Map y grows upwards; SVG y grows downwards.
    let px = |x: f64| (x - b.x0) * PX_PER_M + MARGIN;
    let py = |y: f64| (b.y1 - y) * PX_PER_M + MARGIN;
    let rect_el = |out: &mut String, r: &Rect, fill: &str, class: &str, name: &str| {
        let _ = writeln!(
            out,
            r#"  <rect class="{class}" data-name="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="{ROOM_STROKE}" stroke-width="1"/>"#,
            xml_escape(name),
            px(r.x0),
            py(r.y1),
            (r.x1 - r.x0) * PX_PER_M,
            (r.y1 - r.y0) * PX_PER_M,
        );
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(out, r#"  <rect class="arena" x="{MARGIN:.2}" y="{MARGIN:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{ROOM_STROKE}" stroke-width="2"/>"#,
        w - 2.0 * MARGIN, h - 2.0 * MARGIN);
    for room in &map.rooms {
        let hl = loc.room.as_deref() == Some(room.name.as_str());
        let fill = if hl { HIGHLIGHT_FILL } else { ROOM_FILL };
        rect_el(&mut out, &room.rect, fill, if hl { "room highlight" } else { "room" }, &room.name);
    }
    for f in &map.furniture {
        rect_el(&mut out, &f.rect, FURNITURE_FILL, "furniture", &f.name);
    }
    for room in &map.rooms {
        let (cx, _) = room.rect.centroid();
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            px(cx),
            py(room.rect.y1) + 14.0,
            xml_escape(&spoken_name(&room.name))
        );
    }
    let target = loc
        .furniture
        .as_deref()
        .and_then(|f| map.furniture_named(f))
        .map(|f| f.rect)
        .or_else(|| loc.room.as_deref().and_then(|r| map.room(r)).map(|r| r.rect))
        .or_else(|| loc.area.as_deref().and_then(|a| map.anchor_rect(a)))
        .unwrap_or(map.bounds);
    let (mx, my) = target.centroid();
    let _ = writeln!(out, r#"  <circle class="marker" cx="{:.2}" cy="{:.2}" r="6" fill="{MARKER_FILL}"/>"#, px(mx), py(my));
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_map_marker(map: &ArenaMap, loc: &SemanticLocation, out: &Path) -> Result<(), MapError> {
    let svg = map_marker_svg(map, loc)?;
    fs::write(out, svg).map_err(|e| MapError::Io(format!("{}: {e}", out.display())))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("IoError: {0}")]
    Io(String),
    #[error("InvalidMap: {0}")]
    InvalidMap(String),
    #[error("UnknownAnchor: {0}")]
    UnknownAnchor(String),
    #[error("OutsideArena: location is outside the arena")]
    OutsideArena,
}
