//! Shared domain types: timestamps, half-open intervals, emotion tags,
//! episodes and entities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::SemanticLocation;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_millis(ms: u64) -> Self {
        Self(ms)
    }

    pub const fn from_secs(s: u64) -> Self {
        Self(s * 1000)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    /// Milliseconds elapsed from `earlier` to `self`, saturating at zero.
    pub fn since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Half-open interval `[start, end)`. An absent end means the episode is
/// still open and is treated as +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Timestamp>,
}

impl TimeInterval {
    pub fn open(start: Timestamp) -> Self {
        Self { start, end: None }
    }

    /// Closed interval; `start` must not exceed `end`.
    pub fn closed(start: Timestamp, end: Timestamp) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::InvertedInterval { start, end });
        }
        Ok(Self { start, end: Some(end) })
    }

    pub fn is_closed(&self) -> bool {
        self.end.is_some()
    }

    fn end_or_max(&self) -> u64 {
        self.end.map_or(u64::MAX, |e| e.0)
    }
}

pub fn interval_overlaps(a: &TimeInterval, b: &TimeInterval) -> bool {
    a.start.0 < b.end_or_max() && b.start.0 < a.end_or_max()
}

pub fn interval_contains(outer: &TimeInterval, inner: &TimeInterval) -> bool {
    outer.start <= inner.start && inner.end_or_max() <= outer.end_or_max()
}

/// The four verifiable emotion groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionGroup {
    JoyTrust,
    SadnessFear,
    SurpriseAnticipation,
    AngerDisgust,
}

impl EmotionGroup {
    pub const ALL: [EmotionGroup; 4] = [
        EmotionGroup::JoyTrust,
        EmotionGroup::SadnessFear,
        EmotionGroup::SurpriseAnticipation,
        EmotionGroup::AngerDisgust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionGroup::JoyTrust => "joy_trust",
            EmotionGroup::SadnessFear => "sadness_fear",
            EmotionGroup::SurpriseAnticipation => "surprise_anticipation",
            EmotionGroup::AngerDisgust => "anger_disgust",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str().eq_ignore_ascii_case(s))
    }

    pub fn adjective(self) -> &'static str {
        match self {
            EmotionGroup::JoyTrust => "happy",
            EmotionGroup::SadnessFear => "sad",
            EmotionGroup::SurpriseAnticipation => "surprised",
            EmotionGroup::AngerDisgust => "angry",
        }
    }
}

impl fmt::Display for EmotionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Emotion intensity level, 0 (normal) to 3 (very).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Intensity(u8);

impl Intensity {
    pub const NORMAL: Intensity = Intensity(0);
    pub const MAX: Intensity = Intensity(3);

    pub fn new(level: u8) -> Result<Self, ModelError> {
        if level > 3 {
            return Err(ModelError::IntensityOutOfRange(level));
        }
        Ok(Self(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Intensity {
    type Error = ModelError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Intensity::new(v)
    }
}

impl From<Intensity> for u8 {
    fn from(i: Intensity) -> u8 {
        i.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EmotionTag {
    pub group: EmotionGroup,
    pub intensity: Intensity,
}

impl EmotionTag {
    pub fn new(group: EmotionGroup, level: u8) -> Result<Self, ModelError> {
        Ok(Self { group, intensity: Intensity::new(level)? })
    }
}

/// Canonical phrase for a tag: "normal", "a little happy", "happy", "very happy".
pub fn emotion_phrase(tag: EmotionTag) -> String {
    let adj = tag.group.adjective();
    match tag.intensity.level() {
        0 => "normal".to_string(),
        1 => format!("a little {adj}"),
        2 => adj.to_string(),
        _ => format!("very {adj}"),
    }
}

/// At most one tag per group. Serialized as `{group: intensity}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Emotions(BTreeMap<EmotionGroup, Intensity>);

impl Emotions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps the maximum intensity per group.
    pub fn merge(&mut self, tag: EmotionTag) {
        let slot = self.0.entry(tag.group).or_insert(tag.intensity);
        if tag.intensity > *slot {
            *slot = tag.intensity;
        }
    }

    pub fn merge_all(&mut self, other: &Emotions) {
        for tag in other.tags() {
            self.merge(tag);
        }
    }

    /// Overwrites a group's intensity regardless of the current value.
    pub fn set(&mut self, tag: EmotionTag) {
        self.0.insert(tag.group, tag.intensity);
    }

    pub fn get(&self, group: EmotionGroup) -> Option<Intensity> {
        self.0.get(&group).copied()
    }

    pub fn tags(&self) -> impl Iterator<Item = EmotionTag> + '_ {
        self.0.iter().map(|(&group, &intensity)| EmotionTag { group, intensity })
    }

    pub fn max_intensity(&self) -> Option<Intensity> {
        self.0.values().copied().max()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

impl FromIterator<EmotionTag> for Emotions {
    fn from_iter<I: IntoIterator<Item = EmotionTag>>(iter: I) -> Self {
        let mut e = Emotions::new();
        for tag in iter {
            e.merge(tag);
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Navigation,
    Manipulation,
    Perception,
    Hri,
}

impl Capability {
    pub const ALL: [Capability; 4] =
        [Capability::Navigation, Capability::Manipulation, Capability::Perception, Capability::Hri];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Navigation => "navigation",
            Capability::Manipulation => "manipulation",
            Capability::Perception => "perception",
            Capability::Hri => "hri",
        }
    }
}

/// Nesting level of an episode. Serialized as `{"kind": .., "subtype": ..}`
/// with `subtype` present only for capabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "subtype", rename_all = "snake_case")]
pub enum EpisodeKind {
    Context,
    Task,
    Capability(Capability),
}

impl EpisodeKind {
    pub fn name(self) -> &'static str {
        match self {
            EpisodeKind::Context => "context",
            EpisodeKind::Task => "task",
            EpisodeKind::Capability(_) => "capability",
        }
    }

    /// Whether an episode of this kind may be the parent of `child`.
    pub fn may_contain(self, child: EpisodeKind) -> bool {
        matches!(
            (self, child),
            (EpisodeKind::Context | EpisodeKind::Task, EpisodeKind::Task)
                | (EpisodeKind::Task, EpisodeKind::Capability(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpisodeId(pub u64);

impl fmt::Display for EpisodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Video,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MediaRef {
    pub path: String,
    pub kind: MediaKind,
}

/// One element of an episode's `what` field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentItem {
    EntityObservation {
        entity: String,
        fields: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        media: Option<MediaRef>,
    },
    Utterance {
        speaker: String,
        text: String,
    },
    ActionRecord {
        verb: String,
        args: Vec<String>,
    },
    Media(MediaRef),
}

impl ContentItem {
    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            ContentItem::ActionRecord { verb, .. } if verb.trim().is_empty() => Err(ModelError::EmptyVerb),
            ContentItem::Media(m) if m.path.is_empty() => Err(ModelError::EmptyMediaPath),
            ContentItem::EntityObservation { media: Some(m), .. } if m.path.is_empty() => {
                Err(ModelError::EmptyMediaPath)
            }
            _ => Ok(()),
        }
    }

    pub fn media(&self) -> Option<&MediaRef> {
        match self {
            ContentItem::Media(m) => Some(m),
            ContentItem::EntityObservation { media, .. } => media.as_ref(),
            _ => None,
        }
    }
}

/// A content item as stored, with its post-hoc annotation flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhatItem {
    #[serde(flatten)]
    pub item: ContentItem,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub post_hoc: bool,
}

impl WhatItem {
    pub fn new(item: ContentItem) -> Self {
        WhatItem { item, post_hoc: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: EpisodeId,
    #[serde(flatten)]
    pub kind: EpisodeKind,
    pub label: String,
    pub when: TimeInterval,
    #[serde(rename = "where")]
    pub locations: Vec<SemanticLocation>,
    pub what: Vec<WhatItem>,
    pub emotions: Emotions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<EpisodeId>,
    pub children: Vec<EpisodeId>,
}

impl Episode {
    pub fn new(id: EpisodeId, kind: EpisodeKind, label: impl Into<String>, start: Timestamp) -> Self {
        Self {
            id,
            kind,
            label: label.into(),
            when: TimeInterval::open(start),
            locations: Vec::new(),
            what: Vec::new(),
            emotions: Emotions::new(),
            parent: None,
            children: Vec::new(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.when.is_closed()
    }

    /// Action records in insertion order.
    pub fn actions(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.what.iter().filter_map(|w| match &w.item {
            ContentItem::ActionRecord { verb, args } => Some((verb.as_str(), args.as_slice())),
            _ => None,
        })
    }

    /// Entity ids this episode mentions directly (observations and speakers).
    pub fn mentioned_entities(&self) -> impl Iterator<Item = &str> {
        self.what.iter().filter_map(|w| match &w.item {
            ContentItem::EntityObservation { entity, .. } => Some(entity.as_str()),
            ContentItem::Utterance { speaker, .. } => Some(speaker.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityClass {
    Person,
    Object,
    Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: Timestamp,
    pub field: String,
    pub value: String,
    pub source: EpisodeId,
}

/// Observed fields that are also kept as static attributes.
pub const STATIC_FIELDS: [&str; 2] = ["name", "age"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub class: EntityClass,
    pub static_fields: BTreeMap<String, String>,
    pub state_history: Vec<StateRecord>,
}

impl Entity {
    pub fn new(id: impl Into<String>, class: EntityClass) -> Self {
        Self { id: id.into(), class, static_fields: BTreeMap::new(), state_history: Vec::new() }
    }

    /// Inserts keeping `state_history` sorted by timestamp; equal timestamps
    /// keep arrival order.
    pub fn record(&mut self, rec: StateRecord) {
        if STATIC_FIELDS.contains(&rec.field.as_str()) {
            self.static_fields.insert(rec.field.clone(), rec.value.clone());
        }
        let pos = self.state_history.partition_point(|r| r.t <= rec.t);
        self.state_history.insert(pos, rec);
    }

    /// Last-write-wins lookup of `field` at or before `at`.
    pub fn state_at(&self, field: &str, at: Timestamp) -> Option<&StateRecord> {
        self.state_history.iter().rev().find(|r| r.t <= at && r.field == field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("InvalidIntensity: {0} is outside 0..=3")]
    IntensityOutOfRange(u8),
    #[error("InvalidInterval: start {start} is after end {end}")]
    InvertedInterval { start: Timestamp, end: Timestamp },
    #[error("InvalidContent: action verb is empty")]
    EmptyVerb,
    #[error("InvalidContent: media path is empty")]
    EmptyMediaPath,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(s: u64, e: u64) -> TimeInterval {
        TimeInterval::closed(Timestamp(s), Timestamp(e)).unwrap()
    }

    #[test]
    fn overlap_examples() {
        assert!(interval_overlaps(&iv(0, 10), &iv(5, 15)));
        assert!(!interval_overlaps(&iv(0, 5), &iv(5, 10)));
        assert!(interval_overlaps(&iv(3, 4), &iv(0, 10)));
    }

    #[test]
    fn open_end_is_unbounded() {
        let open = TimeInterval::open(Timestamp(5));
        assert!(interval_overlaps(&open, &iv(100, 200)));
        assert!(interval_contains(&open, &iv(100, 200)));
        assert!(!interval_contains(&iv(0, 1000), &open));
    }

    #[test]
    fn contains_examples() {
        assert!(interval_contains(&iv(0, 10), &iv(2, 3)));
        assert!(!interval_contains(&iv(0, 10), &iv(5, 12)));
        assert!(interval_contains(&iv(0, 10), &iv(0, 10)));
    }

    #[test]
    fn inverted_interval_rejected() {
        assert!(TimeInterval::closed(Timestamp(5), Timestamp(4)).is_err());
    }

    #[test]
    fn phrase_examples() {
        let t = |g, l| EmotionTag::new(g, l).unwrap();
        assert_eq!(emotion_phrase(t(EmotionGroup::JoyTrust, 1)), "a little happy");
        assert_eq!(emotion_phrase(t(EmotionGroup::AngerDisgust, 3)), "very angry");
        assert_eq!(emotion_phrase(t(EmotionGroup::SadnessFear, 0)), "normal");
        assert_eq!(emotion_phrase(t(EmotionGroup::SurpriseAnticipation, 2)), "surprised");
    }

    #[test]
    fn phrase_is_injective_above_zero() {
        let mut seen = std::collections::HashSet::new();
        for g in EmotionGroup::ALL {
            for l in 1..=3 {
                assert!(seen.insert(emotion_phrase(EmotionTag::new(g, l).unwrap())));
            }
            assert_eq!(emotion_phrase(EmotionTag::new(g, 0).unwrap()), "normal");
        }
    }

    #[test]
    fn intensity_bounds() {
        assert!(Intensity::new(4).is_err());
        assert!(serde_json::from_str::<Intensity>("7").is_err());
        assert_eq!(serde_json::from_str::<Intensity>("2").unwrap().level(), 2);
    }

    #[test]
    fn emotions_keep_max_per_group() {
        let mut e = Emotions::new();
        e.merge(EmotionTag::new(EmotionGroup::JoyTrust, 2).unwrap());
        e.merge(EmotionTag::new(EmotionGroup::JoyTrust, 3).unwrap());
        e.merge(EmotionTag::new(EmotionGroup::JoyTrust, 1).unwrap());
        assert_eq!(e.len(), 1);
        assert_eq!(e.get(EmotionGroup::JoyTrust).unwrap().level(), 3);
    }

    #[test]
    fn kind_wire_shape() {
        let v = serde_json::to_value(EpisodeKind::Capability(Capability::Hri)).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "capability", "subtype": "hri"}));
        let v = serde_json::to_value(EpisodeKind::Task).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "task"}));
        let back: EpisodeKind = serde_json::from_value(serde_json::json!({"kind": "context"})).unwrap();
        assert_eq!(back, EpisodeKind::Context);
    }

    #[test]
    fn nesting_rules() {
        use EpisodeKind::*;
        let nav = Capability(super::Capability::Navigation);
        assert!(Context.may_contain(Task));
        assert!(Task.may_contain(Task));
        assert!(Task.may_contain(nav));
        assert!(!Context.may_contain(nav));
        assert!(!nav.may_contain(Task));
        assert!(!Task.may_contain(Context));
    }

    #[test]
    fn state_history_stays_sorted() {
        let mut e = Entity::new("apple", EntityClass::Object);
        let rec = |t, v: &str| StateRecord {
            t: Timestamp(t),
            field: "location".into(),
            value: v.into(),
            source: EpisodeId(1),
        };
        e.record(rec(10, "fridge"));
        e.record(rec(5, "desk"));
        e.record(rec(10, "bed"));
        let order: Vec<_> = e.state_history.iter().map(|r| r.value.as_str()).collect();
        assert_eq!(order, ["desk", "fridge", "bed"]);
        assert_eq!(e.state_at("location", Timestamp(10)).unwrap().value, "bed");
        assert_eq!(e.state_at("location", Timestamp(9)).unwrap().value, "desk");
        assert!(e.state_at("location", Timestamp(4)).is_none());
    }

    fn arb_interval() -> impl Strategy<Value = TimeInterval> {
        (0u64..100, 0u64..100, any::<bool>()).prop_map(|(a, b, open)| {
            let (s, e) = if a <= b { (a, b) } else { (b, a) };
            if open {
                TimeInterval::open(Timestamp(s))
            } else {
                TimeInterval::closed(Timestamp(s), Timestamp(e)).unwrap()
            }
        })
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric(a in arb_interval(), b in arb_interval()) {
            prop_assert_eq!(interval_overlaps(&a, &b), interval_overlaps(&b, &a));
        }

        #[test]
        fn contains_is_a_partial_order(a in arb_interval(), b in arb_interval(), c in arb_interval()) {
            prop_assert!(interval_contains(&a, &a));
            if interval_contains(&a, &b) && interval_contains(&b, &a) {
                prop_assert_eq!(a, b);
            }
            if interval_contains(&a, &b) && interval_contains(&b, &c) {
                prop_assert!(interval_contains(&a, &c));
            }
        }
    }
}
