//! Episode tree construction from an event stream, the long-term store,
//! structural validation and snapshots.
//!
//! Events are ingested into a [`WorkingMemory`] that holds open episodes and
//! closed-but-unconsolidated subtrees. Consolidation (see
//! [`crate::relevance::consolidate`]) moves closed roots into the [`Store`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json;
use crate::model::{
    interval_contains, interval_overlaps, ContentItem, EmotionGroup, EmotionTag, Entity, EntityClass, Episode,
    EpisodeId, EpisodeKind, Intensity, MediaRef, ModelError, StateRecord, Timestamp, WhatItem,
};

// ── Events ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: Timestamp,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Begin {
        #[serde(flatten)]
        kind: EpisodeKind,
        label: String,
    },
    /// Closes the innermost open episode, or the innermost one carrying
    /// `label` when given.
    End {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Observe {
        entity: String,
        class: EntityClass,
        fields: BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        media: Option<MediaRef>,
    },
    Say {
        speaker: String,
        text: String,
    },
    Act {
        verb: String,
        #[serde(default)]
        args: Vec<String>,
    },
    Emotion {
        group: EmotionGroup,
        intensity: Intensity,
    },
    Pose {
        x: f64,
        y: f64,
    },
}

impl Event {
    pub fn new(t: Timestamp, payload: EventPayload) -> Self {
        Event { t, payload }
    }

    pub fn to_line(&self) -> String {
        json::to_canonical_line(self).expect("events serialize")
    }
}

/// Parses newline-delimited JSON events. Blank lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<Event>, IngestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| IngestError::MalformedEvent { line: i + 1, reason: e.to_string() }))
        .collect()
}

pub fn read_event_log(path: &Path) -> Result<Vec<Event>, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IngestError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedEvent { line: i + 1, reason: e.to_string() })?,
        );
    }
    Ok(events)
}

pub fn write_event_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("NestingViolation: {0}")]
    NestingViolation(String),
    #[error("EndWithoutOpen: no open episode at {0}")]
    EndWithoutOpen(Timestamp),
    #[error("EndLabelMismatch: no open episode labelled {0:?}")]
    EndLabelMismatch(String),
    #[error("NoOpenEpisode: content event at {0} with no open episode")]
    NoOpenEpisode(Timestamp),
    #[error("OutOfOrderTimestamp: {t} is before last ingested {last}")]
    OutOfOrderTimestamp { t: Timestamp, last: Timestamp },
    #[error("EntityClassMismatch: {entity} is a {known:?}, observed as {observed:?}")]
    EntityClassMismatch { entity: String, known: EntityClass, observed: EntityClass },
    #[error("InvalidPose: coordinates must be finite")]
    InvalidPose,
    #[error("MalformedEvent: line {line}: {reason}")]
    MalformedEvent { line: usize, reason: String },
    #[error("IoError: {0}")]
    Io(String),
    #[error(transparent)]
    Content(#[from] ModelError),
}

// ── Working memory ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: Timestamp,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PendingState {
    pub entity: String,
    pub class: EntityClass,
    pub record: StateRecord,
}

/// Short-term buffer: open episodes, closed subtrees awaiting
/// consolidation, the raw pose trail and entity updates not yet committed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkingMemory {
    pub(crate) episodes: BTreeMap<EpisodeId, Episode>,
    /// Open episodes in begin order; the innermost is last.
    pub(crate) open: Vec<EpisodeId>,
    pub(crate) closed_roots: Vec<EpisodeId>,
    pub(crate) poses: Vec<PoseSample>,
    pub(crate) pending: Vec<PendingState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) last_t: Option<Timestamp>,
}

impl WorkingMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_episodes(&self) -> impl Iterator<Item = &Episode> {
        self.open.iter().map(|id| &self.episodes[id])
    }

    pub fn closed_roots(&self) -> &[EpisodeId] {
        &self.closed_roots
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&Episode> {
        self.episodes.get(&id)
    }

    pub fn poses(&self) -> &[PoseSample] {
        &self.poses
    }

    pub fn last_timestamp(&self) -> Option<Timestamp> {
        self.last_t
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    fn innermost(&self, t: Timestamp) -> Result<EpisodeId, IngestError> {
        self.open.last().copied().ok_or(IngestError::NoOpenEpisode(t))
    }

    fn known_class(&self, store: &Store, entity: &str) -> Option<EntityClass> {
        store
            .entities
            .get(entity)
            .map(|e| e.class)
            .or_else(|| self.pending.iter().rev().find(|p| p.entity == entity).map(|p| p.class))
    }

    /// Applies one event. On error nothing is modified.
    pub fn ingest(&mut self, store: &mut Store, e: &Event) -> Result<(), IngestError> {
        if let Some(last) = self.last_t {
            if e.t < last {
                return Err(IngestError::OutOfOrderTimestamp { t: e.t, last });
            }
        }
        match &e.payload {
            EventPayload::Begin { kind, label } => self.begin(store, e.t, *kind, label)?,
            EventPayload::End { label } => self.end(e.t, label.as_deref())?,
            EventPayload::Observe { entity, class, fields, media } => {
                if let Some(known) = self.known_class(store, entity) {
                    if known != *class {
                        return Err(IngestError::EntityClassMismatch {
                            entity: entity.clone(),
                            known,
                            observed: *class,
                        });
                    }
                }
                let item = ContentItem::EntityObservation {
                    entity: entity.clone(),
                    fields: fields.clone(),
                    media: media.clone(),
                };
                item.check()?;
                let id = self.innermost(e.t)?;
                self.push_item(id, item, false);
                for (field, value) in fields {
                    self.pending.push(PendingState {
                        entity: entity.clone(),
                        class: *class,
                        record: StateRecord { t: e.t, field: field.clone(), value: value.clone(), source: id },
                    });
                }
            }
            EventPayload::Say { speaker, text } => {
                let id = self.innermost(e.t)?;
                self.push_item(id, ContentItem::Utterance { speaker: speaker.clone(), text: text.clone() }, false);
            }
            EventPayload::Act { verb, args } => {
                let item = ContentItem::ActionRecord { verb: verb.clone(), args: args.clone() };
                item.check()?;
                let id = self.innermost(e.t)?;
                self.push_item(id, item, false);
            }
            EventPayload::Emotion { group, intensity } => {
                let id = self.innermost(e.t)?;
                let ep = self.episodes.get_mut(&id).expect("open episode present");
                ep.emotions.merge(EmotionTag { group: *group, intensity: *intensity });
            }
            EventPayload::Pose { x, y } => {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(IngestError::InvalidPose);
                }
                self.poses.push(PoseSample { t: e.t, x: *x, y: *y });
            }
        }
        self.last_t = Some(e.t);
        Ok(())
    }

    pub fn ingest_all<'a>(
        &mut self,
        store: &mut Store,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<usize, IngestError> {
        let mut n = 0;
        for e in events {
            self.ingest(store, e)?;
            n += 1;
        }
        Ok(n)
    }

    fn push_item(&mut self, id: EpisodeId, item: ContentItem, post_hoc: bool) {
        let ep = self.episodes.get_mut(&id).expect("episode present");
        ep.what.push(WhatItem { item, post_hoc });
    }

    fn begin(&mut self, store: &mut Store, t: Timestamp, kind: EpisodeKind, label: &str) -> Result<(), IngestError> {
        let parent = match kind {
            EpisodeKind::Context => {
                if let Some(open) = self.open.first() {
                    return Err(IngestError::NestingViolation(format!(
                        "context {label:?} begins while episode {open} is open"
                    )));
                }
                None
            }
            _ => {
                // Capabilities are leaves: a new episode attaches to the
                // innermost open non-capability, which lets capabilities run
                // concurrently under one task.
                let candidate = self
                    .open
                    .iter()
                    .rev()
                    .map(|id| &self.episodes[id])
                    .find(|ep| !matches!(ep.kind, EpisodeKind::Capability(_)));
                match candidate {
                    Some(p) if p.kind.may_contain(kind) => Some(p.id),
                    Some(p) => {
                        return Err(IngestError::NestingViolation(format!(
                            "{} {label:?} cannot be nested in {} {}",
                            kind.name(),
                            p.kind.name(),
                            p.id
                        )))
                    }
                    None => {
                        return Err(IngestError::NestingViolation(format!(
                            "{} {label:?} begins with no open container",
                            kind.name()
                        )))
                    }
                }
            }
        };
        let id = EpisodeId(store.next_id);
        store.next_id += 1;
        let mut ep = Episode::new(id, kind, label, t);
        ep.parent = parent;
        if let Some(p) = parent {
            self.episodes.get_mut(&p).expect("parent open").children.push(id);
        }
        self.episodes.insert(id, ep);
        self.open.push(id);
        Ok(())
    }

    fn end(&mut self, t: Timestamp, label: Option<&str>) -> Result<(), IngestError> {
        if self.open.is_empty() {
            return Err(IngestError::EndWithoutOpen(t));
        }
        let pos = match label {
            None => self.open.len() - 1,
            Some(l) => self
                .open
                .iter()
                .rposition(|id| self.episodes[id].label == l)
                .ok_or_else(|| IngestError::EndLabelMismatch(l.to_string()))?,
        };
        let id = self.open[pos];
        if let Some(child) = self.open[pos + 1..].iter().find(|c| self.episodes[c].parent == Some(id)) {
            return Err(IngestError::NestingViolation(format!("episode {id} ends while its child {child} is open")));
        }
        self.open.remove(pos);
        let ep = self.episodes.get_mut(&id).expect("open episode present");
        ep.when.end = Some(t);
        if ep.parent.is_none() {
            self.closed_roots.push(id);
        }
        Ok(())
    }

    /// Removes a closed root subtree, returning its episodes in pre-order.
    pub(crate) fn take_subtree(&mut self, root: EpisodeId) -> Vec<Episode> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            let ep = self.episodes.remove(&id).expect("subtree member present");
            stack.extend(ep.children.iter().rev().copied());
            out.push(ep);
        }
        out
    }

    /// Drops pose samples no longer needed to resolve any open episode.
    pub(crate) fn trim_poses(&mut self) {
        let keep_from = self.open_episodes().map(|e| e.when.start).min();
        let cut = match keep_from {
            // Keep the last sample at or before the earliest open start.
            Some(start) => self.poses.partition_point(|p| p.t <= start).saturating_sub(1),
            None => self.poses.len().saturating_sub(1),
        };
        self.poses.drain(..cut);
    }
}

// ── Long-term store ─────────────────────────────────────────────────────────

/// Secondary indexes over the store, rebuilt after every mutation.
#[derive(Debug, Clone, Default)]
pub struct StoreIndex {
    pub by_kind: BTreeMap<&'static str, BTreeSet<EpisodeId>>,
    pub by_entity: BTreeMap<String, BTreeSet<EpisodeId>>,
    pub by_place: BTreeMap<String, BTreeSet<EpisodeId>>,
    /// (start, id), sorted.
    pub by_start: Vec<(Timestamp, EpisodeId)>,
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    pub(crate) episodes: BTreeMap<EpisodeId, Episode>,
    pub(crate) entities: BTreeMap<String, Entity>,
    pub(crate) roots: Vec<EpisodeId>,
    pub(crate) next_id: u64,
    index: StoreIndex,
}

impl PartialEq for Store {
    fn eq(&self, other: &Self) -> bool {
        self.episodes == other.episodes
            && self.entities == other.entities
            && self.roots == other.roots
            && self.next_id == other.next_id
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    episodes: Vec<Episode>,
    entities: Vec<Entity>,
    roots: Vec<EpisodeId>,
    next_id: u64,
}

impl Store {
    pub fn new() -> Self {
        Store { next_id: 1, ..Default::default() }
    }

    pub fn episode(&self, id: EpisodeId) -> Option<&Episode> {
        self.episodes.get(&id)
    }

    pub fn require(&self, id: EpisodeId) -> Result<&Episode, StoreError> {
        self.episodes.get(&id).ok_or(StoreError::UnknownEpisode(id))
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.values()
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn roots(&self) -> &[EpisodeId] {
        &self.roots
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn index(&self) -> &StoreIndex {
        &self.index
    }

    /// Ancestors of `id` from the root down, excluding `id`.
    pub fn ancestors(&self, id: EpisodeId) -> Vec<EpisodeId> {
        let mut chain = Vec::new();
        let mut cur = self.episodes.get(&id).and_then(|e| e.parent);
        while let Some(p) = cur {
            chain.push(p);
            cur = self.episodes.get(&p).and_then(|e| e.parent);
        }
        chain.reverse();
        chain
    }

    /// All descendants of `id` in pre-order.
    pub fn descendants(&self, id: EpisodeId) -> Vec<EpisodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<EpisodeId> =
            self.episodes.get(&id).map(|e| e.children.iter().rev().copied().collect()).unwrap_or_default();
        while let Some(c) = stack.pop() {
            out.push(c);
            if let Some(e) = self.episodes.get(&c) {
                stack.extend(e.children.iter().rev().copied());
            }
        }
        out
    }

    pub(crate) fn reindex(&mut self) {
        let mut idx = StoreIndex::default();
        for ep in self.episodes.values() {
            idx.by_kind.entry(ep.kind.name()).or_default().insert(ep.id);
            for ent in ep.mentioned_entities() {
                idx.by_entity.entry(ent.to_string()).or_default().insert(ep.id);
            }
            for loc in &ep.locations {
                for name in [&loc.room, &loc.furniture, &loc.area].into_iter().flatten() {
                    idx.by_place.entry(name.clone()).or_default().insert(ep.id);
                }
                if let Some(rel) = &loc.relation {
                    idx.by_place.entry(rel.anchor.clone()).or_default().insert(ep.id);
                }
            }
            idx.by_start.push((ep.when.start, ep.id));
        }
        idx.by_start.sort();
        self.index = idx;
    }

    pub(crate) fn insert_episodes(&mut self, eps: Vec<Episode>) {
        for ep in eps {
            if ep.parent.is_none() {
                self.roots.push(ep.id);
            }
            self.next_id = self.next_id.max(ep.id.0 + 1);
            self.episodes.insert(ep.id, ep);
        }
    }

    pub(crate) fn record_state(&mut self, entity: &str, class: EntityClass, rec: StateRecord) {
        self.entities.entry(entity.to_string()).or_insert_with(|| Entity::new(entity, class)).record(rec);
    }

    pub fn get_what(&self, id: EpisodeId) -> Result<&[WhatItem], StoreError> {
        Ok(&self.require(id)?.what)
    }

    /// Siblings (same parent, or fellow roots) whose intervals overlap `id`'s.
    pub fn transposed_with(&self, id: EpisodeId) -> Result<Vec<EpisodeId>, StoreError> {
        let ep = self.require(id)?;
        if !ep.is_closed() {
            return Err(StoreError::OpenEpisode(id));
        }
        let siblings: &[EpisodeId] = match ep.parent {
            Some(p) => &self.require(p)?.children,
            None => &self.roots,
        };
        Ok(siblings
            .iter()
            .copied()
            .filter(|&s| s != id)
            .filter(|s| self.episodes.get(s).is_some_and(|o| interval_overlaps(&ep.when, &o.when)))
            .collect())
    }

    /// Sub-store induced by `ids`: only those episodes, with parent/child
    /// links and entity history restricted to the set. Every entity keeps its
    /// class so that narration reads the same.
    pub fn induced(&self, ids: &[EpisodeId]) -> Store {
        let keep: BTreeSet<EpisodeId> = ids.iter().copied().filter(|id| self.episodes.contains_key(id)).collect();
        let mut sub = Store { next_id: self.next_id, ..Default::default() };
        for id in &keep {
            let mut ep = self.episodes[id].clone();
            ep.children.retain(|c| keep.contains(c));
            if ep.parent.is_some_and(|p| !keep.contains(&p)) {
                ep.parent = None;
            }
            sub.episodes.insert(*id, ep);
        }
        sub.roots = sub.episodes.values().filter(|e| e.parent.is_none()).map(|e| e.id).collect();
        for ent in self.entities.values() {
            let mut e = Entity::new(ent.id.clone(), ent.class);
            for r in ent.state_history.iter().filter(|r| keep.contains(&r.source)) {
                e.record(r.clone());
            }
            sub.entities.insert(ent.id.clone(), e);
        }
        sub.reindex();
        sub
    }

    // ── validation ──

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (&key, ep) in &self.episodes {
            let id = ep.id;
            if key != id || id.0 >= self.next_id {
                v.push(Violation::IdViolation { id });
            }
            if !ep.is_closed() {
                v.push(Violation::OpenEpisodeInStore { id });
            }
            if ep.emotions.is_empty() {
                v.push(Violation::MissingEmotion { id });
            }
            if ep.what.iter().any(|w| w.item.check().is_err()) {
                v.push(Violation::InvalidContent { id });
            }
            match ep.parent {
                None => {
                    if ep.kind != EpisodeKind::Context {
                        v.push(Violation::NestingKindViolation { id });
                    }
                    if !self.roots.contains(&id) {
                        v.push(Violation::RootListViolation { id });
                    }
                }
                Some(p) => match self.episodes.get(&p) {
                    None => v.push(Violation::DanglingReference { id, target: p }),
                    Some(parent) => {
                        if !parent.kind.may_contain(ep.kind) {
                            v.push(Violation::NestingKindViolation { id });
                        }
                        if !parent.children.contains(&id) {
                            v.push(Violation::LinkMismatch { id });
                        }
                        if !interval_contains(&parent.when, &ep.when) {
                            v.push(Violation::ContainmentViolation { id });
                        }
                    }
                },
            }
            let mut seen = BTreeSet::new();
            for &c in &ep.children {
                if !seen.insert(c) {
                    v.push(Violation::LinkMismatch { id });
                }
                match self.episodes.get(&c) {
                    None => v.push(Violation::DanglingReference { id, target: c }),
                    Some(child) if child.parent != Some(id) => v.push(Violation::LinkMismatch { id: c }),
                    Some(_) => {}
                }
            }
            let starts: Vec<Timestamp> =
                ep.children.iter().filter_map(|c| self.episodes.get(c)).map(|c| c.when.start).collect();
            if starts.windows(2).any(|w| w[0] > w[1]) {
                v.push(Violation::SequenceViolation { id });
            }
        }
        let mut seen = BTreeSet::new();
        for &r in &self.roots {
            match self.episodes.get(&r) {
                Some(ep) if ep.parent.is_none() && seen.insert(r) => {}
                _ => v.push(Violation::RootListViolation { id: r }),
            }
        }
        for ent in self.entities.values() {
            if ent.state_history.windows(2).any(|w| w[0].t > w[1].t) {
                v.push(Violation::UnsortedHistory { entity: ent.id.clone() });
            }
            for r in &ent.state_history {
                if !self.episodes.contains_key(&r.source) {
                    v.push(Violation::DanglingSource { entity: ent.id.clone(), source: r.source });
                }
            }
        }
        v
    }

    // ── persistence ──

    pub fn to_snapshot_string(&self) -> String {
        let snap = Snapshot {
            episodes: self.episodes.values().cloned().collect(),
            entities: self.entities.values().cloned().collect(),
            roots: self.roots.clone(),
            next_id: self.next_id,
        };
        json::to_canonical_string(&snap).expect("store serializes")
    }

    pub fn from_snapshot_str(text: &str) -> Result<Store, StoreError> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
        let mut store = Store { next_id: snap.next_id, roots: snap.roots, ..Default::default() };
        for ep in snap.episodes {
            let id = ep.id;
            if store.episodes.insert(id, ep).is_some() {
                return Err(StoreError::CorruptSnapshot(format!("duplicate episode id {id}")));
            }
        }
        for ent in snap.entities {
            let id = ent.id.clone();
            if store.entities.insert(id.clone(), ent).is_some() {
                return Err(StoreError::CorruptSnapshot(format!("duplicate entity id {id}")));
            }
        }
        let violations = store.validate();
        if let Some(first) = violations.first() {
            return Err(StoreError::CorruptSnapshot(format!(
                "{} invariant violation(s), first: {first:?}",
                violations.len()
            )));
        }
        store.reindex();
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, self.to_snapshot_string()).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Store, StoreError> {
        let text = fs::read_to_string(path).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
        Store::from_snapshot_str(&text)
    }
}

/// Appends a content item to an episode in the store or in working memory.
///
/// Items added to closed episodes are flagged post-hoc. Observations also
/// update entity state: at the episode's end time when closed, else at the
/// latest ingested time.
pub fn update_what(
    store: &mut Store,
    wm: &mut WorkingMemory,
    id: EpisodeId,
    item: ContentItem,
) -> Result<(), StoreError> {
    item.check().map_err(|e| StoreError::InvalidContent(e.to_string()))?;
    if let Some(ep) = store.episodes.get_mut(&id) {
        let t = ep.when.end.unwrap_or(ep.when.start);
        let post_hoc = ep.is_closed();
        ep.what.push(WhatItem { item: item.clone(), post_hoc });
        if let ContentItem::EntityObservation { entity, fields, .. } = &item {
            let class = match store.entities.get(entity) {
                Some(e) => e.class,
                None => EntityClass::Object,
            };
            for (field, value) in fields {
                store.record_state(entity, class, StateRecord { t, field: field.clone(), value: value.clone(), source: id });
            }
        }
        store.reindex();
        return Ok(());
    }
    let ep = wm.episodes.get_mut(&id).ok_or(StoreError::UnknownEpisode(id))?;
    let post_hoc = ep.is_closed();
    let t = match ep.when.end {
        Some(end) => end,
        None => wm.last_t.unwrap_or(ep.when.start).max(ep.when.start),
    };
    ep.what.push(WhatItem { item: item.clone(), post_hoc });
    if let ContentItem::EntityObservation { entity, fields, .. } = &item {
        let class = store
            .entities
            .get(entity)
            .map(|e| e.class)
            .or_else(|| wm.pending.iter().rev().find(|p| &p.entity == entity).map(|p| p.class))
            .unwrap_or(EntityClass::Object);
        for (field, value) in fields {
            wm.pending.push(PendingState {
                entity: entity.clone(),
                class,
                record: StateRecord { t, field: field.clone(), value: value.clone(), source: id },
            });
        }
    }
    Ok(())
}

/// A structural invariant failure found by [`Store::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation")]
pub enum Violation {
    NestingKindViolation { id: EpisodeId },
    ContainmentViolation { id: EpisodeId },
    MissingEmotion { id: EpisodeId },
    OpenEpisodeInStore { id: EpisodeId },
    DanglingReference { id: EpisodeId, target: EpisodeId },
    LinkMismatch { id: EpisodeId },
    RootListViolation { id: EpisodeId },
    SequenceViolation { id: EpisodeId },
    IdViolation { id: EpisodeId },
    InvalidContent { id: EpisodeId },
    UnsortedHistory { entity: String },
    DanglingSource { entity: String, source: EpisodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("UnknownEpisode: {0}")]
    UnknownEpisode(EpisodeId),
    #[error("OpenEpisode: {0} is still open")]
    OpenEpisode(EpisodeId),
    #[error("InvalidContent: {0}")]
    InvalidContent(String),
    #[error("IoError: {0}")]
    Io(String),
    #[error("CorruptSnapshot: {0}")]
    CorruptSnapshot(String),
}
