//! Episodic queries: AST, canonical printing, and evaluation against a
//! [`Store`].

mod narrate;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    emotion_phrase, interval_overlaps, EmotionGroup, EmotionTag, Episode, EpisodeId, EpisodeKind, Intensity,
    TimeInterval, Timestamp,
};
use crate::relevance::{rank, RelevanceError, RelevanceParams};
use crate::store::Store;

pub use narrate::{describe_time, narrate};
pub use parse::{is_ident, parse_query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindFilter {
    Context,
    Task,
    Capability,
}

impl KindFilter {
    fn index_key(self) -> &'static str {
        match self {
            KindFilter::Context => "context",
            KindFilter::Task => "task",
            KindFilter::Capability => "capability",
        }
    }

    pub fn matches(self, kind: EpisodeKind) -> bool {
        matches!(
            (self, kind),
            (KindFilter::Context, EpisodeKind::Context)
                | (KindFilter::Task, EpisodeKind::Task)
                | (KindFilter::Capability, EpisodeKind::Capability(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Kind(KindFilter),
    /// Substring of the episode label.
    Label(String),
    Location(String),
    Entity(String),
    /// Without a minimum the group only has to be tagged.
    Emotion { group: EmotionGroup, min: Option<Intensity> },
    /// Overlap with the half-open interval `[from, to)`.
    During { from: Timestamp, to: Timestamp },
}

impl Condition {
    pub fn matches(&self, ep: &Episode) -> bool {
        match self {
            Condition::Kind(k) => k.matches(ep.kind),
            Condition::Label(s) => ep.label.contains(s.as_str()),
            Condition::Location(name) => ep.locations.iter().any(|l| l.mentions(name)),
            Condition::Entity(name) => ep.mentioned_entities().any(|e| e == name),
            Condition::Emotion { group, min } => match ep.emotions.get(*group) {
                None => false,
                Some(level) => min.is_none_or(|m| level >= m),
            },
            Condition::During { from, to } => {
                interval_overlaps(&ep.when, &TimeInterval { start: *from, end: Some(*to) })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Time,
    Relevance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescribeTarget {
    Episode(EpisodeId),
    /// The most recently started episode matching the conditions.
    Last(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    FindEpisodes { conds: Vec<Condition>, order: Option<Order>, limit: Option<usize> },
    When { conds: Vec<Condition> },
    WhereIs { entity: String, at: Option<Timestamp> },
    StateOf { entity: String, field: Option<String>, at: Option<Timestamp> },
    Feeling { conds: Vec<Condition> },
    Describe(DescribeTarget),
}

impl std::str::FromStr for Query {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

// Queries travel inside answers as their canonical text.
impl Serialize for Query {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Query {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_query(&text).map_err(serde::de::Error::custom)
    }
}

fn write_conds(f: &mut fmt::Formatter<'_>, conds: &[Condition]) -> fmt::Result {
    for (i, c) in conds.iter().enumerate() {
        if i > 0 {
            f.write_str(" AND ")?;
        }
        write!(f, "{c}")?;
    }
    Ok(())
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Kind(k) => write!(f, "KIND={}", k.index_key()),
            Condition::Label(s) => {
                f.write_str("LABEL~\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Condition::Location(n) => write!(f, "LOCATION={n}"),
            Condition::Entity(n) => write!(f, "ENTITY={n}"),
            Condition::Emotion { group, min: None } => write!(f, "EMOTION={}", group.as_str()),
            Condition::Emotion { group, min: Some(m) } => write!(f, "EMOTION={}>={}", group.as_str(), m.level()),
            Condition::During { from, to } => write!(f, "DURING [{}, {}]", from.0, to.0),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::FindEpisodes { conds, order, limit } => {
                f.write_str("FIND EPISODES")?;
                if !conds.is_empty() {
                    f.write_str(" WHERE ")?;
                    write_conds(f, conds)?;
                }
                match order {
                    Some(Order::Time) => f.write_str(" ORDER BY TIME")?,
                    Some(Order::Relevance) => f.write_str(" ORDER BY RELEVANCE")?,
                    None => {}
                }
                if let Some(n) = limit {
                    write!(f, " LIMIT {n}")?;
                }
                Ok(())
            }
            Query::When { conds } => {
                f.write_str("WHEN ")?;
                write_conds(f, conds)
            }
            Query::WhereIs { entity, at } => {
                write!(f, "WHERE-IS {entity}")?;
                if let Some(t) = at {
                    write!(f, " AT {}", t.0)?;
                }
                Ok(())
            }
            Query::StateOf { entity, field, at } => {
                write!(f, "STATE OF {entity}")?;
                if let Some(field) = field {
                    write!(f, " FIELD {field}")?;
                }
                if let Some(t) = at {
                    write!(f, " AT {}", t.0)?;
                }
                Ok(())
            }
            Query::Feeling { conds } => {
                f.write_str("FEELING")?;
                if !conds.is_empty() {
                    f.write_str(" WHERE ")?;
                    write_conds(f, conds)?;
                }
                Ok(())
            }
            Query::Describe(DescribeTarget::Episode(id)) => write!(f, "DESCRIBE {}", id.0),
            Query::Describe(DescribeTarget::Last(conds)) => {
                f.write_str("DESCRIBE LAST")?;
                if !conds.is_empty() {
                    f.write_str(" WHERE ")?;
                    write_conds(f, conds)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("SyntaxError at {position}: expected {}", expected.join(" | "))]
    Syntax { position: usize, expected: Vec<String> },
    #[error("UnknownEpisode: {0}")]
    UnknownEpisode(EpisodeId),
    #[error("OpenEpisode: {0} has not ended")]
    OpenEpisode(EpisodeId),
    #[error("FutureTimestamp: {t} is after now ({now})")]
    FutureTimestamp { t: Timestamp, now: Timestamp },
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
}

// ── Answers ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalHit {
    pub id: EpisodeId,
    pub interval: TimeInterval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateValue {
    pub field: String,
    pub value: String,
    pub t: Timestamp,
    pub source: EpisodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feeling {
    pub group: EmotionGroup,
    pub intensity: Intensity,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Episodes { ids: Vec<EpisodeId> },
    Intervals { items: Vec<IntervalHit> },
    Location { entity: String, found: Option<StateValue> },
    State { entity: String, values: Vec<StateValue> },
    Feeling { feelings: Vec<Feeling> },
    Narration { episode: Option<EpisodeId>, text: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub query: Query,
    pub payload: Payload,
    /// Episodes the answer was derived from.
    pub supporting_ids: Vec<EpisodeId>,
}

impl Answer {
    /// A one-line human rendering of the payload.
    pub fn summary(&self, store: &Store) -> String {
        match &self.payload {
            Payload::Episodes { ids } if ids.is_empty() => "no episodes".into(),
            Payload::Episodes { ids } => ids
                .iter()
                .map(|id| match store.episode(*id) {
                    Some(ep) => format!("#{} {}", id.0, ep.label),
                    None => format!("#{}", id.0),
                })
                .collect::<Vec<_>>()
                .join("; "),
            Payload::Intervals { items } if items.is_empty() => "never".into(),
            Payload::Intervals { items } => items
                .iter()
                .map(|h| match h.interval.end {
                    Some(e) => format!("#{} [{}, {})", h.id.0, h.interval.start.0, e.0),
                    None => format!("#{} [{}, ...)", h.id.0, h.interval.start.0),
                })
                .collect::<Vec<_>>()
                .join("; "),
            Payload::Location { entity, found: None } => format!("{entity}: unknown"),
            Payload::Location { entity, found: Some(v) } => format!("{entity}: {}", v.value),
            Payload::State { entity, values } if values.is_empty() => format!("{entity}: unknown"),
            Payload::State { entity, values } => format!(
                "{entity}: {}",
                values.iter().map(|v| format!("{}={}", v.field, v.value)).collect::<Vec<_>>().join(", ")
            ),
            Payload::Feeling { feelings } if feelings.is_empty() => "no feelings recorded".into(),
            Payload::Feeling { feelings } => {
                feelings.iter().map(|f| f.phrase.clone()).collect::<Vec<_>>().join(", ")
            }
            Payload::Narration { text: Some(t), .. } => t.clone(),
            Payload::Narration { text: None, .. } => "nothing to describe".into(),
        }
    }
}

// ── Evaluation ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub now: Timestamp,
    pub params: RelevanceParams,
}

impl EvalContext {
    pub fn new(now: Timestamp) -> Self {
        EvalContext { now, params: RelevanceParams::default() }
    }
}

/// Ids of episodes satisfying every condition, ascending.
///
/// Kind, entity, place and time conditions are answered from the store
/// index; the remaining ones are checked per candidate.
pub fn select(store: &Store, conds: &[Condition]) -> Vec<EpisodeId> {
    let idx = store.index();
    let mut candidates: Option<BTreeSet<EpisodeId>> = None;
    let mut narrow = |set: BTreeSet<EpisodeId>| {
        candidates = Some(match candidates.take() {
            None => set,
            Some(c) => c.intersection(&set).copied().collect(),
        });
    };
    let empty = BTreeSet::new();
    let mut residual = Vec::new();
    for c in conds {
        match c {
            Condition::Kind(k) => narrow(idx.by_kind.get(k.index_key()).unwrap_or(&empty).clone()),
            Condition::Entity(n) => narrow(idx.by_entity.get(n).unwrap_or(&empty).clone()),
            Condition::Location(n) => narrow(idx.by_place.get(n).unwrap_or(&empty).clone()),
            Condition::During { from, to } => {
                let upto = idx.by_start.partition_point(|(s, _)| s < to);
                let window = TimeInterval { start: *from, end: Some(*to) };
                narrow(
                    idx.by_start[..upto]
                        .iter()
                        .filter(|(_, id)| store.episode(*id).is_some_and(|e| interval_overlaps(&e.when, &window)))
                        .map(|&(_, id)| id)
                        .collect(),
                )
            }
            other => residual.push(other),
        }
    }
    let base: Vec<EpisodeId> = match candidates {
        Some(c) => c.into_iter().collect(),
        None => store.episodes().map(|e| e.id).collect(),
    };
    base.into_iter()
        .filter(|id| store.episode(*id).is_some_and(|ep| residual.iter().all(|c| c.matches(ep))))
        .collect()
}

fn by_start(store: &Store, ids: &mut [EpisodeId]) {
    ids.sort_by_key(|id| (store.episode(*id).map(|e| e.when.start), *id));
}

pub fn evaluate(store: &Store, query: &Query, cx: &EvalContext) -> Result<Answer, QueryError> {
    let (payload, supporting_ids) = match query {
        Query::FindEpisodes { conds, order, limit } => {
            let mut ids = select(store, conds);
            match order.unwrap_or(Order::Time) {
                Order::Time => by_start(store, &mut ids),
                Order::Relevance => ids = rank(store, &ids, cx.now, &cx.params)?,
            }
            if let Some(n) = limit {
                ids.truncate(*n);
            }
            (Payload::Episodes { ids: ids.clone() }, ids)
        }
        Query::When { conds } => {
            let mut ids = select(store, conds);
            by_start(store, &mut ids);
            let items = ids
                .iter()
                .filter_map(|id| store.episode(*id).map(|e| IntervalHit { id: *id, interval: e.when }))
                .collect();
            (Payload::Intervals { items }, ids)
        }
        Query::WhereIs { entity, at } => {
            let at = at.unwrap_or(cx.now);
            let found = store.entity(entity).and_then(|e| e.state_at("location", at)).map(|r| StateValue {
                field: r.field.clone(),
                value: r.value.clone(),
                t: r.t,
                source: r.source,
            });
            let ids = found.iter().map(|v| v.source).collect();
            (Payload::Location { entity: entity.clone(), found }, ids)
        }
        Query::StateOf { entity, field, at } => {
            let at = at.unwrap_or(cx.now);
            let mut values = Vec::new();
            if let Some(ent) = store.entity(entity) {
                let fields: BTreeSet<&str> = match field {
                    Some(f) => BTreeSet::from([f.as_str()]),
                    None => ent.state_history.iter().map(|r| r.field.as_str()).collect(),
                };
                for f in fields {
                    if let Some(r) = ent.state_at(f, at) {
                        values.push(StateValue { field: r.field.clone(), value: r.value.clone(), t: r.t, source: r.source });
                    }
                }
            }
            let ids: BTreeSet<EpisodeId> = values.iter().map(|v| v.source).collect();
            (Payload::State { entity: entity.clone(), values }, ids.into_iter().collect())
        }
        Query::Feeling { conds } => {
            let ids = select(store, conds);
            let mut feelings = Vec::new();
            let mut support = Vec::new();
            for group in EmotionGroup::ALL {
                // Strongest episode for the group; ties go to the later end, then the lower id.
                let best = ids
                    .iter()
                    .filter_map(|id| store.episode(*id))
                    .filter_map(|ep| ep.emotions.get(group).map(|lvl| (lvl, ep.when.end, ep.id)))
                    .max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(b.2.cmp(&a.2)));
                if let Some((intensity, _, id)) = best {
                    feelings.push(Feeling { group, intensity, phrase: emotion_phrase(EmotionTag { group, intensity }) });
                    if !support.contains(&id) {
                        support.push(id);
                    }
                }
            }
            (Payload::Feeling { feelings }, support)
        }
        Query::Describe(target) => {
            let id = match target {
                DescribeTarget::Episode(id) => Some(*id),
                DescribeTarget::Last(conds) => select(store, conds)
                    .into_iter()
                    .filter_map(|id| store.episode(id))
                    .max_by_key(|e| (e.when.start, e.id))
                    .map(|e| e.id),
            };
            match id {
                None => (Payload::Narration { episode: None, text: None }, Vec::new()),
                Some(id) => {
                    let text = narrate(store, id, cx.now)?;
                    let ep = store.episode(id).ok_or(QueryError::UnknownEpisode(id))?;
                    let mut support = vec![id];
                    support.extend(ep.children.iter().copied());
                    (Payload::Narration { episode: Some(id), text: Some(text) }, support)
                }
            }
        }
    };
    Ok(Answer { query: query.clone(), payload, supporting_ids })
}

/// Parses and evaluates in one step.
pub fn run_query(store: &Store, text: &str, cx: &EvalContext) -> Result<Answer, QueryError> {
    evaluate(store, &parse_query(text)?, cx)
}
