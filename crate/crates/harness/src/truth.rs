//! Expected answers computed straight from the scenario tables.
//!
//! Nothing here goes through the store or the query engine: the tables are
//! scanned directly so that agreement with the engine means something.

use std::collections::{BTreeMap, BTreeSet};

use epilog_core::model::{EmotionGroup, EntityClass, EpisodeId, EpisodeKind, Intensity, TimeInterval, Timestamp};
use epilog_core::query::{Feeling, IntervalHit, Payload, StateValue};

use crate::scenario::{spoken, EpisodeRecord, StateFact, Tables};

fn root_of(t: &Tables, mut id: EpisodeId) -> EpisodeId {
    while let Some(p) = t.episode(id).parent {
        id = p;
    }
    id
}

/// Whether the episode's whole tree had closed by `at`, and so was in the
/// long-term store when the question was asked.
fn stored_by(t: &Tables, r: &EpisodeRecord, at: Timestamp) -> bool {
    t.episode(root_of(t, r.id)).end.is_some_and(|e| e <= at)
}

/// Strongest level per group over the episode and all its descendants;
/// an episode that saw no emotion at all reads as neutral.
pub fn felt(t: &Tables, id: EpisodeId) -> BTreeMap<EmotionGroup, u8> {
    let mut out = BTreeMap::new();
    let mut stack = vec![id];
    while let Some(i) = stack.pop() {
        let r = t.episode(i);
        for (g, l) in &r.emotions {
            let e = out.entry(*g).or_insert(0);
            *e = (*e).max(*l);
        }
        stack.extend(r.children.iter().copied());
    }
    if out.is_empty() {
        out.insert(EmotionGroup::JoyTrust, 0);
    }
    out
}

fn phrase(group: EmotionGroup, level: u8) -> String {
    let adj = match group {
        EmotionGroup::JoyTrust => "happy",
        EmotionGroup::SadnessFear => "sad",
        EmotionGroup::SurpriseAnticipation => "surprised",
        EmotionGroup::AngerDisgust => "angry",
    };
    match level {
        0 => "normal".to_string(),
        1 => format!("a little {adj}"),
        2 => adj.to_string(),
        _ => format!("very {adj}"),
    }
}

fn intensity(level: u8) -> Intensity {
    Intensity::new(level).expect("scripted levels are in range")
}

fn stored(t: &Tables, at: Timestamp) -> impl Iterator<Item = &EpisodeRecord> {
    t.episodes.iter().filter(move |r| stored_by(t, r, at))
}

/// Feelings over the stored episodes whose label contains `needle`.
pub fn feeling_by_label(t: &Tables, needle: &str, at: Timestamp) -> Payload {
    let mut best: BTreeMap<EmotionGroup, u8> = BTreeMap::new();
    for r in stored(t, at).filter(|r| r.label.contains(needle)) {
        for (g, l) in felt(t, r.id) {
            let e = best.entry(g).or_insert(l);
            *e = (*e).max(l);
        }
    }
    Payload::Feeling {
        feelings: best
            .into_iter()
            .map(|(group, l)| Feeling { group, intensity: intensity(l), phrase: phrase(group, l) })
            .collect(),
    }
}

fn overlaps(a: (Timestamp, Timestamp), b: (Timestamp, Timestamp)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

fn span(r: &EpisodeRecord) -> (Timestamp, Timestamp) {
    (r.start, r.end.expect("stored episodes are closed"))
}

/// Tasks overlapping `[from, to)` that felt `group` at `min` or more, by start.
pub fn tasks_feeling(t: &Tables, group: EmotionGroup, min: u8, from: Timestamp, to: Timestamp, at: Timestamp) -> Payload {
    let mut hits: Vec<&EpisodeRecord> = stored(t, at)
        .filter(|r| r.kind == EpisodeKind::Task)
        .filter(|r| overlaps(span(r), (from, to)))
        .filter(|r| felt(t, r.id).get(&group).is_some_and(|l| *l >= min))
        .collect();
    hits.sort_by_key(|r| (r.start, r.id));
    Payload::Episodes { ids: hits.iter().map(|r| r.id).collect() }
}

/// Intervals of tasks whose label contains `needle`, by start.
pub fn task_intervals(t: &Tables, needle: &str, at: Timestamp) -> Payload {
    let mut hits: Vec<&EpisodeRecord> =
        stored(t, at).filter(|r| r.kind == EpisodeKind::Task && r.label.contains(needle)).collect();
    hits.sort_by_key(|r| (r.start, r.id));
    Payload::Intervals {
        items: hits.iter().map(|r| IntervalHit { id: r.id, interval: TimeInterval { start: r.start, end: r.end } }).collect(),
    }
}

fn fact_value(f: &StateFact) -> StateValue {
    StateValue { field: f.field.clone(), value: f.value.clone(), t: f.t, source: f.source }
}

/// Latest fact for `entity.field` at or before `at`; the last one written
/// wins a tie.
pub fn fact_at<'a>(t: &'a Tables, entity: &str, field: &str, at: Timestamp) -> Option<&'a StateFact> {
    let mut best: Option<&StateFact> = None;
    for f in t.states.iter().filter(|f| f.entity == entity && f.field == field && f.t <= at) {
        if best.is_none_or(|b| f.t >= b.t) {
            best = Some(f);
        }
    }
    best
}

pub fn where_is(t: &Tables, entity: &str, at: Timestamp) -> Payload {
    Payload::Location { entity: entity.to_string(), found: fact_at(t, entity, "location", at).map(fact_value) }
}

pub fn state_of(t: &Tables, entity: &str, field: Option<&str>, at: Timestamp) -> Payload {
    let fields: BTreeSet<&str> = match field {
        Some(f) => BTreeSet::from([f]),
        None => t.states.iter().filter(|f| f.entity == entity && f.t <= at).map(|f| f.field.as_str()).collect(),
    };
    Payload::State {
        entity: entity.to_string(),
        values: fields.into_iter().filter_map(|f| fact_at(t, entity, f, at)).map(fact_value).collect(),
    }
}

fn time_ago(t: Timestamp, now: Timestamp) -> String {
    let secs = (now.0 - t.0) / 1000;
    let units = [
        (365 * 86_400, "year"),
        (30 * 86_400, "month"),
        (7 * 86_400, "week"),
        (86_400, "day"),
        (3_600, "hour"),
        (60, "minute"),
    ];
    for (size, name) in units {
        let n = secs / size;
        if n == 1 {
            return format!("1 {name} ago");
        }
        if n > 1 {
            return format!("{n} {name}s ago");
        }
    }
    "less than a minute ago".into()
}

/// The sentence a capability's action is told with.
fn told(verb: &str, args: &[String], people: &BTreeSet<&str>) -> String {
    let np = |a: &String| if people.contains(a.as_str()) { spoken(a) } else { format!("the {}", spoken(a)) };
    let all: Vec<String> = args.iter().map(np).collect();
    match (verb, all.as_slice()) {
        ("move", [to]) => format!("I moved towards {to}"),
        ("search", [what]) => format!("I searched for {what}"),
        ("pick", [what]) => format!("I picked up {what}"),
        ("place", [what, on]) => format!("I placed {what} on {on}"),
        ("serve", [what, to]) => format!("I served {what} to {to}"),
        ("greet", [who]) => format!("I greeted {who}"),
        ("answer", [who]) => format!("I answered {who}"),
        ("ask", [who]) => format!("I asked {who}"),
        ("tell", [who]) => format!("I told {who}"),
        ("detect", whom) if !whom.is_empty() => format!("I detected {}", whom.join(" and ")),
        _ => panic!("the script never performs {verb} with {} arguments", args.len()),
    }
}

/// Expected story for a stored task or context: its children in order,
/// overlapping ones told together.
pub fn story(t: &Tables, id: EpisodeId, at: Timestamp) -> Payload {
    let people: BTreeSet<&str> =
        t.states.iter().filter(|f| f.class == EntityClass::Person && f.t <= at).map(|f| f.entity.as_str()).collect();
    let r = t.episode(id);
    let mut kids: Vec<&EpisodeRecord> = r.children.iter().map(|c| t.episode(*c)).collect();
    kids.sort_by_key(|k| (k.start, k.id));
    let mut runs: Vec<Vec<&EpisodeRecord>> = Vec::new();
    for k in kids {
        match runs.last_mut() {
            Some(run) if run.iter().any(|o| overlaps(span(o), span(k))) => run.push(k),
            _ => runs.push(vec![k]),
        }
    }
    let clause = |k: &EpisodeRecord| match &k.action {
        Some((verb, args)) => told(verb, args, &people),
        None => format!("I worked on {}", k.label),
    };
    let body = runs
        .iter()
        .map(|run| run.iter().map(|k| clause(k)).collect::<Vec<_>>().join(" while "))
        .collect::<Vec<_>>()
        .join(", then ");
    Payload::Narration { episode: Some(id), text: Some(format!("{body}, {}.", time_ago(r.start, at))) }
}
