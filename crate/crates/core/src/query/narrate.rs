//! Story-style narration of episodes and relative time phrases.

use super::QueryError;
use crate::model::{interval_overlaps, EntityClass, Episode, EpisodeId, Timestamp};
use crate::space::spoken_name;
use crate::store::Store;

const MINUTE: u64 = 60_000;
const UNITS: [(&str, u64); 6] = [
    ("year", 365 * 24 * 60 * MINUTE),
    ("month", 30 * 24 * 60 * MINUTE),
    ("week", 7 * 24 * 60 * MINUTE),
    ("day", 24 * 60 * MINUTE),
    ("hour", 60 * MINUTE),
    ("minute", MINUTE),
];

/// "N unit(s) ago" in the largest unit that fits at least once.
pub fn describe_time(t: Timestamp, now: Timestamp) -> Result<String, QueryError> {
    if t > now {
        return Err(QueryError::FutureTimestamp { t, now });
    }
    let age = now.0 - t.0;
    for (unit, ms) in UNITS {
        let n = age / ms;
        if n >= 1 {
            let plural = if n == 1 { "" } else { "s" };
            return Ok(format!("{n} {unit}{plural} ago"));
        }
    }
    Ok("less than a minute ago".to_string())
}

/// Past tense, preposition before the first argument, and the joiner before
/// the second one.
fn verb_forms(verb: &str) -> (String, &'static str, &'static str) {
    let (past, prep, second) = match verb {
        "move" => ("moved", "towards", "and"),
        "go" => ("went", "to", "and"),
        "navigate" => ("navigated", "to", "and"),
        "follow" => ("followed", "", "to"),
        "search" => ("searched", "for", "in"),
        "look" => ("looked", "at", "and"),
        "find" => ("found", "", "in"),
        "see" => ("saw", "", "in"),
        "recognize" => ("recognized", "", "and"),
        "detect" => ("detected", "", "and"),
        "pick" => ("picked up", "", "from"),
        "grasp" => ("grasped", "", "from"),
        "take" => ("took", "", "from"),
        "place" | "put" => ("placed", "", "on"),
        "bring" => ("brought", "", "to"),
        "give" | "hand" => ("gave", "", "to"),
        "serve" => ("served", "", "to"),
        "open" => ("opened", "", "and"),
        "close" => ("closed", "", "and"),
        "greet" => ("greeted", "", "and"),
        "ask" => ("asked", "", "about"),
        "tell" => ("told", "", "about"),
        "talk" => ("talked", "to", "about"),
        "answer" => ("answered", "", "and"),
        "wave" => ("waved", "at", "and"),
        "enter" => ("entered", "", "and"),
        "leave" => ("left", "", "and"),
        "approach" => ("approached", "", "and"),
        "introduce" => ("introduced", "", "to"),
        "meet" => ("met", "", "in"),
        "memorize" => ("memorized", "", "and"),
        "wait" => ("waited", "for", "in"),
        other => return (regular_past(other), "", "and"),
    };
    (past.to_string(), prep, second)
}

fn regular_past(verb: &str) -> String {
    let verb = spoken_name(verb);
    if verb.ends_with('e') {
        format!("{verb}d")
    } else {
        format!("{verb}ed")
    }
}

fn noun_phrase(store: &Store, arg: &str) -> String {
    match store.entity(arg) {
        Some(e) if e.class == EntityClass::Person => spoken_name(arg),
        _ => format!("the {}", spoken_name(arg)),
    }
}

fn action_clause(store: &Store, verb: &str, args: &[String]) -> String {
    let (past, prep, second) = verb_forms(verb);
    let mut clause = format!("I {past}");
    for (i, arg) in args.iter().enumerate() {
        let joiner = match i {
            0 => prep,
            1 => second,
            _ => "and",
        };
        if !joiner.is_empty() {
            clause.push(' ');
            clause.push_str(joiner);
        }
        clause.push(' ');
        clause.push_str(&noun_phrase(store, arg));
    }
    clause
}

/// The clause for a single episode: its most specific action, or its label
/// when it recorded none.
fn clause(store: &Store, ep: &Episode) -> String {
    // Most arguments wins; among equals, the first recorded.
    let best = ep.actions().fold(None::<(&str, &[String])>, |best, (v, a)| match best {
        Some((_, b)) if b.len() >= a.len() => best,
        _ => Some((v, a)),
    });
    match best {
        Some((verb, args)) => action_clause(store, verb, args),
        None => format!("I worked on {}", ep.label),
    }
}

/// Narrates an episode as a sequence of its children, oldest first.
///
/// Overlapping siblings are told as happening at the same time ("while");
/// otherwise they follow each other ("then"). A childless episode is told by
/// its own clause.
pub fn narrate(store: &Store, id: EpisodeId, now: Timestamp) -> Result<String, QueryError> {
    let ep = store.episode(id).ok_or(QueryError::UnknownEpisode(id))?;
    if !ep.is_closed() {
        return Err(QueryError::OpenEpisode(id));
    }
    let mut children: Vec<&Episode> = ep.children.iter().filter_map(|c| store.episode(*c)).collect();
    children.sort_by_key(|c| (c.when.start, c.id));

    let body = if children.is_empty() {
        clause(store, ep)
    } else {
        let mut runs: Vec<Vec<&Episode>> = Vec::new();
        for child in children {
            match runs.last_mut() {
                Some(run) if run.iter().any(|o| interval_overlaps(&o.when, &child.when)) => run.push(child),
                _ => runs.push(vec![child]),
            }
        }
        runs.iter()
            .map(|run| run.iter().map(|c| clause(store, c)).collect::<Vec<_>>().join(" while "))
            .collect::<Vec<_>>()
            .join(", then ")
    };
    Ok(format!("{body}, {}.", describe_time(ep.when.start, now)?))
}
