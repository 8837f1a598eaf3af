//! Evidence bundles: the verifiable material behind an answer, and the
//! referee-side coherence check.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::json::to_canonical_string;
use crate::model::{ContentItem, EmotionGroup, Episode, EpisodeId, MediaRef, Timestamp};
use crate::query::{evaluate, narrate, Answer, EvalContext, Payload, QueryError};
use crate::space::{map_marker_svg, ArenaMap};
use crate::store::Store;

pub const MAP_FILE: &str = "map.svg";
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    /// Labels from the root context down to the primary episode.
    pub context: String,
    pub datetime: String,
    /// Intensity per group; groups without a tag are 0.
    pub emotions: BTreeMap<EmotionGroup, u8>,
    pub location: String,
    /// Relative path of the map file, empty when the episode was outside the arena.
    pub map_svg: String,
    pub media: Vec<MediaRef>,
    pub text: Vec<String>,
    pub supporting_ids: Vec<EpisodeId>,
    /// Rendered map content; written next to `bundle.json`.
    #[serde(skip)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("EmptyProvenance: the answer cites no episodes")]
    EmptyProvenance,
    #[error("UnknownEpisode: {0}")]
    UnknownEpisode(EpisodeId),
    #[error("MissingMap: bundle references {0} but carries no map content")]
    MissingMap(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("IoError: {0}")]
    Io(String),
}

/// "Wed, July 17, 2019 15:40:15", in UTC.
pub fn format_datetime(t: Timestamp) -> String {
    let ms = i64::try_from(t.0).unwrap_or(i64::MAX);
    match chrono::DateTime::from_timestamp_millis(ms) {
        Some(dt) => dt.format("%a, %B %-d, %Y %H:%M:%S").to_string(),
        None => format!("{} ms", t.0),
    }
}

fn context_line(store: &Store, id: EpisodeId) -> String {
    store
        .ancestors(id)
        .into_iter()
        .chain(std::iter::once(id))
        .filter_map(|a| store.episode(a))
        .map(|e| e.label.as_str())
        .collect::<Vec<_>>()
        .join(" / ")
}

fn emotion_series(ep: &Episode) -> BTreeMap<EmotionGroup, u8> {
    EmotionGroup::ALL.into_iter().map(|g| (g, ep.emotions.get(g).map_or(0, |i| i.level()))).collect()
}

/// The fields of a bundle that follow from the store alone.
fn derive(store: &Store, answer: &Answer, map: &ArenaMap, cx: &EvalContext) -> Result<EvidenceBundle, EvidenceError> {
    let primary_id = *answer.supporting_ids.first().ok_or(EvidenceError::EmptyProvenance)?;
    let mut supporting = Vec::with_capacity(answer.supporting_ids.len());
    for id in &answer.supporting_ids {
        supporting.push(store.episode(*id).ok_or(EvidenceError::UnknownEpisode(*id))?);
    }
    let primary = supporting[0];

    let (location, map_svg, svg) = match primary.locations.first() {
        Some(loc) => match map_marker_svg(map, loc) {
            Ok(svg) => (loc.describe(), MAP_FILE.to_string(), Some(svg)),
            Err(_) => (loc.describe(), String::new(), None),
        },
        None => (String::new(), String::new(), None),
    };

    let mut media = Vec::new();
    let mut text = Vec::new();
    for ep in &supporting {
        for w in &ep.what {
            if let Some(m) = w.item.media() {
                media.push(m.clone());
            }
            if let ContentItem::Utterance { speaker, text: said } = &w.item {
                text.push(format!("{speaker}: \"{said}\""));
            }
        }
    }
    let narration = match &answer.payload {
        Payload::Narration { text: Some(t), .. } => t.clone(),
        _ => narrate(store, primary_id, cx.now)?,
    };
    text.push(narration);

    Ok(EvidenceBundle {
        context: context_line(store, primary_id),
        datetime: format_datetime(primary.when.start),
        emotions: emotion_series(primary),
        location,
        map_svg,
        media,
        text,
        supporting_ids: answer.supporting_ids.clone(),
        svg,
    })
}

/// Collects the evidence for `answer`. The first supporting episode is the
/// primary one: context, time, emotions and place are taken from it.
pub fn assemble(store: &Store, answer: &Answer, map: &ArenaMap, cx: &EvalContext) -> Result<EvidenceBundle, EvidenceError> {
    derive(store, answer, map, cx)
}

/// Writes `bundle.json` and, when referenced, the map into `dir`.
pub fn write_report(bundle: &EvidenceBundle, dir: &Path) -> Result<Vec<PathBuf>, EvidenceError> {
    let io = |p: &Path, e: std::io::Error| EvidenceError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    let json_path = dir.join(BUNDLE_FILE);
    let json = to_canonical_string(bundle).map_err(|e| EvidenceError::Io(e.to_string()))?;
    fs::write(&json_path, json).map_err(|e| io(&json_path, e))?;
    written.push(json_path);
    if !bundle.map_svg.is_empty() {
        let svg = bundle.svg.as_deref().ok_or_else(|| EvidenceError::MissingMap(bundle.map_svg.clone()))?;
        let svg_path = dir.join(&bundle.map_svg);
        fs::write(&svg_path, svg).map_err(|e| io(&svg_path, e))?;
        written.push(svg_path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Incoherence {
    ContextMismatch,
    DatetimeMismatch,
    LocationMismatch,
    EmotionMismatch,
    MediaMismatch,
    TextMismatch,
    ProvenanceMismatch,
    UnderivableAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coherence {
    pub coherent: bool,
    pub reasons: Vec<Incoherence>,
}

/// Checks that the bundle is what the cited episodes say, and that the
/// answer can be derived again from the cited episodes alone.
pub fn check_coherence(
    answer: &Answer,
    bundle: &EvidenceBundle,
    store: &Store,
    map: &ArenaMap,
    cx: &EvalContext,
) -> Coherence {
    let mut reasons = Vec::new();
    if answer.supporting_ids.is_empty()
        || bundle.supporting_ids != answer.supporting_ids
        || answer.supporting_ids.iter().any(|id| store.episode(*id).is_none())
    {
        reasons.push(Incoherence::ProvenanceMismatch);
    }

    match derive(store, answer, map, cx) {
        Ok(expected) => {
            if expected.context != bundle.context {
                reasons.push(Incoherence::ContextMismatch);
            }
            if expected.datetime != bundle.datetime {
                reasons.push(Incoherence::DatetimeMismatch);
            }
            let svg_differs = bundle.svg.is_some() && bundle.svg != expected.svg;
            if expected.location != bundle.location || expected.map_svg != bundle.map_svg || svg_differs {
                reasons.push(Incoherence::LocationMismatch);
            }
            if expected.emotions != bundle.emotions {
                reasons.push(Incoherence::EmotionMismatch);
            }
            if expected.media != bundle.media {
                reasons.push(Incoherence::MediaMismatch);
            }
            if expected.text != bundle.text {
                reasons.push(Incoherence::TextMismatch);
            }
        }
        Err(_) => {
            if !reasons.contains(&Incoherence::ProvenanceMismatch) {
                reasons.push(Incoherence::ProvenanceMismatch);
            }
        }
    }

    let sub = store.induced(&answer.supporting_ids);
    match evaluate(&sub, &answer.query, cx) {
        Ok(again) if again.payload == answer.payload && again.supporting_ids == answer.supporting_ids => {}
        _ => reasons.push(Incoherence::UnderivableAnswer),
    }

    Coherence { coherent: reasons.is_empty(), reasons }
}
