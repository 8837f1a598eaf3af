//! Episodic long-term memory engine.
//!
//! Builds a nested Context → Task → Capability episode tree from an event
//! stream, tags episodes with time intervals, coordinate-free locations and
//! emotions, ranks and forgets by relevance, answers a small query language
//! and assembles referee-checkable evidence for every answer.

pub mod evidence;
pub mod json;
pub mod model;
pub mod query;
pub mod relevance;
pub mod space;
pub mod store;

pub use model::{
    emotion_phrase, interval_contains, interval_overlaps, Capability, ContentItem, EmotionGroup, EmotionTag, Emotions,
    Entity, EntityClass, Episode, EpisodeId, EpisodeKind, Intensity, MediaKind, MediaRef, StateRecord, TimeInterval,
    Timestamp, WhatItem,
};
pub use relevance::{consolidate, forget, rank, RelevanceParams};
pub use space::{resolve_pose, ArenaMap, SemanticLocation};
pub use store::{Event, EventPayload, Store, Violation, WorkingMemory};
