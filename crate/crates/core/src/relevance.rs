//! Historic and emotional relevance, consolidation of working memory into
//! the long-term store, and threshold forgetting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EmotionGroup, EmotionTag, Emotions, Episode, EpisodeId, EpisodeKind, Intensity, Timestamp};
use crate::space::{resolve_pose, ArenaMap, SemanticLocation};
use crate::store::{PoseSample, Store, WorkingMemory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelevanceParams {
    /// Seconds for historic relevance to halve.
    pub half_life: f64,
    pub w_h: f64,
    pub w_e: f64,
    pub forget_threshold: f64,
}

impl Default for RelevanceParams {
    fn default() -> Self {
        RelevanceParams { half_life: 3600.0, w_h: 0.5, w_e: 0.5, forget_threshold: 0.05 }
    }
}

impl RelevanceParams {
    pub fn check(&self) -> Result<(), RelevanceError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.half_life > 0.0 && self.half_life.is_finite()) {
            return Err(RelevanceError::InvalidParams("half_life must be positive".into()));
        }
        if !unit(self.w_h) || !unit(self.w_e) || (self.w_h + self.w_e - 1.0).abs() > 1e-9 {
            return Err(RelevanceError::InvalidParams("weights must lie in [0,1] and sum to 1".into()));
        }
        if !unit(self.forget_threshold) {
            return Err(RelevanceError::InvalidParams("forget_threshold must lie in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelevanceError {
    #[error("OpenEpisode: {0} is still open")]
    OpenEpisode(EpisodeId),
    #[error("MissingEmotion: {0} has no emotion tag")]
    MissingEmotion(EpisodeId),
    #[error("UnknownEpisode: {0}")]
    UnknownEpisode(EpisodeId),
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
}

/// `2^(-age / half_life)` with age measured from the episode's end.
pub fn historic_relevance(e: &Episode, now: Timestamp, p: &RelevanceParams) -> Result<f64, RelevanceError> {
    let end = e.when.end.ok_or(RelevanceError::OpenEpisode(e.id))?;
    let age_s = now.since(end) as f64 / 1000.0;
    Ok((-age_s / p.half_life).exp2())
}

/// Strongest tag intensity over 3.
pub fn emotional_relevance(e: &Episode) -> Result<f64, RelevanceError> {
    let max = e.emotions.max_intensity().ok_or(RelevanceError::MissingEmotion(e.id))?;
    Ok(f64::from(max.level()) / 3.0)
}

pub fn relevance(e: &Episode, now: Timestamp, p: &RelevanceParams) -> Result<f64, RelevanceError> {
    Ok(p.w_h * historic_relevance(e, now, p)? + p.w_e * emotional_relevance(e)?)
}

/// Orders by relevance descending; ties go to the later end, then the lower id.
pub fn rank(
    store: &Store,
    ids: &[EpisodeId],
    now: Timestamp,
    p: &RelevanceParams,
) -> Result<Vec<EpisodeId>, RelevanceError> {
    let mut scored = Vec::with_capacity(ids.len());
    for &id in ids {
        let ep = store.episode(id).ok_or(RelevanceError::UnknownEpisode(id))?;
        scored.push((relevance(ep, now, p)?, ep.when.end, id));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.cmp(&a.1)).then_with(|| a.2.cmp(&b.2)));
    Ok(scored.into_iter().map(|(_, _, id)| id).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidationStats {
    pub moved: usize,
    pub episodes: usize,
    pub states: usize,
}

fn locations_during(map: &ArenaMap, poses: &[PoseSample], ep: &Episode) -> Vec<SemanticLocation> {
    let end = ep.when.end.unwrap_or(Timestamp(u64::MAX));
    let mut out: Vec<SemanticLocation> = Vec::new();
    for p in poses.iter().filter(|p| p.t >= ep.when.start && p.t < end) {
        let loc = resolve_pose(map, p.x, p.y);
        if !out.contains(&loc) {
            out.push(loc);
        }
    }
    if out.is_empty() {
        // Where the agent was when the episode began.
        out.push(match poses.iter().rev().find(|p| p.t <= ep.when.start) {
            Some(p) => resolve_pose(map, p.x, p.y),
            None => SemanticLocation::outside(),
        });
    }
    out
}

/// Moves every closed root subtree ending at or before `now` from working
/// memory into the store: resolves locations from the pose trail, rolls
/// emotions up by per-group maximum, gives untagged episodes a neutral tag
/// and commits pending entity state.
pub fn consolidate(wm: &mut WorkingMemory, store: &mut Store, map: &ArenaMap, now: Timestamp) -> ConsolidationStats {
    let mut stats = ConsolidationStats::default();
    let (ready, waiting): (Vec<_>, Vec<_>) = wm
        .closed_roots
        .iter()
        .copied()
        .partition(|id| wm.episodes[id].when.end.is_some_and(|end| end <= now));
    if ready.is_empty() {
        return stats;
    }
    wm.closed_roots = waiting;
    let mut moved_ids = BTreeSet::new();
    for root in ready {
        let mut eps = wm.take_subtree(root);
        let pos: BTreeMap<EpisodeId, usize> = eps.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        // Pre-order, so walking backwards visits children before parents.
        for i in (0..eps.len()).rev() {
            let mut rolled = eps[i].emotions.clone();
            for c in &eps[i].children {
                rolled.merge_all(&eps[pos[c]].emotions);
            }
            eps[i].emotions = rolled;
        }
        for ep in &mut eps {
            if ep.emotions.is_empty() {
                ep.emotions.merge(EmotionTag { group: EmotionGroup::JoyTrust, intensity: Intensity::NORMAL });
            }
            ep.locations = locations_during(map, &wm.poses, ep);
            moved_ids.insert(ep.id);
        }
        stats.moved += 1;
        stats.episodes += eps.len();
        store.insert_episodes(eps);
    }
    let (commit, keep): (Vec<_>, Vec<_>) =
        std::mem::take(&mut wm.pending).into_iter().partition(|p| moved_ids.contains(&p.record.source));
    wm.pending = keep;
    stats.states = commit.len();
    for p in commit {
        store.record_state(&p.entity, p.class, p.record);
    }
    wm.trim_poses();
    store.reindex();
    stats
}

/// Prunes non-context episodes below the threshold that have no retained
/// descendant. Returns the pruned ids in ascending order.
pub fn forget(store: &mut Store, now: Timestamp, p: &RelevanceParams) -> Vec<EpisodeId> {
    let mut retained: BTreeMap<EpisodeId, bool> = BTreeMap::new();
    // Post-order over every tree.
    let mut order = Vec::with_capacity(store.len());
    for &root in store.roots() {
        order.push(root);
        order.extend(store.descendants(root));
    }
    for &id in order.iter().rev() {
        let ep = &store.episodes[&id];
        let keep = ep.kind == EpisodeKind::Context
            || relevance(ep, now, p).map_or(true, |r| r >= p.forget_threshold)
            || ep.children.iter().any(|c| retained.get(c).copied().unwrap_or(false));
        retained.insert(id, keep);
    }
    let pruned: BTreeSet<EpisodeId> = retained.iter().filter(|(_, &k)| !k).map(|(&id, _)| id).collect();
    if pruned.is_empty() {
        return Vec::new();
    }
    let nearest_kept = |mut id: EpisodeId| -> EpisodeId {
        while pruned.contains(&id) {
            id = store.episodes[&id].parent.expect("contexts are never pruned");
        }
        id
    };
    let repoint: BTreeMap<EpisodeId, EpisodeId> = pruned.iter().map(|&id| (id, nearest_kept(id))).collect();
    for id in &pruned {
        store.episodes.remove(id);
    }
    for ep in store.episodes.values_mut() {
        ep.children.retain(|c| !pruned.contains(c));
    }
    for ent in store.entities.values_mut() {
        for rec in &mut ent.state_history {
            if let Some(&to) = repoint.get(&rec.source) {
                rec.source = to;
            }
        }
    }
    store.reindex();
    pruned.into_iter().collect()
}

/// Per-group maximum over a set of tag sets.
pub fn max_per_group<'a>(sets: impl IntoIterator<Item = &'a Emotions>) -> Emotions {
    let mut out = Emotions::new();
    for s in sets {
        out.merge_all(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capability, TimeInterval};
    use crate::store::{Event, EventPayload};

    const H: u64 = 3_600_000;

    fn ep(id: u64, end_ms: u64, tags: &[(EmotionGroup, u8)]) -> Episode {
        let mut e = Episode::new(EpisodeId(id), EpisodeKind::Task, "t", Timestamp(0));
        e.when = TimeInterval::closed(Timestamp(0), Timestamp(end_ms)).unwrap();
        for &(g, l) in tags {
            e.emotions.merge(EmotionTag::new(g, l).unwrap());
        }
        e
    }

    #[test]
    fn historic_examples() {
        let p = RelevanceParams::default();
        let e = ep(1, 0, &[]);
        assert_eq!(historic_relevance(&e, Timestamp(0), &p).unwrap(), 1.0);
        assert_eq!(historic_relevance(&e, Timestamp(H), &p).unwrap(), 0.5);
        assert_eq!(historic_relevance(&e, Timestamp(2 * H), &p).unwrap(), 0.25);
        let open = Episode::new(EpisodeId(2), EpisodeKind::Task, "t", Timestamp(0));
        assert_eq!(historic_relevance(&open, Timestamp(0), &p), Err(RelevanceError::OpenEpisode(EpisodeId(2))));
    }

    #[test]
    fn emotional_examples() {
        use EmotionGroup::*;
        assert_eq!(emotional_relevance(&ep(1, 0, &[(JoyTrust, 0)])).unwrap(), 0.0);
        assert_eq!(emotional_relevance(&ep(1, 0, &[(SadnessFear, 3)])).unwrap(), 1.0);
        assert_eq!(emotional_relevance(&ep(1, 0, &[(JoyTrust, 1), (AngerDisgust, 2)])).unwrap(), 2.0 / 3.0);
        assert_eq!(emotional_relevance(&ep(1, 0, &[])), Err(RelevanceError::MissingEmotion(EpisodeId(1))));
    }

    #[test]
    fn blended_examples() {
        use EmotionGroup::*;
        let p = RelevanceParams::default();
        assert_eq!(relevance(&ep(1, 0, &[(JoyTrust, 0)]), Timestamp(0), &p).unwrap(), 0.5);
        let old = relevance(&ep(1, 0, &[(SadnessFear, 3)]), Timestamp(10_000 * H), &p).unwrap();
        assert!((old - 0.5).abs() < 1e-12);
        let r = relevance(&ep(1, 0, &[(JoyTrust, 2)]), Timestamp(H), &p).unwrap();
        assert!((r - (0.25 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn params_checked() {
        assert!(RelevanceParams::default().check().is_ok());
        assert!(RelevanceParams { w_h: 0.7, ..Default::default() }.check().is_err());
        assert!(RelevanceParams { half_life: 0.0, ..Default::default() }.check().is_err());
    }

    fn store_of(eps: Vec<Episode>) -> Store {
        let mut st = Store::new();
        let mut ctx = Episode::new(EpisodeId(100), EpisodeKind::Context, "c", Timestamp(0));
        ctx.when.end = Some(Timestamp(eps.iter().filter_map(|e| e.when.end).max().unwrap_or(Timestamp(0)).0));
        ctx.emotions.merge(EmotionTag::new(EmotionGroup::JoyTrust, 0).unwrap());
        ctx.children = eps.iter().map(|e| e.id).collect();
        let mut all = vec![ctx];
        for mut e in eps {
            e.parent = Some(EpisodeId(100));
            all.push(e);
        }
        st.insert_episodes(all);
        st.reindex();
        st
    }

    #[test]
    fn rank_examples() {
        use EmotionGroup::*;
        let p = RelevanceParams::default();
        let st = store_of(vec![ep(1, 0, &[(JoyTrust, 1)]), ep(2, H, &[(JoyTrust, 1)])]);
        assert_eq!(rank(&st, &[EpisodeId(1), EpisodeId(2)], Timestamp(2 * H), &p).unwrap(), [EpisodeId(2), EpisodeId(1)]);

        let st = store_of(vec![ep(1, H, &[(JoyTrust, 0)]), ep(2, H, &[(AngerDisgust, 3)])]);
        assert_eq!(rank(&st, &[EpisodeId(1), EpisodeId(2)], Timestamp(H), &p).unwrap(), [EpisodeId(2), EpisodeId(1)]);

        // Equal scores: historic 0 at extreme age for both, same emotion.
        let far = Timestamp(u64::MAX / 2);
        let st = store_of(vec![ep(1, 10, &[(JoyTrust, 3)]), ep(2, 20, &[(JoyTrust, 3)]), ep(3, 20, &[(JoyTrust, 3)])]);
        assert_eq!(
            rank(&st, &[EpisodeId(1), EpisodeId(3), EpisodeId(2)], far, &p).unwrap(),
            [EpisodeId(2), EpisodeId(3), EpisodeId(1)]
        );
        assert_eq!(rank(&st, &[EpisodeId(9)], far, &p), Err(RelevanceError::UnknownEpisode(EpisodeId(9))));
    }

    fn ev(t: u64, payload: EventPayload) -> Event {
        Event::new(Timestamp(t), payload)
    }

    #[test]
    fn consolidation_rolls_up_and_defaults() {
        let map = ArenaMap::default_arena();
        let (mut wm, mut st) = (WorkingMemory::new(), Store::new());
        let events = vec![
            ev(0, EventPayload::Pose { x: 1.0, y: 3.5 }),
            ev(0, EventPayload::Begin { kind: EpisodeKind::Context, label: "c".into() }),
            ev(1, EventPayload::Begin { kind: EpisodeKind::Task, label: "t".into() }),
            ev(2, EventPayload::Begin { kind: EpisodeKind::Capability(Capability::Perception), label: "p".into() }),
            ev(3, EventPayload::Emotion { group: EmotionGroup::SurpriseAnticipation, intensity: Intensity::new(2).unwrap() }),
            ev(4, EventPayload::End { label: None }),
            ev(5, EventPayload::Begin { kind: EpisodeKind::Capability(Capability::Navigation), label: "n".into() }),
            ev(6, EventPayload::Pose { x: 3.0, y: 6.0 }),
            ev(7, EventPayload::End { label: None }),
            ev(8, EventPayload::End { label: None }),
            ev(9, EventPayload::End { label: None }),
        ];
        wm.ingest_all(&mut st, &events).unwrap();
        let stats = consolidate(&mut wm, &mut st, &map, Timestamp(9));
        assert_eq!(stats.moved, 1);
        assert_eq!(stats.episodes, 4);
        let tag = |id| st.episode(EpisodeId(id)).unwrap().emotions.tags().collect::<Vec<_>>();
        let surprise = EmotionTag::new(EmotionGroup::SurpriseAnticipation, 2).unwrap();
        assert_eq!(tag(1), vec![surprise]);
        assert_eq!(tag(2), vec![surprise]);
        assert_eq!(tag(4), vec![EmotionTag::new(EmotionGroup::JoyTrust, 0).unwrap()]);
        assert_eq!(st.episode(EpisodeId(3)).unwrap().locations, vec![SemanticLocation::in_room("kitchen")]);
        assert_eq!(st.episode(EpisodeId(4)).unwrap().locations, vec![SemanticLocation::in_room("bedroom")]);
        assert!(st.validate().is_empty());
        assert!(wm.is_empty());
    }

    #[test]
    fn consolidating_nothing_is_a_noop() {
        let (mut wm, mut st) = (WorkingMemory::new(), Store::new());
        let stats = consolidate(&mut wm, &mut st, &ArenaMap::default_arena(), Timestamp(0));
        assert_eq!(stats, ConsolidationStats::default());
    }

    #[test]
    fn forget_examples() {
        use EmotionGroup::*;
        let p = RelevanceParams::default();
        let st0 = store_of(vec![ep(1, H, &[(JoyTrust, 0)]), ep(2, H, &[(SadnessFear, 1)])]);
        let mut st = st0.clone();
        assert!(forget(&mut st, Timestamp(H + 10), &p).is_empty());

        // parent with low relevance kept alive by a relevant child
        let mut st = Store::new();
        let mut ctx = ep(1, 10 * H, &[(JoyTrust, 0)]);
        ctx.kind = EpisodeKind::Context;
        let mut parent = ep(2, 0, &[(JoyTrust, 0)]);
        let mut child = ep(3, 0, &[(JoyTrust, 0)]);
        child.kind = EpisodeKind::Capability(Capability::Hri);
        parent.when = TimeInterval::closed(Timestamp(0), Timestamp(0)).unwrap();
        child.when = parent.when;
        // push the child's score up with a strong emotion only on the child
        child.emotions.set(EmotionTag::new(AngerDisgust, 3).unwrap());
        ctx.children = vec![EpisodeId(2)];
        parent.parent = Some(EpisodeId(1));
        parent.children = vec![EpisodeId(3)];
        child.parent = Some(EpisodeId(2));
        st.insert_episodes(vec![ctx, parent, child]);
        st.reindex();
        let now = Timestamp(10 * H);
        assert!(relevance(st.episode(EpisodeId(2)).unwrap(), now, &p).unwrap() < 0.05);
        assert!(forget(&mut st, now, &p).is_empty());

        let mut st = st0;
        let strict = RelevanceParams { forget_threshold: 1.0, ..p };
        assert_eq!(forget(&mut st, Timestamp(H + 10), &strict), vec![EpisodeId(1), EpisodeId(2)]);
        assert!(st.episode(EpisodeId(100)).is_some());
        assert!(st.validate().is_empty());
    }
}
