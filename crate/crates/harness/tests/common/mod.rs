#![allow(dead_code)]

use std::collections::BTreeSet;

use epilog_core::model::{ContentItem, EmotionGroup, EntityClass, Episode, EpisodeId, EpisodeKind, Intensity, Timestamp};
use epilog_core::query::{
    Condition, DescribeTarget, Feeling, IntervalHit, KindFilter, Order, Payload, Query, QueryError, StateValue,
};
use epilog_core::relevance::RelevanceParams;
use epilog_core::store::Store;
use epilog_harness::{generate_queries, generate_scenario, Engine, Responder, Scenario, ScenarioConfig, TestName};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A varied but valid scenario configuration for `seed`.
pub fn random_config(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
    let mut tests: Vec<TestName> =
        TestName::ALL[..4].iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
    tests.push(TestName::EpLtm);
    ScenarioConfig {
        seed,
        people: rng.gen_range(1..=5),
        objects: rng.gen_range(1..=7),
        tests,
        emotion_event_rate: rng.gen_range(0.3..2.0),
        ..Default::default()
    }
}

/// A scenario replayed and consolidated, including the fresh events of its
/// generated questions when there are any. Returns the time of the last
/// replayed event.
pub fn consolidated(cfg: &ScenarioConfig) -> (Scenario, Engine, Timestamp) {
    let s = generate_scenario(cfg).expect("valid config");
    let mut engine = Engine::new(s.map.clone(), RelevanceParams::default());
    engine.witness(&s.events, s.end).expect("scenario replays");
    let mut now = s.end;
    if let Ok(items) = generate_queries(&s, 2) {
        for item in &items {
            engine.witness(&item.fresh_events, item.asked_at).expect("fresh events replay");
            now = item.asked_at;
        }
    }
    (s, engine, now)
}

// ── naive oracle ────────────────────────────────────────────────────────────

fn holds(ep: &Episode, c: &Condition) -> bool {
    match c {
        Condition::Kind(k) => match k {
            KindFilter::Context => ep.kind == EpisodeKind::Context,
            KindFilter::Task => ep.kind == EpisodeKind::Task,
            KindFilter::Capability => matches!(ep.kind, EpisodeKind::Capability(_)),
        },
        Condition::Label(s) => ep.label.contains(s.as_str()),
        Condition::Location(name) => ep.locations.iter().any(|l| {
            [&l.room, &l.furniture, &l.area].iter().any(|p| p.as_deref() == Some(name.as_str()))
                || l.relation.as_ref().is_some_and(|r| &r.anchor == name)
        }),
        Condition::Entity(name) => ep.what.iter().any(|w| match &w.item {
            ContentItem::EntityObservation { entity, .. } => entity == name,
            ContentItem::Utterance { speaker, .. } => speaker == name,
            _ => false,
        }),
        Condition::Emotion { group, min } => ep
            .emotions
            .tags()
            .any(|t| t.group == *group && min.is_none_or(|m| t.intensity.level() >= m.level())),
        Condition::During { from, to } => {
            ep.when.start.0 < to.0 && ep.when.end.is_none_or(|e| e.0 > from.0)
        }
    }
}

fn scan<'a>(store: &'a Store, conds: &[Condition]) -> Vec<&'a Episode> {
    store.episodes().filter(|ep| conds.iter().all(|c| holds(ep, c))).collect()
}

fn strongest(ep: &Episode) -> u8 {
    ep.emotions.tags().map(|t| t.intensity.level()).max().unwrap_or(0)
}

fn score(ep: &Episode, now: Timestamp, p: &RelevanceParams) -> f64 {
    let age = (now.0 - ep.when.end.unwrap().0) as f64 / 1000.0;
    p.w_h * (-age / p.half_life).exp2() + p.w_e * (f64::from(strongest(ep)) / 3.0)
}

fn adjective(g: EmotionGroup) -> &'static str {
    match g {
        EmotionGroup::JoyTrust => "happy",
        EmotionGroup::SadnessFear => "sad",
        EmotionGroup::SurpriseAnticipation => "surprised",
        EmotionGroup::AngerDisgust => "angry",
    }
}

fn feeling_phrase(g: EmotionGroup, level: u8) -> String {
    match level {
        0 => "normal".into(),
        1 => format!("a little {}", adjective(g)),
        2 => adjective(g).into(),
        _ => format!("very {}", adjective(g)),
    }
}

fn ago(t: Timestamp, now: Timestamp) -> String {
    let mins = (now.0 - t.0) / 60_000;
    let table = [(525_600, "year"), (43_200, "month"), (10_080, "week"), (1_440, "day"), (60, "hour"), (1, "minute")];
    match table.iter().find(|(m, _)| mins >= *m) {
        None => "less than a minute ago".into(),
        Some((m, unit)) if mins / m == 1 => format!("1 {unit} ago"),
        Some((m, unit)) => format!("{} {unit}s ago", mins / m),
    }
}

fn spoken(slug: &str) -> String {
    slug.replace(['_', '-'], " ")
}

fn sentence(store: &Store, verb: &str, args: &[String]) -> String {
    let np = |a: &String| match store.entity(a) {
        Some(e) if e.class == EntityClass::Person => spoken(a),
        _ => format!("the {}", spoken(a)),
    };
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
        _ => panic!("oracle has no phrasing for {verb}/{}", args.len()),
    }
}

fn told(store: &Store, ep: &Episode) -> String {
    let mut best: Option<(&str, &[String])> = None;
    for w in &ep.what {
        if let ContentItem::ActionRecord { verb, args } = &w.item {
            if best.is_none_or(|(_, b)| args.len() > b.len()) {
                best = Some((verb, args));
            }
        }
    }
    match best {
        Some((v, a)) => sentence(store, v, a),
        None => format!("I worked on {}", ep.label),
    }
}

fn overlap(a: &Episode, b: &Episode) -> bool {
    let end = |e: &Episode| e.when.end.map_or(u64::MAX, |t| t.0);
    a.when.start.0 < end(b) && b.when.start.0 < end(a)
}

fn story(store: &Store, ep: &Episode, now: Timestamp) -> String {
    let mut kids: Vec<&Episode> = ep.children.iter().filter_map(|c| store.episode(*c)).collect();
    kids.sort_by_key(|k| (k.when.start, k.id));
    let body = if kids.is_empty() {
        told(store, ep)
    } else {
        let mut parts: Vec<String> = Vec::new();
        let mut run: Vec<&Episode> = Vec::new();
        for k in kids {
            if !run.is_empty() && !run.iter().any(|o| overlap(o, k)) {
                parts.push(run.iter().map(|e| told(store, e)).collect::<Vec<_>>().join(" while "));
                run.clear();
            }
            run.push(k);
        }
        parts.push(run.iter().map(|e| told(store, e)).collect::<Vec<_>>().join(" while "));
        parts.join(", then ")
    };
    format!("{body}, {}.", ago(ep.when.start, now))
}

fn latest(store: &Store, entity: &str, field: &str, at: Timestamp) -> Option<StateValue> {
    let mut hit = None;
    for r in &store.entity(entity)?.state_history {
        if r.field == field && r.t <= at {
            hit = Some(StateValue { field: r.field.clone(), value: r.value.clone(), t: r.t, source: r.source });
        }
    }
    hit
}

/// Answers a query by scanning every episode and every state record.
/// Returns the payload and the supporting ids as a set.
pub fn oracle(
    store: &Store,
    q: &Query,
    now: Timestamp,
    p: &RelevanceParams,
) -> Result<(Payload, BTreeSet<EpisodeId>), QueryError> {
    Ok(match q {
        Query::FindEpisodes { conds, order, limit } => {
            let mut hits = scan(store, conds);
            if *order == Some(Order::Relevance) {
                hits.sort_by(|a, b| {
                    score(b, now, p)
                        .total_cmp(&score(a, now, p))
                        .then(b.when.end.cmp(&a.when.end))
                        .then(a.id.cmp(&b.id))
                });
            } else {
                hits.sort_by_key(|e| (e.when.start, e.id));
            }
            if let Some(n) = limit {
                hits.truncate(*n);
            }
            let ids: Vec<EpisodeId> = hits.iter().map(|e| e.id).collect();
            let set = ids.iter().copied().collect();
            (Payload::Episodes { ids }, set)
        }
        Query::When { conds } => {
            let mut hits = scan(store, conds);
            hits.sort_by_key(|e| (e.when.start, e.id));
            let set = hits.iter().map(|e| e.id).collect();
            (Payload::Intervals { items: hits.iter().map(|e| IntervalHit { id: e.id, interval: e.when }).collect() }, set)
        }
        Query::WhereIs { entity, at } => {
            let found = latest(store, entity, "location", at.unwrap_or(now));
            let set = found.iter().map(|v| v.source).collect();
            (Payload::Location { entity: entity.clone(), found }, set)
        }
        Query::StateOf { entity, field, at } => {
            let at = at.unwrap_or(now);
            let fields: BTreeSet<String> = match (field, store.entity(entity)) {
                (Some(f), _) => BTreeSet::from([f.clone()]),
                (None, Some(e)) => e.state_history.iter().map(|r| r.field.clone()).collect(),
                (None, None) => BTreeSet::new(),
            };
            let values: Vec<StateValue> = fields.iter().filter_map(|f| latest(store, entity, f, at)).collect();
            let set = values.iter().map(|v| v.source).collect();
            (Payload::State { entity: entity.clone(), values }, set)
        }
        Query::Feeling { conds } => {
            let hits = scan(store, conds);
            let mut feelings = Vec::new();
            let mut set = BTreeSet::new();
            for g in EmotionGroup::ALL {
                let mut best: Option<(u8, &Episode)> = None;
                for ep in &hits {
                    let Some(l) = ep.emotions.tags().find(|t| t.group == g).map(|t| t.intensity.level()) else {
                        continue;
                    };
                    let better = match best {
                        None => true,
                        Some((bl, b)) => {
                            l > bl || (l == bl && (ep.when.end > b.when.end || (ep.when.end == b.when.end && ep.id < b.id)))
                        }
                    };
                    if better {
                        best = Some((l, ep));
                    }
                }
                if let Some((l, ep)) = best {
                    feelings.push(Feeling { group: g, intensity: Intensity::new(l).unwrap(), phrase: feeling_phrase(g, l) });
                    set.insert(ep.id);
                }
            }
            (Payload::Feeling { feelings }, set)
        }
        Query::Describe(target) => {
            let ep = match target {
                DescribeTarget::Episode(id) => Some(store.episode(*id).ok_or(QueryError::UnknownEpisode(*id))?),
                DescribeTarget::Last(conds) => scan(store, conds).into_iter().max_by_key(|e| (e.when.start, e.id)),
            };
            match ep {
                None => (Payload::Narration { episode: None, text: None }, BTreeSet::new()),
                Some(ep) => {
                    let mut set: BTreeSet<EpisodeId> = ep.children.iter().copied().collect();
                    set.insert(ep.id);
                    (Payload::Narration { episode: Some(ep.id), text: Some(story(store, ep, now)) }, set)
                }
            }
        }
    })
}

// ── random queries ──────────────────────────────────────────────────────────

/// Draws queries over the vocabulary actually present in `store`, with a
/// sprinkling of names that match nothing.
pub struct QueryGen<'a> {
    store: &'a Store,
    places: Vec<String>,
    words: Vec<String>,
    entities: Vec<String>,
    lo: u64,
    hi: u64,
    now: Timestamp,
}

impl<'a> QueryGen<'a> {
    pub fn new(store: &'a Store, s: &Scenario, now: Timestamp) -> Self {
        let mut places: Vec<String> = s.map.rooms.iter().map(|r| r.name.clone()).collect();
        places.extend(s.map.furniture.iter().map(|f| f.name.clone()));
        places.extend(s.map.named_areas.iter().map(|a| a.name.clone()));
        places.push("attic".into());
        let mut words: BTreeSet<String> = BTreeSet::new();
        for ep in store.episodes() {
            let w: Vec<&str> = ep.label.split(' ').collect();
            for i in 0..w.len() {
                words.insert(w[i].to_string());
                if i + 1 < w.len() {
                    words.insert(format!("{} {}", w[i], w[i + 1]));
                }
            }
        }
        words.insert("juggle".into());
        let mut entities: Vec<String> = store.entities().map(|e| e.id.clone()).collect();
        entities.push("nobody".into());
        let lo = store.episodes().map(|e| e.when.start.0).min().unwrap_or(now.0) - 600_000;
        QueryGen { store, places, words: words.into_iter().collect(), entities, lo, hi: now.0, now }
    }

    fn instant(&self, rng: &mut ChaCha8Rng) -> Timestamp {
        Timestamp(rng.gen_range(self.lo..=self.hi))
    }

    fn cond(&self, rng: &mut ChaCha8Rng) -> Condition {
        match rng.gen_range(0..6) {
            0 => Condition::Kind(*[KindFilter::Context, KindFilter::Task, KindFilter::Capability].choose(rng).unwrap()),
            1 => Condition::Label(self.words.choose(rng).unwrap().clone()),
            2 => Condition::Location(self.places.choose(rng).unwrap().clone()),
            3 => Condition::Entity(self.entities.choose(rng).unwrap().clone()),
            4 => Condition::Emotion {
                group: *EmotionGroup::ALL.choose(rng).unwrap(),
                min: rng.gen_bool(0.7).then(|| Intensity::new(rng.gen_range(0..=3)).unwrap()),
            },
            _ => {
                let a = self.instant(rng);
                let b = self.instant(rng);
                Condition::During { from: a.min(b), to: Timestamp(a.max(b).0 + 1) }
            }
        }
    }

    fn conds(&self, rng: &mut ChaCha8Rng) -> Vec<Condition> {
        (0..rng.gen_range(1..=3)).map(|_| self.cond(rng)).collect()
    }

    fn at(&self, rng: &mut ChaCha8Rng) -> Option<Timestamp> {
        rng.gen_bool(0.5).then(|| self.instant(rng))
    }

    pub fn query(&self, rng: &mut ChaCha8Rng) -> Query {
        match rng.gen_range(0..7) {
            0 => Query::FindEpisodes {
                conds: self.conds(rng),
                order: *[None, Some(Order::Time), Some(Order::Relevance)].choose(rng).unwrap(),
                limit: rng.gen_bool(0.4).then(|| rng.gen_range(1..6)),
            },
            1 => Query::When { conds: self.conds(rng) },
            2 => Query::WhereIs { entity: self.entities.choose(rng).unwrap().clone(), at: self.at(rng) },
            3 => Query::StateOf {
                entity: self.entities.choose(rng).unwrap().clone(),
                field: [Some("location"), Some("clothes"), Some("age"), Some("name"), None]
                    .choose(rng)
                    .unwrap()
                    .map(String::from),
                at: self.at(rng),
            },
            4 => Query::Feeling { conds: self.conds(rng) },
            5 => Query::Describe(DescribeTarget::Episode(EpisodeId(rng.gen_range(1..self.store.next_id() + 3)))),
            _ => Query::Describe(DescribeTarget::Last(self.conds(rng))),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }
}
