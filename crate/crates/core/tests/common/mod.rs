#![allow(dead_code)]

use std::collections::BTreeMap;

use epilog_core::model::{Capability, EmotionGroup, EntityClass, EpisodeKind, Intensity, Timestamp};
use epilog_core::relevance::consolidate;
use epilog_core::space::ArenaMap;
use epilog_core::store::{Event, EventPayload, Store, WorkingMemory};
use proptest::prelude::*;

pub const SPOTS: [&str; 5] = ["fridge", "sofa", "bed", "desk", "counter"];
pub const PEOPLE: [&str; 2] = ["anna", "ben"];
pub const THINGS: [&str; 2] = ["cup", "remote"];

struct Open {
    label: String,
    kind: EpisodeKind,
    parent: Option<usize>,
}

/// Turns op codes into a log that a correct engine must accept: every
/// begin has a container, every end names an episode without open
/// children, and time never runs backwards.
pub fn script(ops: &[(u8, u16, u16)]) -> Vec<Event> {
    let mut events = Vec::new();
    let mut open: Vec<Open> = Vec::new();
    let mut t = 1_000_000u64;
    let mut n = 0;
    let mut push = |t: u64, p: EventPayload| events.push(Event::new(Timestamp(t), p));
    let container = |open: &[Open]| open.iter().rposition(|o| !matches!(o.kind, EpisodeKind::Capability(_)));
    for &(code, dt, arg) in ops {
        t += u64::from(dt);
        let a = usize::from(arg);
        let begin = |kind: EpisodeKind, parent, open: &mut Vec<Open>, n: &mut usize| {
            *n += 1;
            let label = format!("{} {n}", kind.name());
            open.push(Open { label: label.clone(), kind, parent });
            EventPayload::Begin { kind, label }
        };
        match code % 11 {
            0 if open.is_empty() => push(t, begin(EpisodeKind::Context, None, &mut open, &mut n)),
            1 | 2 => {
                if let Some(c) = container(&open) {
                    push(t, begin(EpisodeKind::Task, Some(c), &mut open, &mut n));
                }
            }
            3 => {
                if let Some(c) = container(&open).filter(|c| open[*c].kind == EpisodeKind::Task) {
                    let sub = Capability::ALL[a % 4];
                    push(t, begin(EpisodeKind::Capability(sub), Some(c), &mut open, &mut n));
                }
            }
            4 | 5 => {
                let leaves: Vec<usize> = (0..open.len()).filter(|i| !open.iter().any(|o| o.parent == Some(*i))).collect();
                if !leaves.is_empty() {
                    let i = leaves[a % leaves.len()];
                    let closed = open.remove(i);
                    for o in &mut open {
                        o.parent = o.parent.map(|p| if p > i { p - 1 } else { p });
                    }
                    push(t, EventPayload::End { label: Some(closed.label) });
                }
            }
            6 if !open.is_empty() => {
                push(t, EventPayload::Say { speaker: PEOPLE[a % 2].into(), text: format!("line {a}") })
            }
            7 if !open.is_empty() => push(
                t,
                EventPayload::Act { verb: "move".into(), args: vec![SPOTS[a % SPOTS.len()].into()] },
            ),
            8 if !open.is_empty() => {
                let (entity, class) = if a % 2 == 0 {
                    (PEOPLE[a / 2 % 2], EntityClass::Person)
                } else {
                    (THINGS[a / 2 % 2], EntityClass::Object)
                };
                let fields = BTreeMap::from([("location".to_string(), SPOTS[a % SPOTS.len()].to_string())]);
                push(t, EventPayload::Observe { entity: entity.into(), class, fields, media: None })
            }
            9 if !open.is_empty() => push(
                t,
                EventPayload::Emotion { group: EmotionGroup::ALL[a % 4], intensity: Intensity::new((a / 4 % 4) as u8).unwrap() },
            ),
            10 => push(t, EventPayload::Pose { x: f64::from(arg % 140) / 10.0 - 1.0, y: f64::from(arg / 140 % 100) / 10.0 - 1.0 }),
            _ => {}
        }
    }
    while !open.is_empty() {
        t += 1;
        let i = (0..open.len()).rev().find(|i| !open.iter().any(|o| o.parent == Some(*i))).unwrap();
        let closed = open.remove(i);
        push(t, EventPayload::End { label: Some(closed.label) });
    }
    events
}

pub fn ops() -> impl Strategy<Value = Vec<(u8, u16, u16)>> {
    prop::collection::vec((any::<u8>(), 0u16..5000, any::<u16>()), 1..250)
}

pub fn replay(events: &[Event], now: Timestamp) -> (Store, WorkingMemory) {
    let (mut store, mut wm) = (Store::new(), WorkingMemory::new());
    wm.ingest_all(&mut store, events).expect("scripted log is legal");
    consolidate(&mut wm, &mut store, &ArenaMap::default_arena(), now);
    (store, wm)
}

pub fn last_t(events: &[Event]) -> Timestamp {
    events.last().map_or(Timestamp(0), |e| e.t)
}
