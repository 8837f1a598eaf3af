//! Scripted competition runs: an event log plus the tables it was written from.

use std::collections::BTreeMap;

use epilog_core::model::{Capability, EmotionGroup, EntityClass, EpisodeId, EpisodeKind, Intensity, Timestamp};
use epilog_core::space::ArenaMap;
use epilog_core::store::{write_event_log, Event, EventPayload};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, TestName};
use crate::HarnessError;

const PERSON_NAMES: [&str; 10] = ["anna", "ben", "carla", "david", "emma", "felix", "grace", "hugo", "iris", "jonas"];
const OBJECT_NAMES: [&str; 12] =
    ["apple", "cup", "book", "remote", "bottle", "phone", "keys", "towel", "banana", "glass", "plate", "pillow"];
const COLORS: [&str; 8] = ["red", "blue", "green", "yellow", "black", "white", "grey", "orange"];
const GARMENTS: [&str; 5] = ["shirt", "sweater", "jacket", "dress", "hoodie"];

fn numbered(pool: &[&str], i: usize) -> String {
    let base = pool[i % pool.len()];
    match i / pool.len() {
        0 => base.to_string(),
        n => format!("{base}{}", n + 1),
    }
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: String,
    pub name: String,
    pub age: u32,
    pub color: String,
    pub garment: String,
    /// Furniture the person stays by.
    pub spot: String,
}

impl Person {
    /// Clothes worn at the given appearance: the same garment and colour
    /// every time, never exactly the same outfit twice in a row.
    pub fn clothes(&self, appearance: usize) -> String {
        let (c, g) = (&self.color, &self.garment);
        match appearance % 5 {
            0 => format!("{c} {g}"),
            1 => format!("light {c} {g}"),
            2 => format!("dark {c} {g}"),
            3 => format!("{c} {g} with stripes"),
            _ => format!("{c} {g} and a scarf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thing {
    pub id: String,
    pub spot: String,
}

/// What the script knows about one episode it opened.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub id: EpisodeId,
    pub kind: EpisodeKind,
    pub label: String,
    pub start: Timestamp,
    pub end: Option<Timestamp>,
    pub parent: Option<EpisodeId>,
    pub children: Vec<EpisodeId>,
    /// Emotion events aimed directly at this episode, strongest per group.
    pub emotions: BTreeMap<EmotionGroup, u8>,
    /// The single action a capability performs.
    pub action: Option<(String, Vec<String>)>,
}

/// One observed field value and the episode that observed it.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFact {
    pub entity: String,
    pub class: EntityClass,
    pub field: String,
    pub value: String,
    pub t: Timestamp,
    pub source: EpisodeId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    /// Indexed by id - 1.
    pub episodes: Vec<EpisodeRecord>,
    /// In emission order.
    pub states: Vec<StateFact>,
    pub emotion_events: usize,
}

impl Tables {
    pub fn episode(&self, id: EpisodeId) -> &EpisodeRecord {
        &self.episodes[(id.0 - 1) as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub map: ArenaMap,
    pub people: Vec<Person>,
    pub objects: Vec<Thing>,
    pub events: Vec<Event>,
    pub tables: Tables,
    pub start: Timestamp,
    /// Time of the last scripted event.
    pub end: Timestamp,
}

impl Scenario {
    pub fn event_log(&self) -> String {
        write_event_log(&self.events)
    }

    pub fn person(&self, id: &str) -> Option<&Person> {
        self.people.iter().find(|p| p.id == id)
    }
}

/// One capability step of a task.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub cap: Capability,
    pub label: String,
    pub verb: &'static str,
    pub args: Vec<String>,
    /// Furniture the robot stands by during the step.
    pub goto: Option<String>,
    pub says: Vec<(String, String)>,
    pub observes: Vec<(String, EntityClass, BTreeMap<String, String>)>,
}

impl Step {
    pub fn new(cap: Capability, label: impl Into<String>, verb: &'static str, args: &[&str]) -> Self {
        Step {
            cap,
            label: label.into(),
            verb,
            args: args.iter().map(|s| s.to_string()).collect(),
            goto: None,
            says: Vec::new(),
            observes: Vec::new(),
        }
    }

    pub fn goto(mut self, spot: &str) -> Self {
        self.goto = Some(spot.to_string());
        self
    }

    pub fn say(mut self, speaker: &str, text: impl Into<String>) -> Self {
        self.says.push((speaker.to_string(), text.into()));
        self
    }

    pub fn observe(mut self, entity: &str, class: EntityClass, fields: &[(&str, String)]) -> Self {
        let fields = fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        self.observes.push((entity.to_string(), class, fields));
        self
    }
}

/// Emits events while keeping the tables in step with what ingestion will
/// build from them.
pub(crate) struct Sim {
    pub rng: ChaCha8Rng,
    pub t: u64,
    pub events: Vec<Event>,
    pub tables: Tables,
    open: Vec<EpisodeId>,
    pending_emotions: usize,
    rate: f64,
    spots: BTreeMap<String, (f64, f64)>,
}

impl Sim {
    pub fn new(rng: ChaCha8Rng, t: u64, tables: Tables, rate: f64, map: &ArenaMap) -> Self {
        let mut spots: BTreeMap<String, (f64, f64)> =
            map.furniture.iter().map(|f| (f.name.clone(), f.rect.centroid())).collect();
        for r in &map.rooms {
            spots.entry(r.name.clone()).or_insert_with(|| r.rect.centroid());
        }
        Sim { rng, t, events: Vec::new(), tables, open: Vec::new(), pending_emotions: 0, rate, spots }
    }

    fn tick(&mut self, lo_s: u64, hi_s: u64) {
        self.t += self.rng.gen_range(lo_s * 1000..=hi_s * 1000);
    }

    fn emit(&mut self, payload: EventPayload) {
        self.events.push(Event::new(Timestamp(self.t), payload));
    }

    fn innermost(&self) -> EpisodeId {
        *self.open.last().expect("an episode is open")
    }

    fn rec_mut(&mut self, id: EpisodeId) -> &mut EpisodeRecord {
        &mut self.tables.episodes[(id.0 - 1) as usize]
    }

    pub fn begin(&mut self, kind: EpisodeKind, label: &str) -> EpisodeId {
        self.tick(1, 4);
        let parent = match kind {
            EpisodeKind::Context => None,
            _ => self
                .open
                .iter()
                .rev()
                .copied()
                .find(|id| !matches!(self.tables.episode(*id).kind, EpisodeKind::Capability(_))),
        };
        let id = EpisodeId(self.tables.episodes.len() as u64 + 1);
        self.tables.episodes.push(EpisodeRecord {
            id,
            kind,
            label: label.to_string(),
            start: Timestamp(self.t),
            end: None,
            parent,
            children: Vec::new(),
            emotions: BTreeMap::new(),
            action: None,
        });
        if let Some(p) = parent {
            self.rec_mut(p).children.push(id);
        }
        self.open.push(id);
        self.emit(EventPayload::Begin { kind, label: label.to_string() });
        id
    }

    pub fn end(&mut self, id: EpisodeId) {
        self.tick(1, 4);
        let pos = self.open.iter().position(|o| *o == id).expect("episode is open");
        self.open.remove(pos);
        let t = Timestamp(self.t);
        let rec = self.rec_mut(id);
        rec.end = Some(t);
        let label = rec.label.clone();
        self.emit(EventPayload::End { label: Some(label) });
    }

    pub fn say(&mut self, speaker: &str, text: &str) {
        self.tick(1, 6);
        self.emit(EventPayload::Say { speaker: speaker.to_string(), text: text.to_string() });
    }

    fn act(&mut self, verb: &str, args: &[String]) {
        self.tick(1, 3);
        let id = self.innermost();
        let rec = self.rec_mut(id);
        if rec.action.is_none() {
            rec.action = Some((verb.to_string(), args.to_vec()));
        }
        self.emit(EventPayload::Act { verb: verb.to_string(), args: args.to_vec() });
    }

    pub fn observe(&mut self, entity: &str, class: EntityClass, fields: &BTreeMap<String, String>) {
        self.tick(1, 5);
        let source = self.innermost();
        for (field, value) in fields {
            self.tables.states.push(StateFact {
                entity: entity.to_string(),
                class,
                field: field.clone(),
                value: value.clone(),
                t: Timestamp(self.t),
                source,
            });
        }
        self.emit(EventPayload::Observe { entity: entity.to_string(), class, fields: fields.clone(), media: None });
    }

    pub fn pose_at(&mut self, spot: &str) {
        self.tick(5, 30);
        let (x, y) = self.spots.get(spot).copied().unwrap_or((0.0, 0.0));
        self.emit(EventPayload::Pose { x, y });
    }

    pub fn pose_xy(&mut self, x: f64, y: f64) {
        self.tick(1, 3);
        self.emit(EventPayload::Pose { x, y });
    }

    fn emotion(&mut self) {
        self.tick(1, 3);
        let group = EmotionGroup::ALL[self.rng.gen_range(0..4)];
        let level = self.rng.gen_range(1..=3u8);
        let id = self.innermost();
        let slot = self.rec_mut(id).emotions.entry(group).or_insert(0);
        *slot = (*slot).max(level);
        self.tables.emotion_events += 1;
        let intensity = Intensity::new(level).expect("level in range");
        self.emit(EventPayload::Emotion { group, intensity });
    }

    fn maybe_emotion(&mut self) {
        if self.pending_emotions > 0 && self.rng.gen_bool(0.5) {
            self.pending_emotions -= 1;
            self.emotion();
        }
    }

    fn step_body(&mut self, s: &Step) {
        self.act(s.verb, &s.args);
        if let Some(spot) = &s.goto {
            self.pose_at(spot);
        }
        for (speaker, text) in &s.says {
            self.say(speaker, text);
        }
        for (entity, class, fields) in &s.observes {
            self.observe(entity, *class, fields);
        }
    }

    pub fn step(&mut self, s: &Step) -> EpisodeId {
        let id = self.begin(EpisodeKind::Capability(s.cap), &s.label);
        self.step_body(s);
        self.maybe_emotion();
        self.end(id);
        id
    }

    /// Two capabilities running at the same time; `b` starts while `a` is
    /// still going and outlives it.
    pub fn overlapping(&mut self, a: &Step, b: &Step) {
        assert_ne!(a.label, b.label, "concurrent steps are closed by label");
        let ia = self.begin(EpisodeKind::Capability(a.cap), &a.label);
        self.step_body(a);
        let ib = self.begin(EpisodeKind::Capability(b.cap), &b.label);
        self.step_body(b);
        self.maybe_emotion();
        self.end(ia);
        self.end(ib);
    }

    /// A task with the operator's command and scripted emotion events.
    pub fn task(&mut self, label: &str, command: &str, body: impl FnOnce(&mut Self)) -> EpisodeId {
        let id = self.begin(EpisodeKind::Task, label);
        self.say("operator", command);
        let whole = self.rate.floor();
        let extra = usize::from(self.rng.gen_bool(self.rate - whole));
        self.pending_emotions = whole as usize + extra;
        body(self);
        while self.pending_emotions > 0 {
            self.pending_emotions -= 1;
            self.emotion();
        }
        self.end(id);
        id
    }

    pub fn context(&mut self, label: &str, intro: &str, body: impl FnOnce(&mut Self)) -> EpisodeId {
        self.tick(20, 120);
        let id = self.begin(EpisodeKind::Context, label);
        self.say("referee", intro);
        body(self);
        self.end(id);
        id
    }
}

struct Script<'a> {
    people: &'a [Person],
    objects: &'a mut Vec<Thing>,
    spots: Vec<String>,
}

fn person_fields(p: &Person, appearance: usize, with_identity: bool) -> Vec<(&'static str, String)> {
    let mut f = vec![("clothes", p.clothes(appearance)), ("location", p.spot.clone())];
    if with_identity {
        f.push(("name", p.name.clone()));
        f.push(("age", p.age.to_string()));
    }
    f
}

fn memory_setup(sim: &mut Sim, sc: &mut Script<'_>, appearance: usize) {
    sim.context(TestName::MemorySetup.context_label(), "Memory setup: meet the committee", |sim| {
        sim.task("tour the arena", "Please take a look around the apartment.", |sim| {
            for o in sc.objects.iter() {
                let spot = o.spot.clone();
                sim.step(&Step::new(Capability::Navigation, format!("go to the {}", spoken(&spot)), "move", &[&spot]).goto(&spot));
                sim.step(
                    &Step::new(Capability::Perception, format!("look for the {}", o.id), "search", &[&o.id])
                        .observe(&o.id, EntityClass::Object, &[("location", spot.clone())]),
                );
            }
        });
        for p in sc.people {
            let cmd = format!("Please meet {}.", p.name);
            sim.task(&format!("meet {}", p.name), &cmd, |sim| {
                sim.step(&Step::new(Capability::Navigation, format!("approach {}", p.name), "move", &[&p.spot]).goto(&p.spot));
                sim.step(
                    &Step::new(Capability::Hri, format!("chat with {}", p.name), "greet", &[&p.id])
                        .say(&p.id, format!("Hi, I am {} and I am {} years old.", p.name, p.age))
                        .observe(&p.id, EntityClass::Person, &person_fields(p, appearance, true)),
                );
            });
        }
    });
}

fn spr(sim: &mut Sim, sc: &mut Script<'_>, appearance: usize) {
    sim.context(TestName::Spr.context_label(), "Stage 1: speech and person recognition", |sim| {
        sim.task("recognize the crowd", "Turn around and describe the crowd.", |sim| {
            let mut look = Step::new(
                Capability::Perception,
                "detect people",
                "detect",
                &sc.people.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            );
            for p in sc.people {
                look = look.observe(&p.id, EntityClass::Person, &person_fields(p, appearance, false));
            }
            sim.step(&look);
        });
        let n = sc.people.len().min(2);
        for p in &sc.people[..n] {
            let q = format!("{} asks a question", p.name);
            sim.task(&q, &format!("Answer the question from {}.", p.name), |sim| {
                sim.step(
                    &Step::new(Capability::Hri, format!("listen to {}", p.name), "answer", &[&p.id])
                        .say(&p.id, "What is the capital of the Netherlands?"),
                );
            });
        }
    });
}

fn gpsr(sim: &mut Sim, sc: &mut Script<'_>) {
    sim.context(TestName::Gpsr.context_label(), "Stage 1: general purpose service robot", |sim| {
        let n = sc.objects.len().min(2);
        for i in 0..n {
            let obj = sc.objects[i].id.clone();
            let from = sc.objects[i].spot.clone();
            let choices: Vec<&String> = sc.spots.iter().filter(|s| **s != from).collect();
            let to = choices.choose(&mut sim.rng).map(|s| s.to_string()).unwrap_or_else(|| from.clone());
            let label = format!("bring the {obj} to the {}", spoken(&to));
            let cmd = format!("Bring the {obj} to the {}.", spoken(&to));
            sim.task(&label, &cmd, |sim| {
                sim.step(&Step::new(Capability::Navigation, format!("go to the {}", spoken(&from)), "move", &[&from]).goto(&from));
                sim.step(&Step::new(Capability::Manipulation, format!("grab the {obj}"), "pick", &[&obj]));
                let carry = Step::new(Capability::Navigation, format!("carry the {obj}"), "move", &[&to]).goto(&to);
                if i % 2 == 0 {
                    sim.overlapping(&carry, &Step::new(Capability::Hri, "announce the delivery", "tell", &["operator"]));
                } else {
                    sim.step(&carry);
                }
                sim.step(
                    &Step::new(Capability::Manipulation, format!("put down the {obj}"), "place", &[&obj, &to])
                        .observe(&obj, EntityClass::Object, &[("location", to.clone())]),
                );
            });
            sc.objects[i].spot = to;
        }
    });
}

fn restaurant(sim: &mut Sim, sc: &mut Script<'_>, appearance: usize) {
    sim.context(TestName::Restaurant.context_label(), "Stage 2: restaurant", |sim| {
        let p = &sc.people[sim.rng.gen_range(0..sc.people.len())];
        let oi = sim.rng.gen_range(0..sc.objects.len());
        let obj = sc.objects[oi].id.clone();
        sim.task(&format!("take the order of {}", p.name), "Serve the customers.", |sim| {
            sim.overlapping(
                &Step::new(Capability::Navigation, "walk to the table", "move", &[&p.spot]).goto(&p.spot),
                &Step::new(Capability::Perception, format!("spot {} waving", p.name), "detect", &[&p.id])
                    .observe(&p.id, EntityClass::Person, &person_fields(p, appearance, false)),
            );
            sim.step(
                &Step::new(Capability::Hri, format!("ask {} for the order", p.name), "ask", &[&p.id])
                    .say(&p.id, format!("I would like the {obj}, please.")),
            );
        });
        let spot = p.spot.clone();
        sim.task(&format!("serve the {obj}"), &format!("Bring the {obj} to {}.", p.name), |sim| {
            sim.step(&Step::new(Capability::Navigation, format!("fetch the {obj}"), "move", &[&sc.objects[oi].spot]).goto(&sc.objects[oi].spot));
            sim.step(&Step::new(Capability::Manipulation, format!("grab the {obj}"), "pick", &[&obj]));
            sim.step(&Step::new(Capability::Navigation, "return to the table", "move", &[&spot]).goto(&spot));
            sim.step(
                &Step::new(Capability::Manipulation, format!("hand over the {obj}"), "serve", &[&obj, &p.id])
                    .observe(&obj, EntityClass::Object, &[("location", spot.clone())]),
            );
        });
        sc.objects[oi].spot = spot;
    });
}

fn epltm(sim: &mut Sim, sc: &mut Script<'_>) {
    sim.context(TestName::EpLtm.context_label(), "Stage 2: sick and elderly care", |sim| {
        let spot = sc.spots.iter().find(|s| s.as_str() == "bed").cloned().unwrap_or_else(|| sc.spots[0].clone());
        sim.task("enter the bedroom", "Come to the bedroom, please.", |sim| {
            sim.step(&Step::new(Capability::Navigation, format!("go to the {}", spoken(&spot)), "move", &[&spot]).goto(&spot));
            sim.step(&Step::new(Capability::Hri, "greet the operator", "greet", &["operator"]));
        });
    });
}

pub(crate) fn spoken(slug: &str) -> String {
    slug.replace(['_', '-'], " ")
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario, HarnessError> {
    cfg.check()?;
    let map = cfg.load_map()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut spots: Vec<String> = map.furniture.iter().map(|f| f.name.clone()).collect();
    if spots.is_empty() {
        spots = map.rooms.iter().map(|r| r.name.clone()).collect();
    }
    if spots.is_empty() {
        return Err(HarnessError::InvalidConfig("the map has neither furniture nor rooms".into()));
    }

    let people: Vec<Person> = (0..cfg.people)
        .map(|i| {
            let id = numbered(&PERSON_NAMES, i);
            Person {
                name: capitalized(&id),
                id,
                age: rng.gen_range(20..=85),
                color: COLORS.choose(&mut rng).expect("non-empty").to_string(),
                garment: GARMENTS.choose(&mut rng).expect("non-empty").to_string(),
                spot: spots.choose(&mut rng).expect("non-empty").clone(),
            }
        })
        .collect();
    let mut objects: Vec<Thing> = (0..cfg.objects)
        .map(|i| Thing { id: numbered(&OBJECT_NAMES, i), spot: spots.choose(&mut rng).expect("non-empty").clone() })
        .collect();
    let initial_objects = objects.clone();

    let mut sim = Sim::new(rng, cfg.start_ms, Tables::default(), cfg.emotion_event_rate, &map);
    // The robot waits just outside the arena before the first test.
    sim.pose_xy(map.bounds.x0 - 1.0, map.bounds.y0 - 1.0);

    let mut sc = Script { people: &people, objects: &mut objects, spots: spots.clone() };
    for (appearance, test) in cfg.tests.iter().enumerate() {
        match test {
            TestName::MemorySetup => memory_setup(&mut sim, &mut sc, appearance),
            TestName::Spr => spr(&mut sim, &mut sc, appearance),
            TestName::Gpsr => gpsr(&mut sim, &mut sc),
            TestName::Restaurant => restaurant(&mut sim, &mut sc, appearance),
            TestName::EpLtm => epltm(&mut sim, &mut sc),
        }
    }

    let end = Timestamp(sim.t);
    let events = std::mem::take(&mut sim.events);
    Ok(Scenario {
        config: cfg.clone(),
        map,
        people,
        objects: initial_objects,
        start: Timestamp(cfg.start_ms),
        end,
        events,
        tables: sim.tables,
    })
}

/// Continues a scenario's script after its last event.
pub(crate) fn resume(s: &Scenario, stream: u64) -> Sim {
    let mut rng = ChaCha8Rng::seed_from_u64(s.config.seed);
    rng.set_stream(stream);
    Sim::new(rng, s.end.0, s.tables.clone(), s.config.emotion_event_rate, &s.map)
}
