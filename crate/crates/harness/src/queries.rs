//! Referee questions in three categories, each with its expected answer.

use std::fmt;

use epilog_core::model::{Capability, EmotionGroup, EntityClass, EpisodeKind, Timestamp};
use epilog_core::query::Payload;
use epilog_core::store::Event;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{resume, spoken, Scenario, Sim, Step, Tables};
use crate::truth;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Memories and emotions.
    Cat1,
    /// Investigating objects in the arena.
    Cat2,
    /// Interacting with people in the arena.
    Cat3,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Cat1, Category::Cat2, Category::Cat3];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryItem {
    pub index: usize,
    pub category: Category,
    /// What the operator says.
    pub question: String,
    pub dsl: String,
    pub asked_at: Timestamp,
    /// What happens in the arena just before the question is asked.
    #[serde(default)]
    pub fresh_events: Vec<Event>,
    pub truth: Payload,
}

type Expect = Box<dyn Fn(&Tables, Timestamp) -> Payload>;

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("candidate list is non-empty")
}

struct Generator<'s> {
    s: &'s Scenario,
    sim: Sim,
    spare_objects: Vec<String>,
    spare_people: Vec<String>,
    appearance: usize,
}

impl Generator<'_> {
    fn scripted_tasks(&self) -> Vec<usize> {
        (0..self.s.tables.episodes.len()).filter(|i| self.s.tables.episodes[*i].kind == EpisodeKind::Task).collect()
    }

    fn cat1(&mut self, variant: usize) -> Result<(String, String, Expect), HarnessError> {
        let tasks = self.scripted_tasks();
        let tables = &self.s.tables;
        match variant % 4 {
            0 => {
                let moved: Vec<usize> = tasks
                    .iter()
                    .copied()
                    .filter(|i| truth::felt(tables, tables.episodes[*i].id).values().any(|l| *l > 0))
                    .collect();
                let i = *pick(&mut self.sim.rng, &moved);
                let label = tables.episodes[i].label.clone();
                let q = format!("How did you feel when you did \"{label}\"?");
                let dsl = format!("FEELING WHERE LABEL~\"{label}\"");
                Ok((q, dsl, Box::new(move |t, at| truth::feeling_by_label(t, &label, at))))
            }
            1 => {
                let felt: Vec<(EmotionGroup, u8)> = tasks
                    .iter()
                    .flat_map(|i| truth::felt(tables, tables.episodes[*i].id))
                    .filter(|(_, l)| *l > 0)
                    .collect();
                let (group, top) = *pick(&mut self.sim.rng, &felt);
                let min = self.sim.rng.gen_range(1..=top);
                let (from, to) = (self.s.start, self.s.end);
                let q = format!("Which tasks made you feel {group} at level {min} or more?");
                let dsl = format!(
                    "FIND EPISODES WHERE KIND=task AND EMOTION={group}>={min} AND DURING [{}, {}]",
                    from.0, to.0
                );
                Ok((q, dsl, Box::new(move |t, at| truth::tasks_feeling(t, group, min, from, to, at))))
            }
            2 => {
                let i = *pick(&mut self.sim.rng, &tasks);
                let r = &tables.episodes[i];
                let id = r.id;
                let q = format!("What did you do during \"{}\"?", r.label);
                Ok((q, format!("DESCRIBE {}", id.0), Box::new(move |t, at| truth::story(t, id, at))))
            }
            _ => {
                let i = *pick(&mut self.sim.rng, &tasks);
                let label = tables.episodes[i].label.clone();
                let q = format!("When did you \"{label}\"?");
                let dsl = format!("WHEN KIND=task AND LABEL~\"{label}\"");
                Ok((q, dsl, Box::new(move |t, at| truth::task_intervals(t, &label, at))))
            }
        }
    }

    /// A moment within the scripted run after the entity was first seen.
    fn historic_time(&mut self, entity: &str) -> Option<Timestamp> {
        let seen: Vec<Timestamp> =
            self.s.tables.states.iter().filter(|f| f.entity == entity && f.t <= self.s.end).map(|f| f.t).collect();
        let t = *seen.choose(&mut self.sim.rng)?;
        let room = self.s.end.0 - t.0;
        Some(Timestamp(t.0 + self.sim.rng.gen_range(0..=room.min(120_000))))
    }

    fn investigate(&mut self, obj: &str) {
        let spots: Vec<String> = self.s.map.furniture.iter().map(|f| f.name.clone()).collect();
        let spot = if spots.is_empty() {
            self.s.map.rooms[0].name.clone()
        } else {
            pick(&mut self.sim.rng, &spots).clone()
        };
        self.sim.task(&format!("check the {obj}"), &format!("Go and check the {obj}."), |sim| {
            sim.step(&Step::new(Capability::Navigation, format!("go to the {}", spoken(&spot)), "move", &[&spot]).goto(&spot));
            sim.step(
                &Step::new(Capability::Perception, format!("look for the {obj}"), "search", &[obj])
                    .observe(obj, EntityClass::Object, &[("location", spot.clone())]),
            );
        });
    }

    fn interact(&mut self, who: &str, fields: &[&str]) {
        let p = self.s.person(who).expect("roster member").clone();
        let appearance = self.appearance;
        self.appearance += 1;
        let all = [
            ("clothes", p.clothes(appearance)),
            ("location", p.spot.clone()),
            ("age", p.age.to_string()),
            ("name", p.name.clone()),
        ];
        let chosen: Vec<(&str, String)> = all.into_iter().filter(|(f, _)| fields.contains(f)).collect();
        let line = match fields {
            ["age"] => format!("I am {} years old.", p.age),
            _ => format!("Hello again, I am {}.", p.name),
        };
        self.sim.task(&format!("talk to {}", p.name), &format!("Go and talk to {}.", p.name), |sim| {
            sim.step(&Step::new(Capability::Navigation, format!("approach {}", p.name), "move", &[&p.spot]).goto(&p.spot));
            sim.step(
                &Step::new(Capability::Hri, format!("question {}", p.name), "ask", &[&p.id])
                    .say(&p.id, line)
                    .observe(&p.id, EntityClass::Person, &chosen),
            );
        });
    }

    fn cat2(&mut self, variant: usize) -> (String, String, Expect) {
        let fresh = variant % 4 < 2 && !self.spare_objects.is_empty();
        if fresh {
            let obj = self.spare_objects.remove(0);
            self.investigate(&obj);
            if variant.is_multiple_of(4) {
                let q = format!("Where is the {obj}?");
                (q, format!("WHERE-IS {obj}"), Box::new(move |t, at| truth::where_is(t, &obj, at)))
            } else {
                let q = format!("Where did you last see the {obj}?");
                let dsl = format!("STATE OF {obj} FIELD location");
                (q, dsl, Box::new(move |t, at| truth::state_of(t, &obj, Some("location"), at)))
            }
        } else {
            let obj = pick(&mut self.sim.rng, &self.s.objects).id.clone();
            let when = self.historic_time(&obj).unwrap_or(self.s.end);
            if variant.is_multiple_of(2) {
                let q = format!("Where was the {obj} at {}?", when.0);
                let dsl = format!("WHERE-IS {obj} AT {}", when.0);
                (q, dsl, Box::new(move |t, _| truth::where_is(t, &obj, when)))
            } else {
                let q = format!("Where had the {obj} been put by {}?", when.0);
                let dsl = format!("STATE OF {obj} FIELD location AT {}", when.0);
                (q, dsl, Box::new(move |t, _| truth::state_of(t, &obj, Some("location"), when)))
            }
        }
    }

    fn cat3(&mut self, variant: usize) -> (String, String, Expect) {
        if self.spare_people.is_empty() {
            let who = pick(&mut self.sim.rng, &self.s.people).id.clone();
            let when = self.historic_time(&who).unwrap_or(self.s.end);
            let q = format!("What was {who} wearing at {}?", when.0);
            let dsl = format!("STATE OF {who} FIELD clothes AT {}", when.0);
            return (q, dsl, Box::new(move |t, _| truth::state_of(t, &who, Some("clothes"), when)));
        }
        let who = self.spare_people.remove(0);
        let name = self.s.person(&who).map(|p| p.name.clone()).unwrap_or_default();
        match variant % 4 {
            0 => {
                self.interact(&who, &["clothes", "location"]);
                let dsl = format!("STATE OF {who} FIELD clothes");
                let q = format!("What is {name} wearing?");
                (q, dsl, Box::new(move |t, at| truth::state_of(t, &who, Some("clothes"), at)))
            }
            1 => {
                self.interact(&who, &["location"]);
                let q = format!("Where is {name}?");
                (q, format!("WHERE-IS {who}"), Box::new(move |t, at| truth::where_is(t, &who, at)))
            }
            2 => {
                self.interact(&who, &["age"]);
                let q = format!("How old is {name}?");
                let dsl = format!("STATE OF {who} FIELD age");
                (q, dsl, Box::new(move |t, at| truth::state_of(t, &who, Some("age"), at)))
            }
            _ => {
                self.interact(&who, &["clothes", "location", "name"]);
                let q = format!("What do you know about {name}?");
                (q, format!("STATE OF {who}"), Box::new(move |t, at| truth::state_of(t, &who, None, at)))
            }
        }
    }
}

/// Builds `n_per_cat` questions per category, interleaved Cat1, Cat2, Cat3.
///
/// Every question gets its own context in the EpLTM test; object and person
/// questions first send the robot to look or talk, and those events travel
/// with the item. Ids of the episodes they create assume all items are
/// replayed in order.
pub fn generate_queries(s: &Scenario, n_per_cat: usize) -> Result<Vec<QueryItem>, HarnessError> {
    if n_per_cat > 0 && s.tables.emotion_events == 0 {
        return Err(HarnessError::InsufficientScenario("no emotion events for memory and emotion questions".into()));
    }
    let mut spare_objects: Vec<String> = s.objects.iter().map(|o| o.id.clone()).collect();
    let mut spare_people: Vec<String> = s.people.iter().map(|p| p.id.clone()).collect();
    let mut sim = resume(s, 1);
    spare_objects.shuffle(&mut sim.rng);
    spare_people.shuffle(&mut sim.rng);
    let mut g = Generator { s, sim, spare_objects, spare_people, appearance: s.config.tests.len() };

    let mut items = Vec::with_capacity(3 * n_per_cat);
    for round in 0..n_per_cat {
        for category in Category::ALL {
            let index = items.len();
            let mark = g.sim.events.len();
            let label = format!("Test: EpLTM, Subtest: Query {}", index + 1);
            let ctx = g.sim.begin(EpisodeKind::Context, &label);
            let (question, dsl, expect) = match category {
                Category::Cat1 => {
                    g.sim.say("operator", "I have a question about the past.");
                    g.cat1(round)?
                }
                Category::Cat2 => {
                    g.sim.say("operator", "I have a question about an object.");
                    g.cat2(round)
                }
                Category::Cat3 => {
                    g.sim.say("operator", "I have a question about a person.");
                    g.cat3(round)
                }
            };
            g.sim.end(ctx);
            g.sim.t += 1000;
            let asked_at = Timestamp(g.sim.t);
            let fresh_events = g.sim.events[mark..].to_vec();
            // Expected answers only see what had happened by the time of asking.
            let truth = expect(&g.sim.tables, asked_at);
            items.push(QueryItem { index, category, question, dsl, asked_at, fresh_events, truth });
        }
    }
    Ok(items)
}

/// Indices of the default four-question session: the first question of each
/// category, then the next unused one, in asking order.
pub fn default_session(items: &[QueryItem]) -> Vec<usize> {
    let mut picks: Vec<usize> = Vec::new();
    for c in Category::ALL {
        if let Some(i) = items.iter().position(|q| q.category == c) {
            picks.push(i);
        }
    }
    for i in 0..items.len() {
        if picks.len() >= 4 {
            break;
        }
        if !picks.contains(&i) {
            picks.push(i);
        }
    }
    picks.sort_unstable();
    picks
}
