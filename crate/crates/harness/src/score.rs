//! Running a session against a responder and refereeing its answers.

use std::collections::BTreeMap;

use epilog_core::evidence::{assemble, check_coherence, EvidenceBundle, Incoherence};
use epilog_core::model::Timestamp;
use epilog_core::query::{evaluate, parse_query, Answer, EvalContext};
use epilog_core::relevance::{consolidate, RelevanceParams};
use epilog_core::space::ArenaMap;
use epilog_core::store::{Event, Store, WorkingMemory};
use serde::{Deserialize, Serialize};

use crate::queries::{default_session, generate_queries, Category, QueryItem};
use crate::scenario::{generate_scenario, Scenario};
use crate::config::ScenarioConfig;
use crate::HarnessError;

/// Anything that can live through the competition and answer questions.
pub trait Responder {
    /// Takes in what happened and files away everything finished by `now`.
    fn witness(&mut self, events: &[Event], now: Timestamp) -> Result<(), String>;
    fn answer(&mut self, dsl: &str, now: Timestamp) -> Result<Answer, String>;
    fn evidence(&mut self, answer: &Answer, now: Timestamp) -> Result<EvidenceBundle, String>;
    /// The memory the referee checks evidence against.
    fn store(&self) -> &Store;
}

/// The real engine: working memory, long-term store and query evaluation.
#[derive(Debug, Clone)]
pub struct Engine {
    pub store: Store,
    pub wm: WorkingMemory,
    pub map: ArenaMap,
    pub params: RelevanceParams,
}

impl Engine {
    pub fn new(map: ArenaMap, params: RelevanceParams) -> Self {
        Engine { store: Store::new(), wm: WorkingMemory::new(), map, params }
    }

    fn cx(&self, now: Timestamp) -> EvalContext {
        EvalContext { now, params: self.params }
    }
}

impl Responder for Engine {
    fn witness(&mut self, events: &[Event], now: Timestamp) -> Result<(), String> {
        self.wm.ingest_all(&mut self.store, events).map_err(|e| e.to_string())?;
        consolidate(&mut self.wm, &mut self.store, &self.map, now);
        Ok(())
    }

    fn answer(&mut self, dsl: &str, now: Timestamp) -> Result<Answer, String> {
        let q = parse_query(dsl).map_err(|e| e.to_string())?;
        evaluate(&self.store, &q, &self.cx(now)).map_err(|e| e.to_string())
    }

    fn evidence(&mut self, answer: &Answer, now: Timestamp) -> Result<EvidenceBundle, String> {
        assemble(&self.store, answer, &self.map, &self.cx(now)).map_err(|e| e.to_string())
    }

    fn store(&self) -> &Store {
        &self.store
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub index: usize,
    pub category: Category,
    pub dsl: String,
    pub correct: bool,
    pub coherent: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<Incoherence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub queries: Vec<QueryScore>,
    /// Whether the category has at least one correct and coherent answer.
    pub coverage: BTreeMap<Category, bool>,
    pub correct: usize,
    pub coherent: usize,
    pub total: usize,
    /// Share of questions answered both correctly and coherently.
    pub fraction: f64,
    pub pass: bool,
}

fn referee(
    item: &QueryItem,
    responder: &mut dyn Responder,
    map: &ArenaMap,
    params: RelevanceParams,
) -> QueryScore {
    let mut score = QueryScore {
        index: item.index,
        category: item.category,
        dsl: item.dsl.clone(),
        correct: false,
        coherent: false,
        reasons: Vec::new(),
        error: None,
    };
    let cx = EvalContext { now: item.asked_at, params };
    let answer = match responder.answer(&item.dsl, item.asked_at) {
        Ok(a) => a,
        Err(e) => {
            score.error = Some(e);
            return score;
        }
    };
    score.correct = answer.payload == item.truth;
    if answer.supporting_ids.is_empty() {
        // Nothing cited: the answer must follow from an empty memory.
        let again = evaluate(&responder.store().induced(&[]), &answer.query, &cx);
        score.coherent = again.is_ok_and(|a| a.payload == answer.payload);
        if !score.coherent {
            score.reasons.push(Incoherence::UnderivableAnswer);
        }
        return score;
    }
    match responder.evidence(&answer, item.asked_at) {
        Ok(bundle) => {
            let c = check_coherence(&answer, &bundle, responder.store(), map, &cx);
            score.coherent = c.coherent;
            score.reasons = c.reasons;
        }
        Err(e) => score.error = Some(e),
    }
    score
}

/// Replays the scenario and every item's fresh events in order, asking the
/// questions listed in `picks`. Errors count against the answer; the run
/// never stops early.
pub fn run_and_score(
    s: &Scenario,
    items: &[QueryItem],
    picks: &[usize],
    responder: &mut dyn Responder,
    params: RelevanceParams,
) -> ScoreReport {
    let mut queries = Vec::new();
    let setup = responder.witness(&s.events, s.end);
    for (i, item) in items.iter().enumerate() {
        let fresh = responder.witness(&item.fresh_events, item.asked_at);
        if !picks.contains(&i) {
            continue;
        }
        let mut score = referee(item, responder, &s.map, params);
        if let Err(e) = setup.as_ref().and(fresh.as_ref()) {
            score.correct = false;
            score.error.get_or_insert_with(|| e.clone());
        }
        queries.push(score);
    }
    summarize(queries)
}

pub fn summarize(queries: Vec<QueryScore>) -> ScoreReport {
    let coverage: BTreeMap<Category, bool> = Category::ALL
        .into_iter()
        .map(|c| (c, queries.iter().any(|q| q.category == c && q.correct && q.coherent)))
        .collect();
    let correct = queries.iter().filter(|q| q.correct).count();
    let coherent = queries.iter().filter(|q| q.coherent).count();
    let good = queries.iter().filter(|q| q.correct && q.coherent).count();
    let total = queries.len();
    ScoreReport {
        pass: coverage.values().all(|c| *c),
        fraction: if total == 0 { 0.0 } else { good as f64 / total as f64 },
        coverage,
        correct,
        coherent,
        total,
        queries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// The four-question session.
    pub session: ScoreReport,
    /// Every generated question.
    pub extended: ScoreReport,
    pub pass: bool,
}

/// Generates the scenario and questions for `cfg` and scores the engine on
/// both the default session and the full question set.
pub fn evaluate_engine(
    cfg: &ScenarioConfig,
    n_per_cat: usize,
    params: RelevanceParams,
) -> Result<(Scenario, Vec<QueryItem>, Evaluation), HarnessError> {
    let s = generate_scenario(cfg)?;
    let items = generate_queries(&s, n_per_cat)?;
    let picks = default_session(&items);
    let session = run_and_score(&s, &items, &picks, &mut Engine::new(s.map.clone(), params), params);
    let all: Vec<usize> = (0..items.len()).collect();
    let extended = run_and_score(&s, &items, &all, &mut Engine::new(s.map.clone(), params), params);
    let pass = session.pass;
    Ok((s, items, Evaluation { session, extended, pass }))
}
