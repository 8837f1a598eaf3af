mod config;
mod state;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use epilog_core::evidence::{assemble, write_report};
use epilog_core::json::to_canonical_string;
use epilog_core::model::EpisodeId;
use epilog_core::query::{evaluate, parse_query, DescribeTarget, EvalContext, Query};
use epilog_core::relevance::{consolidate, forget};
use epilog_core::store::read_event_log;
use epilog_harness::{evaluate_engine, generate_queries, generate_scenario, ScenarioConfig};
use serde::Serialize;
use serde_json::json;

use config::EngineConfig;
use state::{write_atomic, DataDir};

const GRAMMAR: &str = r#"Query language:
  FIND EPISODES [WHERE conds] [ORDER BY TIME|RELEVANCE] [LIMIT n]
  WHEN conds
  WHERE-IS entity [AT t]
  STATE OF entity [FIELD name] [AT t]
  FEELING [WHERE conds]
  DESCRIBE id | DESCRIBE LAST [WHERE conds]

  conds = cond {AND cond}
  cond  = KIND=context|task|capability | LABEL~"text" | LOCATION=place
        | ENTITY=id | EMOTION=group[>=level] | DURING [from, to]
  group = joy_trust | sadness_fear | surprise_anticipation | anger_disgust
  Times are milliseconds since the Unix epoch."#;

#[derive(Parser)]
#[command(name = "epilog", version, about = "Episodic long-term memory for service robots", after_help = GRAMMAR)]
struct Cli {
    /// Engine configuration (engine.json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Append events from a JSON-lines file to working memory.
    Ingest { events: PathBuf },
    /// Move every finished episode tree into long-term memory.
    Consolidate {
        #[arg(long)]
        now: Option<u64>,
    },
    /// Answer a query and print it as JSON.
    Query {
        dsl: String,
        /// Also write the evidence bundle into this directory.
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Drop episodes that are no longer relevant.
    Forget {
        #[arg(long)]
        now: Option<u64>,
    },
    /// Check the long-term store's structure.
    Validate,
    /// Write the evidence report for one episode.
    Report {
        id: u64,
        out: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Generate a scenario's event log and questions.
    Simulate {
        scenario: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_per_cat: usize,
    },
    /// Run a scenario against the engine and score it.
    Evaluate {
        scenario: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_per_cat: usize,
    },
}

fn print_json<T: Serialize + ?Sized>(value: &T) -> Result<()> {
    println!("{}", to_canonical_string(value)?);
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("IoError: {}", dir.display()))?;
    let path = dir.join(name);
    write_atomic(&path, &(to_canonical_string(value)? + "\n"))?;
    Ok(path)
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("IoError: {}", path.display()))?;
    let mut cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| anyhow!("InvalidConfig: {}: {e}", path.display()))?;
    if let Some(map) = cfg.map.take() {
        cfg.map = Some(path.parent().unwrap_or(Path::new("")).join(map));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = EngineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { events } => {
            let events = read_event_log(&events)?;
            let dir = DataDir::open(&cfg.data_dir())?;
            let (mut store, mut wm) = dir.load()?;
            // All or nothing: a bad event leaves the data dir untouched.
            wm.ingest_all(&mut store, &events)?;
            dir.save(&store, &wm)?;
            dir.append_log(&events)?;
            print_json(&json!({
                "ingested": events.len(),
                "open": wm.open_episodes().count(),
                "awaiting_consolidation": wm.closed_roots().len(),
            }))
        }
        Command::Consolidate { now } => {
            let map = cfg.arena()?;
            let dir = DataDir::open(&cfg.data_dir())?;
            let (mut store, mut wm) = dir.load()?;
            let stats = consolidate(&mut wm, &mut store, &map, cfg.now(now));
            dir.save(&store, &wm)?;
            print_json(&stats)
        }
        Command::Query { dsl, evidence, now } => {
            let q = parse_query(&dsl)?;
            let map = cfg.arena()?;
            let dir = DataDir::open(&cfg.data_dir())?;
            let (store, _) = dir.load()?;
            let cx = EvalContext { now: cfg.now(now), params: cfg.params };
            let answer = evaluate(&store, &q, &cx)?;
            if let Some(out) = evidence {
                let bundle = assemble(&store, &answer, &map, &cx)?;
                write_report(&bundle, &out)?;
            }
            print_json(&answer)
        }
        Command::Forget { now } => {
            let dir = DataDir::open(&cfg.data_dir())?;
            let (mut store, wm) = dir.load()?;
            let pruned = forget(&mut store, cfg.now(now), &cfg.params);
            dir.save(&store, &wm)?;
            print_json(&json!({ "pruned": pruned }))
        }
        Command::Validate => {
            let dir = DataDir::open(&cfg.data_dir())?;
            let (store, _) = dir.load()?;
            let violations = store.validate();
            print_json(&violations)?;
            if !violations.is_empty() {
                return Err(anyhow!("InvariantViolation: {} violation(s)", violations.len()));
            }
            Ok(())
        }
        Command::Report { id, out, now } => {
            let map = cfg.arena()?;
            let dir = DataDir::open(&cfg.data_dir())?;
            let (store, _) = dir.load()?;
            let cx = EvalContext { now: cfg.now(now), params: cfg.params };
            let answer = evaluate(&store, &Query::Describe(DescribeTarget::Episode(EpisodeId(id))), &cx)?;
            let bundle = assemble(&store, &answer, &map, &cx)?;
            let written = write_report(&bundle, &out)?;
            print_json(&written)
        }
        Command::Simulate { scenario, out, n_per_cat } => {
            let s = generate_scenario(&load_scenario(&scenario)?)?;
            fs::create_dir_all(&out).with_context(|| format!("IoError: {}", out.display()))?;
            write_atomic(&out.join("events.jsonl"), &s.event_log())?;
            let items = generate_queries(&s, n_per_cat)?;
            write_json(&out, "queries.json", &items)?;
            print_json(&json!({ "events": s.events.len(), "queries": items.len() }))
        }
        Command::Evaluate { scenario, out, n_per_cat } => {
            let (_, _, ev) = evaluate_engine(&load_scenario(&scenario)?, n_per_cat, cfg.params)?;
            write_json(&out, "score.json", &ev)?;
            print_json(&json!({
                "pass": ev.pass,
                "session_fraction": ev.session.fraction,
                "extended_correct": ev.extended.correct,
                "extended_coherent": ev.extended.coherent,
                "extended_total": ev.extended.total,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{GRAMMAR}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e:#}");
            ExitCode::from(1)
        }
    }
}
