use std::fmt;
use std::path::PathBuf;

use epilog_core::space::{load_map, ArenaMap};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Timestamp of the first scenario event: Wed, July 17, 2019 15:40:15 UTC.
pub const DEFAULT_START_MS: u64 = 1_563_378_015_000;

/// One competition test, each becoming a context episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestName {
    MemorySetup,
    #[serde(rename = "Stage1/SPR")]
    Spr,
    #[serde(rename = "Stage1/GPSR")]
    Gpsr,
    #[serde(rename = "Stage2/Restaurant")]
    Restaurant,
    #[serde(rename = "Stage2/EpLTM")]
    EpLtm,
}

impl TestName {
    pub const ALL: [TestName; 5] =
        [TestName::MemorySetup, TestName::Spr, TestName::Gpsr, TestName::Restaurant, TestName::EpLtm];

    pub fn context_label(self) -> &'static str {
        match self {
            TestName::MemorySetup => "Memory Setup",
            TestName::Spr => "SPR Test",
            TestName::Gpsr => "GPSR Test",
            TestName::Restaurant => "Restaurant Test",
            TestName::EpLtm => "EpLTM Test",
        }
    }
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TestName::MemorySetup => "MemorySetup",
            TestName::Spr => "Stage1/SPR",
            TestName::Gpsr => "Stage1/GPSR",
            TestName::Restaurant => "Stage2/Restaurant",
            TestName::EpLtm => "Stage2/EpLTM",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub people: usize,
    pub objects: usize,
    pub tests: Vec<TestName>,
    /// Arena map file; the bundled arena when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    /// Mean number of emotion events per task.
    pub emotion_event_rate: f64,
    pub start_ms: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            people: 3,
            objects: 5,
            tests: TestName::ALL.to_vec(),
            map: None,
            emotion_event_rate: 1.0,
            start_ms: DEFAULT_START_MS,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(seed: u64) -> Self {
        ScenarioConfig { seed, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.people == 0 {
            return bad("people must be at least 1");
        }
        if self.objects == 0 {
            return bad("objects must be at least 1");
        }
        if self.tests.last() != Some(&TestName::EpLtm) {
            return bad("the test list must end with Stage2/EpLTM");
        }
        if self.tests.iter().filter(|t| **t == TestName::EpLtm).count() > 1 {
            return bad("Stage2/EpLTM may appear only once");
        }
        if !self.emotion_event_rate.is_finite() || self.emotion_event_rate < 0.0 {
            return bad("emotion_event_rate must be a finite non-negative number");
        }
        Ok(())
    }

    pub fn load_map(&self) -> Result<ArenaMap, HarnessError> {
        match &self.map {
            None => Ok(ArenaMap::default_arena()),
            Some(p) => Ok(load_map(p)?),
        }
    }
}
