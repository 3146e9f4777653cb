#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structind::agent::{HumanPolicy, Policy, ScriptedHuman, Step, StepAction};
use structind::dfd::{Background, Dfd, Edge, ProcessSpec, Vertex};
use structind::engine::{Engine, EngineError, RunConfig, RunState};
use structind::llm::{LlmFixture, ScriptedLlm};
use structind::protocol::{check_legal, Limits, Sender, Session, Tag};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// P1 -> P2 -> ... -> Pk.
pub fn chain(k: usize) -> Background {
    let vertices = (1..=k)
        .map(|i| {
            Vertex::process(
                format!("P{i}"),
                ProcessSpec::new(format!("do step {i}"), format!("input {i}"), format!("output {i}")),
            )
        })
        .collect();
    let edges = (1..k)
        .map(|i| Edge::new(format!("P{i}"), format!("P{}", i + 1), "data"))
        .collect();
    Background::new(Dfd { vertices, edges }, "Analyse the data end to end.")
}

pub fn random_limits(rng: &mut impl Rng) -> Limits {
    let messages = rng.random_range(1..=10);
    Limits {
        retries: rng.random_range(1..=5),
        messages,
        reject_after: rng.random_range(1..=messages),
    }
}

pub fn random_steps(rng: &mut impl Rng) -> Vec<Step> {
    let len = rng.random_range(1..=24);
    (0..len)
        .map(|i| {
            let action = match rng.random_range(0..100) {
                0..8 => StepAction::Ratify,
                8..12 => StepAction::Reject,
                12..30 => StepAction::RefuteExplanation,
                _ => StepAction::Refute,
            };
            Step {
                action,
                text: Some(format!("note {i}")),
            }
        })
        .collect()
}

/// Model answers where some replies carry no program.
pub fn random_fixture(rng: &mut impl Rng, k: usize) -> LlmFixture {
    let mut fixture = LlmFixture {
        v: 1,
        ..LlmFixture::default()
    };
    for p in 1..=k {
        let answers = (0..rng.random_range(0..60))
            .map(|i| {
                if rng.random_bool(0.1) {
                    format!("I need more detail before writing P{p}.")
                } else {
                    format!("Answer {i}.\n\n```python\nprint({p}, {i})\n```\n")
                }
            })
            .collect();
        fixture.processes.insert(format!("P{p}"), answers);
    }
    fixture
}

pub struct Fuzzed {
    pub config: RunConfig,
    pub result: Result<RunState, EngineError>,
}

impl Fuzzed {
    /// Sessions as far as they got, including one cut short by a refused
    /// evaluation.
    pub fn sessions(&self) -> Vec<Session> {
        match &self.result {
            Ok(state) => state.sessions.clone(),
            Err(EngineError::Protocol { session, .. }) => vec![(**session).clone()],
            Err(_) => Vec::new(),
        }
    }
}

pub fn fuzz_run(seed: u64) -> Fuzzed {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let config = RunConfig {
        limits: random_limits(&mut rng),
        caching: false,
        ..RunConfig::default()
    };
    let mut policy = HumanPolicy::uniform(Policy::Steps(random_steps(&mut rng)));
    for p in 1..=k {
        if rng.random_bool(0.5) {
            policy
                .processes
                .insert(format!("P{p}"), Policy::Steps(random_steps(&mut rng)));
        }
    }
    let mut llm = ScriptedLlm::new(random_fixture(&mut rng, k));
    let mut human = ScriptedHuman::new(policy);
    let result = Engine::new(&mut llm, &mut human).execute(&chain(k), &config);
    Fuzzed { config, result }
}

/// Every way a transcript can break the protocol, as text.
pub fn session_faults(s: &Session) -> Vec<String> {
    let mut faults: Vec<String> = check_legal(s).iter().map(|v| v.to_string()).collect();
    let tags: Vec<(Sender, Tag)> = s.tags().collect();
    if tags.iter().any(|t| t.1 == Tag::Ratify) && tags.iter().any(|t| t.1 == Tag::Reject) {
        faults.push("both RATIFY and REJECT".into());
    }
    if tags.contains(&(Sender::Human, Tag::Revise)) {
        faults.push("human REVISE".into());
    }
    if tags.contains(&(Sender::Machine, Tag::Reject)) {
        faults.push("machine REJECT".into());
    }
    faults
}
