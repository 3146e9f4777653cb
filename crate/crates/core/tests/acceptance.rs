//! Acceptance gate: one PASS/FAIL line per criterion, each timed against its
//! budget. Exits non-zero if anything fails.

mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, ExitCode, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use structind::agent::{HumanPolicy, Policy, ScriptedHuman, Step, StepAction};
use structind::clock::LogicalClock;
use structind::context::{CharsPerToken, Context, Origin};
use structind::dfd::Background;
use structind::engine::{summarize_context, Engine, EngineError, Mode, RunConfig, RunStatus};
use structind::llm::{LlmFixture, ScriptedLlm, ENV_API_KEY};
use structind::protocol::{
    check_legal, classify_intelligibility, human_tag_options, machine_tag_options, Limits, Session, SessionBuilder, Tag,
};
use structind::store::{metrics, replay, run_checkpointed, RunRecord, Store};

use common::{chain, fixtures, fuzz_run, random_limits, session_faults};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "tag tables",
            budget: secs(1),
            check: tag_tables,
        },
        Criterion {
            name: "legality under fuzzing",
            budget: secs(30),
            check: legality_fuzz,
        },
        Criterion {
            name: "machine call bound",
            budget: secs(60),
            check: call_bound,
        },
        Criterion {
            name: "PHY golden run",
            budget: secs(10),
            check: phy_golden,
        },
        Criterion {
            name: "BIO run",
            budget: secs(10),
            check: bio_run,
        },
        Criterion {
            name: "default parameters",
            budget: secs(1),
            check: defaults,
        },
        Criterion {
            name: "baseline budgets",
            budget: secs(5),
            check: baselines,
        },
        Criterion {
            name: "context summarization",
            budget: secs(5),
            check: summarization,
        },
        Criterion {
            name: "crash recovery",
            budget: secs(120),
            check: crash_recovery,
        },
        Criterion {
            name: "intelligibility flags",
            budget: secs(1),
            check: intelligibility,
        },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = started.elapsed();
        let (verdict, detail) = match result {
            Ok(d) if took <= c.budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over budget")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "{verdict}  {:<24} {detail} ({:.2}s of {}s)",
            c.name,
            took.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// ---------------------------------------------------------------------------

/// Human and machine option sets, transcribed cell by cell.
fn tag_tables() -> Outcome {
    use Tag::*;
    let human = |matches: bool, agrees: bool, past_gate: bool| -> Vec<Tag> {
        match (matches, agrees, past_gate) {
            (true, true, _) => vec![Ratify],
            (true, false, _) | (false, true, _) => vec![Refute],
            (false, false, false) => vec![Refute],
            (false, false, true) => vec![Refute, Reject],
        }
    };
    let machine = |matches: bool, agrees: bool| -> Vec<Tag> {
        match (matches, agrees) {
            (true, true) => vec![Ratify],
            (false, false) => vec![Refute],
            _ => vec![Refute, Revise],
        }
    };
    let sorted = |mut v: Vec<Tag>| {
        v.sort();
        v
    };
    let mut cells = 0;
    for matches in [true, false] {
        for agrees in [true, false] {
            let got = sorted(machine_tag_options(matches, agrees).into_iter().collect());
            ensure!(
                got == sorted(machine(matches, agrees)),
                "machine ({matches}, {agrees}): {got:?}"
            );
            cells += 1;
            for m in 1..=10 {
                for index in 1..=10 {
                    let got = sorted(human_tag_options(matches, agrees, index, m).into_iter().collect());
                    let want = sorted(human(matches, agrees, index > m));
                    ensure!(got == want, "human ({matches}, {agrees}) at {index}, m = {m}: {got:?}");
                }
            }
            cells += 1;
        }
    }
    Ok(format!("{cells} cells, gate checked for m and index up to 10"))
}

fn legality_fuzz() -> Outcome {
    let (mut completed, mut refused, mut sessions) = (0, 0, 0);
    for seed in 0..10_000u64 {
        let run = fuzz_run(seed);
        match &run.result {
            Ok(_) => completed += 1,
            Err(EngineError::Protocol { error, .. }) if error.to_string().contains("REJECT gated") => refused += 1,
            Err(e) => return Err(format!("seed {seed}: {e}")),
        }
        for s in run.sessions() {
            let faults = session_faults(&s);
            ensure!(faults.is_empty(), "seed {seed}, {}: {faults:?}", s.process_id);
            sessions += 1;
        }
    }
    Ok(format!(
        "10000 runs, {sessions} sessions, 0 illegal; {completed} completed, {refused} stopped at an early REJECT"
    ))
}

/// Refute every proposal but the very last one allowed.
fn refute_to_the_end(limits: Limits) -> Policy {
    let total = (limits.retries * limits.messages) as usize;
    let mut steps: Vec<Step> = (0..total - 1)
        .map(|i| Step {
            action: StepAction::Refute,
            text: Some(format!("not yet {i}")),
        })
        .collect();
    steps.push(Step {
        action: StepAction::Ratify,
        text: None,
    });
    Policy::Steps(steps)
}

fn call_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tight = 0;
    for i in 0..1_000u64 {
        let run = fuzz_run(1_000_000 + i);
        let Limits { retries, messages, .. } = run.config.limits;
        let bound = (retries * messages) as usize;
        for s in run.sessions() {
            ensure!(
                s.machine_messages() <= bound,
                "run {i}: {} made {} calls",
                s.process_id,
                s.machine_messages()
            );
        }
        if let Ok(state) = &run.result {
            ensure!(
                state.machine_calls() <= state.ordering.len() * bound,
                "run {i} over k R n"
            );
        }

        // The bound is reached exactly when the human holds out.
        let k = rng.random_range(1..=3);
        let limits = random_limits(&mut rng);
        let bound = (limits.retries * limits.messages) as usize;
        let config = RunConfig {
            limits,
            caching: false,
            ..RunConfig::default()
        };
        let mut llm = ScriptedLlm::new(LlmFixture::default());
        let mut human = ScriptedHuman::uniform(Policy::always_refute());
        let state = Engine::new(&mut llm, &mut human)
            .execute(&chain(k), &config)
            .map_err(|e| e.to_string())?;
        ensure!(state.status == RunStatus::Failed, "always-refute run did not fail");
        ensure!(
            state.machine_calls() == bound,
            "always-refute: {} calls, bound {bound}",
            state.machine_calls()
        );

        let mut llm = ScriptedLlm::new(LlmFixture::default());
        let mut human = ScriptedHuman::uniform(refute_to_the_end(limits));
        let state = Engine::new(&mut llm, &mut human)
            .execute(&chain(k), &config)
            .map_err(|e| e.to_string())?;
        ensure!(state.status == RunStatus::Done, "last-moment ratify run did not finish");
        ensure!(
            state.machine_calls() == k * bound && llm.calls() == k * bound,
            "last-moment ratify: {} calls, k R n = {}",
            state.machine_calls(),
            k * bound
        );
        tight += 1;
    }
    Ok(format!(
        "1000 fuzzed runs within R n per process; {tight} runs reach R n and k R n exactly"
    ))
}

// ---------------------------------------------------------------------------

fn scripted(dir: &Path) -> (ScriptedLlm, ScriptedHuman) {
    let llm = ScriptedLlm::load(&dir.join("llm.json")).expect("llm fixture");
    let policy = HumanPolicy::load(&dir.join("human.json")).expect("human fixture");
    (llm, ScriptedHuman::new(policy))
}

fn background(dir: &Path) -> Background {
    structind::cli::load_dfd(&dir.join("dfd.json")).expect("fixture dfd")
}

/// Runs the fixture in `dir` into a fresh store and loads the record back.
fn recorded_run(dir: &Path, store: &Path) -> Result<RunRecord, String> {
    let store = Store::open(store).map_err(|e| e.to_string())?;
    let (mut llm, mut human) = scripted(dir);
    run_checkpointed(
        &store,
        "golden",
        &background(dir),
        &RunConfig::default(),
        &mut llm,
        &mut human,
        None,
        Arc::new(LogicalClock::new()),
    )
    .map_err(|e| e.to_string())?;
    store.load("golden").map_err(|e| e.to_string())
}

fn session_files(store: &Path, n: usize) -> Vec<String> {
    let store = Store::open(store).unwrap();
    (0..n)
        .map(|k| store.read_session_text("golden", k).unwrap().unwrap_or_default())
        .collect()
}

fn headers(record: &RunRecord) -> Vec<String> {
    let program = record
        .assembled()
        .and_then(|p| p.as_str().map(str::to_string))
        .unwrap_or_default();
    program
        .lines()
        .filter(|l| l.starts_with("# --- process"))
        .map(str::to_string)
        .collect()
}

fn human_counts(sessions: &[Session]) -> Vec<usize> {
    sessions.iter().map(Session::human_interactions).collect()
}

fn phy_golden() -> Outcome {
    let dir = fixtures().join("phy");
    let mut files = Vec::new();
    let mut last = None;
    for _ in 0..3 {
        let store = tempfile::tempdir().unwrap();
        let record = recorded_run(&dir, store.path())?;
        files.push(session_files(store.path(), record.sessions.len()));
        last = Some(record);
    }
    ensure!(
        files.windows(2).all(|w| w[0] == w[1]),
        "session files differ between runs"
    );
    let record = last.unwrap();
    let want: Vec<String> = (1..=4).map(|i| format!("# --- process P{i} ---")).collect();
    ensure!(headers(&record) == want, "blocks {:?}", headers(&record));
    let counts = human_counts(&record.sessions);
    ensure!(counts == [2, 3, 2, 6], "per-process interactions {counts:?}");
    let total = metrics(&record).interactions;
    ensure!(total == 13, "{total} interactions");
    ensure!(
        replay(&record).map_err(|e| e.to_string())?.is_faithful(),
        "replay diverged"
    );
    Ok("13 interactions (2, 3, 2, 6), 4 blocks, 3 byte-identical runs".into())
}

fn bio_run() -> Outcome {
    let dir = fixtures().join("bio");
    let store = tempfile::tempdir().unwrap();
    let record = recorded_run(&dir, store.path())?;
    let order: Vec<String> = record.manifest.ordering.iter().map(|v| v.to_string()).collect();
    let pos = |p: &str| order.iter().position(|o| o == p).unwrap_or(usize::MAX);
    ensure!(
        pos("P6") > pos("P3") && pos("P6") > pos("P5"),
        "P6 too early in {order:?}"
    );
    ensure!(pos("P8") == order.len() - 1, "P8 not last in {order:?}");
    let total = metrics(&record).interactions;
    ensure!(total == 22, "{total} interactions");
    ensure!(headers(&record).len() == 8, "{} blocks", headers(&record).len());
    Ok(format!("22 interactions over {}", order.join(", ")))
}

fn defaults() -> Outcome {
    let store = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_structind"))
        .args(["run", "--mock"])
        .arg(fixtures().join("phy"))
        .arg(fixtures().join("trivial.dfd.json"))
        .arg("--store")
        .arg(store.path())
        .args(["--run-id", "defaults"])
        .env_remove(ENV_API_KEY)
        .env("RUST_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = Store::open(store.path())
        .and_then(|s| s.read_manifest("defaults"))
        .map_err(|e| e.to_string())?;
    let config = serde_json::to_value(&manifest.config).unwrap();
    let got = (&config["R"], &config["n"], &config["m"], &config["temperature"]);
    ensure!(
        got == (&json!(5), &json!(10), &json!(6), &json!(1.0)),
        "recorded {config}"
    );
    Ok("R 5, n 10, m 6, temperature 1.0".into())
}

fn baselines() -> Outcome {
    let dir = fixtures().join("phy");
    let bg = background(&dir);
    let never = HumanPolicy {
        baseline: Some(Policy::always_refute()),
        ..HumanPolicy::uniform(Policy::always_refute())
    };
    let mut calls = Vec::new();
    for mode in [Mode::LlmK { budget: 13 }, Mode::Llm0] {
        let (mut llm, _) = scripted(&dir);
        let mut human = ScriptedHuman::new(never.clone());
        let config = RunConfig {
            mode,
            ..RunConfig::default()
        };
        let state = Engine::new(&mut llm, &mut human)
            .execute(&bg, &config)
            .map_err(|e| e.to_string())?;
        ensure!(
            state.machine_calls() == llm.calls(),
            "{}: state and model disagree",
            mode.name()
        );
        calls.push(llm.calls());
    }
    ensure!(calls == [13, 1], "calls {calls:?}");
    Ok("llm-k with budget 13 makes 13 calls, llm-0 makes 1".into())
}

fn summarization() -> Outcome {
    let est = CharsPerToken::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut shrunk, mut untouched) = (0, 0);
    for case in 0..200 {
        let mut ctx = Context::new("Analyse the data end to end.");
        for i in 0..rng.random_range(1..30) {
            let text: String = (0..rng.random_range(0..300))
                .map(|_| rng.random_range('a'..='z'))
                .collect();
            let id = if i % 2 == 0 {
                ctx.push_user(text)
            } else {
                ctx.push_assistant(text)
            };
            ctx.set_pinned(id, rng.random_bool(0.2));
        }
        let budget = rng.random_range(50..1500);
        let before = ctx.tokens(&est);
        let mut llm = ScriptedLlm::repeating("Earlier steps loaded and cleaned the data.");
        let out = summarize_context(&mut llm, &ctx, budget, &est, &mut |_, _| {});
        for p in ctx.items().iter().filter(|i| i.pinned) {
            ensure!(
                out.context.items().contains(p),
                "case {case}: pinned item {:?} lost",
                p.id
            );
        }
        if before <= budget {
            ensure!(
                out.context == ctx && llm.calls() == 0,
                "case {case}: under budget but changed"
            );
            untouched += 1;
        } else if out.warning.is_none() {
            ensure!(out.context.tokens(&est) <= budget, "case {case}: still over budget");
            let summary = out.context.items().iter().find(|i| Some(i.id) == out.summary);
            let Some(summary) = summary else {
                return Err(format!("case {case}: no summary item"));
            };
            ensure!(
                summary.origin
                    == Origin::Summary {
                        replaced: out.replaced.clone()
                    },
                "case {case}: summary does not record what it replaced"
            );
            shrunk += 1;
        }
    }
    ensure!(
        shrunk > 50 && untouched > 10,
        "weak coverage: {shrunk} shrunk, {untouched} untouched"
    );
    Ok(format!(
        "{shrunk} contexts brought under budget, {untouched} left alone"
    ))
}

// ---------------------------------------------------------------------------

struct Server {
    child: Child,
    base: String,
}

fn start_server(store: &Path) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_structind"))
        .args(["serve", "--addr", "127.0.0.1:0", "--store"])
        .arg(store)
        .env_remove(ENV_API_KEY)
        .env("RUST_LOG", "off")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("server starts");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .expect("listening line")
        .to_string();
    Server { child, base }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

/// The evaluation the PHY human gives at a given exchange.
fn phy_step(policy: &Value, process: &str, exchange: u64) -> Value {
    let step = &policy["processes"][process][exchange as usize - 1];
    match step["action"].as_str() {
        Some("refute") => json!({ "tag": "REFUTE", "refutation": step["text"] }),
        _ => json!({ "tag": "RATIFY" }),
    }
}

fn create(base: &str, id: &str) -> Result<(), String> {
    let dir = fixtures().join("phy");
    let dfd: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("dfd.json")).unwrap()).unwrap();
    let fixture: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("llm.json")).unwrap()).unwrap();
    let body = json!({
        "dfd": dfd,
        "run_id": id,
        "llm": { "kind": "mock", "fixture": fixture },
        "human": { "kind": "remote" },
    });
    let r = agent()
        .post(&format!("{base}/runs"))
        .send_json(&body)
        .map_err(|e| e.to_string())?;
    match r.status().as_u16() {
        201 => Ok(()),
        s => Err(format!("create {id}: {s}")),
    }
}

fn view(base: &str, id: &str) -> Result<Value, String> {
    let mut r = agent()
        .get(&format!("{base}/runs/{id}"))
        .call()
        .map_err(|e| e.to_string())?;
    let text = r.body_mut().read_to_string().map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Drives run `id` until it finishes or the server stops answering.
/// Returns true when the run finished.
fn drive(base: &str, id: &str, policy: &Value) -> bool {
    loop {
        let Ok(v) = view(base, id) else { return false };
        if v["status"] != "running" {
            return true;
        }
        let a = &v["awaiting"];
        if a.is_null() {
            thread::sleep(Duration::from_millis(2));
            continue;
        }
        let mut body = phy_step(policy, a["process"].as_str().unwrap(), a["exchange"].as_u64().unwrap());
        body["token"] = a["token"].clone();
        if agent()
            .post(&format!("{base}/runs/{id}/evaluation"))
            .send_json(&body)
            .is_err()
        {
            return false;
        }
    }
}

/// Waits until the resumed run asks for an evaluation or ends.
fn settle(base: &str, id: &str) -> Result<Value, String> {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let v = view(base, id)?;
        if v["status"] != "running" || !v["awaiting"].is_null() {
            return Ok(v);
        }
        ensure!(
            Instant::now() < deadline,
            "run {id} never settled after restart: {}",
            v["phase"]
        );
        thread::sleep(Duration::from_millis(5));
    }
}

fn human_evaluations(sessions: &[Session]) -> usize {
    sessions.iter().map(Session::human_interactions).sum()
}

fn check_finished(store: &Store, id: &str, golden: &RunRecord) -> Result<(), String> {
    let record = store.load(id).map_err(|e| e.to_string())?;
    ensure!(record.is_complete(), "run {id} incomplete");
    for (k, s) in record.sessions.iter().enumerate() {
        let v = check_legal(s);
        ensure!(v.is_empty(), "run {id} session {k}: {v:?}");
    }
    ensure!(
        metrics(&record).interactions == 13,
        "run {id}: {} interactions",
        metrics(&record).interactions
    );
    ensure!(
        replay(&record).map_err(|e| e.to_string())?.is_faithful(),
        "run {id}: replay diverged"
    );
    ensure!(
        record.sessions.len() == golden.sessions.len(),
        "run {id}: session count"
    );
    for (a, b) in record.sessions.iter().zip(&golden.sessions) {
        ensure!(
            a.messages.len() == b.messages.len(),
            "run {id} {}: transcript length",
            a.process_id
        );
        for (x, y) in a.messages.iter().zip(&b.messages) {
            ensure!(
                x.same_content(y),
                "run {id} {}: differs from the golden transcript",
                a.process_id
            );
        }
    }
    Ok(())
}

fn crash_recovery() -> Outcome {
    let phy = fixtures().join("phy");
    let policy: Value = serde_json::from_str(&std::fs::read_to_string(phy.join("human.json")).unwrap()).unwrap();
    let golden_dir = tempfile::tempdir().unwrap();
    let golden = recorded_run(&phy, golden_dir.path())?;

    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut runs, mut finished, mut resumed) = (0, 0, 0);
    let mut current = String::new();
    let kills = 20;

    for round in 0..=kills {
        let mut server = start_server(dir.path());
        let base = server.base.clone();

        if !current.is_empty() && store.exists(&current) {
            // Whatever was durable before the kill must be what the run
            // continues from, with no evaluation invented on the way.
            let before = store
                .load(&current)
                .map_err(|e| format!("snapshot of {current}: {e}"))?;
            let v = settle(&base, &current)?;
            let after = store.load(&current).map_err(|e| e.to_string())?;
            for (k, old) in before.sessions.iter().enumerate() {
                let Some(new) = after.sessions.get(k) else {
                    return Err(format!("{current}: session {k} lost"));
                };
                let prefix = old.messages.len() <= new.messages.len()
                    && old.messages.iter().zip(&new.messages).all(|(a, b)| a.same_content(b));
                ensure!(prefix, "{current}: session {k} was not resumed from its checkpoint");
            }
            ensure!(
                human_evaluations(&after.sessions) == human_evaluations(&before.sessions),
                "{current}: evaluations appeared during recovery"
            );
            if v["status"] == "running" {
                resumed += 1;
            }
        }

        let deadline = if round < kills {
            Some(Instant::now() + Duration::from_millis(rng.random_range(20..250)))
        } else {
            None
        };
        let killer = deadline.map(|d| {
            let pid = server.child.id();
            thread::spawn(move || {
                thread::sleep(d.saturating_duration_since(Instant::now()));
                let _ = Command::new("kill").args(["-9", &pid.to_string()]).status();
            })
        });

        loop {
            if current.is_empty() || !store.exists(&current) {
                if current.is_empty() {
                    runs += 1;
                    current = format!("crash-{runs}");
                }
                if create(&base, &current).is_err() {
                    break;
                }
            }
            if !drive(&base, &current, &policy) {
                break;
            }
            check_finished(&store, &current, &golden)?;
            finished += 1;
            current.clear();
            if killer.is_none() {
                break;
            }
        }

        match killer {
            Some(k) => {
                k.join().unwrap();
                server.child.wait().map_err(|e| e.to_string())?;
            }
            None => {
                server.child.kill().ok();
                server.child.wait().ok();
            }
        }
    }
    ensure!(finished >= 1, "no run finished");
    Ok(format!(
        "{kills} kills, {resumed} mid-run recoveries, {finished} of {runs} runs finished legal and replayable"
    ))
}

// ---------------------------------------------------------------------------

fn intelligibility() -> Outcome {
    use Tag::*;
    let limits = Limits {
        retries: 2,
        messages: 3,
        reject_after: 2,
    };
    let b = || SessionBuilder::new("P1", limits).init();
    let exhaust = |s: SessionBuilder, machine: Tag| {
        s.machine(Ratify, "a = 1", "first")
            .human(Refute, "no")
            .machine(machine, "a = 2", "second")
            .human(Refute, "no")
            .machine(machine, "a = 3", "third")
            .human(Refute, "no")
    };
    let cases: Vec<(&str, Session, (bool, bool))> = vec![
        (
            "immediate ratify",
            b().machine(Ratify, "a = 1", "x").human(Ratify, "").finish(),
            (true, false),
        ),
        (
            "refute then ratify a revision",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "use b")
                .machine(Revise, "b = 1", "y")
                .human(Ratify, "")
                .finish(),
            (true, true),
        ),
        (
            "machine defends its proposal",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "why?")
                .machine(Refute, "a = 1", "because")
                .human(Ratify, "")
                .finish(),
            (true, false),
        ),
        (
            "reject past the gate",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "no")
                .machine(Revise, "a = 2", "y")
                .human(Refute, "no")
                .machine(Revise, "a = 3", "z")
                .human(Reject, "give up")
                .finish(),
            (false, true),
        ),
        (
            "reject without any revision",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "no")
                .machine(Refute, "a = 1", "y")
                .human(Refute, "no")
                .machine(Refute, "a = 1", "z")
                .human(Reject, "give up")
                .finish(),
            (false, false),
        ),
        (
            "ratified on the second attempt",
            exhaust(b(), Revise)
                .init()
                .machine(Ratify, "b = 1", "fresh")
                .human(Ratify, "")
                .finish(),
            (true, true),
        ),
        (
            "every attempt exhausted",
            exhaust(exhaust(b(), Refute).init(), Refute).finish(),
            (false, false),
        ),
        (
            "revised on the second attempt",
            exhaust(b(), Refute)
                .init()
                .machine(Ratify, "b = 1", "fresh")
                .human(Refute, "closer")
                .machine(Revise, "b = 2", "fixed")
                .human(Ratify, "")
                .finish(),
            (true, true),
        ),
        (
            "explanation challenged twice",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "explain")
                .machine(Refute, "a = 1", "it reads the file")
                .human(Refute, "explain more")
                .machine(Revise, "a = 2", "now with comments")
                .human(Ratify, "")
                .finish(),
            (true, true),
        ),
        (
            "open, awaiting the human",
            b().machine(Ratify, "a = 1", "x")
                .human(Refute, "no")
                .machine(Revise, "a = 2", "y")
                .build(),
            (false, true),
        ),
        ("open, just initialised", b().build(), (false, false)),
        (
            "single-exchange limits",
            SessionBuilder::new(
                "P2",
                Limits {
                    retries: 1,
                    messages: 1,
                    reject_after: 1,
                },
            )
            .init()
            .machine(Ratify, "c = 1", "x")
            .human(Ratify, "")
            .finish(),
            (true, false),
        ),
    ];
    let mut two_way = 0;
    for (name, session, (human, machine)) in &cases {
        let flags = classify_intelligibility(session).map_err(|v| format!("{name}: illegal: {v:?}"))?;
        ensure!(
            (flags.one_way_human, flags.one_way_machine) == (*human, *machine),
            "{name}: got ({}, {})",
            flags.one_way_human,
            flags.one_way_machine
        );
        ensure!(flags.two_way() == (*human && *machine), "{name}: two-way flag");
        two_way += usize::from(flags.two_way());
    }
    let tally: BTreeMap<bool, usize> = cases.iter().fold(BTreeMap::new(), |mut m, c| {
        *m.entry(c.2 .0).or_default() += 1;
        m
    });
    Ok(format!(
        "{} transcripts, {} one-way human, {two_way} two-way",
        cases.len(),
        tally.get(&true).copied().unwrap_or(0)
    ))
}
