//! Command-line front end: `validate`, `run`, `replay`, `metrics`, `serve`.

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agent::{ConsoleHuman, HumanAgent, HumanPolicy, ScriptedHuman};
use crate::clock::SystemClock;
use crate::dfd::{decode_json, decode_toml, process_ordering, validate_background, Background, VertexId};
use crate::engine::{Event, Mode, Observer, RunConfig, RunState, RunStatus};
use crate::llm::{ChatModel, LlmFixture, ScriptedLlm};
use crate::protocol::Limits;
use crate::service::{serve_on, LlmSpec, Service, ServiceOptions, DEFAULT_ADDR};
use crate::store::{metrics, replay, run_checkpointed, to_json, Store};

pub const DEFAULT_STORE: &str = "structind-store";
const CODE_CONSENT: &str = "--i-understand-this-runs-code";

#[derive(Debug, Parser)]
#[command(
    name = "structind",
    version,
    about = "Build data-analysis programs one ratified process at a time"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a DFD document and print its process ordering.
    Validate { dfd: PathBuf },
    /// Run a DFD to completion.
    Run(RunArgs),
    /// Re-execute a stored run against its recorded answers.
    Replay {
        run_id: String,
        #[arg(long, default_value = DEFAULT_STORE)]
        store: PathBuf,
    },
    /// Print the metrics of a stored run.
    Metrics {
        run_id: String,
        #[arg(long, default_value = DEFAULT_STORE)]
        store: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = DEFAULT_ADDR)]
        addr: SocketAddr,
        #[arg(long, default_value = DEFAULT_STORE)]
        store: PathBuf,
        #[arg(long = "i-understand-this-runs-code")]
        allow_code: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Structured,
    #[value(name = "llm-0")]
    Llm0,
    #[value(name = "llm-k")]
    LlmK,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub dfd: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    pub mode: ModeArg,
    /// Machine-call budget for llm-k.
    #[arg(long)]
    pub budget: Option<u32>,
    #[arg(long = "R", default_value_t = 5)]
    pub retries: u32,
    #[arg(long = "n", default_value_t = 10)]
    pub messages: u32,
    #[arg(long = "m", default_value_t = 6)]
    pub reject_after: u32,
    /// Directory with `llm.json` and optionally `human.json`.
    #[arg(long, conflicts_with_all = ["model", "endpoint", "stream"])]
    pub mock: Option<PathBuf>,
    /// Scripted human policy; without one the terminal asks.
    #[arg(long)]
    pub human: Option<PathBuf>,
    /// Comma-separated process order.
    #[arg(long, value_delimiter = ',')]
    pub ordering: Option<Vec<String>>,
    #[arg(long, default_value = DEFAULT_STORE)]
    pub store: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub stream: bool,
    /// Keep the context under this many estimated tokens.
    #[arg(long)]
    pub context_budget: Option<usize>,
    #[arg(long)]
    pub clean_context: bool,
    #[arg(long)]
    pub no_cache: bool,
    #[arg(long = "i-understand-this-runs-code")]
    pub allow_code: bool,
}

impl RunArgs {
    pub fn config(&self) -> Result<RunConfig, String> {
        let mode = match (self.mode, self.budget) {
            (ModeArg::LlmK, Some(budget)) => Mode::LlmK { budget },
            (ModeArg::LlmK, None) => return Err("--mode llm-k needs --budget".into()),
            (_, Some(_)) => return Err("--budget only applies to --mode llm-k".into()),
            (ModeArg::Structured, None) => Mode::Structured,
            (ModeArg::Llm0, None) => Mode::Llm0,
        };
        let config = RunConfig {
            limits: Limits {
                retries: self.retries,
                messages: self.messages,
                reject_after: self.reject_after,
            },
            mode,
            context_budget: self.context_budget,
            clean_context: self.clean_context,
            caching: !self.no_cache,
            ordering: self
                .ordering
                .as_ref()
                .map(|o| o.iter().map(|p| VertexId::from(p.trim())).collect()),
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

/// Read a DFD document, JSON or TOML by extension, without validating it.
pub fn read_dfd(path: &Path) -> Result<Background, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let toml = path.extension().is_some_and(|e| e == "toml");
    let parsed = if toml { decode_toml(&text) } else { decode_json(&text) };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

/// Read and validate a DFD document.
pub fn load_dfd(path: &Path) -> Result<Background, String> {
    let background = read_dfd(path)?;
    let report = validate_background(&background);
    match report.findings.first() {
        None => Ok(background),
        Some(f) => Err(format!("{}: {f}", path.display())),
    }
}

pub fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "structind=info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn execute(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate { dfd } => validate(&dfd),
        Command::Run(args) => run(&args),
        Command::Replay { run_id, store } => {
            let store = Store::open(&store).map_err(|e| e.to_string())?;
            let record = store.load(&run_id).map_err(|e| e.to_string())?;
            let report = replay(&record).map_err(|e| e.to_string())?;
            print!("{}", String::from_utf8_lossy(&to_json(&report)));
            Ok(if report.is_faithful() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Metrics { run_id, store } => {
            let store = Store::open(&store).map_err(|e| e.to_string())?;
            let record = store.load(&run_id).map_err(|e| e.to_string())?;
            print!("{}", String::from_utf8_lossy(&to_json(&metrics(&record))));
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            addr,
            store,
            allow_code,
        } => {
            let store = Store::open(&store).map_err(|e| e.to_string())?;
            let options = ServiceOptions {
                allow_code,
                ..ServiceOptions::default()
            };
            let service = Service::new(store, options);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(async {
                let resumed = service.recover().map_err(|e| e.to_string())?;
                if !resumed.is_empty() {
                    tracing::info!("resumed {} run(s)", resumed.len());
                }
                let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| e.to_string())?;
                let bound = listener.local_addr().map_err(|e| e.to_string())?;
                println!("listening on http://{bound}");
                let _ = io::stdout().flush();
                serve_on(service, listener).await.map_err(|e| e.to_string())
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn validate(path: &Path) -> Result<ExitCode, String> {
    let background = read_dfd(path)?;
    let report = validate_background(&background);
    if !report.is_valid() {
        for f in &report.findings {
            println!("invalid: {f}");
        }
        return Ok(ExitCode::FAILURE);
    }
    let ordering = process_ordering(&background.dfd).map_err(|e| e.to_string())?;
    let names: Vec<&str> = ordering.iter().map(|p| p.as_str()).collect();
    println!("ok: {} processes; ordering {}", ordering.len(), names.join(", "));
    Ok(ExitCode::SUCCESS)
}

struct Progress;

impl Observer for Progress {
    fn observe(&mut self, _state: &RunState, event: &Event<'_>) -> Result<(), String> {
        match event {
            Event::ProcessFinished {
                process,
                ratified,
                cache_hit,
            } => {
                let how = match (ratified, cache_hit) {
                    (true, true) => "ratified (cached)",
                    (true, false) => "ratified",
                    (false, _) => "not ratified",
                };
                eprintln!("{process}: {how}");
            }
            Event::Warning(w) => eprintln!("warning: {w}"),
            _ => {}
        }
        Ok(())
    }
}

fn run(args: &RunArgs) -> Result<ExitCode, String> {
    let config = args.config()?;
    let background = load_dfd(&args.dfd)?;

    let mut llm: Box<dyn ChatModel> = match &args.mock {
        Some(dir) => {
            let path = dir.join("llm.json");
            let fixture = if path.exists() {
                LlmFixture::load(&path).map_err(|e| e.to_string())?
            } else {
                LlmFixture::default()
            };
            Box::new(ScriptedLlm::new(fixture))
        }
        None => {
            let spec = LlmSpec::Openai {
                endpoint: args.endpoint.clone(),
                model: args.model.clone(),
                temperature: Some(args.temperature),
                stream: args.stream,
            };
            let echo: crate::service::DeltaSink = Arc::new(|d: &str| {
                let mut err = io::stderr();
                let _ = err.write_all(d.as_bytes());
                let _ = err.flush();
            });
            spec.build(args.stream.then_some(echo)).map_err(|e| e.to_string())?
        }
    };

    let policy_path = args
        .human
        .clone()
        .or_else(|| args.mock.as_ref().map(|d| d.join("human.json")).filter(|p| p.exists()));
    let mut human: Box<dyn HumanAgent> = match policy_path {
        Some(path) => {
            let policy = HumanPolicy::load(&path).map_err(|e| e.to_string())?;
            if policy.runs_code() && !args.allow_code {
                return Err(format!(
                    "{}: this policy runs generated code; pass {CODE_CONSENT}",
                    path.display()
                ));
            }
            Box::new(ScriptedHuman::new(policy))
        }
        None => Box::new(ConsoleHuman::new(BufReader::new(io::stdin()), io::stdout())),
    };

    let store = Store::open(&args.store).map_err(|e| e.to_string())?;
    let run_id = args.run_id.clone().unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let mut progress = Progress;
    let state = run_checkpointed(
        &store,
        &run_id,
        &background,
        &config,
        &mut *llm,
        &mut *human,
        Some(&mut progress),
        Arc::new(SystemClock),
    )
    .map_err(|e| e.to_string())?;

    let manifest = store.read_manifest(&run_id).map_err(|e| e.to_string())?;
    println!("run {run_id}: {}", status_word(&state.status));
    println!(
        "interactions {}, machine calls {}",
        state.interactions(),
        state.machine_calls()
    );
    match manifest.assembled.as_deref() {
        Some(hash) if hash != "empty" => {
            println!("{}", store.run_dir(&run_id).join("programs").join(hash).display());
            Ok(ExitCode::SUCCESS)
        }
        _ => Ok(ExitCode::FAILURE),
    }
}

fn status_word(status: &RunStatus) -> String {
    match status {
        RunStatus::Running => "running".into(),
        RunStatus::Done => "done".into(),
        RunStatus::Failed => "failed".into(),
        RunStatus::Aborted(reason) => format!("aborted ({reason})"),
    }
}
