//! How a run's model and human are built, kept with the run so a restarted
//! service can rebuild them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{EvalSlot, HumanAgent, HumanPolicy, RemoteHuman, ScriptedHuman};
use crate::llm::{ChatModel, LlmConfig, LlmError, LlmFixture, OpenAiClient, ScriptedLlm, ENV_ENDPOINT, ENV_MODEL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmSpec {
    /// Fixture-driven model; no network.
    Mock {
        #[serde(default)]
        fixture: LlmFixture,
    },
    /// OpenAI-compatible endpoint. The key is read from the environment
    /// and never stored.
    Openai {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        #[serde(default)]
        stream: bool,
    },
}

impl Default for LlmSpec {
    fn default() -> Self {
        LlmSpec::Mock {
            fixture: LlmFixture::default(),
        }
    }
}

pub type DeltaSink = Arc<dyn Fn(&str) + Send + Sync>;

impl LlmSpec {
    pub fn build(&self, on_delta: Option<DeltaSink>) -> Result<Box<dyn ChatModel>, LlmError> {
        match self {
            LlmSpec::Mock { fixture } => Ok(Box::new(ScriptedLlm::new(fixture.clone()))),
            LlmSpec::Openai {
                endpoint,
                model,
                temperature,
                stream,
            } => {
                let mut config = LlmConfig::default();
                let env = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
                if let Some(e) = endpoint.clone().or_else(|| env(ENV_ENDPOINT)) {
                    config.endpoint = e;
                }
                if let Some(m) = model.clone().or_else(|| env(ENV_MODEL)) {
                    config.model = m;
                }
                if let Some(t) = temperature {
                    config.temperature = *t;
                }
                config.stream = *stream;
                let key = env(crate::llm::ENV_API_KEY)
                    .ok_or_else(|| LlmError::Config(format!("{} is not set", crate::llm::ENV_API_KEY)))?;
                let mut client = OpenAiClient::new(config, Some(key))?;
                if let Some(sink) = on_delta {
                    client = client.on_delta(move |d| sink(d));
                }
                Ok(Box::new(client))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HumanSpec {
    /// Evaluations arrive over HTTP.
    #[default]
    Remote,
    Scripted {
        policy: HumanPolicy,
    },
}

impl HumanSpec {
    pub fn runs_code(&self) -> bool {
        matches!(self, HumanSpec::Scripted { policy } if policy.runs_code())
    }

    pub fn build(&self, slot: &Arc<EvalSlot>, run_id: &str) -> Box<dyn HumanAgent> {
        match self {
            HumanSpec::Remote => Box::new(RemoteHuman::new(slot.clone(), run_id)),
            HumanSpec::Scripted { policy } => Box::new(ScriptedHuman::new(policy.clone())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(default)]
    pub llm: LlmSpec,
    #[serde(default)]
    pub human: HumanSpec,
}

pub const AGENTS_FILE: &str = "agents.json";
