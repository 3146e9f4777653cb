//! Talk to an OpenAI-compatible endpoint. Reads STRUCTIND_API_KEY, and
//! optionally STRUCTIND_ENDPOINT and STRUCTIND_MODEL.

use structind::llm::{ChatMessage, ChatModel, ChatRequest, LlmConfig, OpenAiClient, Purpose, Role, ENV_API_KEY};

fn main() {
    let config = LlmConfig {
        stream: true,
        ..LlmConfig::default()
    };
    let client = match OpenAiClient::from_env(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}; set {ENV_API_KEY} to try this example");
            return;
        }
    };
    let mut client = client.on_delta(|d| eprint!("{d}"));
    println!("model: {:?}", client.info());
    let request = ChatRequest {
        messages: vec![ChatMessage::new(
            Role::User,
            "Write one line of Python that prints the sum of 1..10.",
        )],
        purpose: Purpose::Summary,
    };
    match client.complete(&request) {
        Ok(text) => println!("\n---\n{text}"),
        Err(e) => eprintln!("\n{e}"),
    }
}
