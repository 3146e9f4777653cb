//! Keeping the conversation under a token budget. Pinned items survive;
//! older ones are folded into a single summary.

use structind::context::{CharsPerToken, Context};
use structind::engine::summarize_context;
use structind::llm::ScriptedLlm;

fn main() {
    let mut ctx = Context::new("Predict band gaps from composition.");
    let spec = ctx.push_user("P1: load the csv and report missing values.");
    ctx.set_pinned(spec, true);
    for i in 0..12 {
        ctx.push_assistant(format!("Proposal {i}: {}", "df = pd.read_csv('data.csv'); ".repeat(8)));
        ctx.push_user(format!("Refutation {i}: also drop rows with missing targets."));
    }

    let est = CharsPerToken::default();
    let mut llm = ScriptedLlm::repeating(
        "Earlier proposals loaded the csv; the reviewer asked for missing targets to be dropped.",
    );
    let budget = 300;
    let out = summarize_context(&mut llm, &ctx, budget, &est, &mut |req, _| {
        println!("summary request over {} messages", req.messages.len());
    });
    println!(
        "tokens {} -> {} (budget {budget})",
        ctx.tokens(&est),
        out.context.tokens(&est)
    );
    println!(
        "{} items folded, pinned spec kept: {}",
        out.replaced.len(),
        out.context.items().iter().any(|i| i.id == spec)
    );
    if let Some(w) = out.warning {
        println!("warning: {w}");
    }
}
