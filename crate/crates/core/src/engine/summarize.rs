use crate::context::{Context, ItemId, TokenEstimator};
use crate::llm::{summary_request, ChatModel, ChatRequest, LlmError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summarized {
    pub context: Context,
    /// Items folded into the summary; empty when nothing changed.
    pub replaced: Vec<ItemId>,
    pub summary: Option<ItemId>,
    /// Set when the context could not be brought under budget.
    pub warning: Option<String>,
}

impl Summarized {
    fn unchanged(context: &Context, warning: Option<String>) -> Self {
        Self {
            context: context.clone(),
            replaced: Vec::new(),
            summary: None,
            warning,
        }
    }
}

/// Fold the oldest unpinned items into one model-written summary until the
/// estimate fits `budget`. The prefix starts as the shortest one whose
/// removal alone would fit and grows while the summary does not.
///
/// Every summarization request and its result is passed to `log`.
pub fn summarize_context(
    llm: &mut dyn ChatModel,
    context: &Context,
    budget: usize,
    estimator: &dyn TokenEstimator,
    log: &mut dyn FnMut(&ChatRequest, Result<&str, &LlmError>),
) -> Summarized {
    let total = context.tokens(estimator);
    if total <= budget {
        return Summarized::unchanged(context, None);
    }
    let candidates: Vec<_> = context.items().iter().filter(|i| !i.pinned).collect();
    if candidates.is_empty() {
        return Summarized::unchanged(
            context,
            Some(format!(
                "context over budget ({total} > {budget}) and every item is pinned"
            )),
        );
    }
    let mut k = 0;
    let mut removed = 0;
    while k < candidates.len() && total - removed > budget {
        removed += estimator.estimate(&candidates[k].text);
        k += 1;
    }
    let mut k = k.max(1);
    loop {
        let prefix = &candidates[..k];
        let transcript = prefix
            .iter()
            .map(|i| format!("[{}] {}", i.role, i.text))
            .collect::<Vec<_>>()
            .join("\n\n");
        let request = summary_request(&transcript);
        let text = match llm.complete(&request) {
            Ok(t) => {
                log(&request, Ok(&t));
                t
            }
            Err(e) => {
                log(&request, Err(&e));
                return Summarized::unchanged(context, Some(format!("summarization failed: {e}")));
            }
        };
        let ids: Vec<ItemId> = prefix.iter().map(|i| i.id).collect();
        let mut next = context.clone();
        let summary = next.replace_with_summary(&ids, text.trim());
        let fits = next.tokens(estimator) <= budget;
        if fits || k == candidates.len() {
            let warning = (!fits).then(|| {
                format!(
                    "context still over budget ({} > {budget}) after summarizing every unpinned item",
                    next.tokens(estimator)
                )
            });
            return Summarized {
                context: next,
                replaced: ids,
                summary,
                warning,
            };
        }
        k += 1;
    }
}
