//! Splitting a completion into program and explanation.
//!
//! A fence opens on a line whose trimmed form starts with three backticks
//! (an info string may follow) and closes on a line that is only backticks.
//! Every closed block contributes to the program, joined by a blank line;
//! everything else is explanation. A fence that never closes is prose, as is
//! everything after it.

use crate::protocol::{ProgramText, Tag};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedCompletion {
    pub program: ProgramText,
    pub explanation: String,
}

fn opens(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn closes(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.bytes().all(|b| b == b'`')
}

/// Total: never fails, whatever the text.
pub fn parse_completion(text: &str) -> ParsedCompletion {
    let lines: Vec<&str> = text.lines().collect();
    let mut blocks: Vec<String> = Vec::new();
    let mut prose: Vec<&str> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if opens(lines[i]) {
            if let Some(end) = (i + 1..lines.len()).find(|&j| closes(lines[j])) {
                let body = lines[i + 1..end].join("\n");
                if !body.trim().is_empty() {
                    blocks.push(body);
                }
                i = end + 1;
                continue;
            }
            prose.extend_from_slice(&lines[i..]);
            break;
        }
        prose.push(lines[i]);
        i += 1;
    }
    ParsedCompletion {
        program: ProgramText::new(blocks.join("\n\n")),
        explanation: prose.join("\n").trim().to_string(),
    }
}

/// REVISE when program or explanation changed since `previous` (or there is
/// no previous reply), REFUTE otherwise. Compared after trimming.
pub fn derive_tag(previous: Option<(&ProgramText, &str)>, program: &ProgramText, explanation: &str) -> Tag {
    match previous {
        Some((p, e)) if p.normalized() == program.normalized() && e.trim() == explanation.trim() => Tag::Refute,
        _ => Tag::Revise,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_block_and_prose() {
        let text = "Here is the loader.\n```python\nimport os\nimport pandas as pd\n```\nIt reads the CSV.";
        let p = parse_completion(text);
        assert_eq!(p.program, ProgramText::new("import os\nimport pandas as pd"));
        assert_eq!(p.explanation, "Here is the loader.\nIt reads the CSV.");
    }

    #[test]
    fn no_fences_is_empty_program() {
        let p = parse_completion("I need more detail about the columns.");
        assert!(p.program.is_empty());
        assert_eq!(p.explanation, "I need more detail about the columns.");
    }

    #[test]
    fn blocks_join_with_blank_line() {
        let p = parse_completion("```\nimport os\n```\nthen\n```py\nprint(os.getcwd())\n```");
        assert_eq!(p.program.as_str(), Some("import os\n\nprint(os.getcwd())"));
        assert_eq!(p.explanation, "then");
    }

    #[test]
    fn unbalanced_fence_is_prose() {
        let p = parse_completion("```a\nx\n```\nok\n```python\nunfinished");
        assert_eq!(p.program.as_str(), Some("x"));
        assert_eq!(p.explanation, "ok\n```python\nunfinished");
    }

    #[test]
    fn tag_derivation() {
        let a = ProgramText::new("x = 1");
        assert_eq!(derive_tag(None, &a, "e"), Tag::Revise);
        assert_eq!(
            derive_tag(Some((&a, "e ")), &ProgramText::new("x = 1\n"), "e"),
            Tag::Refute
        );
        assert_eq!(derive_tag(Some((&a, "e")), &a, "f"), Tag::Revise);
        assert_eq!(derive_tag(Some((&a, "e")), &ProgramText::Empty, "e"), Tag::Revise);
    }
}
