//! Pulling the SQL query out of free-form model output.
//!
//! Preference order: the last fenced code block, then the last line with a
//! `SQL:` prefix, then the last line starting with `SELECT`. A block that
//! starts with `SELECT` on an unfenced line runs until the next blank line.

fn starts_with_ci(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len() && s.is_char_boundary(prefix.len()) && s[..prefix.len()].eq_ignore_ascii_case(prefix)
}

fn last_fenced(text: &str) -> Option<String> {
    let mut last = None;
    let mut open: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            match open.take() {
                Some(body) => last = Some(body.join("\n")),
                None => open = Some(Vec::new()),
            }
        } else if let Some(body) = open.as_mut() {
            body.push(line);
        }
    }
    last.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

fn last_prefixed(text: &str) -> Option<String> {
    text.lines()
        .rev()
        .map(str::trim)
        .find(|l| starts_with_ci(l, "SQL:"))
        .map(|l| l[4..].trim().to_string())
        .filter(|s| !s.is_empty())
}

fn last_select(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().rposition(|l| starts_with_ci(l.trim_start(), "SELECT"))?;
    let block: Vec<&str> = lines[start..]
        .iter()
        .take_while(|l| !l.trim().is_empty())
        .map(|l| l.trim())
        .collect();
    Some(block.join(" "))
}

pub fn extract_sql(response: &str) -> Option<String> {
    last_fenced(response)
        .or_else(|| last_prefixed(response))
        .or_else(|| last_select(response))
}

/// Reasoning text preceding the extracted SQL: everything before the last
/// fence, `SQL:` line or `SELECT` line, trimmed.
pub fn reasoning_before_sql(response: &str) -> String {
    let lines: Vec<&str> = response.lines().collect();
    let fence = lines.iter().rposition(|l| l.trim().starts_with("```")).and_then(|close| {
        lines[..close].iter().rposition(|l| l.trim().starts_with("```"))
    });
    let cut = fence
        .or_else(|| lines.iter().rposition(|l| starts_with_ci(l.trim(), "SQL:")))
        .or_else(|| lines.iter().rposition(|l| starts_with_ci(l.trim_start(), "SELECT")))
        .unwrap_or(lines.len());
    lines[..cut].join("\n").trim().to_string()
}
