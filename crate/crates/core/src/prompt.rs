//! Prompt templates shipped as editable assets, and a single-pass renderer
//! for their `{name}` placeholders.

use std::collections::HashMap;

pub const COT_TEMPLATE: &str = include_str!("../assets/cot_prompt.txt");
pub const COT_ONE_SHOT: &str = include_str!("../assets/cot_one_shot.txt");
pub const SYNONYM_TEMPLATE: &str = include_str!("../assets/synonym_prompt.txt");
pub const INFER_TEMPLATE: &str = include_str!("../assets/infer_prompt.txt");

/// Replaces each `{name}` in `template` whose name is in `vars`. Inserted
/// values are not scanned again, so they may contain braces freely.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let vars: HashMap<&str, &str> = vars.iter().copied().collect();
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').map(|close| (&after[..close], close)) {
            Some((name, close)) if vars.contains_key(name) => {
                out.push_str(vars[name]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Inference prompt from a schema text and a question.
pub fn infer_prompt(schema_text: &str, question: &str) -> String {
    render_template(INFER_TEMPLATE, &[("schema", schema_text.trim_end()), ("question", question)])
}
