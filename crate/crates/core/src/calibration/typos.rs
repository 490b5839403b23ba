//! Token-level repair of common LLM slips, applied before parsing.

use crate::schema::SchemaCatalog;
use crate::sql::lexer::{tokenize_lenient, Keyword, Token, TokenKind};
use crate::sql::parse_sql;

use super::{Fix, FixKind};

#[derive(Debug, Clone, PartialEq)]
pub struct TypoOutcome {
    pub sql: String,
    pub fixes: Vec<Fix>,
    /// Set when the text still does not parse after every repair.
    pub unparseable: bool,
}

struct Edit {
    start: usize,
    end: usize,
    text: String,
}

/// Table reference seen while scanning: schema name and the name columns
/// use to address it.
#[derive(Clone)]
struct SeenTable {
    name: String,
    binding: String,
}

pub fn fix_typos(raw: &str, schema: &SchemaCatalog) -> TypoOutcome {
    let tokens = tokenize_lenient(raw);
    let mut edits = Vec::new();
    let mut fixes = Vec::new();

    for t in &tokens {
        if t.kind == TokenKind::EqEq {
            edits.push(Edit {
                start: t.start,
                end: t.end,
                text: "=".into(),
            });
            fixes.push(Fix::new(FixKind::Typo, "`==` replaced with `=`"));
        }
    }

    if let Some(edit) = close_unterminated_string(raw, &tokens) {
        fixes.push(Fix::new(FixKind::Typo, "unterminated string literal closed"));
        edits.push(edit);
    }

    let trailing: Vec<&Token> = tokens
        .iter()
        .rev()
        .skip_while(|t| t.kind == TokenKind::Eof)
        .take_while(|t| t.kind == TokenKind::Semicolon)
        .collect();
    if !trailing.is_empty() {
        for t in &trailing {
            edits.push(Edit {
                start: t.start,
                end: t.end,
                text: String::new(),
            });
        }
        fixes.push(Fix::new(FixKind::Typo, "trailing `;` removed"));
    }

    join_conditions(&tokens, schema, &mut edits, &mut fixes);

    edits.sort_by_key(|e| std::cmp::Reverse(e.start));
    let mut sql = raw.to_string();
    for e in edits {
        sql.replace_range(e.start..e.end, &e.text);
    }
    let sql = if fixes.is_empty() { sql } else { sql.trim().to_string() };
    let unparseable = parse_sql(&sql).is_err();
    TypoOutcome {
        sql,
        fixes,
        unparseable,
    }
}

/// Closes a string that runs to end of input just before the next clause
/// keyword inside it, or else before any trailing `)` at the end.
fn close_unterminated_string(raw: &str, tokens: &[Token]) -> Option<Edit> {
    let t = tokens
        .iter()
        .find(|t| matches!(t.kind, TokenKind::UnterminatedStr(_)))?;
    let quote = &raw[t.start..t.start + 1];
    let body_start = t.start + 1;
    let body = &raw[body_start..];
    let mut at = None;
    let mut offset = 0;
    for word in body.split_inclusive(char::is_whitespace) {
        let bare = word.trim_end();
        if offset > 0 && Keyword::from_word(bare).is_some_and(|k| k.starts_clause()) {
            at = Some(body_start + body[..offset].trim_end().len());
            break;
        }
        offset += word.len();
    }
    let at = at.unwrap_or_else(|| {
        body_start + body.trim_end().trim_end_matches(')').trim_end().len()
    });
    Some(Edit {
        start: at,
        end: at,
        text: quote.to_string(),
    })
}

/// Parses `name [AS] [alias]` starting at `i`; returns the table and the
/// index just past it.
fn table_at(tokens: &[Token], i: usize) -> Option<(SeenTable, usize)> {
    let TokenKind::Ident { value: name, .. } = &tokens.get(i)?.kind else {
        return None;
    };
    let mut j = i + 1;
    if tokens.get(j).is_some_and(|t| t.kind.is_keyword(Keyword::As)) {
        j += 1;
    }
    let binding = match tokens.get(j).map(|t| &t.kind) {
        Some(TokenKind::Ident { value, .. }) => {
            j += 1;
            value.clone()
        }
        _ => {
            j = if j > i + 1 { j - 1 } else { j };
            name.clone()
        }
    };
    Some((
        SeenTable {
            name: name.clone(),
            binding,
        },
        j,
    ))
}

fn condition_ends(kind: &TokenKind) -> bool {
    match kind {
        TokenKind::Eof | TokenKind::RParen => true,
        TokenKind::Keyword(k) => matches!(
            k,
            Keyword::Where
                | Keyword::Group
                | Keyword::Having
                | Keyword::Order
                | Keyword::Limit
                | Keyword::Join
                | Keyword::Inner
                | Keyword::Left
                | Keyword::Right
                | Keyword::Full
        ),
        _ => false,
    }
}

fn join_conditions(
    tokens: &[Token],
    schema: &SchemaCatalog,
    edits: &mut Vec<Edit>,
    fixes: &mut Vec<Fix>,
) {
    // Tables visible at each parenthesis depth.
    let mut levels: Vec<Vec<SeenTable>> = vec![Vec::new()];
    let mut i = 0;
    while i < tokens.len() {
        match &tokens[i].kind {
            TokenKind::LParen => levels.push(Vec::new()),
            TokenKind::RParen => {
                if levels.len() > 1 {
                    levels.pop();
                }
            }
            TokenKind::Keyword(Keyword::Select) => levels.last_mut().expect("non-empty").clear(),
            TokenKind::Keyword(Keyword::From) => {
                let mut j = i + 1;
                while let Some((table, next)) = table_at(tokens, j) {
                    levels.last_mut().expect("non-empty").push(table);
                    j = next;
                    if tokens.get(j).is_some_and(|t| t.kind == TokenKind::Comma) {
                        j += 1;
                    } else {
                        break;
                    }
                }
                i = j;
                continue;
            }
            TokenKind::Keyword(Keyword::Join) => {
                let Some((table, next)) = table_at(tokens, i + 1) else {
                    i += 1;
                    continue;
                };
                let level = levels.last_mut().expect("non-empty");
                let (insert_at, prefix) = match tokens.get(next) {
                    Some(t) if t.kind.is_keyword(Keyword::On) => {
                        if tokens.get(next + 1).is_some_and(|n| condition_ends(&n.kind)) {
                            (Some(t.end), " ")
                        } else {
                            (None, "")
                        }
                    }
                    Some(_) => (Some(tokens[next - 1].end), " ON "),
                    None => (None, ""),
                };
                if let Some(at) = insert_at {
                    if let Some((cond, low_confidence)) = fk_condition(schema, level, &table) {
                        edits.push(Edit {
                            start: at,
                            end: at,
                            text: format!("{prefix}{cond}"),
                        });
                        let mut fix = Fix::new(FixKind::JoinCondition, format!("ON {cond} inserted"));
                        fix.low_confidence = low_confidence;
                        fixes.push(fix);
                    }
                }
                level.push(table);
                i = next;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
}

/// Equality condition from the first foreign key linking `new` with a table
/// already in scope. The flag is set when more than one key qualifies.
fn fk_condition(schema: &SchemaCatalog, earlier: &[SeenTable], new: &SeenTable) -> Option<(String, bool)> {
    let mut matches = Vec::new();
    for fk in &schema.foreign_keys {
        for prior in earlier {
            if fk.links(&prior.name, &new.name) {
                let (prior_col, new_col) = if fk.from.table().eq_ignore_ascii_case(&prior.name) {
                    (fk.from.column(), fk.to.column())
                } else {
                    (fk.to.column(), fk.from.column())
                };
                matches.push(format!(
                    "{}.{} = {}.{}",
                    prior.binding, prior_col, new.binding, new_col
                ));
            }
        }
    }
    let low_confidence = matches.len() > 1;
    matches.into_iter().next().map(|c| (c, low_confidence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::*;

    fn fixed(raw: &str) -> TypoOutcome {
        fix_typos(raw, &stock_schema())
    }

    #[test]
    fn double_equals() {
        let out = fixed("SELECT a FROM t WHERE b == 1");
        assert_eq!(out.sql, "SELECT a FROM t WHERE b = 1");
        assert_eq!(out.fixes.len(), 1);
        assert!(!out.unparseable);
    }

    #[test]
    fn valid_sql_is_untouched() {
        let raw = "SELECT a FROM t WHERE b <> 1  ";
        let out = fixed(raw);
        assert_eq!(out.sql, raw);
        assert!(out.fixes.is_empty());
        assert!(!out.unparseable);
    }

    #[test]
    fn trailing_semicolons() {
        let out = fixed("SELECT a FROM t;;");
        assert_eq!(out.sql, "SELECT a FROM t");
        assert!(!out.unparseable);
    }

    #[test]
    fn unterminated_strings() {
        let out = fixed("SELECT a FROM t WHERE n = 'abc AND b = 1");
        assert_eq!(out.sql, "SELECT a FROM t WHERE n = 'abc' AND b = 1");
        let out = fixed("SELECT a FROM t WHERE n IN (SELECT n FROM u WHERE m = \"x y)");
        assert_eq!(out.sql, "SELECT a FROM t WHERE n IN (SELECT n FROM u WHERE m = \"x y\")");
        assert!(!out.unparseable);
    }

    #[test]
    fn missing_join_condition_from_foreign_key() {
        let out = fixed(
            "SELECT s.chinameabbr FROM lc_sharestru s JOIN lc_exgindustry e WHERE e.firstindustryname = 'bank'",
        );
        assert_eq!(
            out.sql,
            "SELECT s.chinameabbr FROM lc_sharestru s JOIN lc_exgindustry e ON s.companycode = e.companycode WHERE e.firstindustryname = 'bank'"
        );
        assert_eq!(out.fixes[0].kind, FixKind::JoinCondition);
        assert!(!out.fixes[0].low_confidence);

        let out = fixed("SELECT chinameabbr FROM lc_sharestru JOIN lc_exgindustry ON");
        assert_eq!(
            out.sql,
            "SELECT chinameabbr FROM lc_sharestru JOIN lc_exgindustry ON lc_sharestru.companycode = lc_exgindustry.companycode"
        );
    }

    #[test]
    fn ambiguous_foreign_keys_are_low_confidence() {
        let mut schema = stock_schema();
        schema.tables[0].columns.push(col("indcode", ""));
        schema.tables[1].columns.push(col("indcode", ""));
        schema
            .foreign_keys
            .push(fk(("lc_exgindustry", "indcode"), ("lc_sharestru", "indcode")));
        let out = fix_typos("SELECT 1 FROM lc_sharestru AS a JOIN lc_exgindustry AS b", &schema);
        assert!(out.sql.ends_with("ON a.companycode = b.companycode"), "{}", out.sql);
        assert!(out.fixes[0].low_confidence);
    }

    #[test]
    fn hopeless_input_is_flagged() {
        let out = fixed("SELEC a FRM t");
        assert!(out.unparseable);
        assert!(fixed("").unparseable);
    }
}
