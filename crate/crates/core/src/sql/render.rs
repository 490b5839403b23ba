//! Canonical single-line rendering.

use std::fmt::Write;

use super::ast::*;
use super::lexer::{is_ident_char, is_ident_start, Keyword};

pub fn render(query: &Query) -> String {
    let mut out = String::new();
    write_query(&mut out, query);
    out
}

pub fn render_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, expr, 0);
    out
}

pub(crate) fn ident(name: &str) -> String {
    let mut chars = name.chars();
    let plain = chars.next().is_some_and(is_ident_start)
        && chars.all(is_ident_char)
        && Keyword::from_word(name).is_none();
    if plain {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

pub(crate) fn string_literal(value: &str) -> String {
    format!("'{}'", value.replace('\'', "''"))
}

fn write_query(out: &mut String, q: &Query) {
    out.push_str("SELECT ");
    if q.distinct {
        out.push_str("DISTINCT ");
    }
    for (i, item) in q.select.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            SelectItem::Wildcard => out.push('*'),
            SelectItem::QualifiedWildcard(t) => {
                let _ = write!(out, "{}.*", ident(t));
            }
            SelectItem::Expr { expr, alias } => {
                write_expr(out, expr, 0);
                if let Some(a) = alias {
                    let _ = write!(out, " AS {}", ident(a));
                }
            }
        }
    }
    if !q.from.is_empty() {
        out.push_str(" FROM ");
        for (i, t) in q.from.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_table(out, t);
        }
    }
    for join in &q.joins {
        let _ = write!(out, " {} ", join.kind.keyword());
        write_table(out, &join.table);
        out.push_str(" ON ");
        write_expr(out, &join.on, 0);
    }
    if let Some(w) = &q.where_clause {
        out.push_str(" WHERE ");
        write_expr(out, w, 0);
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        write_list(out, &q.group_by);
    }
    if let Some(h) = &q.having {
        out.push_str(" HAVING ");
        write_expr(out, h, 0);
    }
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, item) in q.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_expr(out, &item.expr, 0);
            match item.direction {
                Some(SortDirection::Asc) => out.push_str(" ASC"),
                Some(SortDirection::Desc) => out.push_str(" DESC"),
                None => {}
            }
        }
    }
    if let Some(n) = q.limit {
        let _ = write!(out, " LIMIT {n}");
    }
}

fn write_table(out: &mut String, t: &TableRef) {
    match t {
        TableRef::Table { name, alias } => {
            out.push_str(&ident(name));
            if let Some(a) = alias {
                let _ = write!(out, " AS {}", ident(a));
            }
        }
        TableRef::Derived { query, alias } => {
            out.push('(');
            write_query(out, query);
            out.push(')');
            if let Some(a) = alias {
                let _ = write!(out, " AS {}", ident(a));
            }
        }
    }
}

fn write_list(out: &mut String, exprs: &[Expr]) {
    for (i, e) in exprs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e, 0);
    }
}

pub(crate) const PREC_OR: u8 = 1;
pub(crate) const PREC_AND: u8 = 2;
pub(crate) const PREC_NOT: u8 = 3;
pub(crate) const PREC_CMP: u8 = 4;
pub(crate) const PREC_ADD: u8 = 5;
pub(crate) const PREC_MUL: u8 = 6;
pub(crate) const PREC_NEG: u8 = 7;
pub(crate) const PREC_ATOM: u8 = 8;

pub(crate) fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Binary { op, .. } => match op {
            BinaryOp::Or => PREC_OR,
            BinaryOp::And => PREC_AND,
            BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
            BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
            _ => PREC_CMP,
        },
        Expr::Unary { op: UnaryOp::Not, .. } => PREC_NOT,
        Expr::Unary { op: UnaryOp::Neg, .. } => PREC_NEG,
        Expr::InList { .. }
        | Expr::InSubquery { .. }
        | Expr::Between { .. }
        | Expr::Like { .. }
        | Expr::IsNull { .. } => PREC_CMP,
        _ => PREC_ATOM,
    }
}

/// Writes `expr`, wrapping it in parentheses when its precedence is below
/// `min_prec`.
fn write_expr(out: &mut String, expr: &Expr, min_prec: u8) {
    let prec = precedence(expr);
    let wrap = prec < min_prec;
    if wrap {
        out.push('(');
    }
    match expr {
        Expr::Column(c) => {
            if let Some(q) = &c.qualifier {
                let _ = write!(out, "{}.", ident(q));
            }
            out.push_str(&ident(&c.name));
        }
        Expr::Literal(lit) => match lit {
            Literal::Number(n) => out.push_str(n),
            Literal::String(s) => out.push_str(&string_literal(s)),
            Literal::Null => out.push_str("NULL"),
        },
        Expr::Function {
            name,
            distinct,
            args,
        } => {
            out.push_str(name);
            out.push('(');
            if *distinct {
                out.push_str("DISTINCT ");
            }
            match args {
                FunctionArgs::Star => out.push('*'),
                FunctionArgs::List(list) => write_list(out, list),
            }
            out.push(')');
        }
        Expr::Unary { op, expr: inner } => match op {
            UnaryOp::Not => {
                out.push_str("NOT ");
                write_expr(out, inner, PREC_NOT);
            }
            UnaryOp::Neg => {
                out.push('-');
                write_expr(out, inner, PREC_ATOM);
            }
        },
        Expr::Binary { op, left, right } => {
            let (lmin, rmin) = if op.is_comparison() {
                (prec + 1, prec + 1)
            } else {
                (prec, prec + 1)
            };
            write_expr(out, left, lmin);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, right, rmin);
        }
        Expr::InList {
            expr: inner,
            list,
            negated,
        } => {
            write_expr(out, inner, PREC_ADD);
            out.push_str(if *negated { " NOT IN (" } else { " IN (" });
            for (i, e) in list.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, e, PREC_ADD);
            }
            out.push(')');
        }
        Expr::InSubquery {
            expr: inner,
            query,
            negated,
        } => {
            write_expr(out, inner, PREC_ADD);
            out.push_str(if *negated { " NOT IN (" } else { " IN (" });
            write_query(out, query);
            out.push(')');
        }
        Expr::Between {
            expr: inner,
            low,
            high,
            negated,
        } => {
            write_expr(out, inner, PREC_ADD);
            out.push_str(if *negated { " NOT BETWEEN " } else { " BETWEEN " });
            write_expr(out, low, PREC_ADD);
            out.push_str(" AND ");
            write_expr(out, high, PREC_ADD);
        }
        Expr::Like {
            expr: inner,
            pattern,
            negated,
        } => {
            write_expr(out, inner, PREC_ADD);
            out.push_str(if *negated { " NOT LIKE " } else { " LIKE " });
            write_expr(out, pattern, PREC_ADD);
        }
        Expr::IsNull {
            expr: inner,
            negated,
        } => {
            write_expr(out, inner, PREC_ADD);
            out.push_str(if *negated { " IS NOT NULL" } else { " IS NULL" });
        }
        Expr::Subquery(query) => {
            out.push('(');
            write_query(out, query);
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}
