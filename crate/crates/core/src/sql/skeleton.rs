//! SQL skeletons: the keyword structure of a query with every identifier and
//! literal replaced by `_`.
//!
//! Masking rules:
//! - select, group and order expressions become `_`, except aggregate calls
//!   which keep their function name, as in `count(_)`;
//! - every predicate atom in WHERE, HAVING and ON becomes one `_`; the
//!   connectives `and`, `or`, `not` stay, with parentheses where grouping
//!   requires them;
//! - an atom holding a subquery keeps its operator and the nested skeleton,
//!   as in `_ in (select _ from _)`;
//! - table and column aliases are dropped.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::render::{precedence, PREC_AND, PREC_NOT, PREC_OR};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SqlSkeleton(pub String);

impl SqlSkeleton {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for SqlSkeleton {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn skeleton(query: &Query) -> SqlSkeleton {
    SqlSkeleton(query_skeleton(query))
}

fn query_skeleton(q: &Query) -> String {
    let mut parts: Vec<String> = vec!["select".into()];
    if q.distinct {
        parts.push("distinct".into());
    }
    let items: Vec<String> = q
        .select
        .iter()
        .map(|item| match item {
            SelectItem::Expr { expr, .. } => value_mask(expr),
            _ => "_".to_string(),
        })
        .collect();
    parts.push(items.join(", "));

    if !q.from.is_empty() {
        parts.push("from".into());
        let tables: Vec<String> = q.from.iter().map(table_mask).collect();
        parts.push(tables.join(", "));
    }
    for join in &q.joins {
        parts.push(join.kind.keyword().to_lowercase());
        parts.push(table_mask(&join.table));
        parts.push("on".into());
        parts.push(predicate_mask(&join.on));
    }
    if let Some(w) = &q.where_clause {
        parts.push("where".into());
        parts.push(predicate_mask(w));
    }
    if !q.group_by.is_empty() {
        parts.push("group by".into());
        let g: Vec<String> = q.group_by.iter().map(value_mask).collect();
        parts.push(g.join(", "));
    }
    if let Some(h) = &q.having {
        parts.push("having".into());
        parts.push(predicate_mask(h));
    }
    if !q.order_by.is_empty() {
        parts.push("order by".into());
        let o: Vec<String> = q
            .order_by
            .iter()
            .map(|item| {
                let mut s = value_mask(&item.expr);
                match item.direction {
                    Some(SortDirection::Asc) => s.push_str(" asc"),
                    Some(SortDirection::Desc) => s.push_str(" desc"),
                    None => {}
                }
                s
            })
            .collect();
        parts.push(o.join(", "));
    }
    if q.limit.is_some() {
        parts.push("limit _".into());
    }
    parts.join(" ")
}

fn table_mask(t: &TableRef) -> String {
    match t {
        TableRef::Table { .. } => "_".to_string(),
        TableRef::Derived { query, .. } => format!("({})", query_skeleton(query)),
    }
}

/// Mask for a value expression.
fn value_mask(expr: &Expr) -> String {
    match expr {
        Expr::Function { name, distinct, .. } if expr.is_aggregate() => {
            if *distinct {
                format!("{name}(distinct _)")
            } else {
                format!("{name}(_)")
            }
        }
        Expr::Subquery(q) => format!("({})", query_skeleton(q)),
        _ => "_".to_string(),
    }
}

/// Mask for a boolean expression: connectives survive, atoms collapse.
fn predicate_mask(expr: &Expr) -> String {
    match expr {
        Expr::Binary {
            op: op @ (BinaryOp::And | BinaryOp::Or),
            left,
            right,
        } => {
            let prec = if *op == BinaryOp::And { PREC_AND } else { PREC_OR };
            format!(
                "{} {} {}",
                wrap(left, prec),
                op.symbol().to_lowercase(),
                wrap(right, prec + 1)
            )
        }
        Expr::Unary {
            op: UnaryOp::Not,
            expr: inner,
        } => format!("not {}", wrap(inner, PREC_NOT)),
        Expr::InSubquery { query, negated, .. } => format!(
            "_ {}in ({})",
            if *negated { "not " } else { "" },
            query_skeleton(query)
        ),
        Expr::Binary { op, left, right } if op.is_comparison() => {
            match (left.as_ref(), right.as_ref()) {
                (_, Expr::Subquery(q)) => format!("_ {} ({})", op.symbol(), query_skeleton(q)),
                (Expr::Subquery(q), _) => format!("({}) {} _", query_skeleton(q), op.symbol()),
                _ => "_".to_string(),
            }
        }
        _ => "_".to_string(),
    }
}

fn wrap(expr: &Expr, min_prec: u8) -> String {
    let inner = predicate_mask(expr);
    let is_connective = matches!(
        expr,
        Expr::Binary {
            op: BinaryOp::And | BinaryOp::Or,
            ..
        } | Expr::Unary {
            op: UnaryOp::Not,
            ..
        }
    );
    if is_connective && precedence(expr) < min_prec {
        format!("({inner})")
    } else {
        inner
    }
}
