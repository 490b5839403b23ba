//! Canonical keyword components of a query.
//!
//! Two candidate queries are compatible exactly when their components are
//! equal. Canonicalization resolves aliases to table names, lowercases
//! identifiers, normalizes literals, flattens `AND` chains into sets and
//! orders the operands of symmetric comparisons. `OR` subtrees are kept in
//! their written order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::error::SqlError;
use super::render::string_literal;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SqlComponents {
    /// Sorted multiset of canonical select expressions.
    pub select_set: Vec<String>,
    pub distinct: bool,
    pub table_set: BTreeSet<String>,
    pub join_set: BTreeSet<String>,
    pub where_atoms: BTreeSet<String>,
    pub group_set: BTreeSet<String>,
    pub having_atoms: BTreeSet<String>,
    pub order_seq: Vec<(String, SortDirection)>,
    pub limit_value: Option<u64>,
    /// `(function, argument)` pairs of every aggregate call at this level.
    pub agg_set: BTreeSet<(String, String)>,
}

pub fn extract(query: &Query) -> Result<SqlComponents, SqlError> {
    let scope = Scope::build(query, None)?;
    components_in(query, &scope)
}

/// Compatibility of two candidates: equality of every component.
pub fn compatible(a: &SqlComponents, b: &SqlComponents) -> bool {
    a == b
}

/// Canonical text of a numeric literal: no leading zeros in the integer part
/// and no trailing zeros in the fraction.
pub fn canonical_number(raw: &str) -> String {
    let (int_part, frac_part) = match raw.split_once('.') {
        Some((i, f)) => (i, f),
        None => (raw, ""),
    };
    let int_trim = int_part.trim_start_matches('0');
    let int_canon = if int_trim.is_empty() { "0" } else { int_trim };
    let frac_trim = frac_part.trim_end_matches('0');
    if frac_trim.is_empty() {
        int_canon.to_string()
    } else {
        format!("{int_canon}.{frac_trim}")
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Base { table: String, key: String },
    Derived { key: String },
}

#[derive(Debug, Clone)]
struct ScopeEntry {
    /// Lowercased alias, if one was written.
    alias: Option<String>,
    binding: Binding,
}

#[derive(Debug)]
struct Scope<'p> {
    entries: Vec<ScopeEntry>,
    derived_texts: Vec<String>,
    parent: Option<&'p Scope<'p>>,
}

impl<'p> Scope<'p> {
    fn build(query: &Query, parent: Option<&'p Scope<'p>>) -> Result<Self, SqlError> {
        let mut entries = Vec::new();
        let mut derived_texts = Vec::new();
        let mut seen: Vec<String> = Vec::new();
        for table in query.table_refs() {
            match table {
                TableRef::Table { name, alias } => {
                    let lower = name.to_lowercase();
                    let occurrence = seen.iter().filter(|s| **s == lower).count();
                    seen.push(lower.clone());
                    let key = if occurrence == 0 {
                        lower.clone()
                    } else {
                        format!("{lower}#{}", occurrence + 1)
                    };
                    entries.push(ScopeEntry {
                        alias: alias.as_ref().map(|a| a.to_lowercase()),
                        binding: Binding::Base { table: lower, key },
                    });
                }
                TableRef::Derived { query: sub, alias } => {
                    // Derived tables cannot see the enclosing FROM list.
                    let inner = extract_with_parent(sub, parent)?;
                    let text = serde_json::to_string(&inner).expect("components serialize");
                    let key = format!("derived{}", derived_texts.len());
                    derived_texts.push(text);
                    entries.push(ScopeEntry {
                        alias: alias.as_ref().map(|a| a.to_lowercase()),
                        binding: Binding::Derived { key },
                    });
                }
            }
        }
        Ok(Self {
            entries,
            derived_texts,
            parent,
        })
    }

    fn lookup(&self, qualifier: &str) -> Option<&ScopeEntry> {
        let q = qualifier.to_lowercase();
        let by_alias = self
            .entries
            .iter()
            .find(|e| e.alias.as_deref() == Some(q.as_str()));
        if by_alias.is_some() {
            return by_alias;
        }
        let by_name = self.entries.iter().find(|e| {
            matches!(&e.binding, Binding::Base { table, .. } if *table == q)
        });
        by_name.or_else(|| self.parent.and_then(|p| p.lookup(qualifier)))
    }

    fn key_of(entry: &ScopeEntry) -> &str {
        match &entry.binding {
            Binding::Base { key, .. } | Binding::Derived { key } => key,
        }
    }

    fn resolve_column(&self, col: &ColumnRef) -> Result<String, SqlError> {
        let name = col.name.to_lowercase();
        match &col.qualifier {
            Some(q) => {
                let entry = self
                    .lookup(q)
                    .ok_or_else(|| SqlError::UnresolvedAlias { alias: q.clone() })?;
                Ok(format!("{}.{name}", Self::key_of(entry)))
            }
            None if self.entries.len() == 1 => {
                Ok(format!("{}.{name}", Self::key_of(&self.entries[0])))
            }
            None => Ok(name),
        }
    }
}

fn extract_with_parent(query: &Query, parent: Option<&Scope<'_>>) -> Result<SqlComponents, SqlError> {
    let scope = Scope::build(query, parent)?;
    components_in(query, &scope)
}

fn components_in(query: &Query, scope: &Scope<'_>) -> Result<SqlComponents, SqlError> {
    let mut select_set = Vec::new();
    for item in &query.select {
        let text = match item {
            SelectItem::Wildcard => "*".to_string(),
            SelectItem::QualifiedWildcard(q) => {
                let entry = scope
                    .lookup(q)
                    .ok_or_else(|| SqlError::UnresolvedAlias { alias: q.clone() })?;
                format!("{}.*", Scope::key_of(entry))
            }
            SelectItem::Expr { expr, .. } => canon(expr, scope)?,
        };
        select_set.push(text);
    }
    select_set.sort();

    let mut table_set = BTreeSet::new();
    for entry in &scope.entries {
        match &entry.binding {
            Binding::Base { table, .. } => {
                table_set.insert(table.clone());
            }
            Binding::Derived { key } => {
                let idx: usize = key["derived".len()..].parse().expect("derived key");
                table_set.insert(format!("({})", scope.derived_texts[idx]));
            }
        }
    }

    let mut join_set = BTreeSet::new();
    for (i, join) in query.joins.iter().enumerate() {
        let prefix = match join.kind {
            JoinKind::Inner => "inner".to_string(),
            other => {
                // Outer joins are not symmetric: remember which side is preserved.
                let entry = &scope.entries[query.from.len() + i];
                format!("{other:?}:{}", Scope::key_of(entry)).to_lowercase()
            }
        };
        for atom in join.on.conjuncts() {
            join_set.insert(format!("{prefix} {}", canon(atom, scope)?));
        }
    }

    let where_atoms = match &query.where_clause {
        Some(w) => atoms(w, scope)?,
        None => BTreeSet::new(),
    };
    let having_atoms = match &query.having {
        Some(h) => atoms(h, scope)?,
        None => BTreeSet::new(),
    };

    let group_set = query
        .group_by
        .iter()
        .map(|e| canon(e, scope))
        .collect::<Result<BTreeSet<_>, _>>()?;

    let order_seq = query
        .order_by
        .iter()
        .map(|o| {
            Ok((
                canon(&o.expr, scope)?,
                o.direction.unwrap_or(SortDirection::Asc),
            ))
        })
        .collect::<Result<Vec<_>, SqlError>>()?;

    let mut agg_set = BTreeSet::new();
    let mut agg_sources: Vec<&Expr> = Vec::new();
    for item in &query.select {
        if let SelectItem::Expr { expr, .. } = item {
            agg_sources.push(expr);
        }
    }
    agg_sources.extend(query.having.iter());
    agg_sources.extend(query.order_by.iter().map(|o| &o.expr));
    for expr in agg_sources {
        collect_aggregates(expr, scope, &mut agg_set)?;
    }

    Ok(SqlComponents {
        select_set,
        distinct: query.distinct,
        table_set,
        join_set,
        where_atoms,
        group_set,
        having_atoms,
        order_seq,
        limit_value: query.limit,
        agg_set,
    })
}

fn atoms(expr: &Expr, scope: &Scope<'_>) -> Result<BTreeSet<String>, SqlError> {
    expr.conjuncts().into_iter().map(|a| canon(a, scope)).collect()
}

fn collect_aggregates(
    expr: &Expr,
    scope: &Scope<'_>,
    out: &mut BTreeSet<(String, String)>,
) -> Result<(), SqlError> {
    if let Expr::Function {
        name,
        distinct,
        args,
    } = expr
    {
        if expr.is_aggregate() {
            let arg = canon_args(*distinct, args, scope)?;
            out.insert((name.clone(), arg));
        }
    }
    for child in expr.children() {
        collect_aggregates(child, scope, out)?;
    }
    Ok(())
}

fn canon_args(distinct: bool, args: &FunctionArgs, scope: &Scope<'_>) -> Result<String, SqlError> {
    let body = match args {
        FunctionArgs::Star => "*".to_string(),
        FunctionArgs::List(list) => list
            .iter()
            .map(|e| canon(e, scope))
            .collect::<Result<Vec<_>, _>>()?
            .join(", "),
    };
    Ok(if distinct {
        format!("distinct {body}")
    } else {
        body
    })
}

fn subquery_text(query: &Query, scope: &Scope<'_>) -> Result<String, SqlError> {
    let inner = extract_with_parent(query, Some(scope))?;
    Ok(format!(
        "{{{}}}",
        serde_json::to_string(&inner).expect("components serialize")
    ))
}

/// Fully parenthesized canonical text of an expression.
fn canon(expr: &Expr, scope: &Scope<'_>) -> Result<String, SqlError> {
    Ok(match expr {
        Expr::Column(c) => scope.resolve_column(c)?,
        Expr::Literal(Literal::Number(n)) => canonical_number(n),
        Expr::Literal(Literal::String(s)) => string_literal(s),
        Expr::Literal(Literal::Null) => "null".to_string(),
        Expr::Function {
            name,
            distinct,
            args,
        } => format!("{name}({})", canon_args(*distinct, args, scope)?),
        Expr::Unary { op, expr } => match op {
            UnaryOp::Not => format!("not({})", canon(expr, scope)?),
            UnaryOp::Neg => format!("-({})", canon(expr, scope)?),
        },
        Expr::Binary { op, left, right } => {
            let mut l = canon(left, scope)?;
            let mut r = canon(right, scope)?;
            if matches!(op, BinaryOp::Eq | BinaryOp::NotEq) && r < l {
                std::mem::swap(&mut l, &mut r);
            }
            format!("({l} {} {r})", op.symbol().to_lowercase())
        }
        Expr::InList {
            expr,
            list,
            negated,
        } => {
            let mut items = list
                .iter()
                .map(|e| canon(e, scope))
                .collect::<Result<Vec<_>, _>>()?;
            items.sort();
            items.dedup();
            format!(
                "({} {}in [{}])",
                canon(expr, scope)?,
                if *negated { "not " } else { "" },
                items.join(", ")
            )
        }
        Expr::InSubquery {
            expr,
            query,
            negated,
        } => format!(
            "({} {}in {})",
            canon(expr, scope)?,
            if *negated { "not " } else { "" },
            subquery_text(query, scope)?
        ),
        Expr::Between {
            expr,
            low,
            high,
            negated,
        } => format!(
            "({} {}between {} and {})",
            canon(expr, scope)?,
            if *negated { "not " } else { "" },
            canon(low, scope)?,
            canon(high, scope)?
        ),
        Expr::Like {
            expr,
            pattern,
            negated,
        } => format!(
            "({} {}like {})",
            canon(expr, scope)?,
            if *negated { "not " } else { "" },
            canon(pattern, scope)?
        ),
        Expr::IsNull { expr, negated } => format!(
            "({} is {}null)",
            canon(expr, scope)?,
            if *negated { "not " } else { "" }
        ),
        Expr::Subquery(query) => subquery_text(query, scope)?,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn comps(sql: &str) -> SqlComponents {
        extract(&parse(sql).unwrap()).unwrap()
    }

    #[test]
    fn and_commutativity() {
        assert_eq!(
            comps("SELECT a FROM t WHERE x=1 AND y=2"),
            comps("SELECT a FROM t WHERE y=2 AND x=1")
        );
    }

    #[test]
    fn join_orientation() {
        let c = comps("SELECT t1.a FROM t1 JOIN t2 ON t2.id = t1.id");
        assert_eq!(c.join_set.len(), 1);
        assert_eq!(c.join_set, comps("SELECT t1.a FROM t1 JOIN t2 ON t1.id = t2.id").join_set);
        assert_eq!(
            c.join_set.iter().next().unwrap(),
            "inner (t1.id = t2.id)"
        );
    }

    #[test]
    fn count_star_with_limit() {
        let c = comps("SELECT count(*) FROM t LIMIT 5");
        assert_eq!(c.select_set, vec!["count(*)".to_string()]);
        assert_eq!(c.table_set, BTreeSet::from(["t".to_string()]));
        assert_eq!(c.limit_value, Some(5));
        assert_eq!(
            c.agg_set,
            BTreeSet::from([("count".to_string(), "*".to_string())])
        );
        assert!(c.where_atoms.is_empty());
        assert!(c.join_set.is_empty());
        assert!(c.order_seq.is_empty());
    }

    #[test]
    fn limit_and_order_are_significant() {
        assert_ne!(
            comps("SELECT a FROM t LIMIT 3"),
            comps("SELECT a FROM t LIMIT 5")
        );
        assert_ne!(
            comps("SELECT a FROM t ORDER BY a, b"),
            comps("SELECT a FROM t ORDER BY b, a")
        );
        assert_eq!(
            comps("SELECT a FROM t ORDER BY a"),
            comps("SELECT a FROM t ORDER BY a ASC")
        );
    }

    #[test]
    fn aliases_resolve_to_tables() {
        assert_eq!(
            comps("SELECT f.name FROM fund AS f WHERE f.size > 10"),
            comps("SELECT name FROM fund WHERE fund.size > 10.0")
        );
    }

    #[test]
    fn select_order_is_irrelevant() {
        assert_eq!(comps("SELECT a, b FROM t"), comps("SELECT b, a FROM t"));
    }

    #[test]
    fn or_operands_are_ordered() {
        assert_ne!(
            comps("SELECT a FROM t WHERE x = 1 OR y = 2"),
            comps("SELECT a FROM t WHERE y = 2 OR x = 1")
        );
    }

    #[test]
    fn literals_are_normalized() {
        assert_eq!(
            comps("SELECT a FROM t WHERE x = 007 AND y = \"v\""),
            comps("SELECT a FROM t WHERE x = 7 AND y = 'v'")
        );
        assert_ne!(
            comps("SELECT a FROM t WHERE x = 1"),
            comps("SELECT a FROM t WHERE x = '1'")
        );
    }

    #[test]
    fn unresolved_alias() {
        let q = parse("SELECT z.a FROM t").unwrap();
        assert_eq!(
            extract(&q),
            Err(SqlError::UnresolvedAlias { alias: "z".into() })
        );
    }

    #[test]
    fn correlated_subquery_sees_outer_alias() {
        let c = comps("SELECT a FROM t AS o WHERE x > (SELECT avg(x) FROM t WHERE t.k = o.k)");
        assert_eq!(c.where_atoms.len(), 1);
    }

    #[test]
    fn derived_alias_name_is_irrelevant() {
        assert_eq!(
            comps("SELECT d.a FROM (SELECT a FROM t) AS d"),
            comps("SELECT e.a FROM (SELECT a FROM t) AS e")
        );
    }

    #[test]
    fn self_join_keeps_both_sides_apart() {
        let c = comps("SELECT a.x FROM t AS a JOIN t AS b ON a.id = b.pid");
        assert!(c.join_set.contains("inner (t#2.pid = t.id)"));
    }

    #[test]
    fn canonical_numbers() {
        assert_eq!(canonical_number("007"), "7");
        assert_eq!(canonical_number("0.50"), "0.5");
        assert_eq!(canonical_number("10.0"), "10");
        assert_eq!(canonical_number("0"), "0");
        assert_eq!(canonical_number("000.000"), "0");
    }
}
