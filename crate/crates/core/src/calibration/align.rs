//! Table-column alignment: every qualified reference must name a table that
//! owns the column, and every referenced table must be in FROM or a JOIN.

use std::collections::BTreeMap;

use crate::schema::SchemaCatalog;
use crate::sql::{BinaryOp, ColumnRef, Expr, Join, JoinKind, Query, SelectItem, TableRef};

use super::{Fix, FixKind};

/// A table reference at one query level.
struct Bound {
    binding: String,
    /// Schema table for base references; `None` for derived tables.
    table: Option<String>,
    outputs: Vec<String>,
}

fn bounds_of(query: &Query, schema: &SchemaCatalog) -> Vec<Bound> {
    query
        .table_refs()
        .map(|t| match t {
            TableRef::Table { name, alias } => Bound {
                binding: alias.clone().unwrap_or_else(|| name.clone()),
                table: schema.table(name).map(|t| t.name.clone()),
                outputs: Vec::new(),
            },
            TableRef::Derived { query, alias } => Bound {
                binding: alias.clone().unwrap_or_default(),
                table: None,
                outputs: query.output_names().iter().map(|n| n.to_lowercase()).collect(),
            },
        })
        .collect()
}

fn owns(schema: &SchemaCatalog, table: &str, column: &str) -> bool {
    schema.table(table).is_some_and(|t| t.has_column(column))
}

fn find_bound<'a>(bounds: &'a [Bound], qualifier: &str) -> Option<&'a Bound> {
    bounds
        .iter()
        .find(|b| b.binding.eq_ignore_ascii_case(qualifier))
        .or_else(|| {
            bounds
                .iter()
                .find(|b| b.table.as_deref().is_some_and(|t| t.eq_ignore_ascii_case(qualifier)))
        })
}

fn base_owners<'a>(bounds: &'a [Bound], schema: &SchemaCatalog, column: &str) -> Vec<&'a Bound> {
    bounds
        .iter()
        .filter(|b| b.table.as_deref().is_some_and(|t| owns(schema, t, column)))
        .collect()
}

pub fn align_tables_columns(
    query: &Query,
    schema: &SchemaCatalog,
    table_priority: Option<&[String]>,
) -> (Query, Vec<Fix>) {
    let mut out = query.clone();
    let mut fixes = Vec::new();
    align_level(&mut out, schema, table_priority, &[], &mut fixes);
    (out, fixes)
}

enum Action {
    Requalify(ColumnRef),
    AddOwner,
}

fn align_level(
    query: &mut Query,
    schema: &SchemaCatalog,
    priority: Option<&[String]>,
    outer: &[Vec<String>],
    fixes: &mut Vec<Fix>,
) {
    for t in query.table_refs_mut() {
        if let TableRef::Derived { query: sub, .. } = t {
            align_level(sub, schema, priority, outer, fixes);
        }
    }

    let aliases: Vec<String> = query
        .select
        .iter()
        .filter_map(|s| match s {
            SelectItem::Expr { alias: Some(a), .. } => Some(a.to_lowercase()),
            _ => None,
        })
        .collect();
    let outer_owns = |column: &str| {
        outer
            .iter()
            .flatten()
            .any(|t| owns(schema, t, column))
    };

    // Adding a table can make a previously unique unqualified column
    // ambiguous, so decide and apply until nothing changes.
    for _ in 0..=schema.tables.len() + 1 {
        let bounds = bounds_of(query, schema);
        let mut refs: Vec<ColumnRef> = Vec::new();
        for e in query.exprs() {
            for c in e.columns() {
                if !refs.contains(c) {
                    refs.push(c.clone());
                }
            }
        }
        let mut decided: Option<(ColumnRef, Action)> = None;
        for r in refs {
            let action = match &r.qualifier {
                Some(q) => match find_bound(&bounds, q) {
                    Some(Bound {
                        table: Some(t), ..
                    }) if !owns(schema, t, &r.name) => match base_owners(&bounds, schema, &r.name).first() {
                        Some(owner) => Some(Action::Requalify(ColumnRef::new(Some(&owner.binding), &r.name))),
                        None if schema.has_column(&r.name) => Some(Action::AddOwner),
                        None => None,
                    },
                    _ => None,
                },
                None => {
                    let lower = r.name.to_lowercase();
                    let derived = bounds.iter().any(|b| b.outputs.contains(&lower));
                    if aliases.contains(&lower) || derived {
                        None
                    } else {
                        let owners = base_owners(&bounds, schema, &r.name);
                        match owners.len() {
                            0 if !outer_owns(&r.name) && schema.has_column(&r.name) => Some(Action::AddOwner),
                            0 | 1 => None,
                            _ => Some(Action::Requalify(ColumnRef::new(Some(&owners[0].binding), &r.name))),
                        }
                    }
                }
            };
            if let Some(a) = action {
                decided = Some((r, a));
                break;
            }
        }
        let Some((old, action)) = decided else {
            break;
        };
        let new = match action {
            Action::Requalify(new) => new,
            Action::AddOwner => {
                let owner = add_owner(query, schema, priority, &old.name, fixes);
                ColumnRef::new(Some(&owner), &old.name)
            }
        };
        fixes.push(Fix::new(
            FixKind::Alignment,
            format!("{} -> {}", display(&old), display(&new)),
        ));
        for e in query.exprs_mut() {
            for c in e.columns_mut() {
                if *c == old {
                    *c = new.clone();
                }
            }
        }
    }

    let mut visible = outer.to_vec();
    visible.push(
        bounds_of(query, schema)
            .into_iter()
            .filter_map(|b| b.table)
            .collect(),
    );
    for e in query.exprs_mut() {
        for sub in e.subqueries_mut() {
            align_level(sub, schema, priority, &visible, fixes);
        }
    }
}

fn display(c: &ColumnRef) -> String {
    match &c.qualifier {
        Some(q) => format!("{q}.{}", c.name),
        None => c.name.clone(),
    }
}

/// Brings a table owning `column` into the query, joined through a foreign
/// key when one links it to a table already present. Returns its binding.
fn add_owner(
    query: &mut Query,
    schema: &SchemaCatalog,
    priority: Option<&[String]>,
    column: &str,
    fixes: &mut Vec<Fix>,
) -> String {
    let owners = schema.owners_of(column);
    let ranked: BTreeMap<usize, &str> = owners
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let rank = priority
                .and_then(|p| p.iter().position(|n| n.eq_ignore_ascii_case(&t.name)))
                .unwrap_or(usize::MAX / 2 + i);
            (rank, t.name.as_str())
        })
        .collect();
    let owner = ranked.values().next().expect("column exists in schema").to_string();

    let bounds = bounds_of(query, schema);
    let join = bounds.iter().find_map(|b| {
        let present = b.table.as_deref()?;
        let fk = schema.foreign_keys_between(present, &owner).into_iter().next()?;
        let (here, there) = if fk.from.table().eq_ignore_ascii_case(present) {
            (fk.from.column(), fk.to.column())
        } else {
            (fk.to.column(), fk.from.column())
        };
        Some(Expr::binary(
            BinaryOp::Eq,
            Expr::column(Some(&b.binding), here),
            Expr::column(Some(&owner), there),
        ))
    });
    match join {
        Some(on) => {
            fixes.push(Fix::new(FixKind::Alignment, format!("joined {owner} for {column}")));
            query.joins.push(Join {
                kind: JoinKind::Inner,
                table: TableRef::table(&owner, None),
                on,
            });
        }
        None => {
            fixes.push(Fix::new(FixKind::Alignment, format!("added {owner} to FROM for {column}")));
            query.from.push(TableRef::table(&owner, None));
        }
    }
    owner
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::*;
    use crate::sql::{parse_sql, render_sql};

    fn aligned(sql: &str, priority: Option<&[String]>) -> (String, Vec<Fix>) {
        let (q, fixes) = align_tables_columns(&parse_sql(sql).unwrap(), &stock_schema(), priority);
        (render_sql(&q), fixes)
    }

    #[test]
    fn misattributed_column_is_requalified() {
        let (sql, fixes) = aligned(
            "SELECT lc_exgindustry.chinameabbr FROM lc_sharestru JOIN lc_exgindustry ON lc_sharestru.companycode = lc_exgindustry.companycode WHERE lc_sharestru.firstindustryname = 'bank'",
            None,
        );
        assert_eq!(
            sql,
            "SELECT lc_sharestru.chinameabbr FROM lc_sharestru JOIN lc_exgindustry ON lc_sharestru.companycode = lc_exgindustry.companycode WHERE lc_exgindustry.firstindustryname = 'bank'"
        );
        assert_eq!(fixes.len(), 2);
    }

    #[test]
    fn aliases_are_used_when_requalifying() {
        let (sql, _) = aligned(
            "SELECT b.chinameabbr FROM lc_sharestru AS a JOIN lc_exgindustry AS b ON a.companycode = b.companycode",
            None,
        );
        assert!(sql.starts_with("SELECT a.chinameabbr"), "{sql}");
    }

    #[test]
    fn aligned_sql_is_unchanged() {
        let text = "SELECT s.chinameabbr FROM lc_sharestru AS s WHERE s.enddate > '2020'";
        let (sql, fixes) = aligned(text, None);
        assert_eq!(sql, text);
        assert!(fixes.is_empty());
    }

    #[test]
    fn missing_owner_is_joined_through_foreign_key() {
        let (sql, _) = aligned("SELECT chinameabbr FROM lc_exgindustry WHERE firstindustryname = 'bank'", None);
        assert_eq!(
            sql,
            "SELECT lc_sharestru.chinameabbr FROM lc_exgindustry JOIN lc_sharestru ON lc_exgindustry.companycode = lc_sharestru.companycode WHERE firstindustryname = 'bank'"
        );
        let q = parse_sql(&sql).unwrap();
        let tables: Vec<_> = q.table_refs().filter_map(|t| t.binding_name()).collect();
        for owner in stock_schema().owners_of("chinameabbr") {
            assert!(tables.contains(&owner.name.as_str()));
        }
    }

    #[test]
    fn ambiguous_unqualified_columns_get_first_owner() {
        let (sql, _) = aligned(
            "SELECT companycode FROM lc_sharestru JOIN lc_exgindustry ON lc_sharestru.companycode = lc_exgindustry.companycode",
            None,
        );
        assert!(sql.starts_with("SELECT lc_sharestru.companycode"), "{sql}");
    }

    #[test]
    fn added_table_disambiguates_existing_columns() {
        let (sql, _) = aligned("SELECT companycode, chinameabbr FROM lc_exgindustry", None);
        assert!(sql.starts_with("SELECT lc_exgindustry.companycode, lc_sharestru.chinameabbr"), "{sql}");
        let (again, fixes) = aligned(&sql, None);
        assert_eq!(again, sql);
        assert!(fixes.is_empty());
    }

    #[test]
    fn linker_priority_picks_among_owners() {
        let schema = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![
                table("a", "", &[("id", "")]),
                table("b", "", &[("id", ""), ("v", "")]),
                table("c", "", &[("id", ""), ("v", "")]),
            ],
            foreign_keys: vec![],
        };
        let q = parse_sql("SELECT v FROM a").unwrap();
        let (plain, _) = align_tables_columns(&q, &schema, None);
        assert_eq!(render_sql(&plain), "SELECT b.v FROM a, b");
        let priority = vec!["c".to_string(), "b".to_string()];
        let (ranked, _) = align_tables_columns(&q, &schema, Some(&priority));
        assert_eq!(render_sql(&ranked), "SELECT c.v FROM a, c");
    }

    #[test]
    fn subqueries_are_aligned_in_their_own_scope() {
        let (sql, _) = aligned(
            "SELECT chinameabbr FROM lc_sharestru WHERE companycode IN (SELECT lc_exgindustry.companycode FROM lc_exgindustry WHERE lc_exgindustry.enddate > '2020')",
            None,
        );
        assert!(sql.contains("JOIN lc_sharestru ON lc_exgindustry.companycode = lc_sharestru.companycode WHERE lc_sharestru.enddate"), "{sql}");
    }
}
