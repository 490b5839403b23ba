//! Output calibration without execution: repair each sampled candidate,
//! drop the ones that do not fit the schema, cluster the rest by keyword
//! components, take the first member of the largest cluster and align its
//! tables with its columns.

pub mod align;
pub mod cluster;
pub mod fuzzy;
pub mod typos;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::SchemaCatalog;
use crate::sql::{extract_components, parse_sql, render_sql, Query, SelectItem, SqlComponents, SqlError, TableRef};

pub use align::align_tables_columns;
pub use cluster::{cluster_candidates, Cluster};
pub use fuzzy::{edit_distance, fuzzy_match_column, FuzzyMatch, FUZZY_THRESHOLD};
pub use typos::{fix_typos, TypoOutcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalibrationError {
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("schema has no columns")]
    EmptySchema,
    #[error("every candidate was rejected")]
    AllCandidatesRejected { dropped: Vec<Dropped> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixKind {
    Typo,
    FuzzyColumn,
    JoinCondition,
    Alignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fix {
    pub kind: FixKind,
    pub detail: String,
    /// Set when the repair picked one of several equally plausible options.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

impl Fix {
    pub fn new(kind: FixKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
            low_confidence: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    EmptyCandidate,
    Unparseable,
    UnresolvedAlias,
    SchemaFilter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub index: usize,
    pub reason: DropReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<String>,
    pub schema: SchemaCatalog,
    /// Tables in linker rank order; decides which owner table alignment
    /// brings in when several could supply a column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_priority: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCluster {
    pub representative: String,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub final_sql: String,
    /// Largest first; ties keep formation order.
    pub clusters: Vec<ReportCluster>,
    /// Fixes applied to each candidate, indexed like the input.
    pub repairs: Vec<Vec<Fix>>,
    pub dropped: Vec<Dropped>,
}

/// Visits `query` and every query nested in it, outermost first.
fn for_each_query<'a>(query: &'a Query, f: &mut dyn FnMut(&'a Query)) {
    f(query);
    for t in query.table_refs() {
        if let TableRef::Derived { query: sub, .. } = t {
            for_each_query(sub, f);
        }
    }
    for e in query.exprs() {
        for sub in e.subqueries() {
            for_each_query(sub, f);
        }
    }
}

fn for_each_query_mut(query: &mut Query, f: &mut dyn FnMut(&mut Query)) {
    f(query);
    for t in query.table_refs_mut() {
        if let TableRef::Derived { query: sub, .. } = t {
            for_each_query_mut(sub, f);
        }
    }
    for e in query.exprs_mut() {
        for sub in e.subqueries_mut() {
            for_each_query_mut(sub, f);
        }
    }
}

/// Names that are not schema columns by design: select aliases, derived
/// table outputs and derived table aliases (lowercased).
fn local_names(query: &Query) -> (Vec<String>, Vec<String>) {
    let mut names = Vec::new();
    let mut derived = Vec::new();
    for_each_query(query, &mut |q| {
        for item in &q.select {
            if let SelectItem::Expr { alias: Some(a), .. } = item {
                names.push(a.to_lowercase());
            }
        }
        for t in q.table_refs() {
            if let TableRef::Derived { query, alias } = t {
                names.extend(query.output_names().iter().map(|n| n.to_lowercase()));
                derived.extend(alias.iter().map(|a| a.to_lowercase()));
            }
        }
    });
    (names, derived)
}

/// Column references that must exist in the schema.
fn schema_columns(query: &Query) -> Vec<String> {
    let (names, derived) = local_names(query);
    let mut out = Vec::new();
    for_each_query(query, &mut |q| {
        for e in q.exprs() {
            for c in e.columns() {
                let via_derived = c
                    .qualifier
                    .as_ref()
                    .is_some_and(|q| derived.contains(&q.to_lowercase()));
                if !via_derived && !names.contains(&c.name.to_lowercase()) {
                    out.push(c.name.clone());
                }
            }
        }
    });
    out
}

/// Replaces unknown column names by their closest schema column when the
/// match is within the threshold.
pub fn fuzzy_repair(query: &mut Query, schema: &SchemaCatalog) -> Vec<Fix> {
    let unknown: Vec<String> = schema_columns(query)
        .into_iter()
        .filter(|c| !schema.has_column(c))
        .collect();
    let mut fixes = Vec::new();
    for name in unknown {
        let Ok(m) = fuzzy_match_column(&name, schema) else {
            continue;
        };
        if !m.acceptable() {
            continue;
        }
        let mut replaced = false;
        for_each_query_mut(query, &mut |q| {
            for e in q.exprs_mut() {
                for c in e.columns_mut() {
                    if c.name == name {
                        c.name = m.column.clone();
                        replaced = true;
                    }
                }
            }
        });
        if replaced {
            fixes.push(Fix::new(FixKind::FuzzyColumn, format!("{name} -> {}", m.column)));
        }
    }
    fixes
}

/// First-stage repair of one candidate: text-level typo fixes, parsing,
/// then fuzzy column replacement.
pub fn repair_candidate(raw: &str, schema: &SchemaCatalog) -> (Result<Query, DropReason>, Vec<Fix>) {
    if raw.trim().is_empty() {
        return (Err(DropReason::EmptyCandidate), Vec::new());
    }
    let typo = fix_typos(raw, schema);
    let mut fixes = typo.fixes;
    if typo.unparseable {
        return (Err(DropReason::Unparseable), fixes);
    }
    let mut query = parse_sql(&typo.sql).expect("fix_typos checked parseability");
    fixes.extend(fuzzy_repair(&mut query, schema));
    (Ok(query), fixes)
}

struct Survivor {
    index: usize,
    query: Query,
    components: SqlComponents,
}

pub fn calibrate(cs: &CandidateSet) -> Result<CalibrationReport, CalibrationError> {
    if cs.candidates.is_empty() {
        return Err(CalibrationError::NoCandidates);
    }
    let schema = &cs.schema;
    let mut repairs = Vec::with_capacity(cs.candidates.len());
    let mut dropped = Vec::new();
    let mut survivors = Vec::new();

    for (index, raw) in cs.candidates.iter().enumerate() {
        let (parsed, fixes) = repair_candidate(raw, schema);
        repairs.push(fixes);
        let query = match parsed {
            Ok(q) => q,
            Err(reason) => {
                dropped.push(Dropped {
                    index,
                    reason,
                    detail: match reason {
                        DropReason::EmptyCandidate => "empty candidate".into(),
                        _ => parse_sql(raw).err().map(|e| e.to_string()).unwrap_or_default(),
                    },
                });
                continue;
            }
        };
        let components = match extract_components(&query) {
            Ok(c) => c,
            Err(e) => {
                let reason = match e {
                    SqlError::UnresolvedAlias { .. } => DropReason::UnresolvedAlias,
                    _ => DropReason::Unparseable,
                };
                dropped.push(Dropped {
                    index,
                    reason,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let missing: Vec<String> = schema_columns(&query)
            .into_iter()
            .filter(|c| !schema.has_column(c))
            .collect();
        if !missing.is_empty() {
            dropped.push(Dropped {
                index,
                reason: DropReason::SchemaFilter,
                detail: format!("unknown columns: {}", missing.join(", ")),
            });
            continue;
        }
        survivors.push(Survivor {
            index,
            query,
            components,
        });
    }

    if survivors.is_empty() {
        return Err(CalibrationError::AllCandidatesRejected { dropped });
    }

    let keyed: Vec<(usize, SqlComponents)> = survivors
        .iter()
        .map(|s| (s.index, s.components.clone()))
        .collect();
    let clusters = cluster_candidates(&keyed);
    let by_index = |i: usize| survivors.iter().find(|s| s.index == i).expect("cluster member survived");

    let winner = by_index(clusters[0].members[0]);
    let (aligned, align_fixes) = align_tables_columns(&winner.query, schema, cs.table_priority.as_deref());
    repairs[winner.index].extend(align_fixes);

    Ok(CalibrationReport {
        final_sql: render_sql(&aligned),
        clusters: clusters
            .iter()
            .map(|c| ReportCluster {
                representative: render_sql(&by_index(c.members[0]).query),
                members: c.members.clone(),
            })
            .collect(),
        repairs,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::*;

    fn set(candidates: &[&str]) -> CandidateSet {
        CandidateSet {
            candidates: candidates.iter().map(|s| s.to_string()).collect(),
            schema: stock_schema(),
            table_priority: None,
        }
    }

    #[test]
    fn five_candidate_trace() {
        // Candidates 0, 2 and 4 differ only by AND order and operand side;
        // 1 uses a different literal and 3 adds a LIMIT. Clusters form as
        // {0,2,4}, {1}, {3}; the winner is candidate 0 as written, with its
        // lone unqualified column already owned by the single table.
        let report = calibrate(&set(&[
            "SELECT chinameabbr FROM lc_sharestru WHERE enddate = '2021-12-31' AND companycode = 7",
            "SELECT chinameabbr FROM lc_sharestru WHERE enddate = '2020-12-31' AND companycode = 7",
            "SELECT chinameabbr FROM lc_sharestru WHERE companycode = 7 AND enddate = '2021-12-31'",
            "SELECT chinameabbr FROM lc_sharestru WHERE enddate = '2021-12-31' AND companycode = 7 LIMIT 1",
            "select chinameabbr from lc_sharestru where '2021-12-31' = enddate and 7 = companycode",
        ]))
        .unwrap();
        let sizes: Vec<_> = report.clusters.iter().map(|c| c.members.clone()).collect();
        assert_eq!(sizes, vec![vec![0, 2, 4], vec![1], vec![3]]);
        assert_eq!(
            report.final_sql,
            "SELECT chinameabbr FROM lc_sharestru WHERE enddate = '2021-12-31' AND companycode = 7"
        );
    }

    #[test]
    fn documented_error_classes_are_repaired() {
        let report = calibrate(&set(&[
            "SELECT aquirementrium FROM lc_sharestru WHERE companycode == 3",
        ]))
        .unwrap();
        assert_eq!(report.final_sql, "SELECT aquireramount FROM lc_sharestru WHERE companycode = 3");
        let kinds: Vec<_> = report.repairs[0].iter().map(|f| f.kind).collect();
        assert_eq!(kinds, [FixKind::Typo, FixKind::FuzzyColumn]);
    }

    #[test]
    fn far_off_columns_fail_the_schema_filter() {
        let err = calibrate(&set(&["SELECT zzzzqqqq FROM lc_sharestru", "", "SELEC x"])).unwrap_err();
        let CalibrationError::AllCandidatesRejected { dropped } = err else {
            panic!("expected rejection");
        };
        let reasons: Vec<_> = dropped.iter().map(|d| d.reason).collect();
        assert_eq!(
            reasons,
            [DropReason::SchemaFilter, DropReason::EmptyCandidate, DropReason::Unparseable]
        );
    }

    #[test]
    fn aliases_and_derived_outputs_are_not_schema_columns() {
        let report = calibrate(&set(&[
            "SELECT d.n AS total FROM (SELECT count(*) AS n FROM lc_sharestru) AS d ORDER BY total",
        ]))
        .unwrap();
        assert!(report.dropped.is_empty());
        assert!(report.repairs[0].is_empty());
    }

    #[test]
    fn unresolved_alias_is_dropped() {
        let report = calibrate(&set(&["SELECT x.enddate FROM lc_sharestru", "SELECT enddate FROM lc_sharestru"])).unwrap();
        assert_eq!(report.dropped[0].reason, DropReason::UnresolvedAlias);
        assert_eq!(report.final_sql, "SELECT enddate FROM lc_sharestru");
    }

    #[test]
    fn empty_set_is_an_error() {
        assert_eq!(calibrate(&set(&[])), Err(CalibrationError::NoCandidates));
    }
}
