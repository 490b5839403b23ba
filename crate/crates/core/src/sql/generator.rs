//! Seeded random query generator for property tests.
//!
//! Produces well-formed queries (every qualifier declared) over a small
//! finance-flavoured vocabulary, plus helpers that rewrite a query into an
//! equivalent form or into a form whose components must differ.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::*;
use super::lexer::{tokenize, TokenKind};

const TABLES: [&str; 8] = [
    "fund", "stock", "manager", "company", "industry", "trade", "nav", "holder",
];
const COLUMNS: [&str; 13] = [
    "id", "name", "size", "price", "code", "date", "type", "amount", "rate", "region", "mid",
    "cid", "net value",
];
const ALIASES: [&str; 6] = ["a", "b", "c", "x", "y", "z"];
const STRINGS: [&str; 6] = ["bond", "it's", "2021-12-31", "基金", "A%", ""];
const NUMBERS: [&str; 7] = ["0", "1", "3", "100", "2.5", "0.05", "1000000"];
const AGGS: [&str; 5] = ["count", "sum", "avg", "min", "max"];

pub struct QueryGenerator {
    rng: ChaCha8Rng,
}

#[derive(Clone)]
struct Binding {
    name: String,
    columns: Vec<String>,
}

impl QueryGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn query(&mut self) -> Query {
        self.query_at(0, &[])
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn pick<'a>(&mut self, items: &'a [&'a str]) -> &'a str {
        items[self.rng.random_range(0..items.len())]
    }

    fn query_at(&mut self, depth: usize, outer: &[Binding]) -> Query {
        let mut used_aliases: Vec<&str> = Vec::new();
        let mut bindings: Vec<Binding> = Vec::new();

        let mut from = vec![self.table_ref(depth, &mut used_aliases, &mut bindings)];
        if self.chance(0.1) {
            from.push(self.table_ref(depth, &mut used_aliases, &mut bindings));
        }
        let mut joins = Vec::new();
        let n_joins = match self.rng.random_range(0..10) {
            0..=5 => 0,
            6..=8 => 1,
            _ => 2,
        };
        for _ in 0..n_joins {
            let before = bindings.clone();
            let table = self.table_ref(depth, &mut used_aliases, &mut bindings);
            let new = bindings.last().expect("binding pushed").clone();
            let old = before[self.rng.random_range(0..before.len())].clone();
            let mut on = Expr::eq(self.column_of(&new), self.column_of(&old));
            if self.chance(0.15) {
                on = Expr::and(on, Expr::eq(self.column_of(&new), self.literal()));
            }
            let kind = match self.rng.random_range(0..10) {
                0 => JoinKind::Left,
                1 => JoinKind::Right,
                _ => JoinKind::Inner,
            };
            joins.push(Join { kind, table, on });
        }

        let mut scope: Vec<Binding> = bindings.clone();
        scope.extend(outer.iter().cloned());

        let n_select = self.rng.random_range(1..=4);
        let mut select = Vec::new();
        if self.chance(0.05) {
            select.push(SelectItem::Wildcard);
        } else {
            for _ in 0..n_select {
                let expr = self.select_expr(&bindings);
                let alias = if self.chance(0.15) {
                    Some(format!("col{}", self.rng.random_range(0..5)))
                } else {
                    None
                };
                select.push(SelectItem::Expr { expr, alias });
            }
        }

        let where_clause = if self.chance(0.6) {
            Some(self.predicate(depth, &bindings, &scope, 0))
        } else {
            None
        };

        let mut group_by = Vec::new();
        let mut having = None;
        if self.chance(0.2) {
            let n = self.rng.random_range(1..=2);
            for _ in 0..n {
                group_by.push(self.column_in(&bindings));
            }
            if self.chance(0.5) {
                let n = self.pick(&NUMBERS).to_string();
                having = Some(Expr::binary(
                    BinaryOp::Gt,
                    Expr::Function {
                        name: "count".into(),
                        distinct: false,
                        args: FunctionArgs::Star,
                    },
                    Expr::number(&n),
                ));
            }
        }

        let mut order_by = Vec::new();
        if self.chance(0.3) {
            let n = self.rng.random_range(1..=2);
            for _ in 0..n {
                let expr = if self.chance(0.2) {
                    self.aggregate(&bindings)
                } else {
                    self.column_in(&bindings)
                };
                let direction = match self.rng.random_range(0..3) {
                    0 => None,
                    1 => Some(SortDirection::Asc),
                    _ => Some(SortDirection::Desc),
                };
                order_by.push(OrderItem { expr, direction });
            }
        }

        let limit = if self.chance(0.3) {
            Some(self.rng.random_range(0..=50))
        } else {
            None
        };

        Query {
            distinct: self.chance(0.1),
            select,
            from,
            joins,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
        }
    }

    fn table_ref(
        &mut self,
        depth: usize,
        used_aliases: &mut Vec<&'static str>,
        bindings: &mut Vec<Binding>,
    ) -> TableRef {
        let fresh_alias = |rng: &mut ChaCha8Rng, used: &mut Vec<&'static str>| {
            let free: Vec<&'static str> = ALIASES
                .iter()
                .copied()
                .filter(|a| !used.contains(a))
                .collect();
            let a = free[rng.random_range(0..free.len())];
            used.push(a);
            a
        };
        if depth < 2 && self.chance(0.08) {
            let inner = self.query_at(depth + 1, &[]);
            let alias = fresh_alias(&mut self.rng, used_aliases);
            let columns = inner.output_names();
            let columns = if columns.is_empty() {
                vec!["id".to_string()]
            } else {
                columns
            };
            bindings.push(Binding {
                name: alias.to_string(),
                columns,
            });
            return TableRef::Derived {
                query: Box::new(inner),
                alias: Some(alias.to_string()),
            };
        }
        let taken: Vec<String> = bindings.iter().map(|b| b.name.clone()).collect();
        let mut name = self.pick(&TABLES);
        while taken.iter().any(|t| t == name) {
            name = self.pick(&TABLES);
        }
        let alias = if self.chance(0.4) {
            Some(fresh_alias(&mut self.rng, used_aliases))
        } else {
            None
        };
        bindings.push(Binding {
            name: alias.unwrap_or(name).to_string(),
            columns: COLUMNS.iter().map(|c| c.to_string()).collect(),
        });
        TableRef::table(name, alias)
    }

    fn column_of(&mut self, b: &Binding) -> Expr {
        let col = b.columns[self.rng.random_range(0..b.columns.len())].clone();
        Expr::Column(ColumnRef {
            qualifier: Some(b.name.clone()),
            name: col,
        })
    }

    fn column_in(&mut self, bindings: &[Binding]) -> Expr {
        let b = bindings[self.rng.random_range(0..bindings.len())].clone();
        if bindings.len() == 1 && self.chance(0.5) {
            let col = b.columns[self.rng.random_range(0..b.columns.len())].clone();
            return Expr::Column(ColumnRef {
                qualifier: None,
                name: col,
            });
        }
        self.column_of(&b)
    }

    fn literal(&mut self) -> Expr {
        if self.chance(0.5) {
            Expr::number(self.pick(&NUMBERS))
        } else {
            Expr::string(self.pick(&STRINGS))
        }
    }

    fn aggregate(&mut self, bindings: &[Binding]) -> Expr {
        let name = self.pick(&AGGS).to_string();
        if name == "count" && self.chance(0.5) {
            return Expr::Function {
                name,
                distinct: false,
                args: FunctionArgs::Star,
            };
        }
        Expr::Function {
            name,
            distinct: self.chance(0.15),
            args: FunctionArgs::List(vec![self.column_in(bindings)]),
        }
    }

    fn select_expr(&mut self, bindings: &[Binding]) -> Expr {
        match self.rng.random_range(0..10) {
            0..=4 => self.column_in(bindings),
            5..=6 => self.aggregate(bindings),
            7 => Expr::binary(
                if self.chance(0.5) { BinaryOp::Mul } else { BinaryOp::Sub },
                self.column_in(bindings),
                self.arith_operand(bindings),
            ),
            8 => Expr::Function {
                name: "round".into(),
                distinct: false,
                args: FunctionArgs::List(vec![self.column_in(bindings), Expr::number("2")]),
            },
            _ => self.literal(),
        }
    }

    fn arith_operand(&mut self, bindings: &[Binding]) -> Expr {
        match self.rng.random_range(0..4) {
            0 => Expr::binary(BinaryOp::Add, self.column_in(bindings), Expr::number("1")),
            1 => Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(Expr::number(self.pick(&NUMBERS))),
            },
            _ => Expr::number(self.pick(&NUMBERS)),
        }
    }

    fn predicate(&mut self, depth: usize, local: &[Binding], scope: &[Binding], level: usize) -> Expr {
        if level < 2 && self.chance(0.45) {
            let op = if self.chance(0.7) { BinaryOp::And } else { BinaryOp::Or };
            let l = self.predicate(depth, local, scope, level + 1);
            let r = self.predicate(depth, local, scope, level + 1);
            return Expr::binary(op, l, r);
        }
        if self.chance(0.07) {
            let inner = self.predicate(depth, local, scope, 2);
            return Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            };
        }
        self.atom(depth, local, scope)
    }

    fn atom(&mut self, depth: usize, local: &[Binding], scope: &[Binding]) -> Expr {
        let col = if scope.len() > local.len() && self.chance(0.3) {
            let b = scope[self.rng.random_range(0..scope.len())].clone();
            self.column_of(&b)
        } else {
            self.column_in(local)
        };
        let negated = self.chance(0.15);
        match self.rng.random_range(0..12) {
            0..=4 => {
                let op = [
                    BinaryOp::Eq,
                    BinaryOp::NotEq,
                    BinaryOp::Lt,
                    BinaryOp::LtEq,
                    BinaryOp::Gt,
                    BinaryOp::GtEq,
                ][self.rng.random_range(0..6)];
                let rhs = if self.chance(0.2) {
                    self.column_in(local)
                } else {
                    self.literal()
                };
                Expr::binary(op, col, rhs)
            }
            5 => Expr::Between {
                expr: Box::new(col),
                low: Box::new(Expr::number(self.pick(&NUMBERS))),
                high: Box::new(Expr::number(self.pick(&NUMBERS))),
                negated,
            },
            6 => Expr::Like {
                expr: Box::new(col),
                pattern: Box::new(Expr::string(self.pick(&STRINGS))),
                negated,
            },
            7 => {
                let n = self.rng.random_range(1..=3);
                let list = (0..n).map(|_| self.literal()).collect();
                Expr::InList {
                    expr: Box::new(col),
                    list,
                    negated,
                }
            }
            8 => Expr::IsNull {
                expr: Box::new(col),
                negated,
            },
            9 if depth < 2 => {
                let mut sub = self.query_at(depth + 1, scope);
                sub.select = vec![SelectItem::expr(Expr::column(None, "id"))];
                if sub.from.len() + sub.joins.len() > 1 {
                    let b = sub.table_refs().next().and_then(|t| t.binding_name()).map(str::to_string);
                    sub.select = vec![SelectItem::expr(Expr::column(b.as_deref(), "id"))];
                }
                Expr::InSubquery {
                    expr: Box::new(col),
                    query: Box::new(sub),
                    negated,
                }
            }
            10 if depth < 2 => {
                let mut sub = self.query_at(depth + 1, scope);
                let first = sub
                    .table_refs()
                    .next()
                    .and_then(|t| t.binding_name())
                    .map(str::to_string);
                sub.select = vec![SelectItem::expr(Expr::Function {
                    name: "avg".into(),
                    distinct: false,
                    args: FunctionArgs::List(vec![Expr::column(first.as_deref(), "size")]),
                })];
                Expr::binary(BinaryOp::Gt, col, Expr::Subquery(Box::new(sub)))
            }
            _ => Expr::binary(
                BinaryOp::Eq,
                Expr::binary(BinaryOp::Add, col, Expr::number("1")),
                self.literal(),
            ),
        }
    }

    /// Re-spells canonical SQL with random keyword case and whitespace.
    pub fn noisy_text(&mut self, sql: &str) -> String {
        let tokens = tokenize(sql).expect("canonical SQL tokenizes");
        let mut out = String::new();
        let mut prev_end = 0;
        for tok in tokens {
            if matches!(tok.kind, TokenKind::Eof) {
                break;
            }
            if tok.start > prev_end {
                let ws = [" ", "  ", "\n", "\t ", " \n  "];
                out.push_str(ws[self.rng.random_range(0..ws.len())]);
            }
            let text = &sql[tok.start..tok.end];
            match tok.kind {
                TokenKind::Keyword(_) => match self.rng.random_range(0..3) {
                    0 => out.push_str(&text.to_lowercase()),
                    1 => out.push_str(text),
                    _ => {
                        for (i, c) in text.chars().enumerate() {
                            if i % 2 == 0 {
                                out.extend(c.to_lowercase());
                            } else {
                                out.push(c);
                            }
                        }
                    }
                },
                _ => out.push_str(text),
            }
            prev_end = tok.end;
        }
        out
    }
}

/// Rewrites `q` into a form with identical components: select items and
/// top-level `AND` operands are shuffled and equality sides swapped in WHERE
/// and ON.
pub fn permute_equivalent(q: &Query, rng: &mut impl Rng) -> Query {
    let mut out = q.clone();
    out.select.shuffle(rng);
    if let Some(w) = &out.where_clause {
        out.where_clause = Some(shuffle_conjuncts(w, rng));
    }
    for join in &mut out.joins {
        join.on = shuffle_conjuncts(&join.on, rng);
    }
    out
}

fn shuffle_conjuncts(expr: &Expr, rng: &mut impl Rng) -> Expr {
    let mut atoms: Vec<Expr> = expr.conjuncts().into_iter().cloned().collect();
    atoms.shuffle(rng);
    for atom in &mut atoms {
        if let Expr::Binary {
            op: BinaryOp::Eq | BinaryOp::NotEq,
            left,
            right,
        } = atom
        {
            if rng.random_bool(0.5) {
                std::mem::swap(left, right);
            }
        }
    }
    let mut iter = atoms.into_iter();
    let first = iter.next().expect("at least one conjunct");
    iter.fold(first, Expr::and)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    Limit,
    OrderDirection,
    Literal,
    SelectColumn,
    Table,
}

/// Applies one change that must alter the query's components.
pub fn mutate_significant(q: &Query, rng: &mut impl Rng) -> (Query, Mutation) {
    let mut options = vec![Mutation::Limit];
    if !q.order_by.is_empty() {
        options.push(Mutation::OrderDirection);
    }
    if q.where_clause.as_ref().is_some_and(has_literal) {
        options.push(Mutation::Literal);
    }
    if q
        .select
        .iter()
        .any(|s| matches!(s, SelectItem::Expr { expr, .. } if !expr.columns().is_empty()))
    {
        options.push(Mutation::SelectColumn);
    }
    if q
        .table_refs()
        .any(|t| matches!(t, TableRef::Table { alias: Some(_), .. }))
    {
        options.push(Mutation::Table);
    }
    let choice = options[rng.random_range(0..options.len())];
    let mut out = q.clone();
    match choice {
        Mutation::Limit => {
            out.limit = Some(q.limit.map_or(7, |n| n + 1));
        }
        Mutation::OrderDirection => {
            let item = &mut out.order_by[0];
            item.direction = match item.direction {
                Some(SortDirection::Desc) => Some(SortDirection::Asc),
                _ => Some(SortDirection::Desc),
            };
        }
        Mutation::Literal => {
            let w = out.where_clause.as_mut().expect("where present");
            replace_first_literal(w);
        }
        Mutation::SelectColumn => {
            for item in &mut out.select {
                if let SelectItem::Expr { expr, .. } = item {
                    if let Some(c) = expr.columns_mut().into_iter().next() {
                        c.name = "zz_mutated".into();
                        break;
                    }
                }
            }
        }
        Mutation::Table => {
            // Aliased, so no column reference spells the old name.
            for t in out.table_refs_mut() {
                if let TableRef::Table {
                    name,
                    alias: Some(_),
                } = t
                {
                    *name = "zz_table".into();
                    break;
                }
            }
        }
    }
    (out, choice)
}

fn has_literal(e: &Expr) -> bool {
    matches!(e, Expr::Literal(_)) || e.children().into_iter().any(has_literal)
}

fn replace_first_literal(e: &mut Expr) -> bool {
    if let Expr::Literal(lit) = e {
        *lit = Literal::String("zz_mutated_value".into());
        return true;
    }
    e.children_mut().into_iter().any(replace_first_literal)
}
