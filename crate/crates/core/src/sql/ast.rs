//! Syntax tree for the SELECT dialect.
//!
//! Parentheses are not stored; the renderer re-inserts them from operator
//! precedence, which keeps `parse(render(ast)) == ast`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub distinct: bool,
    pub select: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub joins: Vec<Join>,
    pub where_clause: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

impl Query {
    /// A bare `SELECT <items> FROM <table>` query.
    pub fn simple(select: Vec<SelectItem>, table: &str) -> Self {
        Self {
            distinct: false,
            select,
            from: vec![TableRef::table(table, None)],
            joins: Vec::new(),
            where_clause: None,
            group_by: Vec::new(),
            having: None,
            order_by: Vec::new(),
            limit: None,
        }
    }

    /// Every table reference in FROM and JOIN order.
    pub fn table_refs(&self) -> impl Iterator<Item = &TableRef> {
        self.from.iter().chain(self.joins.iter().map(|j| &j.table))
    }

    pub fn table_refs_mut(&mut self) -> impl Iterator<Item = &mut TableRef> {
        self.from
            .iter_mut()
            .chain(self.joins.iter_mut().map(|j| &mut j.table))
    }

    /// Expressions owned directly by this query level, in clause order.
    /// Subqueries nested in them are not descended into.
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        for item in &self.select {
            if let SelectItem::Expr { expr, .. } = item {
                out.push(expr);
            }
        }
        out.extend(self.joins.iter().map(|j| &j.on));
        out.extend(self.where_clause.iter());
        out.extend(self.group_by.iter());
        out.extend(self.having.iter());
        out.extend(self.order_by.iter().map(|o| &o.expr));
        out
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        let mut out: Vec<&mut Expr> = Vec::new();
        for item in &mut self.select {
            if let SelectItem::Expr { expr, .. } = item {
                out.push(expr);
            }
        }
        out.extend(self.joins.iter_mut().map(|j| &mut j.on));
        out.extend(self.where_clause.iter_mut());
        out.extend(self.group_by.iter_mut());
        out.extend(self.having.iter_mut());
        out.extend(self.order_by.iter_mut().map(|o| &mut o.expr));
        out
    }

    /// Output column names visible to an enclosing query when this query is
    /// used as a derived table.
    pub fn output_names(&self) -> Vec<String> {
        self.select
            .iter()
            .filter_map(|item| match item {
                SelectItem::Expr { alias: Some(a), .. } => Some(a.clone()),
                SelectItem::Expr {
                    expr: Expr::Column(c),
                    alias: None,
                } => Some(c.name.clone()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(String),
    Expr { expr: Expr, alias: Option<String> },
}

impl SelectItem {
    pub fn expr(expr: Expr) -> Self {
        Self::Expr { expr, alias: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TableRef {
    Table {
        name: String,
        alias: Option<String>,
    },
    Derived {
        query: Box<Query>,
        alias: Option<String>,
    },
}

impl TableRef {
    pub fn table(name: &str, alias: Option<&str>) -> Self {
        Self::Table {
            name: name.to_string(),
            alias: alias.map(str::to_string),
        }
    }

    pub fn alias(&self) -> Option<&str> {
        match self {
            Self::Table { alias, .. } | Self::Derived { alias, .. } => alias.as_deref(),
        }
    }

    /// The name a qualified column uses to address this reference.
    pub fn binding_name(&self) -> Option<&str> {
        match self {
            Self::Table { name, alias } => Some(alias.as_deref().unwrap_or(name)),
            Self::Derived { alias, .. } => alias.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JoinKind {
    Inner,
    Left,
    Right,
    Full,
}

impl JoinKind {
    pub fn keyword(self) -> &'static str {
        match self {
            Self::Inner => "JOIN",
            Self::Left => "LEFT JOIN",
            Self::Right => "RIGHT JOIN",
            Self::Full => "FULL JOIN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Join {
    pub kind: JoinKind,
    pub table: TableRef,
    pub on: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderItem {
    pub expr: Expr,
    /// `None` when the query leaves the direction implicit.
    pub direction: Option<SortDirection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
}

impl ColumnRef {
    pub fn new(qualifier: Option<&str>, name: &str) -> Self {
        Self {
            qualifier: qualifier.map(str::to_string),
            name: name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Literal {
    /// Kept as written; normalized only when comparing components.
    Number(String),
    String(String),
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionArgs {
    Star,
    List(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Or => "OR",
            Self::And => "AND",
            Self::Eq => "=",
            Self::NotEq => "!=",
            Self::Lt => "<",
            Self::LtEq => "<=",
            Self::Gt => ">",
            Self::GtEq => ">=",
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            Self::Eq | Self::NotEq | Self::Lt | Self::LtEq | Self::Gt | Self::GtEq
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Column(ColumnRef),
    Literal(Literal),
    Function {
        name: String,
        distinct: bool,
        args: FunctionArgs,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    InList {
        expr: Box<Expr>,
        list: Vec<Expr>,
        negated: bool,
    },
    InSubquery {
        expr: Box<Expr>,
        query: Box<Query>,
        negated: bool,
    },
    Between {
        expr: Box<Expr>,
        low: Box<Expr>,
        high: Box<Expr>,
        negated: bool,
    },
    Like {
        expr: Box<Expr>,
        pattern: Box<Expr>,
        negated: bool,
    },
    IsNull {
        expr: Box<Expr>,
        negated: bool,
    },
    Subquery(Box<Query>),
}

pub const AGGREGATES: [&str; 5] = ["count", "sum", "avg", "min", "max"];

impl Expr {
    pub fn column(qualifier: Option<&str>, name: &str) -> Self {
        Self::Column(ColumnRef::new(qualifier, name))
    }

    pub fn number(text: &str) -> Self {
        Self::Literal(Literal::Number(text.to_string()))
    }

    pub fn string(text: &str) -> Self {
        Self::Literal(Literal::String(text.to_string()))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Self::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn and(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::And, left, right)
    }

    pub fn eq(left: Expr, right: Expr) -> Self {
        Self::binary(BinaryOp::Eq, left, right)
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, Self::Function { name, .. } if AGGREGATES.contains(&name.as_str()))
    }

    /// Operands of a left-deep or right-deep `AND` chain, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Self::Binary {
                op: BinaryOp::And,
                left,
                right,
            } => {
                let mut out = left.conjuncts();
                out.extend(right.conjuncts());
                out
            }
            other => vec![other],
        }
    }

    /// Direct child expressions (subqueries excluded).
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Self::Column(_) | Self::Literal(_) | Self::Subquery(_) => Vec::new(),
            Self::Function { args, .. } => match args {
                FunctionArgs::Star => Vec::new(),
                FunctionArgs::List(list) => list.iter().collect(),
            },
            Self::Unary { expr, .. } | Self::IsNull { expr, .. } => vec![expr],
            Self::Binary { left, right, .. } => vec![left, right],
            Self::InList { expr, list, .. } => {
                let mut v: Vec<&Expr> = vec![expr];
                v.extend(list.iter());
                v
            }
            Self::InSubquery { expr, .. } => vec![expr],
            Self::Between {
                expr, low, high, ..
            } => vec![expr, low, high],
            Self::Like { expr, pattern, .. } => vec![expr, pattern],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Self::Column(_) | Self::Literal(_) | Self::Subquery(_) => Vec::new(),
            Self::Function { args, .. } => match args {
                FunctionArgs::Star => Vec::new(),
                FunctionArgs::List(list) => list.iter_mut().collect(),
            },
            Self::Unary { expr, .. } | Self::IsNull { expr, .. } => vec![expr],
            Self::Binary { left, right, .. } => vec![left, right],
            Self::InList { expr, list, .. } => {
                let mut v: Vec<&mut Expr> = vec![expr];
                v.extend(list.iter_mut());
                v
            }
            Self::InSubquery { expr, .. } => vec![expr],
            Self::Between {
                expr, low, high, ..
            } => vec![expr, low, high],
            Self::Like { expr, pattern, .. } => vec![expr, pattern],
        }
    }

    /// Subqueries directly nested in this expression tree.
    pub fn subqueries(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect_subqueries(&mut out);
        out
    }

    fn collect_subqueries<'a>(&'a self, out: &mut Vec<&'a Query>) {
        match self {
            Self::Subquery(q) => out.push(q),
            Self::InSubquery { query, .. } => out.push(query),
            _ => {}
        }
        for child in self.children() {
            child.collect_subqueries(out);
        }
    }

    pub fn subqueries_mut(&mut self) -> Vec<&mut Query> {
        let mut out = Vec::new();
        self.collect_subqueries_mut(&mut out);
        out
    }

    fn collect_subqueries_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Query>) {
        match self {
            Self::Subquery(q) => {
                out.push(q);
                return;
            }
            Self::InSubquery { expr, query, .. } => {
                expr.collect_subqueries_mut(out);
                out.push(query);
                return;
            }
            _ => {}
        }
        for child in self.children_mut() {
            child.collect_subqueries_mut(out);
        }
    }

    /// Column references in this expression tree, not descending into
    /// subqueries.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        if let Self::Column(c) = self {
            out.push(c);
        }
        for child in self.children() {
            child.collect_columns(out);
        }
    }

    pub fn columns_mut(&mut self) -> Vec<&mut ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns_mut(&mut out);
        out
    }

    fn collect_columns_mut<'a>(&'a mut self, out: &mut Vec<&'a mut ColumnRef>) {
        if let Self::Column(c) = self {
            out.push(c);
            return;
        }
        for child in self.children_mut() {
            child.collect_columns_mut(out);
        }
    }
}
