//! Recursive-descent parser for the SELECT dialect.
//!
//! Precedence, loosest first: `OR`, `AND`, `NOT`, comparison-like predicates
//! (`=`, `IN`, `BETWEEN`, `LIKE`, `IS NULL`; non-associative), `+ -`,
//! `* /`, unary minus.

use super::ast::*;
use super::error::{SqlError, SyntaxError};
use super::lexer::{tokenize, Keyword, Token, TokenKind};

pub fn parse(input: &str) -> Result<Query, SqlError> {
    if input.trim().is_empty() {
        return Err(SqlError::Empty);
    }
    let tokens = tokenize(input)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.reject_statement_kinds()?;
    let query = parser.query()?;
    parser.expect_end()?;
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SqlError>;

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_nth(&self, n: usize) -> &TokenKind {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].start
    }

    fn advance(&mut self) -> &Token {
        let tok = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.peek().is_keyword(kw)
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> SqlError {
        let tok = &self.tokens[self.pos];
        if let TokenKind::Keyword(kw) = tok.kind {
            if is_unsupported(kw) {
                return SqlError::UnsupportedConstruct {
                    offset: tok.start,
                    construct: kw.as_str().to_string(),
                };
            }
        }
        SqlError::Syntax(SyntaxError {
            offset: tok.start,
            expected: expected.to_string(),
            found: tok.kind.describe(),
        })
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(kw.as_str()))
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<()> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error(&kind.describe()))
        }
    }

    fn reject_statement_kinds(&self) -> PResult<()> {
        if let TokenKind::Keyword(
            kw @ (Keyword::Insert
            | Keyword::Update
            | Keyword::Delete
            | Keyword::Create
            | Keyword::Drop
            | Keyword::Alter
            | Keyword::With),
        ) = self.peek()
        {
            return Err(SqlError::UnsupportedConstruct {
                offset: self.offset(),
                construct: kw.as_str().to_string(),
            });
        }
        Ok(())
    }

    fn expect_end(&mut self) -> PResult<()> {
        if matches!(self.peek(), TokenKind::Eof) {
            Ok(())
        } else {
            Err(self.error("end of query"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            TokenKind::Ident { value, .. } => {
                self.advance();
                Ok(value)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn optional_alias(&mut self) -> PResult<Option<String>> {
        if self.eat_kw(Keyword::As) {
            return self.ident().map(Some);
        }
        if let TokenKind::Ident { value, .. } = self.peek().clone() {
            self.advance();
            return Ok(Some(value));
        }
        Ok(None)
    }

    fn query(&mut self) -> PResult<Query> {
        self.expect_kw(Keyword::Select)?;
        let distinct = self.eat_kw(Keyword::Distinct);
        let mut select = vec![self.select_item()?];
        while self.eat(&TokenKind::Comma) {
            select.push(self.select_item()?);
        }

        let mut from = Vec::new();
        let mut joins = Vec::new();
        if self.eat_kw(Keyword::From) {
            from.push(self.table_ref()?);
            loop {
                if self.eat(&TokenKind::Comma) {
                    from.push(self.table_ref()?);
                } else if let Some(kind) = self.join_kind()? {
                    let table = self.table_ref()?;
                    self.expect_kw(Keyword::On)?;
                    let on = self.expr()?;
                    joins.push(Join { kind, table, on });
                } else {
                    break;
                }
            }
        }

        let where_clause = if self.eat_kw(Keyword::Where) {
            Some(self.expr()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.eat_kw(Keyword::Group) {
            self.expect_kw(Keyword::By)?;
            group_by.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                group_by.push(self.expr()?);
            }
        }

        let having = if self.eat_kw(Keyword::Having) {
            Some(self.expr()?)
        } else {
            None
        };

        let mut order_by = Vec::new();
        if self.eat_kw(Keyword::Order) {
            self.expect_kw(Keyword::By)?;
            loop {
                let expr = self.expr()?;
                let direction = if self.eat_kw(Keyword::Asc) {
                    Some(SortDirection::Asc)
                } else if self.eat_kw(Keyword::Desc) {
                    Some(SortDirection::Desc)
                } else {
                    None
                };
                order_by.push(OrderItem { expr, direction });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }

        let limit = if self.eat_kw(Keyword::Limit) {
            match self.peek().clone() {
                TokenKind::Number(n) if !n.contains('.') => {
                    let offset = self.offset();
                    self.advance();
                    Some(n.parse::<u64>().map_err(|_| {
                        SqlError::Syntax(SyntaxError {
                            offset,
                            expected: "LIMIT value within u64".into(),
                            found: n.clone(),
                        })
                    })?)
                }
                _ => return Err(self.error("non-negative integer")),
            }
        } else {
            None
        };

        Ok(Query {
            distinct,
            select,
            from,
            joins,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
        })
    }

    fn join_kind(&mut self) -> PResult<Option<JoinKind>> {
        let kind = match self.peek() {
            TokenKind::Keyword(Keyword::Join) => {
                self.advance();
                return Ok(Some(JoinKind::Inner));
            }
            TokenKind::Keyword(Keyword::Inner) => JoinKind::Inner,
            TokenKind::Keyword(Keyword::Left) => JoinKind::Left,
            TokenKind::Keyword(Keyword::Right) => JoinKind::Right,
            TokenKind::Keyword(Keyword::Full) => JoinKind::Full,
            TokenKind::Keyword(Keyword::Cross) => return Err(self.error("JOIN")),
            _ => return Ok(None),
        };
        self.advance();
        if kind != JoinKind::Inner {
            self.eat_kw(Keyword::Outer);
        }
        self.expect_kw(Keyword::Join)?;
        Ok(Some(kind))
    }

    fn select_item(&mut self) -> PResult<SelectItem> {
        if self.eat(&TokenKind::Star) {
            return Ok(SelectItem::Wildcard);
        }
        if let (TokenKind::Ident { value, .. }, TokenKind::Dot, TokenKind::Star) =
            (self.peek().clone(), self.peek_nth(1), self.peek_nth(2))
        {
            self.advance();
            self.advance();
            self.advance();
            return Ok(SelectItem::QualifiedWildcard(value));
        }
        let expr = self.expr()?;
        let alias = self.optional_alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> PResult<TableRef> {
        if self.eat(&TokenKind::LParen) {
            let query = self.query()?;
            self.expect(TokenKind::RParen)?;
            let alias = self.optional_alias()?;
            return Ok(TableRef::Derived {
                query: Box::new(query),
                alias,
            });
        }
        let name = self.ident()?;
        let alias = self.optional_alias()?;
        Ok(TableRef::Table { name, alias })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let mut left = self.and_expr()?;
        while self.eat_kw(Keyword::Or) {
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut left = self.not_expr()?;
        while self.eat_kw(Keyword::And) {
            let right = self.not_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_kw(Keyword::Not) {
            let inner = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(inner),
            });
        }
        self.predicate()
    }

    fn predicate(&mut self) -> PResult<Expr> {
        let left = self.additive()?;
        let op = match self.peek() {
            TokenKind::Eq => Some(BinaryOp::Eq),
            TokenKind::NotEq => Some(BinaryOp::NotEq),
            TokenKind::Lt => Some(BinaryOp::Lt),
            TokenKind::LtEq => Some(BinaryOp::LtEq),
            TokenKind::Gt => Some(BinaryOp::Gt),
            TokenKind::GtEq => Some(BinaryOp::GtEq),
            TokenKind::EqEq => return Err(self.error("comparison operator `=`")),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let right = self.additive()?;
            return Ok(Expr::binary(op, left, right));
        }

        if self.eat_kw(Keyword::Is) {
            let negated = self.eat_kw(Keyword::Not);
            self.expect_kw(Keyword::Null)?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }

        let negated = if self.at_kw(Keyword::Not)
            && matches!(
                self.peek_nth(1),
                TokenKind::Keyword(Keyword::In | Keyword::Between | Keyword::Like)
            ) {
            self.advance();
            true
        } else {
            false
        };

        if self.eat_kw(Keyword::In) {
            self.expect(TokenKind::LParen)?;
            if self.at_kw(Keyword::Select) {
                let query = self.query()?;
                self.expect(TokenKind::RParen)?;
                return Ok(Expr::InSubquery {
                    expr: Box::new(left),
                    query: Box::new(query),
                    negated,
                });
            }
            let mut list = vec![self.additive()?];
            while self.eat(&TokenKind::Comma) {
                list.push(self.additive()?);
            }
            self.expect(TokenKind::RParen)?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if self.eat_kw(Keyword::Between) {
            let low = self.additive()?;
            self.expect_kw(Keyword::And)?;
            let high = self.additive()?;
            return Ok(Expr::Between {
                expr: Box::new(left),
                low: Box::new(low),
                high: Box::new(high),
                negated,
            });
        }
        if self.eat_kw(Keyword::Like) {
            let pattern = self.additive()?;
            return Ok(Expr::Like {
                expr: Box::new(left),
                pattern: Box::new(pattern),
                negated,
            });
        }
        Ok(left)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = Expr::binary(op, left, right);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(inner),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            TokenKind::Number(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(n)))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::String(s)))
            }
            TokenKind::Keyword(Keyword::Null) => {
                self.advance();
                Ok(Expr::Literal(Literal::Null))
            }
            TokenKind::LParen => {
                self.advance();
                if self.at_kw(Keyword::Select) {
                    let query = self.query()?;
                    self.expect(TokenKind::RParen)?;
                    return Ok(Expr::Subquery(Box::new(query)));
                }
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident { value, quoted } => {
                self.advance();
                if !quoted && matches!(self.peek(), TokenKind::LParen) {
                    return self.function_call(value);
                }
                if self.eat(&TokenKind::Dot) {
                    let name = self.ident()?;
                    return Ok(Expr::Column(ColumnRef {
                        qualifier: Some(value),
                        name,
                    }));
                }
                Ok(Expr::Column(ColumnRef {
                    qualifier: None,
                    name: value,
                }))
            }
            _ => Err(self.error("expression")),
        }
    }

    fn function_call(&mut self, name: String) -> PResult<Expr> {
        self.expect(TokenKind::LParen)?;
        let name = name.to_lowercase();
        let distinct = self.eat_kw(Keyword::Distinct);
        if !distinct && self.eat(&TokenKind::Star) {
            self.expect(TokenKind::RParen)?;
            return Ok(Expr::Function {
                name,
                distinct,
                args: FunctionArgs::Star,
            });
        }
        let mut list = Vec::new();
        if !matches!(self.peek(), TokenKind::RParen) {
            list.push(self.expr()?);
            while self.eat(&TokenKind::Comma) {
                list.push(self.expr()?);
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(Expr::Function {
            name,
            distinct,
            args: FunctionArgs::List(list),
        })
    }
}

fn is_unsupported(kw: Keyword) -> bool {
    matches!(
        kw,
        Keyword::Union
            | Keyword::Intersect
            | Keyword::Except
            | Keyword::Case
            | Keyword::Exists
            | Keyword::Offset
            | Keyword::Cross
            | Keyword::Insert
            | Keyword::Update
            | Keyword::Delete
            | Keyword::Create
            | Keyword::Drop
            | Keyword::Alter
            | Keyword::With
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_query() {
        let q = parse("SELECT a FROM t").unwrap();
        assert_eq!(q, Query::simple(vec![SelectItem::expr(Expr::column(None, "a"))], "t"));
    }

    #[test]
    fn double_equals_is_a_syntax_error_at_its_offset() {
        let err = parse("SELECT a FROM t WHERE b == 1").unwrap_err();
        match err {
            SqlError::Syntax(e) => {
                assert_eq!(e.offset, 24);
                assert!(e.expected.contains('='));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dml_is_unsupported() {
        for sql in [
            "INSERT INTO t VALUES (1)",
            "UPDATE t SET a = 1",
            "DELETE FROM t",
            "CREATE TABLE t (a int)",
            "DROP TABLE t",
        ] {
            assert!(
                matches!(parse(sql), Err(SqlError::UnsupportedConstruct { offset: 0, .. })),
                "{sql}"
            );
        }
    }

    #[test]
    fn union_is_unsupported() {
        let err = parse("SELECT a FROM t UNION SELECT b FROM u").unwrap_err();
        assert!(matches!(err, SqlError::UnsupportedConstruct { offset: 16, .. }));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse("  "), Err(SqlError::Empty));
    }

    #[test]
    fn join_requires_on() {
        assert!(parse("SELECT a FROM t1 JOIN t2 WHERE x = 1").is_err());
    }

    #[test]
    fn trailing_semicolon_rejected() {
        assert!(parse("SELECT a FROM t;").is_err());
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let q = parse("SELECT a FROM t WHERE x = 1 OR y = 2 AND z = 3").unwrap();
        match q.where_clause.unwrap() {
            Expr::Binary { op: BinaryOp::Or, right, .. } => {
                assert!(matches!(*right, Expr::Binary { op: BinaryOp::And, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parenthesized_predicate_and_arithmetic() {
        let q = parse("SELECT a FROM t WHERE (x = 1 OR y = 2) AND (a + b) * 2 > 3").unwrap();
        let w = q.where_clause.unwrap();
        assert_eq!(w.conjuncts().len(), 2);
    }

    #[test]
    fn in_subquery_between_like_is_null() {
        let q = parse(
            "SELECT a FROM t WHERE x NOT IN (SELECT y FROM u) AND b BETWEEN 1 AND 2 \
             AND c NOT LIKE '%x%' AND d IS NOT NULL AND e IN (1, 2)",
        )
        .unwrap();
        let w = q.where_clause.unwrap();
        let atoms = w.conjuncts();
        assert!(matches!(atoms[0], Expr::InSubquery { negated: true, .. }));
        assert!(matches!(atoms[1], Expr::Between { negated: false, .. }));
        assert!(matches!(atoms[2], Expr::Like { negated: true, .. }));
        assert!(matches!(atoms[3], Expr::IsNull { negated: true, .. }));
        assert!(matches!(atoms[4], Expr::InList { .. }));
    }

    #[test]
    fn aliases_joins_and_derived_tables() {
        let q = parse(
            "select f.name as n from fund f left outer join mgr as m on f.mid = m.id \
             join (select id from x) d on d.id = f.id order by n desc limit 3",
        )
        .unwrap();
        assert_eq!(q.from, vec![TableRef::table("fund", Some("f"))]);
        assert_eq!(q.joins.len(), 2);
        assert_eq!(q.joins[0].kind, JoinKind::Left);
        assert!(matches!(q.joins[1].table, TableRef::Derived { .. }));
        assert_eq!(q.order_by[0].direction, Some(SortDirection::Desc));
        assert_eq!(q.limit, Some(3));
    }

    #[test]
    fn count_star_and_distinct() {
        let q = parse("SELECT COUNT(*), count(DISTINCT a) FROM t").unwrap();
        match &q.select[0] {
            SelectItem::Expr { expr: Expr::Function { name, args, .. }, .. } => {
                assert_eq!(name, "count");
                assert_eq!(*args, FunctionArgs::Star);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            &q.select[1],
            SelectItem::Expr { expr: Expr::Function { distinct: true, .. }, .. }
        ));
    }

    #[test]
    fn negative_limit_is_rejected() {
        assert!(parse("SELECT a FROM t LIMIT -1").is_err());
    }
}
