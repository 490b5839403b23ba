//! Tokenizer for the SELECT dialect.
//!
//! The lexer runs in two modes. Strict mode is used by the parser and fails
//! on unterminated literals. Lenient mode never fails: repair passes use it to
//! look at malformed candidate text, so it also reports `==` as its own token
//! and marks an unterminated string instead of rejecting it.

use super::error::{SqlError, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Select,
    Distinct,
    From,
    Where,
    Group,
    By,
    Having,
    Order,
    Asc,
    Desc,
    Limit,
    Join,
    Inner,
    Left,
    Right,
    Full,
    Outer,
    On,
    As,
    And,
    Or,
    Not,
    In,
    Between,
    Like,
    Is,
    Null,
    // Recognized only so they can be rejected with a precise error.
    Union,
    Intersect,
    Except,
    Case,
    Exists,
    Offset,
    Cross,
    Insert,
    Update,
    Delete,
    Create,
    Drop,
    Alter,
    With,
}

impl Keyword {
    pub fn from_word(word: &str) -> Option<Self> {
        let kw = match word.to_ascii_lowercase().as_str() {
            "select" => Self::Select,
            "distinct" => Self::Distinct,
            "from" => Self::From,
            "where" => Self::Where,
            "group" => Self::Group,
            "by" => Self::By,
            "having" => Self::Having,
            "order" => Self::Order,
            "asc" => Self::Asc,
            "desc" => Self::Desc,
            "limit" => Self::Limit,
            "join" => Self::Join,
            "inner" => Self::Inner,
            "left" => Self::Left,
            "right" => Self::Right,
            "full" => Self::Full,
            "outer" => Self::Outer,
            "on" => Self::On,
            "as" => Self::As,
            "and" => Self::And,
            "or" => Self::Or,
            "not" => Self::Not,
            "in" => Self::In,
            "between" => Self::Between,
            "like" => Self::Like,
            "is" => Self::Is,
            "null" => Self::Null,
            "union" => Self::Union,
            "intersect" => Self::Intersect,
            "except" => Self::Except,
            "case" => Self::Case,
            "exists" => Self::Exists,
            "offset" => Self::Offset,
            "cross" => Self::Cross,
            "insert" => Self::Insert,
            "update" => Self::Update,
            "delete" => Self::Delete,
            "create" => Self::Create,
            "drop" => Self::Drop,
            "alter" => Self::Alter,
            "with" => Self::With,
            _ => return None,
        };
        Some(kw)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Select => "SELECT",
            Self::Distinct => "DISTINCT",
            Self::From => "FROM",
            Self::Where => "WHERE",
            Self::Group => "GROUP",
            Self::By => "BY",
            Self::Having => "HAVING",
            Self::Order => "ORDER",
            Self::Asc => "ASC",
            Self::Desc => "DESC",
            Self::Limit => "LIMIT",
            Self::Join => "JOIN",
            Self::Inner => "INNER",
            Self::Left => "LEFT",
            Self::Right => "RIGHT",
            Self::Full => "FULL",
            Self::Outer => "OUTER",
            Self::On => "ON",
            Self::As => "AS",
            Self::And => "AND",
            Self::Or => "OR",
            Self::Not => "NOT",
            Self::In => "IN",
            Self::Between => "BETWEEN",
            Self::Like => "LIKE",
            Self::Is => "IS",
            Self::Null => "NULL",
            Self::Union => "UNION",
            Self::Intersect => "INTERSECT",
            Self::Except => "EXCEPT",
            Self::Case => "CASE",
            Self::Exists => "EXISTS",
            Self::Offset => "OFFSET",
            Self::Cross => "CROSS",
            Self::Insert => "INSERT",
            Self::Update => "UPDATE",
            Self::Delete => "DELETE",
            Self::Create => "CREATE",
            Self::Drop => "DROP",
            Self::Alter => "ALTER",
            Self::With => "WITH",
        }
    }

    /// Keywords that start a clause; used by repair heuristics to find the
    /// end of a malformed fragment.
    pub fn starts_clause(self) -> bool {
        matches!(
            self,
            Self::From
                | Self::Where
                | Self::Group
                | Self::Having
                | Self::Order
                | Self::Limit
                | Self::Join
                | Self::Inner
                | Self::Left
                | Self::Right
                | Self::Full
                | Self::On
                | Self::And
                | Self::Or
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident { value: String, quoted: bool },
    Number(String),
    Str(String),
    /// Lenient mode only: a string literal that runs to end of input.
    UnterminatedStr(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    /// `==`, which the grammar rejects.
    EqEq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Semicolon,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            Self::Keyword(k) => k.as_str().to_string(),
            Self::Ident { value, .. } => format!("identifier `{value}`"),
            Self::Number(n) => format!("number {n}"),
            Self::Str(_) | Self::UnterminatedStr(_) => "string literal".to_string(),
            Self::Comma => "`,`".into(),
            Self::Dot => "`.`".into(),
            Self::LParen => "`(`".into(),
            Self::RParen => "`)`".into(),
            Self::Star => "`*`".into(),
            Self::Plus => "`+`".into(),
            Self::Minus => "`-`".into(),
            Self::Slash => "`/`".into(),
            Self::Eq => "`=`".into(),
            Self::EqEq => "`==`".into(),
            Self::NotEq => "`!=`".into(),
            Self::Lt => "`<`".into(),
            Self::LtEq => "`<=`".into(),
            Self::Gt => "`>`".into(),
            Self::GtEq => "`>=`".into(),
            Self::Semicolon => "`;`".into(),
            Self::Eof => "end of input".into(),
        }
    }

    pub fn is_keyword(&self, kw: Keyword) -> bool {
        matches!(self, Self::Keyword(k) if *k == kw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, SqlError> {
    Lexer::new(input, false).run()
}

/// Tokenizes without ever failing. Unknown characters are skipped.
pub fn tokenize_lenient(input: &str) -> Vec<Token> {
    Lexer::new(input, true)
        .run()
        .expect("lenient lexing is infallible")
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    lenient: bool,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, lenient: bool) -> Self {
        Self {
            src,
            pos: 0,
            lenient,
            tokens: Vec::new(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(Token {
            kind,
            start,
            end: self.pos,
        });
    }

    fn error(&self, offset: usize, expected: &str, found: &str) -> SqlError {
        SqlError::Syntax(SyntaxError {
            offset,
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }

    fn run(mut self) -> Result<Vec<Token>, SqlError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '-' && self.peek_at(1) == Some('-') {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
                continue;
            }
            if c == '/' && self.peek_at(1) == Some('*') {
                self.bump();
                self.bump();
                let mut closed = false;
                while let Some(c) = self.bump() {
                    if c == '*' && self.peek() == Some('/') {
                        self.bump();
                        closed = true;
                        break;
                    }
                }
                if !closed && !self.lenient {
                    return Err(self.error(start, "`*/`", "end of input"));
                }
                continue;
            }
            if is_ident_start(c) {
                while self.peek().is_some_and(is_ident_char) {
                    self.bump();
                }
                let word = &self.src[start..self.pos];
                let kind = match Keyword::from_word(word) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Ident {
                        value: word.to_string(),
                        quoted: false,
                    },
                };
                self.push(kind, start);
                continue;
            }
            if c.is_ascii_digit() {
                self.lex_number(start);
                continue;
            }
            match c {
                '\'' | '"' => {
                    self.lex_string(c, start)?;
                }
                '`' => {
                    self.lex_backtick(start)?;
                }
                _ => {
                    self.bump();
                    let kind = match c {
                        ',' => TokenKind::Comma,
                        '.' => TokenKind::Dot,
                        '(' => TokenKind::LParen,
                        ')' => TokenKind::RParen,
                        '*' => TokenKind::Star,
                        '+' => TokenKind::Plus,
                        '-' => TokenKind::Minus,
                        '/' => TokenKind::Slash,
                        ';' => TokenKind::Semicolon,
                        '=' => {
                            if self.peek() == Some('=') {
                                self.bump();
                                TokenKind::EqEq
                            } else {
                                TokenKind::Eq
                            }
                        }
                        '!' if self.peek() == Some('=') => {
                            self.bump();
                            TokenKind::NotEq
                        }
                        '<' => match self.peek() {
                            Some('=') => {
                                self.bump();
                                TokenKind::LtEq
                            }
                            Some('>') => {
                                self.bump();
                                TokenKind::NotEq
                            }
                            _ => TokenKind::Lt,
                        },
                        '>' => {
                            if self.peek() == Some('=') {
                                self.bump();
                                TokenKind::GtEq
                            } else {
                                TokenKind::Gt
                            }
                        }
                        other => {
                            if self.lenient {
                                continue;
                            }
                            return Err(self.error(start, "a token", &format!("`{other}`")));
                        }
                    };
                    self.push(kind, start);
                }
            }
        }
        let end = self.src.len();
        self.tokens.push(Token {
            kind: TokenKind::Eof,
            start: end,
            end,
        });
        Ok(self.tokens)
    }

    fn lex_number(&mut self, start: usize) {
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = self.src[start..self.pos].to_string();
        self.push(TokenKind::Number(text), start);
    }

    fn lex_string(&mut self, quote: char, start: usize) -> Result<(), SqlError> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => {
                    if self.peek() == Some(quote) {
                        self.bump();
                        value.push(quote);
                    } else {
                        self.push(TokenKind::Str(value), start);
                        return Ok(());
                    }
                }
                Some(c) => value.push(c),
                None => {
                    if self.lenient {
                        self.push(TokenKind::UnterminatedStr(value), start);
                        return Ok(());
                    }
                    return Err(self.error(start, &format!("closing `{quote}`"), "end of input"));
                }
            }
        }
    }

    fn lex_backtick(&mut self, start: usize) -> Result<(), SqlError> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                Some('`') => {
                    if self.peek() == Some('`') {
                        self.bump();
                        value.push('`');
                    } else {
                        break;
                    }
                }
                Some(c) => value.push(c),
                None => {
                    if self.lenient {
                        break;
                    }
                    return Err(self.error(start, "closing backtick", "end of input"));
                }
            }
        }
        if value.is_empty() && !self.lenient {
            return Err(self.error(start, "identifier", "empty quoted identifier"));
        }
        self.push(TokenKind::Ident { value, quoted: true }, start);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(sql: &str) -> Vec<TokenKind> {
        tokenize(sql).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(
            kinds("select FrOm"),
            vec![
                TokenKind::Keyword(Keyword::Select),
                TokenKind::Keyword(Keyword::From),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn both_quote_styles_are_strings() {
        assert_eq!(
            kinds(r#"'it''s' "a""b""#),
            vec![
                TokenKind::Str("it's".into()),
                TokenKind::Str("a\"b".into()),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn double_equals_is_its_own_token() {
        let toks = tokenize("b == 1").unwrap();
        assert_eq!(toks[1].kind, TokenKind::EqEq);
        assert_eq!((toks[1].start, toks[1].end), (2, 4));
    }

    #[test]
    fn not_equal_spellings_agree() {
        assert_eq!(kinds("<>")[0], TokenKind::NotEq);
        assert_eq!(kinds("!=")[0], TokenKind::NotEq);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            kinds("a -- trailing\n/* block */ b"),
            vec![
                TokenKind::Ident { value: "a".into(), quoted: false },
                TokenKind::Ident { value: "b".into(), quoted: false },
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn unterminated_string_strict_vs_lenient() {
        assert!(tokenize("'abc").is_err());
        let toks = tokenize_lenient("'abc");
        assert_eq!(toks[0].kind, TokenKind::UnterminatedStr("abc".into()));
    }

    #[test]
    fn unicode_identifiers() {
        assert_eq!(
            kinds("基金名称")[0],
            TokenKind::Ident { value: "基金名称".into(), quoted: false }
        );
    }

    #[test]
    fn numbers_with_fraction() {
        assert_eq!(kinds("1.50")[0], TokenKind::Number("1.50".into()));
        // `1.` followed by non-digit stays an integer then a dot
        assert_eq!(kinds("1.a")[0], TokenKind::Number("1".into()));
    }
}
