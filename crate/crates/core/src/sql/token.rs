//! SQL tokenizer. Keywords are recognized case-insensitively, and the
//! multi-word keywords `GROUP BY` / `ORDER BY` lex as single tokens.

use serde::{Deserialize, Serialize};

use crate::error::SqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Keyword {
    Select,
    Distinct,
    All,
    From,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Asc,
    Desc,
    Limit,
    Offset,
    Join,
    Left,
    Right,
    Full,
    Outer,
    Inner,
    Cross,
    On,
    Using,
    As,
    And,
    Or,
    Not,
    In,
    Like,
    Between,
    Is,
    Null,
    Exists,
    Union,
    Intersect,
    Except,
}

impl Keyword {
    fn from_word(word: &str) -> Option<Keyword> {
        let upper = word.to_ascii_uppercase();
        Some(match upper.as_str() {
            "SELECT" => Keyword::Select,
            "DISTINCT" => Keyword::Distinct,
            "ALL" => Keyword::All,
            "FROM" => Keyword::From,
            "WHERE" => Keyword::Where,
            "HAVING" => Keyword::Having,
            "ASC" => Keyword::Asc,
            "DESC" => Keyword::Desc,
            "LIMIT" => Keyword::Limit,
            "OFFSET" => Keyword::Offset,
            "JOIN" => Keyword::Join,
            "LEFT" => Keyword::Left,
            "RIGHT" => Keyword::Right,
            "FULL" => Keyword::Full,
            "OUTER" => Keyword::Outer,
            "INNER" => Keyword::Inner,
            "CROSS" => Keyword::Cross,
            "ON" => Keyword::On,
            "USING" => Keyword::Using,
            "AS" => Keyword::As,
            "AND" => Keyword::And,
            "OR" => Keyword::Or,
            "NOT" => Keyword::Not,
            "IN" => Keyword::In,
            "LIKE" => Keyword::Like,
            "BETWEEN" => Keyword::Between,
            "IS" => Keyword::Is,
            "NULL" => Keyword::Null,
            "EXISTS" => Keyword::Exists,
            "UNION" => Keyword::Union,
            "INTERSECT" => Keyword::Intersect,
            "EXCEPT" => Keyword::Except,
            _ => return None,
        })
    }

    /// Canonical lowercase spelling, used by set-match normalization.
    pub fn canonical(self) -> &'static str {
        match self {
            Keyword::Select => "select",
            Keyword::Distinct => "distinct",
            Keyword::All => "all",
            Keyword::From => "from",
            Keyword::Where => "where",
            Keyword::GroupBy => "group by",
            Keyword::Having => "having",
            Keyword::OrderBy => "order by",
            Keyword::Asc => "asc",
            Keyword::Desc => "desc",
            Keyword::Limit => "limit",
            Keyword::Offset => "offset",
            Keyword::Join => "join",
            Keyword::Left => "left",
            Keyword::Right => "right",
            Keyword::Full => "full",
            Keyword::Outer => "outer",
            Keyword::Inner => "inner",
            Keyword::Cross => "cross",
            Keyword::On => "on",
            Keyword::Using => "using",
            Keyword::As => "as",
            Keyword::And => "and",
            Keyword::Or => "or",
            Keyword::Not => "not",
            Keyword::In => "in",
            Keyword::Like => "like",
            Keyword::Between => "between",
            Keyword::Is => "is",
            Keyword::Null => "null",
            Keyword::Exists => "exists",
            Keyword::Union => "union",
            Keyword::Intersect => "intersect",
            Keyword::Except => "except",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    Number,
    StringLit,
    Operator,
    Punct,
}

impl TokenKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            TokenKind::Keyword(_) => "kw",
            TokenKind::Identifier => "id",
            TokenKind::Number => "num",
            TokenKind::StringLit => "str",
            TokenKind::Operator => "op",
            TokenKind::Punct => "punct",
        }
    }
}

/// One lexed token; `text` is the verbatim source slice and `span` its byte
/// offsets `(start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlToken {
    pub text: String,
    pub kind: TokenKind,
    pub span: (usize, usize),
}

impl SqlToken {
    pub fn keyword(&self) -> Option<Keyword> {
        match self.kind {
            TokenKind::Keyword(kw) => Some(kw),
            _ => None,
        }
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == text
    }

    pub fn is_operator(&self, text: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == text
    }

    /// Lowercased form used for dedup keys and set-match comparison; string
    /// literals keep their case.
    pub fn normalized_text(&self) -> String {
        match self.kind {
            TokenKind::Keyword(kw) => kw.canonical().to_string(),
            TokenKind::StringLit => self.text.clone(),
            _ => self.text.to_ascii_lowercase(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_whitespace(&mut self) {
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn take_word(&mut self) -> (usize, usize) {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        (start, self.pos)
    }

    fn token(&self, kind: TokenKind, start: usize, end: usize) -> SqlToken {
        SqlToken { text: self.src[start..end].to_string(), kind, span: (start, end) }
    }
}

/// Splits `sql` into tokens. Fails with a lex error on an unterminated
/// string/quoted identifier or an illegal character.
pub fn tokenize(sql: &str) -> Result<Vec<SqlToken>, SqlError> {
    let mut lx = Lexer::new(sql);
    let mut tokens = Vec::new();
    loop {
        lx.skip_whitespace();
        let Some(b) = lx.peek() else { break };
        let start = lx.pos;
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let (s, e) = lx.take_word();
                let word = &lx.src[s..e];
                // GROUP / ORDER immediately followed by BY lex as one token.
                let upper = word.to_ascii_uppercase();
                if upper == "GROUP" || upper == "ORDER" {
                    let mut ahead = Lexer { src: lx.src, bytes: lx.bytes, pos: lx.pos };
                    ahead.skip_whitespace();
                    if ahead.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                        let (bs, be) = ahead.take_word();
                        if lx.src[bs..be].eq_ignore_ascii_case("BY") {
                            lx.pos = be;
                            let kw = if upper == "GROUP" {
                                Keyword::GroupBy
                            } else {
                                Keyword::OrderBy
                            };
                            tokens.push(lx.token(TokenKind::Keyword(kw), s, be));
                            continue;
                        }
                    }
                }
                let kind = match Keyword::from_word(word) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Identifier,
                };
                tokens.push(lx.token(kind, s, e));
            }
            b'0'..=b'9' => {
                lx.pos += 1;
                while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                    lx.pos += 1;
                }
                if lx.peek() == Some(b'.') {
                    lx.pos += 1;
                    while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                        lx.pos += 1;
                    }
                }
                if lx.peek().is_some_and(|c| c == b'e' || c == b'E') {
                    let save = lx.pos;
                    lx.pos += 1;
                    if lx.peek().is_some_and(|c| c == b'+' || c == b'-') {
                        lx.pos += 1;
                    }
                    if lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                        while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                            lx.pos += 1;
                        }
                    } else {
                        lx.pos = save;
                    }
                }
                tokens.push(lx.token(TokenKind::Number, start, lx.pos));
            }
            b'.' if lx.bytes.get(lx.pos + 1).is_some_and(|c| c.is_ascii_digit()) => {
                lx.pos += 1;
                while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                    lx.pos += 1;
                }
                tokens.push(lx.token(TokenKind::Number, start, lx.pos));
            }
            b'\'' => {
                lx.pos += 1;
                loop {
                    match lx.peek() {
                        Some(b'\'') => {
                            lx.pos += 1;
                            if lx.peek() == Some(b'\'') {
                                lx.pos += 1; // escaped quote
                            } else {
                                break;
                            }
                        }
                        Some(_) => lx.pos += 1,
                        None => {
                            return Err(SqlError::Lex {
                                position: start,
                                message: "unterminated string literal".into(),
                            })
                        }
                    }
                }
                tokens.push(lx.token(TokenKind::StringLit, start, lx.pos));
            }
            b'"' | b'`' => {
                let quote = b;
                lx.pos += 1;
                loop {
                    match lx.peek() {
                        Some(c) if c == quote => {
                            lx.pos += 1;
                            break;
                        }
                        Some(_) => lx.pos += 1,
                        None => {
                            return Err(SqlError::Lex {
                                position: start,
                                message: "unterminated quoted identifier".into(),
                            })
                        }
                    }
                }
                tokens.push(lx.token(TokenKind::Identifier, start, lx.pos));
            }
            b'[' => {
                lx.pos += 1;
                loop {
                    match lx.peek() {
                        Some(b']') => {
                            lx.pos += 1;
                            break;
                        }
                        Some(_) => lx.pos += 1,
                        None => {
                            return Err(SqlError::Lex {
                                position: start,
                                message: "unterminated bracketed identifier".into(),
                            })
                        }
                    }
                }
                tokens.push(lx.token(TokenKind::Identifier, start, lx.pos));
            }
            b'<' => {
                lx.pos += 1;
                if matches!(lx.peek(), Some(b'=') | Some(b'>')) {
                    lx.pos += 1;
                }
                tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
            }
            b'>' => {
                lx.pos += 1;
                if lx.peek() == Some(b'=') {
                    lx.pos += 1;
                }
                tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
            }
            b'=' => {
                lx.pos += 1;
                if lx.peek() == Some(b'=') {
                    lx.pos += 1;
                }
                tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
            }
            b'!' => {
                lx.pos += 1;
                if lx.peek() == Some(b'=') {
                    lx.pos += 1;
                    tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
                } else {
                    return Err(SqlError::Lex {
                        position: start,
                        message: "expected '=' after '!'".into(),
                    });
                }
            }
            b'|' => {
                lx.pos += 1;
                if lx.peek() == Some(b'|') {
                    lx.pos += 1;
                    tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
                } else {
                    return Err(SqlError::Lex {
                        position: start,
                        message: "expected '|' after '|'".into(),
                    });
                }
            }
            b'+' | b'-' | b'*' | b'/' | b'%' => {
                lx.pos += 1;
                tokens.push(lx.token(TokenKind::Operator, start, lx.pos));
            }
            b'(' | b')' | b',' | b'.' | b';' => {
                lx.pos += 1;
                tokens.push(lx.token(TokenKind::Punct, start, lx.pos));
            }
            _ => {
                return Err(SqlError::Lex {
                    position: start,
                    message: format!("illegal character {:?}", sql[start..].chars().next()),
                })
            }
        }
    }
    Ok(tokens)
}

/// Joins token texts with single spaces. Re-tokenizing the result yields the
/// same token sequence.
pub fn render_tokens(tokens: &[SqlToken]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_one() {
        let toks = tokenize("SELECT 1").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].kind, TokenKind::Keyword(Keyword::Select));
        assert_eq!(toks[1].kind, TokenKind::Number);
    }

    #[test]
    fn group_by_is_one_token() {
        let toks = tokenize("GROUP BY x").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].kind, TokenKind::Keyword(Keyword::GroupBy));
        assert_eq!(toks[0].text, "GROUP BY");
        assert_eq!(toks[1].text, "x");
    }

    #[test]
    fn order_by_case_and_spacing() {
        let toks = tokenize("order   By year").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].kind, TokenKind::Keyword(Keyword::OrderBy));
        assert_eq!(toks[0].text, "order   By");
    }

    #[test]
    fn count_query_has_13_tokens_and_round_trips() {
        let sql = "SELECT COUNT(*) FROM head WHERE head.age > 56";
        let toks = tokenize(sql).unwrap();
        assert_eq!(toks.len(), 13);
        let rendered = render_tokens(&toks);
        let again = tokenize(&rendered).unwrap();
        let texts: Vec<_> = toks.iter().map(|t| (&t.text, t.kind)).collect();
        let texts2: Vec<_> = again.iter().map(|t| (&t.text, t.kind)).collect();
        assert_eq!(texts, texts2);
    }

    #[test]
    fn group_not_followed_by_by_is_identifier() {
        let toks = tokenize("SELECT grp FROM x GROUP other").unwrap();
        assert!(toks.iter().any(|t| t.text == "GROUP" && t.kind == TokenKind::Identifier));
    }

    #[test]
    fn string_escape_and_unterminated() {
        let toks = tokenize("name = 'it''s'").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[2].text, "'it''s'");
        let err = tokenize("'open").unwrap_err();
        assert!(matches!(err, SqlError::Lex { position: 0, .. }));
    }

    #[test]
    fn spans_are_ordered_and_disjoint() {
        let toks = tokenize("SELECT a , b FROM t2 WHERE a >= 1.5").unwrap();
        for pair in toks.windows(2) {
            assert!(pair[0].span.1 <= pair[1].span.0);
        }
        for t in &toks {
            assert_eq!(&t.text, &"SELECT a , b FROM t2 WHERE a >= 1.5"[t.span.0..t.span.1]);
        }
    }
}
