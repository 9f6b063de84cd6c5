use super::ast::{LiteralValue, Predicate, QueryAst, QueryLiteral, WeightsSpec};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Keywords that cannot be used as identifiers.
const RESERVED: &[&str] = &["SELECT", "FROM", "WHERE", "IN", "ODBRANGE", "ODBKNN", "LEARNED"];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

pub fn parse(src: &str) -> Result<QueryAst, ParseError> {
    let mut p = Parser { src, toks: tokenize(src)?, pos: 0 };
    let ast = p.statement()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.clone(), &["end of statement"]));
    }
    Ok(ast)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn error_at(&self, t: Token, expected: &[&str]) -> ParseError {
        ParseError {
            offset: t.start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.describe(self.src),
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        match self.peek() {
            Some(t) => self.error_at(t.clone(), expected),
            None => ParseError {
                offset: self.src.len(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
                found: "end of input".into(),
            },
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&[kw])),
        }
    }

    fn punct(&mut self, c: char, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Punct(p), .. }) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(p), .. }) if *p == c)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn number(&mut self) -> Result<(f64, Token), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Number(v), .. }) => {
                let v = *v;
                Ok((v, self.bump()))
            }
            _ => Err(self.error(&["number"])),
        }
    }

    fn statement(&mut self) -> Result<QueryAst, ParseError> {
        self.keyword("SELECT")?;
        self.punct('*', "*")?;
        self.keyword("FROM")?;
        let table = self.ident()?;
        self.keyword("WHERE")?;
        let qualifier = self.ident()?;
        self.punct('.', ".")?;
        let column = self.ident()?;
        self.keyword("IN")?;
        let range = match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case("ODBRANGE") => true,
            Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case("ODBKNN") => false,
            _ => return Err(self.error(&["ODBRANGE", "ODBKNN"])),
        };
        self.pos += 1;
        self.punct('(', "(")?;
        let literal = self.literal()?;
        self.punct(',', ",")?;
        let weights = self.weights()?;
        self.punct(',', ",")?;
        let (v, t) = self.number()?;
        let predicate = if range {
            if v < 0.0 {
                return Err(self.error_at(t, &["non-negative radius"]));
            }
            Predicate::Range { literal, weights, r: v }
        } else {
            if !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                return Err(self.error_at(t, &["positive integer k"]));
            }
            Predicate::Knn { literal, weights, k: v as usize }
        };
        self.punct(')', ")")?;
        Ok(QueryAst { table, qualifier, column, predicate })
    }

    fn literal(&mut self) -> Result<QueryLiteral, ParseError> {
        self.punct('{', "{")?;
        let mut entries = Vec::new();
        if !self.at_punct('}') {
            loop {
                let key = match self.peek() {
                    Some(Token { tok: Tok::Str(s), .. }) => {
                        let s = s.clone();
                        self.pos += 1;
                        s
                    }
                    _ => return Err(self.error(&["space name string"])),
                };
                self.punct(':', ":")?;
                entries.push((key, self.value()?));
                if self.at_punct(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.punct('}', "}")?;
        Ok(QueryLiteral { entries })
    }

    fn value(&mut self) -> Result<LiteralValue, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(LiteralValue::Text(s))
            }
            Some(Token { tok: Tok::Number(v), .. }) => {
                let v = *v;
                self.pos += 1;
                Ok(LiteralValue::Number(v))
            }
            Some(Token { tok: Tok::Punct('['), .. }) => Ok(LiteralValue::Array(self.number_list()?)),
            _ => Err(self.error(&["string", "number", "["])),
        }
    }

    fn number_list(&mut self) -> Result<Vec<f64>, ParseError> {
        self.punct('[', "[")?;
        let mut out = Vec::new();
        if !self.at_punct(']') {
            loop {
                out.push(self.number()?.0);
                if self.at_punct(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.punct(']', "]")?;
        Ok(out)
    }

    fn weights(&mut self) -> Result<WeightsSpec, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if s.eq_ignore_ascii_case("LEARNED") => {
                self.pos += 1;
                Ok(WeightsSpec::Learned)
            }
            Some(Token { tok: Tok::Punct('['), .. }) => Ok(WeightsSpec::Explicit(self.number_list()?)),
            _ => Err(self.error(&["[", "LEARNED"])),
        }
    }
}
