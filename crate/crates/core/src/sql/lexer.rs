use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn describe(&self, src: &str) -> String {
        format!("{:?}", &src[self.start..self.end])
    }
}

const PUNCT: &str = "*.,(){}[]:";

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().expect("i is a char boundary");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if PUNCT.contains(c) {
            i += 1;
            out.push(Token { tok: Tok::Punct(c), start, end: i });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), start, end: i });
        } else if c == '-' || c.is_ascii_digit() {
            i = scan_number(bytes, i);
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| err(start, "number", format!("{text:?}")))?;
            if !v.is_finite() {
                return Err(err(start, "finite number", format!("{text:?}")));
            }
            out.push(Token { tok: Tok::Number(v), start, end: i });
        } else if c == '"' {
            i = scan_string(src, i)?;
            let s: String = serde_json::from_str(&src[start..i])
                .map_err(|e| err(start, "string literal", format!("invalid escape ({e})")))?;
            out.push(Token { tok: Tok::Str(s), start, end: i });
        } else {
            return Err(err(start, "token", format!("{c:?}")));
        }
    }
    Ok(out)
}

fn err(offset: usize, expected: &str, found: String) -> ParseError {
    ParseError { offset, expected: vec![expected.to_string()], found }
}

fn digits(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    i
}

/// `-? digits (. digits)? ([eE] [+-]? digits)?`; the caller parses the slice.
fn scan_number(b: &[u8], mut i: usize) -> usize {
    if b[i] == b'-' {
        i += 1;
    }
    i = digits(b, i);
    if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
        i = digits(b, i + 1);
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            i = digits(b, j);
        }
    }
    i
}

fn scan_string(src: &str, start: usize) -> Result<usize, ParseError> {
    let b = src.as_bytes();
    let mut i = start + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'"' => return Ok(i + 1),
            _ => i += 1,
        }
    }
    Err(err(start, "closing quote", "unterminated string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_offsets() {
        let t = tokenize("SELECT * x.y  -1.5e2 \"a\\\"b\" é").unwrap_err();
        assert_eq!(t.offset, 28);
        let t = tokenize("ab 12 -0.5 1e-3 \"q\\n\"").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("ab".into()));
        assert_eq!(t[1].tok, Tok::Number(12.0));
        assert_eq!(t[2].tok, Tok::Number(-0.5));
        assert_eq!(t[3].tok, Tok::Number(1e-3));
        assert_eq!(t[4].tok, Tok::Str("q\n".into()));
        assert_eq!((t[2].start, t[2].end), (6, 10));
        assert_eq!(tokenize("1e999").unwrap_err().offset, 0);
        assert_eq!(tokenize("  \"abc").unwrap_err().offset, 2);
        assert_eq!(tokenize("x -").unwrap_err().offset, 2);
    }
}
