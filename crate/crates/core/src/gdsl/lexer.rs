use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

impl Token {
    pub(crate) fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Comma => "`,`".into(),
            Token::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub offset: usize,
}

/// Splits `src` into tokens. Both ASCII `-` and U+2212 are minus signs.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let single = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            b',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(token) = single {
            out.push(Spanned { token, offset: i });
            i += 1;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if src[i..].starts_with('\u{2212}') {
            out.push(Spanned {
                token: Token::Minus,
                offset: i,
            });
            i += '\u{2212}'.len_utf8();
        } else if c.is_ascii_digit() {
            let start = i;
            i = scan_digits(bytes, i);
            if i < bytes.len() && bytes[i] == b'.' {
                let frac = scan_digits(bytes, i + 1);
                if frac == i + 1 {
                    return Err(ParseError::new(i + 1, ParseErrorKind::InvalidNumber(src[start..=i].into())));
                }
                i = frac;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                let end = scan_digits(bytes, j);
                if end == j {
                    return Err(ParseError::new(j, ParseErrorKind::InvalidNumber(src[start..j].into())));
                }
                i = end;
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(start, ParseErrorKind::InvalidNumber(text.into())))?;
            if !value.is_finite() {
                return Err(ParseError::new(start, ParseErrorKind::InvalidNumber(text.into())));
            }
            out.push(Spanned {
                token: Token::Number(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Spanned {
                token: Token::Ident(src[start..i].to_string()),
                offset: start,
            });
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError::new(i, ParseErrorKind::UnexpectedChar(ch)));
        }
    }
    out.push(Spanned {
        token: Token::End,
        offset: src.len(),
    });
    Ok(out)
}

fn scan_digits(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    i
}
