use super::expr::{BinOp, Expr, Func, Var};
use super::lexer::{tokenize, Spanned, Token};
use super::{Context, ParseError, ParseErrorKind, MAX_DEPTH};

/// Recursive-descent parser for
///
/// ```text
/// expr   := term (("+" | "-") term)*
/// term   := factor (("*" | "/") factor)*
/// factor := ["-"] atom
/// atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
/// ```
pub(crate) struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    ctx: Context,
    src: &'a str,
    nesting: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str, ctx: Context) -> Result<Self, ParseError> {
        Ok(Self {
            tokens: tokenize(src)?,
            pos: 0,
            ctx,
            src,
            nesting: 0,
        })
    }

    pub(crate) fn parse(mut self) -> Result<Expr, ParseError> {
        if self.src.trim().is_empty() {
            return Err(ParseError::new(0, ParseErrorKind::Empty));
        }
        let expr = self.expr()?;
        if self.peek() != &Token::End {
            return Err(self.unexpected(&["`+`", "`-`", "`*`", "`/`", "end of input"]));
        }
        if expr.depth() > MAX_DEPTH {
            return Err(ParseError::new(0, ParseErrorKind::TooDeep(expr.depth())));
        }
        Ok(expr)
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError::new(
            self.offset(),
            ParseErrorKind::Unexpected {
                found: self.peek().describe(),
                expected: expected.to_vec(),
            },
        )
    }

    fn expect(&mut self, token: Token, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == token {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.nesting += 1;
        if self.nesting > MAX_DEPTH {
            return Err(ParseError::new(self.offset(), ParseErrorKind::TooDeep(self.nesting)));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.nesting -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.atom()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const ATOM: &[&str] = &["number", "identifier", "`(`", "`-`"];
        let start = self.offset();
        let token = self.peek().clone();
        if !matches!(token, Token::Number(_) | Token::LParen | Token::Ident(_)) {
            return Err(self.unexpected(ATOM));
        }
        self.bump();
        match token {
            Token::Number(v) => Ok(Expr::Number(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ParseError::new(start, ParseErrorKind::UnknownFunction(name.clone())))?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Token::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Token::RParen, "`)` or `,`")?;
                    if !func.accepts(args.len()) {
                        return Err(ParseError::new(
                            start,
                            ParseErrorKind::Arity {
                                func: func.name(),
                                got: args.len(),
                            },
                        ));
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    self.variable(&name, start).map(Expr::Var)
                }
            }
            _ => unreachable!("checked above"),
        }
    }

    fn variable(&self, name: &str, offset: usize) -> Result<Var, ParseError> {
        let unknown = || ParseError::new(offset, ParseErrorKind::UnknownIdentifier(name.to_string()));
        let indexed = |prefix: char| -> Option<usize> {
            let rest = name.strip_prefix(prefix)?;
            if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            rest.parse().ok()
        };
        match self.ctx {
            Context::Generator { dim } => {
                if name == "t" {
                    return Ok(Var::T);
                }
                if name == "y" {
                    return Ok(Var::Y);
                }
                if let Some(k) = indexed('z') {
                    if k > dim {
                        return Err(ParseError::new(
                            offset,
                            ParseErrorKind::IndexOutOfRange {
                                name: name.to_string(),
                                dim,
                            },
                        ));
                    }
                    return Ok(Var::Z(k - 1));
                }
                if name == "x" || indexed('x').is_some() {
                    return Err(ParseError::new(
                        offset,
                        ParseErrorKind::Forbidden {
                            name: name.to_string(),
                            context: "generator",
                        },
                    ));
                }
                Err(unknown())
            }
            Context::Claim { dim } => {
                if dim == 1 && name == "x" {
                    return Ok(Var::X(0));
                }
                if dim > 1 {
                    if let Some(k) = indexed('x') {
                        if k > dim {
                            return Err(ParseError::new(
                                offset,
                                ParseErrorKind::IndexOutOfRange {
                                    name: name.to_string(),
                                    dim,
                                },
                            ));
                        }
                        return Ok(Var::X(k - 1));
                    }
                }
                if name == "t" || name == "y" || indexed('z').is_some() {
                    return Err(ParseError::new(
                        offset,
                        ParseErrorKind::Forbidden {
                            name: name.to_string(),
                            context: "claim",
                        },
                    ));
                }
                Err(unknown())
            }
        }
    }
}
