//! Recursive-descent parser for infix expressions.
//!
//! Grammar (`^` binds tighter than unary minus and is right associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | ('exp' | 'log') '(' expr ')' | '(' expr ')'
//! ```

use super::{ExprError, ExprNode, Lookup, SymbolSet};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value = lit
                .parse::<f64>()
                .map_err(|_| ExprError::Syntax { pos: start, message: format!("malformed number '{lit}'") })?;
            out.push((start, Token::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(text[start..i].to_string())));
        } else if "+-*/^".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Token::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Token::RParen));
            i += 1;
        } else {
            return Err(ExprError::Syntax { pos: i, message: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    symbols: &'a SymbolSet,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos: self.offset(), message: message.into() })
    }

    fn expr(&mut self) -> Result<ExprNode, ExprError> {
        let mut terms = vec![self.term()?];
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let t = self.term()?;
            terms.push(if op == '-' { ExprNode::neg(t) } else { t });
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { ExprNode::Sum(terms) })
    }

    fn term(&mut self) -> Result<ExprNode, ExprError> {
        let mut acc = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' {
                match acc {
                    ExprNode::Product(mut xs) => {
                        xs.push(rhs);
                        ExprNode::Product(xs)
                    }
                    other => ExprNode::Product(vec![other, rhs]),
                }
            } else {
                ExprNode::div(acc, rhs)
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ExprNode, ExprError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(ExprNode::neg(self.unary()?))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<ExprNode, ExprError> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(ExprNode::pow(base, exponent));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error("expected ')'"),
        }
    }

    fn atom(&mut self) -> Result<ExprNode, ExprError> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return self.error("unexpected end of input");
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                Ok(ExprNode::Const(v))
            }
            Token::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) if name == "exp" || name == "log" => {
                self.pos += 1;
                if self.peek() != Some(&Token::LParen) {
                    return self.error(format!("expected '(' after {name}"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(if name == "exp" { ExprNode::exp(arg) } else { ExprNode::log(arg) })
            }
            Token::Ident(name) => {
                self.pos += 1;
                match self.symbols.lookup(&name) {
                    Some(Lookup::Symbol(s)) => Ok(ExprNode::Var(s)),
                    Some(Lookup::Constant(c)) => Ok(ExprNode::Const(c)),
                    None => Err(ExprError::UndeclaredSymbol(name)),
                }
            }
            Token::Op(c) => self.error(format!("unexpected operator '{c}'")),
            Token::RParen => self.error("unexpected ')'"),
        }
    }
}

/// Parses `text` against the declared `symbols`.
pub fn parse(text: &str, symbols: &SymbolSet) -> Result<ExprNode, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, end: text.len(), symbols };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return p.error("trailing input");
    }
    Ok(e)
}
