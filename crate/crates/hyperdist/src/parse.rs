//! A tiny expression language for series scalars.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('+' | '-') factor | atom ('^' power)?
//! atom   := number | 'eps' | '(' expr ')'
//! power  := integer | '(' integer '/' integer ')'
//! ```
//!
//! `eps` is the infinitesimal generator; `^(p/q)` rational powers apply to
//! single-term values only (the coefficient must be positive). Examples:
//! `"1/eps + 3"`, `"2*eps^2 - eps"`, `"eps^(3/2)"`.

use hyperdist_core::{ExponentQ, HyperReal, TruncationPolicy};
use thiserror::Error;

/// A parse or evaluation failure, with the byte offset it occurred at.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{message} (at offset {position})")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    policy: TruncationPolicy,
}

/// Parse and evaluate a scalar expression.
pub fn parse_scalar(text: &str, policy: TruncationPolicy) -> Result<HyperReal, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        policy,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(v)
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            position: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<HyperReal, ParseError> {
        let mut v = self.term()?;
        loop {
            if self.eat(b'+') {
                v = v.add(&self.term()?);
            } else if self.eat(b'-') {
                v = v.sub(&self.term()?);
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<HyperReal, ParseError> {
        let mut v = self.factor()?;
        loop {
            if self.eat(b'*') {
                v = v.mul(&self.factor()?);
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                let inv = rhs
                    .recip()
                    .map_err(|e| self.err(format!("division: {e}")))?;
                v = v.mul(&inv);
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> Result<HyperReal, ParseError> {
        if self.eat(b'-') {
            return Ok(self.factor()?.neg());
        }
        if self.eat(b'+') {
            return self.factor();
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return self.pow(base);
        }
        Ok(base)
    }

    fn pow(&mut self, base: HyperReal) -> Result<HyperReal, ParseError> {
        if self.eat(b'(') {
            let p = self.integer()?;
            if !self.eat(b'/') {
                return Err(self.err("expected '/' in rational power"));
            }
            let q = self.integer()?;
            if !self.eat(b')') {
                return Err(self.err("expected ')' after rational power"));
            }
            if q == 0 {
                return Err(self.err("zero denominator in power"));
            }
            return self.rational_pow(base, p, q);
        }
        let k = self.integer()?;
        if k >= 0 {
            Ok(base.pow_int(k as u32))
        } else {
            let inv = base
                .recip()
                .map_err(|e| self.err(format!("negative power: {e}")))?;
            Ok(inv.pow_int((-k) as u32))
        }
    }

    /// Rational powers are defined for single-term values with a positive
    /// coefficient: (c·ε^e)^(p/q) = c^(p/q)·ε^(e·p/q).
    fn rational_pow(&mut self, base: HyperReal, p: i64, q: i64) -> Result<HyperReal, ParseError> {
        let terms = base.terms();
        let (e, c) = match terms {
            [t] => *t,
            _ => return Err(self.err("rational powers need a single-term value")),
        };
        if c <= 0.0 {
            return Err(self.err("rational powers need a positive coefficient"));
        }
        let r = ExponentQ::new(p, q);
        let exp = ExponentQ::new(e.num() * p, e.den() * q);
        let coef = c.powf(r.as_f64());
        Ok(HyperReal::monomial(coef, exp, self.policy))
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let neg = self.eat(b'-');
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer"));
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: i64 = text.parse().map_err(|_| self.err("integer out of range"))?;
        Ok(if neg { -v } else { v })
    }

    fn atom(&mut self) -> Result<HyperReal, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.err("expected a number, 'eps', or '('")),
        }
    }

    fn number(&mut self) -> Result<HyperReal, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // Scientific notation: only consume 'e'/'E' when it is followed by
        // a digit (optionally signed) — otherwise it starts an identifier
        // such as `eps`.
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mut look = self.pos + 1;
            if look < self.src.len() && matches!(self.src[look], b'+' | b'-') {
                look += 1;
            }
            if look < self.src.len() && self.src[look].is_ascii_digit() {
                self.pos = look;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(format!("malformed number {text:?}")))?;
        Ok(HyperReal::from_real_with(v, self.policy))
    }

    fn ident(&mut self) -> Result<HyperReal, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "eps" => Ok(HyperReal::epsilon_with(self.policy)),
            other => Err(ParseError {
                message: format!("unknown identifier {other:?}"),
                position: start,
            }),
        }
    }
}
