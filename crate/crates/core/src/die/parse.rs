//! Text formats for dice.
//!
//! Two grammars are accepted, whitespace-insensitive:
//!
//! * outcome lists: `-3:1/2, 1:1/4, 5:1/4` (a bare integer probability such as `0:1` is allowed);
//! * PGF strings: `(2z^-3+z+z^5)/4`, i.e. `(<term> (+ <term>)*)/<denominator>` with
//!   `term := [coef][*][z[^exp]]` and exponents optionally parenthesised (`z^(-3)`).

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::die::Die;
use crate::error::{Error, Result};

pub fn parse_die(spec: &str) -> Result<Die> {
    let compact: Vec<(usize, u8)> = spec
        .bytes()
        .enumerate()
        .filter(|(_, b)| !b.is_ascii_whitespace())
        .collect();
    if compact.is_empty() {
        return Err(Error::Parse { pos: 0, msg: "empty die specification".into() });
    }
    let mut cur = Cursor { src: &compact, at: 0, end_pos: spec.len() };
    let outcomes = if compact.iter().any(|&(_, b)| b == b'z' || b == b'Z') {
        cur.pgf()?
    } else {
        cur.outcome_list()?
    };
    Die::new(outcomes)
}

struct Cursor<'a> {
    src: &'a [(usize, u8)],
    at: usize,
    end_pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).map(|&(_, b)| b)
    }

    fn pos(&self) -> usize {
        self.src.get(self.at).map_or(self.end_pos, |&(p, _)| p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.eat(b) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", b as char))
        }
    }

    fn done(&self) -> bool {
        self.at >= self.src.len()
    }

    fn digits(&mut self) -> Option<BigInt> {
        let start = self.at;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.at += 1;
        }
        if self.at == start {
            return None;
        }
        let text: String = self.src[start..self.at].iter().map(|&(_, b)| b as char).collect();
        text.parse().ok()
    }

    fn signed_integer(&mut self) -> Result<BigInt> {
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        match self.digits() {
            Some(v) if neg => Ok(-v),
            Some(v) => Ok(v),
            None => self.err("expected an integer"),
        }
    }

    fn small_integer(&mut self) -> Result<i64> {
        let pos = self.pos();
        let v = self.signed_integer()?;
        i64::try_from(v).map_err(|_| Error::Parse { pos, msg: "integer out of range".into() })
    }

    fn rational(&mut self) -> Result<BigRational> {
        let num = self.signed_integer()?;
        let den = if self.eat(b'/') {
            match self.digits() {
                Some(d) => d,
                None => return self.err("expected a denominator"),
            }
        } else {
            BigInt::from(1)
        };
        if den == BigInt::from(0) {
            return self.err("zero denominator");
        }
        Ok(BigRational::new(num, den))
    }

    fn outcome_list(&mut self) -> Result<Vec<(i64, BigRational)>> {
        let mut out = Vec::new();
        loop {
            let value = self.small_integer()?;
            self.expect(b':')?;
            let p = self.rational()?;
            out.push((value, p));
            if self.done() {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn pgf(&mut self) -> Result<Vec<(i64, BigRational)>> {
        let parenthesised = self.eat(b'(');
        let mut terms: Vec<(i64, BigInt)> = Vec::new();
        loop {
            terms.push(self.pgf_term()?);
            if !self.eat(b'+') {
                break;
            }
        }
        if parenthesised {
            self.expect(b')')?;
        }
        let den = if self.eat(b'/') {
            match self.digits() {
                Some(d) if d > BigInt::from(0) => d,
                _ => return self.err("expected a positive denominator"),
            }
        } else {
            BigInt::from(1)
        };
        if !self.done() {
            return self.err("unexpected trailing input");
        }
        Ok(terms
            .into_iter()
            .map(|(e, c)| (e, BigRational::new(c, den.clone())))
            .collect())
    }

    fn pgf_term(&mut self) -> Result<(i64, BigInt)> {
        let start = self.pos();
        let coef = self.digits();
        let has_z = if coef.is_some() && self.eat(b'*') {
            if !(self.eat(b'z') || self.eat(b'Z')) {
                return self.err("expected 'z' after '*'");
            }
            true
        } else {
            self.eat(b'z') || self.eat(b'Z')
        };
        if coef.is_none() && !has_z {
            return self.err("expected a coefficient or 'z'");
        }
        let exp = if has_z {
            if self.eat(b'^') {
                if self.eat(b'(') {
                    let e = self.small_integer()?;
                    self.expect(b')')?;
                    e
                } else {
                    self.small_integer()?
                }
            } else {
                1
            }
        } else {
            0
        };
        let coef = coef.unwrap_or_else(|| BigInt::from(1));
        if coef == BigInt::from(0) {
            return Err(Error::Parse { pos: start, msg: "zero coefficient".into() });
        }
        Ok((exp, coef))
    }
}
