//! Parser for polynomial and rational expressions.
//!
//! Variables are written `zeta0`, `Zeta0` (conjugate), `z0`, `Z0`, `w0`,
//! `W0`, `t0`, `T0`; `i` is the imaginary unit and `pi2i` the symbol `2πi`.
//! Operators are `+ - * / ^` with parentheses; exponents are integers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::gaussian::GaussianRational;
use super::poly::MultiPoly;
use super::rational::RationalFn;
use super::vars::{Family, Universe, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Var(Var),
    I,
    Pi,
    Op(char),
}

fn lex(s: &str, u: Universe) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < cs.len() {
        let c = cs[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() {
            let st = k;
            while k < cs.len() && cs[k].is_ascii_digit() {
                k += 1;
            }
            let digits: String = cs[st..k].iter().collect();
            out.push(Tok::Num(digits.parse().unwrap()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            k += 1;
        } else if c.is_ascii_alphabetic() {
            let rest: String = cs[k..].iter().collect();
            if rest.starts_with("pi2i") {
                out.push(Tok::Pi);
                k += 4;
                continue;
            }
            let st = k;
            while k < cs.len() && cs[k].is_ascii_alphabetic() {
                k += 1;
            }
            let name: String = cs[st..k].iter().collect();
            let ds = k;
            while k < cs.len() && cs[k].is_ascii_digit() {
                k += 1;
            }
            if name == "i" && ds == k {
                out.push(Tok::I);
                continue;
            }
            let fam = Family::from_prefix(&name)
                .ok_or_else(|| Error::Parse(format!("unknown identifier '{name}'")))?;
            if ds == k {
                return Err(Error::Parse(format!("variable '{name}' needs an index")));
            }
            let idx: usize = cs[ds..k]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| Error::Parse("bad index".into()))?;
            let v = Var::new(fam, idx.min(63));
            if idx >= 63 || !u.contains(v) {
                return Err(Error::Parse(format!(
                    "variable {name}{idx} outside N = {}",
                    u.n
                )));
            }
            out.push(Tok::Var(v));
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<RationalFn> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<RationalFn> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else if self.eat('/') {
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(Error::Parse("division by zero".into()));
                }
                acc = acc.div(&d)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<RationalFn> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFn> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let neg = self.eat('-');
        let e = match self.peek() {
            Some(Tok::Num(n)) => {
                let e: u32 = n
                    .try_into()
                    .map_err(|_| Error::Parse("exponent too large".into()))?;
                self.pos += 1;
                e
            }
            _ => return Err(Error::Parse("expected integer exponent".into())),
        };
        if neg {
            if base.is_zero() {
                return Err(Error::Parse("negative power of zero".into()));
            }
            RationalFn::one().div_pow(&base, e)
        } else {
            Ok(base.pow(e))
        }
    }

    fn atom(&mut self) -> Result<RationalFn> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        match t {
            Tok::Num(n) => Ok(RationalFn::constant(GaussianRational::new(
                BigRational::from_integer(n),
                BigRational::zero(),
            ))),
            Tok::Var(v) => Ok(RationalFn::var(v)),
            Tok::I => Ok(RationalFn::constant(GaussianRational::i())),
            Tok::Pi => Ok(RationalFn::pi(1)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse(format!("unexpected '{c}'"))),
        }
    }
}

/// Parses a rational expression over the universe of dimension `u.n`.
pub fn parse_rational(s: &str, u: Universe) -> Result<RationalFn> {
    let mut p = Parser {
        toks: lex(s, u)?,
        pos: 0,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input at token {}", p.pos)));
    }
    Ok(e)
}

/// Parses a polynomial; divisions must cancel to a polynomial.
pub fn parse_poly(s: &str, u: Universe) -> Result<MultiPoly> {
    let e = parse_rational(s, u)?;
    e.as_polynomial()
        .cloned()
        .ok_or_else(|| Error::Parse("expression is not a polynomial".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const U: Universe = Universe::new(2);

    #[test]
    fn round_trip_through_display() {
        for s in [
            "zeta0^3 + zeta1^3 + zeta2^3",
            "1/2*i*zeta0*Z1 - 3/4",
            "(z0 + w0)^2 - pi2i^-1*W2",
            "zeta1^3 - zeta2^2*zeta0",
        ] {
            let p = parse_poly(s, U).unwrap();
            let q = parse_poly(&p.to_string(), U).unwrap();
            assert_eq!(p, q, "{s}");
        }
    }

    #[test]
    fn coefficients() {
        let p = parse_poly("(1/2 + 3*i)*zeta0", U).unwrap();
        let c = GaussianRational::from_strings("1/2", "3").unwrap();
        assert_eq!(p, MultiPoly::var(Var::zeta(0)).scale(&c));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_poly("zeta3", U).is_err());
        assert!(parse_poly("q0", U).is_err());
        assert!(parse_poly("zeta0 +", U).is_err());
        assert!(parse_poly("1/zeta0", U).is_err());
        assert!(parse_rational("1/(zeta0-zeta0)", U).is_err());
    }
}
