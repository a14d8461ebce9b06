//! Expression language for user-supplied radial profiles.
//!
//! Grammar (single variable, spelled `r`, `s`, `x` or `phi`):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | 'e' | var | func '(' expr ')' | 'cutoff' '(' expr ',' expr ')' | '(' expr ')'
//! func  := sqrt | exp | ln | sin | cos | sinh | cosh
//! ```
//!
//! `cutoff(eps, f)` is `exp(-eps / f)` extended by zero where `f = 0`; its
//! first argument must be a positive constant.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Series;

const MAX_DEPTH: usize = 128;
const MAX_INPUT: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => x.sqrt(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var,
    Num(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Cutoff(f64, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        if src.len() > MAX_INPUT {
            return Err(Error::Parse { pos: MAX_INPUT, msg: "expression too long".into() });
        }
        let mut p = Parser { src: src.as_bytes(), pos: 0, depth: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Num(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) | Expr::Cutoff(_, a) => a.contains_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.contains_var() || b.contains_var()
            }
        }
    }

    /// Plain floating-point evaluation; domain violations yield NaN.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Var => x,
            Expr::Num(v) => *v,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                let e = b.eval(x);
                if e.fract() == 0.0 && e.abs() < 1e9 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x)),
            Expr::Cutoff(eps, a) => {
                let v = a.eval(x);
                if v == 0.0 {
                    0.0
                } else if v > 0.0 {
                    (-eps / v).exp()
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Taylor series with `len` coefficients about `x0`.
    pub fn series(&self, x0: f64, len: usize) -> Result<Series> {
        match self {
            Expr::Var => Ok(Series::variable(x0, len)),
            Expr::Num(v) => Ok(Series::constant(*v, len)),
            Expr::Neg(a) => Ok(a.series(x0, len)?.neg()),
            Expr::Add(a, b) => Ok(a.series(x0, len)?.add(&b.series(x0, len)?)),
            Expr::Sub(a, b) => Ok(a.series(x0, len)?.sub(&b.series(x0, len)?)),
            Expr::Mul(a, b) => {
                // A flat factor annihilates a singular partner.
                let sa = a.series(x0, len);
                if matches!(&sa, Ok(s) if s.is_flat()) {
                    return Ok(Series::flat_zero(len));
                }
                let sb = b.series(x0, len);
                if matches!(&sb, Ok(s) if s.is_flat()) {
                    return Ok(Series::flat_zero(len));
                }
                Ok(sa?.mul(&sb?))
            }
            Expr::Div(a, b) => {
                let sa = a.series(x0, len)?;
                if sa.is_flat() {
                    return Ok(sa);
                }
                sa.div(&b.series(x0, len)?)
            }
            Expr::Pow(a, b) => {
                if !b.contains_var() {
                    let p = b.eval(x0);
                    if !p.is_finite() {
                        return Err(Error::Domain("non-finite exponent".into()));
                    }
                    a.series(x0, len)?.powf(p)
                } else {
                    let lb = a.series(x0, len)?.ln()?;
                    b.series(x0, len)?.mul(&lb).exp()
                }
            }
            Expr::Call(f, a) => {
                let s = a.series(x0, len)?;
                match f {
                    Func::Sqrt => s.sqrt(),
                    Func::Exp => s.exp(),
                    Func::Ln => s.ln(),
                    Func::Sin => Ok(s.sin_cos()?.0),
                    Func::Cos => Ok(s.sin_cos()?.1),
                    Func::Sinh => Ok(s.sinh_cosh()?.0),
                    Func::Cosh => Ok(s.sinh_cosh()?.1),
                }
            }
            Expr::Cutoff(eps, a) => a.series(x0, len)?.cutoff(*eps),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => write!(f, "r"),
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Cutoff(eps, a) => write!(f, "cutoff({eps:?}, {a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let e = if self.eat(b'-') {
            Expr::Neg(Box::new(self.unary()?))
        } else if self.eat(b'+') {
            self.unary()?
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).map_err(|_| self.err("bad number"))?;
        let v: f64 = text.parse().map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{text}'") })?;
        Ok(Expr::Num(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).map_err(|_| self.err("bad identifier"))?;
        match name {
            "r" | "s" | "x" | "phi" => return Ok(Expr::Var),
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "e" => return Ok(Expr::Num(std::f64::consts::E)),
            _ => {}
        }
        let name = name.to_string();
        if name == "cutoff" {
            if !self.eat(b'(') {
                return Err(self.err("expected '(' after cutoff"));
            }
            let eps_expr = self.expr()?;
            if eps_expr.contains_var() {
                return Err(self.err("cutoff width must be constant"));
            }
            let eps = eps_expr.eval(0.0);
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(self.err("cutoff width must be positive"));
            }
            if !self.eat(b',') {
                return Err(self.err("expected ',' in cutoff"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            return Ok(Expr::Cutoff(eps, Box::new(arg)));
        }
        let func = Func::from_name(&name).ok_or_else(|| Error::Parse { pos: start, msg: format!("unknown identifier '{name}'") })?;
        if !self.eat(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2 * 3 ^ 2 - 8 / 4 / 2").unwrap();
        assert_eq!(e.eval(0.0), 1.0 + 18.0 - 1.0);
        let e = Expr::parse("2 ^ 3 ^ 2").unwrap();
        assert_eq!(e.eval(0.0), 512.0);
        let e = Expr::parse("-r^2").unwrap();
        assert_eq!(e.eval(3.0), -9.0);
        let e = Expr::parse("r^-2").unwrap();
        assert_eq!(e.eval(2.0), 0.25);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sinh(r) + cos(pi) * exp(ln(e))").unwrap();
        assert_relative_eq!(e.eval(1.0), 1f64.sinh() - std::f64::consts::E, max_relative = 1e-15);
    }

    #[test]
    fn cutoff_profile_series_at_zero_is_flat_in_the_correction() {
        let e = Expr::parse("r + (exp(r) - 1 - r) * cutoff(0.5, r)").unwrap();
        let s = e.series(0.0, 6).unwrap();
        assert_eq!(s.derivatives(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn errors_carry_positions() {
        for bad in ["", "1 +", "foo(r)", "sin r", "(r", "r)", "cutoff(r, r)", "cutoff(-1, r)", "3 $"] {
            assert!(matches!(Expr::parse(bad), Err(Error::Parse { .. })), "{bad}");
        }
        let deep = "(".repeat(500) + "r" + &")".repeat(500);
        assert!(Expr::parse(&deep).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![Just(Expr::Var), (0.0f64..10.0).prop_map(Expr::Num)];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                inner.clone().prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
                (0.01f64..1.0, inner.clone()).prop_map(|(e, a)| Expr::Cutoff(e, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in arb_expr()) {
            let text = e.to_string();
            let back = Expr::parse(&text).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn series_value_matches_plain_eval(e in arb_expr(), x in 0.1f64..3.0) {
            let plain = e.eval(x);
            if let Ok(s) = e.series(x, 3) {
                let v = s.value();
                if plain.is_finite() && v.is_finite() {
                    prop_assert!((v - plain).abs() <= 1e-9 * (1.0 + plain.abs()));
                }
            }
        }

        #[test]
        fn parser_never_panics(s in "[-+*/^()., a-z0-9]{0,40}") {
            let _ = Expr::parse(&s);
        }
    }
}
