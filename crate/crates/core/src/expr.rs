//! Closed-form expressions in `x`, `y`, `t` with symbolic differentiation.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! constant `pi` and the functions `sin`, `cos`, `exp`, `ln`, `sqrt`.
//! `^` is right-associative and binds tighter than unary minus.

use std::fmt;

use crate::error::{BiotError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

use Expr::*;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn num(v: f64) -> Expr {
        Num(v)
    }

    pub fn x() -> Expr {
        Var(Var::X)
    }

    pub fn y() -> Expr {
        Var(Var::Y)
    }

    pub fn t() -> Expr {
        Var(Var::T)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Num(v) => *v,
            Var(Var::X) => x,
            Var(Var::Y) => y,
            Var(Var::T) => t,
            Neg(a) => -a.eval(x, y, t),
            Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Sub(a, b) => a.eval(x, y, t) - b.eval(x, y, t),
            Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Div(a, b) => a.eval(x, y, t) / b.eval(x, y, t),
            Pow(a, b) => {
                let base = a.eval(x, y, t);
                match b.as_ref() {
                    Num(n) if n.fract() == 0.0 && n.abs() < 64.0 => base.powi(*n as i32),
                    e => base.powf(e.eval(x, y, t)),
                }
            }
            Call(f, a) => {
                let v = a.eval(x, y, t);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Num(_) => false,
            Var(v) => *v == var,
            Neg(a) | Call(_, a) => a.depends_on(var),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Num(v) if *v == 0.0)
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, var: Var) -> Expr {
        if !self.depends_on(var) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(var)),
            Add(a, b) => add(a.diff(var), b.diff(var)),
            Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.diff(var), (**b).clone()),
                    mul((**a).clone(), b.diff(var)),
                ),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if let Num(n) = b.as_ref() {
                    mul(
                        mul(Num(*n), pow((**a).clone(), Num(n - 1.0))),
                        a.diff(var),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(var), call(Func::Ln, (**a).clone())),
                            div(mul((**b).clone(), a.diff(var)), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.diff(var);
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => self.clone(),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                    Func::Sqrt => div(Num(0.5), self.clone()),
                };
                mul(outer, inner)
            }
        }
    }

    /// Substitute a fixed time value.
    pub fn at_time(&self, t: f64) -> Expr {
        match self {
            Var(Var::T) => Num(t),
            Num(_) | Var(_) => self.clone(),
            Neg(a) => neg(a.at_time(t)),
            Add(a, b) => add(a.at_time(t), b.at_time(t)),
            Sub(a, b) => sub(a.at_time(t), b.at_time(t)),
            Mul(a, b) => mul(a.at_time(t), b.at_time(t)),
            Div(a, b) => div(a.at_time(t), b.at_time(t)),
            Pow(a, b) => pow(a.at_time(t), b.at_time(t)),
            Call(f, a) => call(*f, a.at_time(t)),
        }
    }

    /// Replace every occurrence of `var` by `e`.
    pub fn substitute(&self, var: Var, e: &Expr) -> Expr {
        match self {
            Var(v) if *v == var => e.clone(),
            Num(_) | Var(_) => self.clone(),
            Neg(a) => neg(a.substitute(var, e)),
            Add(a, b) => add(a.substitute(var, e), b.substitute(var, e)),
            Sub(a, b) => sub(a.substitute(var, e), b.substitute(var, e)),
            Mul(a, b) => mul(a.substitute(var, e), b.substitute(var, e)),
            Div(a, b) => div(a.substitute(var, e), b.substitute(var, e)),
            Pow(a, b) => pow(a.substitute(var, e), b.substitute(var, e)),
            Call(f, a) => call(*f, a.substitute(var, e)),
        }
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Num(v) => Num(-v),
        Neg(inner) => *inner,
        a => Neg(Box::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => b,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Num(0.0),
        (Num(o), b) if o == 1.0 => b,
        (a, Num(o)) if o == 1.0 => a,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if a.is_zero() => Num(0.0),
        (a, Num(o)) if o == 1.0 => a,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Num(e)) if e == 0.0 => Num(1.0),
        (a, Num(e)) if e == 1.0 => a,
        (a, b) => Pow(Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Call(f, Box::new(a))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => write!(f, "{v:?}"),
            Var(Var::X) => write!(f, "x"),
            Var(Var::Y) => write!(f, "y"),
            Var(Var::T) => write!(f, "t"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Ln => "ln",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> BiotError {
        BiotError::Parse {
            message: message.to_string(),
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

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Add(Box::new(lhs), Box::new(rhs))
            } else {
                Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let func = match name {
                    "x" => return Ok(Var(Var::X)),
                    "y" => return Ok(Var(Var::Y)),
                    "t" => return Ok(Var(Var::T)),
                    "pi" => return Ok(Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    _ => {
                        self.pos = start;
                        return Err(self.error(&format!("unknown identifier '{name}'")));
                    }
                };
                if self.peek() != Some(b'(') {
                    return Err(self.error("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.error("unexpected character")),
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
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Num).map_err(|_| {
            self.pos = start;
            self.error(&format!("malformed number '{text}'"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y, t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("x - y - t", 5.0, 2.0, 1.0), 2.0);
        assert_eq!(ev("1.5e-1 * 2", 0.0, 0.0, 0.0), 0.3);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("sin(pi * x)", 0.5, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("exp(-t) * cos(0)", 0.0, 0.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Expr::parse("1 + foo(x)") {
            Err(BiotError::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(x + 1").is_err());
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("x y").is_err());
    }

    #[test]
    fn derivatives_of_known_functions() {
        let e = Expr::parse("x^3 * sin(pi * y) + exp(2 * t) / (1 + x)").unwrap();
        let (x, y, t): (f64, f64, f64) = (0.3, 0.7, 0.2);
        let pi = std::f64::consts::PI;
        let dx = 3.0 * x * x * (pi * y).sin() - (2.0 * t).exp() / (1.0 + x).powi(2);
        let dy = x.powi(3) * pi * (pi * y).cos();
        let dt = 2.0 * (2.0 * t).exp() / (1.0 + x);
        assert!((e.diff(Var::X).eval(x, y, t) - dx).abs() < 1e-13);
        assert!((e.diff(Var::Y).eval(x, y, t) - dy).abs() < 1e-13);
        assert!((e.diff(Var::T).eval(x, y, t) - dt).abs() < 1e-13);
    }

    #[test]
    fn general_power_rule() {
        let e = Expr::parse("x ^ t").unwrap();
        let d = e.diff(Var::T).eval(2.0, 0.0, 1.5);
        assert!((d - 2f64.powf(1.5) * 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("-x^2 + sin(y) / (t - 3)").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e.eval(0.2, 0.4, 0.9), again.eval(0.2, 0.4, 0.9));
    }

    proptest! {
        #[test]
        fn derivative_matches_central_difference(x in 0.1f64..0.9, y in 0.1f64..0.9, t in 0.0f64..1.0) {
            let e = Expr::parse("sin(pi*x)*cos(y)*exp(-t) + x^2*y - sqrt(1 + x*y)").unwrap();
            let h = 1e-6;
            let fd = (e.eval(x + h, y, t) - e.eval(x - h, y, t)) / (2.0 * h);
            prop_assert!((e.diff(Var::X).eval(x, y, t) - fd).abs() < 1e-7);
        }
    }
}
