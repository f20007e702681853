//! Closed-form field expressions used to describe perturbation coefficients.
//!
//! Grammar:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '·' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x y z r` (first point) and `xp yp zp rp` (second point,
//! integral kernels only); `pi` is a constant. Functions: `exp`, `tanh`,
//! `sqrt`, `ball(R)` (indicator of `|x| < R`) and `ball(R, cx, cy, cz)`
//! (indicator of a ball centered at `c`).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    Z,
    R,
    Xp,
    Yp,
    Zp,
    Rp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Tanh,
    Sqrt,
    Ball,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    uses_second_point: bool,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Expr").field(&self.source).finish()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            chars: source.char_indices().collect(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        let mut uses_second_point = false;
        visit(&root, &mut |n| {
            if let Node::Var(Var::Xp | Var::Yp | Var::Zp | Var::Rp) = n {
                uses_second_point = true;
            }
        });
        Ok(Self {
            source: source.to_string(),
            root,
            uses_second_point,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses_second_point(&self) -> bool {
        self.uses_second_point
    }

    /// Evaluate at a single point.
    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        eval(&self.root, p, &[0.0; 3])
    }

    /// Evaluate a two-point expression (integral kernels).
    pub fn eval2(&self, p: &[f64; 3], q: &[f64; 3]) -> f64 {
        eval(&self.root, p, q)
    }
}

fn visit(n: &Node, f: &mut impl FnMut(&Node)) {
    f(n);
    match n {
        Node::Neg(a) => visit(a, f),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            visit(a, f);
            visit(b, f);
        }
        Node::Call(_, args) => args.iter().for_each(|a| visit(a, f)),
        Node::Num(_) | Node::Var(_) => {}
    }
}

fn eval(n: &Node, p: &[f64; 3], q: &[f64; 3]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(v) => match v {
            Var::X => p[0],
            Var::Y => p[1],
            Var::Z => p[2],
            Var::R => math::hypot3(p),
            Var::Xp => q[0],
            Var::Yp => q[1],
            Var::Zp => q[2],
            Var::Rp => math::hypot3(q),
        },
        Node::Neg(a) => -eval(a, p, q),
        Node::Add(a, b) => eval(a, p, q) + eval(b, p, q),
        Node::Sub(a, b) => eval(a, p, q) - eval(b, p, q),
        Node::Mul(a, b) => eval(a, p, q) * eval(b, p, q),
        Node::Div(a, b) => eval(a, p, q) / eval(b, p, q),
        Node::Pow(a, b) => {
            let base = eval(a, p, q);
            let e = eval(b, p, q);
            if e == math::round(e) && math::abs(e) < 64.0 {
                math::powi(base, e as i32)
            } else {
                math::powf(base, e)
            }
        }
        Node::Call(f, args) => {
            let a0 = eval(&args[0], p, q);
            match f {
                Func::Exp => math::exp(a0),
                Func::Tanh => math::tanh(a0),
                Func::Sqrt => math::sqrt(a0),
                Func::Ball => {
                    let mut c = [0.0; 3];
                    for (k, a) in args.iter().skip(1).enumerate() {
                        c[k] = eval(a, p, q);
                    }
                    let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
                    if math::hypot3(&d) < a0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        }
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: &str) -> Error {
        let at = self.chars.get(self.pos).map_or_else(
            || self.chars.last().map_or(0, |(i, c)| i + c.len_utf8()),
            |(i, _)| *i,
        );
        Error::Expression {
            pos: at,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') || self.eat('−') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') || self.eat('·') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') || self.eat('−') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let e = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut s = String::new();
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            let exp_sign = (c == '+' || c == '-') && s.ends_with(['e', 'E']);
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        s.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.err(&format!("malformed number '{s}'"))
        })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut s = String::new();
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        let var = match s.as_str() {
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            "r" => Some(Var::R),
            "xp" => Some(Var::Xp),
            "yp" => Some(Var::Yp),
            "zp" => Some(Var::Zp),
            "rp" => Some(Var::Rp),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Node::Var(v));
        }
        if s == "pi" {
            return Ok(Node::Num(core::f64::consts::PI));
        }
        let func = match s.as_str() {
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "ball" => Func::Ball,
            _ => {
                self.pos = start;
                return Err(self.err(&format!("unknown name '{s}'")));
            }
        };
        if !self.eat('(') {
            return Err(self.err("expected '(' after function name"));
        }
        let mut args = alloc::vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.err("expected ')'"));
        }
        let arity_ok = match func {
            Func::Ball => args.len() == 1 || args.len() == 4,
            _ => args.len() == 1,
        };
        if !arity_ok {
            self.pos = start;
            return Err(self.err(&format!("wrong number of arguments to '{s}'")));
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, p: [f64; 3]) -> f64 {
        Expr::parse(s).unwrap().eval(&p)
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(ev("1 + 2 * 3", [0.0; 3]), 7.0);
        assert_eq!(ev("-2^2", [0.0; 3]), -4.0);
        assert_eq!(ev("2^-1", [0.0; 3]), 0.5);
        assert_eq!(ev("(1 + 2) · 3 / 9", [0.0; 3]), 1.0);
        assert_eq!(ev("x - y - z", [5.0, 2.0, 1.0]), 2.0);
        assert_eq!(ev("1.5e-1*2", [0.0; 3]), 0.3);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("-8*exp(-r*r)", [1.0, 0.0, 0.0]) + 8.0 * libm::exp(-1.0)).abs() < 1e-15);
        assert_eq!(ev("-2*ball(1)", [0.5, 0.0, 0.0]), -2.0);
        assert_eq!(ev("-2*ball(1)", [1.0, 0.0, 0.0]), 0.0);
        assert_eq!(ev("ball(1, 3, 0, 0)", [3.5, 0.0, 0.0]), 1.0);
        assert!((ev("tanh(x)", [0.3, 0.0, 0.0]) - libm::tanh(0.3)).abs() < 1e-16);
        let k = Expr::parse("exp(-x*x) * exp(-xp*xp)").unwrap();
        assert!(k.uses_second_point());
        assert!((k.eval2(&[1.0, 0.0, 0.0], &[0.0; 3]) - libm::exp(-1.0)).abs() < 1e-16);
    }

    #[test]
    fn parse_errors_carry_positions() {
        match Expr::parse("1 + foo(2)") {
            Err(Error::Expression { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("ball(1, 2)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
    }
}
