//! Arithmetic expressions over `x` and `y` for coefficient fields.
//!
//! Grammar (standard precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'y' | 'pi' | 'e' | '(' expr ')'
//!          | ('sin' | 'cos' | 'exp' | 'sqrt' | 'abs') '(' expr ')'
//!          | 'iflt' '(' expr ',' expr ',' expr ',' expr ')'
//! ```
//!
//! `iflt(a, b, t, f)` is `t` when `a < b` and `f` otherwise.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Iflt(Box<[Expr; 4]>),
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("syntax error at offset {position}: expected {}", .expected.join(" or "))]
pub struct SyntaxError {
    pub position: usize,
    pub expected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of {arg:e} is undefined")]
    Domain { func: &'static str, arg: f64 },
    #[error("result is not finite")]
    NonFinite,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Lexer, SyntaxError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // an exponent needs digits; otherwise the `e` is left for the next token
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
            let v: f64 = text[start..i].parse().map_err(|_| SyntaxError {
                position: start,
                expected: vec!["number".into()],
            })?;
            toks.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            toks.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(SyntaxError {
                position: i,
                expected: vec!["number".into(), "identifier".into(), "operator".into()],
            });
        }
    }
    toks.push((Tok::End, text.len()));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const OPERAND: [&str; 4] = ["number", "variable or function", "'('", "'-'"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            position: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&[&format!("'{c}'")]))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.primary()?;
        if self.eat('^') {
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    "iflt" => {
                        self.expect('(')?;
                        let a = self.expr()?;
                        self.expect(',')?;
                        let b = self.expr()?;
                        self.expect(',')?;
                        let t = self.expr()?;
                        self.expect(',')?;
                        let f = self.expr()?;
                        self.expect(')')?;
                        Ok(Expr::Iflt(Box::new([a, b, t, f])))
                    }
                    other => match Func::from_name(other) {
                        Some(func) => {
                            self.expect('(')?;
                            let arg = self.expr()?;
                            self.expect(')')?;
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        None => Err(SyntaxError {
                            position: at,
                            expected: vec!["x, y, pi, e, sin, cos, exp, sqrt, abs or iflt".into()],
                        }),
                    },
                }
            }
            _ => Err(self.err(&OPERAND)),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let lexer = lex(text)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.err(&["operator", "end of input"]));
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y)?, b.eval(x, y)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(EvalError::Domain { func: "^", arg: a });
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(x, y)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError::Domain { func: "sqrt", arg: a });
                        }
                        a.sqrt()
                    }
                }
            }
            Expr::Iflt(args) => {
                if args[0].eval(x, y)? < args[1].eval(x, y)? {
                    args[2].eval(x, y)?
                } else {
                    args[3].eval(x, y)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluate, mapping failures to NaN so numerical code reports them as
    /// non-finite input with the offending entity.
    pub fn eval_or_nan(&self, p: [f64; 2]) -> f64 {
        self.eval(p[0], p[1]).unwrap_or(f64::NAN)
    }

    /// True when the expression does not depend on `x` or `y`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X | Expr::Y => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Iflt(args) => args.iter().all(Expr::is_constant),
        }
    }

    /// Symbolic partial derivative with respect to `x` (`axis = 0`) or `y`.
    /// `abs` and `iflt` are differentiated piecewise; powers need a constant
    /// exponent (the grammar has no logarithm).
    pub fn derivative(&self, axis: usize) -> Result<Expr, EvalError> {
        use Expr::*;
        let b = Box::new;
        Ok(match self {
            Num(_) => Num(0.0),
            X => Num(if axis == 0 { 1.0 } else { 0.0 }),
            Y => Num(if axis == 1 { 1.0 } else { 0.0 }),
            Neg(a) => Neg(b(a.derivative(axis)?)),
            Bin(op, l, r) => {
                let dl = l.derivative(axis)?;
                match op {
                    BinOp::Add => Bin(BinOp::Add, b(dl), b(r.derivative(axis)?)),
                    BinOp::Sub => Bin(BinOp::Sub, b(dl), b(r.derivative(axis)?)),
                    BinOp::Mul => Bin(
                        BinOp::Add,
                        b(Bin(BinOp::Mul, b(dl), r.clone())),
                        b(Bin(BinOp::Mul, l.clone(), b(r.derivative(axis)?))),
                    ),
                    BinOp::Div => Bin(
                        BinOp::Div,
                        b(Bin(
                            BinOp::Sub,
                            b(Bin(BinOp::Mul, b(dl), r.clone())),
                            b(Bin(BinOp::Mul, l.clone(), b(r.derivative(axis)?))),
                        )),
                        b(Bin(BinOp::Mul, r.clone(), r.clone())),
                    ),
                    BinOp::Pow => {
                        if !r.is_constant() {
                            return Err(EvalError::Domain {
                                func: "derivative of variable exponent",
                                arg: f64::NAN,
                            });
                        }
                        let n = r.eval(0.0, 0.0)?;
                        Bin(
                            BinOp::Mul,
                            b(Bin(
                                BinOp::Mul,
                                b(Num(n)),
                                b(Bin(BinOp::Pow, l.clone(), b(Num(n - 1.0)))),
                            )),
                            b(dl),
                        )
                    }
                }
            }
            Call(f, a) => {
                let da = b(a.derivative(axis)?);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(b(Call(Func::Sin, a.clone()))),
                    Func::Exp => self.clone(),
                    Func::Sqrt => Bin(BinOp::Div, b(Num(0.5)), b(self.clone())),
                    Func::Abs => Iflt(Box::new([(**a).clone(), Num(0.0), Num(-1.0), Num(1.0)])),
                };
                Bin(BinOp::Mul, b(outer), da)
            }
            Iflt(args) => Iflt(Box::new([
                args[0].clone(),
                args[1].clone(),
                args[2].derivative(axis)?,
                args[3].derivative(axis)?,
            ])),
        })
    }
}

/// Fully parenthesized rendering that parses back to an equal expression.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => f.write_str("x"),
            Expr::Y => f.write_str("y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a}{sym}{b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Iflt(args) => write!(f, "iflt({},{},{},{})", args[0], args[1], args[2], args[3]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        parse_expr(s).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn examples() {
        assert!((ev("sin(pi*x)*sin(pi*y)", 0.5, 0.5) - 1.0).abs() < 1e-15);
        let jump = parse_expr("iflt(x,0.5,1,1e-6)").unwrap();
        assert_eq!(jump.eval(0.25, 0.0).unwrap(), 1.0);
        assert_eq!(jump.eval(0.5, 0.0).unwrap(), 1e-6);
        let err = parse_expr("2+*x").unwrap_err();
        assert_eq!(err.position, 2);
        assert!(err.to_string().contains("offset 2"));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("1-2-3", 0.0, 0.0), -4.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(ev("1+2*3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0, 0.0), 9.0);
        assert_eq!(ev("--x", 3.0, 0.0), 3.0);
        assert_eq!(ev("2.5e-1 + .5 + 1E1", 0.0, 0.0), 10.75);
        assert_eq!(ev("e", 0.0, 0.0), std::f64::consts::E);
        assert_eq!(ev("abs(x-y)", 1.0, 3.0), 2.0);
        assert_eq!(ev("sqrt(exp(0)*4)", 0.0, 0.0), 2.0);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        for (text, pos) in [
            ("", 0),
            ("x +", 3),
            ("(x", 2),
            ("sin x", 4),
            ("foo(1)", 0),
            ("x y", 2),
            ("iflt(x,1,2)", 10),
            ("3 $ 4", 2),
            ("2e", 1),
        ] {
            let err = parse_expr(text).unwrap_err();
            assert_eq!(err.position, pos, "{text:?}: {err}");
            assert!(!err.expected.is_empty());
        }
    }

    #[test]
    fn evaluation_errors_do_not_panic() {
        assert_eq!(
            parse_expr("1/(x-x)").unwrap().eval(1.0, 0.0),
            Err(EvalError::DivisionByZero)
        );
        assert!(matches!(
            parse_expr("sqrt(x)").unwrap().eval(-1.0, 0.0),
            Err(EvalError::Domain { .. })
        ));
        assert!(matches!(
            parse_expr("(-2)^0.5").unwrap().eval(0.0, 0.0),
            Err(EvalError::Domain { .. })
        ));
        assert_eq!(
            parse_expr("exp(1000)").unwrap().eval(0.0, 0.0),
            Err(EvalError::NonFinite)
        );
        assert!(parse_expr("1/x").unwrap().eval_or_nan([0.0, 0.0]).is_nan());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "sin(pi*x)*sin(pi*y)",
            "-x^2",
            "iflt(x,0.5,1,1e-6)",
            "2^3^2",
            "1-(2-3)",
            "-(-1.5)",
            "abs(-y)/7",
        ] {
            let e = parse_expr(text).unwrap();
            let back = parse_expr(&e.to_string()).unwrap();
            assert_eq!(back, e, "{text} -> {e}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for text in [
            "(sin(x) + 4*x + cos(y) + 4*y)/0.01",
            "x^3*y - exp(x*y)/(1+y^2)",
            "sqrt(1+x^2+y^2) + abs(x-0.3)",
            "iflt(x,0.5,x^2,3*x) + cos(pi*y)",
            "((2+x)^2 + (1+y)^2)/2",
        ] {
            let e = parse_expr(text).unwrap();
            for (x, y) in [(0.1, 0.2), (0.7, -0.4), (-0.2, 0.9)] {
                for axis in 0..2 {
                    let d = e.derivative(axis).unwrap().eval(x, y).unwrap();
                    let (dx, dy) = if axis == 0 { (h, 0.0) } else { (0.0, h) };
                    let fd = (e.eval(x + dx, y + dy).unwrap() - e.eval(x - dx, y - dy).unwrap()) / (2.0 * h);
                    assert!(
                        (d - fd).abs() < 1e-6 * (1.0 + d.abs()),
                        "{text} axis {axis}: {d} vs {fd}"
                    );
                }
            }
        }
        assert!(parse_expr("x^y").unwrap().derivative(0).is_err());
    }
}
