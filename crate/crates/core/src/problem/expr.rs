//! Arithmetic expressions over named variables.
//!
//! Grammar (standard precedence, left associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := base ('^' ['-'] integer)?
//! base   := number | name | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use std::fmt;

use thiserror::Error;

use super::dual::HyperDual;
use super::{EvalError, Jet, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var(usize),
    Unary(UnaryFn, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, i32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("exponent at position {position} must be an integer literal")]
    NonIntegerExponent { position: usize },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownIdentifier { position, .. }
            | ParseError::NonIntegerExponent { position } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64, String),
    Ident(String),
    Sym(char),
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
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
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Token::Num(value, text.to_string()), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Token::Ident(src[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Token::Sym(c), i));
            i += 1;
        } else {
            return Err(ParseError::Syntax {
                position: i,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    out.push((Token::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    variables: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        match self.peek() {
            Token::Sym(c) if *c == sym => {
                self.bump();
                Ok(())
            }
            other => Err(ParseError::Syntax {
                position: self.offset(),
                message: format!("expected `{sym}`, found {}", describe(other)),
            }),
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Sym('+') => BinaryOp::Add,
                Token::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Sym('*') => BinaryOp::Mul,
                Token::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if let Token::Sym('-') = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(ExprAst::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.base()?;
        if let Token::Sym('^') = self.peek() {
            self.bump();
            let position = self.offset();
            let negative = if let Token::Sym('-') = self.peek() {
                self.bump();
                true
            } else {
                false
            };
            let exponent = match self.bump().0 {
                Token::Num(v, _) => {
                    if v.fract() != 0.0 || v > i32::MAX as f64 {
                        return Err(ParseError::NonIntegerExponent { position });
                    }
                    v as i32
                }
                Token::End => {
                    return Err(ParseError::Syntax {
                        position,
                        message: "expected exponent, found end of input".into(),
                    })
                }
                _ => return Err(ParseError::NonIntegerExponent { position }),
            };
            let exponent = if negative { -exponent } else { exponent };
            return Ok(ExprAst::Pow(Box::new(base), exponent));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprAst, ParseError> {
        let (tok, position) = self.bump();
        match tok {
            Token::Num(v, _) => Ok(ExprAst::Const(v)),
            Token::Sym('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(UnaryFn::Sin),
                    "cos" => Some(UnaryFn::Cos),
                    "exp" => Some(UnaryFn::Exp),
                    "sqrt" => Some(UnaryFn::Sqrt),
                    _ => None,
                };
                if let Some(func) = func {
                    if matches!(self.peek(), Token::Sym('(')) {
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(')')?;
                        return Ok(ExprAst::Unary(func, Box::new(arg)));
                    }
                }
                match self.variables.iter().position(|v| *v == name) {
                    Some(i) => Ok(ExprAst::Var(i)),
                    None => Err(ParseError::UnknownIdentifier { name, position }),
                }
            }
            other => Err(ParseError::Syntax {
                position,
                message: format!("expected a number, name or `(`, found {}", describe(&other)),
            }),
        }
    }
}

fn describe(t: &Token) -> String {
    match t {
        Token::Num(_, text) => format!("number `{text}`"),
        Token::Ident(n) => format!("`{n}`"),
        Token::Sym(c) => format!("`{c}`"),
        Token::End => "end of input".into(),
    }
}

/// Parses `source` against an ordered list of variable names.
pub fn parse_expression(source: &str, variables: &[String]) -> Result<ExprAst, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        variables,
    };
    let ast = p.expr()?;
    match p.peek() {
        Token::End => Ok(ast),
        other => Err(ParseError::Syntax {
            position: p.offset(),
            message: format!("unexpected {} after expression", describe(other)),
        }),
    }
}

impl ExprAst {
    /// Fully parenthesized rendering that re-parses to an equivalent tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Rendered { ast: self, names }
    }

    /// Plain value evaluation.
    pub fn eval(&self, k: &[f64], names: &[String]) -> Result<f64, EvalError> {
        Ok(match self {
            ExprAst::Const(c) => *c,
            ExprAst::Var(i) => k[*i],
            ExprAst::Unary(func, a) => {
                let x = a.eval(k, names)?;
                match func {
                    UnaryFn::Sin => x.sin(),
                    UnaryFn::Cos => x.cos(),
                    UnaryFn::Exp => x.exp(),
                    UnaryFn::Neg => -x,
                    UnaryFn::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain(names, format!("sqrt of negative value {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
            ExprAst::Binary(op, a, b) => {
                let (x, y) = (a.eval(k, names)?, b.eval(k, names)?);
                match op {
                    BinaryOp::Add => x + y,
                    BinaryOp::Sub => x - y,
                    BinaryOp::Mul => x * y,
                    BinaryOp::Div => {
                        if y == 0.0 {
                            return Err(self.domain(names, "division by zero".into()));
                        }
                        x / y
                    }
                }
            }
            ExprAst::Pow(a, e) => {
                let x = a.eval(k, names)?;
                if x == 0.0 && *e < 0 {
                    return Err(self.domain(names, "zero raised to a negative power".into()));
                }
                x.powi(*e)
            }
        })
    }

    fn eval_dual(&self, k: &[f64], names: &[String]) -> Result<HyperDual, EvalError> {
        let n = k.len();
        Ok(match self {
            ExprAst::Const(c) => HyperDual::constant(*c, n),
            ExprAst::Var(i) => HyperDual::variable(k[*i], *i, n),
            ExprAst::Unary(func, a) => {
                let x = a.eval_dual(k, names)?;
                match func {
                    UnaryFn::Sin => x.sin(),
                    UnaryFn::Cos => x.cos(),
                    UnaryFn::Exp => x.exp(),
                    UnaryFn::Neg => x.neg(),
                    UnaryFn::Sqrt => {
                        if x.v < 0.0 {
                            return Err(self.domain(names, format!("sqrt of negative value {}", x.v)));
                        }
                        if x.v == 0.0 {
                            return Err(self.domain(names, "sqrt is not differentiable at 0".into()));
                        }
                        x.sqrt()
                    }
                }
            }
            ExprAst::Binary(op, a, b) => {
                let (x, y) = (a.eval_dual(k, names)?, b.eval_dual(k, names)?);
                match op {
                    BinaryOp::Add => x.add(&y),
                    BinaryOp::Sub => x.sub(&y),
                    BinaryOp::Mul => x.mul(&y),
                    BinaryOp::Div => {
                        if y.v == 0.0 {
                            return Err(self.domain(names, "division by zero".into()));
                        }
                        x.mul(&y.recip())
                    }
                }
            }
            ExprAst::Pow(a, e) => {
                let x = a.eval_dual(k, names)?;
                if x.v == 0.0 && *e < 0 {
                    return Err(self.domain(names, "zero raised to a negative power".into()));
                }
                x.powi(*e)
            }
        })
    }

    fn domain(&self, names: &[String], reason: String) -> EvalError {
        EvalError::Domain {
            subexpression: self.display(names).to_string(),
            reason,
        }
    }
}

struct Rendered<'a> {
    ast: &'a ExprAst,
    names: &'a [String],
}

impl<'a> fmt::Display for Rendered<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |a: &'a ExprAst| Rendered { ast: a, names: self.names };
        match self.ast {
            ExprAst::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            ExprAst::Const(c) => write!(f, "{c:?}"),
            ExprAst::Var(i) => match self.names.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "k{}", i + 1),
            },
            ExprAst::Unary(UnaryFn::Neg, a) => write!(f, "(-{})", sub(a)),
            ExprAst::Unary(func, a) => {
                let name = match func {
                    UnaryFn::Sin => "sin",
                    UnaryFn::Cos => "cos",
                    UnaryFn::Exp => "exp",
                    UnaryFn::Sqrt => "sqrt",
                    UnaryFn::Neg => unreachable!(),
                };
                write!(f, "{name}({})", sub(a))
            }
            ExprAst::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => '+',
                    BinaryOp::Sub => '-',
                    BinaryOp::Mul => '*',
                    BinaryOp::Div => '/',
                };
                write!(f, "({} {sym} {})", sub(a), sub(b))
            }
            ExprAst::Pow(a, e) => write!(f, "({})^{e}", sub(a)),
        }
    }
}

/// Value, gradient and Hessian of `ast` at `k` by second-order dual arithmetic.
pub fn eval_with_derivatives(ast: &ExprAst, k: &[f64], names: &[String]) -> Result<Jet, EvalError> {
    let (value, grad, hess) = ast.eval_dual(k, names)?.into_parts();
    Ok(Jet { value, grad, hess })
}

/// A parsed expression usable as an objective.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    variables: Vec<String>,
    ast: ExprAst,
}

impl Expression {
    pub fn parse(source: &str, variables: &[String]) -> Result<Self, ParseError> {
        let ast = parse_expression(source, variables)?;
        Ok(Self {
            source: source.to_string(),
            variables: variables.to_vec(),
            ast,
        })
    }

    pub fn ast(&self) -> &ExprAst {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn pretty(&self) -> String {
        self.ast.display(&self.variables).to_string()
    }
}

impl ScalarField for Expression {
    fn dim(&self) -> usize {
        self.variables.len()
    }

    fn value(&self, k: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(k)?;
        let v = self.ast.eval(k, &self.variables)?;
        super::finite_or(v, self)
    }

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError> {
        self.check_dim(k)?;
        let jet = eval_with_derivatives(&self.ast, k, &self.variables)?;
        let finite = jet.value.is_finite() && jet.grad.iter().all(|g| g.is_finite()) && jet.hess.is_finite();
        if !finite {
            return Err(EvalError::NonFinite { field: self.label() });
        }
        Ok(jet)
    }

    fn label(&self) -> String {
        self.source.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SquareMatrix;
    use std::f64::consts::FRAC_PI_2;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    fn value(src: &str, k: &[f64]) -> f64 {
        parse_expression(src, &xy()).unwrap().eval(k, &xy()).unwrap()
    }

    #[test]
    fn parses_and_evaluates_examples() {
        assert_eq!(value("x^2/4 + y^2", &[2.0, 1.0]), 2.0);
        assert_eq!(value("sin(x)+sin(y)", &[0.0, 0.0]), 0.0);
        let ast = parse_expression("(x-1)^2+(y-1)^2", &xy()).unwrap();
        let jet = eval_with_derivatives(&ast, &[0.0, 0.0], &xy()).unwrap();
        assert_eq!(jet.grad, vec![-2.0, -2.0]);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(value("1 - 2 - 3", &[0.0, 0.0]), -4.0);
        assert_eq!(value("8 / 4 / 2", &[0.0, 0.0]), 1.0);
        assert_eq!(value("1 + 2 * 3", &[0.0, 0.0]), 7.0);
        assert_eq!(value("-x^2", &[3.0, 0.0]), -9.0);
        assert_eq!(value("2*-x", &[3.0, 0.0]), -6.0);
        assert_eq!(value("x^-2", &[2.0, 0.0]), 0.25);
        assert_eq!(value("1.5e1 + .5", &[0.0, 0.0]), 15.5);
    }

    #[test]
    fn derivative_examples() {
        let names = xy();
        let ast = parse_expression("x^2/4 + y^2", &names).unwrap();
        let jet = eval_with_derivatives(&ast, &[2.0, 1.0], &names).unwrap();
        assert_eq!(jet.value, 2.0);
        assert_eq!(jet.grad, vec![1.0, 2.0]);
        assert_eq!(jet.hess, SquareMatrix::from_diag(&[0.5, 2.0]));

        let ast = parse_expression("sin(x)+sin(y)", &names).unwrap();
        let jet = eval_with_derivatives(&ast, &[FRAC_PI_2, FRAC_PI_2], &names).unwrap();
        assert_eq!(jet.value, 2.0);
        assert!(jet.grad.iter().all(|g| g.abs() < 1e-15));
        assert_eq!(jet.hess, SquareMatrix::from_diag(&[-1.0, -1.0]));

        let ast = parse_expression("(x-1)^2+(y-1)^2", &names).unwrap();
        let jet = eval_with_derivatives(&ast, &[0.8, 0.5], &names).unwrap();
        assert!((jet.value - 0.29).abs() < 1e-15);
        assert!((jet.grad[0] + 0.4).abs() < 1e-15 && (jet.grad[1] + 1.0).abs() < 1e-15);
        assert_eq!(jet.hess, SquareMatrix::from_diag(&[2.0, 2.0]));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let names = xy();
        let err = parse_expression("x + * y", &names).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { position: 4, .. }));
        let err = parse_expression("x + z", &names).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier { name: "z".into(), position: 4 }
        );
        let err = parse_expression("x^2.5", &names).unwrap_err();
        assert_eq!(err, ParseError::NonIntegerExponent { position: 2 });
        let err = parse_expression("x^y", &names).unwrap_err();
        assert_eq!(err, ParseError::NonIntegerExponent { position: 2 });
        assert!(parse_expression("(x + y", &names).is_err());
        assert!(parse_expression("x y", &names).is_err());
        assert!(parse_expression("tan(x)", &names).is_err());
        assert!(parse_expression("x $ y", &names).is_err());
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let names = xy();
        let ast = parse_expression("1 + sqrt(x - 2)", &names).unwrap();
        let err = eval_with_derivatives(&ast, &[1.0, 0.0], &names).unwrap_err();
        match err {
            EvalError::Domain { subexpression, .. } => assert_eq!(subexpression, "sqrt((x - 2.0))"),
            other => panic!("unexpected {other:?}"),
        }
        let ast = parse_expression("y / x", &names).unwrap();
        assert!(ast.eval(&[0.0, 1.0], &names).is_err());
        assert!(eval_with_derivatives(&ast, &[0.0, 1.0], &names).is_err());
    }

    #[test]
    fn pretty_print_reparses() {
        let names = xy();
        for src in ["-x^2 + 3*y", "sin(2*x)*cos(y)/(1+x^2)", "exp(-x)^-1 - sqrt(y^2+1)"] {
            let ast = parse_expression(src, &names).unwrap();
            let printed = ast.display(&names).to_string();
            let again = parse_expression(&printed, &names).unwrap();
            assert_eq!(ast, again, "{printed}");
        }
    }
}
