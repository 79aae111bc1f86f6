//! Arithmetic expressions for structural equations.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! Expressions compile to a postfix program that evaluates a whole column of
//! Monte-Carlo samples per instruction. Operands that are constant across the
//! column (literals, clamped variables) stay scalar.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("{function} expects {expected} argument(s), got {got}")]
    Arity {
        function: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} outside its domain")]
    Domain(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Sigmoid,
    Min,
    Max,
    Pow,
    /// `if(c, a, b)`: `a` where `c > 0`, else `b`.
    If,
}

impl Func {
    fn parse(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sigmoid" => Func::Sigmoid,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            "if" => Func::If,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sigmoid => "sigmoid",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::If => "if",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            Func::If => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Every identifier the expression reads.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_names(out),
            Expr::Bin(_, a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_names(out)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }

    /// Compiles against a slot resolver mapping names to input slots.
    pub fn compile(&self, resolve: &impl Fn(&str) -> Option<usize>) -> Result<Program, ExprError> {
        let mut ops = Vec::new();
        self.emit(resolve, &mut ops)?;
        Ok(Program { ops })
    }

    fn emit(
        &self,
        resolve: &impl Fn(&str) -> Option<usize>,
        ops: &mut Vec<Op>,
    ) -> Result<(), ExprError> {
        match self {
            Expr::Num(v) => ops.push(Op::Const(*v)),
            Expr::Var(name) => {
                let slot = resolve(name).ok_or_else(|| ExprError::UnknownName(name.clone()))?;
                ops.push(Op::Load(slot));
            }
            Expr::Neg(e) => {
                e.emit(resolve, ops)?;
                ops.push(Op::Neg);
            }
            Expr::Bin(op, a, b) => {
                a.emit(resolve, ops)?;
                b.emit(resolve, ops)?;
                ops.push(Op::Bin(*op));
            }
            Expr::Call(f, args) => {
                for a in args {
                    a.emit(resolve, ops)?;
                }
                ops.push(Op::Call(*f));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => {
                f.write_str("-")?;
                wrapped(f, e, e.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                if *op == BinOp::Pow {
                    wrapped(f, a, a.precedence() <= p)?;
                    write!(f, "^")?;
                    wrapped(f, b, b.precedence() < 3)
                } else {
                    wrapped(f, a, a.precedence() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    wrapped(f, b, b.precedence() <= p)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            column: self.pos + 1,
            message: message.to_string(),
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

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii identifier")
                    .to_string();
                if self.peek() == Some(b'(') {
                    let func = Func::parse(&name).ok_or_else(|| ExprError::Syntax {
                        column: start + 1,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.sum()?];
                    while self.eat(b',') {
                        args.push(self.sum()?);
                    }
                    if !self.eat(b')') {
                        return Err(self.error("expected `)` or `,`"));
                    }
                    if args.len() != func.arity() {
                        return Err(ExprError::Arity {
                            function: func.name(),
                            expected: func.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::Syntax {
                column: start + 1,
                message: format!("invalid number `{text}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

/// A compiled expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

/// One input slot: constant across samples or one value per sample.
#[derive(Debug, Clone, Copy)]
pub enum Slot<'a> {
    Scalar(f64),
    Column(&'a [f64]),
}

#[derive(Debug)]
enum Value {
    Scalar(f64),
    Column(Vec<f64>),
}

fn guard_div(x: f64, y: f64) -> Result<f64, ExprError> {
    if y == 0.0 {
        Err(ExprError::DivisionByZero)
    } else {
        Ok(x / y)
    }
}

fn guard_log(x: f64) -> Result<f64, ExprError> {
    if x > 0.0 {
        Ok(x.ln())
    } else {
        Err(ExprError::Domain("log argument"))
    }
}

fn guard_sqrt(x: f64) -> Result<f64, ExprError> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else {
        Err(ExprError::Domain("sqrt argument"))
    }
}

fn guard_pow(x: f64, y: f64) -> Result<f64, ExprError> {
    let v = x.powf(y);
    if v.is_nan() && !x.is_nan() && !y.is_nan() {
        Err(ExprError::Domain("pow base"))
    } else {
        Ok(v)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn apply_bin(op: BinOp, x: f64, y: f64) -> Result<f64, ExprError> {
    Ok(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div => guard_div(x, y)?,
        BinOp::Pow => guard_pow(x, y)?,
    })
}

fn apply_unary(f: Func, x: f64) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Exp => x.exp(),
        Func::Log => guard_log(x)?,
        Func::Sqrt => guard_sqrt(x)?,
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Abs => x.abs(),
        Func::Sigmoid => sigmoid(x),
        _ => unreachable!("not a unary function"),
    })
}

impl Value {
    fn map(self, f: impl Fn(f64) -> Result<f64, ExprError>) -> Result<Value, ExprError> {
        match self {
            Value::Scalar(x) => Ok(Value::Scalar(f(x)?)),
            Value::Column(mut c) => {
                for v in c.iter_mut() {
                    *v = f(*v)?;
                }
                Ok(Value::Column(c))
            }
        }
    }

    fn zip(
        self,
        other: Value,
        f: impl Fn(f64, f64) -> Result<f64, ExprError>,
    ) -> Result<Value, ExprError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(f(a, b)?)),
            (Value::Scalar(a), Value::Column(mut c)) => {
                for v in c.iter_mut() {
                    *v = f(a, *v)?;
                }
                Ok(Value::Column(c))
            }
            (Value::Column(mut c), Value::Scalar(b)) => {
                for v in c.iter_mut() {
                    *v = f(*v, b)?;
                }
                Ok(Value::Column(c))
            }
            (Value::Column(mut c), Value::Column(d)) => {
                for (v, w) in c.iter_mut().zip(d) {
                    *v = f(*v, w)?;
                }
                Ok(Value::Column(c))
            }
        }
    }
}

impl Program {
    /// Evaluates into an owned column of length `n`.
    pub fn eval_column(&self, slots: &[Slot<'_>], n: usize) -> Result<Vec<f64>, ExprError> {
        match self.eval_value(slots, n)? {
            Value::Scalar(x) => Ok(vec![x; n]),
            Value::Column(c) => Ok(c),
        }
    }

    /// Evaluates and reports whether the result is constant across samples.
    pub fn eval_scalar_or_column(
        &self,
        slots: &[Slot<'_>],
        n: usize,
    ) -> Result<Result<f64, Vec<f64>>, ExprError> {
        match self.eval_value(slots, n)? {
            Value::Scalar(x) => Ok(Ok(x)),
            Value::Column(c) => Ok(Err(c)),
        }
    }

    fn eval_value(&self, slots: &[Slot<'_>], _n: usize) -> Result<Value, ExprError> {
        let mut stack: Vec<Value> = Vec::with_capacity(8);
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(Value::Scalar(v)),
                Op::Load(i) => stack.push(match slots[i] {
                    Slot::Scalar(x) => Value::Scalar(x),
                    Slot::Column(c) => Value::Column(c.to_vec()),
                }),
                Op::Neg => {
                    let a = stack.pop().expect("operand");
                    stack.push(a.map(|x| Ok(-x))?);
                }
                Op::Bin(b) => {
                    let rhs = stack.pop().expect("operand");
                    let lhs = stack.pop().expect("operand");
                    stack.push(lhs.zip(rhs, |x, y| apply_bin(b, x, y))?);
                }
                Op::Call(f) => match f.arity() {
                    1 => {
                        let a = stack.pop().expect("operand");
                        stack.push(a.map(|x| apply_unary(f, x))?);
                    }
                    2 => {
                        let rhs = stack.pop().expect("operand");
                        let lhs = stack.pop().expect("operand");
                        let v = match f {
                            Func::Min => lhs.zip(rhs, |x, y| Ok(x.min(y)))?,
                            Func::Max => lhs.zip(rhs, |x, y| Ok(x.max(y)))?,
                            Func::Pow => lhs.zip(rhs, guard_pow)?,
                            _ => unreachable!("binary function"),
                        };
                        stack.push(v);
                    }
                    _ => {
                        let otherwise = stack.pop().expect("operand");
                        let then = stack.pop().expect("operand");
                        let cond = stack.pop().expect("operand");
                        stack.push(select(cond, then, otherwise));
                    }
                },
            }
        }
        Ok(stack.pop().expect("program leaves one value"))
    }
}

fn select(cond: Value, then: Value, otherwise: Value) -> Value {
    let at = |v: &Value, i: usize| match v {
        Value::Scalar(x) => *x,
        Value::Column(c) => c[i],
    };
    let len = [&cond, &then, &otherwise].iter().find_map(|v| match v {
        Value::Column(c) => Some(c.len()),
        Value::Scalar(_) => None,
    });
    match len {
        None => Value::Scalar(if at(&cond, 0) > 0.0 {
            at(&then, 0)
        } else {
            at(&otherwise, 0)
        }),
        Some(n) => Value::Column(
            (0..n)
                .map(|i| {
                    if at(&cond, i) > 0.0 {
                        at(&then, i)
                    } else {
                        at(&otherwise, i)
                    }
                })
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval1(text: &str, vars: &[(&str, f64)]) -> Result<f64, ExprError> {
        let e = Expr::parse(text)?;
        let names: Vec<&str> = vars.iter().map(|(n, _)| *n).collect();
        let prog = e.compile(&|n: &str| names.iter().position(|m| *m == n))?;
        let slots: Vec<Slot> = vars.iter().map(|(_, v)| Slot::Scalar(*v)).collect();
        match prog.eval_scalar_or_column(&slots, 1)? {
            Ok(x) => Ok(x),
            Err(c) => Ok(c[0]),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval1("1 + 2 * 3", &[]).unwrap(), 7.0);
        assert_eq!(eval1("8 - 3 - 2", &[]).unwrap(), 3.0);
        assert_eq!(eval1("2 ^ 3 ^ 2", &[]).unwrap(), 512.0);
        assert_eq!(eval1("-2 ^ 2", &[]).unwrap(), -4.0);
        assert_eq!(eval1("(-2) ^ 2", &[]).unwrap(), 4.0);
        assert_eq!(eval1("2 ^ -1", &[]).unwrap(), 0.5);
        assert_eq!(eval1("1.5e1 / 3", &[]).unwrap(), 5.0);
    }

    #[test]
    fn functions_and_variables() {
        let v = eval1(
            "x * exp(0) + max(y, 3) - abs(-1) + if(x - 1, 10, 20)",
            &[("x", 2.0), ("y", 1.0)],
        );
        assert_eq!(v.unwrap(), 2.0 + 3.0 - 1.0 + 10.0);
        assert!((eval1("sigmoid(0)", &[]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn guarded_arithmetic() {
        assert_eq!(
            eval1("1 / (x - 1)", &[("x", 1.0)]),
            Err(ExprError::DivisionByZero)
        );
        assert_eq!(eval1("log(0)", &[]), Err(ExprError::Domain("log argument")));
        assert_eq!(
            eval1("sqrt(-1)", &[]),
            Err(ExprError::Domain("sqrt argument"))
        );
        assert!(eval1("(-8) ^ 0.5", &[]).is_err());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(Expr::parse("1 +"), Err(ExprError::Syntax { .. })));
        assert!(matches!(
            Expr::parse("foo(1)"),
            Err(ExprError::Syntax { .. })
        ));
        assert!(matches!(Expr::parse("(1"), Err(ExprError::Syntax { .. })));
        assert!(matches!(
            Expr::parse("min(1)"),
            Err(ExprError::Arity { .. })
        ));
        assert!(matches!(Expr::parse("1 2"), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn unknown_names_fail_to_compile() {
        let e = Expr::parse("a + b").unwrap();
        let err = e.compile(&|n: &str| (n == "a").then_some(0)).unwrap_err();
        assert_eq!(err, ExprError::UnknownName("b".into()));
    }

    #[test]
    fn columns_and_scalars_mix() {
        let e = Expr::parse("a * b + 1").unwrap();
        let prog = e
            .compile(&|n: &str| ["a", "b"].iter().position(|m| *m == n))
            .unwrap();
        let col = [1.0, 2.0, 3.0];
        let out = prog
            .eval_column(&[Slot::Column(&col), Slot::Scalar(2.0)], 3)
            .unwrap();
        assert_eq!(out, vec![3.0, 5.0, 7.0]);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|v| Expr::Num(v as f64 / 8.0)),
            prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(|s| Expr::Var(s.into())),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                inner.clone().prop_map(|e| Expr::Call(Func::Exp, vec![e])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parses_back_to_the_same_tree(e in arb_expr()) {
            let printed = e.to_string();
            prop_assert_eq!(Expr::parse(&printed).unwrap(), e);
        }
    }
}
