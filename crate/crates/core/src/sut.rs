//! A small arithmetic SUT language: numbers and booleans, let-bindings, a
//! single return expression, conditionals, builtin calls, and recursion on
//! the program itself.
//!
//! Programs carry a homogeneity tag. [`degree_of`] is a static analysis that
//! computes the scaling degree of a program body; mutation uses it to decide
//! whether a mutant keeps the tag.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::BlockKind;

const MAX_DEPTH: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SutError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("line {line}, col {col}: expected {expected}")]
    Parse { line: usize, col: usize, expected: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Value {
    Num(f64),
    Bool(bool),
}

impl Value {
    pub fn num(self) -> Result<f64, SutError> {
        match self {
            Value::Num(x) => Ok(x),
            Value::Bool(_) => Err(SutError::Type("expected a number".into())),
        }
    }

    pub fn boolean(self) -> Result<bool, SutError> {
        match self {
            Value::Bool(b) => Ok(b),
            Value::Num(_) => Err(SutError::Type("expected a boolean".into())),
        }
    }

    /// Numeric view used by relation checks; booleans map to 0 and 1.
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Num(x) => x,
            Value::Bool(b) => b as u8 as f64,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Type {
    Num,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Gt,
    Ge,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Ne => "!=",
        }
    }

    fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Builtin {
    Sqrt,
    Abs,
    Min,
    Max,
    Gcd,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Gcd => "gcd",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sqrt | Builtin::Abs => 1,
            _ => 2,
        }
    }

    fn from_name(s: &str) -> Option<Builtin> {
        [Builtin::Sqrt, Builtin::Abs, Builtin::Min, Builtin::Max, Builtin::Gcd]
            .into_iter()
            .find(|b| b.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Num(f64),
    Bool(bool),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Builtin, Vec<Expr>),
    /// Call of the enclosing program.
    Recur(Vec<Expr>),
}

impl Expr {
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Bool(_) | Expr::Var(_) => vec![],
            Expr::Bin(_, a, b) | Expr::Cmp(_, a, b) => vec![a, b],
            Expr::Cond(g, t, e) => vec![g, t, e],
            Expr::Neg(a) => vec![a],
            Expr::Call(_, args) | Expr::Recur(args) => args.iter().collect(),
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Num(_) | Expr::Bool(_) | Expr::Var(_) => vec![],
            Expr::Bin(_, a, b) | Expr::Cmp(_, a, b) => vec![a.as_mut(), b.as_mut()],
            Expr::Cond(g, t, e) => vec![g.as_mut(), t.as_mut(), e.as_mut()],
            Expr::Neg(a) => vec![a.as_mut()],
            Expr::Call(_, args) | Expr::Recur(args) => args.iter_mut().collect(),
        }
    }

    /// Pre-order traversal with child-index paths.
    pub fn walk(&self) -> Vec<(Vec<usize>, &Expr)> {
        let mut out = Vec::new();
        fn go<'a>(e: &'a Expr, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Expr)>) {
            out.push((path.clone(), e));
            for (i, c) in e.children().into_iter().enumerate() {
                path.push(i);
                go(c, path, out);
                path.pop();
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Expr> {
        let mut cur = self;
        for &i in path {
            cur = cur.children_mut().into_iter().nth(i)?;
        }
        Some(cur)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Cond(g, t, e) => write!(f, "({g} ? {t} : {e})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(b, args) => write!(f, "{}({})", b.name(), join(args)),
            Expr::Recur(args) => write!(f, "self({})", join(args)),
        }
    }
}

fn join(args: &[Expr]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Homogeneity {
    /// f(λx) = λ f(x) for λ > 0.
    Degree1,
    /// f(λx) = f(x) for λ > 0.
    ScaleInvariant,
    None,
}

impl Homogeneity {
    pub fn token(self) -> &'static str {
        match self {
            Homogeneity::Degree1 => "degree-1",
            Homogeneity::ScaleInvariant => "scale-invariant",
            Homogeneity::None => "none",
        }
    }

    /// Scaling exponent, if any.
    pub fn degree(self) -> Option<i32> {
        match self {
            Homogeneity::Degree1 => Some(1),
            Homogeneity::ScaleInvariant => Some(0),
            Homogeneity::None => None,
        }
    }
}

impl FromStr for Homogeneity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree-1" => Ok(Homogeneity::Degree1),
            "scale-invariant" => Ok(Homogeneity::ScaleInvariant),
            "none" => Ok(Homogeneity::None),
            _ => Err(format!("unknown homogeneity `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamKind {
    Real,
    Int,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SutProgram {
    pub name: String,
    pub params: Vec<Param>,
    pub declared_blocks: BTreeSet<BlockKind>,
    pub homogeneity: Homogeneity,
    /// Domain predicate; points failing it are outside the domain.
    pub require: Option<Expr>,
    pub lets: Vec<(String, Expr)>,
    pub body: Expr,
}

impl SutProgram {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Number of sections that hold mutable code: each let, then the body.
    pub fn sections(&self) -> usize {
        self.lets.len() + 1
    }

    pub fn section(&self, i: usize) -> &Expr {
        if i < self.lets.len() {
            &self.lets[i].1
        } else {
            &self.body
        }
    }

    pub fn section_mut(&mut self, i: usize) -> &mut Expr {
        if i < self.lets.len() {
            &mut self.lets[i].1
        } else {
            &mut self.body
        }
    }

    pub fn eval(&self, args: &[Value]) -> Result<Value, SutError> {
        self.eval_depth(args, 0)
    }

    fn eval_depth(&self, args: &[Value], depth: usize) -> Result<Value, SutError> {
        if args.len() != self.arity() {
            return Err(SutError::Arity {
                name: self.name.clone(),
                expected: self.arity(),
                got: args.len(),
            });
        }
        if depth > MAX_DEPTH {
            return Err(SutError::Domain("recursion depth exceeded".into()));
        }
        let mut env: Vec<(&str, Value)> = self
            .params
            .iter()
            .map(|p| p.name.as_str())
            .zip(args.iter().copied())
            .collect();
        for (name, e) in &self.lets {
            let v = self.eval_expr(e, &env, depth)?;
            env.push((name.as_str(), v));
        }
        self.eval_expr(&self.body, &env, depth)
    }

    /// Whether `args` satisfies the domain predicate.
    pub fn in_domain(&self, args: &[Value]) -> bool {
        match &self.require {
            None => true,
            Some(r) => {
                let env: Vec<(&str, Value)> = self
                    .params
                    .iter()
                    .map(|p| p.name.as_str())
                    .zip(args.iter().copied())
                    .collect();
                matches!(self.eval_expr(r, &env, 0), Ok(Value::Bool(true)))
            }
        }
    }

    fn eval_expr(&self, e: &Expr, env: &[(&str, Value)], depth: usize) -> Result<Value, SutError> {
        Ok(match e {
            Expr::Num(x) => Value::Num(*x),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, val)| *val)
                .ok_or_else(|| SutError::Type(format!("unbound variable `{v}`")))?,
            Expr::Bin(op, a, b) => {
                let x = self.eval_expr(a, env, depth)?.num()?;
                let y = self.eval_expr(b, env, depth)?.num()?;
                Value::Num(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(SutError::Domain("division by zero".into()));
                        }
                        x / y
                    }
                    BinOp::Mod => {
                        if y == 0.0 {
                            return Err(SutError::Domain("mod by zero".into()));
                        }
                        x % y
                    }
                })
            }
            Expr::Cmp(op, a, b) => {
                let x = self.eval_expr(a, env, depth)?.num()?;
                let y = self.eval_expr(b, env, depth)?.num()?;
                Value::Bool(op.apply(x, y))
            }
            Expr::Cond(g, t, f) => {
                if self.eval_expr(g, env, depth)?.boolean()? {
                    self.eval_expr(t, env, depth)?
                } else {
                    self.eval_expr(f, env, depth)?
                }
            }
            Expr::Neg(a) => Value::Num(-self.eval_expr(a, env, depth)?.num()?),
            Expr::Call(b, args) => {
                if args.len() != b.arity() {
                    return Err(SutError::Arity {
                        name: b.name().into(),
                        expected: b.arity(),
                        got: args.len(),
                    });
                }
                let vals = args
                    .iter()
                    .map(|a| self.eval_expr(a, env, depth)?.num())
                    .collect::<Result<Vec<_>, _>>()?;
                Value::Num(apply_builtin(*b, &vals)?)
            }
            Expr::Recur(args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval_expr(a, env, depth))
                    .collect::<Result<Vec<_>, _>>()?;
                self.eval_depth(&vals, depth + 1)?
            }
        })
    }

    /// Infers the return type, checking every subexpression.
    pub fn typecheck(&self) -> Result<Type, SutError> {
        let mut env: Vec<(String, Type)> =
            self.params.iter().map(|p| (p.name.clone(), Type::Num)).collect();
        if let Some(r) = &self.require {
            if type_of(r, &env, None)? != Type::Bool {
                return Err(SutError::Type("require clause must be boolean".into()));
            }
        }
        for (name, e) in &self.lets {
            let t = type_of(e, &env, None)?;
            env.push((name.clone(), t));
        }
        // Recursive calls take the type of the non-recursive branches.
        let ret = type_of(&self.body, &env, None)?;
        type_of(&self.body, &env, Some(ret))?;
        Ok(ret)
    }
}

fn apply_builtin(b: Builtin, v: &[f64]) -> Result<f64, SutError> {
    Ok(match b {
        Builtin::Sqrt => {
            if v[0] < 0.0 {
                return Err(SutError::Domain("sqrt of a negative number".into()));
            }
            v[0].sqrt()
        }
        Builtin::Abs => v[0].abs(),
        Builtin::Min => v[0].min(v[1]),
        Builtin::Max => v[0].max(v[1]),
        Builtin::Gcd => {
            let (mut a, mut b) = (v[0].abs(), v[1].abs());
            let mut steps = 0;
            while b != 0.0 {
                let r = a % b;
                a = b;
                b = r;
                steps += 1;
                if steps > 10_000 {
                    return Err(SutError::Domain("gcd did not terminate".into()));
                }
            }
            a
        }
    })
}

fn type_of(e: &Expr, env: &[(String, Type)], recur: Option<Type>) -> Result<Type, SutError> {
    let expect = |e: &Expr, want: Type| -> Result<(), SutError> {
        let got = type_of(e, env, recur)?;
        if got != want {
            return Err(SutError::Type(format!("`{e}` has type {got:?}, expected {want:?}")));
        }
        Ok(())
    };
    Ok(match e {
        Expr::Num(_) => Type::Num,
        Expr::Bool(_) => Type::Bool,
        Expr::Var(v) => env
            .iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, t)| *t)
            .ok_or_else(|| SutError::Type(format!("unbound variable `{v}`")))?,
        Expr::Bin(_, a, b) => {
            expect(a, Type::Num)?;
            expect(b, Type::Num)?;
            Type::Num
        }
        Expr::Cmp(_, a, b) => {
            expect(a, Type::Num)?;
            expect(b, Type::Num)?;
            Type::Bool
        }
        Expr::Cond(g, t, f) => {
            expect(g, Type::Bool)?;
            let tt = type_of(t, env, recur);
            let tf = type_of(f, env, recur);
            match (tt, tf) {
                (Ok(a), Ok(b)) if a == b => a,
                (Ok(a), Ok(b)) => {
                    return Err(SutError::Type(format!("branches differ: {a:?} and {b:?}")))
                }
                (Ok(a), Err(_)) | (Err(_), Ok(a)) if recur.is_none() => a,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        Expr::Neg(a) => {
            expect(a, Type::Num)?;
            Type::Num
        }
        Expr::Call(b, args) => {
            if args.len() != b.arity() {
                return Err(SutError::Arity {
                    name: b.name().into(),
                    expected: b.arity(),
                    got: args.len(),
                });
            }
            for a in args {
                expect(a, Type::Num)?;
            }
            Type::Num
        }
        Expr::Recur(args) => {
            for a in args {
                expect(a, Type::Num)?;
            }
            match recur {
                Some(t) => t,
                None => return Err(SutError::Type("recursive call outside a branch".into())),
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    end_col: usize,
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Lexer, SutError> {
    const SYMS: [&str; 16] = [
        "<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/", "?", ":", "(", ")", ",", "=",
    ];
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = col0 + i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| SutError::Parse {
                line,
                col,
                expected: "number".into(),
            })?;
            toks.push((Tok::Num(v), col));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                toks.push((Tok::Sym(s), col));
                i += s.len();
            }
            None => {
                return Err(SutError::Parse {
                    line,
                    col,
                    expected: "operator, number, or identifier".into(),
                })
            }
        }
    }
    Ok(Lexer {
        toks,
        end_col: col0 + chars.len(),
    })
}

struct ExprParser<'a> {
    lx: Lexer,
    pos: usize,
    line: usize,
    self_name: &'a str,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.lx.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.lx.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.lx.end_col)
    }

    fn err(&self, expected: &str) -> SutError {
        SutError::Parse {
            line: self.line,
            col: self.col(),
            expected: expected.into(),
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        match self.peek() {
            Some(Tok::Sym(t)) if *t == s => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), SutError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("`{s}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, SutError> {
        let c = self.cmp()?;
        if self.eat("?") {
            let t = self.expr()?;
            self.expect(":")?;
            let f = self.expr()?;
            return Ok(Expr::Cond(Box::new(c), Box::new(t), Box::new(f)));
        }
        Ok(c)
    }

    fn cmp(&mut self) -> Result<Expr, SutError> {
        let a = self.add()?;
        let op = match self.peek() {
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym("==")) => CmpOp::Eq,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            _ => return Ok(a),
        };
        self.pos += 1;
        let b = self.add()?;
        Ok(Expr::Cmp(op, Box::new(a), Box::new(b)))
    }

    fn add(&mut self) -> Result<Expr, SutError> {
        let mut a = self.mul()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("+")) => BinOp::Add,
                Some(Tok::Sym("-")) => BinOp::Sub,
                _ => return Ok(a),
            };
            self.pos += 1;
            let b = self.mul()?;
            a = Expr::Bin(op, Box::new(a), Box::new(b));
        }
    }

    fn mul(&mut self) -> Result<Expr, SutError> {
        let mut a = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("*")) => BinOp::Mul,
                Some(Tok::Sym("/")) => BinOp::Div,
                Some(Tok::Ident(s)) if s == "mod" => BinOp::Mod,
                _ => return Ok(a),
            };
            self.pos += 1;
            let b = self.unary()?;
            a = Expr::Bin(op, Box::new(a), Box::new(b));
        }
    }

    fn unary(&mut self) -> Result<Expr, SutError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Expr>, SutError> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn atom(&mut self) -> Result<Expr, SutError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => return Ok(Expr::Bool(true)),
                    "false" => return Ok(Expr::Bool(false)),
                    _ => {}
                }
                if self.peek() == Some(&Tok::Sym("(")) {
                    let col = self.col();
                    let args = self.args()?;
                    if name == "self" || name == self.self_name {
                        return Ok(Expr::Recur(args));
                    }
                    return match Builtin::from_name(&name) {
                        Some(b) => Ok(Expr::Call(b, args)),
                        None => Err(SutError::Parse {
                            line: self.line,
                            col,
                            expected: "builtin sqrt, abs, min, max, or gcd".into(),
                        }),
                    };
                }
                Ok(Expr::Var(name))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.err("expression")),
        }
    }
}

/// Parses one infix expression. `line` and `col0` locate errors.
pub fn parse_expr(src: &str, self_name: &str, line: usize, col0: usize) -> Result<Expr, SutError> {
    let lx = lex(src, line, col0)?;
    let mut p = ExprParser {
        lx,
        pos: 0,
        line,
        self_name,
    };
    let e = p.expr()?;
    if p.pos != p.lx.toks.len() {
        return Err(p.err("end of expression"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Homogeneity

/// Scaling degree of a subexpression under x -> λx for all parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degree {
    /// The literal zero, homogeneous of every degree.
    Zero,
    /// Degree in half units, so sqrt stays exact.
    Half(i64),
    /// A boolean unchanged by positive scaling.
    Invariant,
    NotHomogeneous,
}

impl Degree {
    fn unify(self, other: Degree) -> Degree {
        use Degree::*;
        match (self, other) {
            (NotHomogeneous, _) | (_, NotHomogeneous) => NotHomogeneous,
            (Zero, d) | (d, Zero) => d,
            (Half(a), Half(b)) if a == b => Half(a),
            (Invariant, Invariant) => Invariant,
            _ => NotHomogeneous,
        }
    }
}

/// Static scaling degree of the program body. Recursive calls whose
/// arguments all have degree one take `target` (inductive hypothesis).
pub fn degree_of(p: &SutProgram, target: i32) -> Degree {
    let mut env: BTreeMap<&str, Degree> =
        p.params.iter().map(|x| (x.name.as_str(), Degree::Half(2))).collect();
    for (name, e) in &p.lets {
        let d = expr_degree(e, &env, target);
        env.insert(name.as_str(), d);
    }
    expr_degree(&p.body, &env, target)
}

fn expr_degree(e: &Expr, env: &BTreeMap<&str, Degree>, target: i32) -> Degree {
    use Degree::*;
    let d = |x: &Expr| expr_degree(x, env, target);
    match e {
        Expr::Num(x) if *x == 0.0 => Zero,
        Expr::Num(_) => Half(0),
        Expr::Bool(_) => Invariant,
        Expr::Var(v) => env.get(v.as_str()).copied().unwrap_or(NotHomogeneous),
        Expr::Bin(op, a, b) => {
            let (da, db) = (d(a), d(b));
            if da == Invariant || db == Invariant {
                return NotHomogeneous;
            }
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mod => match (op, da, db) {
                    (BinOp::Mod, _, Zero) => NotHomogeneous,
                    (BinOp::Mod, Zero, Half(_)) => Zero,
                    _ => da.unify(db),
                },
                BinOp::Mul => match (da, db) {
                    (NotHomogeneous, _) | (_, NotHomogeneous) => NotHomogeneous,
                    (Zero, _) | (_, Zero) => Zero,
                    (Half(x), Half(y)) => Half(x + y),
                    _ => NotHomogeneous,
                },
                BinOp::Div => match (da, db) {
                    (_, Zero) | (NotHomogeneous, _) | (_, NotHomogeneous) => NotHomogeneous,
                    (Zero, Half(_)) => Zero,
                    (Half(x), Half(y)) => Half(x - y),
                    _ => NotHomogeneous,
                },
            }
        }
        Expr::Cmp(_, a, b) => match d(a).unify(d(b)) {
            Zero | Half(_) => Invariant,
            _ => NotHomogeneous,
        },
        Expr::Cond(g, t, f) => {
            if d(g) != Invariant {
                return NotHomogeneous;
            }
            d(t).unify(d(f))
        }
        Expr::Neg(a) => d(a),
        Expr::Call(b, args) => {
            let ds: Vec<Degree> = args.iter().map(d).collect();
            if ds.iter().any(|x| *x == Invariant || *x == NotHomogeneous) {
                return NotHomogeneous;
            }
            match b {
                Builtin::Sqrt => match ds[0] {
                    Zero => Zero,
                    Half(x) if x % 2 == 0 => Half(x / 2),
                    _ => NotHomogeneous,
                },
                Builtin::Abs => ds[0],
                Builtin::Min | Builtin::Max | Builtin::Gcd => ds[0].unify(ds[1]),
            }
        }
        Expr::Recur(args) => {
            let ok = args.iter().all(|a| matches!(d(a), Zero | Half(2)));
            if ok {
                Half(2 * target as i64)
            } else {
                NotHomogeneous
            }
        }
    }
}

/// Whether the static analysis certifies the program's homogeneity tag.
pub fn certifies(p: &SutProgram, h: Homogeneity) -> bool {
    match h.degree() {
        None => false,
        Some(k) => match degree_of(p, k) {
            Degree::Zero => true,
            Degree::Half(x) => x == 2 * k as i64,
            _ => false,
        },
    }
}

fn outputs_match(a: Value, b: Value, tol: f64) -> bool {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Num(x), Value::Num(y)) => {
            if x == y {
                return true;
            }
            (x - y).abs() <= tol * 1f64.max(x.abs()).max(y.abs())
        }
        _ => false,
    }
}

/// Sampled check of f(λx) = λ^d f(x). Points outside the domain, and pairs
/// where both sides raise, are skipped. One side raising is a violation.
pub fn check_homogeneity(
    p: &SutProgram,
    degree: i32,
    points: &[Vec<Value>],
    lambdas: &[f64],
    tol: f64,
) -> bool {
    for x in points {
        if !p.in_domain(x) {
            continue;
        }
        for &lam in lambdas {
            let scaled: Vec<Value> = x.iter().map(|v| Value::Num(v.as_f64() * lam)).collect();
            let lhs = p.eval(&scaled);
            let rhs = p.eval(x);
            match (lhs, rhs) {
                (Err(_), Err(_)) => {}
                (Ok(l), Ok(r)) => {
                    let expected = match r {
                        Value::Num(v) => Value::Num(v * lam.powi(degree)),
                        b => b,
                    };
                    if !outputs_match(l, expected, tol) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}

/// Compares outputs with a relative tolerance; exposed for the harness.
pub fn values_close(a: Value, b: Value, tol: f64) -> bool {
    outputs_match(a, b, tol)
}

// ---------------------------------------------------------------------------
// Sampling

/// Every integer tuple in `[-r, r]^k` that lies in the domain.
pub fn integer_grid(p: &SutProgram, r: i64) -> Vec<Vec<Value>> {
    let k = p.arity();
    let side = (2 * r + 1) as usize;
    let total = side.pow(k as u32);
    let mut out = Vec::new();
    for mut idx in 0..total {
        let mut pt = Vec::with_capacity(k);
        for _ in 0..k {
            pt.push(Value::Num((idx % side) as f64 - r as f64));
            idx /= side;
        }
        if p.in_domain(&pt) {
            out.push(pt);
        }
    }
    out
}

/// `n` seeded domain points: the origin when admissible, then a mix of
/// small-integer and uniform points in `[-10, 10]`.
pub fn sample_points(p: &SutProgram, n: usize, seed: u64) -> Vec<Vec<Value>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let origin = vec![Value::Num(0.0); p.arity()];
    if n > 0 && p.in_domain(&origin) {
        out.push(origin);
    }
    let mut attempts = 0;
    while out.len() < n && attempts < 200 * n.max(1) {
        attempts += 1;
        let integral = attempts % 2 == 0;
        let pt: Vec<Value> = p
            .params
            .iter()
            .map(|prm| {
                let v = if integral || prm.kind == ParamKind::Int {
                    rng.gen_range(-10i64..=10) as f64
                } else {
                    rng.gen_range(-10.0..10.0)
                };
                Value::Num(v)
            })
            .collect();
        if p.in_domain(&pt) {
            out.push(pt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(params: &[&str], lets: &[(&str, &str)], body: &str, h: Homogeneity) -> SutProgram {
        let name = "f";
        SutProgram {
            name: name.into(),
            params: params
                .iter()
                .map(|p| Param { name: p.to_string(), kind: ParamKind::Real })
                .collect(),
            declared_blocks: BTreeSet::new(),
            homogeneity: h,
            require: None,
            lets: lets
                .iter()
                .map(|(n, e)| (n.to_string(), parse_expr(e, name, 1, 0).unwrap()))
                .collect(),
            body: parse_expr(body, name, 1, 0).unwrap(),
        }
    }

    #[test]
    fn midpoint_evaluates() {
        let p = prog(&["a", "b"], &[], "(a + b) / 2", Homogeneity::Degree1);
        assert_eq!(p.eval(&[Value::Num(2.0), Value::Num(4.0)]).unwrap(), Value::Num(3.0));
    }

    #[test]
    fn precedence_and_conditionals() {
        let e = parse_expr("1 + 2 * 3 < 8 ? -1 : 4 mod 3", "f", 1, 0).unwrap();
        assert_eq!(e.to_string(), "(((1 + (2 * 3)) < 8) ? (-1) : (4 mod 3))");
    }

    #[test]
    fn gcd_recursion() {
        let p = prog(
            &["a", "b"],
            &[("a1", "a < 0 ? -a : a"), ("b1", "b < 0 ? -b : b")],
            "b1 == 0 ? a1 : f(b1, a1 mod b1)",
            Homogeneity::Degree1,
        );
        let v = |a: f64, b: f64| p.eval(&[Value::Num(a), Value::Num(b)]).unwrap();
        assert_eq!(v(12.0, 18.0), Value::Num(6.0));
        assert_eq!(v(-12.0, 18.0), Value::Num(6.0));
        assert_eq!(v(7.0, 0.0), Value::Num(7.0));
        assert!(certifies(&p, Homogeneity::Degree1));
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let p = prog(&["a"], &[], "a / 0", Homogeneity::None);
        assert!(matches!(p.eval(&[Value::Num(1.0)]), Err(SutError::Domain(_))));
    }

    #[test]
    fn arity_mismatch() {
        let p = prog(&["a", "b"], &[], "a", Homogeneity::None);
        assert!(matches!(p.eval(&[Value::Num(1.0)]), Err(SutError::Arity { .. })));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_expr("a + * b", "f", 3, 10) {
            Err(SutError::Parse { line, col, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(col, 14);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_expr("foo(1)", "f", 1, 0).is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in ["(a + b) / 2", "x < lo ? lo : (x > hi ? hi : x)", "sqrt(x * x + y * y)", "-(-a)", "f(b, a mod b)"] {
            let e = parse_expr(src, "f", 1, 0).unwrap();
            let again = parse_expr(&e.to_string(), "f", 1, 0).unwrap();
            assert_eq!(e, again);
        }
    }

    #[test]
    fn degree_analysis_examples() {
        let d1 = Homogeneity::Degree1;
        assert!(certifies(&prog(&["a", "b"], &[], "(a + b) / 2", d1), d1));
        assert!(certifies(&prog(&["a", "b"], &[], "(a - b) * 2", d1), d1));
        assert!(!certifies(&prog(&["a", "b"], &[], "(a + b) mod 2", d1), d1));
        assert!(!certifies(&prog(&["a", "b"], &[], "a * b", d1), d1));
        assert!(certifies(&prog(&["x", "y"], &[], "sqrt(x * x + y * y)", d1), d1));
        assert!(!certifies(&prog(&["x", "y"], &[], "sqrt(x / x + y * y)", d1), d1));
        assert!(!certifies(&prog(&["x", "y"], &[], "1", d1), d1));
        let si = Homogeneity::ScaleInvariant;
        assert!(certifies(&prog(&["x"], &[], "x > 0 ? 1 : (x < 0 ? -1 : 0)", si), si));
        assert!(!certifies(&prog(&["x"], &[], "x > 1 ? 1 : 0", si), si));
    }

    #[test]
    fn sampled_check_agrees_with_analysis_on_clamp() {
        let p = prog(&["x", "lo", "hi"], &[], "x < lo ? lo : (x > hi ? hi : x)", Homogeneity::Degree1);
        let pts = sample_points(&p, 200, 3);
        assert!(check_homogeneity(&p, 1, &pts, &[0.5, 2.0, 7.0], 1e-9));
        let q = prog(&["x", "lo", "hi"], &[], "x < lo ? lo : (x > hi ? hi : x + 1)", Homogeneity::Degree1);
        assert!(!check_homogeneity(&q, 1, &pts, &[0.5, 2.0, 7.0], 1e-9));
    }

    #[test]
    fn typecheck_rejects_mixed_branches() {
        let p = prog(&["x"], &[], "x > 0 ? true : 1", Homogeneity::None);
        assert!(p.typecheck().is_err());
        let q = prog(&["a", "b", "c"], &[], "a < b ? b < c : false", Homogeneity::None);
        assert_eq!(q.typecheck().unwrap(), Type::Bool);
    }
}
