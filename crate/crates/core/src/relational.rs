//! A small bag-semantics relational evaluator, the rewrite rules of the
//! relational algebra fixture, and the four rewrite-block MRs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::RewriteDecl;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("attribute `{0}` does not resolve")]
    UnresolvedAttribute(String),
    #[error("rule `{rule}`: {reason}")]
    Pattern { rule: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Val {
    Int(i64),
    Str(String),
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Int(i) => write!(f, "{i}"),
            Val::Str(s) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub schema: Vec<String>,
    pub rows: Vec<Vec<Val>>,
}

impl Relation {
    pub fn new(schema: &[&str], rows: Vec<Vec<Val>>) -> Result<Self, RelError> {
        if let Some(r) = rows.iter().find(|r| r.len() != schema.len()) {
            return Err(RelError::SchemaMismatch(format!(
                "row of arity {} under schema of arity {}",
                r.len(),
                schema.len()
            )));
        }
        Ok(Relation {
            schema: schema.iter().map(|s| s.to_string()).collect(),
            rows,
        })
    }

    pub fn empty(schema: Vec<String>) -> Self {
        Relation { schema, rows: Vec::new() }
    }

    fn col(&self, attr: &str) -> Result<usize, RelError> {
        self.schema
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| RelError::UnresolvedAttribute(attr.to_string()))
    }
}

/// Multiset equality. Columns are aligned by name when both schemas carry
/// the same names, and compared by position otherwise.
pub fn bag_eq(a: &Relation, b: &Relation) -> bool {
    if a.schema.len() != b.schema.len() || a.rows.len() != b.rows.len() {
        return false;
    }
    let mut sa = a.schema.clone();
    let mut sb = b.schema.clone();
    sa.sort();
    sb.sort();
    let perm: Vec<usize> = if sa == sb {
        a.schema.iter().map(|n| b.schema.iter().position(|m| m == n).unwrap()).collect()
    } else {
        (0..a.schema.len()).collect()
    };
    let mut ra = a.rows.clone();
    let mut rb: Vec<Vec<Val>> = b.rows.iter().map(|r| perm.iter().map(|i| r[*i].clone()).collect()).collect();
    ra.sort();
    rb.sort();
    ra == rb
}

pub type Database = BTreeMap<String, Relation>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Term {
    /// Qualified attribute, `R.a`.
    Attr(String),
    Const(Val),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Pred {
    True,
    Eq(Term, Term),
    Lt(Term, Term),
    And(Box<Pred>, Box<Pred>),
}

impl Pred {
    pub fn eq_attrs(a: &str, b: &str) -> Pred {
        Pred::Eq(Term::Attr(a.into()), Term::Attr(b.into()))
    }

    pub fn attrs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<String>) {
        let mut term = |t: &Term| {
            if let Term::Attr(a) = t {
                out.insert(a.clone());
            }
        };
        match self {
            Pred::True => {}
            Pred::Eq(a, b) | Pred::Lt(a, b) => {
                term(a);
                term(b);
            }
            Pred::And(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    fn eval(&self, schema: &[&[String]], row: &[&[Val]]) -> Result<bool, RelError> {
        let term = |t: &Term| -> Result<Val, RelError> {
            match t {
                Term::Const(v) => Ok(v.clone()),
                Term::Attr(a) => {
                    for (s, r) in schema.iter().zip(row) {
                        if let Some(i) = s.iter().position(|n| n == a) {
                            return Ok(r[i].clone());
                        }
                    }
                    Err(RelError::UnresolvedAttribute(a.clone()))
                }
            }
        };
        Ok(match self {
            Pred::True => true,
            Pred::Eq(a, b) => term(a)? == term(b)?,
            Pred::Lt(a, b) => term(a)? < term(b)?,
            Pred::And(a, b) => a.eval(schema, row)? && b.eval(schema, row)?,
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Attr(a) => write!(f, "{a}"),
            Term::Const(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::True => write!(f, "true"),
            Pred::Eq(a, b) => write!(f, "eq({a},{b})"),
            Pred::Lt(a, b) => write!(f, "lt({a},{b})"),
            Pred::And(a, b) => write!(f, "and({a},{b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum QueryExpr {
    Base(String),
    Select(Pred, Box<QueryExpr>),
    Project(Vec<String>, Box<QueryExpr>),
    Join(Pred, Box<QueryExpr>, Box<QueryExpr>),
    Union(Box<QueryExpr>, Box<QueryExpr>),
    Distinct(Box<QueryExpr>),
    /// No rows, with the schema of the inner query.
    Empty(Box<QueryExpr>),
}

impl QueryExpr {
    pub fn base(n: &str) -> Self {
        QueryExpr::Base(n.into())
    }
    pub fn select(p: Pred, q: QueryExpr) -> Self {
        QueryExpr::Select(p, Box::new(q))
    }
    pub fn project(attrs: &[&str], q: QueryExpr) -> Self {
        QueryExpr::Project(attrs.iter().map(|a| a.to_string()).collect(), Box::new(q))
    }
    pub fn join(c: Pred, l: QueryExpr, r: QueryExpr) -> Self {
        QueryExpr::Join(c, Box::new(l), Box::new(r))
    }
    pub fn union(l: QueryExpr, r: QueryExpr) -> Self {
        QueryExpr::Union(Box::new(l), Box::new(r))
    }
    pub fn distinct(q: QueryExpr) -> Self {
        QueryExpr::Distinct(Box::new(q))
    }
    pub fn empty(q: QueryExpr) -> Self {
        QueryExpr::Empty(Box::new(q))
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Base(n) => write!(f, "{n}"),
            QueryExpr::Select(p, q) => write!(f, "select({p},{q})"),
            QueryExpr::Project(a, q) => write!(f, "project([{}],{q})", a.join(",")),
            QueryExpr::Join(c, l, r) => write!(f, "join({c},{l},{r})"),
            QueryExpr::Union(l, r) => write!(f, "union({l},{r})"),
            QueryExpr::Distinct(q) => write!(f, "distinct({q})"),
            QueryExpr::Empty(q) => write!(f, "empty({q})"),
        }
    }
}

/// Output schema, checking every attribute reference along the way.
pub fn schema_of(q: &QueryExpr, db: &Database) -> Result<Vec<String>, RelError> {
    Ok(match q {
        QueryExpr::Base(n) => {
            let r = db.get(n).ok_or_else(|| RelError::UnknownRelation(n.clone()))?;
            r.schema.iter().map(|a| format!("{n}.{a}")).collect()
        }
        QueryExpr::Select(p, q) => {
            let s = schema_of(q, db)?;
            resolve(p, &s)?;
            s
        }
        QueryExpr::Project(attrs, q) => {
            let s = schema_of(q, db)?;
            for a in attrs {
                if !s.contains(a) {
                    return Err(RelError::UnresolvedAttribute(a.clone()));
                }
            }
            attrs.clone()
        }
        QueryExpr::Join(c, l, r) => {
            let mut s = schema_of(l, db)?;
            s.extend(schema_of(r, db)?);
            resolve(c, &s)?;
            s
        }
        QueryExpr::Union(l, r) => {
            let (a, b) = (schema_of(l, db)?, schema_of(r, db)?);
            if a.len() != b.len() {
                return Err(RelError::SchemaMismatch(format!("union of arity {} and {}", a.len(), b.len())));
            }
            a
        }
        QueryExpr::Distinct(q) | QueryExpr::Empty(q) => schema_of(q, db)?,
    })
}

fn resolve(p: &Pred, schema: &[String]) -> Result<(), RelError> {
    match p.attrs().into_iter().find(|a| !schema.contains(a)) {
        Some(a) => Err(RelError::UnresolvedAttribute(a)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JoinAlgo {
    NestedLoop,
    /// Hash on equi-join conditions; other conditions fall back to nested loop.
    Hash,
}

/// Seeded evaluator defects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// Rewrites fire without checking their guard.
    GuardlessPushdown,
    /// Join returns each matching left row once, with the left schema.
    SemiJoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Engine {
    pub join: JoinAlgo,
    pub fault: Option<Fault>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine { join: JoinAlgo::NestedLoop, fault: None }
    }
}

impl Engine {
    pub fn with_fault(fault: Fault) -> Self {
        Engine { fault: Some(fault), ..Default::default() }
    }

    pub fn eval(&self, q: &QueryExpr, db: &Database) -> Result<Relation, RelError> {
        Ok(match q {
            QueryExpr::Base(n) => {
                let r = db.get(n).ok_or_else(|| RelError::UnknownRelation(n.clone()))?;
                Relation {
                    schema: r.schema.iter().map(|a| format!("{n}.{a}")).collect(),
                    rows: r.rows.clone(),
                }
            }
            QueryExpr::Select(p, q) => {
                let r = self.eval(q, db)?;
                let mut rows = Vec::new();
                for row in &r.rows {
                    if p.eval(&[&r.schema], &[row])? {
                        rows.push(row.clone());
                    }
                }
                resolve(p, &r.schema)?;
                Relation { schema: r.schema, rows }
            }
            QueryExpr::Project(attrs, q) => {
                let r = self.eval(q, db)?;
                let cols = attrs.iter().map(|a| r.col(a)).collect::<Result<Vec<_>, _>>()?;
                Relation {
                    schema: attrs.clone(),
                    rows: r.rows.iter().map(|row| cols.iter().map(|c| row[*c].clone()).collect()).collect(),
                }
            }
            QueryExpr::Join(c, l, r) => {
                let (a, b) = (self.eval(l, db)?, self.eval(r, db)?);
                self.join(c, a, b)?
            }
            QueryExpr::Union(l, r) => {
                let (mut a, b) = (self.eval(l, db)?, self.eval(r, db)?);
                if a.schema.len() != b.schema.len() {
                    return Err(RelError::SchemaMismatch(format!(
                        "union of arity {} and {}",
                        a.schema.len(),
                        b.schema.len()
                    )));
                }
                a.rows.extend(b.rows);
                a
            }
            QueryExpr::Distinct(q) => {
                let r = self.eval(q, db)?;
                let mut seen = BTreeSet::new();
                let rows = r.rows.into_iter().filter(|row| seen.insert(row.clone())).collect();
                Relation { schema: r.schema, rows }
            }
            QueryExpr::Empty(q) => Relation::empty(schema_of(q, db)?),
        })
    }

    fn join(&self, c: &Pred, a: Relation, b: Relation) -> Result<Relation, RelError> {
        let mut schema = a.schema.clone();
        schema.extend(b.schema.iter().cloned());
        resolve(c, &schema)?;
        let pairs = match (self.join, equi_cols(c, &a, &b)) {
            (JoinAlgo::Hash, Some((ca, cb))) => {
                let mut index: HashMap<&Val, Vec<usize>> = HashMap::new();
                for (j, row) in b.rows.iter().enumerate() {
                    index.entry(&row[cb]).or_default().push(j);
                }
                let mut out = Vec::new();
                for (i, row) in a.rows.iter().enumerate() {
                    for j in index.get(&row[ca]).into_iter().flatten() {
                        out.push((i, *j));
                    }
                }
                out
            }
            _ => {
                let mut out = Vec::new();
                for (i, ra) in a.rows.iter().enumerate() {
                    for (j, rb) in b.rows.iter().enumerate() {
                        if c.eval(&[&a.schema, &b.schema], &[ra, rb])? {
                            out.push((i, j));
                        }
                    }
                }
                out
            }
        };
        if self.fault == Some(Fault::SemiJoin) {
            let hit: BTreeSet<usize> = pairs.iter().map(|(i, _)| *i).collect();
            return Ok(Relation {
                schema: a.schema.clone(),
                rows: hit.into_iter().map(|i| a.rows[i].clone()).collect(),
            });
        }
        let rows = pairs
            .into_iter()
            .map(|(i, j)| a.rows[i].iter().chain(&b.rows[j]).cloned().collect())
            .collect();
        Ok(Relation { schema, rows })
    }

    /// Applies `rule` at the root of `q`. `None` when the pattern does not
    /// match or the guard rejects the binding.
    pub fn rewrite(&self, rule: &RewriteRule, q: &QueryExpr, db: &Database) -> Result<Option<QueryExpr>, RelError> {
        let mut b = Bindings::default();
        if !match_query(&rule.lhs, q, &mut b) {
            return Ok(None);
        }
        if self.fault != Some(Fault::GuardlessPushdown) && !rule.guard.holds(&b, db)? {
            return Ok(None);
        }
        Ok(Some(build_query(&rule.rhs, &b, &rule.name)?))
    }
}

fn equi_cols(c: &Pred, a: &Relation, b: &Relation) -> Option<(usize, usize)> {
    if let Pred::Eq(Term::Attr(x), Term::Attr(y)) = c {
        let find = |s: &Relation, n: &str| s.schema.iter().position(|m| m == n);
        if let (Some(i), Some(j)) = (find(a, x), find(b, y)) {
            return Some((i, j));
        }
        if let (Some(i), Some(j)) = (find(a, y), find(b, x)) {
            return Some((i, j));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Rewrite rules in prefix notation

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Pat {
    Var(String),
    Lit(i64),
    App(String, Vec<Pat>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Guard {
    True,
    /// Attributes of the bound predicate lie within the schemas of the bound queries.
    AttrsWithin { pred: String, queries: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Pat,
    pub rhs: Pat,
    pub guard: Guard,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    pub queries: BTreeMap<String, QueryExpr>,
    pub preds: BTreeMap<String, Pred>,
}

impl Guard {
    pub fn holds(&self, b: &Bindings, db: &Database) -> Result<bool, RelError> {
        match self {
            Guard::True => Ok(true),
            Guard::AttrsWithin { pred, queries } => {
                let p = b.preds.get(pred).ok_or_else(|| RelError::UnresolvedAttribute(pred.clone()))?;
                let mut avail = BTreeSet::new();
                for q in queries {
                    let q = b.queries.get(q).ok_or_else(|| RelError::UnknownRelation(q.clone()))?;
                    avail.extend(schema_of(q, db)?);
                }
                Ok(p.attrs().is_subset(&avail))
            }
        }
    }
}

fn parse_pat(src: &str) -> Result<Pat, String> {
    fn go(s: &[u8], i: &mut usize) -> Result<Pat, String> {
        let start = *i;
        while *i < s.len() && (s[*i].is_ascii_alphanumeric() || s[*i] == b'_') {
            *i += 1;
        }
        if start == *i {
            return Err(format!("expected identifier at offset {start}"));
        }
        let word = std::str::from_utf8(&s[start..*i]).unwrap().to_string();
        if *i < s.len() && s[*i] == b'(' {
            *i += 1;
            let mut args = vec![go(s, i)?];
            while *i < s.len() && s[*i] == b',' {
                *i += 1;
                args.push(go(s, i)?);
            }
            if *i >= s.len() || s[*i] != b')' {
                return Err(format!("expected `)` at offset {i}"));
            }
            *i += 1;
            return Ok(Pat::App(word, args));
        }
        match word.parse::<i64>() {
            Ok(n) => Ok(Pat::Lit(n)),
            Err(_) => Ok(Pat::Var(word)),
        }
    }
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    let mut i = 0;
    let p = go(s.as_bytes(), &mut i)?;
    if i != s.len() {
        return Err(format!("trailing input at offset {i}"));
    }
    Ok(p)
}

fn parse_guard(src: &str) -> Result<Guard, String> {
    let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
    if s == "true" {
        return Ok(Guard::True);
    }
    let inner = |t: &str| -> Option<Vec<String>> {
        let t = t.strip_prefix("attr(")?.strip_suffix(')')?;
        Some(t.split(',').map(|x| x.to_string()).collect())
    };
    let (l, r) = s.split_once("<=").ok_or("guard must be `true` or `attr(p)<=attr(R,..)`")?;
    match (inner(l), inner(r)) {
        (Some(p), Some(qs)) if p.len() == 1 && !qs.is_empty() => Ok(Guard::AttrsWithin {
            pred: p[0].clone(),
            queries: qs,
        }),
        _ => Err(format!("malformed guard `{src}`")),
    }
}

impl RewriteRule {
    pub fn from_decl(d: &RewriteDecl) -> Result<Self, RelError> {
        let err = |reason: String| RelError::Pattern { rule: d.name.clone(), reason };
        Ok(RewriteRule {
            name: d.name.clone(),
            lhs: parse_pat(&d.lhs).map_err(err)?,
            rhs: parse_pat(&d.rhs).map_err(err)?,
            guard: parse_guard(&d.guard).map_err(err)?,
        })
    }
}

fn bind<T: PartialEq + Clone>(m: &mut BTreeMap<String, T>, k: &str, v: &T) -> bool {
    match m.get(k) {
        Some(old) => old == v,
        None => {
            m.insert(k.to_string(), v.clone());
            true
        }
    }
}

fn match_query(p: &Pat, q: &QueryExpr, b: &mut Bindings) -> bool {
    match (p, q) {
        (Pat::Var(v), q) => bind(&mut b.queries, v, q),
        (Pat::App(op, args), q) => match (op.as_str(), args.as_slice(), q) {
            ("select", [pp, pq], QueryExpr::Select(pr, inner)) => match_pred(pp, pr, b) && match_query(pq, inner, b),
            ("join", [pc, pl, pr], QueryExpr::Join(c, l, r)) => {
                match_pred(pc, c, b) && match_query(pl, l, b) && match_query(pr, r, b)
            }
            ("union", [pl, pr], QueryExpr::Union(l, r)) => match_query(pl, l, b) && match_query(pr, r, b),
            ("distinct", [pq], QueryExpr::Distinct(inner)) => match_query(pq, inner, b),
            ("empty", [pq], QueryExpr::Empty(inner)) => match_query(pq, inner, b),
            _ => false,
        },
        (Pat::Lit(_), _) => false,
    }
}

fn match_term(p: &Pat, t: &Term) -> bool {
    matches!((p, t), (Pat::Lit(n), Term::Const(Val::Int(m))) if n == m)
}

fn match_pred(p: &Pat, pr: &Pred, b: &mut Bindings) -> bool {
    match (p, pr) {
        (Pat::Var(v), pr) => bind(&mut b.preds, v, pr),
        (Pat::App(op, args), Pred::Eq(x, y)) if op == "eq" && args.len() == 2 => {
            match_term(&args[0], x) && match_term(&args[1], y)
        }
        (Pat::App(op, args), Pred::Lt(x, y)) if op == "lt" && args.len() == 2 => {
            match_term(&args[0], x) && match_term(&args[1], y)
        }
        _ => false,
    }
}

fn build_query(p: &Pat, b: &Bindings, rule: &str) -> Result<QueryExpr, RelError> {
    let err = |reason: String| RelError::Pattern { rule: rule.to_string(), reason };
    let q = |p: &Pat| build_query(p, b, rule).map(Box::new);
    Ok(match p {
        Pat::Var(v) => b.queries.get(v).cloned().ok_or_else(|| err(format!("unbound query variable `{v}`")))?,
        Pat::Lit(n) => return Err(err(format!("literal {n} in query position"))),
        Pat::App(op, args) => match (op.as_str(), args.as_slice()) {
            ("select", [pp, pq]) => QueryExpr::Select(build_pred(pp, b, rule)?, q(pq)?),
            ("join", [pc, pl, pr]) => QueryExpr::Join(build_pred(pc, b, rule)?, q(pl)?, q(pr)?),
            ("union", [pl, pr]) => QueryExpr::Union(q(pl)?, q(pr)?),
            ("distinct", [pq]) => QueryExpr::Distinct(q(pq)?),
            ("empty", [pq]) => QueryExpr::Empty(q(pq)?),
            _ => return Err(err(format!("unknown query operator `{op}`/{}", args.len()))),
        },
    })
}

fn build_pred(p: &Pat, b: &Bindings, rule: &str) -> Result<Pred, RelError> {
    let err = |reason: String| RelError::Pattern { rule: rule.to_string(), reason };
    let term = |p: &Pat| match p {
        Pat::Lit(n) => Ok(Term::Const(Val::Int(*n))),
        _ => Err(err("predicate terms must be integer literals".into())),
    };
    match p {
        Pat::Var(v) => b.preds.get(v).cloned().ok_or_else(|| err(format!("unbound predicate variable `{v}`"))),
        Pat::App(op, args) if op == "eq" && args.len() == 2 => Ok(Pred::Eq(term(&args[0])?, term(&args[1])?)),
        Pat::App(op, args) if op == "lt" && args.len() == 2 => Ok(Pred::Lt(term(&args[0])?, term(&args[1])?)),
        _ => Err(err("unknown predicate pattern".into())),
    }
}

/// Query and predicate variables of a pattern, by position.
pub fn pattern_vars(p: &Pat) -> (BTreeSet<String>, BTreeSet<String>) {
    fn go(p: &Pat, pred_pos: bool, q: &mut BTreeSet<String>, pr: &mut BTreeSet<String>) {
        match p {
            Pat::Var(v) if pred_pos => {
                pr.insert(v.clone());
            }
            Pat::Var(v) => {
                q.insert(v.clone());
            }
            Pat::Lit(_) => {}
            Pat::App(op, args) => {
                let first_is_pred = matches!(op.as_str(), "select" | "join");
                let all_terms = matches!(op.as_str(), "eq" | "lt");
                if all_terms {
                    return;
                }
                for (i, a) in args.iter().enumerate() {
                    go(a, first_is_pred && i == 0, q, pr);
                }
            }
        }
    }
    let (mut q, mut pr) = (BTreeSet::new(), BTreeSet::new());
    go(p, false, &mut q, &mut pr);
    (q, pr)
}

// ---------------------------------------------------------------------------
// Databases and the rewrite-block MRs

const LETTERS: &[u8] = b"abc";

/// Seeded database over `R(a, s)`, `S(b, t)`, `T(c, u)`: integers 0 to 9
/// and three-letter strings, at most five rows per relation.
pub fn random_db(seed: u64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new();
    for (name, int_attr, str_attr) in [("R", "a", "s"), ("S", "b", "t"), ("T", "c", "u")] {
        let n = rng.gen_range(0..=5);
        let rows = (0..n)
            .map(|_| {
                let s: String = (0..3).map(|_| LETTERS[rng.gen_range(0..LETTERS.len())] as char).collect();
                vec![Val::Int(rng.gen_range(0..=9)), Val::Str(s)]
            })
            .collect();
        db.insert(name.into(), Relation::new(&[int_attr, str_attr], rows).unwrap());
    }
    db
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelMrResult {
    pub name: String,
    pub passes: usize,
    pub failures: usize,
    /// First failing trial, zero-based.
    pub first_failure: Option<usize>,
}

pub const REL_MRS: [&str; 4] = ["join_comm", "select_push", "distinct_idem", "plan_equiv"];

fn rule<'a>(rules: &'a [RewriteRule], name: &str) -> Result<&'a RewriteRule, RelError> {
    rules
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| RelError::Pattern { rule: name.into(), reason: "rule not in algebra".into() })
}

fn same(engine: &Engine, a: &QueryExpr, b: &QueryExpr, db: &Database) -> bool {
    same_with(engine, engine, a, b, db)
}

fn same_with(e1: &Engine, e2: &Engine, a: &QueryExpr, b: &QueryExpr, db: &Database) -> bool {
    match (e1.eval(a, db), e2.eval(b, db)) {
        (Ok(x), Ok(y)) => bag_eq(&x, &y),
        _ => false,
    }
}

/// One trial of one MR. Errors in evaluation count as failures.
fn rel_trial(engine: &Engine, rules: &[RewriteRule], mr: &str, db: &Database, rng: &mut ChaCha8Rng) -> Result<bool, RelError> {
    let (r, s, t) = (QueryExpr::base("R"), QueryExpr::base("S"), QueryExpr::base("T"));
    let k = Term::Const(Val::Int(rng.gen_range(0..=9)));
    let join_rs = Pred::eq_attrs("R.a", "S.b");
    Ok(match mr {
        "join_comm" => {
            let q = QueryExpr::join(join_rs, r, s);
            match engine.rewrite(rule(rules, "join_commute")?, &q, db)? {
                Some(q2) => same(engine, &q, &q2, db),
                None => false,
            }
        }
        "select_push" => {
            // Half the predicates reference the right input, where the guard blocks the rewrite.
            let p = if rng.gen_bool(0.5) {
                Pred::Lt(Term::Attr("R.a".into()), k)
            } else {
                Pred::Lt(Term::Attr("S.b".into()), k)
            };
            let q = QueryExpr::select(p, QueryExpr::join(join_rs, r, s));
            let q2 = engine.rewrite(rule(rules, "select_pushdown")?, &q, db)?.unwrap_or_else(|| q.clone());
            same(engine, &q, &q2, db)
        }
        "distinct_idem" => {
            let base = QueryExpr::select(Pred::Lt(Term::Attr("R.a".into()), k.clone()), r.clone());
            let dd = QueryExpr::distinct(QueryExpr::distinct(base.clone()));
            let p = Pred::Lt(Term::Attr("R.a".into()), k);
            let ss = QueryExpr::select(p.clone(), QueryExpr::select(p.clone(), r.clone()));
            let want_d = QueryExpr::distinct(base);
            let want_s = QueryExpr::select(p, r);
            let got_d = engine.rewrite(rule(rules, "distinct_idempotent")?, &dd, db)?;
            let got_s = engine.rewrite(rule(rules, "select_idempotent")?, &ss, db)?;
            got_d.as_ref() == Some(&want_d)
                && got_s.as_ref() == Some(&want_s)
                && same(engine, &dd, &want_d, db)
                && same(engine, &ss, &want_s, db)
        }
        "plan_equiv" => {
            let q = QueryExpr::join(Pred::eq_attrs("S.b", "T.c"), QueryExpr::join(join_rs, r, s), t);
            match engine.rewrite(rule(rules, "join_associate")?, &q, db)? {
                Some(q2) => {
                    let hash = Engine { join: JoinAlgo::Hash, ..*engine };
                    let nested = Engine { join: JoinAlgo::NestedLoop, ..*engine };
                    same_with(&nested, &hash, &q, &q2, db)
                }
                None => false,
            }
        }
        other => return Err(RelError::Pattern { rule: other.into(), reason: "unknown MR".into() }),
    })
}

/// Runs the four rewrite-block MRs over `trials` seeded databases.
pub fn run_rel_mrs(engine: &Engine, rules: &[RewriteRule], seed: u64, trials: usize) -> Result<Vec<RelMrResult>, RelError> {
    let mut out: Vec<RelMrResult> = REL_MRS
        .iter()
        .map(|n| RelMrResult { name: n.to_string(), passes: 0, failures: 0, first_failure: None })
        .collect();
    for trial in 0..trials {
        let db = random_db(seed.wrapping_add(trial as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000 ^ trial as u64);
        for res in out.iter_mut() {
            if rel_trial(engine, rules, &res.name, &db, &mut rng)? {
                res.passes += 1;
            } else {
                res.failures += 1;
                res.first_failure.get_or_insert(trial);
            }
        }
    }
    Ok(out)
}

/// Every bag of at most `max_rows` single values drawn from `values`.
fn small_bags(values: &[i64], max_rows: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_rows {
        let mut next = Vec::new();
        for bag in &frontier {
            let last = bag.last().copied();
            for v in values {
                if last.is_none_or(|l| *v >= l) {
                    let mut b = bag.clone();
                    b.push(*v);
                    next.push(b);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleCheck {
    pub rule: String,
    pub instances: usize,
    pub violations: usize,
}

/// Checks every rule over all databases of single-column relations
/// `R(a)`, `S(b)`, `T(c)` with values in {0, 1} and at most four rows, for
/// every binding of pattern variables drawn from a fixed pool.
pub fn exhaustive_rule_check(engine: &Engine, rules: &[RewriteRule]) -> Result<Vec<RuleCheck>, RelError> {
    let bags = small_bags(&[0, 1], 4);
    let rel = |a: &str, bag: &[i64]| Relation::new(&[a], bag.iter().map(|v| vec![Val::Int(*v)]).collect()).unwrap();
    let attrs = ["R.a", "S.b", "T.c"];
    let mut pred_pool = vec![Pred::True];
    for (i, x) in attrs.iter().enumerate() {
        pred_pool.push(Pred::Lt(Term::Attr(x.to_string()), Term::Const(Val::Int(1))));
        for y in &attrs[i + 1..] {
            pred_pool.push(Pred::eq_attrs(x, y));
        }
    }
    let query_pool: Vec<QueryExpr> = ["R", "S", "T"].iter().map(|n| QueryExpr::base(n)).collect();

    let mut dbs = Vec::with_capacity(bags.len().pow(3));
    for br in &bags {
        for bs in &bags {
            for bt in &bags {
                let mut db = Database::new();
                db.insert("R".into(), rel("a", br));
                db.insert("S".into(), rel("b", bs));
                db.insert("T".into(), rel("c", bt));
                dbs.push(db);
            }
        }
    }
    let schema_db = &dbs[0];

    let mut out = Vec::new();
    for rule in rules {
        let (qv, pv) = pattern_vars(&rule.lhs);
        let qv: Vec<String> = qv.into_iter().collect();
        let pv: Vec<String> = pv.into_iter().collect();
        let mut check = RuleCheck { rule: rule.name.clone(), instances: 0, violations: 0 };
        for qi in 0..query_pool.len().pow(qv.len() as u32) {
            let mut b = Bindings::default();
            let mut n = qi;
            let mut used = BTreeSet::new();
            for v in &qv {
                let q = &query_pool[n % query_pool.len()];
                n /= query_pool.len();
                used.insert(q.to_string());
                b.queries.insert(v.clone(), q.clone());
            }
            // Self-joins would need aliasing; keep each base relation distinct.
            if used.len() != qv.len() {
                continue;
            }
            for pi in 0..pred_pool.len().pow(pv.len() as u32) {
                let mut b = b.clone();
                let mut n = pi;
                for v in &pv {
                    b.preds.insert(v.clone(), pred_pool[n % pred_pool.len()].clone());
                    n /= pred_pool.len();
                }
                let lhs = match build_query(&rule.lhs, &b, &rule.name) {
                    Ok(q) => q,
                    Err(_) => continue,
                };
                if schema_of(&lhs, schema_db).is_err() || !rule.guard.holds(&b, schema_db)? {
                    continue;
                }
                let rhs = build_query(&rule.rhs, &b, &rule.name)?;
                check.instances += 1;
                for db in &dbs {
                    if !same(engine, &lhs, &rhs, db) {
                        check.violations += 1;
                        break;
                    }
                }
            }
        }
        out.push(check);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> Vec<RewriteRule> {
        let a = crate::fixtures::Fixtures::embedded().algebra("relational").unwrap();
        a.rewrite_rules.iter().map(|d| RewriteRule::from_decl(d).unwrap()).collect()
    }

    fn db2() -> Database {
        let mut db = Database::new();
        db.insert("R".into(), Relation::new(&["a"], vec![vec![Val::Int(1)], vec![Val::Int(1)]]).unwrap());
        db.insert("S".into(), Relation::new(&["b"], vec![vec![Val::Int(1)], vec![Val::Int(2)]]).unwrap());
        db
    }

    #[test]
    fn constant_fold_and_empty_join() {
        let db = db2();
        let e = Engine::default();
        let q = QueryExpr::select(Pred::Eq(Term::Const(Val::Int(1)), Term::Const(Val::Int(1))), QueryExpr::base("R"));
        assert!(bag_eq(&e.eval(&q, &db).unwrap(), &e.eval(&QueryExpr::base("R"), &db).unwrap()));
        let j = QueryExpr::join(Pred::True, QueryExpr::base("R"), QueryExpr::empty(QueryExpr::base("S")));
        let r = e.eval(&j, &db).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.schema, vec!["R.a", "S.b"]);
    }

    #[test]
    fn project_over_empty_keeps_projected_schema() {
        let mut db = db2();
        db.insert("E".into(), Relation::new(&["x", "y"], vec![]).unwrap());
        let r = Engine::default().eval(&QueryExpr::project(&["E.y"], QueryExpr::base("E")), &db).unwrap();
        assert_eq!(r.schema, vec!["E.y"]);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn bag_semantics_keeps_duplicates() {
        let db = db2();
        let e = Engine::default();
        let r = e.eval(&QueryExpr::join(Pred::eq_attrs("R.a", "S.b"), QueryExpr::base("R"), QueryExpr::base("S")), &db).unwrap();
        assert_eq!(r.rows.len(), 2);
        let d = e.eval(&QueryExpr::distinct(QueryExpr::base("R")), &db).unwrap();
        assert_eq!(d.rows.len(), 1);
    }

    #[test]
    fn errors_are_typed() {
        let db = db2();
        let e = Engine::default();
        assert_eq!(e.eval(&QueryExpr::base("Z"), &db), Err(RelError::UnknownRelation("Z".into())));
        let bad = QueryExpr::select(Pred::Lt(Term::Attr("S.b".into()), Term::Const(Val::Int(1))), QueryExpr::base("R"));
        assert_eq!(e.eval(&bad, &db), Err(RelError::UnresolvedAttribute("S.b".into())));
        let u = QueryExpr::union(QueryExpr::base("R"), QueryExpr::join(Pred::True, QueryExpr::base("R"), QueryExpr::base("S")));
        assert!(matches!(e.eval(&u, &db), Err(RelError::SchemaMismatch(_))));
    }

    #[test]
    fn hash_and_nested_loop_agree() {
        for seed in 0..50 {
            let db = random_db(seed);
            let q = QueryExpr::join(Pred::eq_attrs("R.a", "S.b"), QueryExpr::base("R"), QueryExpr::base("S"));
            let a = Engine::default().eval(&q, &db).unwrap();
            let b = Engine { join: JoinAlgo::Hash, fault: None }.eval(&q, &db).unwrap();
            assert!(bag_eq(&a, &b));
        }
    }

    #[test]
    fn correct_engine_passes_every_mr() {
        let res = run_rel_mrs(&Engine::default(), &rules(), 7, 100).unwrap();
        for r in res {
            assert_eq!((r.passes, r.failures), (100, 0), "{}", r.name);
        }
    }

    #[test]
    fn guardless_pushdown_witness() {
        // sigma_{S.b < 2}(R join S) cannot be pushed into R.
        let db = db2();
        let rs = rules();
        let q = QueryExpr::select(
            Pred::Lt(Term::Attr("S.b".into()), Term::Const(Val::Int(2))),
            QueryExpr::join(Pred::eq_attrs("R.a", "S.b"), QueryExpr::base("R"), QueryExpr::base("S")),
        );
        let push = rule(&rs, "select_pushdown").unwrap();
        assert_eq!(Engine::default().rewrite(push, &q, &db).unwrap(), None);
        let bad = Engine::with_fault(Fault::GuardlessPushdown);
        let q2 = bad.rewrite(push, &q, &db).unwrap().unwrap();
        assert_eq!(bad.eval(&q2, &db), Err(RelError::UnresolvedAttribute("S.b".into())));
    }

    #[test]
    fn semi_join_witness() {
        // R = {1, 1}, S = {1, 2}: R semi S keeps both rows of R, S semi R keeps one.
        let db = db2();
        let bad = Engine::with_fault(Fault::SemiJoin);
        let q = QueryExpr::join(Pred::eq_attrs("R.a", "S.b"), QueryExpr::base("R"), QueryExpr::base("S"));
        let q2 = QueryExpr::join(Pred::eq_attrs("R.a", "S.b"), QueryExpr::base("S"), QueryExpr::base("R"));
        let (a, b) = (bad.eval(&q, &db).unwrap(), bad.eval(&q2, &db).unwrap());
        assert_eq!((a.rows.len(), b.rows.len()), (2, 1));
        assert!(!bag_eq(&a, &b));
        let good = Engine::default();
        assert!(bag_eq(&good.eval(&q, &db).unwrap(), &good.eval(&q2, &db).unwrap()));
    }

    #[test]
    fn seeded_faults_are_detected_by_targeted_mr() {
        let rs = rules();
        let g = run_rel_mrs(&Engine::with_fault(Fault::GuardlessPushdown), &rs, 7, 100).unwrap();
        assert!(g.iter().find(|r| r.name == "select_push").unwrap().failures > 0);
        let s = run_rel_mrs(&Engine::with_fault(Fault::SemiJoin), &rs, 7, 100).unwrap();
        assert!(s.iter().find(|r| r.name == "join_comm").unwrap().failures > 0);
    }

    #[test]
    fn patterns_parse_and_reject_garbage() {
        assert_eq!(
            parse_pat("select(eq(1,1),R)").unwrap(),
            Pat::App("select".into(), vec![Pat::App("eq".into(), vec![Pat::Lit(1), Pat::Lit(1)]), Pat::Var("R".into())])
        );
        assert!(parse_pat("join(c,R").is_err());
        assert!(parse_guard("attr(p)<=attr(R,S)").is_ok());
        assert!(parse_guard("sometimes").is_err());
    }

    #[test]
    fn small_bag_count() {
        // Bags of size 0..=4 over two values: 1 + 2 + 3 + 4 + 5.
        assert_eq!(small_bags(&[0, 1], 4).len(), 15);
    }
}
