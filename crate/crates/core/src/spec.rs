//! Line-oriented spec files: algebras, MR descriptors, SUT programs, and
//! mutator configs. Every document may start with a `#noether-spec v1`
//! header; other `#` lines are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::{ActsOn, AlgebraError, BlockKind, Operator, OperatorAlgebra, RewriteDecl, SymmetryRegime};
use crate::construct::RelationForm;
use crate::mutation::{Cell, MutatorCategory, OverrideVerdict, Overrides};
use crate::reachability::{AdjointIndexing, MRDescriptor, OutputDomain, Tolerance};
use crate::sut::{parse_expr, Homogeneity, Param, ParamKind, SutError, SutProgram};

pub const HEADER: &str = "#noether-spec v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("{source_name}:{line}:{col}: expected {expected}")]
    Syntax {
        source_name: String,
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("{source_name}: `{name}`: {reason}")]
    Semantic {
        source_name: String,
        name: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocKind {
    Algebra,
    Mr,
    Sut,
    Config,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutatorConfig {
    pub name: String,
    pub categories: Vec<MutatorCategory>,
    pub seed: u64,
    pub sample_budget: usize,
    pub rel_trials: usize,
    pub matrix_edits: Vec<(MutatorCategory, BlockKind, Cell)>,
    pub overrides: Overrides,
}

impl MutatorConfig {
    pub fn named(name: &str) -> Self {
        MutatorConfig {
            name: name.into(),
            categories: MutatorCategory::ALL.to_vec(),
            seed: 0,
            sample_budget: 64,
            rel_trials: 100,
            matrix_edits: Vec::new(),
            overrides: Overrides::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Algebra(OperatorAlgebra),
    Mr(MRDescriptor),
    Sut(SutProgram),
    Config(MutatorConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub source_name: String,
    pub payload: Payload,
}

impl SpecDocument {
    pub fn kind(&self) -> DocKind {
        match self.payload {
            Payload::Algebra(_) => DocKind::Algebra,
            Payload::Mr(_) => DocKind::Mr,
            Payload::Sut(_) => DocKind::Sut,
            Payload::Config(_) => DocKind::Config,
        }
    }
}

struct Line<'a> {
    no: usize,
    text: &'a str,
}

impl Line<'_> {
    /// Whitespace-separated words with 1-based columns.
    fn words(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, c) in self.text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    out.push((s + 1, &self.text[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s + 1, &self.text[s..]));
        }
        out
    }
}

struct Ctx<'a> {
    source: &'a str,
}

impl Ctx<'_> {
    fn syntax(&self, line: usize, col: usize, expected: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            source_name: self.source.to_string(),
            line,
            col,
            expected: expected.into(),
        }
    }

    fn semantic(&self, name: &str, reason: impl Into<String>) -> ParseError {
        ParseError::Semantic {
            source_name: self.source.to_string(),
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    fn sut_error(&self, e: SutError, name: &str) -> ParseError {
        match e {
            SutError::Parse { line, col, expected } => self.syntax(line, col, expected),
            other => self.semantic(name, other.to_string()),
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn content_lines<'t>(text: &'t str, ctx: &Ctx) -> Result<Vec<Line<'t>>, ParseError> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim_end();
        if t.trim().is_empty() {
            continue;
        }
        let trimmed = t.trim_start();
        if trimmed.starts_with("#noether-spec") {
            if !first || trimmed != HEADER {
                return Err(ctx.syntax(i + 1, 1, format!("`{HEADER}` as the first line")));
            }
            first = false;
            continue;
        }
        first = false;
        if trimmed.starts_with('#') {
            continue;
        }
        out.push(Line { no: i + 1, text: t });
    }
    Ok(out)
}

/// Parses any spec document; the first directive decides its kind.
pub fn parse_document(text: &str, source_name: &str) -> Result<SpecDocument, ParseError> {
    let ctx = Ctx { source: source_name };
    let lines = content_lines(text, &ctx)?;
    let Some(first) = lines.first() else {
        return Err(ctx.syntax(1, 1, "a directive: algebra, mr, sut, or config"));
    };
    let head = first.words()[0].1;
    let payload = match head {
        "algebra" => Payload::Algebra(parse_algebra_lines(&lines, &ctx)?),
        "mr" => Payload::Mr(parse_mr_lines(&lines, &ctx)?),
        "sut" => Payload::Sut(parse_sut_lines(&lines, &ctx)?),
        "config" => Payload::Config(parse_config_lines(&lines, &ctx)?),
        _ => return Err(ctx.syntax(first.no, 1, "a directive: algebra, mr, sut, or config")),
    };
    Ok(SpecDocument {
        source_name: source_name.to_string(),
        payload,
    })
}

pub fn parse_algebra(text: &str, source_name: &str) -> Result<OperatorAlgebra, ParseError> {
    match parse_document(text, source_name)?.payload {
        Payload::Algebra(a) => Ok(a),
        _ => Err(Ctx { source: source_name }.syntax(1, 1, "an algebra document")),
    }
}

pub fn parse_mr(text: &str, source_name: &str) -> Result<MRDescriptor, ParseError> {
    match parse_document(text, source_name)?.payload {
        Payload::Mr(m) => Ok(m),
        _ => Err(Ctx { source: source_name }.syntax(1, 1, "an mr document")),
    }
}

pub fn parse_sut(text: &str, source_name: &str) -> Result<SutProgram, ParseError> {
    match parse_document(text, source_name)?.payload {
        Payload::Sut(s) => Ok(s),
        _ => Err(Ctx { source: source_name }.syntax(1, 1, "a sut document")),
    }
}

pub fn parse_config(text: &str, source_name: &str) -> Result<MutatorConfig, ParseError> {
    match parse_document(text, source_name)?.payload {
        Payload::Config(c) => Ok(c),
        _ => Err(Ctx { source: source_name }.syntax(1, 1, "a config document")),
    }
}

fn key_value<'a>(ctx: &Ctx, line: usize, col: usize, w: &'a str) -> Result<(&'a str, &'a str), ParseError> {
    match w.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k, v)),
        _ => Err(ctx.syntax(line, col, "key=value")),
    }
}

fn parse_list<T, F>(ctx: &Ctx, line: usize, col: usize, v: &str, what: &str, f: F) -> Result<Vec<T>, ParseError>
where
    F: Fn(&str) -> Result<T, String>,
{
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| f(s).map_err(|_| ctx.syntax(line, col, what.to_string())))
        .collect()
}

fn parse_num<T: std::str::FromStr>(ctx: &Ctx, line: usize, col: usize, v: &str, what: &str) -> Result<T, ParseError> {
    v.parse::<T>().map_err(|_| ctx.syntax(line, col, what.to_string()))
}

fn parse_algebra_lines(lines: &[Line], ctx: &Ctx) -> Result<OperatorAlgebra, ParseError> {
    let head = lines[0].words();
    if head.len() != 2 || !is_ident(head[1].1) {
        return Err(ctx.syntax(lines[0].no, head.get(1).map(|w| w.0).unwrap_or(9), "algebra name"));
    }
    let name = head[1].1.to_string();
    let mut operators = Vec::new();
    let mut generators: Option<Vec<String>> = None;
    let mut rules = Vec::new();
    let mut labels = BTreeMap::new();
    for line in &lines[1..] {
        let ws = line.words();
        let (c0, d) = ws[0];
        match d {
            "operator" => operators.push(parse_operator(line, &ws, ctx)?),
            "generators" => {
                if ws.len() != 2 {
                    return Err(ctx.syntax(line.no, c0, "generators <comma-list>"));
                }
                if generators.is_some() {
                    return Err(ctx.semantic(&name, "generators declared twice"));
                }
                generators = Some(parse_list(ctx, line.no, ws[1].0, ws[1].1, "operator name", |s| {
                    if is_ident(s) { Ok(s.to_string()) } else { Err(String::new()) }
                })?);
            }
            "pattern" => {
                if ws.len() != 3 {
                    return Err(ctx.syntax(line.no, c0, "pattern <BLOCK> <label>"));
                }
                let b: BlockKind = ws[1].1.parse().map_err(|_| ctx.syntax(line.no, ws[1].0, "block kind"))?;
                if !is_ident(ws[2].1) {
                    return Err(ctx.syntax(line.no, ws[2].0, "label"));
                }
                labels.insert(b, ws[2].1.to_string());
            }
            "rewrite" => rules.push(parse_rewrite(line, &ws, ctx)?),
            _ => return Err(ctx.syntax(line.no, c0, "operator, generators, pattern, or rewrite")),
        }
    }
    let generators = generators.unwrap_or_default();
    OperatorAlgebra::new(name.clone(), operators, generators, rules, labels).map_err(|e| match e {
        AlgebraError::Invalid { reason, .. } => ctx.semantic(&name, reason),
        other => ctx.semantic(&name, other.to_string()),
    })
}

fn parse_operator(line: &Line, ws: &[(usize, &str)], ctx: &Ctx) -> Result<Operator, ParseError> {
    if ws.len() < 2 || !is_ident(ws[1].1) {
        return Err(ctx.syntax(line.no, ws.get(1).map(|w| w.0).unwrap_or(ws[0].0 + 9), "operator name"));
    }
    let name = ws[1].1.to_string();
    let mut acts = None;
    let mut blocks = None;
    let mut regime_kind = None;
    let mut size = None;
    let mut cost = 1u64;
    for &(col, w) in &ws[2..] {
        let (k, v) = key_value(ctx, line.no, col, w)?;
        let vcol = col + k.len() + 1;
        match k {
            "acts" => acts = Some(v.parse::<ActsOn>().map_err(|_| ctx.syntax(line.no, vcol, "input, output, both, or param"))?),
            "blocks" => blocks = Some(parse_list(ctx, line.no, vcol, v, "block kind", |s| s.parse::<BlockKind>())?),
            "regime" => {
                if !matches!(v, "finite" | "lie" | "trunc") {
                    return Err(ctx.syntax(line.no, vcol, "finite, lie, or trunc"));
                }
                regime_kind = Some(v.to_string());
            }
            "size" => size = Some(parse_num::<u32>(ctx, line.no, vcol, v, "integer size")?),
            "cost" => cost = parse_num::<u64>(ctx, line.no, vcol, v, "integer cost")?,
            _ => return Err(ctx.syntax(line.no, col, "acts=, blocks=, regime=, size=, or cost=")),
        }
    }
    let acts = acts.ok_or_else(|| ctx.syntax(line.no, line.text.len() + 1, "acts=<input|output|both|param>"))?;
    let blocks = blocks.ok_or_else(|| ctx.syntax(line.no, line.text.len() + 1, "blocks=<list>"))?;
    let regime = match (regime_kind.as_deref(), size) {
        (None, None) => None,
        (Some(k), Some(n)) => Some(match k {
            "finite" => SymmetryRegime::Finite(n),
            "lie" => SymmetryRegime::Lie(n),
            _ => SymmetryRegime::Truncated(n),
        }),
        (Some(_), None) => return Err(ctx.syntax(line.no, line.text.len() + 1, "size=<int>")),
        (None, Some(_)) => return Err(ctx.semantic(&name, "size given without a regime")),
    };
    let mut op = Operator::new(name, acts, &blocks);
    op.regime = regime;
    op.cost_hint = cost;
    Ok(op)
}

fn parse_rewrite(line: &Line, ws: &[(usize, &str)], ctx: &Ctx) -> Result<RewriteDecl, ParseError> {
    if ws.len() != 5 || !is_ident(ws[1].1) {
        return Err(ctx.syntax(line.no, ws[0].0, "rewrite <rule> lhs=<pattern> rhs=<pattern> guard=<guard>"));
    }
    let mut fields = BTreeMap::new();
    for &(col, w) in &ws[2..] {
        let (k, v) = key_value(ctx, line.no, col, w)?;
        if !matches!(k, "lhs" | "rhs" | "guard") || v.is_empty() {
            return Err(ctx.syntax(line.no, col, "lhs=, rhs=, or guard="));
        }
        fields.insert(k, v.to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| ctx.syntax(line.no, line.text.len() + 1, format!("{k}=")))
    };
    Ok(RewriteDecl {
        name: ws[1].1.to_string(),
        lhs: get("lhs")?,
        rhs: get("rhs")?,
        guard: get("guard")?,
    })
}

fn parse_mr_lines(lines: &[Line], ctx: &Ctx) -> Result<MRDescriptor, ParseError> {
    let head = lines[0].words();
    if head.len() != 2 || !is_ident(head[1].1) {
        return Err(ctx.syntax(lines[0].no, head.get(1).map(|w| w.0).unwrap_or(4), "mr name"));
    }
    let name = head[1].1.to_string();
    let mut f: BTreeMap<&str, (usize, usize, &str)> = BTreeMap::new();
    for line in &lines[1..] {
        for (col, w) in line.words() {
            let (k, v) = key_value(ctx, line.no, col, w)?;
            if !matches!(k, "output" | "form" | "diff_order" | "directions" | "adjoint" | "tolerance" | "unit") {
                return Err(ctx.syntax(line.no, col, "output=, form=, diff_order=, directions=, adjoint=, tolerance=, or unit="));
            }
            if f.insert(k, (line.no, col + k.len() + 1, v)).is_some() {
                return Err(ctx.semantic(&name, format!("`{k}` given twice")));
            }
        }
    }
    let end = lines.last().map(|l| (l.no, l.text.len() + 1)).unwrap();
    let need = |k: &str| f.get(k).copied().ok_or_else(|| ctx.syntax(end.0, end.1, format!("{k}=")));
    let (l, c, v) = need("output")?;
    let output_domain: OutputDomain = v.parse().map_err(|_| ctx.syntax(l, c, "program-output or operator-spectrum"))?;
    let (l, c, v) = need("form")?;
    let relation_form: RelationForm = v.parse().map_err(|_| ctx.syntax(l, c, "relation form"))?;
    let (l, c, v) = need("diff_order")?;
    let difference_order = parse_num::<u32>(ctx, l, c, v, "non-negative integer")?;
    let (l, c, v) = need("directions")?;
    let parameter_directions = parse_num::<u32>(ctx, l, c, v, "non-negative integer")?;
    let (l, c, v) = need("adjoint")?;
    let adjoint_indexing: AdjointIndexing = v.parse().map_err(|_| ctx.syntax(l, c, "fixed or configuration-indexed"))?;
    let (l, c, v) = need("tolerance")?;
    let tol = parse_num::<f64>(ctx, l, c, v, "decimal tolerance")?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(ctx.semantic(&name, "tolerance must be finite and non-negative"));
    }
    let (_, c, unit) = need("unit")?;
    if unit.is_empty() {
        return Err(ctx.syntax(end.0, c, "unit text"));
    }
    Ok(MRDescriptor {
        name,
        output_domain,
        relation_form,
        difference_order,
        parameter_directions,
        adjoint_indexing,
        tolerance: Tolerance { value: tol, unit: unit.to_string() },
    })
}

fn parse_sut_lines(lines: &[Line], ctx: &Ctx) -> Result<SutProgram, ParseError> {
    let head = &lines[0];
    let text = head.text;
    let sut_col = text.find("sut").unwrap();
    let after = &text[sut_col + 3..];
    let open = after.find('(').ok_or_else(|| ctx.syntax(head.no, sut_col + 4, "`(`"))?;
    let name = after[..open].trim();
    if !is_ident(name) {
        return Err(ctx.syntax(head.no, sut_col + 5, "sut name"));
    }
    let close = after.find(')').ok_or_else(|| ctx.syntax(head.no, text.len() + 1, "`)`"))?;
    let plist_col = sut_col + 3 + open + 2;
    let mut params = Vec::new();
    let plist = &after[open + 1..close];
    if !plist.trim().is_empty() {
        for p in plist.split(',') {
            let (pn, kind) = match p.split_once(':') {
                Some((n, t)) => {
                    let kind = match t.trim() {
                        "int" => ParamKind::Int,
                        "real" => ParamKind::Real,
                        _ => return Err(ctx.syntax(head.no, plist_col, "parameter type int or real")),
                    };
                    (n.trim(), kind)
                }
                None => (p.trim(), ParamKind::Real),
            };
            if !is_ident(pn) {
                return Err(ctx.syntax(head.no, plist_col, "parameter name"));
            }
            params.push(Param { name: pn.to_string(), kind });
        }
    }
    let attr_off = sut_col + 3 + close + 1;
    let attrs = Line { no: head.no, text: &text[attr_off..] };
    let mut blocks = None;
    let mut homogeneity = None;
    for (col, w) in attrs.words() {
        let col = col + attr_off;
        let (k, v) = key_value(ctx, head.no, col, w)?;
        let vcol = col + k.len() + 1;
        match k {
            "blocks" => blocks = Some(parse_list(ctx, head.no, vcol, v, "block kind", |s| s.parse::<BlockKind>())?),
            "homogeneity" => {
                homogeneity = Some(v.parse::<Homogeneity>().map_err(|_| ctx.syntax(head.no, vcol, "degree-1, scale-invariant, or none"))?)
            }
            _ => return Err(ctx.syntax(head.no, col, "blocks= or homogeneity=")),
        }
    }
    let declared_blocks = blocks
        .ok_or_else(|| ctx.syntax(head.no, text.len() + 1, "blocks=<list>"))?
        .into_iter()
        .collect();
    let homogeneity = homogeneity.ok_or_else(|| ctx.syntax(head.no, text.len() + 1, "homogeneity=<tag>"))?;

    let mut require = None;
    let mut lets = Vec::new();
    let mut body = None;
    for line in &lines[1..] {
        if body.is_some() {
            return Err(ctx.syntax(line.no, 1, "end of program after return"));
        }
        let t = line.text;
        let lead = t.len() - t.trim_start().len();
        let s = t.trim_start();
        let (kw, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let rest_t = rest.trim_start();
        let rest_col = t.len() - rest_t.len();
        match kw {
            "require" => {
                if require.is_some() || !lets.is_empty() {
                    return Err(ctx.syntax(line.no, lead + 1, "require before any let"));
                }
                require = Some(parse_expr(rest_t, name, line.no, rest_col + 1).map_err(|e| ctx.sut_error(e, name))?);
            }
            "let" => {
                let (lhs, rhs) = rest_t.split_once('=').ok_or_else(|| ctx.syntax(line.no, rest_col + 1, "let <name> = <expr>"))?;
                let v = lhs.trim();
                if !is_ident(v) {
                    return Err(ctx.syntax(line.no, rest_col + 1, "binding name"));
                }
                let ecol = t.len() - rhs.len() + 1;
                let e = parse_expr(rhs, name, line.no, ecol).map_err(|e| ctx.sut_error(e, name))?;
                lets.push((v.to_string(), e));
            }
            "return" => {
                body = Some(parse_expr(rest_t, name, line.no, rest_col + 1).map_err(|e| ctx.sut_error(e, name))?);
            }
            _ => return Err(ctx.syntax(line.no, lead + 1, "require, let, or return")),
        }
    }
    let body = body.ok_or_else(|| {
        let l = lines.last().unwrap();
        ctx.syntax(l.no + 1, 1, "return <expr>")
    })?;
    let prog = SutProgram {
        name: name.to_string(),
        params,
        declared_blocks,
        homogeneity,
        require,
        lets,
        body,
    };
    prog.typecheck().map_err(|e| ctx.semantic(name, e.to_string()))?;
    Ok(prog)
}

fn parse_config_lines(lines: &[Line], ctx: &Ctx) -> Result<MutatorConfig, ParseError> {
    let head = lines[0].words();
    if head.len() != 2 || !is_ident(head[1].1) {
        return Err(ctx.syntax(lines[0].no, head.get(1).map(|w| w.0).unwrap_or(8), "config name"));
    }
    let mut cfg = MutatorConfig::named(head[1].1);
    for line in &lines[1..] {
        let ws = line.words();
        let (c0, d) = ws[0];
        let arg = |i: usize, what: &str| -> Result<(usize, &str), ParseError> {
            ws.get(i).copied().ok_or_else(|| ctx.syntax(line.no, line.text.len() + 1, what.to_string()))
        };
        let arity = |n: usize, what: &str| -> Result<(), ParseError> {
            if ws.len() == n { Ok(()) } else { Err(ctx.syntax(line.no, c0, what.to_string())) }
        };
        match d {
            "mutators" => {
                arity(2, "mutators <comma-list>")?;
                let (c, v) = arg(1, "category list")?;
                cfg.categories = parse_list(ctx, line.no, c, v, "mutator category", |s| s.parse::<MutatorCategory>())?;
            }
            "seed" => {
                arity(2, "seed <int>")?;
                let (c, v) = arg(1, "seed")?;
                cfg.seed = parse_num(ctx, line.no, c, v, "integer seed")?;
            }
            "sample_budget" => {
                arity(2, "sample_budget <int>")?;
                let (c, v) = arg(1, "budget")?;
                cfg.sample_budget = parse_num(ctx, line.no, c, v, "integer budget")?;
            }
            "rel_trials" => {
                arity(2, "rel_trials <int>")?;
                let (c, v) = arg(1, "trials")?;
                cfg.rel_trials = parse_num(ctx, line.no, c, v, "integer trial count")?;
            }
            "matrix" => {
                arity(4, "matrix <CATEGORY> <BLOCK> <preserves|breaks|case>")?;
                let cat = ws[1].1.parse().map_err(|_| ctx.syntax(line.no, ws[1].0, "mutator category"))?;
                let b = ws[2].1.parse().map_err(|_| ctx.syntax(line.no, ws[2].0, "block kind"))?;
                let v = ws[3].1.parse().map_err(|_| ctx.syntax(line.no, ws[3].0, "preserves, breaks, or case"))?;
                cfg.matrix_edits.push((cat, b, v));
            }
            "override" => {
                arity(5, "override <sut> <CATEGORY> <BLOCK> <preserves|breaks>")?;
                let cat = ws[2].1.parse().map_err(|_| ctx.syntax(line.no, ws[2].0, "mutator category"))?;
                let b = ws[3].1.parse().map_err(|_| ctx.syntax(line.no, ws[3].0, "block kind"))?;
                let v: OverrideVerdict = ws[4].1.parse().map_err(|_| ctx.syntax(line.no, ws[4].0, "preserves or breaks"))?;
                cfg.overrides.insert((ws[1].1.to_string(), cat, b), v);
            }
            _ => return Err(ctx.syntax(line.no, c0, "mutators, seed, sample_budget, rel_trials, matrix, or override")),
        }
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Serialization

fn join_tokens<I: IntoIterator<Item = String>>(it: I) -> String {
    it.into_iter().collect::<Vec<_>>().join(",")
}

pub fn serialize_algebra(a: &OperatorAlgebra) -> String {
    let mut s = format!("{HEADER}\nalgebra {}\n", a.name);
    for op in &a.operators {
        let _ = write!(
            s,
            "operator {} acts={} blocks={}",
            op.name,
            op.acts_on.token(),
            join_tokens(op.block_tags.iter().map(|b| b.token().to_string()))
        );
        if let Some(r) = op.regime {
            let _ = write!(s, " regime={} size={}", r.token(), r.size());
        }
        let _ = writeln!(s, " cost={}", op.cost_hint);
    }
    if !a.generators.is_empty() {
        let _ = writeln!(s, "generators {}", a.generators.join(","));
    }
    for (b, l) in &a.labels {
        let _ = writeln!(s, "pattern {} {}", b.token(), l);
    }
    for r in &a.rewrite_rules {
        let _ = writeln!(s, "rewrite {} lhs={} rhs={} guard={}", r.name, r.lhs, r.rhs, r.guard);
    }
    s
}

pub fn serialize_mr(m: &MRDescriptor) -> String {
    format!(
        "{HEADER}\nmr {}\noutput={} form={}\ndiff_order={} directions={}\nadjoint={}\ntolerance={:?} unit={}\n",
        m.name,
        m.output_domain.token(),
        m.relation_form.token(),
        m.difference_order,
        m.parameter_directions,
        m.adjoint_indexing.token(),
        m.tolerance.value,
        m.tolerance.unit
    )
}

pub fn serialize_sut(p: &SutProgram) -> String {
    let params = p
        .params
        .iter()
        .map(|x| match x.kind {
            ParamKind::Int => format!("{}: int", x.name),
            ParamKind::Real => x.name.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = format!(
        "{HEADER}\nsut {}({}) blocks={} homogeneity={}\n",
        p.name,
        params,
        join_tokens(p.declared_blocks.iter().map(|b| b.token().to_string())),
        p.homogeneity.token()
    );
    if let Some(r) = &p.require {
        let _ = writeln!(s, "require {r}");
    }
    for (n, e) in &p.lets {
        let _ = writeln!(s, "let {n} = {e}");
    }
    let _ = writeln!(s, "return {}", p.body);
    s
}

pub fn serialize_config(c: &MutatorConfig) -> String {
    let mut s = format!("{HEADER}\nconfig {}\n", c.name);
    let _ = writeln!(s, "mutators {}", join_tokens(c.categories.iter().map(|x| x.token().to_string())));
    let _ = writeln!(s, "seed {}", c.seed);
    let _ = writeln!(s, "sample_budget {}", c.sample_budget);
    let _ = writeln!(s, "rel_trials {}", c.rel_trials);
    for (cat, b, v) in &c.matrix_edits {
        let v = match v {
            Cell::Preserves => "preserves",
            Cell::Breaks => "breaks",
            Cell::CaseDependent => "case",
        };
        let _ = writeln!(s, "matrix {} {} {}", cat.token(), b.token(), v);
    }
    for ((sut, cat, b), v) in &c.overrides {
        let v = match v {
            OverrideVerdict::Preserves => "preserves",
            OverrideVerdict::Breaks => "breaks",
        };
        let _ = writeln!(s, "override {} {} {} {}", sut, cat.token(), b.token(), v);
    }
    s
}

pub fn serialize(doc: &SpecDocument) -> String {
    match &doc.payload {
        Payload::Algebra(a) => serialize_algebra(a),
        Payload::Mr(m) => serialize_mr(m),
        Payload::Sut(p) => serialize_sut(p),
        Payload::Config(c) => serialize_config(c),
    }
}
