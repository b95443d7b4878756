//! Mutation operators over SUT programs and their block-compatibility
//! classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::BlockKind;
use crate::sut::{
    certifies, integer_grid, sample_points, BinOp, CmpOp, Expr, Homogeneity, SutProgram, Type, Value,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MutationError {
    #[error("no override for case-dependent cell ({category}, {block}) on `{sut}`")]
    MissingOverride {
        sut: String,
        category: MutatorCategory,
        block: BlockKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MutatorCategory {
    ConditionalsBoundary,
    Increments,
    InvertNegs,
    Math,
    NegateConditionals,
    ReturnVals,
    CallRemoval,
}

impl MutatorCategory {
    pub const ALL: [MutatorCategory; 7] = [
        MutatorCategory::ConditionalsBoundary,
        MutatorCategory::Increments,
        MutatorCategory::InvertNegs,
        MutatorCategory::Math,
        MutatorCategory::NegateConditionals,
        MutatorCategory::ReturnVals,
        MutatorCategory::CallRemoval,
    ];

    pub fn token(self) -> &'static str {
        match self {
            MutatorCategory::ConditionalsBoundary => "CONDITIONALS_BOUNDARY",
            MutatorCategory::Increments => "INCREMENTS",
            MutatorCategory::InvertNegs => "INVERT_NEGS",
            MutatorCategory::Math => "MATH",
            MutatorCategory::NegateConditionals => "NEGATE_CONDITIONALS",
            MutatorCategory::ReturnVals => "RETURN_VALS",
            MutatorCategory::CallRemoval => "CALL_REMOVAL",
        }
    }

    fn row(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MutatorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MutatorCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MutatorCategory::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| format!("unknown mutator category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cell {
    Preserves,
    Breaks,
    CaseDependent,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Preserves => 'o',
            Cell::Breaks => 'x',
            Cell::CaseDependent => '~',
        }
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preserves" => Ok(Cell::Preserves),
            "breaks" => Ok(Cell::Breaks),
            "case" => Ok(Cell::CaseDependent),
            _ => Err(format!("unknown cell value `{s}`")),
        }
    }
}

/// Category by block table of expected effects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompatibilityMatrix {
    cells: [[Cell; 8]; 7],
}

impl Default for CompatibilityMatrix {
    fn default() -> Self {
        use Cell::{Breaks as X, CaseDependent as C, Preserves as P};
        // Columns: G, O_LE, T_STAR, T_REV, L_STAR, D_STAR, E_STAR, B_REL.
        CompatibilityMatrix {
            cells: [
                [P, X, P, P, P, C, P, P],
                [X, X, X, X, X, C, P, P],
                [C, X, C, X, C, C, P, P],
                [X, C, X, X, P, X, C, P],
                [X, X, C, X, C, X, C, X],
                [P, P, X, X, P, P, C, P],
                [P, P, P, P, P, X, C, P],
            ],
        }
    }
}

impl CompatibilityMatrix {
    pub fn get(&self, c: MutatorCategory, b: BlockKind) -> Cell {
        self.cells[c.row()][b.rank()]
    }

    pub fn set(&mut self, c: MutatorCategory, b: BlockKind, v: Cell) {
        self.cells[c.row()][b.rank()] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OverrideVerdict {
    Preserves,
    Breaks,
}

impl FromStr for OverrideVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preserves" => Ok(OverrideVerdict::Preserves),
            "breaks" => Ok(OverrideVerdict::Breaks),
            _ => Err(format!("override must be preserves or breaks, got `{s}`")),
        }
    }
}

pub type Overrides = BTreeMap<(String, MutatorCategory, BlockKind), OverrideVerdict>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HomogeneityEffect {
    Preserving,
    Breaking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Strata {
    /// Breaks at least one populated block.
    D1,
    /// Preserves every populated block.
    D2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mutant {
    pub id: String,
    pub sut: String,
    pub category: MutatorCategory,
    /// Section index (lets first, then body) and child path.
    pub site: String,
    pub description: String,
    pub program: SutProgram,
    pub homogeneity_effect: HomogeneityEffect,
    /// Same outputs as the base program on the oracle grid and probe points.
    pub equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MutantClassification {
    pub broken_blocks: BTreeSet<BlockKind>,
    pub strata: Strata,
}

fn flip_boundary(op: CmpOp) -> Option<CmpOp> {
    match op {
        CmpOp::Lt => Some(CmpOp::Le),
        CmpOp::Le => Some(CmpOp::Lt),
        CmpOp::Gt => Some(CmpOp::Ge),
        CmpOp::Ge => Some(CmpOp::Gt),
        _ => None,
    }
}

fn negate(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Lt,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
    }
}

fn swap_math(op: BinOp) -> BinOp {
    match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Div,
        BinOp::Div => BinOp::Mul,
        BinOp::Mod => BinOp::Mul,
    }
}

/// Replacement for the node at a site, if the category applies there.
fn rewrite(cat: MutatorCategory, e: &Expr) -> Option<Expr> {
    match (cat, e) {
        (MutatorCategory::ConditionalsBoundary, Expr::Cmp(op, a, b)) => {
            flip_boundary(*op).map(|o| Expr::Cmp(o, a.clone(), b.clone()))
        }
        (MutatorCategory::NegateConditionals, Expr::Cmp(op, a, b)) => {
            Some(Expr::Cmp(negate(*op), a.clone(), b.clone()))
        }
        (MutatorCategory::Increments, Expr::Num(c)) => Some(Expr::Num(c + 1.0)),
        (MutatorCategory::InvertNegs, Expr::Neg(a)) => Some((**a).clone()),
        (MutatorCategory::Math, Expr::Bin(op, a, b)) => {
            Some(Expr::Bin(swap_math(*op), a.clone(), b.clone()))
        }
        (MutatorCategory::CallRemoval, Expr::Call(_, _)) => Some(Expr::Num(1.0)),
        _ => None,
    }
}

/// Return-value replacement: zero, or one where the original returns zero.
/// Boolean returns are inverted.
fn return_mutant(body: &Expr, ty: Type) -> Expr {
    match ty {
        Type::Num => Expr::Cond(
            Box::new(Expr::Cmp(CmpOp::Eq, Box::new(body.clone()), Box::new(Expr::Num(0.0)))),
            Box::new(Expr::Num(1.0)),
            Box::new(Expr::Num(0.0)),
        ),
        Type::Bool => Expr::Cond(
            Box::new(body.clone()),
            Box::new(Expr::Bool(false)),
            Box::new(Expr::Bool(true)),
        ),
    }
}

/// Homogeneity tag of a mutant. Tagged programs use the static degree
/// analysis; untagged ones fall back to a per-category rule.
pub fn homogeneity_effect(base: &SutProgram, mutated: &SutProgram, cat: MutatorCategory) -> HomogeneityEffect {
    match base.homogeneity {
        Homogeneity::None => match cat {
            MutatorCategory::ReturnVals | MutatorCategory::Increments | MutatorCategory::CallRemoval => {
                HomogeneityEffect::Breaking
            }
            _ => HomogeneityEffect::Preserving,
        },
        h => {
            if certifies(mutated, h) {
                HomogeneityEffect::Preserving
            } else {
                HomogeneityEffect::Breaking
            }
        }
    }
}

fn same_outputs(a: &SutProgram, b: &SutProgram, pts: &[Vec<Value>]) -> bool {
    pts.iter().all(|x| match (a.eval(x), b.eval(x)) {
        (Ok(u), Ok(v)) => u == v,
        (Err(_), Err(_)) => true,
        _ => false,
    })
}

/// Points used to flag equivalent mutants.
pub fn equivalence_probe(p: &SutProgram, seed: u64) -> Vec<Vec<Value>> {
    let mut pts = integer_grid(p, 3);
    pts.extend(sample_points(p, 64, seed ^ 0x5eed));
    pts
}

/// One mutant per applicable (site, category) pair, in traversal order.
pub fn mutate(program: &SutProgram, categories: &[MutatorCategory], seed: u64) -> Vec<Mutant> {
    let probe = equivalence_probe(program, seed);
    let ret_ty = program.typecheck().unwrap_or(Type::Num);
    let mut out = Vec::new();
    let wanted: BTreeSet<MutatorCategory> = categories.iter().copied().collect();
    let mut emit = |cat: MutatorCategory, site: String, description: String, mutated: SutProgram| {
        if mutated.typecheck().is_err() {
            return;
        }
        let equivalent = same_outputs(program, &mutated, &probe);
        let id = format!("{}:{}:{}", program.name, cat.token(), site);
        out.push(Mutant {
            id,
            sut: program.name.clone(),
            category: cat,
            site,
            description,
            homogeneity_effect: homogeneity_effect(program, &mutated, cat),
            program: mutated,
            equivalent,
        });
    };
    for cat in MutatorCategory::ALL {
        if !wanted.contains(&cat) {
            continue;
        }
        if cat == MutatorCategory::ReturnVals {
            let mut m = program.clone();
            m.body = return_mutant(&program.body, ret_ty);
            let desc = match ret_ty {
                Type::Num => "replaced return value with zero".to_string(),
                Type::Bool => "inverted boolean return".to_string(),
            };
            emit(cat, "ret".into(), desc, m);
            continue;
        }
        for sec in 0..program.sections() {
            for (path, node) in program.section(sec).walk() {
                let Some(rep) = rewrite(cat, node) else { continue };
                let mut m = program.clone();
                *m.section_mut(sec).at_mut(&path).unwrap() = rep.clone();
                let site = format!(
                    "s{sec}/{}",
                    path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
                );
                let desc = format!("{node} -> {rep}");
                emit(cat, site, desc, m);
            }
        }
    }
    out
}

/// Blocks a mutant breaks among the SUT's populated blocks, and its stratum.
pub fn classify(
    mutant: &Mutant,
    sut_blocks: &BTreeSet<BlockKind>,
    matrix: &CompatibilityMatrix,
    overrides: &Overrides,
) -> Result<MutantClassification, MutationError> {
    let mut broken = BTreeSet::new();
    for block in BlockKind::ALL {
        let populated = sut_blocks.contains(&block);
        let key = (mutant.sut.clone(), mutant.category, block);
        let breaks = match overrides.get(&key) {
            Some(v) => *v == OverrideVerdict::Breaks,
            None => match matrix.get(mutant.category, block) {
                Cell::Preserves => false,
                Cell::Breaks => true,
                Cell::CaseDependent if populated => {
                    return Err(MutationError::MissingOverride {
                        sut: mutant.sut.clone(),
                        category: mutant.category,
                        block,
                    })
                }
                Cell::CaseDependent => true,
            },
        };
        if breaks && populated {
            broken.insert(block);
        }
    }
    let strata = if broken.is_empty() { Strata::D2 } else { Strata::D1 };
    Ok(MutantClassification {
        broken_blocks: broken,
        strata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::{parse_expr, Param, ParamKind};

    fn prog(name: &str, params: &[&str], body: &str, h: Homogeneity, blocks: &[BlockKind]) -> SutProgram {
        SutProgram {
            name: name.into(),
            params: params.iter().map(|p| Param { name: p.to_string(), kind: ParamKind::Real }).collect(),
            declared_blocks: blocks.iter().copied().collect(),
            homogeneity: h,
            require: None,
            lets: vec![],
            body: parse_expr(body, name, 1, 0).unwrap(),
        }
    }

    fn fake(cat: MutatorCategory, sut: &str) -> Mutant {
        let p = prog(sut, &["x"], "x", Homogeneity::None, &[]);
        Mutant {
            id: "m".into(),
            sut: sut.into(),
            category: cat,
            site: "s0/".into(),
            description: String::new(),
            program: p,
            homogeneity_effect: HomogeneityEffect::Preserving,
            equivalent: false,
        }
    }

    #[test]
    fn math_on_g_and_l_breaks_only_g() {
        let blocks: BTreeSet<_> = [BlockKind::G, BlockKind::LStar].into();
        let c = classify(&fake(MutatorCategory::Math, "s"), &blocks, &CompatibilityMatrix::default(), &Overrides::new()).unwrap();
        assert_eq!(c.broken_blocks, [BlockKind::G].into());
        assert_eq!(c.strata, Strata::D1);
    }

    #[test]
    fn boundary_on_l_only_is_d2() {
        let blocks: BTreeSet<_> = [BlockKind::LStar].into();
        let c = classify(&fake(MutatorCategory::ConditionalsBoundary, "s"), &blocks, &CompatibilityMatrix::default(), &Overrides::new()).unwrap();
        assert!(c.broken_blocks.is_empty());
        assert_eq!(c.strata, Strata::D2);
    }

    #[test]
    fn case_cell_needs_override_when_populated() {
        let blocks: BTreeSet<_> = [BlockKind::DStar].into();
        let m = fake(MutatorCategory::ConditionalsBoundary, "s");
        let err = classify(&m, &blocks, &CompatibilityMatrix::default(), &Overrides::new()).unwrap_err();
        assert!(matches!(err, MutationError::MissingOverride { block: BlockKind::DStar, .. }));
        let mut ov = Overrides::new();
        ov.insert(("s".into(), MutatorCategory::ConditionalsBoundary, BlockKind::DStar), OverrideVerdict::Preserves);
        assert_eq!(classify(&m, &blocks, &CompatibilityMatrix::default(), &ov).unwrap().strata, Strata::D2);
    }

    #[test]
    fn case_cell_on_unpopulated_block_is_not_reported() {
        let blocks: BTreeSet<_> = [BlockKind::G].into();
        let c = classify(&fake(MutatorCategory::ConditionalsBoundary, "s"), &blocks, &CompatibilityMatrix::default(), &Overrides::new()).unwrap();
        assert!(c.broken_blocks.is_empty());
    }

    #[test]
    fn default_matrix_rows() {
        let m = CompatibilityMatrix::default();
        let row = |c: MutatorCategory| BlockKind::ALL.iter().map(|b| m.get(c, *b).symbol()).collect::<String>();
        assert_eq!(row(MutatorCategory::ConditionalsBoundary), "oxooo~oo");
        assert_eq!(row(MutatorCategory::Increments), "xxxxx~oo");
        assert_eq!(row(MutatorCategory::InvertNegs), "~x~x~~oo");
        assert_eq!(row(MutatorCategory::Math), "x~xxox~o");
        assert_eq!(row(MutatorCategory::NegateConditionals), "xx~x~x~x");
        assert_eq!(row(MutatorCategory::ReturnVals), "ooxxoo~o");
        assert_eq!(row(MutatorCategory::CallRemoval), "ooooox~o");
    }

    #[test]
    fn midpoint_mutants_and_tags() {
        let p = prog("midpoint", &["a", "b"], "(a + b) / 2", Homogeneity::Degree1, &[BlockKind::LStar]);
        let ms = mutate(&p, &MutatorCategory::ALL, 1);
        let by_cat = |c| ms.iter().filter(|m| m.category == c).count();
        assert_eq!(by_cat(MutatorCategory::Math), 2);
        assert_eq!(by_cat(MutatorCategory::Increments), 1);
        assert_eq!(by_cat(MutatorCategory::ReturnVals), 1);
        for m in &ms {
            let expect = if m.category == MutatorCategory::ReturnVals {
                HomogeneityEffect::Breaking
            } else {
                HomogeneityEffect::Preserving
            };
            assert_eq!(m.homogeneity_effect, expect, "{}", m.description);
        }
    }

    #[test]
    fn mutation_is_deterministic() {
        let p = prog("h", &["x", "y"], "sqrt(x * x + y * y)", Homogeneity::Degree1, &[]);
        assert_eq!(mutate(&p, &MutatorCategory::ALL, 9), mutate(&p, &MutatorCategory::ALL, 9));
    }

    #[test]
    fn hypot_sqrt_replacement_is_breaking() {
        let p = prog("hypot", &["x", "y"], "sqrt(x * x + y * y)", Homogeneity::Degree1, &[]);
        let ms = mutate(&p, &[MutatorCategory::CallRemoval, MutatorCategory::ReturnVals], 0);
        assert_eq!(ms.len(), 2);
        assert!(ms.iter().all(|m| m.homogeneity_effect == HomogeneityEffect::Breaking));
    }

    #[test]
    fn equivalent_boundary_mutant_is_flagged() {
        let mut p = prog("clamp", &["x", "lo", "hi"], "x < lo ? lo : (x > hi ? hi : x)", Homogeneity::Degree1, &[]);
        p.require = Some(parse_expr("lo <= hi", "clamp", 1, 0).unwrap());
        let ms = mutate(&p, &[MutatorCategory::ConditionalsBoundary], 0);
        assert_eq!(ms.len(), 2);
        assert!(ms.iter().all(|m| m.equivalent));
        let neg = mutate(&p, &[MutatorCategory::NegateConditionals], 0);
        assert!(neg.iter().all(|m| !m.equivalent));
    }
}
