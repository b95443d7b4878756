//! Operator algebras and their decomposition into the eight block kinds.
//!
//! Every operator carries one or more block tags. Decomposition groups
//! operators by tag; the blocks are totally ordered so that a derivation
//! landing in several blocks is attributed to the highest one.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("operator `{0}` is MR-relevant but carries no block tag")]
    UnassignedOperator(String),
    #[error("canonical_max called on an empty set of blocks")]
    EmptyInput,
    #[error("invalid algebra `{algebra}`: {reason}")]
    Invalid { algebra: String, reason: String },
}

/// The eight block kinds. Declaration order is the canonical order,
/// highest priority first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockKind {
    G,
    OLe,
    TStar,
    TRev,
    LStar,
    DStar,
    EStar,
    BRel,
}

impl BlockKind {
    /// All kinds in canonical order, highest first.
    pub const ALL: [BlockKind; 8] = [
        BlockKind::G,
        BlockKind::OLe,
        BlockKind::TStar,
        BlockKind::TRev,
        BlockKind::LStar,
        BlockKind::DStar,
        BlockKind::EStar,
        BlockKind::BRel,
    ];

    /// Position in the canonical order; 0 is the highest.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            BlockKind::G => "G",
            BlockKind::OLe => "O_LE",
            BlockKind::TStar => "T_STAR",
            BlockKind::TRev => "T_REV",
            BlockKind::LStar => "L_STAR",
            BlockKind::DStar => "D_STAR",
            BlockKind::EStar => "E_STAR",
            BlockKind::BRel => "B_REL",
        }
    }

    /// Default MetaPattern label.
    pub fn default_label(self) -> &'static str {
        match self {
            BlockKind::G => "m_inv",
            BlockKind::OLe => "m_mono",
            BlockKind::TStar => "m_adj",
            BlockKind::TRev => "m_rev",
            BlockKind::LStar => "m_conv",
            BlockKind::DStar => "m_dyn",
            BlockKind::EStar => "m_cmp",
            BlockKind::BRel => "m_rel",
        }
    }
}

// Greater means higher priority: G > O_LE > ... > B_REL.
impl Ord for BlockKind {
    fn cmp(&self, other: &Self) -> Ordering {
        other.rank().cmp(&self.rank())
    }
}

impl PartialOrd for BlockKind {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for BlockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockKind::ALL
            .iter()
            .copied()
            .find(|b| b.token() == s)
            .ok_or_else(|| format!("unknown block `{s}`"))
    }
}

/// Highest-priority block among `blocks`.
pub fn canonical_max<I>(blocks: I) -> Result<BlockKind, AlgebraError>
where
    I: IntoIterator<Item = BlockKind>,
{
    blocks.into_iter().max().ok_or(AlgebraError::EmptyInput)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ActsOn {
    Input,
    Output,
    Both,
    Param,
}

impl ActsOn {
    pub fn token(self) -> &'static str {
        match self {
            ActsOn::Input => "input",
            ActsOn::Output => "output",
            ActsOn::Both => "both",
            ActsOn::Param => "param",
        }
    }
}

impl FromStr for ActsOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(ActsOn::Input),
            "output" => Ok(ActsOn::Output),
            "both" => Ok(ActsOn::Both),
            "param" => Ok(ActsOn::Param),
            _ => Err(format!("unknown acts-on value `{s}`")),
        }
    }
}

/// Symmetry regime of a G-tagged operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryRegime {
    /// Finite group of the given order.
    Finite(u32),
    /// Continuous group of the given dimension.
    Lie(u32),
    /// Infinite discrete group truncated at K elements.
    Truncated(u32),
}

impl SymmetryRegime {
    pub fn size(self) -> u32 {
        match self {
            SymmetryRegime::Finite(n) | SymmetryRegime::Lie(n) | SymmetryRegime::Truncated(n) => n,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            SymmetryRegime::Finite(_) => "finite",
            SymmetryRegime::Lie(_) => "lie",
            SymmetryRegime::Truncated(_) => "trunc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Operator {
    pub name: String,
    pub acts_on: ActsOn,
    pub block_tags: BTreeSet<BlockKind>,
    pub regime: Option<SymmetryRegime>,
    pub cost_hint: u64,
}

impl Operator {
    pub fn new(name: impl Into<String>, acts_on: ActsOn, tags: &[BlockKind]) -> Self {
        Operator {
            name: name.into(),
            acts_on,
            block_tags: tags.iter().copied().collect(),
            regime: None,
            cost_hint: 1,
        }
    }

    pub fn with_regime(mut self, regime: SymmetryRegime) -> Self {
        self.regime = Some(regime);
        self
    }

    pub fn with_cost(mut self, cost: u64) -> Self {
        self.cost_hint = cost;
        self
    }
}

/// A named rewrite rule attached to a B_REL-bearing algebra. The left and
/// right sides are kept as pattern text; the relational module parses them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteDecl {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub guard: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorAlgebra {
    pub name: String,
    pub operators: Vec<Operator>,
    pub generators: Vec<String>,
    pub rewrite_rules: Vec<RewriteDecl>,
    /// Per-block label overrides for MetaPatterns.
    pub labels: BTreeMap<BlockKind, String>,
}

impl OperatorAlgebra {
    /// Builds an algebra and checks its invariants.
    ///
    /// An algebra with no operators is accepted with an empty generator list.
    pub fn new(
        name: impl Into<String>,
        operators: Vec<Operator>,
        generators: Vec<String>,
        rewrite_rules: Vec<RewriteDecl>,
        labels: BTreeMap<BlockKind, String>,
    ) -> Result<Self, AlgebraError> {
        let alg = OperatorAlgebra {
            name: name.into(),
            operators,
            generators,
            rewrite_rules,
            labels,
        };
        alg.validate()?;
        Ok(alg)
    }

    fn invalid(&self, reason: impl Into<String>) -> AlgebraError {
        AlgebraError::Invalid {
            algebra: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<(), AlgebraError> {
        let mut seen = BTreeSet::new();
        for op in &self.operators {
            if !seen.insert(op.name.as_str()) {
                return Err(self.invalid(format!("duplicate operator `{}`", op.name)));
            }
            let in_g = op.block_tags.contains(&BlockKind::G);
            if in_g && op.regime.is_none() {
                return Err(self.invalid(format!("G operator `{}` needs a regime", op.name)));
            }
            if !in_g && op.regime.is_some() {
                return Err(self.invalid(format!(
                    "operator `{}` has a regime but no G tag",
                    op.name
                )));
            }
            if let Some(r) = op.regime {
                if r.size() == 0 {
                    return Err(self.invalid(format!("regime size of `{}` is zero", op.name)));
                }
            }
        }
        if !self.operators.is_empty() && self.generators.is_empty() {
            return Err(self.invalid("generator list is empty"));
        }
        let mut gens = BTreeSet::new();
        for g in &self.generators {
            if !seen.contains(g.as_str()) {
                return Err(self.invalid(format!("generator `{g}` is not a declared operator")));
            }
            if !gens.insert(g.as_str()) {
                return Err(self.invalid(format!("generator `{g}` listed twice")));
            }
        }
        let has_rel = self
            .operators
            .iter()
            .any(|o| o.block_tags.contains(&BlockKind::BRel));
        if has_rel && self.rewrite_rules.is_empty() {
            return Err(self.invalid("B_REL operators present but no rewrite rules"));
        }
        if !has_rel && !self.rewrite_rules.is_empty() {
            return Err(self.invalid("rewrite rules present but no B_REL operator"));
        }
        Ok(())
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    pub fn label_for(&self, block: BlockKind) -> String {
        self.labels
            .get(&block)
            .cloned()
            .unwrap_or_else(|| block.default_label().to_string())
    }

    /// Strips `block` from every operator, dropping operators left untagged.
    pub fn without_block(&self, block: BlockKind) -> OperatorAlgebra {
        let operators: Vec<Operator> = self
            .operators
            .iter()
            .filter_map(|o| {
                let mut o = o.clone();
                o.block_tags.remove(&block);
                if block == BlockKind::G {
                    o.regime = None;
                }
                (!o.block_tags.is_empty()).then_some(o)
            })
            .collect();
        let kept: BTreeSet<&str> = operators.iter().map(|o| o.name.as_str()).collect();
        let generators = self
            .generators
            .iter()
            .filter(|g| kept.contains(g.as_str()))
            .cloned()
            .collect();
        let rewrite_rules = if block == BlockKind::BRel {
            Vec::new()
        } else {
            self.rewrite_rules.clone()
        };
        OperatorAlgebra {
            name: self.name.clone(),
            operators,
            generators,
            rewrite_rules,
            labels: self.labels.clone(),
        }
    }
}

/// Operators of an algebra grouped by block. Always holds all eight keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    pub per_block: BTreeMap<BlockKind, BTreeSet<String>>,
}

impl BlockDecomposition {
    pub fn block(&self, kind: BlockKind) -> &BTreeSet<String> {
        &self.per_block[&kind]
    }

    pub fn is_populated(&self, kind: BlockKind) -> bool {
        !self.per_block[&kind].is_empty()
    }

    /// Populated blocks in canonical order.
    pub fn populated(&self) -> Vec<BlockKind> {
        BlockKind::ALL
            .iter()
            .copied()
            .filter(|b| self.is_populated(*b))
            .collect()
    }

    /// An algebra whose decomposition equals this one. G operators get a
    /// placeholder finite regime of order 1.
    pub fn rebuild_algebra(&self, name: &str) -> OperatorAlgebra {
        let mut tags: BTreeMap<&str, Vec<BlockKind>> = BTreeMap::new();
        for (b, ops) in &self.per_block {
            for op in ops {
                tags.entry(op.as_str()).or_default().push(*b);
            }
        }
        let operators: Vec<Operator> = tags
            .into_iter()
            .map(|(n, t)| {
                let mut op = Operator::new(n, ActsOn::Input, &t);
                if op.block_tags.contains(&BlockKind::G) {
                    op.regime = Some(SymmetryRegime::Finite(1));
                }
                op
            })
            .collect();
        let generators = operators.iter().map(|o| o.name.clone()).collect();
        let rewrite_rules = if self.is_populated(BlockKind::BRel) {
            vec![RewriteDecl {
                name: "identity".into(),
                lhs: "R".into(),
                rhs: "R".into(),
                guard: "true".into(),
            }]
        } else {
            Vec::new()
        };
        OperatorAlgebra {
            name: name.to_string(),
            operators,
            generators,
            rewrite_rules,
            labels: BTreeMap::new(),
        }
    }
}

/// Groups the operators of `algebra` by block tag.
pub fn decompose(algebra: &OperatorAlgebra) -> Result<BlockDecomposition, AlgebraError> {
    let mut per_block: BTreeMap<BlockKind, BTreeSet<String>> =
        BlockKind::ALL.iter().map(|b| (*b, BTreeSet::new())).collect();
    for op in &algebra.operators {
        if op.block_tags.is_empty() {
            return Err(AlgebraError::UnassignedOperator(op.name.clone()));
        }
        for tag in &op.block_tags {
            per_block.get_mut(tag).unwrap().insert(op.name.clone());
        }
    }
    Ok(BlockDecomposition { per_block })
}
