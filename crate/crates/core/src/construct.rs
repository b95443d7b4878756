//! From a block decomposition to MetaPatterns.
//!
//! Four steps: extract one invariant per (operator, admissible form) in each
//! populated block, translate each invariant into an MR template, quotient by
//! structural equivalence, and lift the classes to one MetaPattern per block.
//! An abstract cost counter records the work done by the first three steps.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::algebra::{canonical_max, decompose, AlgebraError, BlockKind, OperatorAlgebra};

/// Relation shapes an MR can assert. The last two are recognised only so
/// that reachability can reject them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RelationForm {
    Equivariance,
    Monotonicity,
    SelfAdjointPairing,
    Involution,
    ConvergenceRate,
    QualitativeFeature,
    MethodOrder,
    RewriteEquality,
    HomomorphismFailure,
    MixedDifference,
}

impl RelationForm {
    pub const ALL: [RelationForm; 10] = [
        RelationForm::Equivariance,
        RelationForm::Monotonicity,
        RelationForm::SelfAdjointPairing,
        RelationForm::Involution,
        RelationForm::ConvergenceRate,
        RelationForm::QualitativeFeature,
        RelationForm::MethodOrder,
        RelationForm::RewriteEquality,
        RelationForm::HomomorphismFailure,
        RelationForm::MixedDifference,
    ];

    pub fn token(self) -> &'static str {
        match self {
            RelationForm::Equivariance => "equivariance",
            RelationForm::Monotonicity => "monotonicity",
            RelationForm::SelfAdjointPairing => "self-adjoint-pairing",
            RelationForm::Involution => "involution",
            RelationForm::ConvergenceRate => "convergence-rate",
            RelationForm::QualitativeFeature => "qualitative-feature",
            RelationForm::MethodOrder => "method-order",
            RelationForm::RewriteEquality => "rewrite-equality",
            RelationForm::HomomorphismFailure => "homomorphism-failure",
            RelationForm::MixedDifference => "mixed-difference",
        }
    }
}

impl fmt::Display for RelationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RelationForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationForm::ALL
            .iter()
            .copied()
            .find(|f| f.token() == s)
            .ok_or_else(|| format!("unknown relation form `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TupleRule {
    GroupOrbit,
    OrderPair,
    InnerProductPair,
    InvolutionPair,
    ParametricSequence,
    Trajectory,
    MethodPair,
    RewritePair,
}

impl TupleRule {
    pub fn token(self) -> &'static str {
        match self {
            TupleRule::GroupOrbit => "group-orbit",
            TupleRule::OrderPair => "order-pair",
            TupleRule::InnerProductPair => "inner-product-pair",
            TupleRule::InvolutionPair => "involution-pair",
            TupleRule::ParametricSequence => "parametric-sequence",
            TupleRule::Trajectory => "trajectory",
            TupleRule::MethodPair => "method-pair",
            TupleRule::RewritePair => "rewrite-pair",
        }
    }
}

impl fmt::Display for TupleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl BlockKind {
    /// The single relation form a block admits.
    pub fn admissible_form(self) -> RelationForm {
        match self {
            BlockKind::G => RelationForm::Equivariance,
            BlockKind::OLe => RelationForm::Monotonicity,
            BlockKind::TStar => RelationForm::SelfAdjointPairing,
            BlockKind::TRev => RelationForm::Involution,
            BlockKind::LStar => RelationForm::ConvergenceRate,
            BlockKind::DStar => RelationForm::QualitativeFeature,
            BlockKind::EStar => RelationForm::MethodOrder,
            BlockKind::BRel => RelationForm::RewriteEquality,
        }
    }

    pub fn admits(self, form: RelationForm) -> bool {
        self.admissible_form() == form
    }

    pub fn tuple_rule(self) -> TupleRule {
        match self {
            BlockKind::G => TupleRule::GroupOrbit,
            BlockKind::OLe => TupleRule::OrderPair,
            BlockKind::TStar => TupleRule::InnerProductPair,
            BlockKind::TRev => TupleRule::InvolutionPair,
            BlockKind::LStar => TupleRule::ParametricSequence,
            BlockKind::DStar => TupleRule::Trajectory,
            BlockKind::EStar => TupleRule::MethodPair,
            BlockKind::BRel => TupleRule::RewritePair,
        }
    }

    /// Tuple arity for non-G blocks. G uses the regime size.
    fn fixed_arity(self) -> u32 {
        match self {
            BlockKind::G => 1,
            BlockKind::OLe | BlockKind::TStar | BlockKind::TRev => 2,
            BlockKind::LStar => 3,
            BlockKind::DStar => 1,
            BlockKind::EStar | BlockKind::BRel => 2,
        }
    }
}

/// A block-respecting invariant. Structural equivalence is plain equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BlockInvariant {
    pub block: BlockKind,
    pub phi: BTreeSet<String>,
    pub pi_template: RelationForm,
    pub arity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub form: RelationForm,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MRTemplate {
    pub block: BlockKind,
    pub tuple_rule: TupleRule,
    pub assertion: Assertion,
    pub provenance: BlockInvariant,
}

/// Maps an invariant to its MR template.
pub fn translate(inv: &BlockInvariant) -> MRTemplate {
    MRTemplate {
        block: inv.block,
        tuple_rule: inv.block.tuple_rule(),
        assertion: Assertion {
            form: inv.pi_template,
            tolerance: None,
        },
        provenance: inv.clone(),
    }
}

/// Block an MR is attributed to when it was derived in several blocks.
pub fn assign_block(derivations: &[(BlockKind, BlockInvariant)]) -> Result<BlockKind, AlgebraError> {
    canonical_max(derivations.iter().map(|(b, _)| *b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaPattern {
    pub block: BlockKind,
    pub label: String,
    /// Equivalence-class representatives, sorted.
    pub members: Vec<BlockInvariant>,
}

impl MetaPattern {
    pub fn contains(&self, t: &MRTemplate) -> bool {
        self.block == t.block && self.members.contains(&t.provenance)
    }
}

/// Abstract work units, split by construction step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CostCounter {
    pub extraction: u64,
    pub translation: u64,
    pub quotient: u64,
    pub lift: u64,
}

impl CostCounter {
    pub fn total(&self) -> u64 {
        self.extraction + self.translation + self.quotient + self.lift
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaPatternSet {
    pub algebra: String,
    /// One entry per populated block, canonical order.
    pub patterns: Vec<MetaPattern>,
    pub cost: CostCounter,
}

impl MetaPatternSet {
    pub fn labels(&self) -> BTreeSet<String> {
        self.patterns.iter().map(|p| p.label.clone()).collect()
    }

    pub fn blocks(&self) -> Vec<BlockKind> {
        self.patterns.iter().map(|p| p.block).collect()
    }

    pub fn pattern(&self, block: BlockKind) -> Option<&MetaPattern> {
        self.patterns.iter().find(|p| p.block == block)
    }

    pub fn containing(&self, t: &MRTemplate) -> Vec<&MetaPattern> {
        self.patterns.iter().filter(|p| p.contains(t)).collect()
    }

    pub fn templates(&self) -> Vec<MRTemplate> {
        self.patterns
            .iter()
            .flat_map(|p| p.members.iter().map(translate))
            .collect()
    }
}

fn arity_of(algebra: &OperatorAlgebra, block: BlockKind, op: &str) -> u32 {
    match block {
        BlockKind::G => algebra
            .operator(op)
            .and_then(|o| o.regime)
            .map(|r| r.size())
            .unwrap_or(1),
        b => b.fixed_arity(),
    }
}

/// Invariants extracted from every populated block, with extraction cost.
pub fn extract_invariants(
    algebra: &OperatorAlgebra,
) -> Result<(Vec<BlockInvariant>, u64), AlgebraError> {
    let decomp = decompose(algebra)?;
    let mut out = Vec::new();
    let mut cost = 0u64;
    for block in decomp.populated() {
        for op in decomp.block(block) {
            cost += algebra.operator(op).map(|o| o.cost_hint).unwrap_or(1);
            out.push(BlockInvariant {
                block,
                phi: [op.clone()].into_iter().collect(),
                pi_template: block.admissible_form(),
                arity: arity_of(algebra, block, op),
            });
        }
    }
    Ok((out, cost))
}

/// Builds the MetaPattern set of `algebra`.
pub fn construct_mp(algebra: &OperatorAlgebra) -> Result<MetaPatternSet, AlgebraError> {
    let mut cost = CostCounter::default();
    let (invariants, extraction) = extract_invariants(algebra)?;
    cost.extraction = extraction;

    let mut templates: Vec<MRTemplate> = invariants.iter().map(translate).collect();
    cost.translation = templates.len() as u64;

    // Sort-based quotient: each comparison is one unit.
    let mut comparisons = 0u64;
    templates.sort_by(|a, b| {
        comparisons += 1;
        cmp_key(a).cmp(&cmp_key(b))
    });
    templates.dedup_by(|a, b| {
        comparisons += 1;
        a.provenance == b.provenance
    });
    cost.quotient = comparisons;

    let mut patterns = Vec::new();
    for block in BlockKind::ALL {
        cost.lift += 1;
        let members: Vec<BlockInvariant> = templates
            .iter()
            .filter(|t| t.block == block)
            .map(|t| t.provenance.clone())
            .collect();
        if !members.is_empty() {
            patterns.push(MetaPattern {
                block,
                label: algebra.label_for(block),
                members,
            });
        }
    }
    Ok(MetaPatternSet {
        algebra: algebra.name.clone(),
        patterns,
        cost,
    })
}

fn cmp_key(t: &MRTemplate) -> (usize, &BTreeSet<String>, RelationForm, u32) {
    let p = &t.provenance;
    (p.block.rank(), &p.phi, p.pi_template, p.arity)
}

/// Orders templates canonically; exposed for callers that quotient by hand.
pub fn template_order(a: &MRTemplate, b: &MRTemplate) -> Ordering {
    cmp_key(a).cmp(&cmp_key(b))
}
