//! Deciding whether an MR descriptor is reachable from an algebra's blocks,
//! with the five structural obstructions that rule a descriptor out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{canonical_max, decompose, AlgebraError, BlockDecomposition, BlockKind, OperatorAlgebra};
use crate::construct::RelationForm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReachabilityError {
    #[error("MR `{0}` is reachable; there is no rejection to explain")]
    NotRejected(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputDomain {
    ProgramOutput,
    OperatorSpectrum,
}

impl OutputDomain {
    pub fn token(self) -> &'static str {
        match self {
            OutputDomain::ProgramOutput => "program-output",
            OutputDomain::OperatorSpectrum => "operator-spectrum",
        }
    }
}

impl FromStr for OutputDomain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "program-output" => Ok(OutputDomain::ProgramOutput),
            "operator-spectrum" => Ok(OutputDomain::OperatorSpectrum),
            _ => Err(format!("unknown output domain `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AdjointIndexing {
    Fixed,
    ConfigurationIndexed,
}

impl AdjointIndexing {
    pub fn token(self) -> &'static str {
        match self {
            AdjointIndexing::Fixed => "fixed",
            AdjointIndexing::ConfigurationIndexed => "configuration-indexed",
        }
    }
}

impl FromStr for AdjointIndexing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(AdjointIndexing::Fixed),
            "configuration-indexed" => Ok(AdjointIndexing::ConfigurationIndexed),
            _ => Err(format!("unknown adjoint indexing `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerance {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MRDescriptor {
    pub name: String,
    pub output_domain: OutputDomain,
    pub relation_form: RelationForm,
    pub difference_order: u32,
    pub parameter_directions: u32,
    pub adjoint_indexing: AdjointIndexing,
    pub tolerance: Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Obstruction {
    /// Output lives in an operator spectrum rather than program output.
    O1,
    /// Relation asserts a failure of homomorphism.
    O2,
    /// Adjoint is re-indexed by the configuration.
    O3,
    /// Second or higher difference order.
    O4,
    /// Two or more independent parameter directions.
    O5,
}

impl Obstruction {
    pub const ALL: [Obstruction; 5] = [
        Obstruction::O1,
        Obstruction::O2,
        Obstruction::O3,
        Obstruction::O4,
        Obstruction::O5,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Obstruction::O1 => "output is an operator spectrum, not a program output",
            Obstruction::O2 => "relation is a failure of homomorphism",
            Obstruction::O3 => "adjoint is indexed by the configuration",
            Obstruction::O4 => "difference order is two or more",
            Obstruction::O5 => "two or more independent parameter directions",
        }
    }
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReachabilityVerdict {
    pub reachable: bool,
    pub assigned_block: Option<BlockKind>,
    pub obstructions: BTreeSet<Obstruction>,
    /// Populated blocks whose admissible form matches the descriptor.
    pub admitting_blocks: BTreeSet<BlockKind>,
}

pub fn obstructions_of(mr: &MRDescriptor) -> BTreeSet<Obstruction> {
    let mut out = BTreeSet::new();
    if mr.output_domain == OutputDomain::OperatorSpectrum {
        out.insert(Obstruction::O1);
    }
    if mr.relation_form == RelationForm::HomomorphismFailure {
        out.insert(Obstruction::O2);
    }
    if mr.adjoint_indexing == AdjointIndexing::ConfigurationIndexed {
        out.insert(Obstruction::O3);
    }
    if mr.difference_order >= 2 {
        out.insert(Obstruction::O4);
    }
    if mr.parameter_directions >= 2 {
        out.insert(Obstruction::O5);
    }
    out
}

fn admitting(mr: &MRDescriptor, decomp: &BlockDecomposition) -> BTreeSet<BlockKind> {
    decomp
        .populated()
        .into_iter()
        .filter(|b| b.admits(mr.relation_form))
        .collect()
}

pub fn check_reachability(
    mr: &MRDescriptor,
    algebra: &OperatorAlgebra,
) -> Result<ReachabilityVerdict, ReachabilityError> {
    let decomp = decompose(algebra)?;
    let obstructions = obstructions_of(mr);
    let admitting_blocks = admitting(mr, &decomp);
    let reachable = obstructions.is_empty() && !admitting_blocks.is_empty();
    let assigned_block = if reachable {
        Some(canonical_max(admitting_blocks.iter().copied())?)
    } else {
        None
    };
    Ok(ReachabilityVerdict {
        reachable,
        assigned_block,
        obstructions,
        admitting_blocks,
    })
}

/// One sentence per block saying why the block's template does not fit.
pub fn exhaust_blocks(
    mr: &MRDescriptor,
    algebra: &OperatorAlgebra,
) -> Result<BTreeMap<BlockKind, String>, ReachabilityError> {
    let verdict = check_reachability(mr, algebra)?;
    if verdict.reachable {
        return Err(ReachabilityError::NotRejected(mr.name.clone()));
    }
    let decomp = decompose(algebra)?;
    let mut out = BTreeMap::new();
    for block in BlockKind::ALL {
        let text = if !decomp.is_populated(block) {
            "block empty for this algebra".to_string()
        } else {
            mismatch_text(mr, block)
        };
        out.insert(block, text);
    }
    Ok(out)
}

fn mismatch_text(mr: &MRDescriptor, block: BlockKind) -> String {
    let mut parts = Vec::new();
    let form = block.admissible_form();
    if mr.relation_form != form {
        parts.push(format!(
            "{block} template asserts {form} over {} tuples; the MR asserts {}",
            block.tuple_rule(),
            mr.relation_form
        ));
    }
    if mr.output_domain == OutputDomain::OperatorSpectrum {
        parts.push(format!(
            "{block} relates program outputs, the MR observes an operator spectrum"
        ));
    }
    if mr.adjoint_indexing == AdjointIndexing::ConfigurationIndexed {
        if block == BlockKind::TStar {
            parts.push("T_STAR fixes one adjoint, the MR re-indexes it per configuration".to_string());
        } else {
            parts.push(format!("{block} has no configuration-indexed adjoint"));
        }
    }
    if mr.difference_order >= 2 || mr.parameter_directions >= 2 {
        let shape = if mr.difference_order >= 2 && mr.parameter_directions >= 2 {
            // A mixed difference samples every corner of the parameter box.
            let points = 2u32.saturating_pow(mr.parameter_directions);
            format!("a {}-point mixed-difference relation", number_word(points))
        } else if mr.difference_order >= 2 {
            format!("a difference of order {}", mr.difference_order)
        } else {
            format!("a relation over {} parameter directions", mr.parameter_directions)
        };
        let own = match block {
            BlockKind::OLe => "two theta-comparable points along a single direction".to_string(),
            BlockKind::LStar => "a one-parameter sequence".to_string(),
            b => format!("{} tuples of first order", b.tuple_rule()),
        };
        parts.push(format!("structurally {shape}; the {block} template relates {own}"));
    }
    if parts.is_empty() {
        parts.push(format!("{block} template does not match"));
    }
    parts.join("; ")
}

fn number_word(n: u32) -> String {
    match n {
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        6 => "six".into(),
        8 => "eight".into(),
        n => n.to_string(),
    }
}
