//! End-to-end desk-scale experiments over the bundled fixtures.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{canonical_max, ActsOn, AlgebraError, BlockKind, Operator, OperatorAlgebra, SymmetryRegime};
use crate::construct::{construct_mp, CostCounter, MRTemplate};
use crate::fixtures::{FixtureError, Fixtures, ALGEBRAS, HOMOGENEOUS_SUTS, SET_B, SET_L};
use crate::harness::{
    coverage, falsification_verdict, reachable_templates, run_kill_experiment, ExecutableMR, FalsificationVerdict,
    HarnessError, KillMatrix, SutKillSummary,
};
use crate::mutation::{
    classify, CompatibilityMatrix, HomogeneityEffect, Mutant, MutantClassification, MutationError, MutatorCategory,
    Overrides,
};
use crate::reachability::{check_reachability, Obstruction, ReachabilityError};
use crate::relational::{run_rel_mrs, Engine, Fault, RelError, RelMrResult, RewriteRule};
use crate::spec::MutatorConfig;
use crate::sut::SutProgram;
use crate::zoo::{doubling, set_n, DOUBLING_K};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Relational(#[from] RelError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Reachability(#[from] ReachabilityError),
}

/// Compatibility matrix with the config's cell edits applied.
pub fn active_matrix(cfg: &MutatorConfig) -> CompatibilityMatrix {
    let mut m = CompatibilityMatrix::default();
    for (c, b, v) in &cfg.matrix_edits {
        m.set(*c, *b, *v);
    }
    m
}

/// Bundled overrides, then the config's own on top.
pub fn active_overrides(fx: &Fixtures, cfg: &MutatorConfig) -> Result<Overrides, FixtureError> {
    let mut o = fx.overrides()?;
    o.extend(cfg.overrides.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(o)
}

#[derive(Debug, Clone, Serialize)]
pub struct ZooRun {
    /// Non-equivalent mutants of every SUT.
    pub mutants: Vec<Mutant>,
    pub classifications: Vec<MutantClassification>,
    /// Identifiers of mutants dropped as equivalent.
    pub equivalent: Vec<String>,
    pub mrs: Vec<ExecutableMR>,
    pub matrix: KillMatrix,
}

impl ZooRun {
    pub fn mr_row(&self, name: &str) -> Option<&[bool]> {
        self.matrix.row(name)
    }

    pub fn mutant_index(&self, sut: &str) -> impl Iterator<Item = usize> + '_ {
        let sut = sut.to_string();
        self.mutants.iter().enumerate().filter(move |(_, m)| m.sut == sut).map(|(i, _)| i)
    }
}

/// Live mutants, their classifications, and the ids dropped as equivalent.
pub type MutatedZoo = (Vec<Mutant>, Vec<MutantClassification>, Vec<String>);

pub fn mutate_zoo(
    zoo: &BTreeMap<String, SutProgram>,
    cfg: &MutatorConfig,
    matrix: &CompatibilityMatrix,
    overrides: &Overrides,
) -> Result<MutatedZoo, MutationError> {
    let mut mutants = Vec::new();
    let mut classes = Vec::new();
    let mut equivalent = Vec::new();
    for name in crate::fixtures::SUTS {
        let p = &zoo[name];
        for m in crate::mutation::mutate(p, &cfg.categories, cfg.seed) {
            if m.equivalent {
                equivalent.push(m.id.clone());
                continue;
            }
            classes.push(classify(&m, &p.declared_blocks, matrix, overrides)?);
            mutants.push(m);
        }
    }
    Ok((mutants, classes, equivalent))
}

pub fn run_zoo(fx: &Fixtures, cfg: &MutatorConfig) -> Result<ZooRun, ExperimentError> {
    let zoo = fx.zoo()?;
    let matrix = active_matrix(cfg);
    let overrides = active_overrides(fx, cfg)?;
    let (mutants, classifications, equivalent) = mutate_zoo(&zoo, cfg, &matrix, &overrides)?;
    let mrs = set_n(cfg.sample_budget);
    let mut km = run_kill_experiment(&zoo, &mrs, &mutants, cfg.seed)?;
    km.strata = classifications.iter().map(|c| Some(c.strata)).collect();
    Ok(ZooRun { mutants, classifications, equivalent, mrs, matrix: km })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LBlindness {
    /// Scaling-MR kills per homogeneous SUT.
    pub per_sut: BTreeMap<String, SutKillSummary>,
    /// Preserving-tagged mutants killed by a scaling MR; must be empty.
    pub preserving_kills: Vec<String>,
    pub hypot_return_zero: Option<(bool, HomogeneityEffect)>,
    pub hypot_sqrt_constant: Option<(bool, HomogeneityEffect)>,
    pub verdict: FalsificationVerdict,
    /// Preserving MATH/RETURN_VALS mutants that the active matrix marks as
    /// breaking the scaling block.
    pub inconsistent: Vec<String>,
}

impl LBlindness {
    pub fn passes(&self) -> bool {
        let killed_breaking = |x: &Option<(bool, HomogeneityEffect)>| matches!(x, Some((true, HomogeneityEffect::Breaking)));
        self.preserving_kills.is_empty()
            && killed_breaking(&self.hypot_return_zero)
            && killed_breaking(&self.hypot_sqrt_constant)
            && !self.verdict.falsified
            && self.inconsistent.is_empty()
    }
}

pub fn l_blindness(run: &ZooRun) -> LBlindness {
    let mut per_sut = BTreeMap::new();
    let mut preserving_kills = Vec::new();
    let mut inconsistent = Vec::new();
    for sut in HOMOGENEOUS_SUTS {
        let row = run.mr_row(&format!("{sut}.L_scale"));
        let mut s = SutKillSummary { kills: 0, mutants: 0, killed_effects: vec![] };
        for j in run.mutant_index(sut) {
            let m = &run.mutants[j];
            s.mutants += 1;
            if row.is_some_and(|r| r[j]) {
                s.kills += 1;
                s.killed_effects.push(m.homogeneity_effect);
                if m.homogeneity_effect == HomogeneityEffect::Preserving {
                    preserving_kills.push(m.id.clone());
                }
            }
            let suspect = matches!(m.category, MutatorCategory::Math | MutatorCategory::ReturnVals);
            if suspect
                && m.homogeneity_effect == HomogeneityEffect::Preserving
                && run.classifications[j].broken_blocks.contains(&BlockKind::LStar)
            {
                inconsistent.push(m.id.clone());
            }
        }
        per_sut.insert(sut.to_string(), s);
    }
    let find = |cat: MutatorCategory, needle: &str| {
        let row = run.mr_row("hypot.L_scale")?;
        run.mutant_index("hypot")
            .find(|j| run.mutants[*j].category == cat && run.mutants[*j].description.contains(needle))
            .map(|j| (row[j], run.mutants[j].homogeneity_effect))
    };
    LBlindness {
        verdict: falsification_verdict(&per_sut),
        per_sut,
        preserving_kills,
        hypot_return_zero: find(MutatorCategory::ReturnVals, "zero"),
        hypot_sqrt_constant: find(MutatorCategory::CallRemoval, "sqrt"),
        inconsistent,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GBoundary {
    /// Sign-flip kills per SUT, over every mutant.
    pub kills: BTreeMap<String, usize>,
    pub mutants: BTreeMap<String, usize>,
}

impl GBoundary {
    pub fn passes(&self) -> bool {
        !self.kills.is_empty() && self.kills.values().all(|k| *k == 0)
    }
}

pub fn g_boundary(run: &ZooRun) -> GBoundary {
    let mut kills = BTreeMap::new();
    let mut mutants = BTreeMap::new();
    for sut in ["gcd", "lcm"] {
        let row = run.mr_row(&format!("{sut}.G_negate"));
        let idx: Vec<usize> = run.mutant_index(sut).collect();
        mutants.insert(sut.to_string(), idx.len());
        kills.insert(sut.to_string(), idx.iter().filter(|j| row.is_some_and(|r| r[**j])).count());
    }
    GBoundary { kills, mutants }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSweep {
    pub mr: String,
    /// `(K, detection rate)` at K, 2K, 4K.
    pub rates: Vec<(u32, f64)>,
    pub stable: bool,
}

/// Detection rate of the doubling orbit on `exact_log2` at K, 2K, 4K.
pub fn k_sweep(fx: &Fixtures, cfg: &MutatorConfig) -> Result<KSweep, ExperimentError> {
    let zoo = fx.zoo()?;
    let sut = "exact_log2";
    let single: BTreeMap<String, SutProgram> = [(sut.to_string(), zoo[sut].clone())].into();
    let mutants: Vec<Mutant> = crate::mutation::mutate(&zoo[sut], &cfg.categories, cfg.seed)
        .into_iter()
        .filter(|m| !m.equivalent)
        .collect();
    let mut rates = Vec::new();
    for k in [DOUBLING_K, 2 * DOUBLING_K, 4 * DOUBLING_K] {
        let mr = doubling(sut, "x", k, cfg.sample_budget);
        let km = run_kill_experiment(&single, &[mr], &mutants, cfg.seed)?;
        let rate = if mutants.is_empty() { 0.0 } else { km.kills_by(0) as f64 / mutants.len() as f64 };
        rates.push((k, rate));
    }
    let lo = rates.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = rates.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(KSweep { mr: format!("{sut}.G_double"), stable: hi - lo <= 0.05, rates })
}

// ---------------------------------------------------------------------------
// Structural checks

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoldenDerivation {
    pub algebra: String,
    pub expected: BTreeSet<String>,
    pub got: BTreeSet<String>,
}

fn labels(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

pub fn expected_labels(algebra: &str) -> BTreeSet<String> {
    match algebra {
        "boltzmann" => labels(&["m_inv", "m_mono", "m_adj", "m_rev", "m_conv", "m_dyn", "m_cmp"]),
        "pwr" => labels(&["m_inv", "m_mono", "m_adj", "m_conv", "m_dyn", "m_cmp"]),
        "equivariant" => labels(&["m_inv", "m_mono", "m_adj", "m_rev", "m_conv"]),
        "sort" => labels(&["m_inv", "m_mono"]),
        "ffn" => labels(&["m_stab"]),
        "relational" => labels(&["m_rel_inv", "m_rel_mono", "m_rel_cmp", "m_rel"]),
        _ => BTreeSet::new(),
    }
}

pub fn golden_derivations(fx: &Fixtures) -> Result<Vec<GoldenDerivation>, ExperimentError> {
    ALGEBRAS
        .iter()
        .map(|a| {
            let mp = construct_mp(&fx.algebra(a)?)?;
            Ok(GoldenDerivation { algebra: a.to_string(), expected: expected_labels(a), got: mp.labels() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReachabilityCase {
    pub mr: String,
    pub algebra: String,
    pub expected_obstructions: BTreeSet<Obstruction>,
    pub expected_block: Option<BlockKind>,
    pub got_obstructions: BTreeSet<Obstruction>,
    pub got_block: Option<BlockKind>,
}

impl ReachabilityCase {
    pub fn passes(&self) -> bool {
        self.expected_obstructions == self.got_obstructions && self.expected_block == self.got_block
    }
}

fn reach_case(
    fx: &Fixtures,
    mr: &str,
    algebra: &str,
    obs: &[Obstruction],
    block: Option<BlockKind>,
) -> Result<ReachabilityCase, ExperimentError> {
    let v = check_reachability(&fx.mr(mr)?, &fx.algebra(algebra)?)?;
    Ok(ReachabilityCase {
        mr: mr.into(),
        algebra: algebra.into(),
        expected_obstructions: obs.iter().copied().collect(),
        expected_block: block,
        got_obstructions: v.obstructions,
        got_block: v.assigned_block,
    })
}

pub fn reachability_cases(fx: &Fixtures) -> Result<Vec<ReachabilityCase>, ExperimentError> {
    use Obstruction::*;
    Ok(vec![
        reach_case(fx, "rho_nonadd", "boltzmann", &[O1, O2, O3], None)?,
        reach_case(fx, "rho_mtc_bor", "boltzmann", &[O1, O4, O5], None)?,
        reach_case(fx, "rho_rot", "equivariant", &[], Some(BlockKind::G))?,
        reach_case(fx, "rho_adj", "equivariant", &[], Some(BlockKind::TStar))?,
        reach_case(fx, "rho_train_rev", "equivariant", &[], Some(BlockKind::TRev))?,
        reach_case(fx, "rho_join_comm", "relational", &[], Some(BlockKind::G))?,
    ])
}

pub fn obstruction_independence(fx: &Fixtures) -> Result<Vec<ReachabilityCase>, ExperimentError> {
    Obstruction::ALL
        .iter()
        .enumerate()
        .map(|(i, o)| reach_case(fx, &format!("only_o{}", i + 1), "boltzmann", &[*o], None))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    pub templates: usize,
    /// Templates not in exactly one MetaPattern.
    pub membership_violations: usize,
    pub block_pairs: usize,
    pub order_violations: usize,
}

impl ClosureReport {
    pub fn passes(&self) -> bool {
        self.membership_violations == 0 && self.order_violations == 0 && self.block_pairs == 28
    }
}

/// Random operator subsets of the bundled algebras, same labels and rules.
fn random_subalgebra(base: &OperatorAlgebra, rng: &mut ChaCha8Rng, tag: usize) -> Result<OperatorAlgebra, AlgebraError> {
    let mut ops: Vec<Operator> = base.operators.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    if ops.is_empty() {
        ops.push(base.operators[rng.gen_range(0..base.operators.len())].clone());
    }
    let names: Vec<String> = ops.iter().map(|o| o.name.clone()).collect();
    let has_rel = ops.iter().any(|o| o.block_tags.contains(&BlockKind::BRel));
    let rules = if has_rel { base.rewrite_rules.clone() } else { vec![] };
    OperatorAlgebra::new(format!("{}#{tag}", base.name), ops, names, rules, base.labels.clone())
}

pub fn closure_suite(fx: &Fixtures, n: usize, seed: u64) -> Result<ClosureReport, ExperimentError> {
    let bases = ALGEBRAS.iter().map(|a| fx.algebra(a)).collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for i in 0..n {
        let base = &bases[rng.gen_range(0..bases.len())];
        let a = random_subalgebra(base, &mut rng, i)?;
        let mp = construct_mp(&a)?;
        let all: Vec<MRTemplate> = mp.templates();
        let t = &all[rng.gen_range(0..all.len())];
        if mp.containing(t).len() != 1 {
            violations += 1;
        }
    }
    let mut pairs = 0;
    let mut order_violations = 0;
    for (i, a) in BlockKind::ALL.iter().enumerate() {
        for b in &BlockKind::ALL[i + 1..] {
            pairs += 1;
            let ab = canonical_max([*a, *b])?;
            let ba = canonical_max([*b, *a])?;
            // Totality, antisymmetry, and agreement with rank order.
            if ab != ba || (ab != *a && ab != *b) || (a > b) == (b > a) || (ab == *a) != (a > b) {
                order_violations += 1;
            }
            for c in BlockKind::ALL {
                if a > b && *b > c && !(*a > c) {
                    order_violations += 1;
                }
            }
        }
    }
    Ok(ClosureReport { templates: n, membership_violations: violations, block_pairs: pairs, order_violations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityPoint {
    pub n: usize,
    pub cost: CostCounter,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexitySmoke {
    pub points: Vec<ComplexityPoint>,
    pub calibration: f64,
}

impl ComplexitySmoke {
    pub fn passes(&self) -> bool {
        self.points.iter().all(|p| p.ratio <= 1.5 * self.calibration)
    }
}

/// Synthetic algebra with `n` generators spread over seven blocks.
pub fn synthetic_algebra(n: usize) -> OperatorAlgebra {
    let blocks = &BlockKind::ALL[..7];
    let ops: Vec<Operator> = (0..n)
        .map(|i| {
            let b = blocks[i % blocks.len()];
            let op = Operator::new(format!("op{i}"), ActsOn::Input, &[b]);
            if b == BlockKind::G {
                op.with_regime(SymmetryRegime::Finite(2))
            } else {
                op
            }
        })
        .collect();
    let gens = ops.iter().map(|o| o.name.clone()).collect();
    OperatorAlgebra::new(format!("synthetic{n}"), ops, gens, vec![], Default::default()).unwrap()
}

pub fn complexity_smoke() -> Result<ComplexitySmoke, ExperimentError> {
    let mut points = Vec::new();
    for n in [10usize, 100, 1000] {
        let cost = construct_mp(&synthetic_algebra(n))?.cost;
        let ratio = cost.total() as f64 / (n as f64 * ((n + 1) as f64).log2());
        points.push(ComplexityPoint { n, cost, ratio });
    }
    Ok(ComplexitySmoke { calibration: points[0].ratio, points })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageCase {
    pub set: String,
    pub expected: Ratio<u64>,
    pub got: Ratio<u64>,
}

pub fn coverage_cases(fx: &Fixtures) -> Result<Vec<CoverageCase>, ExperimentError> {
    let alg = fx.algebra("equivariant")?;
    let set_n: Vec<MRTemplate> = construct_mp(&alg)?.templates();
    let set_l = reachable_templates(&fx.mrs(&SET_L)?, &alg)?;
    let set_b = reachable_templates(&fx.mrs(&SET_B)?, &alg)?;
    Ok(vec![
        CoverageCase { set: "N".into(), expected: Ratio::new(1, 1), got: coverage(&set_n, &alg)? },
        CoverageCase { set: "L".into(), expected: Ratio::new(2, 5), got: coverage(&set_l, &alg)? },
        CoverageCase { set: "B".into(), expected: Ratio::new(1, 5), got: coverage(&set_b, &alg)? },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationalSuite {
    pub trials: usize,
    pub correct: Vec<RelMrResult>,
    pub guardless: Vec<RelMrResult>,
    pub semi_join: Vec<RelMrResult>,
}

fn failures(rs: &[RelMrResult], name: &str) -> usize {
    rs.iter().find(|r| r.name == name).map_or(0, |r| r.failures)
}

impl RelationalSuite {
    pub fn passes(&self) -> bool {
        self.correct.iter().all(|r| r.failures == 0 && r.passes == self.trials)
            && failures(&self.guardless, "select_push") > 0
            && failures(&self.semi_join, "join_comm") > 0
    }
}

pub fn bundled_rules(fx: &Fixtures) -> Result<Vec<RewriteRule>, ExperimentError> {
    let a = fx.algebra("relational")?;
    Ok(a.rewrite_rules.iter().map(RewriteRule::from_decl).collect::<Result<_, _>>()?)
}

pub fn relational_suite(fx: &Fixtures, seed: u64, trials: usize) -> Result<RelationalSuite, ExperimentError> {
    let rules = bundled_rules(fx)?;
    Ok(RelationalSuite {
        trials,
        correct: run_rel_mrs(&Engine::default(), &rules, seed, trials)?,
        guardless: run_rel_mrs(&Engine::with_fault(Fault::GuardlessPushdown), &rules, seed, trials)?,
        semi_join: run_rel_mrs(&Engine::with_fault(Fault::SemiJoin), &rules, seed, trials)?,
    })
}

/// Runs `f` and returns its value with elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}
