//! Executable MRs over SUT programs: tuple generation, assertion checking,
//! kill matrices, coverage, and the falsification verdict.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{BlockKind, OperatorAlgebra};
use crate::construct::{construct_mp, translate, BlockInvariant, MRTemplate, TupleRule};
use crate::mutation::{HomogeneityEffect, Mutant, Strata};
use crate::reachability::{check_reachability, MRDescriptor, ReachabilityError};
use crate::sut::{sample_points, values_close, ParamKind, SutProgram, Value};

/// Default relative tolerance: one hundred machine epsilons.
pub const DEFAULT_TOLERANCE: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("MR `{mr}`: slot `{slot}` is not bound")]
    UnboundSlot { mr: String, slot: String },
    #[error("MR `{mr}` targets unknown SUT `{sut}`")]
    UnknownSut { mr: String, sut: String },
    #[error("algebra `{0}` has no MetaPatterns")]
    EmptyMetaPatterns(String),
    #[error(transparent)]
    Reachability(#[from] ReachabilityError),
}

/// Input transformation named by parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InputMap {
    Negate(Vec<String>),
    Swap(Vec<(String, String)>),
    Shift(Vec<String>, f64),
    ScaleBy(String, f64),
    Increment(String, f64),
    /// (a, b, c) -> (-c, -b, -a) over the listed parameters.
    ReverseNegate(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OutputMap {
    Identity,
    Negate,
    Add(f64),
    /// Multiply by the base value of a parameter.
    MulParam(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Binding {
    Orbit(Vec<(InputMap, OutputMap)>),
    Order { param: String, increasing: bool },
    Involution { map: InputMap, output: OutputMap },
    Scaling { lambdas: Vec<f64>, degree: i32 },
}

impl Binding {
    fn tuple_rule(&self) -> TupleRule {
        match self {
            Binding::Orbit(_) => TupleRule::GroupOrbit,
            Binding::Order { .. } => TupleRule::OrderPair,
            Binding::Involution { .. } => TupleRule::InvolutionPair,
            Binding::Scaling { .. } => TupleRule::ParametricSequence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutableMR {
    pub name: String,
    pub sut: String,
    pub template: MRTemplate,
    pub binding: Binding,
    pub tolerance: f64,
    pub sample_budget: usize,
}

impl ExecutableMR {
    /// Builds an MR whose template comes from a one-operator invariant.
    pub fn new(name: &str, sut: &str, block: BlockKind, binding: Binding, sample_budget: usize) -> Self {
        let arity = match &binding {
            Binding::Orbit(els) => els.len() as u32 + 1,
            Binding::Scaling { lambdas, .. } => lambdas.len() as u32 + 1,
            _ => 2,
        };
        let inv = BlockInvariant {
            block,
            phi: [name.to_string()].into_iter().collect(),
            pi_template: block.admissible_form(),
            arity,
        };
        let mut template = translate(&inv);
        template.assertion.tolerance = Some(DEFAULT_TOLERANCE);
        ExecutableMR {
            name: name.into(),
            sut: sut.into(),
            template,
            binding,
            tolerance: DEFAULT_TOLERANCE,
            sample_budget,
        }
    }

    pub fn block(&self) -> BlockKind {
        self.template.block
    }
}

/// One tuple group: the base input first, then its related inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleGroup {
    pub inputs: Vec<Vec<Value>>,
}

fn idx(mr: &ExecutableMR, p: &SutProgram, name: &str) -> Result<usize, HarnessError> {
    p.param_index(name).ok_or_else(|| HarnessError::UnboundSlot {
        mr: mr.name.clone(),
        slot: name.to_string(),
    })
}

fn apply_input(mr: &ExecutableMR, p: &SutProgram, m: &InputMap, x: &[Value]) -> Result<Vec<Value>, HarnessError> {
    let mut y: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    match m {
        InputMap::Negate(ps) => {
            for n in ps {
                let i = idx(mr, p, n)?;
                y[i] = -y[i];
            }
        }
        InputMap::Swap(pairs) => {
            for (a, b) in pairs {
                let (i, j) = (idx(mr, p, a)?, idx(mr, p, b)?);
                y.swap(i, j);
            }
        }
        InputMap::Shift(ps, t) => {
            for n in ps {
                let i = idx(mr, p, n)?;
                y[i] += t;
            }
        }
        InputMap::ScaleBy(n, c) => {
            let i = idx(mr, p, n)?;
            y[i] *= c;
        }
        InputMap::Increment(n, c) => {
            let i = idx(mr, p, n)?;
            y[i] += c;
        }
        InputMap::ReverseNegate(ps) => {
            let is = ps.iter().map(|n| idx(mr, p, n)).collect::<Result<Vec<_>, _>>()?;
            let vals: Vec<f64> = is.iter().map(|i| y[*i]).collect();
            for (k, i) in is.iter().enumerate() {
                y[*i] = -vals[vals.len() - 1 - k];
            }
        }
    }
    Ok(y.into_iter().map(Value::Num).collect())
}

fn apply_output(mr: &ExecutableMR, p: &SutProgram, m: &OutputMap, base: &[Value], out: Value) -> Result<Value, HarnessError> {
    Ok(match (m, out) {
        (OutputMap::Identity, v) => v,
        (OutputMap::Negate, Value::Num(v)) => Value::Num(-v),
        (OutputMap::Add(c), Value::Num(v)) => Value::Num(v + c),
        (OutputMap::MulParam(n), Value::Num(v)) => Value::Num(v * base[idx(mr, p, n)?].as_f64()),
        (_, b) => b,
    })
}

fn check_binding(mr: &ExecutableMR, p: &SutProgram) -> Result<(), HarnessError> {
    if mr.binding.tuple_rule() != mr.template.tuple_rule {
        return Err(HarnessError::UnboundSlot {
            mr: mr.name.clone(),
            slot: mr.template.tuple_rule.token().to_string(),
        });
    }
    let probe = vec![Value::Num(1.0); p.arity()];
    match &mr.binding {
        Binding::Orbit(els) => {
            for (i, o) in els {
                apply_input(mr, p, i, &probe)?;
                apply_output(mr, p, o, &probe, Value::Num(1.0))?;
            }
        }
        Binding::Order { param, .. } => {
            idx(mr, p, param)?;
        }
        Binding::Involution { map, output } => {
            apply_input(mr, p, map, &probe)?;
            apply_output(mr, p, output, &probe, Value::Num(1.0))?;
        }
        Binding::Scaling { .. } => {}
    }
    Ok(())
}

/// Tuple groups for `mr` on `program`, one per sampled base point. Groups
/// whose related inputs leave the domain are dropped.
pub fn generate_tuples(mr: &ExecutableMR, program: &SutProgram, seed: u64) -> Result<Vec<TupleGroup>, HarnessError> {
    check_binding(mr, program)?;
    let bases = sample_points(program, mr.sample_budget, seed);
    let mut out = Vec::with_capacity(bases.len());
    for (k, x) in bases.into_iter().enumerate() {
        let mut inputs = vec![x.clone()];
        match &mr.binding {
            Binding::Orbit(els) => {
                for (m, _) in els {
                    inputs.push(apply_input(mr, program, m, &x)?);
                }
            }
            Binding::Order { param, .. } => {
                let i = idx(mr, program, param)?;
                // Deterministic positive step, integral for integer parameters.
                let step = 1.0 + (k % 5) as f64;
                let step = if program.params[i].kind == ParamKind::Int { step } else { step * 0.75 };
                let mut y = x.clone();
                y[i] = Value::Num(y[i].as_f64() + step);
                inputs.push(y);
            }
            Binding::Involution { map, .. } => inputs.push(apply_input(mr, program, map, &x)?),
            Binding::Scaling { lambdas, .. } => {
                for lam in lambdas {
                    inputs.push(x.iter().map(|v| Value::Num(v.as_f64() * lam)).collect());
                }
            }
        }
        if inputs.iter().all(|i| program.in_domain(i)) {
            out.push(TupleGroup { inputs });
        }
    }
    Ok(out)
}

/// Whether the MR's assertion holds on one group. Groups in which any
/// evaluation raises carry no verdict and count as holding.
pub fn group_holds(mr: &ExecutableMR, program: &SutProgram, g: &TupleGroup) -> Result<bool, HarnessError> {
    let mut outs = Vec::with_capacity(g.inputs.len());
    for x in &g.inputs {
        match program.eval(x) {
            Ok(v) => outs.push(v),
            Err(_) => return Ok(true),
        }
    }
    let base = &g.inputs[0];
    let tol = mr.tolerance;
    Ok(match &mr.binding {
        Binding::Orbit(els) => {
            let mut ok = true;
            for (k, (_, om)) in els.iter().enumerate() {
                let expected = apply_output(mr, program, om, base, outs[0])?;
                ok &= values_close(outs[k + 1], expected, tol);
            }
            ok
        }
        Binding::Order { increasing, .. } => {
            let (a, b) = (outs[0].as_f64(), outs[1].as_f64());
            let slack = tol * 1f64.max(a.abs()).max(b.abs());
            if *increasing {
                a <= b + slack
            } else {
                a + slack >= b
            }
        }
        Binding::Involution { output, .. } => {
            let expected = apply_output(mr, program, output, base, outs[0])?;
            values_close(outs[1], expected, tol)
        }
        Binding::Scaling { lambdas, degree } => lambdas.iter().enumerate().all(|(k, lam)| {
            let expected = match outs[0] {
                Value::Num(v) => Value::Num(v * lam.powi(*degree)),
                b => b,
            };
            values_close(outs[k + 1], expected, tol)
        }),
    })
}

/// True iff the assertion holds on every group.
pub fn check(mr: &ExecutableMR, program: &SutProgram, groups: &[TupleGroup]) -> Result<bool, HarnessError> {
    for g in groups {
        if !group_holds(mr, program, g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRed {
    pub mr: String,
    pub sut: String,
    pub pass: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KillMatrix {
    pub mrs: Vec<String>,
    pub mutants: Vec<String>,
    /// `cells[i][j]`: MR i kills mutant j.
    pub cells: Vec<Vec<bool>>,
    pub strata: Vec<Option<Strata>>,
    pub excluded: Vec<BaselineRed>,
}

impl KillMatrix {
    pub fn killed(&self, j: usize) -> bool {
        self.cells.iter().any(|row| row[j])
    }

    pub fn kills_by(&self, i: usize) -> usize {
        self.cells[i].iter().filter(|c| **c).count()
    }

    pub fn row(&self, mr: &str) -> Option<&[bool]> {
        self.mrs.iter().position(|m| m == mr).map(|i| self.cells[i].as_slice())
    }
}

/// Runs every MR against every mutant of its SUT. MRs that fail on the
/// base program in either of two seeded passes are excluded.
pub fn run_kill_experiment(
    zoo: &BTreeMap<String, SutProgram>,
    mrs: &[ExecutableMR],
    mutants: &[Mutant],
    seed: u64,
) -> Result<KillMatrix, HarnessError> {
    let mut cells = Vec::with_capacity(mrs.len());
    let mut excluded = Vec::new();
    for mr in mrs {
        let base = zoo.get(&mr.sut).ok_or_else(|| HarnessError::UnknownSut {
            mr: mr.name.clone(),
            sut: mr.sut.clone(),
        })?;
        let groups = generate_tuples(mr, base, seed)?;
        let mut red = None;
        if !check(mr, base, &groups)? {
            red = Some(1);
        } else if !check(mr, base, &generate_tuples(mr, base, seed.wrapping_add(1))?)? {
            red = Some(2);
        }
        if let Some(pass) = red {
            excluded.push(BaselineRed {
                mr: mr.name.clone(),
                sut: mr.sut.clone(),
                pass,
            });
            cells.push(vec![false; mutants.len()]);
            continue;
        }
        let row = mutants
            .iter()
            .map(|m| {
                if m.sut != mr.sut || groups.is_empty() {
                    return Ok(false);
                }
                Ok(!check(mr, &m.program, &groups)?)
            })
            .collect::<Result<Vec<bool>, HarnessError>>()?;
        cells.push(row);
    }
    Ok(KillMatrix {
        mrs: mrs.iter().map(|m| m.name.clone()).collect(),
        mutants: mutants.iter().map(|m| m.id.clone()).collect(),
        cells,
        strata: vec![None; mutants.len()],
        excluded,
    })
}

/// Fraction of the algebra's MetaPatterns whose block some MR reaches.
pub fn coverage<'a, I>(templates: I, algebra: &OperatorAlgebra) -> Result<Ratio<u64>, HarnessError>
where
    I: IntoIterator<Item = &'a MRTemplate>,
{
    let mp = construct_mp(algebra).map_err(ReachabilityError::from)?;
    if mp.patterns.is_empty() {
        return Err(HarnessError::EmptyMetaPatterns(algebra.name.clone()));
    }
    let reached: BTreeSet<BlockKind> = templates.into_iter().map(|t| t.block).collect();
    let hit = mp.patterns.iter().filter(|p| reached.contains(&p.block)).count() as u64;
    Ok(Ratio::new(hit, mp.patterns.len() as u64))
}

/// Templates of the reachable descriptors, placed at their assigned block.
pub fn reachable_templates(descs: &[MRDescriptor], algebra: &OperatorAlgebra) -> Result<Vec<MRTemplate>, HarnessError> {
    let mut out = Vec::new();
    for d in descs {
        let v = check_reachability(d, algebra)?;
        if let Some(block) = v.assigned_block {
            out.push(translate(&BlockInvariant {
                block,
                phi: [d.name.clone()].into_iter().collect(),
                pi_template: d.relation_form,
                arity: 2,
            }));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SutKillSummary {
    pub kills: usize,
    pub mutants: usize,
    /// Homogeneity tags of the killed mutants.
    pub killed_effects: Vec<HomogeneityEffect>,
}

impl SutKillSummary {
    pub fn rate(&self) -> f64 {
        if self.mutants == 0 {
            0.0
        } else {
            self.kills as f64 / self.mutants as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FalsificationVerdict {
    pub falsified: bool,
    /// SUTs at or above the one-third kill rate.
    pub outliers: Vec<String>,
    /// Outliers discounted because every kill was homogeneity-breaking.
    pub rescued: Vec<String>,
}

/// Falsified iff more than one SUT reaches a one-third kill rate after
/// discounting outliers whose kills are all homogeneity-breaking.
pub fn falsification_verdict(per_sut: &BTreeMap<String, SutKillSummary>) -> FalsificationVerdict {
    let mut outliers = Vec::new();
    let mut rescued = Vec::new();
    for (name, s) in per_sut {
        if s.mutants > 0 && 3 * s.kills >= s.mutants {
            outliers.push(name.clone());
            let all_breaking = s.killed_effects.len() == s.kills
                && s.killed_effects.iter().all(|e| *e == HomogeneityEffect::Breaking);
            if all_breaking {
                rescued.push(name.clone());
            }
        }
    }
    FalsificationVerdict {
        falsified: outliers.len() - rescued.len() > 1,
        outliers,
        rescued,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::{mutate, MutatorCategory};
    use crate::spec::parse_sut;

    fn midpoint() -> SutProgram {
        parse_sut("sut midpoint(a, b) blocks=G,O_LE,L_STAR homogeneity=degree-1\nreturn (a + b) / 2\n", "m").unwrap()
    }

    fn scale_mr(budget: usize) -> ExecutableMR {
        ExecutableMR::new(
            "L_scale",
            "midpoint",
            BlockKind::LStar,
            Binding::Scaling { lambdas: vec![0.5, 2.0, 7.0], degree: 1 },
            budget,
        )
    }

    #[test]
    fn orbit_groups_have_orbit_size() {
        let mr = ExecutableMR::new(
            "G_swap",
            "midpoint",
            BlockKind::G,
            Binding::Orbit(vec![(InputMap::Swap(vec![("a".into(), "b".into())]), OutputMap::Identity)]),
            16,
        );
        let gs = generate_tuples(&mr, &midpoint(), 1).unwrap();
        assert_eq!(gs.len(), 16);
        assert!(gs.iter().all(|g| g.inputs.len() == 2));
        let mr4 = scale_mr(8);
        assert!(generate_tuples(&mr4, &midpoint(), 1).unwrap().iter().all(|g| g.inputs.len() == 4));
    }

    #[test]
    fn unbound_slot_is_reported() {
        let mr = ExecutableMR::new(
            "G_bad",
            "midpoint",
            BlockKind::G,
            Binding::Orbit(vec![(InputMap::Negate(vec!["z".into()]), OutputMap::Identity)]),
            4,
        );
        assert!(matches!(generate_tuples(&mr, &midpoint(), 0), Err(HarnessError::UnboundSlot { .. })));
        let wrong_rule = ExecutableMR::new("x", "midpoint", BlockKind::G, Binding::Order { param: "a".into(), increasing: true }, 4);
        assert!(matches!(generate_tuples(&wrong_rule, &midpoint(), 0), Err(HarnessError::UnboundSlot { .. })));
    }

    #[test]
    fn zero_budget_gives_no_tuples_and_no_kills() {
        let p = midpoint();
        let mr = scale_mr(0);
        assert!(generate_tuples(&mr, &p, 3).unwrap().is_empty());
        let ms = mutate(&p, &MutatorCategory::ALL, 3);
        let zoo: BTreeMap<String, SutProgram> = [("midpoint".to_string(), p)].into();
        let km = run_kill_experiment(&zoo, &[mr], &ms, 3).unwrap();
        assert!(km.cells[0].iter().all(|c| !c));
    }

    #[test]
    fn baseline_red_mr_is_excluded() {
        let p = midpoint();
        let mr = ExecutableMR::new("wrong", "midpoint", BlockKind::LStar, Binding::Scaling { lambdas: vec![2.0], degree: 2 }, 8);
        let zoo: BTreeMap<String, SutProgram> = [("midpoint".to_string(), p.clone())].into();
        let km = run_kill_experiment(&zoo, &[mr], &mutate(&p, &MutatorCategory::ALL, 0), 0).unwrap();
        assert_eq!(km.excluded.len(), 1);
        assert!(km.cells[0].iter().all(|c| !c));
    }

    #[test]
    fn verdict_examples() {
        let zero = |k| SutKillSummary { kills: 0, mutants: k, killed_effects: vec![] };
        let mut m: BTreeMap<String, SutKillSummary> = BTreeMap::new();
        for (n, k) in [("midpoint", 3), ("clamp", 7), ("signum", 6), ("gcd", 9), ("lcm", 11)] {
            m.insert(n.into(), zero(k));
        }
        m.insert(
            "hypot".into(),
            SutKillSummary { kills: 2, mutants: 4, killed_effects: vec![HomogeneityEffect::Breaking; 2] },
        );
        let v = falsification_verdict(&m);
        assert!(!v.falsified);
        assert_eq!(v.rescued, vec!["hypot".to_string()]);

        let mut m2 = m.clone();
        for n in ["gcd", "lcm"] {
            m2.insert(
                n.into(),
                SutKillSummary { kills: 2, mutants: 4, killed_effects: vec![HomogeneityEffect::Preserving; 2] },
            );
        }
        assert!(falsification_verdict(&m2).falsified);
    }

    #[test]
    fn one_unrescued_outlier_does_not_falsify() {
        let m: BTreeMap<String, SutKillSummary> = [(
            "a".to_string(),
            SutKillSummary { kills: 1, mutants: 2, killed_effects: vec![HomogeneityEffect::Preserving] },
        )]
        .into();
        assert!(!falsification_verdict(&m).falsified);
    }
}
