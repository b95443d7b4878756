//! Block-derived MRs for the ten-program zoo.

use crate::algebra::BlockKind;
use crate::harness::{Binding, ExecutableMR, InputMap, OutputMap};

fn s(x: &str) -> String {
    x.to_string()
}

fn ps(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|x| s(x)).collect()
}

pub fn swap(sut: &str, pairs: &[(&str, &str)], budget: usize) -> ExecutableMR {
    let pairs = pairs.iter().map(|(a, b)| (s(a), s(b))).collect();
    ExecutableMR::new(
        &format!("{sut}.G_swap"),
        sut,
        BlockKind::G,
        Binding::Orbit(vec![(InputMap::Swap(pairs), OutputMap::Identity)]),
        budget,
    )
}

/// Translation by two fixed offsets; `equivariant` selects whether the
/// output shifts along.
pub fn shift(sut: &str, params: &[&str], equivariant: bool, budget: usize) -> ExecutableMR {
    let els = [2.5, -4.0]
        .into_iter()
        .map(|t| {
            let out = if equivariant { OutputMap::Add(t) } else { OutputMap::Identity };
            (InputMap::Shift(ps(params), t), out)
        })
        .collect();
    ExecutableMR::new(&format!("{sut}.G_shift"), sut, BlockKind::G, Binding::Orbit(els), budget)
}

pub fn negate(sut: &str, params: &[&str], output: OutputMap, budget: usize) -> ExecutableMR {
    ExecutableMR::new(
        &format!("{sut}.G_negate"),
        sut,
        BlockKind::G,
        Binding::Orbit(vec![(InputMap::Negate(ps(params)), output)]),
        budget,
    )
}

pub fn mono(sut: &str, param: &str, budget: usize) -> ExecutableMR {
    ExecutableMR::new(
        &format!("{sut}.O_mono"),
        sut,
        BlockKind::OLe,
        Binding::Order { param: s(param), increasing: true },
        budget,
    )
}

pub fn scale(sut: &str, lambdas: &[f64], degree: i32, budget: usize) -> ExecutableMR {
    ExecutableMR::new(
        &format!("{sut}.L_scale"),
        sut,
        BlockKind::LStar,
        Binding::Scaling { lambdas: lambdas.to_vec(), degree },
        budget,
    )
}

/// Truncated doubling orbit `x -> 2^k x`, `k = 1..K-1`, with output `+k`.
pub fn doubling(sut: &str, param: &str, k: u32, budget: usize) -> ExecutableMR {
    let els = (1..k)
        .map(|i| (InputMap::ScaleBy(s(param), 2f64.powi(i as i32)), OutputMap::Add(i as f64)))
        .collect();
    ExecutableMR::new(&format!("{sut}.G_double"), sut, BlockKind::G, Binding::Orbit(els), budget)
}

/// Orbit size used by the doubling MR in the default suite.
pub const DOUBLING_K: u32 = 4;

/// Powers of two, so that scaling commutes exactly with IEEE rounding and a
/// homogeneous program never fails on cancellation noise.
const LAMBDAS: [f64; 3] = [0.5, 2.0, 4.0];

/// The default MR suite over the zoo, one entry per derived relation.
pub fn set_n(budget: usize) -> Vec<ExecutableMR> {
    vec![
        swap("midpoint", &[("a", "b")], budget),
        shift("midpoint", &["a", "b"], true, budget),
        mono("midpoint", "a", budget),
        scale("midpoint", &LAMBDAS, 1, budget),
        shift("clamp", &["x", "lo", "hi"], true, budget),
        mono("clamp", "x", budget),
        scale("clamp", &LAMBDAS, 1, budget),
        negate("signum", &["x"], OutputMap::Negate, budget),
        mono("signum", "x", budget),
        scale("signum", &LAMBDAS, 0, budget),
        negate("gcd", &["a", "b"], OutputMap::Identity, budget),
        scale("gcd", &LAMBDAS, 1, budget),
        negate("lcm", &["a", "b"], OutputMap::Identity, budget),
        scale("lcm", &LAMBDAS, 1, budget),
        swap("hypot", &[("x", "y")], budget),
        negate("hypot", &["x", "y"], OutputMap::Identity, budget),
        scale("hypot", &LAMBDAS, 1, budget),
        doubling("exact_log2", "x", DOUBLING_K, budget),
        mono("exact_log2", "x", budget),
        shift("is_sequence", &["a", "b", "c"], false, budget),
        ExecutableMR::new(
            "is_sequence.T_reverse",
            "is_sequence",
            BlockKind::TRev,
            Binding::Involution {
                map: InputMap::ReverseNegate(ps(&["a", "b", "c"])),
                output: OutputMap::Identity,
            },
            budget,
        ),
        swap("complex_add_re", &[("ar", "br"), ("ai", "bi")], budget),
        mono("complex_add_re", "ar", budget),
        ExecutableMR::new(
            "power.G_step",
            "power",
            BlockKind::G,
            Binding::Orbit(vec![(InputMap::Increment(s("n"), 1.0), OutputMap::MulParam(s("x")))]),
            budget,
        ),
        mono("power", "n", budget),
    ]
}
