//! The reproduction suite: every experiment with its pass criterion, folded
//! into one report.

use serde::Serialize;

use crate::equivariant::{random_cloud, rotation_invariance_deviation, sgd_order_check};
use crate::experiment::{
    closure_suite, complexity_smoke, coverage_cases, g_boundary, golden_derivations, k_sweep, l_blindness,
    obstruction_independence, reachability_cases, relational_suite, run_zoo, timed, ExperimentError,
};
use crate::fixtures::Fixtures;
use crate::report::Report;
use crate::spec::MutatorConfig;
use crate::stats::{audit_ratings, fisher_rates, fleiss_kappa, mcnemar_exact, wilson_interval};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reproduction {
    pub checks: Vec<Check>,
    pub report: Report,
}

impl Reproduction {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

pub fn stats_goldens() -> Vec<(String, f64, f64, f64)> {
    let w = |s, n| wilson_interval(s, n, 0.95).unwrap();
    let (a, b, c) = (w(7, 20), w(26, 52), w(0, 5));
    vec![
        ("wilson(7,20).lo".into(), a.0, 0.18, 0.005),
        ("wilson(7,20).hi".into(), a.1, 0.57, 0.005),
        ("wilson(26,52).lo".into(), b.0, 0.369, 0.001),
        ("wilson(26,52).hi".into(), b.1, 0.631, 0.001),
        ("wilson(0,5).lo".into(), c.0, 0.0, 0.001),
        ("wilson(0,5).hi".into(), c.1, 0.434, 0.001),
        ("mcnemar(15,4)".into(), mcnemar_exact(15, 4), 0.019, 0.001),
        ("mcnemar(18,4)".into(), mcnemar_exact(18, 4), 0.0043, 0.0005),
        ("mcnemar(2,0)".into(), mcnemar_exact(2, 0), 0.5, 0.0),
        ("fisher(7/20,0/20)".into(), fisher_rates(7, 20, 0, 20), 0.008, 0.001),
        ("fisher(2/5,0/5)".into(), fisher_rates(2, 5, 0, 5), 0.444, 0.001),
        ("fleiss(audit)".into(), fleiss_kappa(&audit_ratings(), 4).unwrap(), 0.857, 0.0005),
    ]
}

pub fn reproduce(fx: &Fixtures, cfg: &MutatorConfig) -> Result<Reproduction, ExperimentError> {
    let mut report = Report::new();
    let mut checks = Vec::new();
    let mut push = |id: u32, name: &str, pass: bool, detail: String| {
        checks.push(Check { id, name: name.into(), pass, detail });
    };

    let (golden, secs) = timed(|| golden_derivations(fx));
    let golden = golden?;
    report.table(
        "MetaPattern sets",
        &["algebra", "patterns", "labels"],
        golden
            .iter()
            .map(|g| vec![g.algebra.clone(), g.got.len().to_string(), g.got.iter().cloned().collect::<Vec<_>>().join(",")])
            .collect(),
    );
    let ok = golden.iter().all(|g| g.expected == g.got) && secs < 1.0;
    push(1, "golden MetaPattern sets", ok, format!("{} algebras in {secs:.3}s", golden.len()));

    let reach = reachability_cases(fx)?;
    let indep = obstruction_independence(fx)?;
    let fmt_obs = |o: &std::collections::BTreeSet<crate::reachability::Obstruction>| {
        o.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    };
    report.table(
        "Reachability",
        &["mr", "algebra", "obstructions", "block", "ok"],
        reach
            .iter()
            .chain(&indep)
            .map(|c| {
                vec![
                    c.mr.clone(),
                    c.algebra.clone(),
                    fmt_obs(&c.got_obstructions),
                    c.got_block.map_or("-".to_string(), |b| b.to_string()),
                    c.passes().to_string(),
                ]
            })
            .collect(),
    );
    push(2, "reachability rejection", reach.iter().all(|c| c.passes()), format!("{} descriptors", reach.len()));
    push(3, "obstruction independence", indep.iter().all(|c| c.passes()), format!("{} single-obstruction fixtures", indep.len()));

    let closure = closure_suite(fx, 1000, cfg.seed)?;
    push(
        4,
        "closure property suite",
        closure.passes(),
        format!(
            "{} templates, {} membership violations, {} block pairs, {} order violations",
            closure.templates, closure.membership_violations, closure.block_pairs, closure.order_violations
        ),
    );

    let (run, secs) = timed(|| run_zoo(fx, cfg));
    let run = run?;
    let lb = l_blindness(&run);
    report.table(
        "Scaling-block kills on homogeneous programs",
        &["sut", "kills", "mutants", "preserving kills", "rescued"],
        lb.per_sut
            .iter()
            .map(|(n, s)| {
                let pk = run
                    .mutant_index(n)
                    .filter(|j| lb.preserving_kills.contains(&run.mutants[*j].id))
                    .count();
                vec![
                    n.clone(),
                    s.kills.to_string(),
                    s.mutants.to_string(),
                    pk.to_string(),
                    lb.verdict.rescued.contains(n).to_string(),
                ]
            })
            .collect(),
    );
    let mut detail = format!(
        "{} preserving-tagged kills; falsified={}; {secs:.2}s",
        lb.preserving_kills.len(),
        lb.verdict.falsified
    );
    if !lb.inconsistent.is_empty() {
        detail.push_str(&format!(
            "; matrix marks {} homogeneity-preserving MATH/RETURN_VALS mutants as scaling-breaking: {}",
            lb.inconsistent.len(),
            lb.inconsistent.join(", ")
        ));
    }
    if !run.matrix.excluded.is_empty() {
        detail.push_str(&format!("; {} MRs excluded as red on baseline", run.matrix.excluded.len()));
    }
    push(5, "scaling-blindness experiment", lb.passes() && secs < 30.0, detail);

    let cov = coverage_cases(fx)?;
    report.table(
        "Structural coverage on the equivariant algebra",
        &["set", "coverage", "expected"],
        cov.iter().map(|c| vec![c.set.clone(), c.got.to_string(), c.expected.to_string()]).collect(),
    );
    push(6, "coverage metric", cov.iter().all(|c| c.got == c.expected), String::new());

    let goldens = stats_goldens();
    report.table(
        "Statistics",
        &["quantity", "value", "expected", "tolerance"],
        goldens
            .iter()
            .map(|(n, v, w, t)| vec![n.clone(), format!("{v:.4}"), format!("{w}"), format!("{t}")])
            .collect(),
    );
    let bad: Vec<&str> = goldens.iter().filter(|(_, v, w, t)| !within(*v, *w, *t)).map(|g| g.0.as_str()).collect();
    push(7, "statistics golden values", bad.is_empty(), bad.join(", "));

    let (rel, secs) = timed(|| relational_suite(fx, cfg.seed, cfg.rel_trials));
    let rel = rel?;
    report.table(
        "Rewrite-block MRs",
        &["mr", "correct", "guardless pushdown", "semi-join"],
        rel.correct
            .iter()
            .zip(&rel.guardless)
            .zip(&rel.semi_join)
            .map(|((c, g), s)| {
                let f = |r: &crate::relational::RelMrResult| format!("{}/{} fail", r.failures, r.passes + r.failures);
                vec![c.name.clone(), f(c), f(g), f(s)]
            })
            .collect(),
    );
    push(8, "relational suite", rel.passes() && secs < 10.0, format!("{} trials in {secs:.2}s", rel.trials));

    let sgd = sgd_order_check(1e-3);
    push(
        9,
        "SGD round-trip order",
        sgd.passes(),
        format!("ratio {:.3}, residual {:.3e} <= bound {:.3e}", sgd.ratio, sgd.residual, sgd.bound),
    );

    let cx = complexity_smoke()?;
    report.table(
        "construct_mp cost",
        &["n", "extraction", "translation", "quotient", "lift", "total/(n log2(n+1))"],
        cx.points
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.cost.extraction.to_string(),
                    p.cost.translation.to_string(),
                    p.cost.quotient.to_string(),
                    p.cost.lift.to_string(),
                    format!("{:.3}", p.ratio),
                ]
            })
            .collect(),
    );
    push(10, "construction cost smoke", cx.passes(), format!("calibration {:.3}", cx.calibration));

    let gb = g_boundary(&run);
    push(
        11,
        "G-block boundary on gcd/lcm",
        gb.passes(),
        gb.kills.iter().map(|(s, k)| format!("{s}: {k}/{}", gb.mutants[s])).collect::<Vec<_>>().join(", "),
    );

    // Supplementary audits that do not carry a criterion number.
    let sweep = k_sweep(fx, cfg)?;
    report.table(
        "Orbit truncation sweep",
        &["K", "detection rate"],
        sweep.rates.iter().map(|(k, r)| vec![k.to_string(), format!("{r:.3}")]).collect(),
    );
    let dev = rotation_invariance_deviation(&random_cloud(32, cfg.seed), 100, cfg.seed);
    report.text(
        "Audits",
        vec![
            format!("orbit sweep stable within 5%: {}", sweep.stable),
            format!("point-cloud rotation deviation over 100 rotations: {dev:.2e}"),
        ],
    );

    for c in &checks {
        report.verdict(&format!("[{}] {}", c.id, c.name), c.pass, c.detail.clone());
    }
    Ok(Reproduction { checks, report })
}
