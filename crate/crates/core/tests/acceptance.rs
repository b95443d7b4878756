//! Acceptance report: one PASS/FAIL line per criterion. Library results are
//! compared against literal expectations and against oracles recomputed here.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use noether_core::algebra::{canonical_max, BlockKind};
use noether_core::construct::construct_mp;
use noether_core::equivariant::{sgd_order_check, QuadraticLoss};
use noether_core::experiment::{closure_suite, complexity_smoke, g_boundary, l_blindness, relational_suite, run_zoo};
use noether_core::fixtures::{Fixtures, HOMOGENEOUS_SUTS, SET_B, SET_L};
use noether_core::mutation::{HomogeneityEffect, MutatorCategory};
use noether_core::reachability::{check_reachability, obstructions_of, Obstruction};
use noether_core::relational::{random_db, Engine, Fault, QueryExpr, Pred};
use noether_core::stats::{audit_ratings, fisher_rates, fleiss_kappa, mcnemar_exact, wilson_interval};
use noether_core::sut::{check_homogeneity, integer_grid, sample_points, Value};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn c1(fx: &Fixtures) -> Outcome {
    let want: [(&str, BTreeSet<String>); 6] = [
        ("boltzmann", set(&["m_inv", "m_mono", "m_adj", "m_rev", "m_conv", "m_dyn", "m_cmp"])),
        ("equivariant", set(&["m_inv", "m_mono", "m_adj", "m_rev", "m_conv"])),
        ("sort", set(&["m_inv", "m_mono"])),
        ("relational", set(&["m_rel_inv", "m_rel_mono", "m_rel_cmp", "m_rel"])),
        ("ffn", set(&["m_stab"])),
        ("pwr", set(&["m_inv", "m_mono", "m_adj", "m_conv", "m_dyn", "m_cmp"])),
    ];
    let algebras = want.iter().map(|(n, _)| fx.algebra(n)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let sets = algebras.iter().map(construct_mp).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    for ((name, labels), mp) in want.iter().zip(&sets) {
        ensure(&mp.labels() == labels && mp.patterns.len() == labels.len(), || {
            format!("{name}: got {:?}", mp.labels())
        })?;
        let ranks: Vec<usize> = mp.patterns.iter().map(|p| p.block.rank()).collect();
        ensure(ranks.windows(2).all(|w| w[0] < w[1]), || format!("{name}: not in canonical order"))?;
    }
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!("sizes 7/5/2/4/1/6 in {secs:.3}s"))
}

fn c2(fx: &Fixtures) -> Outcome {
    use Obstruction::*;
    let rejected = [("rho_nonadd", vec![O1, O2, O3]), ("rho_mtc_bor", vec![O1, O4, O5])];
    let accepted = [
        ("rho_rot", "equivariant", BlockKind::G),
        ("rho_adj", "boltzmann", BlockKind::TStar),
        ("rho_train_rev", "equivariant", BlockKind::TRev),
        ("rho_join_comm", "relational", BlockKind::G),
    ];
    let boltz = fx.algebra("boltzmann").map_err(|e| e.to_string())?;
    for (mr, obs) in rejected {
        let d = fx.mr(mr).map_err(|e| e.to_string())?;
        let v = check_reachability(&d, &boltz).map_err(|e| e.to_string())?;
        let want: BTreeSet<Obstruction> = obs.into_iter().collect();
        ensure(!v.reachable && v.obstructions == want, || format!("{mr}: {:?}", v.obstructions))?;
    }
    for (mr, alg, block) in accepted {
        let d = fx.mr(mr).map_err(|e| e.to_string())?;
        let a = fx.algebra(alg).map_err(|e| e.to_string())?;
        let v = check_reachability(&d, &a).map_err(|e| e.to_string())?;
        ensure(v.reachable && v.assigned_block == Some(block), || format!("{mr}: {v:?}"))?;
        // Assigned block must be the highest admitting block.
        let top = v.admitting_blocks.iter().min_by_key(|b| b.rank()).copied();
        ensure(top == Some(block), || format!("{mr}: highest admitting block is {top:?}"))?;
    }
    Ok("2 rejected, 4 reachable".into())
}

fn c3(fx: &Fixtures) -> Outcome {
    let boltz = fx.algebra("boltzmann").map_err(|e| e.to_string())?;
    for (i, o) in Obstruction::ALL.iter().enumerate() {
        let name = format!("only_o{}", i + 1);
        let d = fx.mr(&name).map_err(|e| e.to_string())?;
        let obs = obstructions_of(&d);
        ensure(obs.len() == 1 && obs.contains(o), || format!("{name}: {obs:?}"))?;
        let v = check_reachability(&d, &boltz).map_err(|e| e.to_string())?;
        ensure(!v.reachable, || format!("{name} reported reachable"))?;
    }
    Ok("each fixture triggers exactly its own obstruction".into())
}

fn c4(fx: &Fixtures) -> Outcome {
    let r = closure_suite(fx, 1000, 20260515).map_err(|e| e.to_string())?;
    ensure(r.passes(), || format!("{r:?}"))?;
    // Oracle: count owning patterns by hand over every bundled template.
    let mut checked = 0;
    for name in noether_core::fixtures::ALGEBRAS {
        let mp = construct_mp(&fx.algebra(name).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for t in mp.templates() {
            let owners = mp
                .patterns
                .iter()
                .filter(|p| p.block == t.block && p.members.contains(&t.provenance))
                .count();
            ensure(owners == 1, || format!("{name}: template owned by {owners} patterns"))?;
            checked += 1;
        }
    }
    // Oracle: order by position in the literal canonical listing.
    let order = ["G", "O_LE", "T_STAR", "T_REV", "L_STAR", "D_STAR", "E_STAR", "B_REL"];
    let pos = |b: BlockKind| order.iter().position(|t| *t == b.token()).unwrap();
    let mut pairs = 0;
    for (i, a) in BlockKind::ALL.iter().enumerate() {
        for b in &BlockKind::ALL[i + 1..] {
            pairs += 1;
            let want = if pos(*a) < pos(*b) { *a } else { *b };
            let got = canonical_max([*b, *a]).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("max({a},{b}) = {got}"))?;
        }
    }
    ensure(pairs == 28, || format!("{pairs} pairs"))?;
    Ok(format!("1000 random templates + {checked} bundled; 28 pairs; 0 violations"))
}

fn c5(fx: &Fixtures) -> Outcome {
    let cfg = fx.config("reproduce").map_err(|e| e.to_string())?;
    let t = Instant::now();
    let run = run_zoo(fx, &cfg).map_err(|e| e.to_string())?;
    let lb = l_blindness(&run);
    let secs = t.elapsed().as_secs_f64();
    ensure(lb.passes(), || format!("{lb:?}"))?;
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;

    let zoo = fx.zoo().map_err(|e| e.to_string())?;
    let mut preserving = 0;
    let mut outliers = 0;
    let mut unrescued = 0;
    for sut in HOMOGENEOUS_SUTS {
        let row = run.mr_row(&format!("{sut}.L_scale")).ok_or_else(|| format!("{sut}.L_scale missing"))?;
        let degree = zoo[sut].homogeneity.degree().ok_or_else(|| format!("{sut} not homogeneous"))?;
        let (mut kills, mut mutants, mut all_breaking) = (0, 0, true);
        for j in run.mutant_index(sut) {
            let m = &run.mutants[j];
            mutants += 1;
            if m.homogeneity_effect == HomogeneityEffect::Preserving {
                preserving += 1;
                ensure(!row[j], || format!("{} is preserving-tagged and killed", m.id))?;
                // Oracle: the tag holds numerically on a grid and random points.
                let mut pts = integer_grid(&m.program, 3);
                pts.extend(sample_points(&m.program, 64, 7));
                ensure(check_homogeneity(&m.program, degree, &pts, &[0.5, 2.0, 7.0], 1e-9), || {
                    format!("{} tagged preserving but not homogeneous", m.id)
                })?;
            }
            if row[j] {
                kills += 1;
                all_breaking &= m.homogeneity_effect == HomogeneityEffect::Breaking;
            }
        }
        if mutants > 0 && 3 * kills >= mutants {
            outliers += 1;
            if !all_breaking {
                unrescued += 1;
            }
        }
    }
    ensure(unrescued <= 1, || format!("{unrescued} unrescued outliers"))?;

    let row = run.mr_row("hypot.L_scale").unwrap();
    for (cat, needle) in [(MutatorCategory::ReturnVals, "zero"), (MutatorCategory::CallRemoval, "sqrt")] {
        let j = run
            .mutant_index("hypot")
            .find(|j| run.mutants[*j].category == cat && run.mutants[*j].description.contains(needle))
            .ok_or_else(|| format!("hypot {cat} mutant missing"))?;
        let m = &run.mutants[j];
        ensure(row[j] && m.homogeneity_effect == HomogeneityEffect::Breaking, || format!("{}: {:?}", m.id, m.homogeneity_effect))?;
        // Oracle: the mutant really breaks degree-1 scaling.
        let pts = sample_points(&m.program, 32, 3);
        ensure(!check_homogeneity(&m.program, 1, &pts, &[2.0], 1e-9), || format!("{} scales correctly", m.id))?;
    }
    Ok(format!(
        "{preserving} preserving-tagged mutants, 0 killed; {outliers} outliers all rescued; {secs:.2}s"
    ))
}

fn c6(fx: &Fixtures) -> Outcome {
    let alg = fx.algebra("equivariant").map_err(|e| e.to_string())?;
    let populated: BTreeSet<BlockKind> =
        construct_mp(&alg).map_err(|e| e.to_string())?.patterns.iter().map(|p| p.block).collect();
    let covered = |names: &[&str]| -> Result<usize, String> {
        let mut hit = BTreeSet::new();
        for n in names {
            let v = check_reachability(&fx.mr(n).map_err(|e| e.to_string())?, &alg).map_err(|e| e.to_string())?;
            if let Some(b) = v.assigned_block {
                hit.insert(b);
            }
        }
        Ok(hit.intersection(&populated).count())
    };
    let (l, b) = (covered(&SET_L)?, covered(&SET_B)?);
    let k = populated.len();
    let lib = noether_core::experiment::coverage_cases(fx).map_err(|e| e.to_string())?;
    let got: Vec<f64> = lib.iter().map(|c| *c.got.numer() as f64 / *c.got.denom() as f64).collect();
    ensure(k == 5 && l == 2 && b == 1, || format!("oracle N=5/{k} L={l}/{k} B={b}/{k}"))?;
    ensure(got == vec![1.0, 0.4, 0.2], || format!("library {got:?}"))?;
    Ok("N 1.00, L 0.40, B 0.20".into())
}

// Independent statistics: closed forms and direct enumeration.

const Z95: f64 = 1.959_963_984_540_054;

fn wilson_oracle(s: f64, n: f64) -> (f64, f64) {
    let p = s / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn mcnemar_oracle(b: u64, c: u64) -> f64 {
    let n = b + c;
    let tail: f64 = (0..=b.min(c)).map(|i| choose(n, i)).sum::<f64>() / 2f64.powi(n as i32);
    (2.0 * tail).min(1.0)
}

fn fisher_oracle(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let k = x1 + x2;
    let n = n1 + n2;
    let p = |a: u64| choose(n1, a) * choose(n2, k - a) / choose(n, k);
    let observed = p(x1);
    let lo = k.saturating_sub(n2);
    let hi = k.min(n1);
    (lo..=hi).map(p).filter(|q| *q <= observed * (1.0 + 1e-9)).sum()
}

/// Kappa as mean pairwise agreement against chance agreement. Input is one
/// label per rater per item.
fn kappa_oracle(labels: &[Vec<usize>], k: usize) -> f64 {
    let r: Vec<Vec<usize>> = labels
        .iter()
        .map(|item| (0..k).map(|c| item.iter().filter(|l| **l == c).count()).collect())
        .collect();
    let raters = labels[0].len() as f64;
    let mut agree = 0.0;
    let mut totals = vec![0.0; k];
    for item in &r {
        let pairs: f64 = item.iter().map(|&c| (c * c.saturating_sub(1)) as f64).sum();
        agree += pairs / (raters * (raters - 1.0));
        for (t, &c) in totals.iter_mut().zip(item) {
            *t += c as f64;
        }
    }
    let p_bar = agree / r.len() as f64;
    let all: f64 = totals.iter().sum();
    let p_e: f64 = totals.iter().map(|t| (t / all).powi(2)).sum();
    (p_bar - p_e) / (1.0 - p_e)
}

fn c7() -> Outcome {
    let near = |name: &str, lib: f64, oracle: f64, want: f64, tol: f64| {
        ensure((lib - oracle).abs() < 1e-9, || format!("{name}: library {lib} vs oracle {oracle}"))?;
        ensure((lib - want).abs() <= tol, || format!("{name}: {lib} not within {tol} of {want}"))
    };
    for (s, n, lo, hi, tol) in [(7, 20, 0.18, 0.57, 0.005), (26, 52, 0.369, 0.631, 0.001), (0, 5, 0.0, 0.434, 0.001)] {
        let (a, b) = wilson_interval(s, n, 0.95).map_err(|e| e.to_string())?;
        let (oa, ob) = wilson_oracle(s as f64, n as f64);
        near(&format!("wilson({s},{n}).lo"), a, oa, lo, tol)?;
        near(&format!("wilson({s},{n}).hi"), b, ob, hi, tol)?;
    }
    for (b, c, want, tol) in [(15, 4, 0.019, 0.001), (18, 4, 0.0043, 0.0005), (2, 0, 0.5, 0.0)] {
        near(&format!("mcnemar({b},{c})"), mcnemar_exact(b, c), mcnemar_oracle(b, c), want, tol)?;
    }
    for (x1, n1, x2, n2, want) in [(7, 20, 0, 20, 0.008), (2, 5, 0, 5, 0.444)] {
        near(&format!("fisher({x1}/{n1},{x2}/{n2})"), fisher_rates(x1, n1, x2, n2), fisher_oracle(x1, n1, x2, n2), want, 0.001)?;
    }
    let r = audit_ratings();
    let k = fleiss_kappa(&r, 4).map_err(|e| e.to_string())?;
    near("fleiss", k, kappa_oracle(&r, 4), 6.0 / 7.0, 1e-12)?;
    Ok("wilson x3, mcnemar x3, fisher x2, kappa 0.857".into())
}

fn c8(fx: &Fixtures) -> Outcome {
    let t = Instant::now();
    let s = relational_suite(fx, 20260515, 100).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure(s.passes(), || format!("{s:?}"))?;
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    // Oracle: on the first flagged database the biased join really is
    // asymmetric in cardinality or content.
    let first = s.semi_join.iter().find(|r| r.name == "join_comm").and_then(|r| r.first_failure).unwrap();
    let db = random_db(20260515 + first as u64);
    let e = Engine::with_fault(Fault::SemiJoin);
    let p = Pred::eq_attrs("R.a", "S.b");
    let rs = e.eval(&QueryExpr::join(p.clone(), QueryExpr::base("R"), QueryExpr::base("S")), &db).map_err(|e| e.to_string())?;
    let sr = e.eval(&QueryExpr::join(p, QueryExpr::base("S"), QueryExpr::base("R")), &db).map_err(|e| e.to_string())?;
    ensure(rs.schema != sr.schema || rs.rows.len() != sr.rows.len() || !noether_core::relational::bag_eq(&rs, &sr), || {
        "flagged database shows no asymmetry".to_string()
    })?;
    let fail = |rs: &[noether_core::relational::RelMrResult], n: &str| rs.iter().find(|r| r.name == n).unwrap().failures;
    Ok(format!(
        "correct 4/4 green; guardless caught {}x, semi-join caught {}x; {secs:.2}s",
        fail(&s.guardless, "select_push"),
        fail(&s.semi_join, "join_comm")
    ))
}

fn c9() -> Outcome {
    // Oracle: forward/inverse loops written out over the fixture matrices.
    let loss = QuadraticLoss::fixture();
    let order = [0usize, 1, 2, 1];
    let grad = |b: usize, th: [f64; 2]| {
        let d = [th[0] - loss.c[b][0], th[1] - loss.c[b][1]];
        [loss.a[b][0][0] * d[0] + loss.a[b][0][1] * d[1], loss.a[b][1][0] * d[0] + loss.a[b][1][1] * d[1]]
    };
    let forward = |eta: f64, mut th: [f64; 2]| {
        for t in 0..10 {
            let g = grad(order[t % 4], th);
            th = [th[0] - eta * g[0], th[1] - eta * g[1]];
        }
        th
    };
    let residual = |eta: f64| {
        let end = forward(eta, [0.3, -0.7]);
        let mut back = end;
        for t in (0..10).rev() {
            let g = grad(order[t % 4], back);
            back = [back[0] + eta * g[0], back[1] + eta * g[1]];
        }
        let again = forward(eta, back);
        ((end[0] - again[0]).powi(2) + (end[1] - again[1]).powi(2)).sqrt()
    };
    let lib = sgd_order_check(1e-3);
    let (r, rh) = (residual(1e-3), residual(5e-4));
    ensure((lib.residual - r).abs() <= 1e-15 && (lib.residual_half - rh).abs() <= 1e-15, || {
        format!("library {} / {} vs oracle {r} / {rh}", lib.residual, lib.residual_half)
    })?;
    let ratio = r / rh;
    ensure((3.0..=5.0).contains(&ratio), || format!("ratio {ratio}"))?;
    ensure(residual(0.0) == 0.0 && lib.residual_zero_eta == 0.0, || "nonzero residual at eta=0".into())?;
    ensure(lib.passes(), || format!("{lib:?}"))?;
    Ok(format!("ratio {ratio:.3}, residual(0) = 0"))
}

fn c10() -> Outcome {
    let s = complexity_smoke().map_err(|e| e.to_string())?;
    let ratio = |p: &noether_core::experiment::ComplexityPoint| p.cost.total() as f64 / (p.n as f64 * ((p.n + 1) as f64).log2());
    let cal = ratio(&s.points[0]);
    let mut out = Vec::new();
    for p in &s.points {
        let r = ratio(p);
        ensure(r <= 1.5 * cal, || format!("n={}: {r:.3} > 1.5 x {cal:.3}", p.n))?;
        out.push(format!("n={} {r:.3}", p.n));
    }
    ensure(s.passes(), || format!("{s:?}"))?;
    Ok(out.join(", "))
}

fn c11(fx: &Fixtures) -> Outcome {
    let cfg = fx.config("reproduce").map_err(|e| e.to_string())?;
    let run = run_zoo(fx, &cfg).map_err(|e| e.to_string())?;
    let gb = g_boundary(&run);
    ensure(gb.passes(), || format!("{gb:?}"))?;
    let mut counts = BTreeMap::new();
    for sut in ["gcd", "lcm"] {
        let row = run.mr_row(&format!("{sut}.G_negate")).ok_or_else(|| format!("{sut}.G_negate missing"))?;
        let idx: Vec<usize> = run.mutant_index(sut).collect();
        ensure(!idx.is_empty(), || format!("{sut} has no mutants"))?;
        let kills = idx.iter().filter(|j| row[**j]).count();
        ensure(kills == 0, || format!("{sut}: {kills} sign-flip kills"))?;
        // Oracle: every mutant is even in each argument on sampled points.
        for j in &idx {
            let p = &run.mutants[*j].program;
            for x in sample_points(p, 48, 11) {
                let neg: Vec<Value> = x.iter().map(|v| Value::Num(-v.as_f64())).collect();
                let same = match (p.eval(&x), p.eval(&neg)) {
                    (Ok(a), Ok(b)) => noether_core::sut::values_close(a, b, 1e-12),
                    (Err(_), Err(_)) => true,
                    _ => false,
                };
                ensure(same, || format!("{} is not sign-symmetric at {x:?}", run.mutants[*j].id))?;
            }
        }
        counts.insert(sut, idx.len());
    }
    Ok(format!("gcd 0/{}, lcm 0/{}", counts["gcd"], counts["lcm"]))
}

fn main() -> ExitCode {
    let fx = Fixtures::embedded();
    let criteria: Vec<Criterion> = vec![
        ("golden MetaPattern sets", Box::new(|| c1(&fx))),
        ("reachability rejection", Box::new(|| c2(&fx))),
        ("obstruction independence", Box::new(|| c3(&fx))),
        ("closure property suite", Box::new(|| c4(&fx))),
        ("scaling-blindness experiment", Box::new(|| c5(&fx))),
        ("coverage metric", Box::new(|| c6(&fx))),
        ("statistics golden values", Box::new(c7)),
        ("relational suite", Box::new(|| c8(&fx))),
        ("SGD round-trip order", Box::new(c9)),
        ("construction cost smoke", Box::new(c10)),
        ("G-block boundary on gcd/lcm", Box::new(|| c11(&fx))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
