use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noether_core::checks::reproduce;
use noether_core::construct::construct_mp;
use noether_core::experiment::{active_matrix, active_overrides, bundled_rules, l_blindness, run_zoo};
use noether_core::fixtures::Fixtures;
use noether_core::harness::{coverage, reachable_templates};
use noether_core::mutation::{classify, mutate, HomogeneityEffect};
use noether_core::reachability::{check_reachability, exhaust_blocks, MRDescriptor};
use noether_core::relational::{run_rel_mrs, Engine, Fault};
use noether_core::report::{Format, Report};
use noether_core::spec::{parse_algebra, parse_config, parse_mr, parse_sut, MutatorConfig};
use noether_core::stats::{audit_ratings, fisher_rates, fleiss_kappa, mcnemar_exact, wilson_interval};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "noether", version, about = "Derive, check, and exercise metamorphic relations")]
struct Cli {
    #[arg(long, value_enum, default_value_t = OutFormat::Human, global = true)]
    format: OutFormat,
    /// Overrides the seed of the active configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Human,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    Guardless,
    SemiJoin,
}

#[derive(Subcommand)]
enum Cmd {
    /// MetaPattern set of an operator algebra.
    Derive { algebra: String },
    /// Reachability verdict of an MR descriptor against an algebra.
    CheckMr {
        mr: String,
        #[arg(long)]
        algebra: String,
    },
    /// Structural coverage of a set of MR descriptors.
    Coverage {
        #[arg(long)]
        algebra: String,
        #[arg(required = true)]
        mrs: Vec<String>,
    },
    /// Mutants of one SUT with their tags and strata.
    Mutate {
        sut: String,
        #[arg(long)]
        config: Option<String>,
    },
    /// Kill matrix of the built-in MR set over the whole zoo.
    Kill {
        #[arg(long)]
        config: Option<String>,
    },
    /// Rewrite-block MRs on random databases.
    Rel {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
    },
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Every experiment with its acceptance verdict.
    Reproduce { config: Option<String> },
}

#[derive(Subcommand)]
enum StatsCmd {
    Wilson {
        successes: u64,
        trials: u64,
        #[arg(long, default_value_t = 0.95)]
        conf: f64,
    },
    Mcnemar { b: u64, c: u64 },
    Fisher { x1: u64, n1: u64, x2: u64, n2: u64 },
    /// Fleiss kappa of the bundled 18-item audit.
    Kappa,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, msg: e.to_string() }
}

/// Text of a document named on the command line: a file on disk, or a path
/// or bare name inside the fixture set.
fn load(fx: &Fixtures, arg: &str, ext: &str, dirs: &[&str]) -> Result<(String, String), Failure> {
    if Path::new(arg).is_file() {
        return std::fs::read_to_string(arg).map(|t| (t, arg.to_string())).map_err(|e| usage(format!("{arg}: {e}")));
    }
    let rel = arg.strip_prefix("fixtures/").unwrap_or(arg);
    let mut candidates = vec![rel.to_string()];
    if !rel.ends_with(ext) {
        for d in dirs {
            candidates.push(if d.is_empty() { format!("{rel}{ext}") } else { format!("{d}/{rel}{ext}") });
        }
    }
    for c in &candidates {
        match fx.read(c) {
            Ok(t) => return Ok((t, c.clone())),
            Err(noether_core::fixtures::FixtureError::Missing(_)) => continue,
            Err(e) => return Err(usage(e)),
        }
    }
    Err(usage(format!("no such file or fixture: {arg}")))
}

fn load_config(fx: &Fixtures, arg: Option<&str>, seed: Option<u64>) -> Result<MutatorConfig, Failure> {
    let (text, name) = load(fx, arg.unwrap_or("reproduce"), ".cfg", &[""])?;
    let mut cfg = parse_config(&text, &name).map_err(usage)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_mr(fx: &Fixtures, arg: &str) -> Result<MRDescriptor, Failure> {
    let (text, name) = load(fx, arg, ".mr", &["mr", "mr/set_l", "mr/set_b"])?;
    parse_mr(&text, &name).map_err(usage)
}

fn load_algebra(fx: &Fixtures, arg: &str) -> Result<noether_core::algebra::OperatorAlgebra, Failure> {
    let (text, name) = load(fx, arg, ".alg", &[""])?;
    parse_algebra(&text, &name).map_err(usage)
}

fn cmd_derive(fx: &Fixtures, alg: &str) -> Result<Report, Failure> {
    let a = load_algebra(fx, alg)?;
    let set = construct_mp(&a).map_err(usage)?;
    let mut r = Report::new();
    r.table(
        &format!("MetaPatterns of {}", set.algebra),
        &["block", "label", "members", "form", "tuple rule"],
        set.patterns
            .iter()
            .map(|p| {
                let forms: Vec<String> = p.members.iter().map(|m| m.pi_template.to_string()).collect();
                let mut forms = forms;
                forms.dedup();
                vec![
                    p.block.to_string(),
                    p.label.clone(),
                    p.members.len().to_string(),
                    forms.join(","),
                    p.block.tuple_rule().to_string(),
                ]
            })
            .collect(),
    );
    r.text(
        "cost",
        vec![format!(
            "extraction {} translation {} quotient {} lift {} total {}",
            set.cost.extraction,
            set.cost.translation,
            set.cost.quotient,
            set.cost.lift,
            set.cost.total()
        )],
    );
    Ok(r)
}

fn cmd_check_mr(fx: &Fixtures, mr: &str, alg: &str) -> Result<Report, Failure> {
    let d = load_mr(fx, mr)?;
    let a = load_algebra(fx, alg)?;
    let v = check_reachability(&d, &a).map_err(usage)?;
    let mut r = Report::new();
    r.table(
        "verdict",
        &["mr", "algebra", "reachable", "block", "obstructions", "admitting"],
        vec![vec![
            d.name.clone(),
            a.name.clone(),
            v.reachable.to_string(),
            v.assigned_block.map_or("-".into(), |b| b.to_string()),
            v.obstructions.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(","),
            v.admitting_blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
        ]],
    );
    if !v.reachable {
        r.table(
            "obstructions",
            &["id", "reason"],
            v.obstructions.iter().map(|o| vec![o.to_string(), o.describe().to_string()]).collect(),
        );
        let why = exhaust_blocks(&d, &a).map_err(usage)?;
        r.table(
            "per-block exhaustion",
            &["block", "reason"],
            why.into_iter().map(|(b, s)| vec![b.to_string(), s]).collect(),
        );
    }
    Ok(r)
}

fn cmd_coverage(fx: &Fixtures, alg: &str, mrs: &[String]) -> Result<Report, Failure> {
    let a = load_algebra(fx, alg)?;
    let descs: Vec<MRDescriptor> = mrs.iter().map(|m| load_mr(fx, m)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for d in &descs {
        let v = check_reachability(d, &a).map_err(usage)?;
        rows.push(vec![d.name.clone(), v.assigned_block.map_or("-".into(), |b| b.to_string())]);
    }
    let templates = reachable_templates(&descs, &a).map_err(usage)?;
    let c = coverage(&templates, &a).map_err(usage)?;
    let mut r = Report::new();
    r.table("descriptors", &["mr", "block"], rows);
    r.table(
        "coverage",
        &["algebra", "covered", "populated", "ratio"],
        vec![vec![
            a.name.clone(),
            c.numer().to_string(),
            c.denom().to_string(),
            format!("{:.2}", *c.numer() as f64 / *c.denom() as f64),
        ]],
    );
    Ok(r)
}

fn cmd_mutate(fx: &Fixtures, sut: &str, cfg: &MutatorConfig) -> Result<Report, Failure> {
    let (text, name) = load(fx, sut, ".sut", &["suts"])?;
    let p = parse_sut(&text, &name).map_err(usage)?;
    let matrix = active_matrix(cfg);
    let overrides = active_overrides(fx, cfg).map_err(usage)?;
    let mut rows = Vec::new();
    for m in mutate(&p, &cfg.categories, cfg.seed) {
        let c = classify(&m, &p.declared_blocks, &matrix, &overrides).map_err(usage)?;
        rows.push(vec![
            m.id.clone(),
            m.category.to_string(),
            m.site.clone(),
            m.description.clone(),
            match m.homogeneity_effect {
                HomogeneityEffect::Preserving => "preserving".into(),
                HomogeneityEffect::Breaking => "breaking".into(),
            },
            m.equivalent.to_string(),
            format!("{:?}", c.strata),
            c.broken_blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(","),
        ]);
    }
    let mut r = Report::new();
    r.table(
        &format!("mutants of {}", p.name),
        &["id", "category", "site", "description", "homogeneity", "equivalent", "strata", "broken"],
        rows,
    );
    Ok(r)
}

fn cmd_kill(fx: &Fixtures, cfg: &MutatorConfig) -> Result<Report, Failure> {
    let run = run_zoo(fx, cfg).map_err(usage)?;
    let mut r = Report::new();
    r.table(
        "kills per MR",
        &["mr", "block", "kills", "mutants of sut"],
        run.mrs
            .iter()
            .enumerate()
            .map(|(i, mr)| {
                vec![
                    mr.name.clone(),
                    mr.block().to_string(),
                    run.matrix.kills_by(i).to_string(),
                    run.mutant_index(&mr.sut).count().to_string(),
                ]
            })
            .collect(),
    );
    let lb = l_blindness(&run);
    r.table(
        "scaling-block kills",
        &["sut", "kills", "mutants"],
        lb.per_sut.iter().map(|(n, s)| vec![n.clone(), s.kills.to_string(), s.mutants.to_string()]).collect(),
    );
    r.text(
        "summary",
        vec![
            format!("{} live mutants, {} equivalent dropped", run.mutants.len(), run.equivalent.len()),
            format!("{} killed by at least one MR", (0..run.mutants.len()).filter(|j| run.matrix.killed(*j)).count()),
            format!("baseline-red MRs: {}", run.matrix.excluded.len()),
        ],
    );
    Ok(r)
}

fn cmd_rel(fx: &Fixtures, seed: u64, trials: usize, fault: FaultArg) -> Result<Report, Failure> {
    let rules = bundled_rules(fx).map_err(usage)?;
    let engine = match fault {
        FaultArg::None => Engine::default(),
        FaultArg::Guardless => Engine::with_fault(Fault::GuardlessPushdown),
        FaultArg::SemiJoin => Engine::with_fault(Fault::SemiJoin),
    };
    let res = run_rel_mrs(&engine, &rules, seed, trials).map_err(usage)?;
    let mut r = Report::new();
    r.table(
        "relational MRs",
        &["mr", "passes", "failures", "first failure"],
        res.iter()
            .map(|x| {
                vec![
                    x.name.clone(),
                    x.passes.to_string(),
                    x.failures.to_string(),
                    x.first_failure.map_or("-".into(), |t| t.to_string()),
                ]
            })
            .collect(),
    );
    Ok(r)
}

fn cmd_stats(s: &StatsCmd) -> Result<Report, Failure> {
    let mut r = Report::new();
    match *s {
        StatsCmd::Wilson { successes, trials, conf } => {
            let (lo, hi) = wilson_interval(successes, trials, conf).map_err(usage)?;
            r.table("wilson", &["s", "n", "conf", "lo", "hi"], vec![vec![
                successes.to_string(),
                trials.to_string(),
                conf.to_string(),
                format!("{lo:.4}"),
                format!("{hi:.4}"),
            ]]);
        }
        StatsCmd::Mcnemar { b, c } => {
            r.table("mcnemar", &["b", "c", "p"], vec![vec![b.to_string(), c.to_string(), format!("{:.4}", mcnemar_exact(b, c))]]);
        }
        StatsCmd::Fisher { x1, n1, x2, n2 } => {
            if x1 > n1 || x2 > n2 {
                return Err(usage("successes cannot exceed trials"));
            }
            r.table("fisher", &["x1/n1", "x2/n2", "p"], vec![vec![
                format!("{x1}/{n1}"),
                format!("{x2}/{n2}"),
                format!("{:.4}", fisher_rates(x1, n1, x2, n2)),
            ]]);
        }
        StatsCmd::Kappa => {
            let k = fleiss_kappa(&audit_ratings(), 4).map_err(usage)?;
            r.table("fleiss kappa", &["items", "raters", "kappa"], vec![vec![
                audit_ratings().len().to_string(),
                "3".into(),
                format!("{k:.4}"),
            ]]);
        }
    }
    Ok(r)
}

fn execute(cli: &Cli, fx: &Fixtures) -> Result<Report, Failure> {
    match &cli.cmd {
        Cmd::Derive { algebra } => cmd_derive(fx, algebra),
        Cmd::CheckMr { mr, algebra } => cmd_check_mr(fx, mr, algebra),
        Cmd::Coverage { algebra, mrs } => cmd_coverage(fx, algebra, mrs),
        Cmd::Mutate { sut, config } => cmd_mutate(fx, sut, &load_config(fx, config.as_deref(), cli.seed)?),
        Cmd::Kill { config } => cmd_kill(fx, &load_config(fx, config.as_deref(), cli.seed)?),
        Cmd::Rel { trials, fault } => {
            let seed = load_config(fx, None, cli.seed)?.seed;
            cmd_rel(fx, seed, *trials, *fault)
        }
        Cmd::Stats(s) => cmd_stats(s),
        Cmd::Reproduce { config } => {
            let cfg = load_config(fx, config.as_deref(), cli.seed)?;
            let rep = reproduce(fx, &cfg).map_err(usage)?;
            let mut report = rep.report.clone();
            if !rep.all_pass() {
                let failed: Vec<String> =
                    rep.checks.iter().filter(|c| !c.pass).map(|c| format!("[{}] {}", c.id, c.name)).collect();
                report.verdict("acceptance", false, format!("failed: {}", failed.join(", ")));
            } else {
                report.verdict("acceptance", true, format!("{} checks", rep.checks.len()));
            }
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fx = Fixtures::from_env();
    let format = match cli.format {
        OutFormat::Human => Format::Human,
        OutFormat::Machine => Format::Machine,
    };
    let report = match execute(&cli, &fx) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("noether: {}", f.msg);
            return ExitCode::from(f.code);
        }
    };
    let text = report.render(format);
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("noether: {}: {e}", p.display());
                return ExitCode::from(EXIT_USAGE);
            }
        }
        None => print!("{text}"),
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        if let Some(noether_core::report::Section { title, .. }) = report.sections.last() {
            eprintln!("noether: {title} failed");
        }
        ExitCode::from(EXIT_FAIL)
    }
}
