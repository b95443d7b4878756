use noether_core::experiment::{active_matrix, active_overrides, g_boundary, l_blindness, mutate_zoo, run_zoo};
use noether_core::fixtures::{Fixtures, HOMOGENEOUS_SUTS, SUTS};
use noether_core::harness::HarnessError;
use noether_core::mutation::{HomogeneityEffect, MutationError, Overrides};

#[test]
fn bundled_overrides_cover_every_case_dependent_cell() {
    let fx = Fixtures::embedded();
    let cfg = fx.config("reproduce").unwrap();
    let zoo = fx.zoo().unwrap();
    let matrix = active_matrix(&cfg);
    let bundled = active_overrides(&fx, &cfg).unwrap();
    assert!(mutate_zoo(&zoo, &cfg, &matrix, &bundled).is_ok());
    let err = mutate_zoo(&zoo, &cfg, &matrix, &Overrides::new()).unwrap_err();
    assert!(matches!(err, MutationError::MissingOverride { .. }));
}

#[test]
fn scaling_blindness_holds_across_seeds() {
    let fx = Fixtures::embedded();
    for seed in [1u64, 2, 99] {
        let mut cfg = fx.config("reproduce").unwrap();
        cfg.seed = seed;
        let run = run_zoo(&fx, &cfg).unwrap();
        let lb = l_blindness(&run);
        assert!(lb.preserving_kills.is_empty(), "seed {seed}: {:?}", lb.preserving_kills);
        assert!(!lb.verdict.falsified, "seed {seed}");
        assert!(g_boundary(&run).passes(), "seed {seed}");
    }
}

#[test]
fn every_sut_has_live_mutants_and_no_baseline_red_mr() {
    let fx = Fixtures::embedded();
    let run = run_zoo(&fx, &fx.config("reproduce").unwrap()).unwrap();
    for sut in SUTS {
        assert!(run.mutant_index(sut).count() > 0, "{sut}");
    }
    assert!(run.matrix.excluded.is_empty(), "{:?}", run.matrix.excluded);
    assert_eq!(run.matrix.cells.len(), run.mrs.len());
    assert!(run.matrix.cells.iter().all(|r| r.len() == run.mutants.len()));
}

#[test]
fn kill_matrix_is_deterministic() {
    let fx = Fixtures::embedded();
    let cfg = fx.config("reproduce").unwrap();
    let a = run_zoo(&fx, &cfg).unwrap();
    let b = run_zoo(&fx, &cfg).unwrap();
    assert_eq!(a.matrix.cells, b.matrix.cells);
    assert_eq!(a.equivalent, b.equivalent);
}

#[test]
fn homogeneous_kills_are_breaking_tagged() {
    let fx = Fixtures::embedded();
    let run = run_zoo(&fx, &fx.config("reproduce").unwrap()).unwrap();
    let lb = l_blindness(&run);
    for sut in HOMOGENEOUS_SUTS {
        let s = &lb.per_sut[sut];
        assert!(s.killed_effects.iter().all(|e| *e == HomogeneityEffect::Breaking), "{sut}");
    }
}

#[test]
fn unbound_error_names_the_slot() {
    let e = HarnessError::UnboundSlot { mr: "x".into(), slot: "orbit".into() };
    assert!(e.to_string().contains("orbit"));
}
