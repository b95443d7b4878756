//! Small-sample statistics: Wilson score intervals, exact McNemar, Fisher's
//! exact 2x2 test, Fleiss' kappa, and paired-comparison bookkeeping.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("every label falls in one category; kappa is undefined")]
    DegenerateCategories,
    #[error("need at least {need} {what}, got {got}")]
    TooFew { what: &'static str, need: usize, got: usize },
    #[error("item {item} has {got} ratings, expected {expected}")]
    RaggedRatings { item: usize, expected: usize, got: usize },
    #[error("label {label} outside 0..{categories}")]
    LabelOutOfRange { label: usize, categories: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Wilson score interval for `successes` out of `n` at the given confidence.
pub fn wilson_interval(successes: u64, n: u64, confidence: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || successes > n {
        return Err(StatsError::Invalid(format!("{successes} successes out of {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::Invalid(format!("confidence {confidence}")));
    }
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let (nf, p) = (n as f64, successes as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

fn binom_pmf(n: u64, k: u64) -> f64 {
    (ln_binomial(n, k) - n as f64 * std::f64::consts::LN_2).exp()
}

/// Exact two-sided McNemar test on discordant counts: twice the smaller
/// binomial tail, capped at one.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let tail: f64 = (0..=b.min(c)).map(|k| binom_pmf(n, k)).sum();
    (2.0 * tail).min(1.0)
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`: total probability of
/// tables with the same margins that are no more likely than the observed one.
pub fn fisher_exact_2x2(table: [u64; 4]) -> f64 {
    let [a, b, c, d] = table;
    let (r1, c1, n) = (a + b, a + c, a + b + c + d);
    if n == 0 {
        return 1.0;
    }
    let ln_p = |x: u64| ln_binomial(r1, x) + ln_binomial(n - r1, c1 - x) - ln_binomial(n, c1);
    let lo = c1.saturating_sub(n - r1);
    let hi = r1.min(c1);
    let observed = ln_p(a);
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|l| *l <= observed + 1e-7)
        .map(f64::exp)
        .sum();
    p.min(1.0)
}

/// Fisher test comparing two detection rates `x1/n1` and `x2/n2`.
pub fn fisher_rates(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    fisher_exact_2x2([x1, n1 - x1, x2, n2 - x2])
}

/// Fleiss' kappa over `ratings[item][rater]` labels in `0..categories`.
pub fn fleiss_kappa(ratings: &[Vec<usize>], categories: usize) -> Result<f64, StatsError> {
    if ratings.len() < 2 {
        return Err(StatsError::TooFew { what: "items", need: 2, got: ratings.len() });
    }
    let raters = ratings[0].len();
    if raters < 2 {
        return Err(StatsError::TooFew { what: "raters", need: 2, got: raters });
    }
    let mut totals = vec![0usize; categories];
    let mut agreement = 0.0;
    for (i, item) in ratings.iter().enumerate() {
        if item.len() != raters {
            return Err(StatsError::RaggedRatings { item: i, expected: raters, got: item.len() });
        }
        let mut counts = vec![0usize; categories];
        for &l in item {
            if l >= categories {
                return Err(StatsError::LabelOutOfRange { label: l, categories });
            }
            counts[l] += 1;
            totals[l] += 1;
        }
        let sq: usize = counts.iter().map(|c| c * c).sum();
        agreement += (sq - raters) as f64 / (raters * (raters - 1)) as f64;
    }
    let n_items = ratings.len() as f64;
    let p_bar = agreement / n_items;
    let all = n_items * raters as f64;
    let p_e: f64 = totals.iter().map(|t| (*t as f64 / all).powi(2)).sum();
    if totals.iter().filter(|t| **t > 0).count() < 2 {
        return Err(StatsError::DegenerateCategories);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Eighteen-item, three-rater audit over four block categories; sixteen
/// items are unanimous.
pub const AUDIT_RATINGS: [[usize; 3]; 18] = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
    [1, 1, 1],
    [0, 0, 0],
    [0, 0, 0],
    [2, 2, 2],
    [0, 0, 0],
    [1, 1, 2],
    [0, 0, 0],
    [3, 3, 3],
    [0, 0, 0],
    [0, 0, 0],
    [2, 2, 1],
    [0, 0, 0],
    [3, 3, 3],
    [0, 0, 0],
];

pub fn audit_ratings() -> Vec<Vec<usize>> {
    AUDIT_RATINGS.iter().map(|r| r.to_vec()).collect()
}

/// Bonferroni share of `alpha` over `k` comparisons.
pub fn bonferroni_threshold(alpha: f64, k: usize) -> f64 {
    alpha / k.max(1) as f64
}

/// Holm step-down: which of `p_values` are rejected at family level `alpha`.
pub fn holm_reject(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let k = p_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| p_values[*a].total_cmp(&p_values[*b]));
    let mut out = vec![false; k];
    for (rank, i) in order.into_iter().enumerate() {
        if p_values[i] > alpha / (k - rank) as f64 {
            break;
        }
        out[i] = true;
    }
    out
}

/// Agreement table for two MR sets over the same mutants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PairedCounts {
    pub both: u64,
    pub a_only: u64,
    pub b_only: u64,
    pub neither: u64,
}

impl PairedCounts {
    pub fn from_kills(a: &[bool], b: &[bool]) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::Invalid(format!("kill vectors of length {} and {}", a.len(), b.len())));
        }
        let mut p = PairedCounts::default();
        for (x, y) in a.iter().zip(b) {
            match (x, y) {
                (true, true) => p.both += 1,
                (true, false) => p.a_only += 1,
                (false, true) => p.b_only += 1,
                (false, false) => p.neither += 1,
            }
        }
        Ok(p)
    }

    pub fn total(&self) -> u64 {
        self.both + self.a_only + self.b_only + self.neither
    }

    pub fn mcnemar(&self) -> f64 {
        mcnemar_exact(self.a_only, self.b_only)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, t: f64) -> bool {
        (a - b).abs() <= t
    }

    #[test]
    fn wilson_golden() {
        let (lo, hi) = wilson_interval(7, 20, 0.95).unwrap();
        assert!(close(lo, 0.18, 0.005) && close(hi, 0.57, 0.005), "{lo} {hi}");
        let (lo, hi) = wilson_interval(26, 52, 0.95).unwrap();
        assert!(close(lo, 0.369, 0.001) && close(hi, 0.631, 0.001), "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 5, 0.95).unwrap();
        assert!(close(lo, 0.0, 0.001) && close(hi, 0.434, 0.001), "{lo} {hi}");
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(1, 2, 1.0).is_err());
    }

    #[test]
    fn mcnemar_golden() {
        assert!(close(mcnemar_exact(15, 4), 0.019, 0.001));
        assert!(close(mcnemar_exact(18, 4), 0.0043, 0.0005));
        assert_eq!(mcnemar_exact(2, 0), 0.5);
        assert_eq!(mcnemar_exact(0, 0), 1.0);
        assert_eq!(mcnemar_exact(5, 5), 1.0);
    }

    #[test]
    fn fisher_golden() {
        assert!(close(fisher_rates(7, 20, 0, 20), 0.008, 0.001));
        assert!(close(fisher_rates(2, 5, 0, 5), 0.444, 0.001));
        assert_eq!(fisher_exact_2x2([0, 0, 0, 0]), 1.0);
    }

    #[test]
    fn fisher_matches_enumeration_oracle() {
        // Direct enumeration with factorials over small integers.
        fn fact(n: u64) -> f64 {
            (1..=n).map(|x| x as f64).product()
        }
        fn pr(a: u64, b: u64, c: u64, d: u64) -> f64 {
            fact(a + b) * fact(c + d) * fact(a + c) * fact(b + d) / (fact(a) * fact(b) * fact(c) * fact(d) * fact(a + b + c + d))
        }
        let (a, b, c, d) = (3u64, 1, 1, 3);
        let obs = pr(a, b, c, d);
        let mut p = 0.0;
        for x in 0..=4u64 {
            let t = pr(x, 4 - x, 4 - x, x);
            if t <= obs * (1.0 + 1e-9) {
                p += t;
            }
        }
        assert!(close(fisher_exact_2x2([a, b, c, d]), p, 1e-12));
    }

    #[test]
    fn kappa_golden_and_edges() {
        let k = fleiss_kappa(&audit_ratings(), 4).unwrap();
        assert!(close(k, 0.857, 0.0005), "{k}");
        let unanimous: Vec<Vec<usize>> = (0..6).map(|i| vec![i % 3; 3]).collect();
        assert!(close(fleiss_kappa(&unanimous, 3).unwrap(), 1.0, 1e-12));
        assert_eq!(fleiss_kappa(&vec![vec![1, 1]; 4], 3), Err(StatsError::DegenerateCategories));
        assert!(matches!(fleiss_kappa(&[vec![0, 1]], 2), Err(StatsError::TooFew { .. })));
        assert!(matches!(fleiss_kappa(&[vec![0, 5], vec![0, 0]], 2), Err(StatsError::LabelOutOfRange { .. })));
    }

    #[test]
    fn kappa_matches_pairwise_agreement_oracle() {
        // Observed agreement as the share of agreeing rater pairs per item.
        let r = audit_ratings();
        let mut agree = 0.0;
        for item in &r {
            let mut pairs = 0;
            for i in 0..3 {
                for j in i + 1..3 {
                    pairs += (item[i] == item[j]) as usize;
                }
            }
            agree += pairs as f64 / 3.0;
        }
        let p_bar = agree / r.len() as f64;
        let mut share = [0.0; 4];
        for item in &r {
            for l in item {
                share[*l] += 1.0 / 54.0;
            }
        }
        let pe: f64 = share.iter().map(|s| s * s).sum();
        assert!(close(fleiss_kappa(&r, 4).unwrap(), (p_bar - pe) / (1.0 - pe), 1e-12));
    }

    #[test]
    fn random_two_rater_kappa_is_near_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let r: Vec<Vec<usize>> = (0..4000).map(|_| vec![rng.gen_range(0..3), rng.gen_range(0..3)]).collect();
        assert!(fleiss_kappa(&r, 3).unwrap().abs() < 0.05);
    }

    #[test]
    fn paired_counts_and_holm() {
        let a: Vec<bool> = [vec![true; 22], vec![true; 4], vec![false; 18], vec![false; 18]].concat();
        let b: Vec<bool> = [vec![true; 22], vec![false; 4], vec![true; 18], vec![false; 18]].concat();
        let p = PairedCounts::from_kills(&a, &b).unwrap();
        assert_eq!(p, PairedCounts { both: 22, a_only: 4, b_only: 18, neither: 18 });
        assert_eq!(p.total(), 62);
        assert!(close(p.mcnemar(), 0.0043, 0.0005));
        assert_eq!(holm_reject(&[0.01, 0.04, 0.03], 0.05), vec![true, false, false]);
        assert_eq!(holm_reject(&[0.01, 0.02, 0.03], 0.05), vec![true, true, true]);
        assert!(close(bonferroni_threshold(0.05, 4), 0.0125, 1e-15));
    }

    proptest! {
        #[test]
        fn wilson_contains_point_and_narrows(s in 0u64..50, n in 1u64..50) {
            let s = s.min(n);
            let (lo, hi) = wilson_interval(s, n, 0.95).unwrap();
            let p = s as f64 / n as f64;
            prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
            let (lo2, hi2) = wilson_interval(4 * s, 4 * n, 0.95).unwrap();
            prop_assert!(hi2 - lo2 < hi - lo);
        }

        #[test]
        fn mcnemar_symmetric(b in 0u64..60, c in 0u64..60) {
            prop_assert_eq!(mcnemar_exact(b, c), mcnemar_exact(c, b));
        }

        #[test]
        fn fisher_swap_invariant(a in 0u64..15, b in 0u64..15, c in 0u64..15, d in 0u64..15) {
            let p = fisher_exact_2x2([a, b, c, d]);
            prop_assert!((p - fisher_exact_2x2([c, d, a, b])).abs() < 1e-9);
            prop_assert!((p - fisher_exact_2x2([b, a, d, c])).abs() < 1e-9);
        }
    }
}
