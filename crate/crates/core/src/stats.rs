//! Paired comparison statistics: summaries, Wilcoxon signed-rank tests with
//! Holm step-down adjustment, rank-biserial effect sizes and win rates.
//!
//! Conventions (fixed so tables are bit-reproducible):
//! * quartiles use linear interpolation between order statistics (type 7);
//! * exact zero differences are dropped before ranking;
//! * the exact null distribution is used for `n <= 12` without ties,
//!   the tie-corrected normal approximation with continuity correction otherwise.

use crate::error::{domain, Result};
use crate::special::normal_cdf;

/// Type-7 quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return domain("median of an empty sample");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, 0.5))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator; 0 for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub sd: f64,
    pub q25: f64,
    pub q75: f64,
    /// Set when `sd` is not defined (a single observation) and reported as 0.
    pub sd_undefined: bool,
}

impl Summary {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return domain("cannot summarise an empty sample");
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(Summary {
        n: v.len(),
        median: quantile_sorted(&v, 0.5),
        sd: std_dev(&v),
        q25: quantile_sorted(&v, 0.25),
        q75: quantile_sorted(&v, 0.75),
        sd_undefined: v.len() == 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// Differences tend to be negative.
    Less,
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathChoice {
    /// Exact for small samples without ties, normal approximation otherwise.
    Auto,
    ForceExact,
    ForceNormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    pub p_value: f64,
    /// Sum of ranks of positive differences.
    pub t_plus: f64,
    pub t_minus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub exact: bool,
    /// All differences were zero; `p_value` is reported as 1.
    pub degenerate: bool,
}

/// Average ranks of `|d|` (1-based), ties sharing the mean rank.
fn signed_ranks(nonzero: &[f64]) -> (Vec<f64>, bool) {
    let n = nonzero.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));
    let mut ranks = vec![0.0; n];
    let mut ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        if j - i > 1 {
            ties = true;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    (ranks, ties)
}

pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(diffs, alternative, PathChoice::Auto)
}

pub fn wilcoxon_signed_rank_with(diffs: &[f64], alternative: Alternative, path: PathChoice) -> Result<WilcoxonResult> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return domain("non-finite paired difference");
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(WilcoxonResult { p_value: 1.0, t_plus: 0.0, t_minus: 0.0, n: 0, exact: false, degenerate: true });
    }
    let (ranks, ties) = signed_ranks(&nonzero);
    let t_plus: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let t_minus = total - t_plus;
    let exact = match path {
        PathChoice::Auto => n <= 12 && !ties,
        PathChoice::ForceExact => true,
        PathChoice::ForceNormal => false,
    };
    let p_value = if exact { exact_p(&ranks, t_plus, alternative) } else { normal_p(n, &ranks, t_plus, alternative) };
    Ok(WilcoxonResult { p_value: p_value.clamp(0.0, 1.0), t_plus, t_minus, n, exact, degenerate: false })
}

/// Exact null distribution of `T+` by counting sign assignments. Ranks are
/// doubled so average (half-integer) ranks stay integral.
fn exact_p(ranks: &[f64], t_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    // counts[s] = number of sign patterns with doubled positive-rank sum s
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks.len() as i32);
    let obs = (2.0 * t_plus).round() as usize;
    let lower: f64 = counts[..=obs].iter().sum::<f64>() / all;
    let upper: f64 = counts[obs..].iter().sum::<f64>() / all;
    match alternative {
        Alternative::Less => lower,
        Alternative::Greater => upper,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

fn normal_p(n: usize, ranks: &[f64], t_plus: f64, alternative: Alternative) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    // tie correction: sum over tie groups of (t^3 - t) / 48
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    match alternative {
        Alternative::Less => normal_cdf((t_plus - mean + 0.5) / sd),
        Alternative::Greater => normal_cdf(-(t_plus - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((t_plus - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * normal_cdf(-z)).min(1.0)
        }
    }
}

/// Holm step-down adjustment; output is in the input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return domain("p-values must lie in [0, 1]");
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankBiserial {
    /// `(T+ - T-) / (T+ + T-)`
    pub r: f64,
    pub magnitude: f64,
    pub degenerate: bool,
}

pub fn rank_biserial(diffs: &[f64]) -> RankBiserial {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return RankBiserial { r: 0.0, magnitude: 0.0, degenerate: true };
    }
    let (ranks, _) = signed_ranks(&nonzero);
    let (mut tp, mut tm) = (0.0, 0.0);
    for (d, r) in nonzero.iter().zip(&ranks) {
        if *d > 0.0 {
            tp += r;
        } else {
            tm += r;
        }
    }
    let r = (tp - tm) / (tp + tm);
    RankBiserial { r, magnitude: r.abs(), degenerate: false }
}

/// Fraction of strictly negative differences, ties counting one half.
pub fn win_rate(diffs: &[f64]) -> Result<f64> {
    if diffs.is_empty() {
        return domain("win rate of an empty sample");
    }
    let score: f64 = diffs
        .iter()
        .map(|d| {
            if *d < 0.0 {
                1.0
            } else if *d == 0.0 {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(score / diffs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Brute-force enumeration of all sign assignments of the given ranks.
    fn brute_force_p(ranks: &[f64], t_obs: f64, alt: Alternative) -> f64 {
        let n = ranks.len();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let t: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if t <= t_obs + 1e-9 {
                le += 1;
            }
            if t >= t_obs - 1e-9 {
                ge += 1;
            }
        }
        let all = (1u64 << n) as f64;
        match alt {
            Alternative::Less => le as f64 / all,
            Alternative::Greater => ge as f64 / all,
            Alternative::TwoSided => (2.0 * (le.min(ge) as f64) / all).min(1.0),
        }
    }

    #[test]
    fn summary_fixture() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.q75, 3.25);
        assert_eq!(summarize(&[3.0; 5]).unwrap().sd, 0.0);
        let single = summarize(&[7.0]).unwrap();
        assert_eq!(single.median, 7.0);
        assert_eq!(single.sd, 0.0);
        assert!(single.sd_undefined);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn five_negative_differences() {
        let r = wilcoxon_signed_rank(&[-1.0, -2.0, -3.0, -4.0, -5.0], Alternative::Less).unwrap();
        assert!(r.exact);
        assert_abs_diff_eq!(r.p_value, 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn balanced_pair_two_sided_is_one() {
        let r = wilcoxon_signed_rank(&[1.5, -1.5], Alternative::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = wilcoxon_signed_rank_with(&[1.5, -1.5], Alternative::TwoSided, PathChoice::ForceExact).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let r = wilcoxon_signed_rank(&[0.0, 0.0], Alternative::Less).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn exact_path_matches_brute_force() {
        let mut rng = crate::seed::stream(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=11);
            // integer-valued magnitudes so ties occur regularly
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let v = rng.random_range(1..6) as f64;
                    if rng.random::<bool>() {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let (ranks, _) = signed_ranks(&diffs);
            let tp: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
            for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
                let ours = wilcoxon_signed_rank_with(&diffs, alt, PathChoice::ForceExact).unwrap();
                assert_abs_diff_eq!(ours.p_value, brute_force_p(&ranks, tp, alt), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn holm_fixture() {
        let adj = holm_adjust(&[0.005, 0.01, 0.03, 0.04]).unwrap();
        for (a, e) in adj.iter().zip([0.02, 0.03, 0.06, 0.06]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
        assert_eq!(holm_adjust(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(holm_adjust(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0; 3]);
        // order restored
        let adj = holm_adjust(&[0.04, 0.005, 0.03, 0.01]).unwrap();
        assert_abs_diff_eq!(adj[1], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(adj[0], 0.06, epsilon = 1e-15);
    }

    #[test]
    fn rank_biserial_fixtures() {
        assert_abs_diff_eq!(rank_biserial(&[-3.0, -2.0, 1.0]).r, -2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rank_biserial(&[-1.0, -2.0, -0.5]).magnitude, 1.0);
        assert_eq!(rank_biserial(&[1.0, -1.0]).r, 0.0);
        assert!(rank_biserial(&[0.0]).degenerate);
    }

    #[test]
    fn win_rate_fixtures() {
        assert_eq!(win_rate(&[-1.0, -2.0]).unwrap(), 1.0);
        assert_eq!(win_rate(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(win_rate(&[-1.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn one_sided_duality(diffs in proptest::collection::vec(-50i32..50, 1..12)) {
            let d: Vec<f64> = diffs.iter().map(|v| *v as f64).collect();
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let a = wilcoxon_signed_rank_with(&d, Alternative::Less, PathChoice::ForceExact).unwrap();
            let b = wilcoxon_signed_rank_with(&neg, Alternative::Greater, PathChoice::ForceExact).unwrap();
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
        }

        #[test]
        fn holm_dominates_raw(ps in proptest::collection::vec(0.0f64..=1.0, 1..10)) {
            let adj = holm_adjust(&ps).unwrap();
            for (a, p) in adj.iter().zip(&ps) {
                prop_assert!(*a >= *p - 1e-15);
                prop_assert!(*a <= 1.0);
            }
            // step-down: sorted adjusted values are non-decreasing in raw order
            let mut idx: Vec<usize> = (0..ps.len()).collect();
            idx.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            for w in idx.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]] + 1e-15);
            }
        }

        #[test]
        fn rank_biserial_sign_for_one_sided_samples(v in proptest::collection::vec(0.01f64..10.0, 1..20)) {
            prop_assert_eq!(rank_biserial(&v).r, 1.0);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert_eq!(rank_biserial(&neg).r, -1.0);
        }
    }
}
