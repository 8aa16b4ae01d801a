use super::{lambda_label, ResultRow};
use crate::error::{Error, Result};
use crate::risk::{bootstrap_ci, Statistic};
use crate::scenario::DgpKind;
use crate::seed::{derive_seed, stream};
use crate::stats::{
    holm_adjust, median, rank_biserial, summarize, wilcoxon_signed_rank, win_rate, Alternative, Summary,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Per-setting statistics of one method's oracle J.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub dgp: DgpKind,
    pub lambda: f64,
    pub method: String,
    pub n_failed: usize,
    pub summary: Summary,
    /// `100 (median - reference median) / reference median`.
    pub gap_pct: f64,
}

/// Paired comparison of the reference method against one competitor.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dgp: DgpKind,
    pub lambda: f64,
    pub method: String,
    pub n_pairs: usize,
    /// Median of reference minus competitor.
    pub median_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub p_holm: f64,
    pub r_rb: f64,
    pub win_rate: f64,
}

type Setting = (DgpKind, String);

/// Groups ok rows by setting, keeping methods in order of first appearance.
fn grouped(rows: &[ResultRow]) -> BTreeMap<Setting, (f64, Vec<(String, BTreeMap<usize, f64>, usize)>)> {
    let mut out: BTreeMap<Setting, (f64, Vec<(String, BTreeMap<usize, f64>, usize)>)> = BTreeMap::new();
    for r in rows {
        let entry = out.entry((r.dgp, lambda_label(r.lambda))).or_insert_with(|| (r.lambda, Vec::new()));
        let pos = match entry.1.iter().position(|m| m.0 == r.method) {
            Some(p) => p,
            None => {
                entry.1.push((r.method.clone(), BTreeMap::new(), 0));
                entry.1.len() - 1
            }
        };
        if r.is_ok() && r.oracle_j.is_finite() {
            entry.1[pos].1.insert(r.rep, r.oracle_j);
        } else {
            entry.1[pos].2 += 1;
        }
    }
    out
}

/// Medians, spreads and gaps to `reference` for every method and setting.
pub fn method_summaries(rows: &[ResultRow], reference: &str) -> Result<Vec<MethodSummary>> {
    let mut out = Vec::new();
    for ((dgp, _), (lambda, methods)) in grouped(rows) {
        let ref_median = methods
            .iter()
            .find(|m| m.0 == reference)
            .and_then(|m| median(&m.1.values().copied().collect::<Vec<_>>()).ok());
        for (method, js, failed) in methods {
            let values: Vec<f64> = js.values().copied().collect();
            let Ok(summary) = summarize(&values) else { continue };
            let gap_pct = match ref_median {
                Some(r) => 100.0 * (summary.median - r) / r,
                None => f64::NAN,
            };
            out.push(MethodSummary { dgp, lambda, method, n_failed: failed, summary, gap_pct });
        }
    }
    Ok(out)
}

/// One-sided signed-rank tests of `reference < competitor`, Holm-adjusted
/// within each setting, with bootstrap intervals of the median difference.
pub fn comparisons(rows: &[ResultRow], reference: &str, bootstrap_reps: usize) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for ((dgp, lam), (lambda, methods)) in grouped(rows) {
        let Some(reference_js) = methods.iter().find(|m| m.0 == reference).map(|m| m.1.clone()) else {
            continue;
        };
        let mut block = Vec::new();
        for (method, js, _) in methods.iter().filter(|m| m.0 != reference) {
            let diffs: Vec<f64> = reference_js.iter().filter_map(|(rep, a)| js.get(rep).map(|b| a - b)).collect();
            if diffs.is_empty() {
                continue;
            }
            let w = wilcoxon_signed_rank(&diffs, Alternative::Less)?;
            let mut rng = stream(derive_seed(0, &[dgp.label(), &lam, method, "bootstrap"]));
            let (ci_low, ci_high) = bootstrap_ci(&diffs, Statistic::Median, bootstrap_reps, 0.95, &mut rng)?;
            block.push(Comparison {
                dgp,
                lambda,
                method: method.clone(),
                n_pairs: diffs.len(),
                median_diff: median(&diffs)?,
                ci_low,
                ci_high,
                p_value: w.p_value,
                p_holm: f64::NAN,
                r_rb: rank_biserial(&diffs).r,
                win_rate: win_rate(&diffs)?,
            });
        }
        let adjusted = holm_adjust(&block.iter().map(|c| c.p_value).collect::<Vec<_>>())?;
        for (c, p) in block.iter_mut().zip(adjusted) {
            c.p_holm = p;
        }
        out.extend(block);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub dgp: DgpKind,
    pub lambda: f64,
    pub variant: String,
    pub median: f64,
    pub sd: f64,
    pub gap_pct: f64,
    /// SD of the variant over the SD of the full method.
    pub sigma_ratio: f64,
}

pub fn ablation_summary(rows: &[ResultRow], full: &str) -> Result<Vec<AblationRow>> {
    let sums = method_summaries(rows, full)?;
    let mut out = Vec::new();
    for s in &sums {
        let full_sd =
            sums.iter().find(|f| f.dgp == s.dgp && f.lambda == s.lambda && f.method == full).map(|f| f.summary.sd);
        out.push(AblationRow {
            dgp: s.dgp,
            lambda: s.lambda,
            variant: s.method.clone(),
            median: s.summary.median,
            sd: s.summary.sd,
            gap_pct: s.gap_pct,
            sigma_ratio: full_sd.map_or(f64::NAN, |f| s.summary.sd / f),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub dgp: DgpKind,
    pub param: String,
    pub value: f64,
    pub j_med: f64,
    pub j_sd: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Rows labelled `acfs@param=value`, one summary per grid point.
pub fn sensitivity_summary(rows: &[ResultRow]) -> Result<Vec<SensitivityRow>> {
    let mut groups: Vec<((DgpKind, String, f64), Vec<f64>)> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let Some(setting) = r.method.strip_prefix("acfs@") else { continue };
        let (param, value) =
            setting.split_once('=').ok_or_else(|| Error::Results(format!("bad sensitivity label {:?}", r.method)))?;
        let value: f64 =
            value.parse().map_err(|_| Error::Results(format!("bad sensitivity value in {:?}", r.method)))?;
        let key = (r.dgp, param.to_string(), value);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r.oracle_j),
            None => groups.push((key, vec![r.oracle_j])),
        }
    }
    groups
        .into_iter()
        .map(|((dgp, param, value), js)| {
            let s = summarize(&js)?;
            Ok(SensitivityRow { dgp, param, value, j_med: s.median, j_sd: s.sd, q25: s.q25, q75: s.q75 })
        })
        .collect()
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes the summary tables for a results file next to it and returns
/// their paths and a plain-text rendering.
pub fn write_summaries(results: &Path, reference: &str, bootstrap_reps: usize) -> Result<(Vec<PathBuf>, String)> {
    let rows = super::read_results(results)?;
    let dir = results.parent().unwrap_or(Path::new("."));
    let stem = results.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let mut paths = Vec::new();
    let mut text = String::new();

    let sums = method_summaries(&rows, reference)?;
    let p = dir.join(format!("{stem}_summary.csv"));
    write_table(
        &p,
        &["dgp", "lambda", "method", "n", "failed", "J_median", "J_sd", "J_q25", "J_q75", "gap_pct"],
        sums.iter()
            .map(|s| {
                vec![
                    s.dgp.to_string(),
                    lambda_label(s.lambda),
                    s.method.clone(),
                    s.summary.n.to_string(),
                    s.n_failed.to_string(),
                    f(s.summary.median),
                    f(s.summary.sd),
                    f(s.summary.q25),
                    f(s.summary.q75),
                    format!("{:.2}", s.gap_pct),
                ]
            })
            .collect(),
    )?;
    paths.push(p);
    let _ = writeln!(
        text,
        "{:<6} {:>6} {:<22} {:>4} {:>14} {:>12} {:>14} {:>8}",
        "dgp", "lambda", "method", "n", "J_median", "J_sd", "IQR", "gap%"
    );
    for s in &sums {
        let _ = writeln!(
            text,
            "{:<6} {:>6} {:<22} {:>4} {:>14.2} {:>12.2} {:>14.2} {:>8.2}",
            s.dgp.to_string(),
            lambda_label(s.lambda),
            s.method,
            s.summary.n,
            s.summary.median,
            s.summary.sd,
            s.summary.iqr(),
            s.gap_pct
        );
    }

    let comps = comparisons(&rows, reference, bootstrap_reps)?;
    if !comps.is_empty() {
        let p = dir.join(format!("{stem}_tests.csv"));
        write_table(
            &p,
            &[
                "dgp",
                "lambda",
                "method",
                "n_pairs",
                "median_diff",
                "ci_low",
                "ci_high",
                "p_value",
                "p_holm",
                "r_rb",
                "r_rb_abs",
                "win_rate",
            ],
            comps
                .iter()
                .map(|c| {
                    vec![
                        c.dgp.to_string(),
                        lambda_label(c.lambda),
                        c.method.clone(),
                        c.n_pairs.to_string(),
                        f(c.median_diff),
                        f(c.ci_low),
                        f(c.ci_high),
                        format!("{:.6e}", c.p_value),
                        format!("{:.6e}", c.p_holm),
                        format!("{:.4}", c.r_rb),
                        format!("{:.4}", c.r_rb.abs()),
                        format!("{:.4}", c.win_rate),
                    ]
                })
                .collect(),
        )?;
        paths.push(p);
        let _ = writeln!(
            text,
            "\n{:<6} {:>6} {:<22} {:>12} {:>10} {:>7} {:>6}",
            "dgp", "lambda", "vs", "median_diff", "p_holm", "r_rb", "win"
        );
        for c in &comps {
            let _ = writeln!(
                text,
                "{:<6} {:>6} {:<22} {:>12.2} {:>10.2e} {:>7.3} {:>6.2}",
                c.dgp.to_string(),
                lambda_label(c.lambda),
                c.method,
                c.median_diff,
                c.p_holm,
                c.r_rb.abs(),
                c.win_rate
            );
        }
    }

    if rows.iter().any(|r| r.method.starts_with("acfs-")) {
        let abl = ablation_summary(&rows, reference)?;
        let p = dir.join(format!("{stem}_ablation.csv"));
        write_table(
            &p,
            &["dgp", "lambda", "variant", "J_median", "J_sd", "gap_pct", "sigma_ratio"],
            abl.iter()
                .map(|a| {
                    vec![
                        a.dgp.to_string(),
                        lambda_label(a.lambda),
                        a.variant.clone(),
                        f(a.median),
                        f(a.sd),
                        format!("{:.2}", a.gap_pct),
                        format!("{:.3}", a.sigma_ratio),
                    ]
                })
                .collect(),
        )?;
        paths.push(p);
        let _ = writeln!(text, "\n{:<6} {:<16} {:>8} {:>8}", "dgp", "variant", "gap%", "sigma");
        for a in &abl {
            let _ =
                writeln!(text, "{:<6} {:<16} {:>8.2} {:>8.3}", a.dgp.to_string(), a.variant, a.gap_pct, a.sigma_ratio);
        }
    }

    let sens = sensitivity_summary(&rows)?;
    if !sens.is_empty() {
        let p = dir.join(format!("{stem}_grid.csv"));
        write_table(
            &p,
            &["dgp", "param", "value", "J_med", "J_SD", "Q25", "Q75"],
            sens.iter()
                .map(|s| {
                    vec![
                        s.dgp.to_string(),
                        s.param.clone(),
                        s.value.to_string(),
                        f(s.j_med),
                        f(s.j_sd),
                        f(s.q25),
                        f(s.q75),
                    ]
                })
                .collect(),
        )?;
        paths.push(p);
        let _ = writeln!(
            text,
            "\n{:<6} {:<10} {:>8} {:>14} {:>12} {:>24}",
            "dgp", "param", "value", "J_med", "J_SD", "Q25-Q75"
        );
        for s in &sens {
            let _ = writeln!(
                text,
                "{:<6} {:<10} {:>8} {:>14.2} {:>12.2} {:>24}",
                s.dgp.to_string(),
                s.param,
                s.value,
                s.j_med,
                s.j_sd,
                format!("{:.2}-{:.2}", s.q25, s.q75)
            );
        }
    }
    Ok((paths, text))
}
