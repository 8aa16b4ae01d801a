use super::summary::sensitivity_summary;
use super::{lambda_label, read_results, ResultRow, ABLATION_FILE, RESULTS_FILE, SENSITIVITY_FILE};
use crate::error::{Error, Result};
use crate::scenario::DgpKind;
use crate::stats::{summarize, Summary};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Tick values `m * 10^k` (m in 1, 2, 5) inside `[lo, hi]`, increasing.
/// Falls back to the end points when the range holds fewer than two.
pub fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log axis needs 0 < lo <= hi");
    let mut out = Vec::new();
    let k0 = lo.log10().floor() as i32;
    let k1 = hi.log10().ceil() as i32;
    for k in k0..=k1 {
        for m in [1.0, 2.0, 5.0] {
            let v = m * 10f64.powi(k);
            if v >= lo && v <= hi {
                out.push(v);
            }
        }
    }
    if out.len() < 2 {
        out = vec![lo, hi];
        if lo == hi {
            out.truncate(1);
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if !(1e-2..1e6).contains(&v) {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    s
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn y(&self, v: f64) -> f64 {
        let (a, b, t) = if self.log { (self.lo.ln(), self.hi.ln(), v.ln()) } else { (self.lo, self.hi, v) };
        let frac = if b > a { (t - a) / (b - a) } else { 0.5 };
        HEIGHT - BOTTOM - frac * (HEIGHT - TOP - BOTTOM)
    }

    fn draw(&self, s: &mut String, label: &str) {
        let ticks = if self.log { log_ticks(self.lo, self.hi) } else { linear_ticks(self.lo, self.hi) };
        let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
            HEIGHT - BOTTOM,
            WIDTH - RIGHT
        );
        for t in ticks {
            let y = self.y(t);
            let _ =
                writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT, WIDTH - RIGHT);
            let _ = writeln!(
                s,
                r#"<text class="tick" x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" transform="rotate(-90 18 {0})" text-anchor="middle">{1}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(label)
        );
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn slot_x(i: usize, n: usize) -> f64 {
    let w = (WIDTH - LEFT - RIGHT) / n as f64;
    LEFT + w * (i as f64 + 0.5)
}

/// Box (quartiles and median), whiskers to the furthest points within 1.5
/// IQR, and the remaining points drawn individually, on a log axis.
pub fn boxplot_svg(title: &str, groups: &[(String, Vec<f64>)]) -> Result<String> {
    let groups: Vec<(&String, Vec<f64>, Summary)> = groups
        .iter()
        .filter_map(|(name, v)| {
            let vals: Vec<f64> = v.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
            summarize(&vals).ok().map(|s| (name, vals, s))
        })
        .collect();
    if groups.is_empty() {
        return Err(Error::Results(format!("no positive values to plot for {title}")));
    }
    let lo = groups.iter().flat_map(|g| g.1.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = groups.iter().flat_map(|g| g.1.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let axis = Axis { lo: lo / 1.05, hi: hi * 1.05, log: true };
    let mut s = header(title);
    axis.draw(&mut s, "oracle J (log scale)");
    let n = groups.len();
    let half = ((WIDTH - LEFT - RIGHT) / n as f64 * 0.3).min(30.0);
    for (i, (name, vals, st)) in groups.iter().enumerate() {
        let x = slot_x(i, n);
        let fence_lo = st.q25 - 1.5 * st.iqr();
        let fence_hi = st.q75 + 1.5 * st.iqr();
        let w_lo = vals.iter().copied().filter(|v| *v >= fence_lo).fold(f64::INFINITY, f64::min);
        let w_hi = vals.iter().copied().filter(|v| *v <= fence_hi).fold(f64::NEG_INFINITY, f64::max);
        let _ =
            writeln!(s, r#"<g class="box" data-median="{}" data-q25="{}" data-q75="{}">"#, st.median, st.q25, st.q75);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            axis.y(w_lo),
            axis.y(st.q25)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            axis.y(st.q75),
            axis.y(w_hi)
        );
        let (top, bot) = (axis.y(st.q75), axis.y(st.q25));
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            x - half,
            2.0 * half,
            (bot - top).max(0.5)
        );
        let ym = axis.y(st.median);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ym:.2}" x2="{:.2}" y2="{ym:.2}" stroke="black" stroke-width="2"/>"#,
            x - half,
            x + half
        );
        for v in vals.iter().filter(|v| **v < fence_lo || **v > fence_hi) {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, axis.y(*v));
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Median dots with inter-quartile bars at each grid value.
pub fn sensitivity_svg(title: &str, param: &str, points: &[(f64, f64, f64, f64)]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Results(format!("no grid points for {title}")));
    }
    let lo = points.iter().map(|p| p.2.min(p.1)).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.3.max(p.1)).fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.1).max(hi.abs() * 1e-3).max(1e-9);
    let axis = Axis { lo: lo - pad, hi: hi + pad, log: false };
    let mut s = header(title);
    axis.draw(&mut s, "oracle J");
    let n = points.len();
    for (i, (value, med, q25, q75)) in points.iter().enumerate() {
        let x = slot_x(i, n);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            axis.y(*q25),
            axis.y(*q75)
        );
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="4" fill="black"/>"#, axis.y(*med));
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{value}</text>"#, HEIGHT - BOTTOM + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 16.0,
        escape(param)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn boxes_by_setting(rows: &[ResultRow]) -> Vec<((DgpKind, f64), Vec<(String, Vec<f64>)>)> {
    let mut out: Vec<((DgpKind, f64), Vec<(String, Vec<f64>)>)> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let key = (r.dgp, r.lambda);
        let pos = out.iter().position(|g| g.0 == key).unwrap_or_else(|| {
            out.push((key, Vec::new()));
            out.len() - 1
        });
        let methods = &mut out[pos].1;
        match methods.iter_mut().find(|m| m.0 == r.method) {
            Some(m) => m.1.push(r.oracle_j),
            None => methods.push((r.method.clone(), vec![r.oracle_j])),
        }
    }
    out
}

/// Writes one boxplot per (dgp, lambda) for the main and ablation results
/// and one panel per (dgp, parameter) for the sensitivity grid, whichever
/// files exist in `dir`.
pub fn emit_figures(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (file, prefix) in [(RESULTS_FILE, "box"), (ABLATION_FILE, "ablation")] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let rows = read_results(&path)?;
        for ((dgp, lambda), groups) in boxes_by_setting(&rows) {
            let title = format!("{dgp}, lambda = {}", lambda_label(lambda));
            let out = dir.join(format!("{prefix}_{dgp}_lambda{}.svg", lambda_label(lambda)));
            std::fs::write(&out, boxplot_svg(&title, &groups)?)?;
            written.push(out);
        }
    }
    let path = dir.join(SENSITIVITY_FILE);
    if path.exists() {
        let rows = sensitivity_summary(&read_results(&path)?)?;
        let mut panels: Vec<((DgpKind, String), Vec<(f64, f64, f64, f64)>)> = Vec::new();
        for r in rows {
            let key = (r.dgp, r.param.clone());
            let pt = (r.value, r.j_med, r.q25, r.q75);
            match panels.iter_mut().find(|p| p.0 == key) {
                Some(p) => p.1.push(pt),
                None => panels.push((key, vec![pt])),
            }
        }
        for ((dgp, param), mut pts) in panels {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let out = dir.join(format!("sensitivity_{dgp}_{param}.svg"));
            std::fs::write(&out, sensitivity_svg(&format!("{dgp}: {param}"), &param, &pts)?)?;
            written.push(out);
        }
    }
    if written.is_empty() {
        return Err(Error::Results(format!("no results files in {}", dir.display())));
    }
    Ok(written)
}
