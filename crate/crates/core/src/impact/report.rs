//! Markdown summary, CSV exports and SVG plots of an [`ImpactReport`].

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::analysis::ImpactReport;
use super::lmm::LmmFit;
use super::series::{SeriesResult, StratumResult};
use super::success::SuccessBreakdown;
use super::ttest::TTestResult;
use crate::error::{Error, Result};
use crate::io::{create, fmt_f64, CsvOut};

pub const TABLE1_ROWS: [&str; 10] = [
    "T-test: days with significant effect",
    "T-test: largest effect",
    "T-test: largest statistical power",
    "T-test: average effect",
    "T-test: average statistical power",
    "LMM: nudged that week",
    "LMM: baseline expenditure",
    "Bandit: assigned to nudge",
    "Bandit: majority assigned to nudge",
    "Successful recommendations",
];

pub const LMM_COLUMNS: [&str; 3] = ["Coef.", "Std.Err.", "p-value"];

fn pct(x: f64) -> String {
    let s = format!("{:.1}", 100.0 * x);
    format!("{}%", s.strip_suffix(".0").unwrap_or(&s))
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn short(arm: &str) -> &str {
    arm.get(..3).unwrap_or(arm)
}

/// Coefficient of a term, or the per-arm variants as `a per / b ran`.
fn lmm_cell(fit: Option<&LmmFit>, term: &str) -> String {
    let Some(fit) = fit else { return "-".into() };
    if let Some(c) = fit.coef(term) {
        return format!("{c:.2}");
    }
    let prefix = format!("{term} (");
    let parts: Vec<String> = fit
        .terms
        .iter()
        .zip(&fit.coefficients)
        .filter_map(|(t, c)| t.strip_prefix(&prefix).and_then(|r| r.strip_suffix(')')).map(|arm| format!("{c:.2} {}", short(arm))))
        .collect();
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(" / ")
    }
}

fn success_cell(s: &SuccessBreakdown) -> String {
    let overall = pct(s.overall_success_rate());
    if s.by_arm.len() < 2 {
        return overall;
    }
    let arms: Vec<String> = s.by_arm.iter().map(|(a, x)| format!("{} {}", pct(x.success_rate), short(a))).collect();
    format!("{overall} ({})", arms.join(" / "))
}

/// The impact table with one column per intervention group.
pub fn table1_markdown(r: &ImpactReport) -> String {
    let groups: Vec<&String> = r.ttests.keys().collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let series = |f: &dyn Fn(&SeriesResult) -> String| groups.iter().map(|g| f(&r.ttests[*g])).collect::<Vec<_>>();
    rows.push(series(&|s| pct(s.summary.pct_significant_days)));
    rows.push(series(&|s| num(s.summary.largest_effect)));
    rows.push(series(&|s| num(s.summary.largest_power)));
    rows.push(series(&|s| num(s.summary.average_effect)));
    rows.push(series(&|s| num(s.summary.average_power)));
    let fit = r.lmm.as_ref().map(|e| &e.fit);
    let first_only = |v: String| {
        let mut row = vec![String::new(); groups.len()];
        row[0] = v;
        row
    };
    rows.push(first_only(lmm_cell(fit, "Nudged that week")));
    rows.push(first_only(lmm_cell(fit, "Baseline expenditure")));
    let (assigned, majority) = match &r.assignment {
        None => ("-".to_string(), "-".to_string()),
        Some(a) => {
            let nudge_arms: Vec<&String> = a.avg_arm_fraction.keys().filter(|k| *k != crate::bandit::CONTROL_ARM).collect();
            if nudge_arms.len() > 1 {
                let f = nudge_arms.iter().map(|k| format!("{} {}", pct(a.avg_arm_fraction[*k]), short(k))).collect::<Vec<_>>();
                let m = nudge_arms.iter().map(|k| format!("{} {}", a.arm_majority_label(k), short(k))).collect::<Vec<_>>();
                (f.join(" / "), m.join(" / "))
            } else {
                (pct(a.avg_fraction_nudged), a.majority_label())
            }
        }
    };
    let adaptive_col = |v: String| {
        groups.iter().map(|g| if g.as_str() == "adaptive" { v.clone() } else { String::new() }).collect::<Vec<_>>()
    };
    rows.push(adaptive_col(assigned));
    rows.push(adaptive_col(majority));
    rows.push(groups.iter().map(|g| r.success.get(*g).map_or_else(|| "-".to_string(), success_cell)).collect());

    let mut out = String::new();
    let _ = writeln!(out, "| Metric | {} |", groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(groups.len()));
    for (label, cells) in TABLE1_ROWS.iter().zip(rows) {
        let _ = writeln!(out, "| {label} | {} |", cells.join(" | "));
    }
    out
}

pub fn lmm_markdown(fit: &LmmFit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| | {} |", LMM_COLUMNS.join(" | "));
    let _ = writeln!(out, "|---|---|---|---|");
    for k in 0..fit.terms.len() {
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} |",
            fit.terms[k], fit.coefficients[k], fit.standard_errors[k], fit.p_values[k]
        );
    }
    out
}

pub fn success_markdown(s: &SuccessBreakdown) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Scope | Interaction | Messages | Successes | Share of successes | Success rate |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    let scopes = std::iter::once(("all", &s.overall)).chain(s.by_arm.iter().map(|(a, x)| (a.as_str(), x)));
    for (scope, sum) in scopes {
        for i in &sum.by_interaction {
            let _ = writeln!(
                out,
                "| {scope} | {} | {} | {} | {} | {} |",
                i.interaction.as_str(),
                i.messages,
                i.successes,
                pct(i.share_of_successes),
                pct(i.success_rate)
            );
        }
    }
    out
}

/// Complete markdown summary.
pub fn report_markdown(r: &ImpactReport) -> String {
    let mut out = String::from("# Impact metrics\n\n");
    out.push_str(&table1_markdown(r));
    let _ = writeln!(out, "\nSignificance level: {}\n", r.alpha);
    for (g, strata) in &r.strata {
        let _ = writeln!(out, "## Stratified t-tests ({g})\n");
        for (name, s) in strata {
            match s {
                StratumResult::Tested(x) => {
                    let _ = writeln!(out, "- {name} spenders: {} of days significant", pct(x.summary.pct_significant_days));
                }
                StratumResult::Untestable { n_treatment, n_control } => {
                    let _ = writeln!(out, "- {name} spenders: untestable ({n_treatment} vs {n_control} users)");
                }
            }
        }
        out.push('\n');
    }
    if let Some(e) = &r.lmm {
        out.push_str("## Mixed model, all terms\n\n");
        out.push_str(&lmm_markdown(&e.full));
        out.push_str("\n## Mixed model, significant terms only\n\n");
        out.push_str(&lmm_markdown(&e.fit));
        out.push('\n');
    }
    for (g, s) in &r.success {
        let _ = writeln!(out, "## Recommendation success ({g})\n");
        out.push_str(&success_markdown(s));
        out.push('\n');
    }
    if !r.warnings.is_empty() {
        out.push_str("## Warnings\n\n");
        for w in &r.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

pub const LMM_CSV_HEADER: [&str; 4] = ["term", "coef", "stderr", "pvalue"];

pub fn write_lmm_csv<W: Write>(w: W, label: &str, fit: &LmmFit) -> Result<W> {
    let mut out = CsvOut::new(w, label, &LMM_CSV_HEADER)?;
    for k in 0..fit.terms.len() {
        out.row([
            fit.terms[k].clone(),
            fmt_f64(fit.coefficients[k]),
            fmt_f64(fit.standard_errors[k]),
            fmt_f64(fit.p_values[k]),
        ])?;
    }
    out.finish()
}

pub const SERIES_CSV_HEADER: [&str; 11] = [
    "day",
    "daily_t",
    "daily_p",
    "daily_diff",
    "daily_ci_low",
    "daily_ci_high",
    "accumulated_t",
    "accumulated_p",
    "accumulated_diff",
    "accumulated_ci_low",
    "accumulated_ci_high",
];

fn test_cells(t: Option<&TTestResult>) -> [String; 5] {
    match t {
        None => Default::default(),
        Some(t) => [t.t_stat, t.p_value, t.mean_diff, t.ci_low, t.ci_high].map(fmt_f64),
    }
}

pub fn write_series_csv<W: Write>(w: W, label: &str, s: &SeriesResult) -> Result<W> {
    let mut out = CsvOut::new(w, label, &SERIES_CSV_HEADER)?;
    for d in &s.days {
        let mut row = vec![d.day.to_string()];
        row.extend(test_cells(d.daily.as_ref()));
        row.extend(test_cells(d.accumulated.as_ref()));
        out.row(row)?;
    }
    out.finish()
}

pub const SUCCESS_CSV_HEADER: [&str; 6] = ["scope", "interaction", "messages", "successes", "share_of_successes", "success_rate"];

pub fn write_success_csv<W: Write>(w: W, label: &str, s: &SuccessBreakdown) -> Result<W> {
    let mut out = CsvOut::new(w, label, &SUCCESS_CSV_HEADER)?;
    let scopes = std::iter::once(("all", &s.overall)).chain(s.by_arm.iter().map(|(a, x)| (a.as_str(), x)));
    for (scope, sum) in scopes {
        for i in &sum.by_interaction {
            out.row([
                scope.to_string(),
                i.interaction.as_str().to_string(),
                i.messages.to_string(),
                i.successes.to_string(),
                fmt_f64(i.share_of_successes),
                fmt_f64(i.success_rate),
            ])?;
        }
    }
    out.finish()
}

/// Difference in accumulated means with its confidence band.
pub fn series_svg(s: &SeriesResult, title: &str) -> String {
    let pts: Vec<(f64, f64, f64, f64)> = s
        .days
        .iter()
        .filter_map(|d| d.accumulated.as_ref().map(|t| (d.day as f64, t.mean_diff, t.ci_low, t.ci_high)))
        .collect();
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <text x=\"{pad}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        title.replace('&', "&amp;").replace('<', "&lt;")
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x0, x1) = (pts[0].0, pts[pts.len() - 1].0.max(pts[0].0 + 1.0));
    let lo = pts.iter().map(|p| p.2).fold(0.0, f64::min);
    let hi = pts.iter().map(|p| p.3).fold(0.0, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - lo) / (hi - lo) * (h - 2.0 * pad);
    let band: Vec<String> = pts
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.3)))
        .chain(pts.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2))))
        .collect();
    let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
    let _ = writeln!(svg, "<polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.5\"/>", band.join(" "));
    let _ = writeln!(
        svg,
        "<line x1=\"{pad}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#888\" stroke-dasharray=\"4\"/>",
        sy(0.0),
        w - pad
    );
    let _ = writeln!(svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>", line.join(" "));
    svg.push_str("</svg>\n");
    svg
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?
        .write_all(text.as_bytes())
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes `summary.md`, `report.json`, per-group series CSVs and SVGs, the
/// mixed-model tables and the success breakdowns into `dir`.
pub fn write_report_files(dir: &Path, r: &ImpactReport, svg: bool) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        write_text(&p, &text)?;
        written.push(p);
        Ok(())
    };
    let csv_text = |bytes: Vec<u8>| String::from_utf8(bytes).expect("CSV output is UTF-8");
    emit("summary.md".into(), report_markdown(r))?;
    emit("report.json".into(), serde_json::to_string_pretty(r).expect("report serializes") + "\n")?;
    for (g, s) in &r.ttests {
        emit(format!("ttest_{g}.csv"), csv_text(write_series_csv(Vec::new(), g, s)?))?;
        if svg {
            emit(format!("ttest_{g}.svg"), series_svg(s, &format!("Accumulated expenditure difference, {g} vs pure control")))?;
        }
    }
    if let Some(e) = &r.lmm {
        emit("lmm_full.csv".into(), csv_text(write_lmm_csv(Vec::new(), "lmm_full", &e.full)?))?;
        emit("lmm_reduced.csv".into(), csv_text(write_lmm_csv(Vec::new(), "lmm_reduced", &e.fit)?))?;
    }
    for (g, s) in &r.success {
        emit(format!("success_{g}.csv"), csv_text(write_success_csv(Vec::new(), g, s)?))?;
    }
    Ok(written)
}

pub fn read_report_json(path: &Path) -> Result<ImpactReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_formatting() {
        assert_eq!(pct(0.57), "57%");
        assert_eq!(pct(0.286), "28.6%");
        assert_eq!(pct(0.0), "0%");
        assert_eq!(num(None), "-");
        assert_eq!(num(Some(0.123)), "0.12");
    }

    #[test]
    fn lmm_table_layout() {
        let fit = LmmFit {
            terms: vec!["Nudged that week".into()],
            coefficients: vec![19.744],
            standard_errors: vec![6.555],
            p_values: vec![0.003],
            sigma_u2: 1.0,
            sigma_e2: 1.0,
            gamma: 1.0,
            loglik: 0.0,
            converged: true,
            reml: false,
            n_obs: 10,
            n_groups: 2,
            loglik_trace: vec![],
        };
        let md = lmm_markdown(&fit);
        assert!(md.starts_with("| | Coef. | Std.Err. | p-value |"));
        assert!(md.contains("| Nudged that week | 19.744 | 6.555 | 0.003 |"));
        let csv = String::from_utf8(write_lmm_csv(Vec::new(), "x", &fit).unwrap()).unwrap();
        assert_eq!(csv, "term,coef,stderr,pvalue\nNudged that week,19.744,6.555,0.003\n");
        assert_eq!(lmm_cell(Some(&fit), "Nudged that week"), "19.74");
        assert_eq!(lmm_cell(Some(&fit), "Baseline expenditure"), "-");
    }
}
