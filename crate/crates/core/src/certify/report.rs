//! Text renderings of a certification report.

use super::sweep::{classify, Category, CertRow, CertificationReport, MetricKind, Thresholds};
use crate::error::{Error, Result};
use crate::lwr::Environment;

pub const REPORT_CSV_HEADER: &str = "v_f,raw_loss,npl,category,bound_violation_rate";

/// CSV with `#`-prefixed metadata lines, then one row per environment.
/// Numbers use the shortest representation that round-trips.
pub fn report_csv(report: &CertificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# metric = {}\n", report.metric));
    out.push_str(&format!(
        "# normalization_constant = {}\n",
        report.normalization_constant
    ));
    out.push_str(&format!("# training_v_f = {}\n", report.training_env.v_f()));
    out.push_str(&format!("# rho_m = {}\n", report.training_env.rho_m()));
    out.push_str(&format!(
        "# thresholds = {},{}\n",
        report.thresholds.reuse_max(),
        report.thresholds.refine_max()
    ));
    out.push_str(REPORT_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.env.v_f(),
            r.raw_loss,
            r.npl,
            r.category,
            r.bound_violation_rate
        ));
    }
    out
}

fn npl_cell(npl: f64) -> String {
    if npl < 1e4 {
        format!("{npl:.2}")
    } else {
        format!("{npl:.2e}")
    }
}

/// Environments as columns with an NPL row and a category row.
pub fn report_table(report: &CertificationReport) -> String {
    let head: Vec<String> = report.rows.iter().map(|r| format!("{}", r.env.v_f())).collect();
    let npl: Vec<String> = report.rows.iter().map(|r| npl_cell(r.npl)).collect();
    let cat: Vec<String> = report.rows.iter().map(|r| r.category.to_string()).collect();
    let width = head.iter().chain(&npl).map(String::len).max().unwrap_or(1);
    let line = |label: &str, cells: &[String]| {
        let mut s = format!("{label:<12}");
        for c in cells {
            s.push_str(&format!(" | {c:>width$}"));
        }
        s.push('\n');
        s
    };
    let mut out = String::new();
    out.push_str(&format!(
        "Certification ({}, training v_f = {}, constant = {})\n",
        report.metric,
        report.training_env.v_f(),
        report.normalization_constant
    ));
    out.push_str(&line("v_f (m/s)", &head));
    out.push_str(&line("NPL", &npl));
    out.push_str(&line("Category", &cat));
    out
}

/// Parses [`report_csv`] output back into a report.
pub fn parse_report_csv(text: &str) -> Result<CertificationReport> {
    let err = |line: usize, reason: String| Error::Config { line, reason };
    let mut metric = None;
    let mut constant = None;
    let mut training_v_f = None;
    let mut rho_m = None;
    let mut thresholds = None;
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("malformed comment {line:?}")))?;
            let value = value.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(line_no, format!("{v:?}: {e}")));
            match key.trim() {
                "metric" => metric = Some(value.parse::<MetricKind>().map_err(|e| err(line_no, e))?),
                "normalization_constant" => constant = Some(num(value)?),
                "training_v_f" => training_v_f = Some(num(value)?),
                "rho_m" => rho_m = Some(num(value)?),
                "thresholds" => {
                    let (a, b) = value
                        .split_once(',')
                        .ok_or_else(|| err(line_no, "thresholds need two values".into()))?;
                    thresholds = Some(Thresholds::new(num(a)?, num(b)?).map_err(|e| err(line_no, e.to_string()))?);
                }
                _ => {}
            }
            continue;
        }
        if !seen_header {
            if line != REPORT_CSV_HEADER {
                return Err(err(line_no, format!("expected header {REPORT_CSV_HEADER:?}")));
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(err(line_no, format!("expected 5 columns, got {}", cells.len())));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|e| err(line_no, format!("{v:?}: {e}")));
        let category = cells[3]
            .chars()
            .next()
            .and_then(Category::from_letter)
            .filter(|_| cells[3].len() == 1)
            .ok_or_else(|| err(line_no, format!("unknown category {:?}", cells[3])))?;
        rows.push((
            num(cells[0])?,
            num(cells[1])?,
            num(cells[2])?,
            category,
            num(cells[4])?,
            line_no,
        ));
    }
    let missing = |what: &str| err(0, format!("report lacks {what}"));
    let rho_m = rho_m.ok_or_else(|| missing("rho_m"))?;
    let training_env = Environment::new(training_v_f.ok_or_else(|| missing("training_v_f"))?, rho_m)
        .map_err(|e| err(0, e.to_string()))?;
    let thresholds = thresholds.ok_or_else(|| missing("thresholds"))?;
    let rows = rows
        .into_iter()
        .map(|(v_f, raw_loss, npl, category, bvr, line_no)| {
            let env = Environment::new(v_f, rho_m).map_err(|e| err(line_no, e.to_string()))?;
            if classify(npl, &thresholds).ok() != Some(category) {
                return Err(err(line_no, format!("category {category} disagrees with NPL {npl}")));
            }
            Ok(CertRow {
                env,
                raw_loss,
                npl,
                category,
                bound_violation_rate: bvr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(missing("rows"));
    }
    Ok(CertificationReport {
        training_env,
        metric: metric.ok_or_else(|| missing("metric"))?,
        normalization_constant: constant.ok_or_else(|| missing("normalization_constant"))?,
        rows,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CertificationReport {
        let t = Thresholds::default();
        let env = Environment::paper();
        let rows = [
            (5.0, 0.08, 6.4),
            (10.0, 0.04625, 3.7),
            (25.0, 0.01, 0.8),
            (45.0, 0.1175, 9.4),
        ]
        .iter()
        .map(|&(v, raw_loss, npl)| CertRow {
            env: env.with_v_f(v).unwrap(),
            raw_loss,
            npl,
            category: classify(npl, &t).unwrap(),
            bound_violation_rate: if v == 45.0 { 0.001 } else { 0.0 },
        })
        .collect();
        CertificationReport {
            training_env: env,
            metric: MetricKind::DataMismatch,
            normalization_constant: 0.0125,
            rows,
            thresholds: t,
        }
    }

    #[test]
    fn csv_layout() {
        let csv = report_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# metric = data_mismatch");
        assert_eq!(lines[1], "# normalization_constant = 0.0125");
        assert_eq!(lines[5], REPORT_CSV_HEADER);
        assert_eq!(lines[6], "5,0.08,6.4,D,0");
        assert_eq!(lines[8], "25,0.01,0.8,C,0");
        assert_eq!(lines[9], "45,0.1175,9.4,D,0.001");
    }

    #[test]
    fn csv_roundtrip() {
        let r = sample();
        assert_eq!(parse_report_csv(&report_csv(&r)).unwrap(), r);
    }

    #[test]
    fn csv_parse_rejects_inconsistent_rows() {
        let csv = report_csv(&sample()).replace("6.4,D", "6.4,C");
        assert!(parse_report_csv(&csv).is_err());
        assert!(parse_report_csv("v_f,npl\n").is_err());
        let only_header: String = report_csv(&sample())
            .lines()
            .take(6)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(parse_report_csv(&only_header).is_err());
    }

    #[test]
    fn table_layout() {
        let t = report_table(&sample());
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("v_f (m/s)"));
        assert!(lines[2].contains("6.40") && lines[2].contains("0.80"));
        assert_eq!(
            lines[3].split('|').map(str::trim).collect::<Vec<_>>(),
            vec!["Category", "D", "R", "C", "D"]
        );
    }
}
