//! CSV persistence of report rows and the plain-text summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use pcrobust_core::metrics::report::{ReportRow, CLEAN_NAME, ROW_CELL, ROW_MEAN};
use pcrobust_core::CorruptionKind;

use crate::error::{usage, CliResult};
use crate::fsutil;

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(pcrobust_core::metrics::report::CSV_HEADER)
        .map_err(|e| usage(format!("csv: {e}")))?;
    for r in rows {
        w.serialize(r).map_err(|e| usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    fsutil::write(path, &bytes)
}

pub fn read_csv(path: &Path) -> CliResult<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| usage(format!("{}: {e}", path.display()))))
        .collect()
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Corruptions in canonical order, unknown names last.
fn corruption_order(rows: &[ReportRow]) -> Vec<String> {
    let present: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.row_type == ROW_CELL && r.corruption != CLEAN_NAME)
        .map(|r| r.corruption.as_str())
        .collect();
    let mut out: Vec<String> = CorruptionKind::ALL
        .iter()
        .map(|k| k.name())
        .filter(|n| present.contains(n))
        .map(String::from)
        .collect();
    out.extend(
        present
            .iter()
            .filter(|n| n.parse::<CorruptionKind>().is_err())
            .map(|n| n.to_string()),
    );
    out
}

fn table(header: &[String], body: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0usize; cols];
    for row in std::iter::once(header).chain(body.iter().map(|r| r.as_slice())) {
        for (i, c) in row.iter().enumerate() {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |row: &[String]| {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        cells.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for r in body {
        out.push_str(&line(r));
    }
    out
}

/// Mean over severities 1..=5 of `field` for one (detector, class, corruption).
fn severity_mean(rows: &[ReportRow], det: &str, class: &str, corruption: &str, field: fn(&ReportRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| {
            r.row_type == ROW_CELL
                && r.detector == det
                && r.class == class
                && r.corruption == corruption
                && r.severity.is_some_and(|s| s >= 1)
        })
        .filter_map(field)
        .collect();
    mean(&v)
}

/// CE per corruption with detectors as columns (lowest marked `*`), then
/// OA, per-detector bug rates and mCR. Percentages with two decimals.
pub fn render_tables(rows: &[ReportRow]) -> String {
    let detectors: Vec<String> = rows.iter().map(|r| r.detector.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let classes: Vec<String> = rows.iter().map(|r| r.class.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let corruptions = corruption_order(rows);
    let mut header = vec!["corruption".to_string()];
    header.extend(detectors.iter().cloned());
    if rows.is_empty() {
        return table(&header, &[]);
    }
    let mut out = String::new();
    for class in &classes {
        out.push_str(&format!("CE (%), {class}\n"));
        let mut body = Vec::new();
        for c in &corruptions {
            let vals: Vec<Option<f64>> = detectors.iter().map(|d| severity_mean(rows, d, class, c, |r| r.ce)).collect();
            let best = vals.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            let mut line = vec![c.clone()];
            line.extend(vals.iter().map(|v| match v {
                Some(v) if *v == best => format!("{}*", pct(*v)),
                Some(v) => pct(*v),
                None => "-".into(),
            }));
            body.push(line);
        }
        let means: BTreeMap<&str, &ReportRow> = rows
            .iter()
            .filter(|r| r.row_type == ROW_MEAN && &r.class == class)
            .map(|r| (r.detector.as_str(), r))
            .collect();
        let mut line = vec!["mCE".to_string()];
        line.extend(detectors.iter().map(|d| means.get(d.as_str()).and_then(|r| r.ce).map_or("-".into(), pct)));
        body.push(line);
        out.push_str(&table(&header, &body));
        out.push('\n');

        out.push_str(&format!("OA (%), {class}\n"));
        let mut body = Vec::new();
        let clean_oa = |d: &str| {
            rows.iter()
                .find(|r| r.row_type == ROW_CELL && r.detector == d && &r.class == class && r.corruption == CLEAN_NAME)
                .and_then(|r| r.oa)
        };
        let mut line = vec![CLEAN_NAME.to_string()];
        line.extend(detectors.iter().map(|d| clean_oa(d).map_or("-".into(), pct)));
        body.push(line);
        for c in &corruptions {
            let mut line = vec![c.clone()];
            line.extend(detectors.iter().map(|d| severity_mean(rows, d, class, c, |r| r.oa).map_or("-".into(), pct)));
            body.push(line);
        }
        out.push_str(&table(&header, &body));
        out.push('\n');

        for d in &detectors {
            out.push_str(&format!("Bug rates (%), {d}, {class}\n"));
            let head: Vec<String> = ["corruption", "TD", "FC", "FD", "MD"].map(String::from).to_vec();
            let fields: [fn(&ReportRow) -> Option<f64>; 4] = [|r| r.br_td, |r| r.br_fc, |r| r.br_fd, |r| r.br_md];
            let mut body = Vec::new();
            let clean = rows
                .iter()
                .find(|r| r.row_type == ROW_CELL && &r.detector == d && &r.class == class && r.corruption == CLEAN_NAME);
            let mut line = vec![CLEAN_NAME.to_string()];
            line.extend(fields.iter().map(|f| clean.and_then(f).map_or("-".into(), pct)));
            body.push(line);
            for c in &corruptions {
                let mut line = vec![c.clone()];
                line.extend(fields.iter().map(|f| severity_mean(rows, d, class, c, *f).map_or("-".into(), pct)));
                body.push(line);
            }
            out.push_str(&table(&head, &body));
            out.push('\n');
        }

        out.push_str(&format!("mCR (%), {class}\n"));
        let head: Vec<String> = ["detector", "FC", "FD", "MD"].map(String::from).to_vec();
        let body: Vec<Vec<String>> = detectors
            .iter()
            .map(|d| {
                let m = means.get(d.as_str());
                let f = |g: fn(&ReportRow) -> Option<f64>| m.and_then(|r| g(r)).map_or("-".into(), pct);
                vec![d.clone(), f(|r| r.cr_fc), f(|r| r.cr_fd), f(|r| r.cr_md)]
            })
            .collect();
        out.push_str(&table(&head, &body));
        out.push('\n');
    }
    out
}

/// Concatenates the rows of several CSVs and renders them.
pub fn cmd_report(inputs: &[std::path::PathBuf], output: Option<&Path>) -> CliResult<String> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_csv(p)?);
    }
    let text = render_tables(&rows);
    if let Some(out) = output {
        fsutil::write(out, text.as_bytes())?;
    }
    Ok(text)
}
