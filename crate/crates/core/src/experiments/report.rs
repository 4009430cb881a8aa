//! Tables and plots for replicated runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ModelKind, OracleRow, RunRow};
use crate::error::invalid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub distortion: String,
    pub model: ModelKind,
    pub n: usize,
    pub mean: f64,
    pub p15: f64,
    pub p85: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and 15/85 percent quantiles per (distortion, model, N), ignoring
/// failed replications.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, usize), (ModelKind, Vec<f64>, usize)> = BTreeMap::new();
    for r in rows {
        let key = (r.distortion.clone(), r.model as usize, r.n);
        let g = groups.entry(key).or_insert((r.model, Vec::new(), 0));
        match r.risk {
            Some(v) => g.1.push(v),
            None => g.2 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((distortion, _, n), (model, mut v, failures))| {
            v.sort_by(f64::total_cmp);
            let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            SummaryRow {
                distortion,
                model,
                n,
                mean,
                p15: quantile(&v, 0.15),
                p85: quantile(&v, 0.85),
                successes: v.len(),
                failures,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(rows: &[RunRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "N", "rep", "distortion", "risk", "se", "seconds", "iterations", "converged", "alpha", "error"])?;
    for r in rows {
        let alpha = r.alpha.iter().map(|a| format!("{a:.6}")).collect::<Vec<_>>().join(" ");
        out.write_record([
            r.model.name().to_string(),
            r.n.to_string(),
            r.rep.to_string(),
            r.distortion.clone(),
            opt(r.risk),
            opt(r.se),
            r.seconds.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
            alpha,
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["distortion", "model", "N", "mean", "p15", "p85", "successes", "failures"])?;
    for r in rows {
        out.write_record([
            r.distortion.clone(),
            r.model.name().to_string(),
            r.n.to_string(),
            r.mean.to_string(),
            r.p15.to_string(),
            r.p85.to_string(),
            r.successes.to_string(),
            r.failures.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Invalid(format!("bad {what} '{field}' in results CSV")))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what).map(Some)
    }
}

/// Reads a file written by [`write_results_csv`].
pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<RunRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 11 {
            return invalid(format!("results CSV row has {} fields, expected 11", rec.len()));
        }
        let alpha = rec[9]
            .split_whitespace()
            .map(|a| parse(a, "alpha"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RunRow {
            model: rec[0].parse()?,
            n: parse(&rec[1], "N")?,
            rep: parse(&rec[2], "rep")?,
            distortion: rec[3].to_string(),
            risk: parse_opt(&rec[4], "risk")?,
            se: parse_opt(&rec[5], "se")?,
            seconds: parse(&rec[6], "seconds")?,
            iterations: parse(&rec[7], "iterations")?,
            converged: parse(&rec[8], "converged")?,
            alpha,
            error: (!rec[10].is_empty()).then(|| rec[10].to_string()),
        });
    }
    Ok(rows)
}

const COLORS: [&str; 5] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd"];

/// One panel per distortion: mean risk against N with a 15-85 percent band
/// per model, and the oracle optimum as a dashed line.
pub fn write_svg(summary: &[SummaryRow], oracle: &[OracleRow]) -> String {
    let mut hs: Vec<&str> = summary.iter().map(|r| r.distortion.as_str()).collect();
    hs.dedup();
    let (pw, ph, pad) = (420.0, 300.0, 50.0);
    let width = pw * hs.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="11">"#,
        ph + 40.0
    );
    for (pi, h) in hs.iter().enumerate() {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.distortion == *h && r.mean.is_finite()).collect();
        let orc = oracle.iter().find(|o| o.distortion == *h).map(|o| o.value);
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let (nlo, nhi) = ns.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &n| (a.min(n), b.max(n)));
        let mut ylo = rows.iter().map(|r| r.p15).fold(f64::INFINITY, f64::min);
        let mut yhi = rows.iter().map(|r| r.p85).fold(f64::NEG_INFINITY, f64::max);
        if let Some(o) = orc {
            ylo = ylo.min(o);
            yhi = yhi.max(o);
        }
        if !(ylo.is_finite() && yhi.is_finite()) {
            continue;
        }
        let span = (yhi - ylo).max(1e-9);
        let (ylo, yhi) = (ylo - 0.05 * span, yhi + 0.05 * span);
        let x0 = pi as f64 * pw;
        let sx = |n: f64| {
            let t = if nhi > nlo { (n - nlo) / (nhi - nlo) } else { 0.5 };
            x0 + pad + t * (pw - 2.0 * pad)
        };
        let sy = |v: f64| 20.0 + (1.0 - (v - ylo) / (yhi - ylo)) * (ph - pad);
        let _ = writeln!(s, r#"<text x="{}" y="14" text-anchor="middle">h = {h}</text>"#, x0 + pw / 2.0);
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="20" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x0 + pad,
            pw - 2.0 * pad,
            ph - pad
        );
        for v in [ylo, (ylo + yhi) / 2.0, yhi] {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, x0 + pad - 4.0, sy(v) + 4.0);
        }
        let mut nset = ns.clone();
        nset.sort_by(f64::total_cmp);
        nset.dedup();
        for &n in &nset {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{n}</text>"#, sx(n), ph - pad + 34.0);
        }
        if let Some(o) = orc {
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-dasharray="4 3"/>"#,
                x0 + pad,
                x0 + pw - pad,
                y = sy(o)
            );
        }
        for (mi, m) in ModelKind::ALL.iter().enumerate() {
            let mr: Vec<&&SummaryRow> = rows.iter().filter(|r| r.model == *m).collect();
            if mr.is_empty() {
                continue;
            }
            let c = COLORS[mi];
            let upper: Vec<String> = mr.iter().map(|r| format!("{},{}", sx(r.n as f64), sy(r.p85))).collect();
            let lower: Vec<String> = mr.iter().rev().map(|r| format!("{},{}", sx(r.n as f64), sy(r.p15))).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.15" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            );
            let line: Vec<String> = mr.iter().map(|r| format!("{},{}", sx(r.n as f64), sy(r.mean))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, line.join(" "));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{c}">{}</text>"#,
                x0 + pw - pad - 60.0,
                32.0 + 13.0 * mi as f64,
                m.name()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
