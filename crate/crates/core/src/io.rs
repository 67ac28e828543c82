//! File formats: Q-matrix, responses, and truth CSVs; partition, zeta, and
//! classification exports.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{Decision, MasteryBounds, ZetaReport};
use crate::error::{Error, Result};
use crate::model::ResponseMatrix;
use crate::qspace::{Partition, Profile, QMatrix};

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a CSV of `0`/`1` cells, checking that every row has the same width.
/// Lines and columns in errors are 1-based.
pub fn parse_binary_csv(text: &str, source: &str, header: bool) -> Result<Vec<Vec<u8>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(source, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(parse_error(
                source,
                line,
                record.len().min(expected) + 1,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(k, cell)| match cell {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(parse_error(source, line, k + 1, format!("expected 0 or 1, found {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(source, 1, 1, "no data rows".into()));
    }
    Ok(rows)
}

fn parse_error(source: &str, line: usize, column: usize, message: String) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        column,
        message,
    }
}

pub fn parse_q_csv(text: &str, source: &str, header: bool) -> Result<QMatrix> {
    let rows = parse_binary_csv(text, source, header)?;
    if let Some(j) = rows.iter().position(|r| r.iter().all(|&v| v == 0)) {
        let line = j + 1 + usize::from(header);
        return Err(parse_error(source, line, 1, "item requires no attribute".into()));
    }
    QMatrix::new(&rows)
}

pub fn read_q_csv(path: &Path, header: bool) -> Result<QMatrix> {
    parse_q_csv(&read_text(path)?, &source_name(path), header)
}

pub fn read_responses_csv(path: &Path, header: bool) -> Result<ResponseMatrix> {
    let rows = parse_binary_csv(&read_text(path)?, &source_name(path), header)?;
    ResponseMatrix::new(&rows)
}

/// Truth profiles: either `K` 0/1 columns or a single bit-string column.
pub fn parse_truth_csv(text: &str, source: &str, header: bool) -> Result<Vec<Profile>> {
    let first = text
        .lines()
        .skip(usize::from(header))
        .find(|l| !l.trim().is_empty())
        .unwrap_or("");
    if first.contains(',') {
        let rows = parse_binary_csv(text, source, header)?;
        return Ok(rows
            .iter()
            .map(|r| Profile::from_bools(&r.iter().map(|&v| v == 1).collect::<Vec<_>>()))
            .collect());
    }
    let mut out = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate().skip(usize::from(header)) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let p: Profile = line
            .parse()
            .map_err(|e: Error| parse_error(source, i + 1, 1, e.to_string()))?;
        if *width.get_or_insert(p.len()) != p.len() {
            return Err(parse_error(source, i + 1, 1, "profile length differs from earlier rows".into()));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(parse_error(source, 1, 1, "no data rows".into()));
    }
    Ok(out)
}

pub fn read_truth_csv(path: &Path, header: bool) -> Result<Vec<Profile>> {
    parse_truth_csv(&read_text(path)?, &source_name(path), header)
}

fn write_rows<W: Write, I, R>(rows: I, mut out: W) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[u8]>,
{
    for row in rows {
        let line: Vec<&str> = row.as_ref().iter().map(|&v| if v == 1 { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_q_csv<W: Write>(q: &QMatrix, out: W) -> Result<()> {
    write_rows(q.to_rows(), out)
}

pub fn write_responses_csv<W: Write>(data: &ResponseMatrix, out: W) -> Result<()> {
    write_rows(data.rows(), out)
}

pub fn write_truth_csv<W: Write>(profiles: &[Profile], out: W) -> Result<()> {
    write_rows(
        profiles
            .iter()
            .map(|p| p.to_bools().into_iter().map(u8::from).collect::<Vec<u8>>()),
        out,
    )
}

/// JSON record of one equivalence class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub min_rep: String,
    pub members: Vec<String>,
    pub ideal: String,
    pub delta: String,
}

pub fn partition_records(partition: &Partition) -> Vec<ClassRecord> {
    partition
        .classes
        .iter()
        .map(|c| ClassRecord {
            min_rep: c.minimal_representative.to_string(),
            members: c.members.iter().map(|m| m.to_string()).collect(),
            ideal: c.ideal.to_string(),
            delta: c.delta_string(),
        })
        .collect()
}

pub fn partition_json(partition: &Partition) -> Result<String> {
    Ok(serde_json::to_string_pretty(&partition_records(partition))?)
}

/// Text table of classes with sizes, ideal responses, and delta vectors.
/// With `nu`, adds a proportion column.
pub fn partition_table(partition: &Partition, nu: Option<&[f64]>) -> String {
    let k = partition.n_attributes();
    let j = partition.classes.first().map_or(0, |c| c.ideal.len());
    let wk = (k + 2).max(7);
    let wj = j.max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<wk$}  {:>4}  {:<wj$}  {:<wd$}", "class", "size", "ideal", "delta", wd = k.max(5));
    if nu.is_some() {
        out.push_str("    nu");
    }
    out.push('\n');
    for (i, c) in partition.classes.iter().enumerate() {
        let _ = write!(
            out,
            "{:<wk$}  {:>4}  {:<wj$}  {:<wd$}",
            format!("[{}]", c.minimal_representative),
            c.size(),
            c.ideal.to_string(),
            c.delta_string(),
            wd = k.max(5)
        );
        if let Some(nu) = nu {
            let _ = write!(out, "  {:>4.2}", nu[i]);
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "{} classes, {} singletons, {} profiles",
        partition.len(),
        partition.singletons(),
        1usize << k
    );
    out.lines().map(|l| format!("{}\n", l.trim_end())).collect()
}

pub fn zeta_json(report: &ZetaReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&report.to_map())?)
}

/// One row per respondent: id, then per attribute the decision symbol and
/// the bounds to 4 decimals.
pub fn write_classification_csv<W: Write>(
    decisions: &[Vec<Decision>],
    bounds: &[MasteryBounds],
    mut out: W,
) -> Result<()> {
    let k = decisions.first().map_or(0, |d| d.len());
    let mut head = vec!["id".to_string()];
    for a in 1..=k {
        head.push(format!("a{a}"));
        head.push(format!("a{a}_pmin"));
        head.push(format!("a{a}_pmax"));
    }
    writeln!(out, "{}", head.join(","))?;
    for (i, (d, b)) in decisions.iter().zip(bounds).enumerate() {
        let mut line = format!("{}", i + 1);
        for ((d, lo), hi) in d.iter().zip(&b.p_min).zip(&b.p_max) {
            let _ = write!(line, ",{},{lo:.4},{hi:.4}", d.symbol());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
