//! Plain-text run reports.
//!
//! A report is a list of sections. Each section starts with a `[name]`
//! header, holds `key = value` fields and may end with one table: an
//! `@columns a b c` line followed by whitespace-separated rows. Sections are
//! separated by blank lines. [`Report::parse`] reads back exactly what
//! [`Report`]'s `Display` writes.

use std::fmt;

use thiserror::Error;

use crate::congest::{RoundStats, TraceEvent};
use crate::graph::{Graph, NodeSet, Rational};
use crate::hkpr::{PhkprVector, VectorKind};
use crate::kmachine::KmBound;
use crate::sweep::{SweepResult, ROUND_BOUND_A, ROUND_BOUND_B};

/// Significant digits of every number in a report.
pub const SIGNIFICANT_DIGITS: i32 = 12;

/// Fixed notation with twelve significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", (SIGNIFICANT_DIGITS - 1) as usize, 0.0);
    }
    let decimals = |mag: i32| (SIGNIFICANT_DIGITS - 1 - mag).max(0) as usize;
    let mag = x.abs().log10().floor() as i32;
    let s = format!("{:.*}", decimals(mag), x);
    // Rounding can carry into a new leading digit, e.g. 9.99…96 -> 10.00…0.
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 10f64.powi(mag + 1) {
        format!("{:.*}", decimals(mag + 1), x)
    } else {
        s
    }
}

pub fn fmt_ratio(r: Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn fmt_set(set: &NodeSet) -> String {
    let ids: Vec<String> = set.iter().map(|v| v.to_string()).collect();
    format!("{{{}}}", ids.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub fields: Vec<(String, String)>,
    pub table: Option<Table>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            fields: Vec::new(),
            table: None,
        }
    }

    pub fn field(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn num(self, key: impl Into<String>, value: f64) -> Self {
        self.field(key, fmt_num(value))
    }

    pub fn with_table<I, R, S>(mut self, columns: &[&str], rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.table = Some(Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(Into::into).collect())
                .collect(),
        });
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("report line {line}: {message}")]
pub struct ReportError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ReportError {
    ReportError {
        line,
        message: message.into(),
    }
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, section: Section) {
        self.sections.push(section);
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn parse(text: &str) -> Result<Report, ReportError> {
        let mut report = Report::new();
        let mut in_table = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                in_table = false;
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, "unterminated section header"))?;
                if !valid_token(name) {
                    return Err(err(line_no, format!("bad section name {name:?}")));
                }
                report.sections.push(Section::new(name));
                in_table = false;
                continue;
            }
            let section = report
                .sections
                .last_mut()
                .ok_or_else(|| err(line_no, "content before the first section"))?;
            if let Some(rest) = line.strip_prefix("@columns") {
                if section.table.is_some() {
                    return Err(err(line_no, "second table in one section"));
                }
                let columns: Vec<String> = rest.split_whitespace().map(String::from).collect();
                if columns.is_empty() || !rest.starts_with(char::is_whitespace) {
                    return Err(err(line_no, "table without columns"));
                }
                section.table = Some(Table {
                    columns,
                    rows: Vec::new(),
                });
                in_table = true;
                continue;
            }
            if in_table {
                let table = section.table.as_mut().expect("in_table implies a table");
                let row: Vec<String> = line.split_whitespace().map(String::from).collect();
                if row.len() != table.columns.len() {
                    return Err(err(
                        line_no,
                        format!("row has {} cells, expected {}", row.len(), table.columns.len()),
                    ));
                }
                table.rows.push(row);
                continue;
            }
            if section.table.is_some() {
                return Err(err(line_no, "field after table"));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if !valid_token(key) {
                return Err(err(line_no, format!("bad key {key:?}")));
            }
            section.fields.push((key.to_string(), value.trim().to_string()));
        }
        Ok(report)
    }
}

/// Section names, keys, columns and cells: nonempty, no whitespace and none
/// of the structural characters.
pub fn valid_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || matches!(c, '=' | '[' | ']')) && !s.starts_with('@')
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, section) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{}]", section.name)?;
            for (k, v) in &section.fields {
                if v.is_empty() {
                    writeln!(f, "{k} =")?;
                } else {
                    writeln!(f, "{k} = {v}")?;
                }
            }
            if let Some(table) = &section.table {
                writeln!(f, "@columns {}", table.columns.join(" "))?;
                for row in &table.rows {
                    writeln!(f, "{}", row.join(" "))?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Section builders
// ---------------------------------------------------------------------------

pub fn graph_section(g: &Graph, source: &str) -> Section {
    Section::new("graph")
        .field("source", source)
        .field("n", g.node_count())
        .field("m", g.edge_count())
        .field("max_degree", g.max_degree())
}

/// Vector entries, value descending then node ascending.
pub fn vector_section(v: &PhkprVector) -> Section {
    let kind = match v.kind {
        VectorKind::Exact => "exact",
        VectorKind::Estimated { .. } => "estimated",
    };
    let mut s = Section::new("vector")
        .field("seed_node", v.seed)
        .num("t", v.t)
        .field("kind", kind);
    if let Some(tokens) = v.tokens() {
        s = s.field("tokens", tokens);
    }
    s = s.field("support", v.support_len()).num("sum", v.sum());
    let counts: Option<std::collections::HashMap<_, _>> = v.token_counts().map(|c| c.collect());
    match counts {
        Some(counts) => s.with_table(
            &["node", "value", "count"],
            v.ranked()
                .into_iter()
                .map(|(node, x)| vec![node.to_string(), fmt_num(x), counts[&node].to_string()]),
        ),
        None => s.with_table(
            &["node", "value"],
            v.ranked()
                .into_iter()
                .map(|(node, x)| vec![node.to_string(), fmt_num(x)]),
        ),
    }
}

pub fn stats_section(name: &str, stats: &RoundStats) -> Section {
    Section::new(name)
        .field("rounds", stats.rounds)
        .field("logical_rounds", stats.logical_rounds)
        .field("messages", stats.total_messages)
        .field("max_node_messages", stats.max_node_messages)
        .field("max_edge_bits", stats.max_edge_bits)
        .field("congestion_events", stats.congestion_events)
}

pub fn sweep_section(res: &SweepResult) -> Section {
    let ordering: Vec<String> = res.ordering.iter().map(|v| v.to_string()).collect();
    let mut s = Section::new("sweep")
        .field("ordering", ordering.join(","))
        .field("best_prefix", res.best_prefix)
        .field("best_ratio", fmt_ratio(res.best_ratio))
        .num(
            "best_ratio_value",
            *res.best_ratio.numer() as f64 / *res.best_ratio.denom() as f64,
        )
        .field("best_set", fmt_set(&res.best_set))
        .field("best_set_size", res.best_set.len())
        .field("stopped_early", res.stopped_early)
        .field("rounds_charged", res.rounds_charged);
    for (phase, rounds) in &res.phase_rounds {
        s = s.field(format!("phase_rounds.{phase}"), rounds);
    }
    if let Some(bound) = res.round_bound {
        s = s.field("round_bound", bound).field(
            "round_bound_form",
            format!("{ROUND_BOUND_A}*ceil(1/eps)+{ROUND_BOUND_B}*K"),
        );
    }
    s.with_table(
        &["j", "node", "left", "right", "volume", "boundary", "ratio"],
        res.profile.iter().map(|p| {
            vec![
                p.size.to_string(),
                p.node.to_string(),
                p.left.to_string(),
                p.right.to_string(),
                p.volume.to_string(),
                p.boundary.to_string(),
                fmt_ratio(p.ratio),
            ]
        }),
    )
}

pub fn kmachine_section(name: &str, rows: &[KmBound], crossover: Option<f64>) -> Section {
    let mut s = Section::new(name).field("hidden_factors", "polylog(n)");
    if let Some(k) = crossover {
        s = s.num("crossover_k", k);
    }
    s.with_table(
        &["k", "message_term", "round_term", "bound", "dominant"],
        rows.iter().map(|b| {
            vec![
                b.k.to_string(),
                fmt_num(b.message_term),
                fmt_num(b.round_term),
                fmt_num(b.bound),
                b.dominant.as_str().to_string(),
            ]
        }),
    )
}

/// One `round from to bits` line per trace event.
pub fn trace_text(trace: &[TraceEvent]) -> String {
    let mut out = String::from("# round from to bits\n");
    for e in trace {
        out.push_str(&format!("{} {} {} {}\n", e.round, e.from, e.to, e.bits));
    }
    out
}
