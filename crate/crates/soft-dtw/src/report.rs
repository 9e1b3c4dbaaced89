//! Structured reports for command-line runs.
//!
//! A report renders to a small text format: a header with the command
//! name, a timestamp, and the elapsed time, then `[config]` and
//! `[metrics]` key-value sections, then any number of `[table NAME]`
//! sections holding comma-separated rows. The format parses back into an
//! equal value.
//!
//! The `timestamp:` and `elapsed_seconds:` header lines are the only parts
//! that vary between identical runs; [`strip_volatile`] removes them so
//! two renders can be compared byte for byte.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

/// A named table with one header row and comma-separated cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Table {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: &[String]) {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(cells.to_vec());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub command: String,
    /// Seconds since the Unix epoch at creation time.
    pub timestamp: u64,
    pub elapsed_seconds: Option<f64>,
    pub config: Vec<(String, String)>,
    pub metrics: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

fn check_key(key: &str) {
    assert!(
        !key.is_empty() && !key.contains(':') && !key.contains('\n') && !key.contains('['),
        "report keys must be plain words, got {key:?}"
    );
}

fn check_cell(cell: &str) {
    assert!(
        !cell.contains(',') && !cell.contains('\n'),
        "table cells must not contain commas or newlines, got {cell:?}"
    );
}

impl ExperimentReport {
    pub fn new(command: impl Into<String>) -> ExperimentReport {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ExperimentReport {
            command: command.into(),
            timestamp,
            elapsed_seconds: None,
            config: Vec::new(),
            metrics: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn set_elapsed(&mut self, seconds: f64) {
        self.elapsed_seconds = Some(seconds);
    }

    pub fn push_config(&mut self, key: &str, value: impl Display) {
        check_key(key);
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn push_metric(&mut self, key: &str, value: impl Display) {
        check_key(key);
        self.metrics.push((key.to_string(), value.to_string()));
    }

    pub fn push_table(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        out.push_str(&format!("timestamp: {}\n", self.timestamp));
        if let Some(elapsed) = self.elapsed_seconds {
            out.push_str(&format!("elapsed_seconds: {elapsed}\n"));
        }
        for (header, entries) in [("config", &self.config), ("metrics", &self.metrics)] {
            if entries.is_empty() {
                continue;
            }
            out.push_str(&format!("\n[{header}]\n"));
            for (key, value) in entries {
                out.push_str(&format!("{key}: {value}\n"));
            }
        }
        for table in &self.tables {
            out.push_str(&format!("\n[table {}]\n", table.name));
            for column in &table.columns {
                check_cell(column);
            }
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for row in &table.rows {
                for cell in row {
                    check_cell(cell);
                }
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    /// Parses text produced by [`render`](Self::render) back into an equal
    /// report.
    pub fn parse(text: &str) -> Result<ExperimentReport> {
        enum Section {
            Header,
            Config,
            Metrics,
            Table(bool),
        }
        let parse_error = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let mut report = ExperimentReport {
            command: String::new(),
            timestamp: 0,
            elapsed_seconds: None,
            config: Vec::new(),
            metrics: Vec::new(),
            tables: Vec::new(),
        };
        let mut section = Section::Header;
        let mut saw_command = false;
        for (index, line) in text.lines().enumerate() {
            let number = index + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| parse_error(number, "unterminated section header"))?;
                section = match name {
                    "config" => Section::Config,
                    "metrics" => Section::Metrics,
                    _ => match name.strip_prefix("table ") {
                        Some(table_name) => {
                            report.tables.push(Table {
                                name: table_name.to_string(),
                                columns: Vec::new(),
                                rows: Vec::new(),
                            });
                            Section::Table(false)
                        }
                        None => return Err(parse_error(number, "unknown section")),
                    },
                };
                continue;
            }
            match &mut section {
                Section::Header => {
                    let (key, value) = line
                        .split_once(": ")
                        .ok_or_else(|| parse_error(number, "expected `key: value`"))?;
                    match key {
                        "command" => {
                            report.command = value.to_string();
                            saw_command = true;
                        }
                        "timestamp" => {
                            report.timestamp = value
                                .parse()
                                .map_err(|_| parse_error(number, "bad timestamp"))?;
                        }
                        "elapsed_seconds" => {
                            let seconds: f64 = value
                                .parse()
                                .map_err(|_| parse_error(number, "bad elapsed time"))?;
                            report.elapsed_seconds = Some(seconds);
                        }
                        _ => return Err(parse_error(number, "unknown header field")),
                    }
                }
                Section::Config | Section::Metrics => {
                    let (key, value) = line
                        .split_once(": ")
                        .ok_or_else(|| parse_error(number, "expected `key: value`"))?;
                    let entries = if matches!(section, Section::Config) {
                        &mut report.config
                    } else {
                        &mut report.metrics
                    };
                    entries.push((key.to_string(), value.to_string()));
                }
                Section::Table(saw_columns) => {
                    let cells: Vec<String> = line.split(',').map(str::to_string).collect();
                    let table = report.tables.last_mut().expect("a table is open");
                    if *saw_columns {
                        if cells.len() != table.columns.len() {
                            return Err(parse_error(number, "row width differs from header"));
                        }
                        table.rows.push(cells);
                    } else {
                        table.columns = cells;
                        *saw_columns = true;
                    }
                }
            }
        }
        if !saw_command {
            return Err(parse_error(1, "missing command header"));
        }
        Ok(report)
    }
}

/// Drops the `timestamp:` and `elapsed_seconds:` header lines, leaving
/// only content that identical runs reproduce byte for byte.
pub fn strip_volatile(text: &str) -> String {
    text.lines()
        .filter(|line| {
            !line.starts_with("timestamp: ") && !line.starts_with("elapsed_seconds: ")
        })
        .map(|line| format!("{line}\n"))
        .collect()
}
