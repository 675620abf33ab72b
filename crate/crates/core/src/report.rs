//! Per-instance result rows, as CSV or an aligned text table.

use std::io;

use serde::{Deserialize, Serialize};

use crate::aco::HybridResult;
use crate::instance::Instance;
use crate::CandidateSolution;

/// One solved instance. Column names follow the usual coverage table,
/// followed by objective, PI-bound and wall time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "ID")]
    pub id: String,
    #[serde(rename = "|T|")]
    pub terminals: usize,
    #[serde(rename = "|B|")]
    pub bases: usize,
    /// Terminals served by the best ant solution (hybrid runs only).
    #[serde(rename = "|T*| (ACO)")]
    pub served_aco: Option<usize>,
    /// Terminals served by the reported solution.
    #[serde(rename = "|T*| (ACO+RINS)")]
    pub served: usize,
    #[serde(rename = "Cov%")]
    pub coverage_pct: f64,
    #[serde(rename = "Max size cluster")]
    pub max_cluster: usize,
    #[serde(rename = "Objective")]
    pub objective: f64,
    #[serde(rename = "PI-bound")]
    pub pi_bound: Option<f64>,
    #[serde(rename = "Time (s)")]
    pub wall_seconds: f64,
}

pub const COLUMNS: [&str; 10] = [
    "ID",
    "|T|",
    "|B|",
    "|T*| (ACO)",
    "|T*| (ACO+RINS)",
    "Cov%",
    "Max size cluster",
    "Objective",
    "PI-bound",
    "Time (s)",
];

impl ReportRow {
    /// Row for a solution found without ants (exact or oracle).
    pub fn for_solution(id: &str, inst: &Instance, sol: &CandidateSolution, objective: f64, wall_seconds: f64) -> Self {
        let served = sol.num_served();
        ReportRow {
            id: id.to_string(),
            terminals: inst.num_terminals(),
            bases: inst.num_bases(),
            served_aco: None,
            served,
            coverage_pct: coverage_pct(served, inst.num_terminals()),
            max_cluster: served_max_cluster(sol),
            objective,
            pi_bound: None,
            wall_seconds,
        }
    }

    pub fn for_hybrid(id: &str, inst: &Instance, r: &HybridResult, wall_seconds: f64) -> Self {
        ReportRow {
            served_aco: Some(r.best_ant.num_served()),
            pi_bound: Some(r.pi_bound),
            ..ReportRow::for_solution(id, inst, &r.best, r.best_value, wall_seconds)
        }
    }
}

pub fn coverage_pct(served: usize, terminals: usize) -> f64 {
    if terminals == 0 {
        0.0
    } else {
        100.0 * served as f64 / terminals as f64
    }
}

/// Largest cluster among served terminals.
fn served_max_cluster(sol: &CandidateSolution) -> usize {
    sol.cluster
        .iter()
        .zip(&sol.served)
        .filter(|(_, &s)| s)
        .map(|(c, _)| c.len())
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            out.write_record(COLUMNS)?;
        }
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> csv::Result<Self> {
        let rows = csv::Reader::from_reader(r).deserialize().collect::<csv::Result<_>>()?;
        Ok(RunReport { rows })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Aligned table; numbers right-aligned, absent values as `-`.
    pub fn render_table(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.terminals.to_string(),
                    r.bases.to_string(),
                    r.served_aco.map_or("-".into(), |v| v.to_string()),
                    r.served.to_string(),
                    format!("{:.1}", r.coverage_pct),
                    r.max_cluster.to_string(),
                    format!("{:.4}", r.objective),
                    r.pi_bound.map_or("-".into(), |v| format!("{v:.4}")),
                    format!("{:.2}", r.wall_seconds),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..COLUMNS.len())
            .map(|i| cells.iter().map(|c| c[i].len()).chain([COLUMNS[i].chars().count()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let parts: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let pad = widths[i].saturating_sub(c.chars().count());
                    if i == 0 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &COLUMNS.map(String::from));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, &rule);
        for row in &cells {
            line(&mut out, row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, aco: Option<usize>, bound: Option<f64>) -> ReportRow {
        ReportRow {
            id: id.into(),
            terminals: 50,
            bases: 8,
            served_aco: aco,
            served: 41,
            coverage_pct: coverage_pct(41, 50),
            max_cluster: 2,
            objective: 39.000000000000014,
            pi_bound: bound,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn header_order() {
        let text = RunReport { rows: vec![row("a", Some(30), Some(50.0))] }.to_csv_string();
        assert_eq!(
            text.lines().next().unwrap(),
            "ID,|T|,|B|,|T*| (ACO),|T*| (ACO+RINS),Cov%,Max size cluster,Objective,PI-bound,Time (s)"
        );
        let empty = RunReport::default().to_csv_string();
        assert_eq!(empty.lines().next(), text.lines().next());
    }

    #[test]
    fn csv_round_trip() {
        let report = RunReport {
            rows: vec![row("g1", Some(30), Some(49.99999999999991)), row("g,2", None, None)],
        };
        let back = RunReport::read_csv(report.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn table_has_every_row() {
        let t = RunReport { rows: vec![row("g1", None, Some(50.0))] }.render_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("ID"));
        assert!(lines[2].contains("82.0") && lines[2].contains(" - "));
    }

    #[test]
    fn coverage_fraction() {
        assert_eq!(coverage_pct(1, 4), 25.0);
        assert_eq!(coverage_pct(0, 0), 0.0);
    }
}
