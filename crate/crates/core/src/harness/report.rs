//! Cost table over several reports: one column per report, rows in the
//! order OPT Offline, MWA Online, Our Algo, Avg of experts.

use super::RunReport;

pub const ROW_LABELS: [&str; 4] = ["OPT Offline", "MWA Online", "Our Algo", "Avg of experts"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// `cells[row][column]`, rows as in [`ROW_LABELS`].
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn to_markdown(&self) -> String {
        if self.is_empty() {
            return String::new();
        }
        let mut s = String::from("|");
        for c in std::iter::once("").chain(self.columns.iter().map(String::as_str)) {
            s.push_str(&format!(" {c} |"));
        }
        s.push_str("\n|");
        for _ in 0..=self.columns.len() {
            s.push_str("---|");
        }
        s.push('\n');
        for (label, row) in ROW_LABELS.iter().zip(&self.cells) {
            s.push_str(&format!("| {label} |"));
            for v in row {
                match v {
                    Some(v) => s.push_str(&format!(" {v:.2} |")),
                    None => s.push_str(" - |"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        if self.is_empty() {
            return String::new();
        }
        let quote = |f: &str| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        };
        let mut s = String::from("row");
        for c in &self.columns {
            s.push(',');
            s.push_str(&quote(c));
        }
        s.push('\n');
        for (label, row) in ROW_LABELS.iter().zip(&self.cells) {
            s.push_str(label);
            for v in row {
                s.push(',');
                if let Some(v) = v {
                    s.push_str(&format!("{v}"));
                }
            }
            s.push('\n');
        }
        s
    }
}

pub fn emit_table(reports: &[RunReport]) -> Table {
    let pick = |f: fn(&RunReport) -> Option<f64>| reports.iter().map(f).collect::<Vec<_>>();
    Table {
        columns: reports.iter().map(|r| r.id.clone()).collect(),
        cells: vec![
            pick(|r| r.benchmarks.offline_opt),
            pick(|r| r.costs.mwa),
            pick(|r| r.costs.alg),
            pick(|r| r.costs.avg_experts),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{AlgoCosts, BenchmarkValues};

    fn report(id: &str, opt: f64, mwa: f64, alg: f64) -> RunReport {
        RunReport {
            id: id.into(),
            generator: None,
            n: 1,
            rows: 1,
            k_effective: None,
            rho: None,
            costs: AlgoCosts {
                alg: Some(alg),
                mwa: Some(mwa),
                ..Default::default()
            },
            benchmarks: BenchmarkValues {
                offline_opt: Some(opt),
                ..Default::default()
            },
            expert_costs: Vec::new(),
            ratio_constant: 4.0,
            checks: Vec::new(),
            passed: true,
            notes: Vec::new(),
        }
    }

    #[test]
    fn empty_input_gives_empty_table() {
        let t = emit_table(&[]);
        assert!(t.is_empty());
        assert_eq!(t.to_markdown(), "");
        assert_eq!(t.to_csv(), "");
    }

    #[test]
    fn layout() {
        let t = emit_table(&[report("worst, n=10", 1.0, 2.9, 2.2), report("b", 3.0, 4.0, 5.0)]);
        assert_eq!(
            t.to_markdown(),
            "|  | worst, n=10 | b |\n|---|---|---|\n| OPT Offline | 1.00 | 3.00 |\n\
             | MWA Online | 2.90 | 4.00 |\n| Our Algo | 2.20 | 5.00 |\n| Avg of experts | - | - |\n"
        );
        assert_eq!(
            t.to_csv(),
            "row,\"worst, n=10\",b\nOPT Offline,1,3\nMWA Online,2.9,4\nOur Algo,2.2,5\nAvg of experts,,\n"
        );
    }
}
