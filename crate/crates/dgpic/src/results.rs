//! Result tables: per-seed CSV rows, seed aggregates and console rendering.
//!
//! CSV files keep raw Chamfer distances; the console shows them ×10³.

use std::fmt::Write as _;
use std::path::Path;

use dgpic_core::data::TaskKind;
use dgpic_core::engine::ShiftMode;
use serde::{Deserialize, Serialize};

use crate::binio::{read_file, write_file};
use crate::error::{DgpicError, Result};

pub const CSV_HEADER: &str = "mode,task,seed,mean_cd,n_samples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: ShiftMode,
    pub task: TaskKind,
    pub seed: u64,
    pub mean_cd: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Mean and sample standard deviation of one (mode, task) cell over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mode: ShiftMode,
    pub task: TaskKind,
    pub mean: f64,
    /// Zero when only one seed is present.
    pub std: f64,
    pub seeds: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ResultTable {
    /// Sorts rows by (mode, task, seed) in declaration order.
    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (mode_rank(r.mode), r.task, r.seed));
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        if self.rows.is_empty() {
            return format!("{CSV_HEADER}\n");
        }
        for r in &self.rows {
            w.serialize(r).expect("row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is UTF-8")
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| DgpicError::parse(path, 1, e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
            return Err(DgpicError::parse(path, 1, format!("expected header {CSV_HEADER}")));
        }
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| DgpicError::parse(path, i + 2, e.to_string())))
            .collect::<Result<Vec<ResultRow>>>()?;
        Ok(ResultTable { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = read_file(path, "results table")?;
        let text = String::from_utf8(raw).map_err(|_| DgpicError::format(path, "not UTF-8"))?;
        Self::from_csv(&text, path)
    }

    pub fn modes(&self) -> Vec<ShiftMode> {
        let mut m: Vec<ShiftMode> = Vec::new();
        for r in &self.rows {
            if !m.contains(&r.mode) {
                m.push(r.mode);
            }
        }
        m.sort_by_key(|&x| mode_rank(x));
        m
    }

    pub fn tasks(&self) -> Vec<TaskKind> {
        let mut t: Vec<TaskKind> = self.rows.iter().map(|r| r.task).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn aggregate(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for mode in self.modes() {
            for task in self.tasks() {
                let vals: Vec<f64> =
                    self.rows.iter().filter(|r| r.mode == mode && r.task == task).map(|r| r.mean_cd).collect();
                if vals.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&vals);
                out.push(Aggregate { mode, task, mean, std, seeds: vals.len() });
            }
        }
        out
    }

    /// Modes ordered by their task-averaged mean CD, best first.
    pub fn ranking(&self) -> Vec<(ShiftMode, f64)> {
        let agg = self.aggregate();
        let mut rank: Vec<(ShiftMode, f64)> = self
            .modes()
            .into_iter()
            .map(|m| {
                let v: Vec<f64> = agg.iter().filter(|a| a.mode == m).map(|a| a.mean).collect();
                (m, v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        rank.sort_by(|a, b| a.1.total_cmp(&b.1).then(mode_rank(a.0).cmp(&mode_rank(b.0))));
        rank
    }

    /// Mode × task grid of `mean ± std`, scaled by 10³ with one decimal.
    pub fn render(&self) -> String {
        let tasks = self.tasks();
        let agg = self.aggregate();
        let width = 26;
        let mut s = format!("{:<width$}", "mode (CD x1e-3)");
        for t in &tasks {
            let _ = write!(s, "{:>18}", t.as_str());
        }
        s.push('\n');
        for mode in self.modes() {
            let _ = write!(s, "{:<width$}", mode.as_str());
            for &t in &tasks {
                match agg.iter().find(|a| a.mode == mode && a.task == t) {
                    Some(a) => {
                        let _ = write!(s, "{:>18}", format!("{:.1} ± {:.1}", a.mean * 1e3, a.std * 1e3));
                    }
                    None => {
                        let _ = write!(s, "{:>18}", "-");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn render_ranking(&self) -> String {
        let mut s = String::from("ranking (task-averaged CD x1e-3)\n");
        for (i, (m, v)) in self.ranking().iter().enumerate() {
            let _ = writeln!(s, "{:>2}. {:<24}{:>8.1}", i + 1, m.as_str(), v * 1e3);
        }
        s
    }
}

fn mode_rank(m: ShiftMode) -> usize {
    ShiftMode::ALL.iter().position(|&x| x == m).expect("mode listed in ALL")
}

/// `epoch,loss` with one row per epoch.
pub fn loss_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, l);
    }
    s
}
